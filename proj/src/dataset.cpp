#include "textclf/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "textclf/errors.hpp"
#include "textclf/rng.hpp"

namespace textclf {

using nlohmann::json;

Gender parse_gender(const std::string& s) {
  if (s == "F") return Gender::female;
  if (s == "M") return Gender::male;
  throw DataError("gender must be \"F\" or \"M\", got \"" + s + "\"");
}

std::string gender_str(Gender g) {
  return g == Gender::female ? "F" : "M";
}

Gender Document::label() const {
  if (!gender)
    throw DataError("subject " + subject_id + " has no gender label");
  return *gender;
}

std::vector<Document> load_dataset(const std::string& path,
                                   bool require_gender) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path);

  std::vector<Document> docs;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(where + ": malformed JSON record: " + e.what());
    }
    if (!record.is_object())
      throw DataError(where + ": record must be a JSON object");
    if (!record.contains("subject_id") || !record["subject_id"].is_string())
      throw DataError(where + ": missing or non-string field 'subject_id'");
    if (!record.contains("texts") || !record["texts"].is_array() ||
        record["texts"].empty())
      throw DataError(where + ": field 'texts' must be a non-empty array");

    Document doc;
    doc.subject_id = record["subject_id"].get<std::string>();
    if (!seen_ids.insert(doc.subject_id).second)
      throw DataError(where + ": duplicate subject_id '" + doc.subject_id + "'");
    for (const auto& t : record["texts"]) {
      if (!t.is_string())
        throw DataError(where + ": field 'texts' must contain only strings");
      doc.texts.push_back(t.get<std::string>());
    }
    if (record.contains("gender")) {
      if (!record["gender"].is_string())
        throw DataError(where + ": field 'gender' must be a string");
      try {
        doc.gender = parse_gender(record["gender"].get<std::string>());
      } catch (const DataError& e) {
        throw DataError(where + ": " + e.what());
      }
    } else if (require_gender) {
      throw DataError(where + ": missing required field 'gender'");
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

void save_dataset(const std::vector<Document>& docs, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write dataset file: " + path);
  for (const auto& doc : docs) {
    nlohmann::ordered_json record;
    record["subject_id"] = doc.subject_id;
    if (doc.gender) record["gender"] = gender_str(*doc.gender);
    record["texts"] = doc.texts;
    out << record.dump() << "\n";
  }
  if (!out) throw DataError("failed while writing dataset file: " + path);
}

std::pair<std::vector<Document>, std::vector<Document>> split_subjects(
    const std::vector<Document>& docs, double train_frac, uint64_t seed) {
  if (train_frac <= 0.0 || train_frac >= 1.0)
    throw DataError("train fraction must lie strictly between 0 and 1");

  std::vector<size_t> by_class[2];
  for (size_t i = 0; i < docs.size(); ++i)
    by_class[gender_index(docs[i].label())].push_back(i);

  for (int c = 0; c < 2; ++c) {
    if (by_class[c].size() < 2)
      throw DataError("class " + gender_str(static_cast<Gender>(c)) + " has " +
                      std::to_string(by_class[c].size()) +
                      " subjects; need at least 2 to split");
  }

  std::vector<Document> train, dev;
  for (int c = 0; c < 2; ++c) {
    auto& ids = by_class[c];
    Rng rng = Rng::derive(seed, static_cast<uint64_t>(c));
    rng.shuffle(ids);
    const size_t n = ids.size();
    size_t n_train = static_cast<size_t>(
        std::llround(train_frac * static_cast<double>(n)));
    n_train = std::clamp<size_t>(n_train, 1, n - 1);
    for (size_t i = 0; i < n; ++i)
      (i < n_train ? train : dev).push_back(docs[ids[i]]);
  }
  return {std::move(train), std::move(dev)};
}

}  // namespace textclf
