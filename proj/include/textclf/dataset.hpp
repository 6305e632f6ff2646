#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace textclf {

// Class indices are fixed: female = 0, male = 1. Female is the positive
// class for precision/recall and the tie-break winner in argmax decisions.
enum class Gender { female = 0, male = 1 };

Gender parse_gender(const std::string& s);  // "F" or "M"
std::string gender_str(Gender g);
inline int gender_index(Gender g) { return static_cast<int>(g); }

// One subject: id, label, and their raw texts (one string per post for
// tweet-like corpora, a single long string for conversation-like corpora).
struct Document {
  std::string subject_id;
  std::optional<Gender> gender;  // absent only in prediction inputs
  std::vector<std::string> texts;

  Gender label() const;  // throws DataError when gender is absent
};

// JSONL, one object per line:
//   {"subject_id": str, "gender": "F"|"M", "texts": [str, ...]}
std::vector<Document> load_dataset(const std::string& path,
                                   bool require_gender = true);
void save_dataset(const std::vector<Document>& docs, const std::string& path);

// Subject-level split, stratified by gender, deterministic under seed.
// Every class needs at least 2 subjects so both sides are non-empty.
std::pair<std::vector<Document>, std::vector<Document>> split_subjects(
    const std::vector<Document>& docs, double train_frac, uint64_t seed);

}  // namespace textclf
