#include "textclf/synth.hpp"

#include <cmath>
#include <cstdio>

#include "textclf/errors.hpp"
#include "textclf/rng.hpp"

namespace textclf {

namespace {

std::string token_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "w%05d", index);
  return buf;
}

}  // namespace

void SynthConfig::validate() const {
  if (subjects_per_class < 1 || texts_per_subject < 1 || vocab_size < 4)
    throw DataError("synthetic corpus counts must be positive (vocab_size >= 4)");
  if (signal_strength < 0.0 || signal_strength > 1.0)
    throw DataError("signal_strength must lie in [0, 1]");
  if (domain_overlap < 0.0 || domain_overlap > 1.0)
    throw DataError("domain_overlap must lie in [0, 1]");
  if (marker_fraction <= 0.0 || marker_fraction > 0.4)
    throw DataError("marker_fraction must lie in (0, 0.4]");
  if (marker_tilt < 0.5 || marker_tilt > 1.0)
    throw DataError("marker_tilt must lie in [0.5, 1]");
  if (informal_min_len < 1 || informal_max_len < informal_min_len ||
      formal_min_len < 1 || formal_max_len < formal_min_len)
    throw DataError("synthetic text length bounds are inconsistent");
}

std::vector<std::string> SynthLayout::female_markers(bool formal) const {
  const auto& vocab = formal ? formal_vocab : informal_vocab;
  return {vocab.begin(), vocab.begin() + marker_count};
}

std::vector<std::string> SynthLayout::male_markers(bool formal) const {
  const auto& vocab = formal ? formal_vocab : informal_vocab;
  return {vocab.begin() + marker_count, vocab.begin() + 2 * marker_count};
}

SynthLayout synth_layout(const SynthConfig& config) {
  config.validate();
  const int v = config.vocab_size;
  const int shared =
      static_cast<int>(std::llround(config.domain_overlap * v));
  SynthLayout layout;
  layout.marker_count =
      std::max(1, static_cast<int>(std::llround(config.marker_fraction * v)));
  layout.informal_vocab.reserve(static_cast<size_t>(v));
  layout.formal_vocab.reserve(static_cast<size_t>(v));
  for (int i = 0; i < v; ++i)
    layout.informal_vocab.push_back(token_name(i));
  for (int i = 0; i < shared; ++i)
    layout.formal_vocab.push_back(token_name(i));
  for (int i = shared; i < v; ++i)
    layout.formal_vocab.push_back(token_name(v + i - shared));
  return layout;
}

namespace {

struct DomainPools {
  const std::vector<std::string>* vocab;
  int marker_count;  // per gender
  int neutral_begin;
  int neutral_count;
};

std::string make_text(const SynthConfig& cfg, const DomainPools& pools,
                      Gender gender, int length, Rng& rng) {
  std::string text;
  const auto& vocab = *pools.vocab;
  for (int t = 0; t < length; ++t) {
    int index;
    if (rng.bernoulli(cfg.signal_strength)) {
      const bool own = rng.bernoulli(cfg.marker_tilt);
      const bool female_set = (gender == Gender::female) == own;
      const int base = female_set ? 0 : pools.marker_count;
      index = base + static_cast<int>(rng.below(
                         static_cast<uint64_t>(pools.marker_count)));
    } else {
      // rank-skewed neutral draw so vocabulary frequencies look natural
      const double u = rng.uniform();
      index = pools.neutral_begin +
              static_cast<int>(u * u * pools.neutral_count);
      index = std::min(index, pools.neutral_begin + pools.neutral_count - 1);
    }
    if (t) text.push_back(' ');
    text += vocab[static_cast<size_t>(index)];
  }
  return text;
}

std::vector<Document> make_domain(const SynthConfig& cfg,
                                  const DomainPools& pools, bool formal,
                                  const std::string& prefix, Rng& rng) {
  std::vector<Document> docs;
  docs.reserve(static_cast<size_t>(2 * cfg.subjects_per_class));
  for (int c = 0; c < 2; ++c) {
    const Gender gender = static_cast<Gender>(c);
    for (int s = 0; s < cfg.subjects_per_class; ++s) {
      Document doc;
      char id[48];
      std::snprintf(id, sizeof(id), "%s_%c%04d", prefix.c_str(),
                    gender == Gender::female ? 'f' : 'm', s);
      doc.subject_id = id;
      doc.gender = gender;
      if (formal) {
        const int length = rng.int_in(cfg.formal_min_len, cfg.formal_max_len);
        doc.texts.push_back(make_text(cfg, pools, gender, length, rng));
      } else {
        for (int t = 0; t < cfg.texts_per_subject; ++t) {
          const int length =
              rng.int_in(cfg.informal_min_len, cfg.informal_max_len);
          doc.texts.push_back(make_text(cfg, pools, gender, length, rng));
        }
      }
      docs.push_back(std::move(doc));
    }
  }
  return docs;
}

}  // namespace

SynthCorpora generate_synthetic(const SynthConfig& config) {
  config.validate();
  const SynthLayout layout = synth_layout(config);
  if (2 * layout.marker_count >= config.vocab_size)
    throw DataError("marker sets leave no neutral vocabulary; lower "
                    "marker_fraction or raise vocab_size");

  SynthCorpora corpora;
  {
    DomainPools pools{&layout.informal_vocab, layout.marker_count,
                      2 * layout.marker_count,
                      config.vocab_size - 2 * layout.marker_count};
    Rng rng = Rng::derive(config.seed, 0);
    corpora.informal = make_domain(config, pools, false, "inf", rng);
  }
  {
    DomainPools pools{&layout.formal_vocab, layout.marker_count,
                      2 * layout.marker_count,
                      config.vocab_size - 2 * layout.marker_count};
    Rng rng = Rng::derive(config.seed, 1);
    corpora.formal = make_domain(config, pools, true, "for", rng);
  }
  return corpora;
}

}  // namespace textclf
