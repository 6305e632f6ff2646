#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "textclf/dataset.hpp"

namespace textclf {

// Controls the two-domain synthetic corpus generator. Each token is, with
// probability signal_strength, drawn from the gender-marked sub-vocabulary
// (tilted toward the writer's own gender markers by marker_tilt), otherwise
// from the neutral pool under a rank-skewed distribution. signal_strength 0
// therefore yields label-independent text; 1 makes subjects separable by
// counting marker tokens.
struct SynthConfig {
  int subjects_per_class = 100;
  int texts_per_subject = 20;  // informal domain; formal has one long text
  int vocab_size = 2000;
  double signal_strength = 0.15;
  double domain_overlap = 0.7;
  uint64_t seed = 1;

  // Corpus shape. Informal texts mimic tweets; the formal text length range
  // averages 602 tokens, the conversation-corpus shape.
  int informal_min_len = 12;
  int informal_max_len = 24;
  int formal_min_len = 302;
  int formal_max_len = 902;
  double marker_fraction = 0.10;  // per-gender share of the vocabulary
  double marker_tilt = 0.75;      // P(own-gender marker | marker position)

  void validate() const;
};

// Deterministic vocabulary layout shared by both domains: the first
// `overlap * vocab_size` tokens of each domain list are common, and each
// domain's gender markers are the first 2 * marker_count entries of its own
// list (female first). With overlap >= 2 * marker_fraction the markers are
// identical across domains, which is what makes embedding transfer useful.
struct SynthLayout {
  std::vector<std::string> informal_vocab;
  std::vector<std::string> formal_vocab;
  int marker_count = 0;  // per gender, per domain

  std::vector<std::string> female_markers(bool formal) const;
  std::vector<std::string> male_markers(bool formal) const;
};

SynthLayout synth_layout(const SynthConfig& config);

struct SynthCorpora {
  std::vector<Document> informal;
  std::vector<Document> formal;
};

SynthCorpora generate_synthetic(const SynthConfig& config);

}  // namespace textclf
