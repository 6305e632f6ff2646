#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace textclf {

// Tokenizer: lowercases, maps URLs to "<url>" and @-mentions to "<user>",
// splits punctuation into standalone tokens, keeps emoji and other symbols
// as standalone tokens. Letters cover ASCII plus Latin-1/Latin-Extended
// ranges so accented words stay whole.
std::vector<std::string> normalize(std::string_view text);

// Frequency-ranked token map with reserved entries PAD=0 and OOV=1.
// Ranking is by descending corpus frequency, ties broken lexicographically.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kOov = 1;
  static const char* pad_token() { return "<pad>"; }
  static const char* oov_token() { return "<oov>"; }

  Vocabulary() = default;

  // Builds from already-tokenized texts. cap includes the two reserved
  // entries. Caller must pass training-split tokens only.
  static Vocabulary build(const std::vector<std::vector<std::string>>& token_lists,
                          int cap);
  // Reconstructs from an index-ordered token list (checkpoint loading).
  static Vocabulary from_tokens(std::vector<std::string> index_to_token);

  int lookup(const std::string& token) const;
  bool contains(const std::string& token) const;
  int size() const { return static_cast<int>(index_to_token_.size()); }
  int cap() const { return cap_; }
  const std::vector<std::string>& tokens() const { return index_to_token_; }

 private:
  std::unordered_map<std::string, int> token_to_index_;
  std::vector<std::string> index_to_token_;
  int cap_ = 0;
};

// Fixed-length index sequence. Positions >= true_length are PAD.
struct EncodedSequence {
  std::vector<int> indices;
  int true_length = 0;
  int length() const { return static_cast<int>(indices.size()); }
};

// Maps tokens to indices (OOV for unknowns), truncates to k, right-pads with
// PAD. Empty token lists are an error: an all-PAD sequence has no meaning.
EncodedSequence encode(const std::vector<std::string>& tokens,
                       const Vocabulary& vocab, int k);

// Consecutive non-overlapping chunks of `size`. A final remainder shorter
// than min_remainder is merged into the previous chunk, unless it is the
// only chunk.
std::vector<std::vector<std::string>> chunk(
    const std::vector<std::string>& tokens, int size, int min_remainder = 10);

}  // namespace textclf
