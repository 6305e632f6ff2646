#include "textclf/text.hpp"

#include <algorithm>
#include <cstdint>

#include "textclf/errors.hpp"

namespace textclf {

namespace {

struct Codepoint {
  uint32_t value;
  int length;  // bytes consumed
};

// Lenient UTF-8 decode; malformed bytes are taken as single Latin-1 chars.
Codepoint decode_utf8(std::string_view s, size_t pos) {
  const auto byte = [&](size_t i) -> uint32_t {
    return static_cast<unsigned char>(s[i]);
  };
  const uint32_t b0 = byte(pos);
  if (b0 < 0x80) return {b0, 1};
  auto cont = [&](size_t i) {
    return i < s.size() && (byte(i) & 0xC0) == 0x80;
  };
  if ((b0 & 0xE0) == 0xC0 && cont(pos + 1))
    return {((b0 & 0x1F) << 6) | (byte(pos + 1) & 0x3F), 2};
  if ((b0 & 0xF0) == 0xE0 && cont(pos + 1) && cont(pos + 2))
    return {((b0 & 0x0F) << 12) | ((byte(pos + 1) & 0x3F) << 6) |
                (byte(pos + 2) & 0x3F),
            3};
  if ((b0 & 0xF8) == 0xF0 && cont(pos + 1) && cont(pos + 2) && cont(pos + 3))
    return {((b0 & 0x07) << 18) | ((byte(pos + 1) & 0x3F) << 12) |
                ((byte(pos + 2) & 0x3F) << 6) | (byte(pos + 3) & 0x3F),
            4};
  return {b0, 1};
}

void append_utf8(std::string& out, uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_space_cp(uint32_t cp) {
  return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\v' ||
         cp == '\f' || cp == 0xA0;
}

bool is_ascii_alnum(uint32_t cp) {
  return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') ||
         (cp >= 'A' && cp <= 'Z');
}

// Word characters: ASCII alphanumerics plus Latin-1 Supplement and Latin
// Extended-A/B letters (covers Spanish accents and n-tilde).
bool is_word_cp(uint32_t cp) {
  if (is_ascii_alnum(cp)) return true;
  if (cp >= 0xC0 && cp <= 0x24F && cp != 0xD7 && cp != 0xF7) return true;
  return false;
}

uint32_t lower_cp(uint32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 32;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 32;
  return cp;
}

bool is_url_char(uint32_t cp) {
  if (is_ascii_alnum(cp)) return true;
  switch (cp) {
    case ':': case '/': case '.': case '?': case '&': case '=': case '#':
    case '%': case '_': case '~': case '+': case '-':
      return true;
    default:
      return false;
  }
}

bool starts_with_ci(std::string_view s, size_t pos, std::string_view prefix) {
  if (pos + prefix.size() > s.size()) return false;
  for (size_t i = 0; i < prefix.size(); ++i) {
    char c = s[pos + i];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + 32);
    if (c != prefix[i]) return false;
  }
  return true;
}

bool starts_url(std::string_view s, size_t pos) {
  return starts_with_ci(s, pos, "http://") || starts_with_ci(s, pos, "https://") ||
         starts_with_ci(s, pos, "www.");
}

}  // namespace

std::vector<std::string> normalize(std::string_view text) {
  std::vector<std::string> tokens;
  size_t i = 0;
  while (i < text.size()) {
    Codepoint cp = decode_utf8(text, i);
    if (is_space_cp(cp.value)) {
      i += static_cast<size_t>(cp.length);
      continue;
    }
    if (starts_url(text, i)) {
      while (i < text.size()) {
        Codepoint c = decode_utf8(text, i);
        if (!is_url_char(c.value)) break;
        i += static_cast<size_t>(c.length);
      }
      tokens.emplace_back("<url>");
      continue;
    }
    if (cp.value == '@') {
      size_t j = i + 1;
      size_t consumed = 0;
      while (j < text.size()) {
        Codepoint c = decode_utf8(text, j);
        if (!is_ascii_alnum(c.value) && c.value != '_') break;
        j += static_cast<size_t>(c.length);
        ++consumed;
      }
      if (consumed > 0) {
        tokens.emplace_back("<user>");
        i = j;
        continue;
      }
      tokens.emplace_back("@");
      ++i;
      continue;
    }
    if (is_word_cp(cp.value)) {
      std::string word;
      while (i < text.size()) {
        Codepoint c = decode_utf8(text, i);
        if (!is_word_cp(c.value)) break;
        append_utf8(word, lower_cp(c.value));
        i += static_cast<size_t>(c.length);
      }
      tokens.push_back(std::move(word));
      continue;
    }
    // punctuation, emoji, any other symbol: standalone token
    std::string sym;
    append_utf8(sym, cp.value);
    tokens.push_back(std::move(sym));
    i += static_cast<size_t>(cp.length);
  }
  return tokens;
}

Vocabulary Vocabulary::build(
    const std::vector<std::vector<std::string>>& token_lists, int cap) {
  if (cap < 2)
    throw DataError("vocabulary cap must be at least 2 (PAD and OOV), got " +
                    std::to_string(cap));
  std::unordered_map<std::string, int64_t> counts;
  for (const auto& tokens : token_lists)
    for (const auto& t : tokens) ++counts[t];
  if (counts.empty())
    throw DataError("cannot build a vocabulary from an empty corpus");

  std::vector<std::pair<std::string, int64_t>> ranked(counts.begin(),
                                                      counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary vocab;
  vocab.cap_ = cap;
  vocab.index_to_token_ = {pad_token(), oov_token()};
  const size_t keep = std::min(ranked.size(), static_cast<size_t>(cap - 2));
  for (size_t i = 0; i < keep; ++i)
    vocab.index_to_token_.push_back(ranked[i].first);
  for (size_t i = 0; i < vocab.index_to_token_.size(); ++i)
    vocab.token_to_index_[vocab.index_to_token_[i]] = static_cast<int>(i);
  return vocab;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> index_to_token) {
  if (index_to_token.size() < 2 || index_to_token[0] != pad_token() ||
      index_to_token[1] != oov_token())
    throw DataError("token list must start with reserved entries " +
                    std::string(pad_token()) + ", " + oov_token());
  Vocabulary vocab;
  vocab.index_to_token_ = std::move(index_to_token);
  vocab.cap_ = static_cast<int>(vocab.index_to_token_.size());
  for (size_t i = 0; i < vocab.index_to_token_.size(); ++i) {
    auto [it, inserted] =
        vocab.token_to_index_.emplace(vocab.index_to_token_[i], static_cast<int>(i));
    if (!inserted)
      throw DataError("duplicate token in vocabulary list: " +
                      vocab.index_to_token_[i]);
  }
  return vocab;
}

int Vocabulary::lookup(const std::string& token) const {
  auto it = token_to_index_.find(token);
  return it == token_to_index_.end() ? kOov : it->second;
}

bool Vocabulary::contains(const std::string& token) const {
  return token_to_index_.count(token) > 0;
}

EncodedSequence encode(const std::vector<std::string>& tokens,
                       const Vocabulary& vocab, int k) {
  if (k < 1)
    throw std::invalid_argument("sequence length k must be >= 1, got " +
                                std::to_string(k));
  if (tokens.empty())
    throw DataError("cannot encode an empty token list (all-PAD sequences are "
                    "not allowed)");
  EncodedSequence seq;
  seq.indices.assign(static_cast<size_t>(k), Vocabulary::kPad);
  seq.true_length = std::min<int>(k, static_cast<int>(tokens.size()));
  for (int i = 0; i < seq.true_length; ++i)
    seq.indices[static_cast<size_t>(i)] = vocab.lookup(tokens[static_cast<size_t>(i)]);
  return seq;
}

std::vector<std::vector<std::string>> chunk(
    const std::vector<std::string>& tokens, int size, int min_remainder) {
  if (size < 1)
    throw std::invalid_argument("chunk size must be >= 1, got " +
                                std::to_string(size));
  std::vector<std::vector<std::string>> chunks;
  if (tokens.empty()) return chunks;

  const size_t usize = static_cast<size_t>(size);
  const size_t full = tokens.size() / usize;
  const size_t remainder = tokens.size() % usize;
  for (size_t c = 0; c < full; ++c)
    chunks.emplace_back(tokens.begin() + static_cast<long>(c * usize),
                        tokens.begin() + static_cast<long>((c + 1) * usize));
  if (remainder > 0) {
    if (remainder >= static_cast<size_t>(min_remainder) || chunks.empty()) {
      chunks.emplace_back(tokens.end() - static_cast<long>(remainder),
                          tokens.end());
    } else {
      chunks.back().insert(chunks.back().end(),
                           tokens.end() - static_cast<long>(remainder),
                           tokens.end());
    }
  }
  return chunks;
}

}  // namespace textclf
