#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <unordered_map>
#include <vector>

namespace decsal {

using TokenId = std::int32_t;

// Reserved special tokens occupy fixed ids 0..4.
inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kMaskId = 1;
inline constexpr TokenId kClsId = 2;
inline constexpr TokenId kSepId = 3;
inline constexpr TokenId kUnkId = 4;
inline constexpr std::size_t kNumSpecials = 5;

/// Bidirectional token<->id map. Immutable after construction; content
/// tokens follow the specials ordered by descending corpus frequency with
/// lexicographic tie-breaks.
class Vocabulary {
 public:
  explicit Vocabulary(std::vector<std::string> content_tokens);

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(TokenId id) const;
  TokenId id_of(const std::string& token) const;  // kUnkId when absent
  bool contains(const std::string& token) const;
  static bool is_special(TokenId id) { return id >= 0 && id < static_cast<TokenId>(kNumSpecials); }

  std::string to_json() const;
  static Vocabulary from_json(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

/// An encoded input: fixed-length id sequence with an attention flag per
/// position. [PAD] positions always carry mask=off.
struct TokenSeq {
  std::vector<TokenId> ids;
  std::vector<std::uint8_t> mask;  // 1 = attended, 0 = excluded as key

  std::size_t length() const { return ids.size(); }
  // The T distinct non-special ids, in first-appearance order.
  std::vector<TokenId> unique_content_ids() const;
  // Positions holding non-special tokens.
  std::vector<std::size_t> content_positions() const;
};

// Lowercase + whitespace/punctuation split; punctuation is a separator.
std::vector<std::string> tokenize_words(const std::string& text);

Vocabulary build_vocab(std::istream& corpus, std::size_t max_size, std::size_t min_freq);
Vocabulary build_vocab_from_texts(const std::vector<std::string>& texts, std::size_t max_size,
                                  std::size_t min_freq);

TokenSeq encode(const Vocabulary& v, const std::string& text, std::size_t n_max);
std::string decode_ids(const Vocabulary& v, const std::vector<TokenId>& ids);

}  // namespace decsal
