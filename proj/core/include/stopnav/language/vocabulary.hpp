#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace stopnav::language {

using TokenId = std::int32_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kUnk = 1;
inline constexpr TokenId kBos = 2;
inline constexpr TokenId kEos = 3;

/// Token <-> index bijection with PAD, UNK, BOS, EOS fixed at 0..3.
class Vocabulary {
 public:
  /// Words are appended after the reserved tokens in the given order;
  /// duplicates and reserved spellings are rejected.
  explicit Vocabulary(std::span<const std::string> words);

  std::size_t size() const noexcept { return words_.size(); }
  TokenId index(std::string_view word) const noexcept;  // kUnk when absent
  bool contains(std::string_view word) const noexcept;
  const std::string& word(TokenId id) const;

  const std::vector<std::string>& words() const noexcept { return words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Every word the instruction generator can emit.
const Vocabulary& instruction_vocabulary();

struct Instruction {
  std::vector<TokenId> tokens;  // BOS ... EOS
  std::uint64_t route_id = 0;
  friend bool operator==(const Instruction&, const Instruction&) = default;
};

/// Lowercase, punctuation-stripped, single-spaced form.
std::string normalize(std::string_view text);

/// [BOS, words..., EOS]; unknown words map to UNK. Throws invalid_argument on
/// text with no words.
Instruction tokenize(std::string_view text, const Vocabulary& vocab = instruction_vocabulary());

/// Words between BOS/EOS joined by single spaces.
std::string detokenize(const Instruction& instruction, const Vocabulary& vocab = instruction_vocabulary());

}  // namespace stopnav::language
