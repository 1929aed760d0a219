#include "stopnav/language/vocabulary.hpp"

#include <cctype>

#include "stopnav/error.hpp"
#include "stopnav/language/instructions.hpp"

namespace stopnav::language {

Vocabulary::Vocabulary(std::span<const std::string> words) {
  words_ = {"<pad>", "<unk>", "<bos>", "<eos>"};
  for (TokenId i = 0; i < 4; ++i) index_.emplace(words_[i], i);
  for (const auto& w : words) {
    if (w.empty()) throw Error(ErrorCode::invalid_argument, "vocabulary: empty word");
    if (!index_.emplace(w, static_cast<TokenId>(words_.size())).second) {
      throw Error(ErrorCode::invalid_argument, "vocabulary: duplicate word '" + w + "'");
    }
    words_.push_back(w);
  }
}

TokenId Vocabulary::index(std::string_view word) const noexcept {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view word) const noexcept { return index_.contains(std::string(word)); }

const std::string& Vocabulary::word(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= words_.size()) {
    throw Error(ErrorCode::invalid_argument, "vocabulary: token index " + std::to_string(id) + " out of range");
  }
  return words_[static_cast<std::size_t>(id)];
}

const Vocabulary& instruction_vocabulary() {
  static const Vocabulary vocab(generator_lexicon());
  return vocab;
}

std::string normalize(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      if (pending_space && !out.empty()) out += ' ';
      pending_space = false;
      out += static_cast<char>(std::tolower(c));
    } else {
      pending_space = true;
    }
  }
  return out;
}

Instruction tokenize(std::string_view text, const Vocabulary& vocab) {
  const std::string norm = normalize(text);
  if (norm.empty()) throw Error(ErrorCode::invalid_argument, "tokenize: empty text");
  Instruction ins;
  ins.tokens.push_back(kBos);
  std::size_t pos = 0;
  while (pos < norm.size()) {
    std::size_t end = norm.find(' ', pos);
    if (end == std::string::npos) end = norm.size();
    ins.tokens.push_back(vocab.index(std::string_view(norm).substr(pos, end - pos)));
    pos = end + 1;
  }
  ins.tokens.push_back(kEos);
  return ins;
}

std::string detokenize(const Instruction& instruction, const Vocabulary& vocab) {
  std::string out;
  for (TokenId id : instruction.tokens) {
    if (id == kBos || id == kEos || id == kPad) continue;
    if (!out.empty()) out += ' ';
    out += vocab.word(id);
  }
  return out;
}

}  // namespace stopnav::language
