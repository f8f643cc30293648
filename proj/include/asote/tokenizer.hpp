#ifndef ASOTE_TOKENIZER_HPP
#define ASOTE_TOKENIZER_HPP

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "asote/core.hpp"

namespace asote {

inline std::string ascii_lower(std::string s) {
  for (char& c : s)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return s;
}

inline std::uint64_t fnv1a64(const std::string& data,
                             std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// Greedy longest-match subword tokenizer over a fixed vocabulary.
/// Continuation pieces carry a "##" prefix; a word with no match at some
/// offset becomes a single [UNK]. All methods are const and thread-safe.
class WordPieceTokenizer {
 public:
  static constexpr const char* kPad = "[PAD]";
  static constexpr const char* kUnk = "[UNK]";
  static constexpr const char* kCls = "[CLS]";
  static constexpr const char* kSep = "[SEP]";

  explicit WordPieceTokenizer(std::vector<std::string> vocab,
                              bool lowercase = true, std::string name = "")
      : vocab_(std::move(vocab)), lowercase_(lowercase) {
    for (std::size_t i = 0; i < vocab_.size(); ++i) {
      if (vocab_[i].empty())
        throw config_error("vocabulary entry " + std::to_string(i) +
                           " is empty");
      if (!ids_.emplace(vocab_[i], static_cast<int>(i)).second)
        throw config_error("duplicate vocabulary entry '" + vocab_[i] + "'");
    }
    pad_id_ = require(kPad);
    unk_id_ = require(kUnk);
    cls_id_ = require(kCls);
    sep_id_ = require(kSep);
    std::uint64_t h = 1469598103934665603ull;
    for (const std::string& t : vocab_) h = fnv1a64(t + '\n', h);
    h = fnv1a64(lowercase_ ? "uncased" : "cased", h);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(h));
    identifier_ = name.empty() ? std::string("vocab-") + buf : std::move(name);
  }

  static WordPieceTokenizer from_file(const std::string& path,
                                      bool lowercase = true,
                                      std::string name = "") {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open vocabulary file '" + path + "'");
    std::vector<std::string> vocab;
    std::string line;
    while (std::getline(in, line)) {
      while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
        line.pop_back();
      if (!line.empty()) vocab.push_back(line);
    }
    return WordPieceTokenizer(std::move(vocab), lowercase, std::move(name));
  }

  int size() const { return static_cast<int>(vocab_.size()); }
  bool lowercase() const { return lowercase_; }
  const std::vector<std::string>& vocabulary() const { return vocab_; }
  const std::string& identifier() const { return identifier_; }

  int pad_id() const { return pad_id_; }
  int unk_id() const { return unk_id_; }
  int cls_id() const { return cls_id_; }
  int sep_id() const { return sep_id_; }

  const std::string& id_to_token(int id) const {
    if (id < 0 || id >= size())
      throw data_error("token id " + std::to_string(id) +
                       " outside vocabulary of size " + std::to_string(size()));
    return vocab_[static_cast<std::size_t>(id)];
  }

  int token_to_id(const std::string& token) const {
    auto it = ids_.find(token);
    if (it == ids_.end())
      throw data_error("token '" + token + "' not in vocabulary");
    return it->second;
  }

  bool has_token(const std::string& token) const { return ids_.count(token); }

  /// Splits one whitespace-free word into subword pieces.
  std::vector<std::string> tokenize_word(const std::string& raw) const {
    const std::string word = lowercase_ ? ascii_lower(raw) : raw;
    if (word.empty() || word.size() > kMaxWordChars) return {kUnk};
    std::vector<std::string> pieces;
    std::size_t offset = 0;
    while (offset < word.size()) {
      std::size_t end = word.size();
      std::string match;
      while (end > offset) {
        std::string candidate = word.substr(offset, end - offset);
        if (offset > 0) candidate = "##" + candidate;
        if (ids_.count(candidate)) {
          match = std::move(candidate);
          break;
        }
        --end;
      }
      if (match.empty()) return {kUnk};
      pieces.push_back(std::move(match));
      offset = end;
    }
    return pieces;
  }

  std::vector<int> ids_of(const std::vector<std::string>& tokens) const {
    std::vector<int> out;
    out.reserve(tokens.size());
    for (const std::string& t : tokens) out.push_back(token_to_id(t));
    return out;
  }

 private:
  static constexpr std::size_t kMaxWordChars = 100;

  int require(const char* token) const {
    auto it = ids_.find(token);
    if (it == ids_.end())
      throw config_error(std::string("vocabulary lacks required token ") +
                         token);
    return it->second;
  }

  std::vector<std::string> vocab_;
  std::unordered_map<std::string, int> ids_;
  bool lowercase_;
  std::string identifier_;
  int pad_id_ = 0, unk_id_ = 0, cls_id_ = 0, sep_id_ = 0;
};

/// Whole-word vocabulary over a corpus: control tokens, the replacement word
/// and the two boundary markers, then the distinct lowercased corpus words.
/// Every in-corpus word tokenizes to itself, which keeps small experiments
/// free of subword noise.
inline std::vector<std::string> build_tiny_vocab(
    const std::vector<std::vector<std::string>>& sentences) {
  std::set<std::string> words;
  for (const auto& sentence : sentences)
    for (const std::string& w : sentence) words.insert(ascii_lower(w));
  std::vector<std::string> vocab = {
      WordPieceTokenizer::kPad, WordPieceTokenizer::kUnk,
      WordPieceTokenizer::kCls, WordPieceTokenizer::kSep,
      "aspect",                 "#",
      "$"};
  for (const std::string& w : words)
    if (std::find(vocab.begin(), vocab.end(), w) == vocab.end())
      vocab.push_back(w);
  return vocab;
}

}  // namespace asote

#endif  // ASOTE_TOKENIZER_HPP
