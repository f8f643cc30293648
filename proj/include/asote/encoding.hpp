#ifndef ASOTE_ENCODING_HPP
#define ASOTE_ENCODING_HPP

#include <algorithm>
#include <string>
#include <vector>

#include "asote/core.hpp"
#include "asote/tokenizer.hpp"

namespace asote {

/// Input construction schemes for aspect-conditioned encoding.
///   PBF    replace aspect words with "aspect", append aspect after separator
///   NO_A   replace only
///   NO_P   append only
///   NO_AP  plain sentence
///   M1     append; appended aspect words reuse in-sentence position indices
///   M2     append; position indices are word distances to the aspect
///   M3     wrap the in-place aspect in marker tokens # and $, no append
enum class Variant { PBF, NO_A, NO_P, NO_AP, M1, M2, M3 };

inline const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v = {Variant::PBF,   Variant::NO_A,
                                         Variant::NO_P,  Variant::NO_AP,
                                         Variant::M1,    Variant::M2,
                                         Variant::M3};
  return v;
}

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::PBF: return "PBF";
    case Variant::NO_A: return "NO_A";
    case Variant::NO_P: return "NO_P";
    case Variant::NO_AP: return "NO_AP";
    case Variant::M1: return "M1";
    case Variant::M2: return "M2";
    case Variant::M3: return "M3";
  }
  return "?";
}

inline Variant parse_variant(const std::string& raw) {
  std::string s = ascii_lower(raw);
  std::replace(s.begin(), s.end(), '-', '_');
  if (s == "pbf") return Variant::PBF;
  if (s == "no_a") return Variant::NO_A;
  if (s == "no_p") return Variant::NO_P;
  if (s == "no_ap") return Variant::NO_AP;
  if (s == "m1") return Variant::M1;
  if (s == "m2") return Variant::M2;
  if (s == "m3") return Variant::M3;
  throw config_error("unknown input variant '" + raw +
                     "' (expected PBF, NO_A, NO_P, NO_AP, M1, M2 or M3)");
}

enum class Tag { B = 0, I = 1, O = 2 };

struct TagSequence {
  std::vector<Tag> tags;
  std::size_t length() const { return tags.size(); }
  friend bool operator==(const TagSequence&, const TagSequence&) = default;
};

/// A subword-encoded model input. `alignment[w]` lists the token positions of
/// original word w: its own subwords when the word survives, the shared
/// placeholder positions when the word was erased by aspect replacement, and
/// nothing when truncation dropped it. `word_surviving[w]` is false in the
/// latter two cases. Appended and control tokens belong to no word.
struct EncodedInput {
  std::vector<std::string> tokens;
  std::vector<int> token_ids;
  std::vector<int> segment_indices;
  std::vector<int> position_indices;
  std::vector<std::vector<int>> alignment;
  std::vector<char> word_surviving;
  int attention_length = 0;
  bool truncated = false;

  std::size_t n_words() const { return alignment.size(); }
};

namespace detail {

struct Unit {
  enum class Kind { control, word, placeholder, marker, appended };
  Kind kind;
  std::string text;
  int word_index = -1;   // original word (Kind::word only)
  int twin_word = -1;    // in-sentence twin of an appended aspect word
  int segment = 0;
  bool dropped = false;
};

/// Drops trailing sentence words (never the aspect, markers, or appended
/// tokens) until the subword total fits the budget.
inline bool shrink_to_budget(std::vector<Unit>& units,
                             std::vector<std::vector<std::string>>& pieces,
                             int max_tokens, int min_droppable_word) {
  if (max_tokens <= 0) return false;
  auto total = [&] {
    std::size_t n = 0;
    for (std::size_t i = 0; i < units.size(); ++i)
      if (!units[i].dropped) n += pieces[i].size();
    return static_cast<int>(n);
  };
  bool truncated = false;
  int have = total();
  for (std::size_t r = units.size(); r-- > 0 && have > max_tokens;) {
    Unit& u = units[r];
    if (u.kind != Unit::Kind::word || u.word_index < min_droppable_word)
      continue;
    u.dropped = true;
    truncated = true;
    have -= static_cast<int>(pieces[r].size());
  }
  if (have > max_tokens)
    throw data_error("input of " + std::to_string(have) +
                     " tokens cannot be cut down to the budget of " +
                     std::to_string(max_tokens));
  return truncated;
}

inline EncodedInput assemble(const std::vector<Unit>& units_in,
                             const WordPieceTokenizer& tokenizer,
                             std::size_t n_words, Variant variant,
                             const Span* aspect, int max_tokens,
                             int min_droppable_word) {
  std::vector<Unit> units = units_in;
  std::vector<std::vector<std::string>> pieces(units.size());
  for (std::size_t i = 0; i < units.size(); ++i)
    pieces[i] = units[i].kind == Unit::Kind::control
                    ? std::vector<std::string>{units[i].text}
                    : tokenizer.tokenize_word(units[i].text);

  EncodedInput out;
  out.truncated =
      shrink_to_budget(units, pieces, max_tokens, min_droppable_word);
  out.alignment.assign(n_words, {});
  out.word_surviving.assign(n_words, 0);

  std::vector<int> placeholder_positions;
  // appended unit index -> its token positions (for M1 position rewrites)
  std::vector<std::pair<int, std::vector<int>>> appended_tokens;

  for (std::size_t i = 0; i < units.size(); ++i) {
    const Unit& u = units[i];
    if (u.dropped) continue;
    std::vector<int> token_positions;
    for (const std::string& piece : pieces[i]) {
      token_positions.push_back(static_cast<int>(out.tokens.size()));
      out.tokens.push_back(piece);
      out.segment_indices.push_back(u.segment);
    }
    switch (u.kind) {
      case Unit::Kind::word:
        out.alignment[static_cast<std::size_t>(u.word_index)] = token_positions;
        out.word_surviving[static_cast<std::size_t>(u.word_index)] = 1;
        break;
      case Unit::Kind::placeholder:
        placeholder_positions = token_positions;
        break;
      case Unit::Kind::appended:
        appended_tokens.emplace_back(u.twin_word, token_positions);
        break;
      default:
        break;
    }
  }
  if (!placeholder_positions.empty() && aspect)
    for (int w = aspect->start; w <= aspect->end; ++w)
      out.alignment[static_cast<std::size_t>(w)] = placeholder_positions;

  out.token_ids = tokenizer.ids_of(out.tokens);
  out.attention_length = static_cast<int>(out.tokens.size());

  out.position_indices.resize(out.tokens.size());
  for (std::size_t t = 0; t < out.tokens.size(); ++t)
    out.position_indices[t] = static_cast<int>(t);

  if (variant == Variant::M1) {
    // Appended aspect words reuse the positions of their in-sentence twins,
    // subword by subword. The twin survives by construction (never dropped).
    for (const auto& [twin, positions] : appended_tokens) {
      const auto& twin_tokens = out.alignment[static_cast<std::size_t>(twin)];
      for (std::size_t j = 0; j < positions.size(); ++j)
        out.position_indices[static_cast<std::size_t>(positions[j])] =
            out.position_indices[static_cast<std::size_t>(
                twin_tokens[std::min(j, twin_tokens.size() - 1)])];
    }
  } else if (variant == Variant::M2) {
    // Word distance to the aspect: 0 on the aspect itself and the appended
    // copy, growing by one per word outward. Control tokens sit at virtual
    // word slots -1 and n.
    const int start = aspect->start, end = aspect->end;
    const int n = static_cast<int>(n_words);
    auto distance = [&](int word) {
      return std::max({0, start - word, word - end});
    };
    std::size_t t = 0;
    for (std::size_t i = 0; i < units.size(); ++i) {
      const Unit& u = units[i];
      if (u.dropped) continue;
      int pos = 0;
      switch (u.kind) {
        case Unit::Kind::control:
          pos = u.text == WordPieceTokenizer::kCls ? distance(-1) : distance(n);
          break;
        case Unit::Kind::word:
          pos = distance(u.word_index);
          break;
        case Unit::Kind::appended:
          pos = 0;
          break;
        default:
          pos = 0;
          break;
      }
      if (max_tokens > 0) pos = std::min(pos, max_tokens - 1);
      for (std::size_t j = 0; j < pieces[i].size(); ++j)
        out.position_indices[t++] = pos;
    }
  }
  return out;
}

}  // namespace detail

/// [CLS] sentence [SEP], one segment, consecutive positions. `max_tokens`
/// of 0 means unlimited; otherwise trailing words are cut (at least one word
/// always stays).
inline EncodedInput build_ate_input(const Sentence& sentence,
                                    const WordPieceTokenizer& tokenizer,
                                    int max_tokens = 0) {
  if (sentence.words.empty())
    throw validation_error("cannot encode an empty sentence");
  std::vector<detail::Unit> units;
  units.push_back({detail::Unit::Kind::control, WordPieceTokenizer::kCls});
  for (std::size_t w = 0; w < sentence.words.size(); ++w) {
    detail::Unit u{detail::Unit::Kind::word, sentence.words[w]};
    u.word_index = static_cast<int>(w);
    units.push_back(std::move(u));
  }
  units.push_back({detail::Unit::Kind::control, WordPieceTokenizer::kSep});
  return detail::assemble(units, tokenizer, sentence.words.size(),
                          Variant::NO_AP, nullptr, max_tokens,
                          /*min_droppable_word=*/1);
}

/// Aspect-conditioned input under the given construction scheme.
inline EncodedInput build_aspect_input(const Sentence& sentence,
                                       const Span& aspect, Variant variant,
                                       const WordPieceTokenizer& tokenizer,
                                       int max_tokens = 0) {
  if (sentence.words.empty())
    throw validation_error("cannot encode an empty sentence");
  validate_span(aspect, sentence.words.size(), "aspect");

  const bool replace = variant == Variant::PBF || variant == Variant::NO_A;
  const bool append = variant == Variant::PBF || variant == Variant::NO_P ||
                      variant == Variant::M1 || variant == Variant::M2;

  using detail::Unit;
  std::vector<Unit> units;
  units.push_back({Unit::Kind::control, WordPieceTokenizer::kCls});

  auto push_word = [&](int w) {
    Unit u{Unit::Kind::word, sentence.words[static_cast<std::size_t>(w)]};
    u.word_index = w;
    units.push_back(std::move(u));
  };

  if (replace) {
    for (int w = 0; w < aspect.start; ++w) push_word(w);
    units.push_back({Unit::Kind::placeholder, "aspect"});
    for (int w = aspect.end + 1; w < static_cast<int>(sentence.words.size());
         ++w)
      push_word(w);
  } else if (variant == Variant::M3) {
    for (int w = 0; w < aspect.start; ++w) push_word(w);
    units.push_back({Unit::Kind::marker, "#"});
    for (int w = aspect.start; w <= aspect.end; ++w) push_word(w);
    units.push_back({Unit::Kind::marker, "$"});
    for (int w = aspect.end + 1; w < static_cast<int>(sentence.words.size());
         ++w)
      push_word(w);
  } else {
    for (int w = 0; w < static_cast<int>(sentence.words.size()); ++w)
      push_word(w);
  }

  units.push_back({Unit::Kind::control, WordPieceTokenizer::kSep});
  if (append) {
    for (int w = aspect.start; w <= aspect.end; ++w) {
      Unit u{Unit::Kind::appended,
             sentence.words[static_cast<std::size_t>(w)]};
      u.twin_word = w;
      u.segment = 1;
      units.push_back(std::move(u));
    }
    units.push_back({Unit::Kind::control, WordPieceTokenizer::kSep});
    units.back().segment = 1;
  }
  return detail::assemble(units, tokenizer, sentence.words.size(), variant,
                          &aspect, max_tokens,
                          /*min_droppable_word=*/aspect.end + 1);
}

/// Word-level BIO tags from non-overlapping spans.
inline TagSequence bio_encode(std::vector<Span> spans, std::size_t length) {
  std::sort(spans.begin(), spans.end());
  TagSequence seq;
  seq.tags.assign(length, Tag::O);
  int previous_end = -1;
  for (const Span& s : spans) {
    validate_span(s, length, "span");
    if (s.start <= previous_end)
      throw validation_error(
          "overlapping spans cannot be written as one tag sequence");
    previous_end = s.end;
    seq.tags[static_cast<std::size_t>(s.start)] = Tag::B;
    for (int w = s.start + 1; w <= s.end; ++w)
      seq.tags[static_cast<std::size_t>(w)] = Tag::I;
  }
  return seq;
}

/// Spans from any tag sequence. Model output need not be well-formed: an I
/// with no open span starts one, so partial spans are recovered rather than
/// discarded.
inline std::vector<Span> bio_decode(const TagSequence& seq) {
  std::vector<Span> spans;
  int open = -1;
  for (std::size_t i = 0; i < seq.tags.size(); ++i) {
    const Tag t = seq.tags[i];
    if (t == Tag::B) {
      if (open >= 0)
        spans.push_back({open, static_cast<int>(i) - 1, ""});
      open = static_cast<int>(i);
    } else if (t == Tag::O) {
      if (open >= 0) {
        spans.push_back({open, static_cast<int>(i) - 1, ""});
        open = -1;
      }
    } else if (open < 0) {
      open = static_cast<int>(i);
    }
  }
  if (open >= 0)
    spans.push_back({open, static_cast<int>(seq.tags.size()) - 1, ""});
  return spans;
}

/// Per-token training targets. Only the first subword of each word that is
/// still present carries the word's tag and contributes to the loss; all
/// other tokens are masked. Words erased by replacement share the placeholder
/// token, so their tags must agree (they are O in every legal use).
struct SubwordTags {
  std::vector<int> tags;     // Tag as int; O wherever inactive
  std::vector<char> active;  // loss mask
};

inline SubwordTags project_tags_to_subwords(const TagSequence& word_tags,
                                            const EncodedInput& input) {
  if (word_tags.length() != input.n_words())
    throw validation_error(
        "tag sequence length " + std::to_string(word_tags.length()) +
        " does not match the encoded sentence's " +
        std::to_string(input.n_words()) + " words");
  SubwordTags out;
  out.tags.assign(input.tokens.size(), static_cast<int>(Tag::O));
  out.active.assign(input.tokens.size(), 0);
  for (std::size_t w = 0; w < input.n_words(); ++w) {
    if (input.alignment[w].empty()) continue;  // truncated away
    const auto first = static_cast<std::size_t>(input.alignment[w][0]);
    const int tag = static_cast<int>(word_tags.tags[w]);
    if (out.active[first] && out.tags[first] != tag)
      throw validation_error("words sharing token " + std::to_string(first) +
                             " carry different tags");
    out.tags[first] = tag;
    out.active[first] = 1;
  }
  return out;
}

/// Inverse of the projection: reads each word's tag off its first subword.
/// Words without their own tokens (erased or truncated) read as O.
inline TagSequence read_word_tags(const std::vector<int>& token_tags,
                                  const EncodedInput& input) {
  if (token_tags.size() != input.tokens.size())
    throw validation_error("per-token tag count does not match token count");
  TagSequence out;
  out.tags.assign(input.n_words(), Tag::O);
  for (std::size_t w = 0; w < input.n_words(); ++w) {
    if (!input.word_surviving[w] || input.alignment[w].empty()) continue;
    out.tags[w] = static_cast<Tag>(
        token_tags[static_cast<std::size_t>(input.alignment[w][0])]);
  }
  return out;
}

}  // namespace asote

#endif  // ASOTE_ENCODING_HPP
