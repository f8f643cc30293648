#ifndef ASOTE_CORE_HPP
#define ASOTE_CORE_HPP

#include <compare>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace asote {

/// Error with a stable machine-parseable category ("data-error",
/// "validation-error", ...). The CLI prints `category: message` and maps the
/// category to its exit code.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& message)
      : std::runtime_error(category + ": " + message),
        category_(std::move(category)) {}

  const std::string& category() const noexcept { return category_; }

 private:
  std::string category_;
};

inline Error validation_error(const std::string& msg) { return Error("validation-error", msg); }
inline Error data_error(const std::string& msg) { return Error("data-error", msg); }
inline Error config_error(const std::string& msg) { return Error("config-error", msg); }
inline Error io_error(const std::string& msg) { return Error("io-error", msg); }
inline Error train_error(const std::string& msg) { return Error("train-error", msg); }

/// Sentiment of an aspect-opinion pair. The class set is closed: exactly
/// these three labels exist in the classification heads.
enum class Sentiment { positive = 0, neutral = 1, negative = 2 };

/// Aspect-level sentiment as it appears in raw data. "conflict" is accepted
/// here only; it never enters the three-way pair-sentiment class set.
enum class AspectSentiment { positive, neutral, negative, conflict };

inline const char* to_string(Sentiment s) {
  switch (s) {
    case Sentiment::positive: return "positive";
    case Sentiment::neutral: return "neutral";
    case Sentiment::negative: return "negative";
  }
  return "?";
}

inline const char* to_string(AspectSentiment s) {
  switch (s) {
    case AspectSentiment::positive: return "positive";
    case AspectSentiment::neutral: return "neutral";
    case AspectSentiment::negative: return "negative";
    case AspectSentiment::conflict: return "conflict";
  }
  return "?";
}

inline Sentiment parse_sentiment(const std::string& s) {
  if (s == "positive") return Sentiment::positive;
  if (s == "neutral") return Sentiment::neutral;
  if (s == "negative") return Sentiment::negative;
  throw data_error("unknown sentiment label '" + s + "'");
}

inline AspectSentiment parse_aspect_sentiment(const std::string& s) {
  if (s == "conflict") return AspectSentiment::conflict;
  switch (parse_sentiment(s)) {
    case Sentiment::positive: return AspectSentiment::positive;
    case Sentiment::neutral: return AspectSentiment::neutral;
    case Sentiment::negative: return AspectSentiment::negative;
  }
  throw data_error("unknown sentiment label '" + s + "'");
}

/// True when the aspect-level label equals the given pair-level label.
inline bool same_label(AspectSentiment a, Sentiment s) {
  switch (a) {
    case AspectSentiment::positive: return s == Sentiment::positive;
    case AspectSentiment::neutral: return s == Sentiment::neutral;
    case AspectSentiment::negative: return s == Sentiment::negative;
    case AspectSentiment::conflict: return false;
  }
  return false;
}

/// A tokenized sentence. `words` is the unit every span indexes into.
struct Sentence {
  std::string id;
  std::vector<std::string> words;
  std::string raw_text;  // whitespace join unless the source kept the original
};

inline std::string join_words(const std::vector<std::string>& words,
                              int start, int end) {
  std::string out;
  for (int i = start; i <= end; ++i) {
    if (i > start) out += ' ';
    out += words[static_cast<std::size_t>(i)];
  }
  return out;
}

/// Word-level span with inclusive ends. `surface` is derived from the owning
/// sentence; identity (equality, ordering, hashing) is (start, end) only.
struct Span {
  int start = 0;
  int end = 0;
  std::string surface;

  friend bool operator==(const Span& a, const Span& b) {
    return a.start == b.start && a.end == b.end;
  }
  friend auto operator<=>(const Span& a, const Span& b) {
    return std::tie(a.start, a.end) <=> std::tie(b.start, b.end);
  }
};

inline void validate_span(const Span& span, std::size_t n_words,
                          const std::string& what) {
  if (span.start < 0)
    throw validation_error(what + ".start = " + std::to_string(span.start) +
                           " is negative");
  if (span.start > span.end)
    throw validation_error(what + ".start = " + std::to_string(span.start) +
                           " exceeds " + what + ".end = " +
                           std::to_string(span.end));
  if (span.end >= static_cast<int>(n_words))
    throw validation_error(what + ".end = " + std::to_string(span.end) +
                           " is out of bounds for a sentence of " +
                           std::to_string(n_words) + " words");
}

inline Span make_span(int start, int end, const Sentence& sentence) {
  Span span{start, end, ""};
  validate_span(span, sentence.words.size(), "span");
  span.surface = join_words(sentence.words, start, end);
  return span;
}

/// (aspect, pair sentiment, opinion). Equality is component-wise over the
/// span indices and the sentiment value, so triplet sets are well defined.
struct Triplet {
  Span aspect;
  Sentiment sentiment = Sentiment::neutral;
  Span opinion;

  friend bool operator==(const Triplet& a, const Triplet& b) {
    return a.aspect == b.aspect && a.sentiment == b.sentiment &&
           a.opinion == b.opinion;
  }
  friend auto operator<=>(const Triplet& a, const Triplet& b) {
    return std::tie(a.aspect.start, a.aspect.end, a.opinion.start,
                    a.opinion.end, a.sentiment) <=>
           std::tie(b.aspect.start, b.aspect.end, b.opinion.start,
                    b.opinion.end, b.sentiment);
  }
};

inline Triplet make_triplet(const Span& aspect, Sentiment sentiment,
                            const Span& opinion) {
  if (aspect.start < 0)
    throw validation_error("aspect.start = " + std::to_string(aspect.start) +
                           " is negative");
  if (aspect.start > aspect.end)
    throw validation_error("aspect.start = " + std::to_string(aspect.start) +
                           " exceeds aspect.end = " +
                           std::to_string(aspect.end));
  if (opinion.start < 0)
    throw validation_error("opinion.start = " + std::to_string(opinion.start) +
                           " is negative");
  if (opinion.start > opinion.end)
    throw validation_error("opinion.start = " + std::to_string(opinion.start) +
                           " exceeds opinion.end = " +
                           std::to_string(opinion.end));
  return Triplet{aspect, sentiment, opinion};
}

inline Triplet make_triplet(const Span& aspect, Sentiment sentiment,
                            const Span& opinion, std::size_t n_words) {
  validate_span(aspect, n_words, "aspect");
  validate_span(opinion, n_words, "opinion");
  return Triplet{aspect, sentiment, opinion};
}

/// A sentence with all of its gold annotation. `aspects` lists every
/// annotated aspect, including those with zero triplets. `aspect_sentiments`
/// is aligned with `aspects` (entries may be absent). Raw triplets whose pair
/// sentiment was "conflict" are kept apart in `conflict_triplets`; they never
/// enter `triplets`, model examples, or scoring.
struct AnnotatedSentence {
  Sentence sentence;
  std::vector<Span> aspects;
  std::vector<std::optional<AspectSentiment>> aspect_sentiments;
  std::vector<Triplet> triplets;
  std::vector<std::pair<Span, Span>> conflict_triplets;

  bool has_aspect(const Span& a) const {
    for (const Span& x : aspects)
      if (x == a) return true;
    return false;
  }
};

/// One sequence-labeling example: mark the opinions of `aspect` inside
/// `sentence`. `gold_opinions` may be empty (aspects without opinions exist).
struct ToweExample {
  Sentence sentence;
  Span aspect;
  std::vector<Span> gold_opinions;
};

/// One classification example: the sentiments of every (aspect, opinion)
/// pair of one aspect, predicted at once.
struct AopscExample {
  Sentence sentence;
  Span aspect;
  std::vector<Span> opinions;
  std::vector<Sentiment> gold_sentiments;
};

}  // namespace asote

#endif  // ASOTE_CORE_HPP
