#ifndef ASOTE_EVALUATION_HPP
#define ASOTE_EVALUATION_HPP

#include <compare>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "asote/core.hpp"
#include "asote/corpus.hpp"

namespace asote {

enum class EvalTask { asote, ope, towe, ate, aopsc };

inline std::string to_string(EvalTask t) {
  switch (t) {
    case EvalTask::asote: return "ASOTE";
    case EvalTask::ope: return "OPE";
    case EvalTask::towe: return "TOWE";
    case EvalTask::ate: return "ATE";
    case EvalTask::aopsc: return "AOPSC";
  }
  return "?";
}

/// Micro-averaged exact-match scores. Counts are doubles because multi-seed
/// aggregation averages every field; score_* itself always fills them with
/// whole numbers. AOPSC reports accuracy, which micro-averaging makes equal
/// to its P, R and F1.
struct MetricReport {
  EvalTask task = EvalTask::asote;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::optional<double> accuracy;
  double n_gold = 0.0;
  double n_pred = 0.0;
  double n_correct = 0.0;

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

/// (sentence, aspect) key for aspect-conditioned scoring.
struct AspectKey {
  std::string sentence_id;
  Span aspect;
  friend auto operator<=>(const AspectKey&, const AspectKey&) = default;
  friend bool operator==(const AspectKey&, const AspectKey&) = default;
};

/// (sentence, aspect, opinion) key for pair-sentiment scoring.
struct PairKey {
  std::string sentence_id;
  Span aspect;
  Span opinion;
  friend auto operator<=>(const PairKey&, const PairKey&) = default;
  friend bool operator==(const PairKey&, const PairKey&) = default;
};

namespace detail {

inline MetricReport finalize(EvalTask task, double n_gold, double n_pred,
                             double n_correct) {
  MetricReport r;
  r.task = task;
  r.n_gold = n_gold;
  r.n_pred = n_pred;
  r.n_correct = n_correct;
  r.precision = n_pred > 0 ? n_correct / n_pred : 0.0;
  r.recall = n_gold > 0 ? n_correct / n_gold : 0.0;
  r.f1 = r.precision + r.recall > 0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

/// Set-semantics counting: duplicates on either side collapse first.
template <typename T>
void count_overlap(const std::vector<T>& gold, const std::vector<T>& pred,
                   double& n_gold, double& n_pred, double& n_correct) {
  std::set<T> g(gold.begin(), gold.end());
  std::set<T> p(pred.begin(), pred.end());
  n_gold += static_cast<double>(g.size());
  n_pred += static_cast<double>(p.size());
  for (const T& item : p) n_correct += g.count(item) ? 1.0 : 0.0;
}

template <typename K, typename V>
void require_same_keys(const std::map<K, V>& gold, const std::map<K, V>& pred,
                       const std::string& what) {
  for (const auto& [k, v] : pred)
    if (!gold.count(k))
      throw data_error(what + ": prediction carries a key absent from gold");
  for (const auto& [k, v] : gold)
    if (!pred.count(k))
      throw data_error(what + ": gold carries a key absent from predictions");
}

}  // namespace detail

/// Exact triplet match: aspect span, sentiment and opinion span all equal.
inline MetricReport score_asote(
    const std::map<std::string, std::vector<Triplet>>& gold,
    const std::map<std::string, std::vector<Triplet>>& pred) {
  detail::require_same_keys(gold, pred, "triplet scoring");
  double g = 0, p = 0, c = 0;
  for (const auto& [id, gold_triplets] : gold)
    detail::count_overlap(gold_triplets, pred.at(id), g, p, c);
  return detail::finalize(EvalTask::asote, g, p, c);
}

/// Triplets projected to (aspect, opinion) pairs, deduplicated, then matched.
inline MetricReport score_ope(
    const std::map<std::string, std::vector<Triplet>>& gold,
    const std::map<std::string, std::vector<Triplet>>& pred) {
  detail::require_same_keys(gold, pred, "pair scoring");
  auto project = [](const std::vector<Triplet>& ts) {
    std::vector<std::pair<Span, Span>> pairs;
    pairs.reserve(ts.size());
    for (const Triplet& t : ts) pairs.emplace_back(t.aspect, t.opinion);
    return pairs;
  };
  double g = 0, p = 0, c = 0;
  for (const auto& [id, gold_triplets] : gold)
    detail::count_overlap(project(gold_triplets), project(pred.at(id)), g, p,
                          c);
  return detail::finalize(EvalTask::ope, g, p, c);
}

/// Opinion spans matched per (sentence, aspect); micro-averaged over all
/// opinions. Gold aspects define the key set; a gold key without predictions
/// counts as an empty prediction, an unknown predicted key is an error.
inline MetricReport score_towe(
    const std::map<AspectKey, std::vector<Span>>& gold,
    const std::map<AspectKey, std::vector<Span>>& pred) {
  for (const auto& [key, spans] : pred)
    if (!gold.count(key))
      throw data_error("opinion scoring: prediction for aspect (" +
                       std::to_string(key.aspect.start) + "," +
                       std::to_string(key.aspect.end) + ") of sentence '" +
                       key.sentence_id + "' has no gold entry");
  double g = 0, p = 0, c = 0;
  static const std::vector<Span> empty;
  for (const auto& [key, gold_spans] : gold) {
    auto it = pred.find(key);
    detail::count_overlap(gold_spans, it == pred.end() ? empty : it->second, g,
                          p, c);
  }
  return detail::finalize(EvalTask::towe, g, p, c);
}

/// Aspect spans matched per sentence, micro-averaged.
inline MetricReport score_ate(
    const std::map<std::string, std::vector<Span>>& gold,
    const std::map<std::string, std::vector<Span>>& pred) {
  detail::require_same_keys(gold, pred, "aspect scoring");
  double g = 0, p = 0, c = 0;
  for (const auto& [id, gold_spans] : gold)
    detail::count_overlap(gold_spans, pred.at(id), g, p, c);
  return detail::finalize(EvalTask::ate, g, p, c);
}

/// Pair-sentiment accuracy over strictly aligned keys.
inline MetricReport score_aopsc(const std::map<PairKey, Sentiment>& gold,
                                const std::map<PairKey, Sentiment>& pred) {
  detail::require_same_keys(gold, pred, "pair sentiment scoring");
  double correct = 0;
  for (const auto& [key, sentiment] : gold)
    if (pred.at(key) == sentiment) correct += 1.0;
  const double total = static_cast<double>(gold.size());
  MetricReport r = detail::finalize(EvalTask::aopsc, total, total, correct);
  r.accuracy = total > 0 ? correct / total : 0.0;
  return r;
}

/// Arithmetic mean of every field across runs of one task. Metrics are
/// averaged directly (never recomputed from summed counts).
inline MetricReport aggregate_runs(const std::vector<MetricReport>& runs) {
  if (runs.empty()) throw validation_error("cannot aggregate zero runs");
  MetricReport out;
  out.task = runs[0].task;
  bool all_have_accuracy = true;
  for (const MetricReport& r : runs) {
    if (r.task != out.task)
      throw validation_error("cannot aggregate reports of different tasks");
    out.precision += r.precision;
    out.recall += r.recall;
    out.f1 += r.f1;
    out.n_gold += r.n_gold;
    out.n_pred += r.n_pred;
    out.n_correct += r.n_correct;
    all_have_accuracy = all_have_accuracy && r.accuracy.has_value();
  }
  const double n = static_cast<double>(runs.size());
  out.precision /= n;
  out.recall /= n;
  out.f1 /= n;
  out.n_gold /= n;
  out.n_pred /= n;
  out.n_correct /= n;
  if (all_have_accuracy) {
    double acc = 0;
    for (const MetricReport& r : runs) acc += *r.accuracy;
    out.accuracy = acc / n;
  }
  return out;
}

/// Aligned text table, one row per report, columns P, R, F1 (then accuracy
/// and supports).
inline std::string render_report_table(const std::vector<MetricReport>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(7) << "task" << std::right << std::setw(9)
      << "P" << std::setw(9) << "R" << std::setw(9) << "F1" << std::setw(9)
      << "acc" << std::setw(10) << "gold" << std::setw(10) << "pred"
      << std::setw(10) << "correct" << "\n";
  out << std::fixed;
  auto count = [](double v) {
    std::ostringstream c;
    if (v == static_cast<double>(static_cast<long long>(v)))
      c << static_cast<long long>(v);
    else
      c << std::fixed << std::setprecision(1) << v;
    return c.str();
  };
  for (const MetricReport& r : rows) {
    out << std::left << std::setw(7) << to_string(r.task) << std::right
        << std::setprecision(4) << std::setw(9) << r.precision << std::setw(9)
        << r.recall << std::setw(9) << r.f1;
    if (r.accuracy)
      out << std::setw(9) << *r.accuracy;
    else
      out << std::setw(9) << "-";
    out << std::setw(10) << count(r.n_gold) << std::setw(10) << count(r.n_pred)
        << std::setw(10) << count(r.n_correct) << "\n";
  }
  return out.str();
}

inline json report_to_json(const MetricReport& r) {
  json j;
  j["task"] = to_string(r.task);
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  if (r.accuracy) j["accuracy"] = *r.accuracy;
  j["n_gold"] = r.n_gold;
  j["n_pred"] = r.n_pred;
  j["n_correct"] = r.n_correct;
  return j;
}

inline json reports_to_json(const std::vector<MetricReport>& rs) {
  json j = json::array();
  for (const MetricReport& r : rs) j.push_back(report_to_json(r));
  return j;
}

// --- gold-side projections of a dataset split -------------------------------

inline std::map<std::string, std::vector<Triplet>> asote_gold(
    const DatasetSplit& split) {
  std::map<std::string, std::vector<Triplet>> out;
  for (const AnnotatedSentence& s : split.sentences)
    out[s.sentence.id] = s.triplets;
  return out;
}

inline std::map<std::string, std::vector<Span>> ate_gold(
    const DatasetSplit& split) {
  std::map<std::string, std::vector<Span>> out;
  for (const AnnotatedSentence& s : split.sentences)
    out[s.sentence.id] = s.aspects;
  return out;
}

inline std::map<AspectKey, std::vector<Span>> towe_gold(
    const DatasetSplit& split) {
  std::map<AspectKey, std::vector<Span>> out;
  for (const AnnotatedSentence& s : split.sentences)
    for (const Span& aspect : s.aspects) {
      auto& bucket = out[{s.sentence.id, aspect}];
      for (const Triplet& t : s.triplets)
        if (t.aspect == aspect) bucket.push_back(t.opinion);
    }
  return out;
}

inline std::map<PairKey, Sentiment> aopsc_gold(const DatasetSplit& split) {
  std::map<PairKey, Sentiment> out;
  for (const AnnotatedSentence& s : split.sentences)
    for (const Triplet& t : s.triplets)
      out[{s.sentence.id, t.aspect, t.opinion}] = t.sentiment;
  return out;
}

}  // namespace asote

#endif  // ASOTE_EVALUATION_HPP
