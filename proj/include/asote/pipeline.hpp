#ifndef ASOTE_PIPELINE_HPP
#define ASOTE_PIPELINE_HPP

#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "asote/core.hpp"
#include "asote/corpus.hpp"
#include "asote/evaluation.hpp"
#include "asote/nn.hpp"

namespace asote {

/// The three frozen models of the extraction pipeline. Aspect extraction
/// feeds opinion extraction feeds pair sentiment classification.
struct PipelineBundle {
  TaskModel ate;
  TaskModel towe;
  TaskModel aopsc;
};

inline PipelineBundle make_bundle(TaskModel ate, TaskModel towe,
                                  TaskModel aopsc) {
  if (ate.task != Task::ate)
    throw config_error("bundle's first model must be an ate model, got " +
                       to_string(ate.task));
  if (towe.task != Task::towe)
    throw config_error("bundle's second model must be a towe model, got " +
                       to_string(towe.task));
  if (aopsc.task != Task::aopsc)
    throw config_error("bundle's third model must be an aopsc model, got " +
                       to_string(aopsc.task));
  return {std::move(ate), std::move(towe), std::move(aopsc)};
}

inline PipelineBundle load_bundle(const std::string& ate_path,
                                  const std::string& towe_path,
                                  const std::string& aopsc_path) {
  return make_bundle(load_model(ate_path), load_model(towe_path),
                     load_model(aopsc_path));
}

inline std::vector<Span> extract_aspects(const Sentence& sentence,
                                         const PipelineBundle& bundle) {
  return predict_spans(bundle.ate, sentence, nullptr);
}

inline std::vector<Span> extract_opinions(const Sentence& sentence,
                                          const Span& aspect,
                                          const PipelineBundle& bundle) {
  return predict_spans(bundle.towe, sentence, &aspect);
}

inline std::vector<Sentiment> classify_pairs(const Sentence& sentence,
                                             const Span& aspect,
                                             const std::vector<Span>& opinions,
                                             const PipelineBundle& bundle) {
  return predict_pair_sentiments(bundle.aopsc, sentence, aspect, opinions);
}

/// Full pipeline on one sentence: every extracted aspect contributes one
/// triplet per extracted opinion, so |triplets| = sum of opinion counts.
inline std::vector<Triplet> extract_triplets(const Sentence& sentence,
                                             const PipelineBundle& bundle) {
  std::vector<Triplet> out;
  for (const Span& aspect : extract_aspects(sentence, bundle)) {
    const std::vector<Span> opinions =
        extract_opinions(sentence, aspect, bundle);
    if (opinions.empty()) continue;
    const std::vector<Sentiment> sentiments =
        classify_pairs(sentence, aspect, opinions, bundle);
    for (std::size_t i = 0; i < opinions.size(); ++i)
      out.push_back(Triplet{aspect, sentiments[i], opinions[i]});
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Per-sentence pipeline output. `triplets` is always present; the three
/// optional sections may be absent in files produced elsewhere. `aspects`
/// holds the pipeline's own aspect predictions, while the gold-conditioned
/// sections hold opinion predictions for each gold aspect and sentiment
/// predictions for each gold pair, which the matching evaluations require.
struct SentencePrediction {
  std::string id;
  std::vector<Triplet> triplets;
  std::optional<std::vector<Span>> aspects;
  std::optional<std::vector<std::pair<Span, std::vector<Span>>>>
      opinions_of_gold_aspects;
  std::optional<std::vector<std::pair<std::pair<Span, Span>, Sentiment>>>
      sentiments_of_gold_pairs;
};

/// Runs the pipeline over a split, filling every section. Gold aspects and
/// pairs of the input drive the two conditioned sections; sentences without
/// gold annotations leave them empty.
inline std::vector<SentencePrediction> predict_split(
    const DatasetSplit& split, const PipelineBundle& bundle) {
  std::vector<SentencePrediction> out;
  out.reserve(split.sentences.size());
  for (const AnnotatedSentence& s : split.sentences) {
    SentencePrediction p;
    p.id = s.sentence.id;
    p.aspects = extract_aspects(s.sentence, bundle);
    for (const Span& aspect : *p.aspects) {
      const std::vector<Span> opinions =
          extract_opinions(s.sentence, aspect, bundle);
      if (opinions.empty()) continue;
      const std::vector<Sentiment> sentiments =
          classify_pairs(s.sentence, aspect, opinions, bundle);
      for (std::size_t i = 0; i < opinions.size(); ++i)
        p.triplets.push_back(Triplet{aspect, sentiments[i], opinions[i]});
    }
    std::sort(p.triplets.begin(), p.triplets.end());

    p.opinions_of_gold_aspects.emplace();
    for (const Span& aspect : s.aspects)
      p.opinions_of_gold_aspects->emplace_back(
          aspect, extract_opinions(s.sentence, aspect, bundle));

    p.sentiments_of_gold_pairs.emplace();
    std::map<Span, std::vector<Span>> gold_pairs;
    for (const Triplet& t : s.triplets)
      gold_pairs[t.aspect].push_back(t.opinion);
    for (const auto& [aspect, opinions] : gold_pairs) {
      const std::vector<Sentiment> sentiments =
          classify_pairs(s.sentence, aspect, opinions, bundle);
      for (std::size_t i = 0; i < opinions.size(); ++i)
        p.sentiments_of_gold_pairs->emplace_back(
            std::make_pair(aspect, opinions[i]), sentiments[i]);
    }
    out.push_back(std::move(p));
  }
  return out;
}

// --- prediction file format --------------------------------------------------

namespace detail {

inline json span_to_json(const Span& s) {
  return json::array({s.start, s.end});
}

inline Span span_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() ||
      !j[1].is_number_integer())
    throw data_error(what + " must be a [from, to] pair of integers");
  Span s{j[0].get<int>(), j[1].get<int>(), ""};
  if (s.start < 0 || s.start > s.end)
    throw data_error(what + " [" + std::to_string(s.start) + "," +
                     std::to_string(s.end) + "] is not a valid span");
  return s;
}

}  // namespace detail

inline json prediction_to_json(const SentencePrediction& p) {
  json rec;
  rec["id"] = p.id;
  rec["triplets"] = json::array();
  for (const Triplet& t : p.triplets)
    rec["triplets"].push_back({{"aspect", detail::span_to_json(t.aspect)},
                               {"sentiment", to_string(t.sentiment)},
                               {"opinion", detail::span_to_json(t.opinion)}});
  if (p.aspects) {
    rec["aspects"] = json::array();
    for (const Span& a : *p.aspects)
      rec["aspects"].push_back(detail::span_to_json(a));
  }
  if (p.opinions_of_gold_aspects) {
    rec["towe"] = json::array();
    for (const auto& [aspect, opinions] : *p.opinions_of_gold_aspects) {
      json entry;
      entry["aspect"] = detail::span_to_json(aspect);
      entry["opinions"] = json::array();
      for (const Span& o : opinions)
        entry["opinions"].push_back(detail::span_to_json(o));
      rec["towe"].push_back(entry);
    }
  }
  if (p.sentiments_of_gold_pairs) {
    rec["aopsc"] = json::array();
    for (const auto& [pair, sentiment] : *p.sentiments_of_gold_pairs)
      rec["aopsc"].push_back({{"aspect", detail::span_to_json(pair.first)},
                              {"opinion", detail::span_to_json(pair.second)},
                              {"sentiment", to_string(sentiment)}});
  }
  return rec;
}

inline SentencePrediction prediction_from_json(const json& rec) {
  SentencePrediction p;
  if (!rec.is_object() || !rec.contains("id") || !rec.at("id").is_string())
    throw data_error("prediction record is missing a string \"id\"");
  p.id = rec.at("id").get<std::string>();
  if (rec.contains("triplets"))
    for (const auto& t : rec.at("triplets")) {
      Span aspect = detail::span_from_json(t.at("aspect"), "aspect");
      Span opinion = detail::span_from_json(t.at("opinion"), "opinion");
      p.triplets.push_back(Triplet{
          aspect, parse_sentiment(t.at("sentiment").get<std::string>()),
          opinion});
    }
  if (rec.contains("aspects")) {
    p.aspects.emplace();
    for (const auto& a : rec.at("aspects"))
      p.aspects->push_back(detail::span_from_json(a, "aspect"));
  }
  if (rec.contains("towe")) {
    p.opinions_of_gold_aspects.emplace();
    for (const auto& entry : rec.at("towe")) {
      std::pair<Span, std::vector<Span>> item;
      item.first = detail::span_from_json(entry.at("aspect"), "aspect");
      for (const auto& o : entry.at("opinions"))
        item.second.push_back(detail::span_from_json(o, "opinion"));
      p.opinions_of_gold_aspects->push_back(std::move(item));
    }
  }
  if (rec.contains("aopsc")) {
    p.sentiments_of_gold_pairs.emplace();
    for (const auto& entry : rec.at("aopsc"))
      p.sentiments_of_gold_pairs->emplace_back(
          std::make_pair(
              detail::span_from_json(entry.at("aspect"), "aspect"),
              detail::span_from_json(entry.at("opinion"), "opinion")),
          parse_sentiment(entry.at("sentiment").get<std::string>()));
  }
  return p;
}

inline void write_predictions(const std::vector<SentencePrediction>& preds,
                              const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write prediction file '" + path + "'");
  for (const SentencePrediction& p : preds)
    out << prediction_to_json(p).dump() << "\n";
}

inline std::vector<SentencePrediction> read_predictions(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open prediction file '" + path + "'");
  std::vector<SentencePrediction> out;
  std::string line;
  std::size_t line_no = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded())
      throw data_error("prediction file line " + std::to_string(line_no) +
                       ": invalid JSON");
    SentencePrediction p;
    try {
      p = prediction_from_json(rec);
    } catch (const Error& e) {
      throw Error(e.category(),
                  "prediction file line " + std::to_string(line_no) + ": " +
                      std::string(e.what()).substr(e.category().size() + 2));
    }
    if (!seen.insert(p.id).second)
      throw data_error("prediction file line " + std::to_string(line_no) +
                       ": duplicate sentence id '" + p.id + "'");
    out.push_back(std::move(p));
  }
  return out;
}

// --- prediction-side projections for scoring ---------------------------------

inline std::map<std::string, std::vector<Triplet>> asote_predictions(
    const std::vector<SentencePrediction>& preds) {
  std::map<std::string, std::vector<Triplet>> out;
  for (const SentencePrediction& p : preds) out[p.id] = p.triplets;
  return out;
}

inline std::map<std::string, std::vector<Span>> ate_predictions(
    const std::vector<SentencePrediction>& preds) {
  std::map<std::string, std::vector<Span>> out;
  for (const SentencePrediction& p : preds) {
    if (!p.aspects)
      throw data_error("prediction for sentence '" + p.id +
                       "' lacks an aspects section");
    out[p.id] = *p.aspects;
  }
  return out;
}

inline std::map<AspectKey, std::vector<Span>> towe_predictions(
    const std::vector<SentencePrediction>& preds) {
  std::map<AspectKey, std::vector<Span>> out;
  for (const SentencePrediction& p : preds) {
    if (!p.opinions_of_gold_aspects)
      throw data_error("prediction for sentence '" + p.id +
                       "' lacks a towe section");
    for (const auto& [aspect, opinions] : *p.opinions_of_gold_aspects)
      out[{p.id, aspect}] = opinions;
  }
  return out;
}

inline std::map<PairKey, Sentiment> aopsc_predictions(
    const std::vector<SentencePrediction>& preds) {
  std::map<PairKey, Sentiment> out;
  for (const SentencePrediction& p : preds) {
    if (!p.sentiments_of_gold_pairs)
      throw data_error("prediction for sentence '" + p.id +
                       "' lacks an aopsc section");
    for (const auto& [pair, sentiment] : *p.sentiments_of_gold_pairs)
      out[{p.id, pair.first, pair.second}] = sentiment;
  }
  return out;
}

/// Scores every task the prediction records carry data for, in the fixed
/// order ASOTE, OPE, TOWE, ATE, AOPSC. The triplet-based scores are always
/// computed; the other three need their sections in every record and are
/// skipped when the section is absent from all records (a mix is an error).
inline std::vector<MetricReport> score_predictions(
    const DatasetSplit& gold, const std::vector<SentencePrediction>& preds) {
  auto section_state = [&](auto member) {
    std::size_t have = 0;
    for (const SentencePrediction& p : preds)
      if ((p.*member).has_value()) ++have;
    if (have != 0 && have != preds.size())
      throw data_error("prediction records disagree on which sections exist");
    return have == preds.size() && !preds.empty();
  };
  const bool with_ate = section_state(&SentencePrediction::aspects);
  const bool with_towe =
      section_state(&SentencePrediction::opinions_of_gold_aspects);
  const bool with_aopsc =
      section_state(&SentencePrediction::sentiments_of_gold_pairs);

  std::vector<MetricReport> out;
  const auto gold_triplets = asote_gold(gold);
  const auto pred_triplets = asote_predictions(preds);
  out.push_back(score_asote(gold_triplets, pred_triplets));
  out.push_back(score_ope(gold_triplets, pred_triplets));
  if (with_towe)
    out.push_back(score_towe(towe_gold(gold), towe_predictions(preds)));
  if (with_ate)
    out.push_back(score_ate(ate_gold(gold), ate_predictions(preds)));
  if (with_aopsc)
    out.push_back(score_aopsc(aopsc_gold(gold), aopsc_predictions(preds)));
  return out;
}

}  // namespace asote

#endif  // ASOTE_PIPELINE_HPP
