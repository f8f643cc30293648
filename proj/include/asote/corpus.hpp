#ifndef ASOTE_CORPUS_HPP
#define ASOTE_CORPUS_HPP

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "asote/core.hpp"

namespace asote {

using json = nlohmann::json;

struct DatasetSplit {
  std::string name;  // train / dev / test (informational)
  std::vector<AnnotatedSentence> sentences;
};

/// Diagnostics collected while loading or assembling a split.
struct LoadReport {
  std::size_t duplicate_triplets_removed = 0;
  std::size_t conflict_triplets = 0;
};

/// Counts matching the dataset summary table. The two sentiment-disagreement
/// counts need aspect-level sentiments; when the split carries none at all
/// they are reported unavailable instead of zero.
struct StatsTable {
  long long n_sentences = 0;
  long long n_aspects = 0;
  long long n_triplets = 0;
  long long n_zero_t = 0;  // aspects without triplet
  long long n_one_t = 0;   // aspects with one triplet
  long long n_m_t = 0;     // aspects with multiple triplets
  long long n_d_s1 = 0;    // aspects whose triplets carry different sentiments
  std::optional<long long> n_d_s2;  // one triplet, non-conflict aspect label, labels differ
  std::optional<long long> n_t_d;   // triplets whose sentiment differs from the aspect's
  long long n_aspect_multi_opinion = 0;
  long long n_opinion_multi_aspect = 0;
};

namespace detail {

inline Span parse_span_pair(const json& j, const Sentence& sentence,
                            const std::string& what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() ||
      !j[1].is_number_integer())
    throw data_error(what + " must be a [from, to] pair of integers");
  Span span{j[0].get<int>(), j[1].get<int>(), ""};
  validate_span(span, sentence.words.size(), what);
  span.surface = join_words(sentence.words, span.start, span.end);
  return span;
}

inline AnnotatedSentence parse_record(const json& rec) {
  if (!rec.is_object()) throw data_error("record is not a JSON object");

  AnnotatedSentence out;
  if (!rec.contains("id") || !rec.at("id").is_string())
    throw data_error("record is missing a string \"id\"");
  out.sentence.id = rec.at("id").get<std::string>();

  if (!rec.contains("words") || !rec.at("words").is_array() ||
      rec.at("words").empty())
    throw data_error("record '" + out.sentence.id +
                     "' is missing a non-empty \"words\" array");
  for (const auto& w : rec.at("words")) {
    if (!w.is_string())
      throw data_error("record '" + out.sentence.id +
                       "' has a non-string word");
    out.sentence.words.push_back(w.get<std::string>());
  }
  out.sentence.raw_text = join_words(
      out.sentence.words, 0, static_cast<int>(out.sentence.words.size()) - 1);

  if (rec.contains("aspects")) {
    for (const auto& a : rec.at("aspects")) {
      if (!a.is_object() || !a.contains("from") || !a.contains("to"))
        throw data_error("record '" + out.sentence.id +
                         "' has a malformed aspect entry");
      Span span{a.at("from").get<int>(), a.at("to").get<int>(), ""};
      validate_span(span, out.sentence.words.size(), "aspect");
      span.surface = join_words(out.sentence.words, span.start, span.end);
      if (out.has_aspect(span))
        throw data_error("record '" + out.sentence.id +
                         "' lists aspect (" + std::to_string(span.start) +
                         "," + std::to_string(span.end) + ") twice");
      out.aspects.push_back(span);
      if (a.contains("sentiment") && !a.at("sentiment").is_null())
        out.aspect_sentiments.push_back(
            parse_aspect_sentiment(a.at("sentiment").get<std::string>()));
      else
        out.aspect_sentiments.push_back(std::nullopt);
    }
  }
  return out;
}

}  // namespace detail

/// Parses one ASOTE-JSON record (one line). Validates every span, requires
/// each triplet's aspect to be listed under "aspects", deduplicates triplets,
/// and routes conflict-sentiment triplets aside.
inline AnnotatedSentence parse_sentence_record(const std::string& line,
                                               LoadReport* report = nullptr) {
  json rec = json::parse(line, nullptr, false);
  if (rec.is_discarded()) throw data_error("invalid JSON");
  AnnotatedSentence out = detail::parse_record(rec);

  if (rec.contains("triplets")) {
    for (const auto& t : rec.at("triplets")) {
      if (!t.is_object() || !t.contains("aspect") || !t.contains("opinion") ||
          !t.contains("sentiment"))
        throw data_error("record '" + out.sentence.id +
                         "' has a malformed triplet entry");
      Span aspect =
          detail::parse_span_pair(t.at("aspect"), out.sentence, "aspect");
      Span opinion =
          detail::parse_span_pair(t.at("opinion"), out.sentence, "opinion");
      if (!out.has_aspect(aspect))
        throw data_error("record '" + out.sentence.id + "' triplet aspect (" +
                         std::to_string(aspect.start) + "," +
                         std::to_string(aspect.end) +
                         ") is not listed under \"aspects\"");
      const std::string label = t.at("sentiment").get<std::string>();
      if (label == "conflict") {
        out.conflict_triplets.emplace_back(aspect, opinion);
        if (report) report->conflict_triplets++;
        continue;
      }
      Triplet triplet = make_triplet(aspect, parse_sentiment(label), opinion,
                                     out.sentence.words.size());
      if (std::find(out.triplets.begin(), out.triplets.end(), triplet) !=
          out.triplets.end()) {
        if (report) report->duplicate_triplets_removed++;
        continue;
      }
      out.triplets.push_back(triplet);
    }
  }
  std::sort(out.triplets.begin(), out.triplets.end());
  return out;
}

inline DatasetSplit parse_split(std::istream& in, const std::string& name,
                                LoadReport* report = nullptr) {
  DatasetSplit split;
  split.name = name;
  std::set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    AnnotatedSentence sent;
    try {
      sent = parse_sentence_record(line, report);
    } catch (const Error& e) {
      throw Error(e.category(),
                  "line " + std::to_string(line_no) + ": " +
                      std::string(e.what()).substr(e.category().size() + 2));
    }
    if (!seen_ids.insert(sent.sentence.id).second)
      throw data_error("line " + std::to_string(line_no) +
                       ": duplicate sentence id '" + sent.sentence.id + "'");
    split.sentences.push_back(std::move(sent));
  }
  return split;
}

inline DatasetSplit load_split(const std::string& path,
                               LoadReport* report = nullptr,
                               const std::string& name = "") {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open dataset file '" + path + "'");
  return parse_split(in, name.empty() ? path : name, report);
}

inline json sentence_to_json(const AnnotatedSentence& s) {
  json rec;
  rec["id"] = s.sentence.id;
  rec["words"] = s.sentence.words;
  rec["aspects"] = json::array();
  for (std::size_t i = 0; i < s.aspects.size(); ++i) {
    json a;
    a["from"] = s.aspects[i].start;
    a["to"] = s.aspects[i].end;
    if (i < s.aspect_sentiments.size() && s.aspect_sentiments[i])
      a["sentiment"] = to_string(*s.aspect_sentiments[i]);
    else
      a["sentiment"] = nullptr;
    rec["aspects"].push_back(a);
  }
  rec["triplets"] = json::array();
  for (const Triplet& t : s.triplets) {
    json e;
    e["aspect"] = {t.aspect.start, t.aspect.end};
    e["sentiment"] = to_string(t.sentiment);
    e["opinion"] = {t.opinion.start, t.opinion.end};
    rec["triplets"].push_back(e);
  }
  for (const auto& [aspect, opinion] : s.conflict_triplets) {
    json e;
    e["aspect"] = {aspect.start, aspect.end};
    e["sentiment"] = "conflict";
    e["opinion"] = {opinion.start, opinion.end};
    rec["triplets"].push_back(e);
  }
  return rec;
}

inline void write_split(const DatasetSplit& split, std::ostream& out) {
  for (const AnnotatedSentence& s : split.sentences)
    out << sentence_to_json(s).dump() << "\n";
}

inline void write_split(const DatasetSplit& split, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write dataset file '" + path + "'");
  write_split(split, out);
}

/// Merges separate aspect, opinion, and pair-sentiment annotation files into
/// one split. Every aspect from the aspect file is kept, with or without
/// opinions; every (aspect, opinion) pair must receive exactly one pair
/// sentiment; orphan keys on either side are an error.
inline DatasetSplit assemble_asote(const std::string& aspect_path,
                                   const std::string& opinion_path,
                                   const std::string& pair_sentiment_path,
                                   LoadReport* report = nullptr) {
  std::ifstream aspects_in(aspect_path);
  if (!aspects_in) throw io_error("cannot open aspect file '" + aspect_path + "'");

  DatasetSplit split;
  split.name = aspect_path;
  std::map<std::string, std::size_t> index_by_id;
  {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(aspects_in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
      json rec = json::parse(line, nullptr, false);
      if (rec.is_discarded())
        throw data_error("aspect file line " + std::to_string(line_no) +
                         ": invalid JSON");
      AnnotatedSentence sent = detail::parse_record(rec);
      if (index_by_id.count(sent.sentence.id))
        throw data_error("aspect file line " + std::to_string(line_no) +
                         ": duplicate sentence id '" + sent.sentence.id + "'");
      index_by_id[sent.sentence.id] = split.sentences.size();
      split.sentences.push_back(std::move(sent));
    }
  }

  // (sentence id, aspect) -> opinion spans
  struct PairInfo {
    std::vector<Span> opinions;
  };
  auto find_sentence = [&](const std::string& id,
                           const std::string& where) -> AnnotatedSentence& {
    auto it = index_by_id.find(id);
    if (it == index_by_id.end())
      throw data_error(where + " references unknown sentence id '" + id + "'");
    return split.sentences[it->second];
  };

  std::map<std::pair<std::string, Span>, std::vector<Span>> opinions_by_aspect;
  {
    std::ifstream in(opinion_path);
    if (!in) throw io_error("cannot open opinion file '" + opinion_path + "'");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
      json rec = json::parse(line, nullptr, false);
      if (rec.is_discarded())
        throw data_error("opinion file line " + std::to_string(line_no) +
                         ": invalid JSON");
      const std::string where = "opinion file line " + std::to_string(line_no);
      const std::string id = rec.at("id").get<std::string>();
      AnnotatedSentence& sent = find_sentence(id, where);
      Span aspect =
          detail::parse_span_pair(rec.at("aspect"), sent.sentence, "aspect");
      if (!sent.has_aspect(aspect))
        throw data_error(where + ": opinion row references unknown aspect (" +
                         std::to_string(aspect.start) + "," +
                         std::to_string(aspect.end) + ") in sentence '" + id +
                         "'");
      auto& bucket = opinions_by_aspect[{id, aspect}];
      for (const auto& o : rec.at("opinions")) {
        Span opinion = detail::parse_span_pair(o, sent.sentence, "opinion");
        if (std::find(bucket.begin(), bucket.end(), opinion) == bucket.end())
          bucket.push_back(opinion);
      }
    }
  }

  std::map<std::tuple<std::string, Span, Span>, std::string> pair_sentiments;
  {
    std::ifstream in(pair_sentiment_path);
    if (!in)
      throw io_error("cannot open pair sentiment file '" +
                     pair_sentiment_path + "'");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
      json rec = json::parse(line, nullptr, false);
      if (rec.is_discarded())
        throw data_error("pair sentiment file line " +
                         std::to_string(line_no) + ": invalid JSON");
      const std::string where =
          "pair sentiment file line " + std::to_string(line_no);
      const std::string id = rec.at("id").get<std::string>();
      AnnotatedSentence& sent = find_sentence(id, where);
      Span aspect =
          detail::parse_span_pair(rec.at("aspect"), sent.sentence, "aspect");
      Span opinion =
          detail::parse_span_pair(rec.at("opinion"), sent.sentence, "opinion");
      auto key = std::make_tuple(id, aspect, opinion);
      auto it = opinions_by_aspect.find({id, aspect});
      const bool known =
          it != opinions_by_aspect.end() &&
          std::find(it->second.begin(), it->second.end(), opinion) !=
              it->second.end();
      if (!known)
        throw data_error(where + ": sentiment for pair not present in the "
                         "opinion file: sentence '" + id + "', aspect (" +
                         std::to_string(aspect.start) + "," +
                         std::to_string(aspect.end) + "), opinion (" +
                         std::to_string(opinion.start) + "," +
                         std::to_string(opinion.end) + ")");
      const std::string label = rec.at("sentiment").get<std::string>();
      auto [pos, inserted] = pair_sentiments.emplace(key, label);
      if (!inserted && pos->second != label)
        throw data_error(where + ": conflicting sentiments for one pair");
    }
  }

  for (auto& [key, opinions] : opinions_by_aspect) {
    const auto& [id, aspect] = key;
    AnnotatedSentence& sent = split.sentences[index_by_id.at(id)];
    for (const Span& opinion : opinions) {
      auto it = pair_sentiments.find(std::make_tuple(id, aspect, opinion));
      if (it == pair_sentiments.end())
        throw data_error("pair without sentiment: sentence '" + id +
                         "', aspect (" + std::to_string(aspect.start) + "," +
                         std::to_string(aspect.end) + "), opinion (" +
                         std::to_string(opinion.start) + "," +
                         std::to_string(opinion.end) + ")");
      if (it->second == "conflict") {
        sent.conflict_triplets.emplace_back(aspect, opinion);
        if (report) report->conflict_triplets++;
        continue;
      }
      Triplet t = make_triplet(aspect, parse_sentiment(it->second), opinion,
                               sent.sentence.words.size());
      if (std::find(sent.triplets.begin(), sent.triplets.end(), t) ==
          sent.triplets.end())
        sent.triplets.push_back(t);
      else if (report)
        report->duplicate_triplets_removed++;
    }
  }
  for (AnnotatedSentence& s : split.sentences)
    std::sort(s.triplets.begin(), s.triplets.end());
  return split;
}

inline StatsTable compute_statistics(const DatasetSplit& split) {
  StatsTable stats;
  stats.n_sentences = static_cast<long long>(split.sentences.size());

  bool any_aspect_sentiment = false;
  for (const AnnotatedSentence& s : split.sentences)
    for (const auto& label : s.aspect_sentiments)
      if (label) any_aspect_sentiment = true;
  if (any_aspect_sentiment) {
    stats.n_d_s2 = 0;
    stats.n_t_d = 0;
  }

  for (const AnnotatedSentence& s : split.sentences) {
    stats.n_aspects += static_cast<long long>(s.aspects.size());
    stats.n_triplets += static_cast<long long>(s.triplets.size());

    std::map<Span, std::vector<const Triplet*>> by_aspect;
    for (const Span& a : s.aspects) by_aspect[a];  // keep zero-triplet aspects
    for (const Triplet& t : s.triplets) by_aspect[t.aspect].push_back(&t);

    for (std::size_t i = 0; i < s.aspects.size(); ++i) {
      const auto& triplets = by_aspect.at(s.aspects[i]);
      if (triplets.empty())
        stats.n_zero_t++;
      else if (triplets.size() == 1)
        stats.n_one_t++;
      else
        stats.n_m_t++;

      std::set<Sentiment> sentiments;
      std::set<Span> opinions;
      for (const Triplet* t : triplets) {
        sentiments.insert(t->sentiment);
        opinions.insert(t->opinion);
      }
      if (sentiments.size() > 1) stats.n_d_s1++;
      if (opinions.size() > 1) stats.n_aspect_multi_opinion++;

      const std::optional<AspectSentiment> aspect_label =
          i < s.aspect_sentiments.size() ? s.aspect_sentiments[i]
                                         : std::nullopt;
      if (stats.n_d_s2 && triplets.size() == 1 && aspect_label &&
          *aspect_label != AspectSentiment::conflict &&
          !same_label(*aspect_label, triplets[0]->sentiment))
        (*stats.n_d_s2)++;
      if (stats.n_t_d && aspect_label)
        for (const Triplet* t : triplets)
          if (!same_label(*aspect_label, t->sentiment)) (*stats.n_t_d)++;
    }

    std::map<Span, std::set<Span>> aspects_by_opinion;
    for (const Triplet& t : s.triplets)
      aspects_by_opinion[t.opinion].insert(t.aspect);
    for (const auto& [opinion, aspects] : aspects_by_opinion)
      if (aspects.size() > 1) stats.n_opinion_multi_aspect++;
  }
  return stats;
}

/// One example per (sentence, aspect) pair. With `drop_opinionless` the
/// aspects that have no opinion (zero triplets) are removed; otherwise they
/// are kept with empty gold opinions.
inline std::vector<ToweExample> derive_towe_examples(const DatasetSplit& split,
                                                     bool drop_opinionless) {
  std::vector<ToweExample> out;
  for (const AnnotatedSentence& s : split.sentences) {
    for (const Span& aspect : s.aspects) {
      std::set<Span> opinions;
      for (const Triplet& t : s.triplets)
        if (t.aspect == aspect) opinions.insert(t.opinion);
      if (drop_opinionless && opinions.empty()) continue;
      ToweExample ex;
      ex.sentence = s.sentence;
      ex.aspect = aspect;
      ex.gold_opinions.assign(opinions.begin(), opinions.end());
      out.push_back(std::move(ex));
    }
  }
  return out;
}

/// One example per aspect with at least one triplet; one (opinion, sentiment)
/// entry per triplet so the examples partition the split's triplet set.
inline std::vector<AopscExample> derive_aopsc_examples(
    const DatasetSplit& split) {
  std::vector<AopscExample> out;
  for (const AnnotatedSentence& s : split.sentences) {
    for (const Span& aspect : s.aspects) {
      AopscExample ex;
      ex.sentence = s.sentence;
      ex.aspect = aspect;
      for (const Triplet& t : s.triplets) {
        if (t.aspect != aspect) continue;
        ex.opinions.push_back(t.opinion);
        ex.gold_sentiments.push_back(t.sentiment);
      }
      if (!ex.opinions.empty()) out.push_back(std::move(ex));
    }
  }
  return out;
}

/// Tab-separated statistics rows in the summary-table column order, with the
/// two multi-association counts appended.
inline std::string render_stats_table(
    const std::vector<std::pair<std::string, StatsTable>>& rows) {
  std::ostringstream out;
  out << "dataset\t#sentence\t#aspects\t#triplets\t#zero_t\t#one_t\t#m_t"
         "\t#d_s1\t#d_s2\t#t_d\t#aspect_multi_opinion\t#opinion_multi_aspect\n";
  for (const auto& [name, s] : rows) {
    out << name << '\t' << s.n_sentences << '\t' << s.n_aspects << '\t'
        << s.n_triplets << '\t' << s.n_zero_t << '\t' << s.n_one_t << '\t'
        << s.n_m_t << '\t' << s.n_d_s1 << '\t';
    if (s.n_d_s2)
      out << *s.n_d_s2;
    else
      out << '-';
    out << '\t';
    if (s.n_t_d)
      out << *s.n_t_d;
    else
      out << '-';
    out << '\t' << s.n_aspect_multi_opinion << '\t'
        << s.n_opinion_multi_aspect << '\n';
  }
  return out.str();
}

}  // namespace asote

#endif  // ASOTE_CORPUS_HPP
