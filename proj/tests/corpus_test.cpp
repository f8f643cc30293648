#include "asote/corpus.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <utility>

#include "support.hpp"

using namespace asote;

namespace {

const char* kRecord =
    R"({"id":"r1","words":["the","wine","list","was","huge"],)"
    R"("aspects":[{"from":1,"to":2,"sentiment":"positive"}],)"
    R"("triplets":[{"aspect":[1,2],"sentiment":"positive","opinion":[4,4]}]})";

}  // namespace

TEST(ParseRecord, ReadsWordsAspectsAndTriplets) {
  const AnnotatedSentence s = parse_sentence_record(kRecord);
  EXPECT_EQ(s.sentence.id, "r1");
  ASSERT_EQ(s.sentence.words.size(), 5u);
  EXPECT_EQ(s.sentence.raw_text, "the wine list was huge");
  ASSERT_EQ(s.aspects.size(), 1u);
  EXPECT_EQ(s.aspects[0], Span({1, 2, ""}));
  EXPECT_EQ(s.aspects[0].surface, "wine list");
  ASSERT_EQ(s.aspect_sentiments.size(), 1u);
  EXPECT_EQ(s.aspect_sentiments[0], AspectSentiment::positive);
  ASSERT_EQ(s.triplets.size(), 1u);
  EXPECT_EQ(s.triplets[0].sentiment, Sentiment::positive);
  EXPECT_EQ(s.triplets[0].opinion.surface, "huge");
}

TEST(ParseRecord, SortsTriplets) {
  const AnnotatedSentence s = parse_sentence_record(
      R"({"id":"r","words":["a","b","c"],)"
      R"("aspects":[{"from":2,"to":2},{"from":0,"to":0}],)"
      R"("triplets":[{"aspect":[2,2],"sentiment":"negative","opinion":[1,1]},)"
      R"({"aspect":[0,0],"sentiment":"positive","opinion":[1,1]}]})");
  ASSERT_EQ(s.triplets.size(), 2u);
  EXPECT_EQ(s.triplets[0].aspect.start, 0);
  EXPECT_EQ(s.triplets[1].aspect.start, 2);
}

TEST(ParseRecord, RejectsMalformedInput) {
  EXPECT_THROW(parse_sentence_record("not json"), Error);
  EXPECT_THROW(parse_sentence_record("[1,2]"), Error);
  EXPECT_THROW(parse_sentence_record(R"({"words":["a"]})"), Error);
  EXPECT_THROW(parse_sentence_record(R"({"id":"r","words":[]})"), Error);
  EXPECT_THROW(parse_sentence_record(R"({"id":"r","words":["a",3]})"), Error);
  // Triplet span outside the sentence.
  EXPECT_THROW(parse_sentence_record(
                   R"({"id":"r","words":["a"],"aspects":[{"from":0,"to":0}],)"
                   R"("triplets":[{"aspect":[0,0],"sentiment":"positive",)"
                   R"("opinion":[0,5]}]})"),
               Error);
  // Aspect listed twice.
  EXPECT_THROW(parse_sentence_record(
                   R"({"id":"r","words":["a"],)"
                   R"("aspects":[{"from":0,"to":0},{"from":0,"to":0}]})"),
               Error);
}

TEST(ParseRecord, TripletAspectMustBeListed) {
  try {
    parse_sentence_record(
        R"({"id":"r","words":["a","b"],"aspects":[{"from":0,"to":0}],)"
        R"("triplets":[{"aspect":[1,1],"sentiment":"positive","opinion":[0,0]}]})");
    FAIL() << "expected a data error";
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), "data-error");
    EXPECT_NE(std::string(e.what()).find("not listed"), std::string::npos);
  }
}

TEST(ParseRecord, DeduplicatesTriplets) {
  LoadReport report;
  const AnnotatedSentence s = parse_sentence_record(
      R"({"id":"r","words":["a","b"],"aspects":[{"from":0,"to":0}],)"
      R"("triplets":[{"aspect":[0,0],"sentiment":"positive","opinion":[1,1]},)"
      R"({"aspect":[0,0],"sentiment":"positive","opinion":[1,1]}]})",
      &report);
  EXPECT_EQ(s.triplets.size(), 1u);
  EXPECT_EQ(report.duplicate_triplets_removed, 1u);
}

TEST(ParseRecord, SetsConflictTripletsAside) {
  LoadReport report;
  const AnnotatedSentence s = parse_sentence_record(
      R"({"id":"r","words":["a","b"],"aspects":[{"from":0,"to":0}],)"
      R"("triplets":[{"aspect":[0,0],"sentiment":"conflict","opinion":[1,1]}]})",
      &report);
  EXPECT_TRUE(s.triplets.empty());
  ASSERT_EQ(s.conflict_triplets.size(), 1u);
  EXPECT_EQ(report.conflict_triplets, 1u);
}

TEST(ParseSplit, ReportsLineNumbersAndKeepsCategory) {
  std::istringstream in(
      "{\"id\":\"a\",\"words\":[\"x\"]}\n"
      "\n"
      "{\"id\":\"b\",\"words\":[]}\n");
  try {
    parse_split(in, "bad");
    FAIL() << "expected a data error";
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), "data-error");
    EXPECT_NE(std::string(e.what()).find("line 3:"), std::string::npos);
  }
}

TEST(ParseSplit, RejectsDuplicateSentenceIds) {
  std::istringstream in(
      "{\"id\":\"a\",\"words\":[\"x\"]}\n"
      "{\"id\":\"a\",\"words\":[\"y\"]}\n");
  EXPECT_THROW(parse_split(in, "dup"), Error);
}

TEST(LoadSplit, MissingFileIsAnIoError) {
  try {
    load_split("/nonexistent/path.jsonl");
    FAIL() << "expected an io error";
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), "io-error");
  }
}

TEST(WriteSplit, RoundTripsThroughJson) {
  LoadReport report;
  const DatasetSplit split =
      load_split(testsup::fixture_path("stats.jsonl"), &report);
  std::ostringstream out;
  write_split(split, out);
  std::istringstream in(out.str());
  const DatasetSplit again = parse_split(in, "roundtrip");

  ASSERT_EQ(again.sentences.size(), split.sentences.size());
  for (std::size_t i = 0; i < split.sentences.size(); ++i) {
    const AnnotatedSentence& a = split.sentences[i];
    const AnnotatedSentence& b = again.sentences[i];
    EXPECT_EQ(a.sentence.id, b.sentence.id);
    EXPECT_EQ(a.sentence.words, b.sentence.words);
    EXPECT_EQ(a.aspects, b.aspects);
    EXPECT_EQ(a.aspect_sentiments, b.aspect_sentiments);
    EXPECT_EQ(a.triplets, b.triplets);
    EXPECT_EQ(a.conflict_triplets, b.conflict_triplets);
  }
}

TEST(Statistics, MatchesHandTalliedFixture) {
  LoadReport report;
  const DatasetSplit split =
      load_split(testsup::fixture_path("stats.jsonl"), &report);
  EXPECT_EQ(report.conflict_triplets, 1u);
  EXPECT_EQ(report.duplicate_triplets_removed, 1u);

  const StatsTable t = compute_statistics(split);
  EXPECT_EQ(t.n_sentences, 10);
  EXPECT_EQ(t.n_aspects, 10);
  EXPECT_EQ(t.n_triplets, 11);
  EXPECT_EQ(t.n_zero_t, 1);
  EXPECT_EQ(t.n_one_t, 7);
  EXPECT_EQ(t.n_m_t, 2);
  EXPECT_EQ(t.n_d_s1, 1);
  ASSERT_TRUE(t.n_d_s2.has_value());
  EXPECT_EQ(*t.n_d_s2, 1);
  ASSERT_TRUE(t.n_t_d.has_value());
  EXPECT_EQ(*t.n_t_d, 4);
  EXPECT_EQ(t.n_aspect_multi_opinion, 2);
  EXPECT_EQ(t.n_opinion_multi_aspect, 1);
}

TEST(Statistics, DisagreementCountsNeedAspectSentiments) {
  const DatasetSplit split = load_split(testsup::fixture_path("overfit.jsonl"));
  const StatsTable t = compute_statistics(split);
  EXPECT_FALSE(t.n_d_s2.has_value());
  EXPECT_FALSE(t.n_t_d.has_value());
  const std::string table = render_stats_table({{"overfit", t}});
  EXPECT_NE(table.find("\t-\t-\t"), std::string::npos);
}

TEST(Statistics, RendersOneRowPerDataset) {
  const DatasetSplit split = load_split(testsup::fixture_path("stats.jsonl"));
  const StatsTable t = compute_statistics(split);
  const std::string table = render_stats_table({{"a", t}, {"b", t}});
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 3);
  EXPECT_NE(table.find("a\t10\t10\t11\t1\t7\t2\t1\t1\t4\t2\t1\n"),
            std::string::npos);
}

TEST(DeriveExamples, ToweKeepsOrDropsOpinionlessAspects) {
  const DatasetSplit split = load_split(testsup::fixture_path("overfit.jsonl"));
  const auto kept = derive_towe_examples(split, false);
  const auto dropped = derive_towe_examples(split, true);
  EXPECT_EQ(kept.size(), 13u);
  EXPECT_EQ(dropped.size(), 12u);
  bool saw_empty = false;
  for (const ToweExample& ex : kept)
    if (ex.gold_opinions.empty()) {
      saw_empty = true;
      EXPECT_EQ(ex.sentence.id, "s9");
    }
  EXPECT_TRUE(saw_empty);
}

TEST(DeriveExamples, AopscPartitionsTheTripletSet) {
  const DatasetSplit split = load_split(testsup::fixture_path("overfit.jsonl"));
  const auto examples = derive_aopsc_examples(split);
  EXPECT_EQ(examples.size(), 12u);
  std::size_t pairs = 0;
  for (const AopscExample& ex : examples) {
    EXPECT_FALSE(ex.opinions.empty());
    ASSERT_EQ(ex.opinions.size(), ex.gold_sentiments.size());
    pairs += ex.opinions.size();
  }
  std::size_t triplets = 0;
  for (const AnnotatedSentence& s : split.sentences) triplets += s.triplets.size();
  EXPECT_EQ(pairs, triplets);
}

namespace {

/// Splits one annotated dataset into the three single-task files that
/// assemble_asote consumes.
struct Decomposed {
  std::string aspects, opinions, pairs;
};

Decomposed decompose(const DatasetSplit& split) {
  Decomposed out;
  for (const AnnotatedSentence& s : split.sentences) {
    json aspect_rec;
    aspect_rec["id"] = s.sentence.id;
    aspect_rec["words"] = s.sentence.words;
    aspect_rec["aspects"] = json::array();
    for (std::size_t i = 0; i < s.aspects.size(); ++i) {
      json a;
      a["from"] = s.aspects[i].start;
      a["to"] = s.aspects[i].end;
      if (s.aspect_sentiments[i])
        a["sentiment"] = to_string(*s.aspect_sentiments[i]);
      else
        a["sentiment"] = nullptr;
      aspect_rec["aspects"].push_back(a);
    }
    out.aspects += aspect_rec.dump() + "\n";

    std::map<Span, std::vector<std::pair<Span, std::string>>> by_aspect;
    for (const Triplet& t : s.triplets)
      by_aspect[t.aspect].emplace_back(t.opinion, to_string(t.sentiment));
    for (const auto& [aspect, opinion] : s.conflict_triplets)
      by_aspect[aspect].emplace_back(opinion, "conflict");

    for (const auto& [aspect, entries] : by_aspect) {
      json opinion_rec;
      opinion_rec["id"] = s.sentence.id;
      opinion_rec["aspect"] = {aspect.start, aspect.end};
      opinion_rec["opinions"] = json::array();
      for (const auto& [opinion, label] : entries) {
        opinion_rec["opinions"].push_back({opinion.start, opinion.end});
        json pair_rec;
        pair_rec["id"] = s.sentence.id;
        pair_rec["aspect"] = {aspect.start, aspect.end};
        pair_rec["opinion"] = {opinion.start, opinion.end};
        pair_rec["sentiment"] = label;
        out.pairs += pair_rec.dump() + "\n";
      }
      out.opinions += opinion_rec.dump() + "\n";
    }
  }
  return out;
}

}  // namespace

TEST(Assemble, RebuildsTheOriginalSplit) {
  const DatasetSplit original =
      load_split(testsup::fixture_path("stats.jsonl"));
  const Decomposed files = decompose(original);
  const std::string dir = testsup::make_temp_dir("assemble");
  const std::string ap = testsup::write_file(dir, "aspects.jsonl", files.aspects);
  const std::string op = testsup::write_file(dir, "opinions.jsonl", files.opinions);
  const std::string pp = testsup::write_file(dir, "pairs.jsonl", files.pairs);

  LoadReport report;
  const DatasetSplit assembled = assemble_asote(ap, op, pp, &report);
  EXPECT_EQ(report.conflict_triplets, 1u);

  ASSERT_EQ(assembled.sentences.size(), original.sentences.size());
  for (std::size_t i = 0; i < original.sentences.size(); ++i) {
    const AnnotatedSentence& a = original.sentences[i];
    const AnnotatedSentence& b = assembled.sentences[i];
    EXPECT_EQ(a.sentence.id, b.sentence.id);
    EXPECT_EQ(a.aspects, b.aspects);
    EXPECT_EQ(a.triplets, b.triplets);
    const std::multiset<std::pair<Span, Span>> ca(a.conflict_triplets.begin(),
                                                  a.conflict_triplets.end());
    const std::multiset<std::pair<Span, Span>> cb(b.conflict_triplets.begin(),
                                                  b.conflict_triplets.end());
    EXPECT_EQ(ca, cb);
  }
}

TEST(Assemble, RejectsInconsistentFiles) {
  const std::string dir = testsup::make_temp_dir("assemble-bad");
  const std::string aspects = testsup::write_file(
      dir, "aspects.jsonl",
      R"({"id":"a","words":["x","y"],"aspects":[{"from":0,"to":0}]})" "\n");

  // Opinion row for an unknown sentence.
  {
    const std::string op = testsup::write_file(
        dir, "op1.jsonl", R"({"id":"zz","aspect":[0,0],"opinions":[[1,1]]})" "\n");
    const std::string pp = testsup::write_file(dir, "pp1.jsonl", "");
    EXPECT_THROW(assemble_asote(aspects, op, pp), Error);
  }
  // Opinion row for an unknown aspect.
  {
    const std::string op = testsup::write_file(
        dir, "op2.jsonl", R"({"id":"a","aspect":[1,1],"opinions":[[0,0]]})" "\n");
    const std::string pp = testsup::write_file(dir, "pp2.jsonl", "");
    EXPECT_THROW(assemble_asote(aspects, op, pp), Error);
  }
  // Sentiment for a pair the opinion file never listed.
  {
    const std::string op = testsup::write_file(
        dir, "op3.jsonl", R"({"id":"a","aspect":[0,0],"opinions":[[1,1]]})" "\n");
    const std::string pp = testsup::write_file(
        dir, "pp3.jsonl",
        R"({"id":"a","aspect":[0,0],"opinion":[0,0],"sentiment":"positive"})" "\n");
    EXPECT_THROW(assemble_asote(aspects, op, pp), Error);
  }
  // Two different sentiments for one pair.
  {
    const std::string op = testsup::write_file(
        dir, "op4.jsonl", R"({"id":"a","aspect":[0,0],"opinions":[[1,1]]})" "\n");
    const std::string pp = testsup::write_file(
        dir, "pp4.jsonl",
        R"({"id":"a","aspect":[0,0],"opinion":[1,1],"sentiment":"positive"})" "\n"
        R"({"id":"a","aspect":[0,0],"opinion":[1,1],"sentiment":"negative"})" "\n");
    EXPECT_THROW(assemble_asote(aspects, op, pp), Error);
  }
  // Pair that never receives a sentiment.
  {
    const std::string op = testsup::write_file(
        dir, "op5.jsonl", R"({"id":"a","aspect":[0,0],"opinions":[[1,1]]})" "\n");
    const std::string pp = testsup::write_file(dir, "pp5.jsonl", "");
    EXPECT_THROW(assemble_asote(aspects, op, pp), Error);
  }
}

TEST(Assemble, KeepsAspectsWithoutOpinions) {
  const std::string dir = testsup::make_temp_dir("assemble-empty");
  const std::string aspects = testsup::write_file(
      dir, "aspects.jsonl",
      R"({"id":"a","words":["x","y"],"aspects":[{"from":0,"to":0}]})" "\n");
  const std::string op = testsup::write_file(dir, "op.jsonl", "");
  const std::string pp = testsup::write_file(dir, "pp.jsonl", "");
  const DatasetSplit split = assemble_asote(aspects, op, pp);
  ASSERT_EQ(split.sentences.size(), 1u);
  EXPECT_EQ(split.sentences[0].aspects.size(), 1u);
  EXPECT_TRUE(split.sentences[0].triplets.empty());
}
