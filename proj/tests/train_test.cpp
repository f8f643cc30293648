#include "asote/train.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "support.hpp"

using namespace asote;

namespace {

TrainConfig overfit_config(const std::string& out_dir) {
  TrainConfig c;
  c.task = Task::ate;
  c.variant = Variant::PBF;
  c.train_path = testsup::fixture_path("overfit.jsonl");
  c.dev_path = testsup::fixture_path("overfit.jsonl");
  c.batch_size = 4;
  c.learning_rate = 0.01;
  c.dropout = 0.0;
  c.patience = 2;
  c.max_epochs = 3;
  c.seed = 0;
  c.embed_dim = 8;
  c.max_positions = 32;
  c.out_dir = out_dir;
  return c;
}

}  // namespace

TEST(Config, RenderAndParseAreInverses) {
  TrainConfig c;
  c.task = Task::towe;
  c.variant = Variant::M2;
  c.train_path = "data/train.jsonl";
  c.dev_path = "data/dev.jsonl";
  c.test_path = "data/test.jsonl";
  c.batch_size = 16;
  c.learning_rate = 2e-5;
  c.dropout = 0.5;
  c.patience = 7;
  c.max_epochs = 40;
  c.seed = 3;
  c.encoder = "pretrained:exports/base";
  c.embed_dim = 48;
  c.max_positions = 96;
  c.early_stop_metric = "f1";
  c.out_dir = "runs/towe";

  const std::string text = render_config(c);
  EXPECT_EQ(parse_config(text), c);
  EXPECT_EQ(render_config(parse_config(text)), text);
  EXPECT_EQ(parse_config(""), TrainConfig{});
}

TEST(Config, ParserToleratesCommentsAndSpacing) {
  const TrainConfig c = parse_config(
      "# a comment\n"
      "\n"
      "  batch_size   =  8 \n"
      "data.train = x.jsonl\n");
  EXPECT_EQ(c.batch_size, 8);
  EXPECT_EQ(c.train_path, "x.jsonl");
  EXPECT_EQ(c.dropout, 0.5);
}

TEST(Config, ParserRejectsMalformedInput) {
  EXPECT_THROW(parse_config("batch_size 8\n"), Error);
  EXPECT_THROW(parse_config("= 8\n"), Error);
  EXPECT_THROW(parse_config("batch_size = 8\nbatch_size = 9\n"), Error);
  EXPECT_THROW(parse_config("no_such_key = 1\n"), Error);
  EXPECT_THROW(parse_config("batch_size = eight\n"), Error);
  EXPECT_THROW(parse_config("batch_size = 8x\n"), Error);
  EXPECT_THROW(parse_config("learning_rate = fast\n"), Error);
  EXPECT_THROW(parse_config("seed = 1.5\n"), Error);
  EXPECT_THROW(parse_config("task = everything\n"), Error);
  EXPECT_THROW(parse_config("variant = M9\n"), Error);
  try {
    parse_config("dropout = half\n");
    FAIL() << "expected a config error";
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), "config-error");
  }
}

TEST(Config, EarlyStopMetricFollowsTheTask) {
  TrainConfig c;
  c.task = Task::ate;
  EXPECT_EQ(c.resolved_metric(), "f1");
  c.task = Task::aopsc;
  EXPECT_EQ(c.resolved_metric(), "accuracy");
  c.early_stop_metric = "accuracy";
  EXPECT_EQ(c.resolved_metric(), "accuracy");
  c.early_stop_metric = "f1";
  EXPECT_THROW(c.resolved_metric(), Error);
}

TEST(Config, ValidateCatchesBadValues) {
  TrainConfig ok = overfit_config("unused");
  EXPECT_NO_THROW(ok.validate());

  TrainConfig c = ok;
  c.train_path.clear();
  EXPECT_THROW(c.validate(), Error);
  c = ok;
  c.dev_path.clear();
  EXPECT_THROW(c.validate(), Error);
  c = ok;
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), Error);
  c = ok;
  c.learning_rate = 0.0;
  EXPECT_THROW(c.validate(), Error);
  c = ok;
  c.dropout = 1.0;
  EXPECT_THROW(c.validate(), Error);
  c = ok;
  c.patience = 0;
  EXPECT_THROW(c.validate(), Error);
  c = ok;
  c.max_epochs = 0;
  EXPECT_THROW(c.validate(), Error);
  c = ok;
  c.encoder = "bert";
  EXPECT_THROW(c.validate(), Error);
  c = ok;
  c.embed_dim = 7;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Config, DoublesRenderExactly) {
  for (const double v : {2e-5, 0.5, 0.1, 1.0 / 3.0, 123456.789}) {
    const std::string s = render_double(v);
    EXPECT_EQ(std::stod(s), v) << s;
  }
}

TEST(Config, LoaderReportsMissingFiles) {
  try {
    load_config("/nonexistent/config.txt");
    FAIL() << "expected an io error";
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), "io-error");
  }
}

TEST(Shuffle, IsADeterministicPermutation) {
  std::vector<std::size_t> a(50), b(50);
  std::iota(a.begin(), a.end(), 0);
  std::iota(b.begin(), b.end(), 0);
  std::mt19937_64 r1(7), r2(7), r3(8);
  detail::shuffle_indices(a, r1);
  detail::shuffle_indices(b, r2);
  EXPECT_EQ(a, b);

  std::vector<std::size_t> c(50);
  std::iota(c.begin(), c.end(), 0);
  detail::shuffle_indices(c, r3);
  EXPECT_NE(a, c);

  std::sort(a.begin(), a.end());
  std::vector<std::size_t> sorted(50);
  std::iota(sorted.begin(), sorted.end(), 0);
  EXPECT_EQ(a, sorted);
}

TEST(ExperimentId, IgnoresPerRunFieldsOnly) {
  TrainConfig a = overfit_config("runs/a");
  TrainConfig b = a;
  b.seed = 42;
  b.out_dir = "elsewhere";
  EXPECT_EQ(experiment_id(a), experiment_id(b));

  TrainConfig c = a;
  c.learning_rate = 0.02;
  EXPECT_NE(experiment_id(a), experiment_id(c));

  const std::string id = experiment_id(a);
  ASSERT_EQ(id.size(), 20u);
  EXPECT_EQ(id.substr(0, 4), "exp-");
  for (char ch : id.substr(4)) EXPECT_TRUE(std::isxdigit(static_cast<unsigned char>(ch)));
}

TEST(Examples, EveryTaskDrawsTheRightInstances) {
  const DatasetSplit split =
      load_split(testsup::fixture_path("overfit.jsonl"), nullptr, "train");
  EncoderConfig config;
  config.embed_dim = 8;
  config.max_positions = 32;
  std::vector<std::vector<std::string>> corpus;
  for (const AnnotatedSentence& s : split.sentences)
    corpus.push_back(s.sentence.words);
  const WordPieceTokenizer tok(build_tiny_vocab(corpus));

  const TaskModel ate = init_task_model(Task::ate, Variant::PBF, tok, config, 0);
  EXPECT_EQ(detail::build_examples(ate, split).size(), 10u);

  const TaskModel towe = init_task_model(Task::towe, Variant::PBF, tok, config, 0);
  EXPECT_EQ(detail::build_examples(towe, split).size(), 13u);

  const TaskModel aopsc =
      init_task_model(Task::aopsc, Variant::PBF, tok, config, 0);
  EXPECT_EQ(detail::build_examples(aopsc, split).size(), 12u);

  DatasetSplit empty;
  EXPECT_THROW(detail::build_examples(ate, empty), Error);
}

TEST(Training, RunsWritesArtifactsAndIsDeterministic) {
  const std::string dir = testsup::make_temp_dir("train");
  const TrainConfig config = overfit_config(dir + "/a");
  const TrainResult result = train(config);

  EXPECT_EQ(result.checkpoint_path, dir + "/a/ate.ckpt");
  EXPECT_TRUE(std::filesystem::exists(result.checkpoint_path));
  EXPECT_TRUE(std::filesystem::exists(result.log_path));
  EXPECT_EQ(testsup::read_file(result.log_path), result.log);
  EXPECT_GE(result.epochs_run, 1);
  EXPECT_LE(result.epochs_run, config.max_epochs);
  EXPECT_GE(result.best_epoch, 1);
  EXPECT_GE(result.best_metric, 0.0);

  EXPECT_EQ(result.log.find("epoch 1 train_loss "), 0u);
  EXPECT_NE(result.log.find("dev_f1 "), std::string::npos);
  EXPECT_NE(result.log.find("best epoch "), std::string::npos);

  const TaskModel model = load_model(result.checkpoint_path);
  EXPECT_EQ(model.task, Task::ate);
  EXPECT_EQ(model.variant, Variant::PBF);

  TrainConfig again = config;
  again.out_dir = dir + "/b";
  EXPECT_EQ(train(again).log, result.log);

  TrainConfig reseeded = config;
  reseeded.out_dir = dir + "/c";
  reseeded.seed = 1;
  EXPECT_NE(train(reseeded).log, result.log);
}

TEST(Experiment, OneSeedLaysOutTheFullDirectory) {
  const std::string dir = testsup::make_temp_dir("exp");
  TrainConfig base = overfit_config(dir);
  base.test_path = testsup::fixture_path("overfit.jsonl");
  base.max_epochs = 1;
  base.patience = 1;
  base.batch_size = 8;

  EXPECT_THROW(run_experiment(base, {}), Error);
  {
    TrainConfig no_test = base;
    no_test.test_path.clear();
    EXPECT_THROW(run_experiment(no_test, {0}), Error);
  }

  const ExperimentResult result = run_experiment(base, {0});
  EXPECT_EQ(result.directory, dir + "/" + experiment_id(base));
  EXPECT_TRUE(std::filesystem::exists(result.directory + "/config.txt"));
  EXPECT_TRUE(std::filesystem::exists(result.directory + "/aggregate.txt"));
  EXPECT_TRUE(std::filesystem::exists(result.directory + "/aggregate.json"));
  const std::string seed_dir = result.directory + "/seed-0";
  for (const std::string name :
       {"ate.ckpt", "towe.ckpt", "aopsc.ckpt", "train-ate.log",
        "train-towe.log", "train-aopsc.log", "predictions.jsonl", "report.txt",
        "report.json"})
    EXPECT_TRUE(std::filesystem::exists(seed_dir + "/" + name)) << name;

  EXPECT_EQ(parse_config(testsup::read_file(result.directory + "/config.txt")),
            base);

  ASSERT_EQ(result.per_seed.size(), 1u);
  ASSERT_EQ(result.per_seed[0].size(), 5u);
  ASSERT_EQ(result.aggregate.size(), 5u);
  // A single-run aggregate is that run.
  for (std::size_t t = 0; t < 5; ++t)
    EXPECT_EQ(result.aggregate[t], result.per_seed[0][t]);

  const std::vector<SentencePrediction> preds =
      read_predictions(seed_dir + "/predictions.jsonl");
  EXPECT_EQ(preds.size(), 10u);
}
