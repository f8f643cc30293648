// Command-line surface over the asote library: training, pipeline
// prediction, scoring, dataset statistics and dataset assembly.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "asote/core.hpp"
#include "asote/corpus.hpp"
#include "asote/evaluation.hpp"
#include "asote/pipeline.hpp"
#include "asote/train.hpp"

namespace {

// Relative paths may live under the directory named by ASOTE_HOME; absolute
// paths and paths that resolve as-is win.
std::string resolve_under_home(const std::string& path) {
  namespace fs = std::filesystem;
  if (path.empty() || fs::path(path).is_absolute() || fs::exists(path))
    return path;
  const char* home = std::getenv("ASOTE_HOME");
  if (home == nullptr || *home == '\0') return path;
  const fs::path joined = fs::path(home) / path;
  return joined.string();
}

int exit_code_for(const std::string& category) {
  static const std::map<std::string, int> codes = {
      {"validation-error", 2}, {"data-error", 3}, {"config-error", 4},
      {"io-error", 5},         {"train-error", 6},
  };
  auto it = codes.find(category);
  return it == codes.end() ? 1 : it->second;
}

struct ConfigCli {
  std::string config_file;
  asote::TrainConfig config;

  // Flags write into these; only flags the user passed are copied in.
  std::string task, variant, train_path, dev_path, test_path, encoder,
      early_stop_metric, out_dir;
  int batch_size = 0, patience = 0, max_epochs = 0, embed_dim = 0,
      max_positions = 0;
  double learning_rate = 0, dropout = 0;
  std::uint64_t seed = 0;

  void add_options(CLI::App& cmd) {
    cmd.add_option("--config", config_file,
                   "config file (flat key = value lines)");
    cmd.add_option("--task", task, "ate | towe | aopsc");
    cmd.add_option("--variant", variant,
                   "PBF | NO_A | NO_P | NO_AP | M1 | M2 | M3");
    cmd.add_option("--train", train_path, "training split (ASOTE-JSON lines)");
    cmd.add_option("--dev", dev_path, "development split");
    cmd.add_option("--test", test_path, "test split");
    cmd.add_option("--batch-size", batch_size, "examples per optimizer step");
    cmd.add_option("--learning-rate", learning_rate, "Adam learning rate");
    cmd.add_option("--dropout", dropout, "dropout probability in [0,1)");
    cmd.add_option("--patience", patience,
                   "epochs without dev improvement before stopping");
    cmd.add_option("--max-epochs", max_epochs, "hard epoch cap");
    cmd.add_option("--seed", seed, "random seed");
    cmd.add_option("--encoder", encoder, "tiny | pretrained:<dir>");
    cmd.add_option("--embed-dim", embed_dim, "encoder width (even)");
    cmd.add_option("--max-positions", max_positions, "token budget");
    cmd.add_option("--early-stop-metric", early_stop_metric,
                   "auto | f1 | accuracy");
    cmd.add_option("--out-dir", out_dir, "output directory");
  }

  asote::TrainConfig resolve(const CLI::App& cmd) {
    asote::TrainConfig c;
    if (cmd.count("--config"))
      c = asote::load_config(resolve_under_home(config_file));
    if (cmd.count("--task")) c.task = asote::parse_task(task);
    if (cmd.count("--variant")) c.variant = asote::parse_variant(variant);
    if (cmd.count("--train")) c.train_path = train_path;
    if (cmd.count("--dev")) c.dev_path = dev_path;
    if (cmd.count("--test")) c.test_path = test_path;
    if (cmd.count("--batch-size")) c.batch_size = batch_size;
    if (cmd.count("--learning-rate")) c.learning_rate = learning_rate;
    if (cmd.count("--dropout")) c.dropout = dropout;
    if (cmd.count("--patience")) c.patience = patience;
    if (cmd.count("--max-epochs")) c.max_epochs = max_epochs;
    if (cmd.count("--seed")) c.seed = seed;
    if (cmd.count("--encoder")) c.encoder = encoder;
    if (cmd.count("--embed-dim")) c.embed_dim = embed_dim;
    if (cmd.count("--max-positions")) c.max_positions = max_positions;
    if (cmd.count("--early-stop-metric")) c.early_stop_metric = early_stop_metric;
    if (cmd.count("--out-dir")) c.out_dir = out_dir;
    c.train_path = resolve_under_home(c.train_path);
    c.dev_path = resolve_under_home(c.dev_path);
    c.test_path = resolve_under_home(c.test_path);
    c.out_dir = resolve_under_home(c.out_dir);
    return c;
  }
};

void report_load(const std::string& path, const asote::LoadReport& report) {
  if (report.conflict_triplets > 0)
    std::cerr << "# " << path << ": " << report.conflict_triplets
              << " conflict-sentiment triplet(s) set aside\n";
  if (report.duplicate_triplets_removed > 0)
    std::cerr << "# " << path << ": " << report.duplicate_triplets_removed
              << " duplicate triplet(s) removed\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"aspect-sentiment-opinion triplet extraction toolkit"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "train one task model");
  ConfigCli train_cli;
  train_cli.add_options(*train_cmd);

  // predict
  auto* predict_cmd =
      app.add_subcommand("predict", "run the three-model pipeline");
  std::string ate_ckpt, towe_ckpt, aopsc_ckpt, data_path, pred_out;
  std::string expect_towe_variant, expect_aopsc_variant;
  predict_cmd->add_option("--ate", ate_ckpt, "ate checkpoint")->required();
  predict_cmd->add_option("--towe", towe_ckpt, "towe checkpoint")->required();
  predict_cmd->add_option("--aopsc", aopsc_ckpt, "aopsc checkpoint")
      ->required();
  predict_cmd->add_option("--data", data_path, "dataset to predict on")
      ->required();
  predict_cmd->add_option("--out", pred_out, "prediction file to write")
      ->required();
  predict_cmd->add_option("--towe-variant", expect_towe_variant,
                          "require the towe checkpoint to use this variant");
  predict_cmd->add_option("--aopsc-variant", expect_aopsc_variant,
                          "require the aopsc checkpoint to use this variant");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "score a prediction file");
  std::string gold_path, pred_path;
  bool eval_json = false;
  eval_cmd->add_option("--gold", gold_path, "gold dataset")->required();
  eval_cmd->add_option("--pred", pred_path, "prediction file")->required();
  eval_cmd->add_flag("--json", eval_json, "print JSON instead of a table");

  // stats
  auto* stats_cmd =
      app.add_subcommand("stats", "dataset statistics, one row per file");
  std::vector<std::string> stats_paths;
  stats_cmd->add_option("files", stats_paths, "dataset files")->required();

  // assemble
  auto* assemble_cmd = app.add_subcommand(
      "assemble", "merge aspect, opinion and pair-sentiment files");
  std::string aspects_path, opinions_path, pairs_path, assemble_out;
  assemble_cmd->add_option("--aspects", aspects_path, "sentences with aspects")
      ->required();
  assemble_cmd->add_option("--opinions", opinions_path,
                           "opinions per (sentence, aspect)")
      ->required();
  assemble_cmd
      ->add_option("--pairs", pairs_path, "sentiment per (aspect, opinion)")
      ->required();
  assemble_cmd->add_option("--out", assemble_out, "assembled dataset")
      ->required();

  // run-experiment
  auto* exp_cmd = app.add_subcommand(
      "run-experiment", "multi-seed training, prediction and scoring");
  ConfigCli exp_cli;
  exp_cli.add_options(*exp_cmd);
  std::vector<std::uint64_t> seeds;
  exp_cmd->add_option("--seeds", seeds,
                      "seeds to run (default 0 1 2 3 4)");

  try {
    app.parse(argc, argv);

    if (train_cmd->parsed()) {
      const asote::TrainConfig config = train_cli.resolve(*train_cmd);
      const asote::TrainResult result = asote::train(config);
      std::cout << result.log;
      std::cout << "checkpoint " << result.checkpoint_path << "\n";
      return 0;
    }

    if (predict_cmd->parsed()) {
      const asote::PipelineBundle bundle = asote::load_bundle(
          resolve_under_home(ate_ckpt), resolve_under_home(towe_ckpt),
          resolve_under_home(aopsc_ckpt));
      if (!expect_towe_variant.empty() &&
          asote::parse_variant(expect_towe_variant) != bundle.towe.variant)
        throw asote::config_error(
            "towe checkpoint was trained with variant " +
            asote::to_string(bundle.towe.variant) + ", not " +
            expect_towe_variant);
      if (!expect_aopsc_variant.empty() &&
          asote::parse_variant(expect_aopsc_variant) != bundle.aopsc.variant)
        throw asote::config_error(
            "aopsc checkpoint was trained with variant " +
            asote::to_string(bundle.aopsc.variant) + ", not " +
            expect_aopsc_variant);
      asote::LoadReport report;
      const asote::DatasetSplit split =
          asote::load_split(resolve_under_home(data_path), &report);
      report_load(data_path, report);
      const auto preds = asote::predict_split(split, bundle);
      asote::write_predictions(preds, pred_out);
      std::cout << "wrote " << preds.size() << " prediction(s) to " << pred_out
                << "\n";
      return 0;
    }

    if (eval_cmd->parsed()) {
      asote::LoadReport report;
      const asote::DatasetSplit gold =
          asote::load_split(resolve_under_home(gold_path), &report);
      report_load(gold_path, report);
      const auto preds =
          asote::read_predictions(resolve_under_home(pred_path));
      const auto reports = asote::score_predictions(gold, preds);
      if (eval_json)
        std::cout << asote::reports_to_json(reports).dump(2) << "\n";
      else
        std::cout << asote::render_report_table(reports);
      return 0;
    }

    if (stats_cmd->parsed()) {
      std::vector<std::pair<std::string, asote::StatsTable>> rows;
      for (const std::string& path : stats_paths) {
        asote::LoadReport report;
        const asote::DatasetSplit split =
            asote::load_split(resolve_under_home(path), &report);
        report_load(path, report);
        rows.emplace_back(path, asote::compute_statistics(split));
      }
      std::cout << asote::render_stats_table(rows);
      return 0;
    }

    if (assemble_cmd->parsed()) {
      asote::LoadReport report;
      const asote::DatasetSplit split = asote::assemble_asote(
          resolve_under_home(aspects_path), resolve_under_home(opinions_path),
          resolve_under_home(pairs_path), &report);
      report_load(assemble_out, report);
      asote::write_split(split, assemble_out);
      long long triplets = 0;
      for (const auto& s : split.sentences)
        triplets += static_cast<long long>(s.triplets.size());
      std::cout << "wrote " << split.sentences.size() << " sentence(s), "
                << triplets << " triplet(s) to " << assemble_out << "\n";
      return 0;
    }

    if (exp_cmd->parsed()) {
      const asote::TrainConfig config = exp_cli.resolve(*exp_cmd);
      if (seeds.empty()) seeds = {0, 1, 2, 3, 4};
      const asote::ExperimentResult result =
          asote::run_experiment(config, seeds);
      for (std::size_t i = 0; i < result.seeds.size(); ++i) {
        std::cout << "seed " << result.seeds[i] << "\n"
                  << asote::render_report_table(result.per_seed[i]) << "\n";
      }
      std::cout << "aggregate over " << result.seeds.size() << " seed(s)\n"
                << asote::render_report_table(result.aggregate);
      std::cout << "experiment directory " << result.directory << "\n";
      return 0;
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const asote::Error& e) {
    std::cerr << e.what() << "\n";
    return exit_code_for(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
