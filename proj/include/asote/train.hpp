#ifndef ASOTE_TRAIN_HPP
#define ASOTE_TRAIN_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "asote/autodiff.hpp"
#include "asote/core.hpp"
#include "asote/corpus.hpp"
#include "asote/encoding.hpp"
#include "asote/evaluation.hpp"
#include "asote/nn.hpp"
#include "asote/pipeline.hpp"
#include "asote/tokenizer.hpp"

namespace asote {

/// Shortest decimal string that parses back to exactly the same double.
inline std::string render_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Everything one training run needs. Defaults are the reference recipe:
/// batch 32, learning rate 2e-5, dropout 0.5, patience 10.
struct TrainConfig {
  Task task = Task::ate;
  Variant variant = Variant::PBF;
  std::string train_path;
  std::string dev_path;
  std::string test_path;
  int batch_size = 32;
  double learning_rate = 2e-5;
  double dropout = 0.5;
  int patience = 10;
  int max_epochs = 100;
  std::uint64_t seed = 0;
  std::string encoder = "tiny";  // tiny | pretrained:<directory>
  int embed_dim = 24;
  int max_positions = 128;
  std::string early_stop_metric = "auto";
  std::string out_dir = "out";

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;

  EncoderConfig encoder_config() const {
    EncoderConfig c;
    if (encoder == "tiny") {
      c.kind = "tiny";
    } else if (encoder.rfind("pretrained:", 0) == 0) {
      c.kind = "pretrained";
      c.pretrained_path = encoder.substr(std::string("pretrained:").size());
    } else {
      throw config_error("encoder must be 'tiny' or 'pretrained:<dir>', got '" +
                         encoder + "'");
    }
    c.embed_dim = embed_dim;
    c.max_positions = max_positions;
    c.dropout = dropout;
    return c;
  }

  /// The dev metric this task stops on.
  std::string resolved_metric() const {
    const std::string task_metric = task == Task::aopsc ? "accuracy" : "f1";
    if (early_stop_metric == "auto" || early_stop_metric == task_metric)
      return task_metric;
    throw config_error("early_stop_metric '" + early_stop_metric +
                       "' is not available for task " + to_string(task));
  }

  void validate() const {
    if (train_path.empty()) throw config_error("data.train is required");
    if (dev_path.empty()) throw config_error("data.dev is required");
    if (batch_size < 1) throw config_error("batch_size must be at least 1");
    if (!(learning_rate > 0)) throw config_error("learning_rate must be positive");
    if (dropout < 0.0 || dropout >= 1.0)
      throw config_error("dropout must lie in [0, 1)");
    if (patience < 1) throw config_error("patience must be at least 1");
    if (max_epochs < 1) throw config_error("max_epochs must be at least 1");
    encoder_config().validate();
    resolved_metric();
  }
};

/// Flat `key = value` lines, one per field, sorted by key. parse and render
/// are exact inverses.
inline std::string render_config(const TrainConfig& c) {
  std::map<std::string, std::string> kv;
  kv["task"] = to_string(c.task);
  kv["variant"] = to_string(c.variant);
  kv["data.train"] = c.train_path;
  kv["data.dev"] = c.dev_path;
  kv["data.test"] = c.test_path;
  kv["batch_size"] = std::to_string(c.batch_size);
  kv["learning_rate"] = render_double(c.learning_rate);
  kv["dropout"] = render_double(c.dropout);
  kv["patience"] = std::to_string(c.patience);
  kv["max_epochs"] = std::to_string(c.max_epochs);
  kv["seed"] = std::to_string(c.seed);
  kv["encoder"] = c.encoder;
  kv["embed_dim"] = std::to_string(c.embed_dim);
  kv["max_positions"] = std::to_string(c.max_positions);
  kv["early_stop_metric"] = c.early_stop_metric;
  kv["out_dir"] = c.out_dir;
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline int parse_int(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const int out = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw config_error("'" + v + "' is not an integer (key " + key + ")");
  }
}

inline std::uint64_t parse_u64(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const unsigned long long out = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw config_error("'" + v + "' is not a non-negative integer (key " +
                       key + ")");
  }
}

inline double parse_real(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw config_error("'" + v + "' is not a number (key " + key + ")");
  }
}

}  // namespace detail

/// Accepts the render_config format plus blank lines and # comments. Every
/// key may appear at most once; unknown keys are an error.
inline TrainConfig parse_config(const std::string& text) {
  TrainConfig c;
  std::map<std::string, std::string> kv;
  std::size_t line_no = 0;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = detail::trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw config_error("config line " + std::to_string(line_no) +
                         " has no '='");
    const std::string key = detail::trim(stripped.substr(0, eq));
    const std::string value = detail::trim(stripped.substr(eq + 1));
    if (key.empty())
      throw config_error("config line " + std::to_string(line_no) +
                         " has an empty key");
    if (!kv.emplace(key, value).second)
      throw config_error("config key '" + key + "' appears twice");
  }
  for (const auto& [key, value] : kv) {
    if (key == "task") c.task = parse_task(value);
    else if (key == "variant") c.variant = parse_variant(value);
    else if (key == "data.train") c.train_path = value;
    else if (key == "data.dev") c.dev_path = value;
    else if (key == "data.test") c.test_path = value;
    else if (key == "batch_size") c.batch_size = detail::parse_int(value, key);
    else if (key == "learning_rate") c.learning_rate = detail::parse_real(value, key);
    else if (key == "dropout") c.dropout = detail::parse_real(value, key);
    else if (key == "patience") c.patience = detail::parse_int(value, key);
    else if (key == "max_epochs") c.max_epochs = detail::parse_int(value, key);
    else if (key == "seed") c.seed = detail::parse_u64(value, key);
    else if (key == "encoder") c.encoder = value;
    else if (key == "embed_dim") c.embed_dim = detail::parse_int(value, key);
    else if (key == "max_positions") c.max_positions = detail::parse_int(value, key);
    else if (key == "early_stop_metric") c.early_stop_metric = value;
    else if (key == "out_dir") c.out_dir = value;
    else throw config_error("unknown config key '" + key + "'");
  }
  return c;
}

inline TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

struct TrainResult {
  std::string checkpoint_path;
  std::string log_path;
  std::string log;
  double best_metric = 0.0;
  int best_epoch = 0;
  int epochs_run = 0;
};

namespace detail {

struct TrainExample {
  EncodedInput input;
  TagSequence word_tags;            // ate / towe
  std::vector<Span> opinions;       // aopsc
  std::vector<Sentiment> sentiments;  // aopsc
};

inline void shuffle_indices(std::vector<std::size_t>& v,
                            std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    auto j = static_cast<std::size_t>(uniform_unit(rng) *
                                      static_cast<double>(i));
    if (j >= i) j = i - 1;
    std::swap(v[i - 1], v[j]);
  }
}

inline std::vector<TrainExample> build_examples(const TaskModel& model,
                                                const DatasetSplit& split) {
  std::vector<TrainExample> out;
  switch (model.task) {
    case Task::ate:
      for (const AnnotatedSentence& s : split.sentences) {
        TrainExample ex;
        ex.input = model.encode_sentence(s.sentence);
        ex.word_tags = bio_encode(s.aspects, s.sentence.words.size());
        out.push_back(std::move(ex));
      }
      break;
    case Task::towe:
      // Aspects without opinions train too: their all-O target teaches the
      // model to stay silent on them.
      for (const ToweExample& t : derive_towe_examples(split, false)) {
        TrainExample ex;
        ex.input = model.encode_aspect(t.sentence, t.aspect);
        ex.word_tags = bio_encode(t.gold_opinions, t.sentence.words.size());
        out.push_back(std::move(ex));
      }
      break;
    case Task::aopsc:
      for (const AopscExample& a : derive_aopsc_examples(split)) {
        TrainExample ex;
        ex.input = model.encode_aspect(a.sentence, a.aspect);
        ex.opinions = a.opinions;
        ex.sentiments = a.gold_sentiments;
        out.push_back(std::move(ex));
      }
      break;
  }
  if (out.empty())
    throw data_error("no training examples for task " + to_string(model.task));
  return out;
}

inline double dev_metric(const TaskModel& model, const DatasetSplit& dev) {
  switch (model.task) {
    case Task::ate: {
      std::map<std::string, std::vector<Span>> pred;
      for (const AnnotatedSentence& s : dev.sentences)
        pred[s.sentence.id] = predict_spans(model, s.sentence, nullptr);
      return score_ate(ate_gold(dev), pred).f1;
    }
    case Task::towe: {
      std::map<AspectKey, std::vector<Span>> pred;
      for (const AnnotatedSentence& s : dev.sentences)
        for (const Span& aspect : s.aspects)
          pred[{s.sentence.id, aspect}] =
              predict_spans(model, s.sentence, &aspect);
      return score_towe(towe_gold(dev), pred).f1;
    }
    case Task::aopsc: {
      std::map<PairKey, Sentiment> pred;
      for (const AnnotatedSentence& s : dev.sentences) {
        std::map<Span, std::vector<Span>> pairs;
        for (const Triplet& t : s.triplets) pairs[t.aspect].push_back(t.opinion);
        for (const auto& [aspect, opinions] : pairs) {
          const std::vector<Sentiment> sentiments =
              predict_pair_sentiments(model, s.sentence, aspect, opinions);
          for (std::size_t i = 0; i < opinions.size(); ++i)
            pred[{s.sentence.id, aspect, opinions[i]}] = sentiments[i];
        }
      }
      const MetricReport r = score_aopsc(aopsc_gold(dev), pred);
      return r.accuracy.value_or(0.0);
    }
  }
  return 0.0;
}

}  // namespace detail

/// Builds the task's tokenizer: the corpus vocabulary for a tiny encoder, or
/// the exported vocabulary of a pretrained one.
inline WordPieceTokenizer make_tokenizer(const TrainConfig& config,
                                         const DatasetSplit& train,
                                         const DatasetSplit& dev) {
  const EncoderConfig enc = config.encoder_config();
  if (enc.kind == "pretrained") return load_pretrained_vocab(enc.pretrained_path);
  std::vector<std::vector<std::string>> sentences;
  for (const AnnotatedSentence& s : train.sentences)
    sentences.push_back(s.sentence.words);
  for (const AnnotatedSentence& s : dev.sentences)
    sentences.push_back(s.sentence.words);
  return WordPieceTokenizer(build_tiny_vocab(sentences));
}

/// One full training run with early stopping: Adam over shuffled minibatches
/// (batch loss is the mean over its examples), dev metric after every epoch,
/// stop after `patience` epochs without strict improvement. The checkpoint on
/// disk always holds the best-dev parameters.
inline TrainResult train(const TrainConfig& config) {
  config.validate();
  std::filesystem::create_directories(config.out_dir);

  const DatasetSplit train_split = load_split(config.train_path);
  const DatasetSplit dev_split = load_split(config.dev_path);

  TaskModel model =
      init_task_model(config.task, config.variant,
                      make_tokenizer(config, train_split, dev_split),
                      config.encoder_config(), config.seed);
  if (model.config.kind == "pretrained")
    load_pretrained_encoder(model, model.config.pretrained_path);

  const std::vector<detail::TrainExample> examples =
      detail::build_examples(model, train_split);
  const std::string metric_name = config.resolved_metric();

  TrainResult result;
  result.checkpoint_path =
      config.out_dir + "/" + to_string(config.task) + ".ckpt";
  result.log_path =
      config.out_dir + "/train-" + to_string(config.task) + ".log";
  result.best_metric = -1.0;

  std::mt19937_64 rng(config.seed + 1);
  AdamOptimizer optimizer(config.learning_rate);
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  char line[160];
  int bad_streak = 0;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    detail::shuffle_indices(order, rng);
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(),
                   begin + static_cast<std::size_t>(config.batch_size));
      Tape tape;
      std::vector<Var> losses;
      losses.reserve(end - begin);
      for (std::size_t k = begin; k < end; ++k) {
        const detail::TrainExample& ex = examples[order[k]];
        losses.push_back(
            model.task == Task::aopsc
                ? model_aopsc_loss(tape, model, ex.input, ex.opinions,
                                   ex.sentiments, true, rng)
                : model_tagging_loss(tape, model, ex.input, ex.word_tags,
                                     true, rng));
        epoch_loss += tape.value(losses.back())(0, 0);
      }
      Var batch_loss = tape.scale(tape.add_all(losses),
                                  1.0 / static_cast<double>(end - begin));
      const double loss_value = tape.value(batch_loss)(0, 0);
      if (!std::isfinite(loss_value))
        throw train_error("non-finite loss at epoch " + std::to_string(epoch) +
                          ", batch starting at example " +
                          std::to_string(begin));
      model.params.zero_grads();
      tape.backward(batch_loss);
      optimizer.step(model.params);
    }
    epoch_loss /= static_cast<double>(examples.size());

    const double metric = detail::dev_metric(model, dev_split);
    const bool improved = metric > result.best_metric;
    if (improved) {
      result.best_metric = metric;
      result.best_epoch = epoch;
      save_model(model, result.checkpoint_path);
      bad_streak = 0;
    } else {
      ++bad_streak;
    }
    std::snprintf(line, sizeof line, "epoch %d train_loss %.6f dev_%s %.6f%s\n",
                  epoch, epoch_loss, metric_name.c_str(), metric,
                  improved ? " *" : "");
    result.log += line;
    result.epochs_run = epoch;
    if (bad_streak >= config.patience) break;
  }
  std::snprintf(line, sizeof line, "best epoch %d dev_%s %.6f\n",
                result.best_epoch, metric_name.c_str(), result.best_metric);
  result.log += line;

  std::ofstream log_out(result.log_path);
  if (!log_out) throw io_error("cannot write log '" + result.log_path + "'");
  log_out << result.log;
  return result;
}

struct ExperimentResult {
  std::string directory;
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<MetricReport>> per_seed;
  std::vector<MetricReport> aggregate;
};

/// Stable experiment identity: the rendered config with the per-run fields
/// (seed, out_dir) blanked, hashed.
inline std::string experiment_id(const TrainConfig& config) {
  TrainConfig c = config;
  c.seed = 0;
  c.out_dir = "";
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(render_config(c))));
  return std::string("exp-") + buf;
}

/// The 5-seed protocol (or any seed list): per seed, train the three models,
/// run the pipeline on the test split, score all five tasks; then average
/// the per-seed reports metric-wise.
inline ExperimentResult run_experiment(const TrainConfig& base,
                                       const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw config_error("run_experiment needs at least one seed");
  if (base.test_path.empty())
    throw config_error("data.test is required to run an experiment");

  ExperimentResult result;
  result.seeds = seeds;
  result.directory = base.out_dir + "/" + experiment_id(base);
  std::filesystem::create_directories(result.directory);
  {
    std::ofstream cfg(result.directory + "/config.txt");
    if (!cfg)
      throw io_error("cannot write '" + result.directory + "/config.txt'");
    cfg << render_config(base);
  }
  const DatasetSplit test_split = load_split(base.test_path);

  for (const std::uint64_t seed : seeds) {
    const std::string seed_dir =
        result.directory + "/seed-" + std::to_string(seed);
    std::filesystem::create_directories(seed_dir);
    std::map<Task, std::string> checkpoints;
    for (const Task task : {Task::ate, Task::towe, Task::aopsc}) {
      TrainConfig c = base;
      c.task = task;
      c.seed = seed;
      c.out_dir = seed_dir;
      checkpoints[task] = train(c).checkpoint_path;
    }
    const PipelineBundle bundle =
        load_bundle(checkpoints.at(Task::ate), checkpoints.at(Task::towe),
                    checkpoints.at(Task::aopsc));
    const std::vector<SentencePrediction> preds =
        predict_split(test_split, bundle);
    write_predictions(preds, seed_dir + "/predictions.jsonl");
    const std::vector<MetricReport> reports =
        score_predictions(test_split, preds);
    {
      std::ofstream rep(seed_dir + "/report.txt");
      rep << render_report_table(reports);
      std::ofstream repj(seed_dir + "/report.json");
      repj << reports_to_json(reports).dump(2) << "\n";
    }
    result.per_seed.push_back(reports);
  }

  const std::size_t n_tasks = result.per_seed.front().size();
  for (std::size_t t = 0; t < n_tasks; ++t) {
    std::vector<MetricReport> runs;
    runs.reserve(seeds.size());
    for (const auto& reports : result.per_seed) runs.push_back(reports[t]);
    result.aggregate.push_back(aggregate_runs(runs));
  }
  {
    std::ofstream rep(result.directory + "/aggregate.txt");
    rep << render_report_table(result.aggregate);
    std::ofstream repj(result.directory + "/aggregate.json");
    repj << reports_to_json(result.aggregate).dump(2) << "\n";
  }
  return result;
}

}  // namespace asote

#endif  // ASOTE_TRAIN_HPP
