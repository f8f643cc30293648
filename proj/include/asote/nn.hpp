#ifndef ASOTE_NN_HPP
#define ASOTE_NN_HPP

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "asote/autodiff.hpp"
#include "asote/core.hpp"
#include "asote/encoding.hpp"
#include "asote/tokenizer.hpp"

namespace asote {

enum class Task { ate, towe, aopsc };

inline std::string to_string(Task t) {
  switch (t) {
    case Task::ate: return "ate";
    case Task::towe: return "towe";
    case Task::aopsc: return "aopsc";
  }
  return "?";
}

inline Task parse_task(const std::string& raw) {
  const std::string s = ascii_lower(raw);
  if (s == "ate") return Task::ate;
  if (s == "towe") return Task::towe;
  if (s == "aopsc") return Task::aopsc;
  throw config_error("unknown task '" + raw +
                     "' (expected ate, towe or aopsc)");
}

/// Width, depth and regularization of the encoder. "tiny" trains from random
/// init; "pretrained" starts from weights stored in `pretrained_path` (same
/// architecture, exported by this library). Both expose the same interface.
struct EncoderConfig {
  std::string kind = "tiny";
  std::string pretrained_path;
  int embed_dim = 24;
  int max_positions = 128;
  double dropout = 0.5;

  void validate() const {
    if (kind != "tiny" && kind != "pretrained")
      throw config_error("encoder kind must be tiny or pretrained, got '" +
                         kind + "'");
    if (kind == "pretrained" && pretrained_path.empty())
      throw config_error("pretrained encoder needs a path");
    if (embed_dim < 2 || embed_dim % 2 != 0)
      throw config_error("embed_dim must be an even number >= 2");
    if (max_positions < 4)
      throw config_error("max_positions must be at least 4");
    if (dropout < 0.0 || dropout >= 1.0)
      throw config_error("dropout must lie in [0, 1)");
  }
};

struct TaggingHead {
  Parameter* W = nullptr;  // hidden x 3
  Parameter* b = nullptr;  // 1 x 3
};

struct SentimentHead {
  Parameter* W = nullptr;  // hidden x 3
  Parameter* b = nullptr;  // 1 x 3
};

namespace detail {

struct LstmDirection {
  Parameter* W = nullptr;  // input x 4h
  Parameter* U = nullptr;  // h x 4h
  Parameter* b = nullptr;  // 1 x 4h
  int hidden = 0;

  static LstmDirection create(ParameterSet& params, const std::string& name,
                              int input_dim, int hidden,
                              std::mt19937_64& rng) {
    LstmDirection d;
    d.hidden = hidden;
    d.W = params.create(name + ".W", input_dim, 4 * hidden, rng);
    d.U = params.create(name + ".U", hidden, 4 * hidden, rng);
    d.b = params.create_zero(name + ".b", 1, 4 * hidden);
    return d;
  }

  static LstmDirection locate(const ParameterSet& params,
                              const std::string& name, int hidden) {
    LstmDirection d;
    d.hidden = hidden;
    d.W = params.find(name + ".W");
    d.U = params.find(name + ".U");
    d.b = params.find(name + ".b");
    return d;
  }

  /// One pass over the rows of `inputs`; returns one hidden row per input
  /// row, in input order regardless of scan direction.
  Var run(Tape& tape, Var inputs, bool reverse) const {
    const int n = static_cast<int>(tape.value(inputs).rows());
    Var w = tape.parameter(W), u = tape.parameter(U), bias = tape.parameter(b);
    Var h = tape.constant(Eigen::MatrixXd::Zero(1, hidden));
    Var c = tape.constant(Eigen::MatrixXd::Zero(1, hidden));
    std::vector<Var> states(static_cast<std::size_t>(n));
    for (int step = 0; step < n; ++step) {
      const int t = reverse ? n - 1 - step : step;
      Var z = tape.add(
          tape.add(tape.matmul(tape.row(inputs, t), w), tape.matmul(h, u)),
          bias);
      Var in_gate = tape.sigmoid(tape.cols(z, 0, hidden));
      Var forget = tape.sigmoid(tape.cols(z, hidden, hidden));
      Var cell_in = tape.tanh_(tape.cols(z, 2 * hidden, hidden));
      Var out_gate = tape.sigmoid(tape.cols(z, 3 * hidden, hidden));
      c = tape.add(tape.cwise_mul(forget, c), tape.cwise_mul(in_gate, cell_in));
      h = tape.cwise_mul(out_gate, tape.tanh_(c));
      states[static_cast<std::size_t>(t)] = h;
    }
    return tape.stack_rows(states);
  }
};

struct BiLstm {
  LstmDirection fwd, bwd;

  static BiLstm create(ParameterSet& params, const std::string& name,
                       int input_dim, int hidden_per_dir,
                       std::mt19937_64& rng) {
    return {LstmDirection::create(params, name + ".fwd", input_dim,
                                  hidden_per_dir, rng),
            LstmDirection::create(params, name + ".bwd", input_dim,
                                  hidden_per_dir, rng)};
  }

  static BiLstm locate(const ParameterSet& params, const std::string& name,
                       int hidden_per_dir) {
    return {LstmDirection::locate(params, name + ".fwd", hidden_per_dir),
            LstmDirection::locate(params, name + ".bwd", hidden_per_dir)};
  }

  Var run(Tape& tape, Var inputs) const {
    return tape.concat_cols(fwd.run(tape, inputs, false),
                            bwd.run(tape, inputs, true));
  }
};

}  // namespace detail

/// Token + position + segment embeddings feeding two stacked bidirectional
/// recurrent layers. Output width equals embed_dim (each direction carries
/// half). Dropout follows each recurrent layer and only fires in training.
class EncoderStack {
 public:
  static EncoderStack create(ParameterSet& params, const EncoderConfig& config,
                             int vocab_size, std::mt19937_64& rng) {
    config.validate();
    EncoderStack s;
    s.config_ = config;
    const int d = config.embed_dim;
    s.tok_ = params.create("encoder.tok", vocab_size, d, rng);
    s.pos_ = params.create("encoder.pos", config.max_positions, d, rng);
    s.seg_ = params.create("encoder.seg", 2, d, rng);
    s.context_ = detail::BiLstm::create(params, "encoder.ctx", d, d / 2, rng);
    s.recurrent_ = detail::BiLstm::create(params, "encoder.rec", d, d / 2, rng);
    return s;
  }

  static EncoderStack locate(const ParameterSet& params,
                             const EncoderConfig& config) {
    config.validate();
    EncoderStack s;
    s.config_ = config;
    s.tok_ = params.find("encoder.tok");
    s.pos_ = params.find("encoder.pos");
    s.seg_ = params.find("encoder.seg");
    s.context_ = detail::BiLstm::locate(params, "encoder.ctx",
                                        config.embed_dim / 2);
    s.recurrent_ = detail::BiLstm::locate(params, "encoder.rec",
                                          config.embed_dim / 2);
    return s;
  }

  int hidden_size() const { return config_.embed_dim; }
  const EncoderConfig& config() const { return config_; }

  Var encode(Tape& tape, const EncodedInput& input, bool training,
             std::mt19937_64& rng) const {
    if (input.tokens.empty()) throw validation_error("empty encoded input");
    Var tok = tape.rows(tape.parameter(tok_), input.token_ids);
    Var pos = tape.rows(tape.parameter(pos_), input.position_indices);
    Var seg = tape.rows(tape.parameter(seg_), input.segment_indices);
    Var h = tape.add(tape.add(tok, pos), seg);
    h = context_.run(tape, h);
    h = tape.dropout(h, config_.dropout, rng, training);
    h = recurrent_.run(tape, h);
    h = tape.dropout(h, config_.dropout, rng, training);
    return h;
  }

 private:
  EncoderConfig config_;
  Parameter* tok_ = nullptr;
  Parameter* pos_ = nullptr;
  Parameter* seg_ = nullptr;
  detail::BiLstm context_, recurrent_;
};

inline Eigen::RowVectorXd softmax_row(const Eigen::RowVectorXd& logits) {
  const double m = logits.maxCoeff();
  Eigen::RowVectorXd p = (logits.array() - m).exp();
  return p / p.sum();
}

/// First index of the row maximum; ties resolve to the lowest class index.
inline int first_argmax(const Eigen::RowVectorXd& row) {
  int best = 0;
  for (int i = 1; i < row.size(); ++i)
    if (row(i) > row(best)) best = i;
  return best;
}

/// Row-wise softmax of H W + b: one distribution over {B, I, O} per token.
inline Eigen::MatrixXd tag_distributions(const Eigen::MatrixXd& H,
                                         const TaggingHead& head) {
  if (H.cols() != head.W->value.rows())
    throw validation_error("hidden width does not match the tagging head");
  Eigen::MatrixXd logits =
      (H * head.W->value).rowwise() + head.b->value.row(0);
  for (Eigen::Index i = 0; i < logits.rows(); ++i)
    logits.row(i) = softmax_row(logits.row(i));
  return logits;
}

/// Summed negative log-likelihood of the gold tags over the active positions.
inline double tagging_loss(const Eigen::MatrixXd& distributions,
                           const std::vector<int>& gold,
                           const std::vector<char>& mask) {
  if (static_cast<Eigen::Index>(gold.size()) != distributions.rows() ||
      gold.size() != mask.size())
    throw validation_error("tagging loss targets do not match distributions");
  double loss = 0.0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (!mask[i]) continue;
    if (gold[i] < 0 || gold[i] >= distributions.cols())
      throw data_error("gold tag " + std::to_string(gold[i]) +
                       " outside the tag set");
    loss -= std::log(distributions(static_cast<Eigen::Index>(i), gold[i]));
  }
  return loss;
}

/// Mean of the selected hidden rows. The positions form a set: they are
/// sorted and deduplicated, so any ordering of the same set gives the same
/// vector bit for bit.
inline Eigen::RowVectorXd opinion_representation(const Eigen::MatrixXd& H,
                                                 std::vector<int> positions) {
  if (positions.empty())
    throw validation_error("opinion has no token positions");
  std::sort(positions.begin(), positions.end());
  positions.erase(std::unique(positions.begin(), positions.end()),
                  positions.end());
  Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(H.cols());
  for (int p : positions) {
    if (p < 0 || p >= H.rows())
      throw validation_error("opinion token position outside the sequence");
    sum += H.row(p);
  }
  return sum / static_cast<double>(positions.size());
}

inline Eigen::RowVectorXd sentiment_distribution(
    const Eigen::RowVectorXd& rep, const SentimentHead& head) {
  if (rep.size() != head.W->value.rows())
    throw validation_error("hidden width does not match the sentiment head");
  Eigen::RowVectorXd logits = rep * head.W->value + head.b->value.row(0);
  return softmax_row(logits);
}

/// Sum of the opinions' cross-entropies for one aspect.
inline double aopsc_loss(const std::vector<Eigen::RowVectorXd>& distributions,
                         const std::vector<Sentiment>& gold) {
  if (distributions.empty())
    throw validation_error("sentiment loss needs at least one opinion");
  if (distributions.size() != gold.size())
    throw validation_error("sentiment loss lists are misaligned");
  double loss = 0.0;
  for (std::size_t i = 0; i < gold.size(); ++i)
    loss -= std::log(distributions[i](static_cast<int>(gold[i])));
  return loss;
}

/// Token positions backing an opinion span, via the alignment map. Words
/// without their own tokens contribute nothing.
inline std::vector<int> opinion_token_positions(const EncodedInput& input,
                                                const Span& opinion) {
  validate_span(opinion, input.n_words(), "opinion");
  std::vector<int> positions;
  for (int w = opinion.start; w <= opinion.end; ++w) {
    if (!input.word_surviving[static_cast<std::size_t>(w)]) continue;
    const auto& t = input.alignment[static_cast<std::size_t>(w)];
    positions.insert(positions.end(), t.begin(), t.end());
  }
  std::sort(positions.begin(), positions.end());
  positions.erase(std::unique(positions.begin(), positions.end()),
                  positions.end());
  return positions;
}

/// One trained (or training) model: tokenizer, encoder and a task head over
/// its own parameter set. Models never share parameters.
struct TaskModel {
  Task task = Task::ate;
  Variant variant = Variant::NO_AP;
  WordPieceTokenizer tokenizer{std::vector<std::string>{
      WordPieceTokenizer::kPad, WordPieceTokenizer::kUnk,
      WordPieceTokenizer::kCls, WordPieceTokenizer::kSep}};
  EncoderConfig config;
  ParameterSet params;
  EncoderStack stack;
  TaggingHead tag_head;
  SentimentHead sentiment_head;

  EncodedInput encode_sentence(const Sentence& sentence) const {
    if (task != Task::ate)
      throw validation_error("aspect-conditioned model needs an aspect");
    return build_ate_input(sentence, tokenizer, config.max_positions);
  }

  EncodedInput encode_aspect(const Sentence& sentence,
                             const Span& aspect) const {
    return build_aspect_input(sentence, aspect, variant, tokenizer,
                              config.max_positions);
  }
};

inline TaskModel init_task_model(Task task, Variant variant,
                                 WordPieceTokenizer tokenizer,
                                 const EncoderConfig& config,
                                 std::uint64_t seed) {
  config.validate();
  TaskModel m;
  m.task = task;
  m.variant = variant;
  m.tokenizer = std::move(tokenizer);
  m.config = config;
  std::mt19937_64 rng(seed);
  m.stack = EncoderStack::create(m.params, config, m.tokenizer.size(), rng);
  if (task == Task::aopsc) {
    m.sentiment_head.W =
        m.params.create("head.W", config.embed_dim, 3, rng);
    m.sentiment_head.b = m.params.create_zero("head.b", 1, 3);
  } else {
    m.tag_head.W = m.params.create("head.W", config.embed_dim, 3, rng);
    m.tag_head.b = m.params.create_zero("head.b", 1, 3);
  }
  return m;
}

/// Tape loss for ATE/TOWE on one encoded input: cross-entropy at each
/// loss-active token of the projected gold tags.
inline Var model_tagging_loss(Tape& tape, const TaskModel& model,
                              const EncodedInput& input,
                              const TagSequence& word_tags, bool training,
                              std::mt19937_64& rng) {
  const SubwordTags targets = project_tags_to_subwords(word_tags, input);
  Var h = model.stack.encode(tape, input, training, rng);
  Var logits = tape.add_rowvec(tape.matmul(h, tape.parameter(model.tag_head.W)),
                               tape.parameter(model.tag_head.b));
  return tape.softmax_ce(logits, targets.tags, targets.active);
}

/// Tape loss for AOPSC on one encoded input: one encoder pass, then the sum
/// of the opinions' cross-entropies.
inline Var model_aopsc_loss(Tape& tape, const TaskModel& model,
                            const EncodedInput& input,
                            const std::vector<Span>& opinions,
                            const std::vector<Sentiment>& gold, bool training,
                            std::mt19937_64& rng) {
  if (opinions.empty())
    throw validation_error("sentiment loss needs at least one opinion");
  if (opinions.size() != gold.size())
    throw validation_error("sentiment loss lists are misaligned");
  Var h = model.stack.encode(tape, input, training, rng);
  std::vector<Var> reps;
  reps.reserve(opinions.size());
  for (const Span& opinion : opinions) {
    std::vector<int> positions = opinion_token_positions(input, opinion);
    if (positions.empty())
      throw data_error("opinion (" + std::to_string(opinion.start) + "," +
                       std::to_string(opinion.end) +
                       ") has no tokens in the encoded input");
    reps.push_back(tape.mean_rows(tape.rows(h, positions)));
  }
  Var stacked = tape.stack_rows(reps);
  Var logits =
      tape.add_rowvec(tape.matmul(stacked, tape.parameter(model.sentiment_head.W)),
                      tape.parameter(model.sentiment_head.b));
  std::vector<int> gold_ids(gold.size());
  for (std::size_t i = 0; i < gold.size(); ++i)
    gold_ids[i] = static_cast<int>(gold[i]);
  return tape.softmax_ce(logits, gold_ids, std::vector<char>(gold.size(), 1));
}

/// Hidden states with dropout off; deterministic for fixed parameters.
inline Eigen::MatrixXd model_encode_frozen(const TaskModel& model,
                                           const EncodedInput& input) {
  Tape tape;
  std::mt19937_64 rng(0);
  return tape.value(model.stack.encode(tape, input, false, rng));
}

/// Per-word tags read off the frozen model's argmax at first subwords.
inline TagSequence predict_word_tags(const TaskModel& model,
                                     const EncodedInput& input) {
  const Eigen::MatrixXd h = model_encode_frozen(model, input);
  const Eigen::MatrixXd dists = tag_distributions(h, model.tag_head);
  std::vector<int> token_tags(static_cast<std::size_t>(dists.rows()));
  for (Eigen::Index i = 0; i < dists.rows(); ++i)
    token_tags[static_cast<std::size_t>(i)] = first_argmax(dists.row(i));
  return read_word_tags(token_tags, input);
}

inline std::vector<Span> predict_spans(const TaskModel& model,
                                       const Sentence& sentence,
                                       const Span* aspect) {
  const EncodedInput input = aspect == nullptr
                                 ? model.encode_sentence(sentence)
                                 : model.encode_aspect(sentence, *aspect);
  std::vector<Span> spans = bio_decode(predict_word_tags(model, input));
  for (Span& s : spans) s.surface = join_words(sentence.words, s.start, s.end);
  return spans;
}

/// One encoder pass classifying every opinion of one aspect. Argmax ties
/// resolve to the earliest class in (positive, neutral, negative).
inline std::vector<Sentiment> predict_pair_sentiments(
    const TaskModel& model, const Sentence& sentence, const Span& aspect,
    const std::vector<Span>& opinions) {
  if (model.task != Task::aopsc)
    throw validation_error("pair sentiment prediction needs an aopsc model");
  if (opinions.empty())
    throw validation_error("pair sentiment prediction needs opinions");
  const EncodedInput input = model.encode_aspect(sentence, aspect);
  const Eigen::MatrixXd h = model_encode_frozen(model, input);
  std::vector<Sentiment> out;
  out.reserve(opinions.size());
  for (const Span& opinion : opinions) {
    const Eigen::RowVectorXd rep =
        opinion_representation(h, opinion_token_positions(input, opinion));
    const Eigen::RowVectorXd dist =
        sentiment_distribution(rep, model.sentiment_head);
    out.push_back(static_cast<Sentiment>(first_argmax(dist)));
  }
  return out;
}

// --- checkpoint container ---------------------------------------------------

namespace detail {

constexpr char kCheckpointMagic[4] = {'A', 'S', 'O', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

inline void write_u32(std::ostream& out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.write(buf, 4);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.write(buf, 8);
}

inline std::uint32_t read_u32(std::istream& in) {
  char buf[4];
  if (!in.read(buf, 4)) throw io_error("checkpoint truncated");
  std::uint32_t v;
  std::memcpy(&v, buf, 4);
  return v;
}

inline std::uint64_t read_u64(std::istream& in) {
  char buf[8];
  if (!in.read(buf, 8)) throw io_error("checkpoint truncated");
  std::uint64_t v;
  std::memcpy(&v, buf, 8);
  return v;
}

inline nlohmann::json param_manifest(const ParameterSet& params) {
  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& p : params.all()) {
    nlohmann::json entry;
    entry["name"] = p->name;
    entry["rows"] = p->value.rows();
    entry["cols"] = p->value.cols();
    manifest.push_back(entry);
  }
  return manifest;
}

inline void write_param_values(std::ostream& out, const ParameterSet& params) {
  for (const auto& p : params.all())
    for (Eigen::Index r = 0; r < p->value.rows(); ++r)
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) {
        const double v = p->value(r, c);
        char buf[8];
        std::memcpy(buf, &v, 8);
        out.write(buf, 8);
      }
}

inline void read_param_values(std::istream& in, ParameterSet& params,
                              const nlohmann::json& manifest) {
  for (const auto& entry : manifest) {
    Parameter* p = params.find(entry.at("name").get<std::string>());
    for (Eigen::Index r = 0; r < p->value.rows(); ++r)
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) {
        char buf[8];
        if (!in.read(buf, 8)) throw io_error("checkpoint truncated");
        double v;
        std::memcpy(&v, buf, 8);
        p->value(r, c) = v;
      }
  }
}

}  // namespace detail

inline void save_model(const TaskModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write checkpoint '" + path + "'");
  nlohmann::json header;
  header["task"] = to_string(model.task);
  header["variant"] = to_string(model.variant);
  header["tokenizer"] = model.tokenizer.identifier();
  header["lowercase"] = model.tokenizer.lowercase();
  header["vocab"] = model.tokenizer.vocabulary();
  header["encoder"] = {{"kind", model.config.kind},
                       {"pretrained_path", model.config.pretrained_path},
                       {"embed_dim", model.config.embed_dim},
                       {"max_positions", model.config.max_positions},
                       {"dropout", model.config.dropout}};
  header["params"] = detail::param_manifest(model.params);
  const std::string header_text = header.dump();
  out.write(detail::kCheckpointMagic, 4);
  detail::write_u32(out, detail::kCheckpointVersion);
  detail::write_u64(out, header_text.size());
  out.write(header_text.data(),
            static_cast<std::streamsize>(header_text.size()));
  detail::write_param_values(out, model.params);
  if (!out) throw io_error("failed while writing checkpoint '" + path + "'");
}

inline TaskModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open checkpoint '" + path + "'");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, detail::kCheckpointMagic, 4))
    throw data_error("'" + path + "' is not a model checkpoint");
  const std::uint32_t version = detail::read_u32(in);
  if (version != detail::kCheckpointVersion)
    throw data_error("unsupported checkpoint version " +
                     std::to_string(version));
  const std::uint64_t header_len = detail::read_u64(in);
  std::string header_text(header_len, '\0');
  if (!in.read(header_text.data(), static_cast<std::streamsize>(header_len)))
    throw io_error("checkpoint truncated");
  nlohmann::json header = nlohmann::json::parse(header_text, nullptr, false);
  if (header.is_discarded())
    throw data_error("checkpoint header is not valid JSON");

  TaskModel m;
  m.task = parse_task(header.at("task").get<std::string>());
  m.variant = parse_variant(header.at("variant").get<std::string>());
  m.tokenizer = WordPieceTokenizer(
      header.at("vocab").get<std::vector<std::string>>(),
      header.at("lowercase").get<bool>());
  const auto& enc = header.at("encoder");
  m.config.kind = enc.at("kind").get<std::string>();
  m.config.pretrained_path = enc.at("pretrained_path").get<std::string>();
  m.config.embed_dim = enc.at("embed_dim").get<int>();
  m.config.max_positions = enc.at("max_positions").get<int>();
  m.config.dropout = enc.at("dropout").get<double>();

  for (const auto& entry : header.at("params"))
    m.params.create_zero(entry.at("name").get<std::string>(),
                         entry.at("rows").get<Eigen::Index>(),
                         entry.at("cols").get<Eigen::Index>());
  detail::read_param_values(in, m.params, header.at("params"));

  m.stack = EncoderStack::locate(m.params, m.config);
  if (m.task == Task::aopsc) {
    m.sentiment_head.W = m.params.find("head.W");
    m.sentiment_head.b = m.params.find("head.b");
  } else {
    m.tag_head.W = m.params.find("head.W");
    m.tag_head.b = m.params.find("head.b");
  }
  if (m.params.find("encoder.tok")->value.rows() != m.tokenizer.size())
    throw data_error("checkpoint vocabulary does not match its embeddings");
  return m;
}

/// Writes the encoder weights and vocabulary of a model as a reusable
/// initialization directory for `kind = pretrained` runs.
inline void export_encoder(const TaskModel& model, const std::string& dir) {
  {
    std::ofstream vocab(dir + "/vocab.txt");
    if (!vocab) throw io_error("cannot write '" + dir + "/vocab.txt'");
    for (const std::string& t : model.tokenizer.vocabulary())
      vocab << t << "\n";
  }
  std::ofstream out(dir + "/encoder.bin", std::ios::binary);
  if (!out) throw io_error("cannot write '" + dir + "/encoder.bin'");
  nlohmann::json header;
  header["embed_dim"] = model.config.embed_dim;
  header["max_positions"] = model.config.max_positions;
  header["lowercase"] = model.tokenizer.lowercase();
  header["params"] = nlohmann::json::array();
  for (const auto& p : model.params.all()) {
    if (p->name.rfind("encoder.", 0) != 0) continue;
    nlohmann::json entry;
    entry["name"] = p->name;
    entry["rows"] = p->value.rows();
    entry["cols"] = p->value.cols();
    header["params"].push_back(entry);
  }
  const std::string header_text = header.dump();
  out.write(detail::kCheckpointMagic, 4);
  detail::write_u32(out, detail::kCheckpointVersion);
  detail::write_u64(out, header_text.size());
  out.write(header_text.data(),
            static_cast<std::streamsize>(header_text.size()));
  for (const auto& p : model.params.all()) {
    if (p->name.rfind("encoder.", 0) != 0) continue;
    for (Eigen::Index r = 0; r < p->value.rows(); ++r)
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) {
        const double v = p->value(r, c);
        char buf[8];
        std::memcpy(buf, &v, 8);
        out.write(buf, 8);
      }
  }
  if (!out) throw io_error("failed while writing '" + dir + "/encoder.bin'");
}

/// Vocabulary of a pretrained-encoder directory.
inline WordPieceTokenizer load_pretrained_vocab(const std::string& dir) {
  std::ifstream in(dir + "/encoder.bin", std::ios::binary);
  if (!in) throw io_error("cannot open '" + dir + "/encoder.bin'");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, detail::kCheckpointMagic, 4))
    throw data_error("'" + dir + "/encoder.bin' is not an encoder export");
  detail::read_u32(in);
  const std::uint64_t header_len = detail::read_u64(in);
  std::string header_text(header_len, '\0');
  if (!in.read(header_text.data(), static_cast<std::streamsize>(header_len)))
    throw io_error("encoder export truncated");
  nlohmann::json header = nlohmann::json::parse(header_text);
  return WordPieceTokenizer::from_file(dir + "/vocab.txt",
                                       header.at("lowercase").get<bool>());
}

/// Overwrites a freshly initialized model's encoder weights with the exported
/// ones. Dimensions must agree with the model's config.
inline void load_pretrained_encoder(TaskModel& model, const std::string& dir) {
  std::ifstream in(dir + "/encoder.bin", std::ios::binary);
  if (!in) throw io_error("cannot open '" + dir + "/encoder.bin'");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, detail::kCheckpointMagic, 4))
    throw data_error("'" + dir + "/encoder.bin' is not an encoder export");
  const std::uint32_t version = detail::read_u32(in);
  if (version != detail::kCheckpointVersion)
    throw data_error("unsupported encoder export version " +
                     std::to_string(version));
  const std::uint64_t header_len = detail::read_u64(in);
  std::string header_text(header_len, '\0');
  if (!in.read(header_text.data(), static_cast<std::streamsize>(header_len)))
    throw io_error("encoder export truncated");
  nlohmann::json header = nlohmann::json::parse(header_text, nullptr, false);
  if (header.is_discarded())
    throw data_error("encoder export header is not valid JSON");
  if (header.at("embed_dim").get<int>() != model.config.embed_dim ||
      header.at("max_positions").get<int>() != model.config.max_positions)
    throw config_error(
        "pretrained encoder dimensions do not match the model config");
  for (const auto& entry : header.at("params")) {
    Parameter* p = model.params.find(entry.at("name").get<std::string>());
    if (p->value.rows() != entry.at("rows").get<Eigen::Index>() ||
        p->value.cols() != entry.at("cols").get<Eigen::Index>())
      throw data_error("pretrained parameter '" + p->name +
                       "' has mismatched shape");
  }
  detail::read_param_values(in, model.params, header.at("params"));
}

}  // namespace asote

#endif  // ASOTE_NN_HPP
