#include "hrm/model.hpp"

#include <stdexcept>

#include <json.hpp>

#include "hrm/errors.hpp"
#include "hrm/rng.hpp"

namespace hrm {

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("model config: " + msg); };
  if (box_size < PuzzleGrid::kMinBox || box_size > PuzzleGrid::kMaxBox) fail("box_size outside [2, 5]");
  if (width < 1 || heads < 1 || width % heads != 0) fail("width must be a positive multiple of heads");
  if (n_cycles < 1 || t_low < 1) fail("n_cycles and t_low must be >= 1");
  if (min_segments < 1 || max_segments < min_segments) fail("need max_segments >= min_segments >= 1");
  if (epsilon < 0.0 || epsilon > 1.0) fail("epsilon outside [0, 1]");
}

nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"box_size", c.box_size},         {"width", c.width},
          {"heads", c.heads},               {"n_cycles", c.n_cycles},
          {"t_low", c.t_low},               {"max_segments", c.max_segments},
          {"min_segments", c.min_segments}, {"epsilon", c.epsilon},
          {"seed", c.seed}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.box_size = j.value("box_size", c.box_size);
  c.width = j.value("width", c.width);
  c.heads = j.value("heads", c.heads);
  c.n_cycles = j.value("n_cycles", c.n_cycles);
  c.t_low = j.value("t_low", c.t_low);
  c.max_segments = j.value("max_segments", c.max_segments);
  c.min_segments = j.value("min_segments", c.min_segments);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

namespace {

template <class P, class E>
void encoder_named(std::vector<std::pair<std::string, P>>& out, const std::string& prefix, E& e) {
  out.emplace_back(prefix + ".wq", &e.wq);
  out.emplace_back(prefix + ".wk", &e.wk);
  out.emplace_back(prefix + ".wv", &e.wv);
  out.emplace_back(prefix + ".wo", &e.wo);
  out.emplace_back(prefix + ".norm1", &e.norm1);
  out.emplace_back(prefix + ".gate", &e.gate);
  out.emplace_back(prefix + ".value", &e.value);
  out.emplace_back(prefix + ".output", &e.output);
  out.emplace_back(prefix + ".norm2", &e.norm2);
}

template <class P, class M>
std::vector<std::pair<std::string, P>> named_impl(M& m, bool include_frozen) {
  std::vector<std::pair<std::string, P>> out;
  out.emplace_back("token_embedding", &m.token_embedding);
  out.emplace_back("position_embedding", &m.position_embedding);
  encoder_named(out, "low", m.low);
  encoder_named(out, "high", m.high);
  out.emplace_back("output_proj", &m.output_proj);
  out.emplace_back("q_weight", &m.q_weight);
  out.emplace_back("q_bias", &m.q_bias);
  if (include_frozen) out.emplace_back("z_init", &m.z_init);
  return out;
}

template <class T>
Matrix<T> truncated(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev) {
  Matrix<T> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(rng.truncated_normal(stddev));
  return m;
}

template <class T>
EncoderParams<T> init_encoder(Rng& rng, int width, int hidden) {
  const double s = 1.0 / std::sqrt(static_cast<double>(width));
  const double sh = 1.0 / std::sqrt(static_cast<double>(hidden));
  EncoderParams<T> e;
  e.wq = truncated<T>(rng, width, width, s);
  e.wk = truncated<T>(rng, width, width, s);
  e.wv = truncated<T>(rng, width, width, s);
  e.wo = truncated<T>(rng, width, width, s);
  e.norm1 = Matrix<T>::Ones(1, width);
  e.gate = truncated<T>(rng, width, hidden, s);
  e.value = truncated<T>(rng, width, hidden, s);
  e.output = truncated<T>(rng, hidden, width, sh);
  e.norm2 = Matrix<T>::Ones(1, width);
  return e;
}

template <class U, class T>
EncoderParams<U> cast_encoder(const EncoderParams<T>& e) {
  return {e.wq.template cast<U>(),    e.wk.template cast<U>(),    e.wv.template cast<U>(),
          e.wo.template cast<U>(),    e.norm1.template cast<U>(), e.gate.template cast<U>(),
          e.value.template cast<U>(), e.output.template cast<U>(), e.norm2.template cast<U>()};
}

template <class T>
EncoderVars bind_encoder(Tape<T>& tape, const EncoderParams<T>& e, bool trainable) {
  EncoderVars v;
  v.attention.wq = tape.leaf(e.wq, trainable);
  v.attention.wk = tape.leaf(e.wk, trainable);
  v.attention.wv = tape.leaf(e.wv, trainable);
  v.attention.wo = tape.leaf(e.wo, trainable);
  v.norm1 = tape.leaf(e.norm1, trainable);
  v.ffn.gate = tape.leaf(e.gate, trainable);
  v.ffn.value = tape.leaf(e.value, trainable);
  v.ffn.output = tape.leaf(e.output, trainable);
  v.norm2 = tape.leaf(e.norm2, trainable);
  return v;
}

void encoder_vars(std::vector<Var>& out, const EncoderVars& e) {
  out.insert(out.end(), {e.attention.wq, e.attention.wk, e.attention.wv, e.attention.wo, e.norm1,
                         e.ffn.gate, e.ffn.value, e.ffn.output, e.norm2});
}

void check_grid(const PuzzleGrid& x, const ModelConfig& config) {
  if (x.box_size() != config.box_size) {
    throw ShapeError("grid box size " + std::to_string(x.box_size()) +
                     " does not match model box size " + std::to_string(config.box_size));
  }
}

template <class T>
void check_latent(const Matrix<T>& z, const ModelConfig& config) {
  if (z.rows() != config.seq_len() || z.cols() != config.width) {
    throw ShapeError("latent state must be " + std::to_string(config.seq_len()) + "x" +
                     std::to_string(config.width));
  }
}

}  // namespace

template <class T>
std::vector<std::pair<std::string, Matrix<T>*>> ModelParams<T>::named(bool include_frozen) {
  return named_impl<Matrix<T>*>(*this, include_frozen);
}

template <class T>
std::vector<std::pair<std::string, const Matrix<T>*>> ModelParams<T>::named(bool include_frozen) const {
  return named_impl<const Matrix<T>*>(*this, include_frozen);
}

template <class T>
std::vector<Matrix<T>*> ModelParams<T>::trainable() {
  std::vector<Matrix<T>*> out;
  for (auto& [name, m] : named(false)) out.push_back(m);
  return out;
}

template <class T>
template <class U>
ModelParams<U> ModelParams<T>::cast() const {
  ModelParams<U> p;
  p.token_embedding = token_embedding.template cast<U>();
  p.position_embedding = position_embedding.template cast<U>();
  p.low = cast_encoder<U>(low);
  p.high = cast_encoder<U>(high);
  p.output_proj = output_proj.template cast<U>();
  p.q_weight = q_weight.template cast<U>();
  p.q_bias = q_bias.template cast<U>();
  p.z_init = z_init.template cast<U>();
  return p;
}

template <class T>
ModelParams<T> init_params(const ModelConfig& config) {
  config.validate();
  Rng rng(derive_seed(config.seed, "init"));
  const int d = config.width;
  ModelParams<T> p;
  p.token_embedding = truncated<T>(rng, config.vocab(), d, 1.0);
  p.position_embedding = truncated<T>(rng, config.seq_len(), d, 1.0);
  p.low = init_encoder<T>(rng, d, config.hidden());
  p.high = init_encoder<T>(rng, d, config.hidden());
  p.output_proj = truncated<T>(rng, d, config.vocab(), 0.01);
  p.q_weight = Matrix<T>::Zero(d, 2);
  p.q_bias = Matrix<T>::Zero(1, 2);
  p.z_init = truncated<T>(rng, 1, d, 1.0);
  return p;
}

std::vector<Var> ParamVars::trainable() const {
  std::vector<Var> out{token_embedding, position_embedding};
  encoder_vars(out, low);
  encoder_vars(out, high);
  out.insert(out.end(), {output_proj, q_weight, q_bias});
  return out;
}

template <class T>
ParamVars bind_params(Tape<T>& tape, const ModelParams<T>& params, bool trainable) {
  ParamVars v;
  v.token_embedding = tape.leaf(params.token_embedding, trainable);
  v.position_embedding = tape.leaf(params.position_embedding, trainable);
  v.low = bind_encoder(tape, params.low, trainable);
  v.high = bind_encoder(tape, params.high, trainable);
  v.output_proj = tape.leaf(params.output_proj, trainable);
  v.q_weight = tape.leaf(params.q_weight, trainable);
  v.q_bias = tape.leaf(params.q_bias, trainable);
  return v;
}

template <class T>
Var encoder_block(Tape<T>& tape, Var x, const EncoderVars& w, int heads, int seq_len) {
  const Var h = rms_norm(tape, add(tape, x, multi_head_self_attention(tape, x, w.attention, heads, seq_len)), w.norm1);
  return rms_norm(tape, add(tape, h, glu_ffn(tape, h, w.ffn)), w.norm2);
}

template <class T>
Var embed_tokens(Tape<T>& tape, const ParamVars& p, std::span<const int> tokens, int seq_len) {
  std::vector<int> positions(tokens.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i % static_cast<std::size_t>(seq_len));
  return add(tape, gather_rows(tape, p.token_embedding, tokens),
             gather_rows(tape, p.position_embedding, std::span<const int>(positions)));
}

template <class T>
Var segment_graph(Tape<T>& tape, Var z, Var x_emb, const ParamVars& p, const ModelConfig& config,
                  SegmentCounters* counters) {
  const Matrix<T>& zv = tape.value(z);
  Var z_low = tape.leaf(Matrix<T>::Zero(zv.rows(), zv.cols()), false);
  Var z_high = z;
  for (int cycle = 0; cycle < config.n_cycles; ++cycle) {
    for (int step = 0; step < config.t_low; ++step) {
      z_low = encoder_block(tape, add(tape, add(tape, z_low, z_high), x_emb), p.low, config.heads,
                            config.seq_len());
      if (counters != nullptr) ++counters->low_calls;
    }
    z_high = encoder_block(tape, add(tape, z_high, z_low), p.high, config.heads, config.seq_len());
    if (counters != nullptr) ++counters->high_calls;
  }
  return z_high;
}

template <class T>
Var output_logits(Tape<T>& tape, Var z, const ParamVars& p) {
  return matmul(tape, z, p.output_proj);
}

template <class T>
Var q_logits(Tape<T>& tape, Var z, const ParamVars& p, int seq_len) {
  return affine(tape, mean_pool(tape, z, seq_len), p.q_weight, p.q_bias);
}

std::vector<int> grid_tokens(const PuzzleGrid& g) {
  return std::vector<int>(g.cells().begin(), g.cells().end());
}

template <class T>
Matrix<T> embed_input(const PuzzleGrid& x, const ModelParams<T>& params, const ModelConfig& config) {
  check_grid(x, config);
  Tape<T> tape;
  const ParamVars p = bind_params(tape, params, false);
  const std::vector<int> tokens = grid_tokens(x);
  return tape.value(embed_tokens(tape, p, std::span<const int>(tokens), config.seq_len()));
}

template <class T>
LatentState<T> initial_state(const ModelParams<T>& params, const ModelConfig& config) {
  return {params.z_init.replicate(config.seq_len(), 1)};
}

template <class T>
LatentState<T> segment_forward(const LatentState<T>& z, const Matrix<T>& x_emb,
                               const ModelParams<T>& params, const ModelConfig& config,
                               SegmentCounters* counters) {
  check_latent(z.z, config);
  check_latent(x_emb, config);
  Tape<T> tape;
  const ParamVars p = bind_params(tape, params, false);
  const Var out = segment_graph(tape, tape.leaf(z.z), tape.leaf(x_emb), p, config, counters);
  return {tape.value(out)};
}

template <class T>
std::vector<PuzzleGrid> argmax_grids(const Matrix<T>& logits, int box_size) {
  const int side = box_size * box_size;
  const int L = side * side;
  if (logits.rows() % L != 0 || logits.cols() != side + 1) {
    throw ShapeError("argmax_grids: logits shape does not match box size");
  }
  std::vector<PuzzleGrid> out;
  for (Eigen::Index b = 0; b < logits.rows() / L; ++b) {
    std::vector<Token> cells(static_cast<std::size_t>(L));
    for (int i = 0; i < L; ++i) {
      const auto row = logits.row(b * L + i);
      Eigen::Index best = 0;
      for (Eigen::Index v = 1; v < row.size(); ++v) {
        if (row(v) > row(best)) best = v;
      }
      cells[static_cast<std::size_t>(i)] = static_cast<Token>(best);
    }
    out.emplace_back(box_size, std::move(cells));
  }
  return out;
}

template <class T>
Decoded<T> decode_output(const LatentState<T>& z, const ModelParams<T>& params,
                         const ModelConfig& config) {
  check_latent(z.z, config);
  Matrix<T> logits = z.z * params.output_proj;
  PuzzleGrid pred = argmax_grids(logits, config.box_size).front();
  return {std::move(logits), std::move(pred)};
}

template <class T>
HaltDecision q_head(const LatentState<T>& z, const ModelParams<T>& params, const ModelConfig& config) {
  check_latent(z.z, config);
  const Matrix<T> pooled = z.z.colwise().mean();
  const Matrix<T> q = pooled * params.q_weight + params.q_bias;
  HaltDecision d;
  d.q_halt = static_cast<double>(q(0, 0));
  d.q_continue = static_cast<double>(q(0, 1));
  d.halted = d.q_halt > d.q_continue;
  return d;
}

#define HRM_INSTANTIATE_MODEL(T)                                                                   \
  template struct ModelParams<T>;                                                                  \
  template ModelParams<T> init_params<T>(const ModelConfig&);                                      \
  template ParamVars bind_params<T>(Tape<T>&, const ModelParams<T>&, bool);                        \
  template Var encoder_block<T>(Tape<T>&, Var, const EncoderVars&, int, int);                      \
  template Var embed_tokens<T>(Tape<T>&, const ParamVars&, std::span<const int>, int);             \
  template Var segment_graph<T>(Tape<T>&, Var, Var, const ParamVars&, const ModelConfig&,          \
                                SegmentCounters*);                                                 \
  template Var output_logits<T>(Tape<T>&, Var, const ParamVars&);                                  \
  template Var q_logits<T>(Tape<T>&, Var, const ParamVars&, int);                                  \
  template Matrix<T> embed_input<T>(const PuzzleGrid&, const ModelParams<T>&, const ModelConfig&); \
  template LatentState<T> initial_state<T>(const ModelParams<T>&, const ModelConfig&);             \
  template LatentState<T> segment_forward<T>(const LatentState<T>&, const Matrix<T>&,              \
                                             const ModelParams<T>&, const ModelConfig&,            \
                                             SegmentCounters*);                                    \
  template Decoded<T> decode_output<T>(const LatentState<T>&, const ModelParams<T>&,               \
                                       const ModelConfig&);                                        \
  template HaltDecision q_head<T>(const LatentState<T>&, const ModelParams<T>&, const ModelConfig&); \
  template std::vector<PuzzleGrid> argmax_grids<T>(const Matrix<T>&, int);

HRM_INSTANTIATE_MODEL(float)
HRM_INSTANTIATE_MODEL(double)

template ModelParams<double> ModelParams<float>::cast<double>() const;
template ModelParams<float> ModelParams<double>::cast<float>() const;
template ModelParams<float> ModelParams<float>::cast<float>() const;
template ModelParams<double> ModelParams<double>::cast<double>() const;

#undef HRM_INSTANTIATE_MODEL

}  // namespace hrm
