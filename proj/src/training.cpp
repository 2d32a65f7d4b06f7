#include "hrm/training.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "hrm/errors.hpp"
#include "hrm/ops.hpp"
#include "hrm/rng.hpp"
#include "hrm/solver.hpp"
#include "hrm/symmetry.hpp"

namespace hrm {

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("train config: " + msg); };
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (warmup_steps < 0) fail("warmup_steps must be >= 0");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (total_steps < 0) fail("total_steps must be >= 0");
  if (checkpoint_interval < 1) fail("checkpoint_interval must be >= 1");
  if (log_interval < 1) fail("log_interval must be >= 1");
  if (mix_replicates < 0) fail("mix_replicates must be >= 0");
  if (reveal.min_fraction < 0.0 || reveal.max_fraction > 1.0 || reveal.min_fraction > reveal.max_fraction) {
    fail("reveal fractions must satisfy 0 <= min <= max <= 1");
  }
  if (q_loss_weight < 0.0) fail("q_loss_weight must be >= 0");
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"warmup_steps", c.warmup_steps},
          {"batch_size", c.batch_size},
          {"total_steps", c.total_steps},
          {"checkpoint_interval", c.checkpoint_interval},
          {"log_interval", c.log_interval},
          {"mix_replicates", c.mix_replicates},
          {"reveal_min_fraction", c.reveal.min_fraction},
          {"reveal_max_fraction", c.reveal.max_fraction},
          {"q_loss_weight", c.q_loss_weight},
          {"augment", c.augment},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.total_steps = j.value("total_steps", c.total_steps);
  c.checkpoint_interval = j.value("checkpoint_interval", c.checkpoint_interval);
  c.log_interval = j.value("log_interval", c.log_interval);
  c.mix_replicates = j.value("mix_replicates", c.mix_replicates);
  c.reveal.min_fraction = j.value("reveal_min_fraction", c.reveal.min_fraction);
  c.reveal.max_fraction = j.value("reveal_max_fraction", c.reveal.max_fraction);
  c.q_loss_weight = j.value("q_loss_weight", c.q_loss_weight);
  c.augment = j.value("augment", c.augment);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double bootstrap_continue(double next_halt, double next_continue) {
  return sigmoid(std::max(next_halt, next_continue));
}

}  // namespace

std::vector<ActTarget> act_targets(std::span<const SegmentLossRecord> records, ActTargetMode mode) {
  if (records.empty()) throw std::invalid_argument("act_targets: empty record");
  const std::size_t m = records.size();
  std::vector<ActTarget> out(m);
  for (std::size_t i = 0; i < m; ++i) out[i].halt = records[i].exact ? 1.0 : 0.0;
  out[m - 1].cont = out[m - 1].halt;
  for (std::size_t i = m - 1; i-- > 0;) {
    out[i].cont = mode == ActTargetMode::Bootstrap
                      ? bootstrap_continue(records[i + 1].q_halt, records[i + 1].q_continue)
                      : std::max(out[i + 1].halt, out[i + 1].cont);
  }
  return out;
}

Dataset build_mixed_dataset(const Dataset& base, int replicates, const RevealDistribution& reveal,
                            std::uint64_t seed) {
  if (replicates < 0) throw std::invalid_argument("build_mixed_dataset: replicates must be >= 0");
  if (reveal.min_fraction < 0.0 || reveal.max_fraction > 1.0 || reveal.min_fraction > reveal.max_fraction) {
    throw std::invalid_argument("build_mixed_dataset: bad reveal fractions");
  }
  Dataset out;
  out.reserve(base.size() * static_cast<std::size_t>(replicates + 1));
  for (std::size_t i = 0; i < base.size(); ++i) {
    const Sample& s = base[i];
    out.push_back(s);
    const int blanks = s.puzzle.blank_count();
    const int lo = static_cast<int>(std::lround(reveal.min_fraction * blanks));
    const int hi = static_cast<int>(std::lround(reveal.max_fraction * blanks));
    Rng rng(derive_seed(seed, "mix", i));
    for (int r = 0; r < replicates; ++r) {
      const int count = lo + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(hi - lo + 1)));
      out.push_back({simplify_puzzle(s.puzzle, s.solution, count, rng.next_u64()), s.solution});
    }
  }
  return out;
}

double learning_rate_at(const TrainConfig& train, std::int64_t step) {
  if (train.warmup_steps <= 0) return train.learning_rate;
  const double ramp = static_cast<double>(step + 1) / static_cast<double>(train.warmup_steps);
  return train.learning_rate * std::min(1.0, ramp);
}

std::vector<Sample> batch_for_step(const Dataset& data, const TrainConfig& train, std::int64_t step) {
  if (data.empty()) throw std::invalid_argument("batch_for_step: empty dataset");
  const auto n = static_cast<std::uint64_t>(data.size());
  const auto b = static_cast<std::uint64_t>(train.batch_size);
  std::vector<Sample> batch;
  batch.reserve(b);
  std::uint64_t cached_epoch = UINT64_MAX;
  std::vector<std::size_t> order(data.size());
  for (std::uint64_t j = 0; j < b; ++j) {
    const std::uint64_t g = static_cast<std::uint64_t>(step) * b + j;
    const std::uint64_t epoch = g / n;
    if (epoch != cached_epoch) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      Rng rng(derive_seed(train.seed, "epoch", epoch));
      rng.shuffle(std::span<std::size_t>(order));
      cached_epoch = epoch;
    }
    Sample s = data[order[g % n]];
    if (train.augment) {
      Rng rng(derive_seed(train.seed, "augment", g));
      const GridTransform t = random_transform(rng, s.puzzle.box_size());
      s = {apply_transform(t, s.puzzle), apply_transform(t, s.solution)};
    }
    batch.push_back(std::move(s));
  }
  return batch;
}

namespace {

template <class T>
struct OpenSegment {
  std::unique_ptr<Tape<T>> tape;
  ParamVars vars;
  Var ce;
  Var q;
};

template <class T>
int find_nonfinite_sample(std::span<const Sample> batch, const ModelParams<T>& params,
                          const ModelConfig& model) {
  for (std::size_t b = 0; b < batch.size(); ++b) {
    try {
      const Matrix<T> x = embed_input(batch[b].puzzle, params, model);
      LatentState<T> z = initial_state(params, model);
      for (int i = 0; i < model.max_segments; ++i) {
        z = segment_forward(z, x, params, model);
        decode_output(z, params, model);
      }
    } catch (const NonFiniteError&) {
      return static_cast<int>(b);
    }
  }
  return -1;
}

}  // namespace

template <class T>
StepResult train_step(std::span<const Sample> batch, ModelParams<T>& params, AdamState<T>& optimizer,
                      const ModelConfig& model, const TrainConfig& train, double learning_rate,
                      StepTrace<T>* trace) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  const int L = model.seq_len();
  const int B = static_cast<int>(batch.size());
  const int M = model.max_segments;
  std::vector<int> tokens;
  std::vector<int> targets;
  tokens.reserve(static_cast<std::size_t>(B * L));
  targets.reserve(static_cast<std::size_t>(B * L));
  for (int b = 0; b < B; ++b) {
    const Sample& s = batch[static_cast<std::size_t>(b)];
    if (s.puzzle.box_size() != model.box_size || s.solution.box_size() != model.box_size) {
      throw ShapeError("train_step: sample " + std::to_string(b) + " has box size " +
                       std::to_string(s.puzzle.box_size()) + ", model expects " +
                       std::to_string(model.box_size));
    }
    for (Token t : s.puzzle.cells()) tokens.push_back(t);
    for (Token t : s.solution.cells()) targets.push_back(t);
  }

  const std::vector<Matrix<T>*> weights = params.trainable();
  std::vector<Matrix<T>> grads;
  grads.reserve(weights.size());
  for (const Matrix<T>* w : weights) grads.push_back(Matrix<T>::Zero(w->rows(), w->cols()));

  StepResult result;
  result.records.assign(static_cast<std::size_t>(B), std::vector<SegmentLossRecord>(static_cast<std::size_t>(M)));
  const T lambda = static_cast<T>(train.q_loss_weight);

  auto finish = [&](OpenSegment<T>& seg, int i, const Matrix<T>* next_q, std::size_t live_other) {
    Tape<T>& tape = *seg.tape;
    Matrix<T> q_targets(B, 2);
    for (int b = 0; b < B; ++b) {
      SegmentLossRecord& r = result.records[static_cast<std::size_t>(b)][static_cast<std::size_t>(i)];
      r.halt_target = r.exact ? 1.0 : 0.0;
      r.continue_target = next_q != nullptr
                              ? bootstrap_continue(static_cast<double>((*next_q)(b, 0)),
                                                   static_cast<double>((*next_q)(b, 1)))
                              : r.halt_target;
      q_targets(b, 0) = static_cast<T>(r.halt_target);
      q_targets(b, 1) = static_cast<T>(r.continue_target);
    }
    const Var q_loss = bce_with_logits(tape, seg.q, q_targets);
    const Var loss = add(tape, seg.ce, scale(tape, q_loss, lambda));
    result.total_loss += static_cast<double>(tape.value(loss)(0, 0));
    tape.backward(loss);
    const std::vector<Var> vars = seg.vars.trainable();
    std::vector<Matrix<T>> seg_grads;
    for (std::size_t k = 0; k < vars.size(); ++k) {
      if (!tape.has_grad(vars[k])) {
        if (trace != nullptr && trace->keep_gradients) seg_grads.push_back(Matrix<T>::Zero(grads[k].rows(), grads[k].cols()));
        continue;
      }
      grads[k] += tape.grad(vars[k]);
      if (trace != nullptr && trace->keep_gradients) seg_grads.push_back(tape.grad(vars[k]));
    }
    if (trace != nullptr) {
      trace->tape_nodes.push_back(tape.size());
      trace->peak_live_nodes = std::max(trace->peak_live_nodes, tape.size() + live_other);
      trace->q_targets.push_back(std::move(q_targets));
      if (trace->keep_gradients) trace->segment_gradients.push_back(std::move(seg_grads));
    }
    seg.tape.reset();
  };

  try {
    Matrix<T> z = params.z_init.replicate(B * L, 1);
    std::optional<OpenSegment<T>> prev;
    for (int i = 0; i < M; ++i) {
      OpenSegment<T> cur;
      cur.tape = std::make_unique<Tape<T>>();
      Tape<T>& tape = *cur.tape;
      cur.vars = bind_params(tape, params, true);
      const Var x = embed_tokens(tape, cur.vars, std::span<const int>(tokens), L);
      if (trace != nullptr) trace->entering_states.push_back(z);
      const Var z_in = tape.leaf(z, false);
      const Var z_out = segment_graph(tape, z_in, x, cur.vars, model);
      const Var logits = output_logits(tape, z_out, cur.vars);
      cur.ce = softmax_cross_entropy(tape, logits, std::span<const int>(targets));
      cur.q = q_logits(tape, z_out, cur.vars, L);

      const Matrix<T>& lv = tape.value(logits);
      const Matrix<T>& qv = tape.value(cur.q);
      for (int b = 0; b < B; ++b) {
        double loss = 0.0;
        bool exact = true;
        for (int c = 0; c < L; ++c) {
          const auto row = lv.row(b * L + c);
          const T mx = row.maxCoeff();
          const double lse = static_cast<double>(mx) + std::log(static_cast<double>((row.array() - mx).exp().sum()));
          const int target = targets[static_cast<std::size_t>(b * L + c)];
          loss += lse - static_cast<double>(row(target));
          Eigen::Index best = 0;
          for (Eigen::Index v = 1; v < row.size(); ++v) {
            if (row(v) > row(best)) best = v;
          }
          exact = exact && best == target;
        }
        SegmentLossRecord& r = result.records[static_cast<std::size_t>(b)][static_cast<std::size_t>(i)];
        r.loss = loss / L;
        r.exact = exact;
        r.q_halt = static_cast<double>(qv(b, 0));
        r.q_continue = static_cast<double>(qv(b, 1));
      }
      z = tape.value(z_out);
      if (prev) finish(*prev, i - 1, &qv, tape.size());
      prev = std::move(cur);
    }
    finish(*prev, M - 1, nullptr, 0);
  } catch (const NonFiniteError& e) {
    const int bad = find_nonfinite_sample(batch, params, model);
    throw NonFiniteError(std::string("train_step aborted: ") + e.what() +
                         (bad >= 0 ? " (first offending sample: " + std::to_string(bad) + ")"
                                   : " (offending sample not isolated)"));
  }

  AdamHyper hyper;
  hyper.learning_rate = learning_rate;
  adam_step(std::span<Matrix<T>* const>(weights), std::span<const Matrix<T>>(grads), optimizer, hyper);
  return result;
}

template StepResult train_step<float>(std::span<const Sample>, ModelParams<float>&, AdamState<float>&,
                                      const ModelConfig&, const TrainConfig&, double, StepTrace<float>*);
template StepResult train_step<double>(std::span<const Sample>, ModelParams<double>&, AdamState<double>&,
                                       const ModelConfig&, const TrainConfig&, double, StepTrace<double>*);

std::vector<std::int64_t> checkpoint_schedule(const TrainConfig& train, std::int64_t start_step) {
  std::vector<std::int64_t> steps;
  if (train.total_steps == 0) {
    if (start_step == 0) steps.push_back(0);
    return steps;
  }
  for (std::int64_t s = train.checkpoint_interval; s <= train.total_steps; s += train.checkpoint_interval) {
    if (s > start_step) steps.push_back(s);
  }
  if (train.total_steps % train.checkpoint_interval != 0 && train.total_steps > start_step) {
    steps.push_back(train.total_steps);
  }
  return steps;
}

std::string checkpoint_file_name(std::int64_t step) {
  std::string digits = std::to_string(step);
  if (digits.size() < 8) digits.insert(0, 8 - digits.size(), '0');
  return "ckpt_" + digits + ".bin";
}

namespace {

nlohmann::json log_line(const StepResult& r, std::int64_t step, double lr) {
  std::vector<double> mean;
  int exact = 0;
  for (const auto& rec : r.records) {
    if (mean.empty()) mean.assign(rec.size(), 0.0);
    for (std::size_t i = 0; i < rec.size(); ++i) mean[i] += rec[i].loss;
    exact += rec.back().exact ? 1 : 0;
  }
  const double samples = static_cast<double>(r.records.size());
  for (double& v : mean) v /= samples;
  return {{"step", step},
          {"lr", lr},
          {"segment_loss", mean},
          {"train_exact_accuracy", exact / samples},
          {"total_loss", r.total_loss}};
}

std::string kept_log_prefix(const std::filesystem::path& path, std::int64_t start_step) {
  if (start_step == 0 || !std::filesystem::exists(path)) return {};
  std::istringstream in(read_text_file(path));
  std::string out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (nlohmann::json::parse(line).at("step").get<std::int64_t>() < start_step) out += line + "\n";
  }
  return out;
}

}  // namespace

TrainingRun run_training(const Dataset& data, const ModelConfig& model, const TrainConfig& train,
                         const std::filesystem::path& out_dir, std::uint64_t manifest_hash,
                         const std::optional<Checkpoint>& resume,
                         const std::function<void(const nlohmann::json&)>& on_log) {
  model.validate();
  train.validate();
  if (data.empty()) throw std::invalid_argument("run_training: empty dataset");
  for (const Sample& s : data) {
    if (s.puzzle.box_size() != model.box_size) throw ShapeError("run_training: dataset box size does not match model");
  }

  TrainingRun run;
  std::int64_t start = 0;
  ModelParams<float> params;
  AdamState<float> optimizer;
  if (resume) {
    if (!(resume->config == model)) throw std::invalid_argument("run_training: resume checkpoint has a different model config");
    if (!resume->optimizer) throw std::invalid_argument("run_training: resume checkpoint has no optimizer state");
    if (resume->step > train.total_steps) throw std::invalid_argument("run_training: resume step beyond total_steps");
    params = resume->params;
    optimizer = *resume->optimizer;
    start = resume->step;
  } else {
    params = init_params<float>(model);
    auto weights = params.trainable();
    optimizer = AdamState<float>::zeros_like(std::span<Matrix<float>* const>(weights));
  }

  std::filesystem::create_directories(out_dir);
  run.log_path = out_dir / "train_log.jsonl";
  std::string log_text = kept_log_prefix(run.log_path, start);
  write_text_file(run.log_path, log_text);

  const std::vector<std::int64_t> schedule = checkpoint_schedule(train, start);
  auto save = [&](std::int64_t step) {
    Checkpoint ckpt{model, step, manifest_hash, params, optimizer};
    const auto path = out_dir / checkpoint_file_name(step);
    save_checkpoint(path, ckpt);
    run.checkpoints.push_back(path);
    run.checkpoint_steps.push_back(step);
  };
  if (!schedule.empty() && schedule.front() == 0) save(0);

  std::size_t next_ckpt = 0;
  while (next_ckpt < schedule.size() && schedule[next_ckpt] <= start) ++next_ckpt;
  for (std::int64_t s = start; s < train.total_steps; ++s) {
    const std::vector<Sample> batch = batch_for_step(data, train, s);
    const double lr = learning_rate_at(train, s);
    const StepResult step = train_step<float>(std::span<const Sample>(batch), params, optimizer, model, train, lr);
    // Each line describes the logged step's own batch, so a resumed run
    // writes exactly the lines an uninterrupted run would.
    if (s % train.log_interval == 0) {
      const nlohmann::json line = log_line(step, s, lr);
      log_text += line.dump() + "\n";
      write_text_file(run.log_path, log_text);
      if (on_log) on_log(line);
    }
    if (next_ckpt < schedule.size() && schedule[next_ckpt] == s + 1) {
      save(s + 1);
      ++next_ckpt;
    }
  }
  run.params = std::move(params);
  return run;
}

}  // namespace hrm
