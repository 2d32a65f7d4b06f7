#include "hrm/inference.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

#include "hrm/errors.hpp"
#include "hrm/ops.hpp"

namespace hrm {

namespace {

constexpr int kChunk = 32;

}  // namespace

template <class T>
std::vector<SampleRollout<T>> rollout(std::span<const PuzzleGrid> inputs, const ModelParams<T>& params,
                                      const ModelConfig& config, const RolloutOptions& options,
                                      std::span<const PuzzleGrid> targets, std::span<const Matrix<T>> initial) {
  const int segments = options.segments < 0 ? config.max_segments : options.segments;
  if (segments < 1) throw std::invalid_argument("rollout: need at least one segment");
  if (!targets.empty() && targets.size() != inputs.size()) throw ShapeError("rollout: targets and inputs differ in count");
  if (!initial.empty() && initial.size() != inputs.size()) throw ShapeError("rollout: initial states and inputs differ in count");
  const int L = config.seq_len();
  const int d = config.width;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].box_size() != config.box_size || (!targets.empty() && targets[i].box_size() != config.box_size)) {
      throw ShapeError("rollout: grid " + std::to_string(i) + " does not match the model box size");
    }
    if (!initial.empty() && (initial[i].rows() != L || initial[i].cols() != d)) {
      throw ShapeError("rollout: initial state " + std::to_string(i) + " has the wrong shape");
    }
  }

  std::vector<SampleRollout<T>> out(inputs.size());
  Tape<T> tape;
  for (std::size_t start = 0; start < inputs.size(); start += kChunk) {
    const int count = static_cast<int>(std::min<std::size_t>(kChunk, inputs.size() - start));
    std::vector<int> tokens;
    std::vector<int> goal;
    Matrix<T> z(count * L, d);
    for (int b = 0; b < count; ++b) {
      const std::size_t s = start + static_cast<std::size_t>(b);
      for (Token t : inputs[s].cells()) tokens.push_back(t);
      if (!targets.empty()) {
        for (Token t : targets[s].cells()) goal.push_back(t);
      }
      z.middleRows(b * L, L) = initial.empty() ? Matrix<T>(params.z_init.replicate(L, 1)) : initial[s];
      if (options.keep_states) out[s].initial = z.middleRows(b * L, L);
    }
    try {
      for (int i = 0; i < segments; ++i) {
        tape.clear();
        const ParamVars vars = bind_params(tape, params, false);
        const Var x = embed_tokens(tape, vars, std::span<const int>(tokens), L);
        const Var z_out = segment_graph(tape, tape.leaf(z), x, vars, config);
        const Var logits = output_logits(tape, z_out, vars);
        const Var q = q_logits(tape, z_out, vars, L);
        const Matrix<T>& lv = tape.value(logits);
        const Matrix<T>& qv = tape.value(q);
        std::vector<PuzzleGrid> preds = argmax_grids(lv, config.box_size);
        for (int b = 0; b < count; ++b) {
          SampleRollout<T>& r = out[start + static_cast<std::size_t>(b)];
          r.predictions.push_back(std::move(preds[static_cast<std::size_t>(b)]));
          HaltDecision h;
          h.q_halt = static_cast<double>(qv(b, 0));
          h.q_continue = static_cast<double>(qv(b, 1));
          h.halted = h.q_halt > h.q_continue;
          r.q.push_back(h);
          if (!goal.empty()) {
            double loss = 0.0;
            for (int c = 0; c < L; ++c) {
              const auto row = lv.row(b * L + c);
              const double mx = static_cast<double>(row.maxCoeff());
              double sum = 0.0;
              for (Eigen::Index v = 0; v < row.size(); ++v) sum += std::exp(static_cast<double>(row(v)) - mx);
              loss += mx + std::log(sum) - static_cast<double>(row(goal[static_cast<std::size_t>(b * L + c)]));
            }
            r.loss.push_back(loss / L);
          }
        }
        z = tape.value(z_out);
        if (options.keep_states) {
          for (int b = 0; b < count; ++b) out[start + static_cast<std::size_t>(b)].states.push_back(z.middleRows(b * L, L));
        }
      }
    } catch (const NonFiniteError& e) {
      throw NonFiniteError("rollout of inputs " + std::to_string(start) + ".." +
                           std::to_string(start + static_cast<std::size_t>(count) - 1) + ": " + e.what());
    }
  }
  return out;
}

template <class T>
PassResult pass_from_rollout(const SampleRollout<T>& r, const ModelConfig& config, std::string source, Rng* rng) {
  const int segments = static_cast<int>(r.predictions.size());
  if (segments == 0) throw std::invalid_argument("pass_from_rollout: empty rollout");
  PassResult p;
  p.source = std::move(source);
  for (int i = 0; i < segments; ++i) {
    const int seg = i + 1;
    if (seg < config.min_segments) continue;
    bool halt = r.q[static_cast<std::size_t>(i)].halted;
    if (rng != nullptr && config.epsilon > 0.0 && rng->uniform01() < config.epsilon) halt = rng->uniform01() < 0.5;
    if (halt) {
      p.prediction = r.predictions[static_cast<std::size_t>(i)];
      p.halted = true;
      p.segments_used = seg;
      p.energy = energy(p.prediction);
      return p;
    }
  }
  p.prediction = r.predictions.back();
  p.halted = false;
  p.segments_used = segments;
  p.energy = energy(p.prediction);
  return p;
}

template <class T>
PassResult run_inference(const PuzzleGrid& x, const ModelParams<T>& params, const ModelConfig& config,
                         std::uint64_t rng_seed) {
  const auto r = rollout(std::span<const PuzzleGrid>(&x, 1), params, config);
  if (config.epsilon > 0.0) {
    Rng rng(derive_seed(rng_seed, "halt"));
    return pass_from_rollout(r.front(), config, "single", &rng);
  }
  return pass_from_rollout(r.front(), config, "single");
}

VoteOutcome majority_vote(std::span<const PassResult> results) {
  if (results.empty()) throw std::invalid_argument("majority_vote: empty pool");
  struct Tally {
    int votes = 0;
    int energy = 0;
    int first = 0;
  };
  std::map<std::string, Tally> tally;
  int halted = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const PassResult& r = results[i];
    if (!r.halted) continue;
    ++halted;
    auto [it, inserted] = tally.try_emplace(serialize_grid(r.prediction));
    if (inserted) {
      it->second.energy = r.energy;
      it->second.first = static_cast<int>(i);
    }
    ++it->second.votes;
  }
  VoteOutcome out;
  out.halted = halted;
  if (halted == 0) {
    out.prediction = results.front().prediction;
    out.fallback = true;
    out.votes = 0;
    out.winner = 0;
    return out;
  }
  const Tally* best = nullptr;
  for (const auto& [key, t] : tally) {
    if (best == nullptr || t.votes > best->votes || (t.votes == best->votes && t.energy < best->energy) ||
        (t.votes == best->votes && t.energy == best->energy && t.first < best->first)) {
      best = &t;
    }
  }
  out.prediction = results[static_cast<std::size_t>(best->first)].prediction;
  out.votes = best->votes;
  out.winner = best->first;
  return out;
}

template <class T>
std::vector<std::vector<PassResult>> pass_pools(std::span<const PuzzleGrid> inputs,
                                                std::span<const ModelParams<T>* const> members,
                                                std::span<const GridTransform> transforms,
                                                const ModelConfig& config) {
  if (members.empty()) throw std::invalid_argument("pass_pools: need at least one parameter set");
  if (transforms.empty()) throw std::invalid_argument("pass_pools: need at least one transform");
  std::vector<std::vector<PassResult>> pools(inputs.size());
  for (auto& p : pools) p.reserve(members.size() * transforms.size());
  for (std::size_t t = 0; t < transforms.size(); ++t) {
    const GridTransform& fwd = transforms[t];
    const GridTransform inv = invert_transform(fwd);
    std::vector<PuzzleGrid> mapped;
    mapped.reserve(inputs.size());
    for (const PuzzleGrid& x : inputs) mapped.push_back(apply_transform(fwd, x));
    for (std::size_t c = 0; c < members.size(); ++c) {
      const auto runs = rollout(std::span<const PuzzleGrid>(mapped), *members[c], config);
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        PassResult p = pass_from_rollout(runs[i], config, "t" + std::to_string(t) + "/c" + std::to_string(c));
        p.prediction = apply_transform(inv, p.prediction);
        pools[i].push_back(std::move(p));
      }
    }
  }
  return pools;
}

namespace {

template <class T>
VoteReport vote_single(const PuzzleGrid& x, std::span<const ModelParams<T>* const> members,
                       std::span<const GridTransform> transforms, const ModelConfig& config) {
  VoteReport report;
  report.pool = std::move(pass_pools(std::span<const PuzzleGrid>(&x, 1), members, transforms, config).front());
  report.outcome = majority_vote(report.pool);
  return report;
}

}  // namespace

template <class T>
VoteReport multipass_relabel(const PuzzleGrid& x, const ModelParams<T>& params, int k, const ModelConfig& config,
                             std::uint64_t rng_seed) {
  if (k < 1) throw std::invalid_argument("multipass_relabel: k must be >= 1");
  const std::vector<GridTransform> transforms = sample_relabel_set(k, x.box_size(), rng_seed);
  const ModelParams<T>* member = &params;
  return vote_single<T>(x, std::span<const ModelParams<T>* const>(&member, 1), transforms, config);
}

template <class T>
VoteReport ensemble_bootstrap(const PuzzleGrid& x, std::span<const ModelParams<T>* const> members,
                              const ModelConfig& config) {
  const GridTransform id = GridTransform::identity(x.box_size());
  return vote_single<T>(x, members, std::span<const GridTransform>(&id, 1), config);
}

template <class T>
VoteReport combined_augmented_inference(const PuzzleGrid& x, std::span<const ModelParams<T>* const> members,
                                        int k, const ModelConfig& config, std::uint64_t rng_seed) {
  if (k < 1) throw std::invalid_argument("combined_augmented_inference: k must be >= 1");
  const std::vector<GridTransform> transforms = sample_relabel_set(k, x.box_size(), rng_seed);
  return vote_single<T>(x, members, transforms, config);
}

#define HRM_INSTANTIATE_INFERENCE(T)                                                                        \
  template std::vector<SampleRollout<T>> rollout<T>(std::span<const PuzzleGrid>, const ModelParams<T>&,     \
                                                    const ModelConfig&, const RolloutOptions&,              \
                                                    std::span<const PuzzleGrid>, std::span<const Matrix<T>>); \
  template PassResult pass_from_rollout<T>(const SampleRollout<T>&, const ModelConfig&, std::string, Rng*); \
  template PassResult run_inference<T>(const PuzzleGrid&, const ModelParams<T>&, const ModelConfig&,        \
                                       std::uint64_t);                                                      \
  template std::vector<std::vector<PassResult>> pass_pools<T>(std::span<const PuzzleGrid>,                  \
                                                              std::span<const ModelParams<T>* const>,       \
                                                              std::span<const GridTransform>,               \
                                                              const ModelConfig&);                          \
  template VoteReport multipass_relabel<T>(const PuzzleGrid&, const ModelParams<T>&, int,                   \
                                           const ModelConfig&, std::uint64_t);                              \
  template VoteReport ensemble_bootstrap<T>(const PuzzleGrid&, std::span<const ModelParams<T>* const>,      \
                                            const ModelConfig&);                                            \
  template VoteReport combined_augmented_inference<T>(const PuzzleGrid&,                                    \
                                                      std::span<const ModelParams<T>* const>, int,          \
                                                      const ModelConfig&, std::uint64_t);

HRM_INSTANTIATE_INFERENCE(float)
HRM_INSTANTIATE_INFERENCE(double)
#undef HRM_INSTANTIATE_INFERENCE

std::vector<Checkpoint> load_checkpoints(std::span<const std::filesystem::path> paths) {
  std::vector<Checkpoint> out;
  out.reserve(paths.size());
  for (const auto& p : paths) out.push_back(load_checkpoint(p));
  return out;
}

std::vector<std::size_t> select_bootstrap(std::size_t checkpoints, std::size_t count) {
  if (checkpoints == 0 || count == 0) return {};
  const std::size_t first = checkpoints / 2;
  const std::size_t last = checkpoints - 1;
  const std::size_t available = last - first + 1;
  std::vector<std::size_t> out;
  if (available <= count) {
    for (std::size_t i = first; i <= last; ++i) out.push_back(i);
    return out;
  }
  if (count == 1) return {last};
  for (std::size_t j = count; j-- > 0;) {
    const double offset = static_cast<double>(j) * static_cast<double>(available - 1) / static_cast<double>(count - 1);
    out.push_back(last - static_cast<std::size_t>(std::lround(offset)));
  }
  return out;
}

namespace {

struct RowSpec {
  std::string label;
  int run = 0;  // 0 unmixed, 1 mixed
  bool all_members = false;
  bool all_transforms = false;
};

nlohmann::json pass_json(const PassResult& p) {
  return {{"source", p.source},
          {"prediction", serialize_grid(p.prediction)},
          {"halted", p.halted},
          {"segments_used", p.segments_used},
          {"energy", p.energy}};
}

}  // namespace

EvalReport evaluate_ablation(const Dataset& data, const RunCheckpoints& unmixed, const RunCheckpoints& mixed,
                             const ModelConfig& config, const EvalSettings& settings) {
  if (data.empty()) throw std::invalid_argument("evaluate_ablation: empty dataset");
  if (unmixed.members.empty() && mixed.members.empty()) {
    throw std::invalid_argument("evaluate_ablation: no checkpoints supplied");
  }
  if (settings.relabel_k < 1) throw std::invalid_argument("evaluate_ablation: relabel k must be >= 1");
  std::vector<PuzzleGrid> puzzles;
  for (const Sample& s : data) puzzles.push_back(s.puzzle);
  const std::vector<GridTransform> transforms =
      sample_relabel_set(settings.relabel_k, config.box_size, derive_seed(settings.seed, "relabel"));
  const int K = settings.relabel_k;

  const RunCheckpoints* runs[2] = {&unmixed, &mixed};
  std::vector<std::vector<PassResult>> pools[2];
  EvalReport report;
  report.detail["relabel_k"] = K;
  nlohmann::json transforms_json = nlohmann::json::array();
  for (const auto& t : transforms) transforms_json.push_back(transform_to_json(t));
  report.detail["transforms"] = transforms_json;

  std::vector<RowSpec> specs;
  for (int r = 0; r < 2; ++r) {
    const RunCheckpoints& run = *runs[r];
    if (run.members.empty()) continue;
    std::vector<const ModelParams<float>*> members;
    for (const auto& m : run.members) members.push_back(&m);
    pools[r] = pass_pools<float>(puzzles, members, transforms, config);

    const int C = static_cast<int>(members.size());
    nlohmann::json member_acc = nlohmann::json::array();
    for (int c = 0; c < C; ++c) {
      int correct = 0;
      for (std::size_t i = 0; i < data.size(); ++i) {
        correct += pools[r][i][static_cast<std::size_t>(c)].prediction == data[i].solution ? 1 : 0;
      }
      member_acc.push_back({{"name", c < static_cast<int>(run.names.size()) ? run.names[static_cast<std::size_t>(c)]
                                                                             : "member" + std::to_string(c)},
                            {"accuracy", static_cast<double>(correct) / static_cast<double>(data.size())}});
    }
    report.detail[r == 0 ? "unmixed_members" : "mixed_members"] = member_acc;

    const std::string prefix = r == 0 ? "" : "+Data Mixing";
    specs.push_back({r == 0 ? "Baseline" : "+Data Mixing", r, false, false});
    if (C > 1) specs.push_back({prefix + "+Bootstrap", r, true, false});
    if (K > 1) specs.push_back({prefix + "+Relabel", r, false, true});
    // The unmixed combined row only appears when there is no mixed run.
    if (C > 1 && K > 1 && (r == 1 || mixed.members.empty())) {
      specs.push_back({r == 1 ? "+All" : "+Bootstrap+Relabel", r, true, true});
    }
  }

  nlohmann::json samples = nlohmann::json::array();
  for (std::size_t i = 0; i < data.size(); ++i) {
    nlohmann::json sj;
    sj["index"] = i;
    sj["puzzle"] = serialize_grid(data[i].puzzle);
    sj["solution"] = serialize_grid(data[i].solution);
    if (settings.include_pools) {
      for (int r = 0; r < 2; ++r) {
        if (pools[r].empty()) continue;
        nlohmann::json pj = nlohmann::json::array();
        for (const PassResult& p : pools[r][i]) pj.push_back(pass_json(p));
        sj[r == 0 ? "unmixed_pool" : "mixed_pool"] = pj;
      }
    }
    samples.push_back(std::move(sj));
  }

  for (const RowSpec& spec : specs) {
    const int C = static_cast<int>(runs[spec.run]->members.size());
    AblationRow row;
    row.label = spec.label;
    row.total = static_cast<int>(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      std::vector<PassResult> pool;
      for (int t = 0; t < (spec.all_transforms ? K : 1); ++t) {
        for (int c = spec.all_members ? 0 : C - 1; c < C; ++c) {
          pool.push_back(pools[spec.run][i][static_cast<std::size_t>(t * C + c)]);
        }
      }
      row.pool_size = static_cast<int>(pool.size());
      const VoteOutcome v = majority_vote(pool);
      const bool correct = v.prediction == data[i].solution;
      row.correct += correct ? 1 : 0;
      row.fallbacks += v.fallback ? 1 : 0;
      samples[i]["rows"][spec.label] = {{"prediction", serialize_grid(v.prediction)},
                                        {"votes", v.votes},
                                        {"halted", v.halted},
                                        {"fallback", v.fallback},
                                        {"correct", correct}};
    }
    report.rows.push_back(row);
  }
  report.detail["samples"] = std::move(samples);
  return report;
}

nlohmann::json report_to_json(const EvalReport& report, const std::string& manifest_hash) {
  nlohmann::json rows = nlohmann::json::array();
  for (const AblationRow& r : report.rows) {
    rows.push_back({{"label", r.label},
                    {"exact_accuracy", r.accuracy()},
                    {"correct", r.correct},
                    {"total", r.total},
                    {"pool_size", r.pool_size},
                    {"fallbacks", r.fallbacks}});
  }
  nlohmann::json j = report.detail;
  j["rows"] = rows;
  j["manifest_hash"] = manifest_hash;
  return j;
}

std::string report_to_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "label,exact_accuracy,correct,total,pool_size,fallbacks\n";
  for (const AblationRow& r : report.rows) {
    out << '"' << r.label << "\"," << std::setprecision(6) << r.accuracy() << ',' << r.correct << ',' << r.total
        << ',' << r.pool_size << ',' << r.fallbacks << '\n';
  }
  return out.str();
}

std::string render_table(const EvalReport& report) {
  std::ostringstream out;
  out << std::left << std::setw(28) << "Method" << "Exact Accuracy\n";
  for (const AblationRow& r : report.rows) {
    std::ostringstream acc;
    acc << std::fixed << std::setprecision(1) << 100.0 * r.accuracy() << "% (" << r.correct << '/' << r.total << ')';
    out << std::left << std::setw(28) << r.label << acc.str() << '\n';
  }
  return out.str();
}

}  // namespace hrm
