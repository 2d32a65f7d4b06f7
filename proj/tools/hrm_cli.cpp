// Command-line front end: dataset, train, eval, analyze and pipeline.
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hrm/analysis.hpp"
#include "hrm/checkpoint.hpp"
#include "hrm/dataset.hpp"
#include "hrm/errors.hpp"
#include "hrm/inference.hpp"
#include "hrm/pipeline.hpp"
#include "hrm/training.hpp"

namespace fs = std::filesystem;
using namespace hrm;

namespace {

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

fs::path default_out_dir() {
  const char* env = std::getenv("HRM_OUT_DIR");
  return env != nullptr && *env != '\0' ? fs::path(env) : fs::path("hrm_out");
}

fs::path resolve_out(const std::string& flag, const std::string& fallback_name) {
  if (!flag.empty()) return flag;
  return default_out_dir() / fallback_name;
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
  } else {
    write_text_file(path, text);
    std::cerr << "wrote " << path << "\n";
  }
}

std::string join_args(int argc, char** argv) {
  std::string out;
  for (int i = 0; i < argc; ++i) {
    if (i > 0) out += ' ';
    out += argv[i];
  }
  return out;
}

struct ModelFlags {
  int width = ModelConfig{}.width;
  int heads = ModelConfig{}.heads;
  int cycles = ModelConfig{}.n_cycles;
  int low_steps = ModelConfig{}.t_low;
  int max_segments = ModelConfig{}.max_segments;
  int min_segments = ModelConfig{}.min_segments;
  double epsilon = 0.0;
  std::uint64_t seed = 0;

  void add(CLI::App* app) {
    app->add_option("--width", width, "Hidden width")->capture_default_str();
    app->add_option("--heads", heads, "Attention heads")->capture_default_str();
    app->add_option("--cycles", cycles, "High-level cycles per segment")->capture_default_str();
    app->add_option("--low-steps", low_steps, "Low-level steps per cycle")->capture_default_str();
    app->add_option("--max-segments", max_segments, "Maximum segments")->capture_default_str();
    app->add_option("--min-segments", min_segments, "Minimum segments before halting")->capture_default_str();
    app->add_option("--epsilon", epsilon, "Halting exploration rate")->capture_default_str();
    app->add_option("--init-seed", seed, "Parameter initialization seed")->capture_default_str();
  }

  ModelConfig build(int box_size) const {
    ModelConfig c;
    c.box_size = box_size;
    c.width = width;
    c.heads = heads;
    c.n_cycles = cycles;
    c.t_low = low_steps;
    c.max_segments = max_segments;
    c.min_segments = min_segments;
    c.epsilon = epsilon;
    c.seed = seed;
    c.validate();
    return c;
  }
};

ModelParams<double> load_double(const std::string& path, ModelConfig& config) {
  Checkpoint ckpt = load_checkpoint(path);
  config = ckpt.config;
  config.epsilon = 0.0;
  return ckpt.params.cast<double>();
}

const Sample& pick(const Dataset& data, int index) {
  if (index < 0 || index >= static_cast<int>(data.size())) {
    throw UsageError("--index " + std::to_string(index) + " outside dataset of " + std::to_string(data.size()));
  }
  return data[static_cast<std::size_t>(index)];
}

// ---------------------------------------------------------------------------

struct DatasetCmd {
  int box_size = 2;
  int count = 100;
  int clues = 4;
  int replicates = 0;
  double reveal_min = 0.0;
  double reveal_max = 1.0;
  std::uint64_t seed = 0;
  std::string out;
  std::string exclude;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("dataset", "Generate a puzzle dataset (JSON lines)");
    app->add_option("--box-size", box_size, "Box size n (grid side n^2)")->capture_default_str()->check(CLI::Range(2, 5));
    app->add_option("--count", count, "Number of base puzzles")->capture_default_str();
    app->add_option("--clues", clues, "Target clue count")->capture_default_str();
    app->add_option("--mix-replicates", replicates, "Simplified replicates per puzzle")->capture_default_str();
    app->add_option("--reveal-min", reveal_min, "Lowest revealed fraction of blanks")->capture_default_str();
    app->add_option("--reveal-max", reveal_max, "Highest revealed fraction of blanks")->capture_default_str();
    app->add_option("--seed", seed, "Root seed")->capture_default_str();
    app->add_option("--exclude", exclude, "Dataset whose puzzles must not reappear");
    app->add_option("--out", out, "Output file (default $HRM_OUT_DIR/dataset.jsonl)");
    app->callback([this] { run(); });
  }

  void run() {
    if (count < 1) throw UsageError("--count must be >= 1");
    if (replicates < 0) throw UsageError("--mix-replicates must be >= 0");
    const fs::path path = resolve_out(out, "dataset.jsonl");
    std::optional<Dataset> ex;
    if (!exclude.empty()) ex = read_dataset(exclude);
    const Dataset base = generate_dataset(derive_seed(seed, "dataset"), box_size, count, clues, ex ? &*ex : nullptr);
    const Dataset data = build_mixed_dataset(base, replicates, {reveal_min, reveal_max}, derive_seed(seed, "mixing"));
    write_dataset(path, data);
    const nlohmann::json manifest = {{"schema", kManifestSchema},
                                     {"tool_version", kToolVersion},
                                     {"command", "dataset"},
                                     {"box_size", box_size},
                                     {"count", count},
                                     {"clues", clues},
                                     {"mix_replicates", replicates},
                                     {"reveal_min", reveal_min},
                                     {"reveal_max", reveal_max},
                                     {"seed", seed},
                                     {"samples", data.size()},
                                     {"hash", dataset_hash(data)}};
    write_text_file(path.string() + ".manifest.json", manifest.dump(1) + "\n");
    std::cout << "wrote " << data.size() << " samples (" << base.size() << " base, "
              << data.size() - base.size() << " replicates) to " << path.string() << "\n";
  }
};

struct TrainCmd {
  std::string data;
  std::string out;
  std::string resume;
  ModelFlags model;
  TrainConfig train;
  bool no_augment = false;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("train", "Train a model and write checkpoints");
    app->add_option("--data", data, "Training dataset")->required();
    app->add_option("--out", out, "Run directory (default $HRM_OUT_DIR/run)");
    app->add_option("--from-checkpoint", resume, "Resume from a checkpoint with optimizer state");
    app->add_option("--steps", train.total_steps, "Total optimizer steps")->capture_default_str();
    app->add_option("--batch-size", train.batch_size, "Samples per step")->capture_default_str();
    app->add_option("--lr", train.learning_rate, "Learning rate")->capture_default_str();
    app->add_option("--warmup", train.warmup_steps, "Linear warmup steps")->capture_default_str();
    app->add_option("--checkpoint-interval", train.checkpoint_interval, "Steps between checkpoints")->capture_default_str();
    app->add_option("--log-interval", train.log_interval, "Steps between log lines")->capture_default_str();
    app->add_option("--q-weight", train.q_loss_weight, "Weight of the halting loss")->capture_default_str();
    app->add_option("--seed", train.seed, "Shuffling and augmentation seed")->capture_default_str();
    app->add_flag("--no-augment", no_augment, "Disable random grid symmetries");
    model.add(app);
    app->callback([this] { run(); });
  }

  void run() {
    train.augment = !no_augment;
    train.validate();
    const Dataset dataset = read_dataset(data);
    if (dataset.empty()) throw UsageError("dataset " + data + " is empty");
    std::optional<Checkpoint> from;
    ModelConfig config;
    if (!resume.empty()) {
      from = load_checkpoint(resume);
      config = from->config;
    } else {
      config = model.build(dataset.front().puzzle.box_size());
    }
    const fs::path dir = resolve_out(out, "run");
    const TrainingRun run = run_training(dataset, config, train, dir, 0, from, [](const nlohmann::json& line) {
      std::ostringstream msg;
      msg << "step " << line.at("step").get<std::int64_t>() << " segment loss";
      for (double v : line.at("segment_loss")) msg << ' ' << v;
      msg << " exact " << line.at("train_exact_accuracy").get<double>();
      std::cerr << msg.str() << "\n";
    });
    for (const auto& p : run.checkpoints) std::cout << p.string() << "\n";
  }
};

struct EvalCmd {
  std::string data;
  std::vector<std::string> checkpoints;
  std::vector<std::string> mixed;
  int k = 9;
  std::uint64_t seed = 0;
  std::string out;
  std::string csv;
  bool no_pools = false;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("eval", "Exact accuracy with bootstrap/relabel ablations");
    app->add_option("--data", data, "Evaluation dataset")->required();
    app->add_option("--checkpoints", checkpoints, "Checkpoints of the run without data mixing (last = baseline)");
    app->add_option("--mixed-checkpoints", mixed, "Checkpoints of the data-mixed run (last = final)");
    app->add_option("--k", k, "Relabelings per puzzle (identity included)")->capture_default_str();
    app->add_option("--seed", seed, "Relabel sampling seed")->capture_default_str();
    app->add_option("--out", out, "Report JSON (default $HRM_OUT_DIR/report.json, '-' for stdout)");
    app->add_option("--csv", csv, "Also write the table as CSV");
    app->add_flag("--no-pools", no_pools, "Omit per-sample vote pools from the report");
    app->callback([this] { run(); });
  }

  void run() {
    if (checkpoints.empty() && mixed.empty()) throw UsageError("give --checkpoints and/or --mixed-checkpoints");
    if (k < 1) throw UsageError("--k must be >= 1");
    const Dataset dataset = read_dataset(data);
    if (dataset.empty()) throw UsageError("dataset " + data + " is empty");
    std::optional<ModelConfig> config;
    auto load = [&](const std::vector<std::string>& paths) {
      RunCheckpoints set;
      for (const auto& p : paths) {
        Checkpoint c = load_checkpoint(p);
        c.config.epsilon = 0.0;
        if (config && !(c.config == *config)) {
          if (c.config.box_size != config->box_size || c.config.width != config->width) {
            throw UsageError("checkpoint " + p + " has a different architecture");
          }
        }
        if (!config) config = c.config;
        set.members.push_back(std::move(c.params));
        set.names.push_back(p);
      }
      return set;
    };
    const RunCheckpoints plain = load(checkpoints);
    const RunCheckpoints mixed_set = load(mixed);
    EvalSettings settings;
    settings.relabel_k = k;
    settings.seed = seed;
    settings.include_pools = !no_pools;
    const EvalReport report = evaluate_ablation(dataset, plain, mixed_set, *config, settings);
    std::cerr << render_table(report);
    const std::string target = out.empty() ? (default_out_dir() / "report.json").string() : out;
    emit(report_to_json(report, "").dump(1) + "\n", target);
    if (!csv.empty()) emit(report_to_csv(report), csv);
  }
};

struct AnalyzeCmd {
  std::string checkpoint;
  std::string data;
  std::vector<int> indices{0};
  std::string out;
  std::string profile_out;
  int limit = -1;
  int resolution = 41;
  double span = 3.0;
  int iters = 20;
  bool joint = false;
  bool snapshots = false;
  std::string probe = "fully-revealed";
  std::uint64_t seed = 0;
  double fixed_tol = 1e-3;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("analyze", "Latent-trajectory analysis exports");
    app->require_subcommand(1);
    auto common = [this](CLI::App* sub, bool many) {
      sub->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
      sub->add_option("--data", data, "Dataset with puzzles and solutions")->required();
      if (many) {
        sub->add_option("--index", indices, "Sample indices")->capture_default_str();
      } else {
        sub->add_option("--index", indices, "Sample index")->expected(1)->capture_default_str();
      }
      sub->add_option("--out", out, "Output file ('-' for stdout)");
    };
    auto* trace = app->add_subcommand("trace", "Per-segment trace as JSON lines");
    common(trace, false);
    trace->add_flag("--snapshots", snapshots, "Include flattened latents");
    trace->callback([this] { run_trace(); });

    auto* pca = app->add_subcommand("pca", "Trajectories on the top two principal components (CSV)");
    common(pca, true);
    pca->add_flag("--joint", joint, "One basis across all selected samples instead of one per sample");
    pca->callback([this] { run_pca(); });

    auto* modes = app->add_subcommand("modes", "Histogram of reasoning modes (JSON)");
    modes->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    modes->add_option("--data", data, "Dataset")->required();
    modes->add_option("--limit", limit, "Only the first N samples");
    modes->add_option("--fixed-tol", fixed_tol, "Relative update tolerance for fixed points")->capture_default_str();
    modes->add_option("--out", out, "Output file ('-' for stdout)");
    modes->callback([this] { run_modes(); });

    auto* basin = app->add_subcommand("basin", "Segments-to-correct over a PCA-plane lattice (CSV)");
    common(basin, false);
    basin->add_option("--resolution", resolution, "Lattice points per axis")->capture_default_str();
    basin->add_option("--span", span, "Half-width in standard deviations")->capture_default_str();
    basin->callback([this] { run_basin(); });

    auto* landscape = app->add_subcommand("landscape", "Conflict energy over a PCA-plane lattice (CSV)");
    common(landscape, false);
    landscape->add_option("--resolution", resolution, "Lattice points per axis")->capture_default_str();
    landscape->add_option("--span", span, "Half-width in standard deviations")->capture_default_str();
    landscape->add_option("--profile-out", profile_out, "Energy profile between two attractors (CSV)");
    landscape->callback([this] { run_landscape(); });

    auto* stability = app->add_subcommand("stability", "Stability on nearly solved probes (JSON)");
    stability->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    stability->add_option("--data", data, "Dataset whose solutions seed the probes")->required();
    stability->add_option("--probe", probe, "fully-revealed, one-cell or one-row")->capture_default_str();
    stability->add_option("--limit", limit, "Only the first N samples");
    stability->add_option("--seed", seed, "Probe masking seed")->capture_default_str();
    stability->add_option("--out", out, "Output file ('-' for stdout)");
    stability->callback([this] { run_stability(); });

    auto* jac = app->add_subcommand("jacobian", "Spectral norm of the segment Jacobian at the final latent (JSON)");
    common(jac, false);
    jac->add_option("--iters", iters, "Power iterations")->capture_default_str();
    jac->callback([this] { run_jacobian(); });
  }

  Dataset load_data() const {
    Dataset d = read_dataset(data);
    if (d.empty()) throw UsageError("dataset " + data + " is empty");
    if (limit >= 0 && static_cast<std::size_t>(limit) < d.size()) d.erase(d.begin() + limit, d.end());
    return d;
  }

  std::string target(const std::string& name) const {
    return out.empty() ? (default_out_dir() / name).string() : out;
  }

  void run_trace() {
    ModelConfig config;
    const auto params = load_double(checkpoint, config);
    const Dataset d = load_data();
    const Sample& s = pick(d, indices.front());
    const ReasoningTrace t = capture_trace(s.puzzle, s.solution, params, config);
    emit(trace_to_jsonl(t, snapshots), target("trace.jsonl"));
  }

  void run_pca() {
    ModelConfig config;
    const auto params = load_double(checkpoint, config);
    const Dataset d = load_data();
    std::vector<PuzzleGrid> xs;
    std::vector<PuzzleGrid> ys;
    for (int i : indices) {
      xs.push_back(pick(d, i).puzzle);
      ys.push_back(pick(d, i).solution);
    }
    const auto traces = capture_traces(xs, ys, params, config);
    std::ostringstream csv;
    csv.precision(10);
    csv << "sample,segment,pc1,pc2,loss,energy,exact\n";
    auto rows = [&](const PcaResult& pca, std::size_t which, std::size_t slot) {
      const ReasoningTrace& t = traces[which];
      for (std::size_t s = 0; s < t.size(); ++s) {
        csv << indices[which] << ',' << s + 1 << ',' << pca.coords[slot](static_cast<Eigen::Index>(s), 0) << ','
            << pca.coords[slot](static_cast<Eigen::Index>(s), 1) << ',' << t.loss[s] << ',' << t.energy[s] << ','
            << (t.exact[s] ? 1 : 0) << '\n';
      }
    };
    if (joint) {
      const PcaResult pca = pca_project(traces, 2);
      for (std::size_t i = 0; i < traces.size(); ++i) rows(pca, i, i);
    } else {
      for (std::size_t i = 0; i < traces.size(); ++i) {
        const PcaResult pca = pca_project(std::span<const ReasoningTrace>(&traces[i], 1), 2);
        rows(pca, i, 0);
      }
    }
    emit(csv.str(), target("pca.csv"));
  }

  void run_modes() {
    ModelConfig config;
    const auto params = load_double(checkpoint, config);
    const Dataset d = load_data();
    std::vector<PuzzleGrid> xs;
    std::vector<PuzzleGrid> ys;
    for (const Sample& s : d) {
      xs.push_back(s.puzzle);
      ys.push_back(s.solution);
    }
    ModeThresholds th;
    th.fixed_point_tol = fixed_tol;
    nlohmann::json hist;
    for (int m = 0; m < 4; ++m) hist[mode_name(static_cast<Mode>(m))] = 0;
    nlohmann::json per = nlohmann::json::array();
    for (const ReasoningTrace& t : capture_traces(xs, ys, params, config)) {
      const ModeLabel label = classify_mode(t, th);
      hist[mode_name(label.mode)] = hist[mode_name(label.mode)].get<int>() + 1;
      per.push_back({{"mode", mode_name(label.mode)},
                     {"first_correct", label.first_correct},
                     {"plateau", label.plateau},
                     {"converged", label.converged}});
    }
    emit(nlohmann::json({{"histogram", hist}, {"samples", per}}).dump(1) + "\n", target("modes.json"));
  }

  PlaneGrid plane_for(const ReasoningTrace& t) const {
    return plane_from_pca(pca_project(std::span<const ReasoningTrace>(&t, 1), 2), resolution, span);
  }

  void run_basin() {
    ModelConfig config;
    const auto params = load_double(checkpoint, config);
    const Dataset d = load_data();
    const Sample& s = pick(d, indices.front());
    const ReasoningTrace t = capture_trace(s.puzzle, s.solution, params, config);
    const auto cells = basin_map(s.puzzle, s.solution, params, config, plane_for(t));
    emit(basin_to_csv(cells), target("basin.csv"));
  }

  void run_landscape() {
    ModelConfig config;
    const auto params = load_double(checkpoint, config);
    const Dataset d = load_data();
    const Sample& s = pick(d, indices.front());
    const ReasoningTrace t = capture_trace(s.puzzle, s.solution, params, config);
    const PlaneGrid plane = plane_for(t);
    // Rival attractors: end states of one successful and one failing lattice
    // start, when both exist.
    std::optional<Eigen::VectorXd> good;
    std::optional<Eigen::VectorXd> bad;
    if (!profile_out.empty()) {
      std::vector<Matrix<double>> starts;
      for (int iy = 0; iy < plane.resolution; ++iy) {
        for (int ix = 0; ix < plane.resolution; ++ix) {
          const Eigen::VectorXd z = plane.latent(ix, iy);
          starts.push_back(Eigen::Map<const Matrix<double>>(z.data(), config.seq_len(), config.width));
        }
      }
      const std::vector<PuzzleGrid> xs(starts.size(), s.puzzle);
      const std::vector<PuzzleGrid> ys(starts.size(), s.solution);
      for (const ReasoningTrace& r : capture_traces(xs, ys, params, config, starts)) {
        if (!good && r.exact.back()) good = r.snapshots.back();
        if (!bad && !r.exact.back()) bad = r.snapshots.back();
      }
      if (!good || !bad) std::cerr << "no rival attractors on this plane; profile skipped\n";
    }
    const bool profile = good && bad;
    const EnergyLandscape land = energy_landscape(plane, params, config, profile ? &*bad : nullptr,
                                                  profile ? &*good : nullptr);
    emit(landscape_to_csv(land), target("landscape.csv"));
    if (profile) emit(profile_to_csv(land), profile_out);
  }

  void run_stability() {
    ModelConfig config;
    const auto params = load_double(checkpoint, config);
    const ProbeKind kind = [&] {
      try {
        return probe_kind_from_name(probe);
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
    }();
    std::vector<PuzzleGrid> solutions;
    for (const Sample& s : load_data()) solutions.push_back(s.solution);
    const auto probes = make_probes(solutions, kind, seed);
    const StabilityReport report = stability_audit(params, probes, config);
    std::cerr << probe << ": " << report.stable << "/" << report.probes << " stable, " << report.never_correct
              << " never correct\n";
    emit(stability_to_json(report).dump(1) + "\n", target("stability.json"));
  }

  void run_jacobian() {
    ModelConfig config;
    const auto params = load_double(checkpoint, config);
    const Dataset d = load_data();
    const Sample& s = pick(d, indices.front());
    const ReasoningTrace t = capture_trace(s.puzzle, s.solution, params, config);
    const Matrix<double> z = Eigen::Map<const Matrix<double>>(t.snapshots.back().data(), config.seq_len(), config.width);
    const Matrix<double> x = embed_input(s.puzzle, params, config);
    const SpectralEstimate est = jacobian_probe(z, x, params, config, iters);
    const auto fp = detect_fixed_point(t);
    nlohmann::json j = {{"spectral_norm", est.norm},
                        {"history", est.history},
                        {"threshold", 1.0},
                        {"fixed_point", fp.has_value()}};
    if (fp) j["fixed_point_segment"] = fp->segment, j["fixed_point_true"] = fp->is_true;
    emit(j.dump(1) + "\n", target("jacobian.json"));
  }
};

struct PipelineCmd {
  std::string manifest;
  std::string write_default;
  std::string out;
  std::string command_line;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("pipeline", "Dataset, training and evaluation from one manifest");
    app->add_option("--manifest", manifest, "Experiment manifest (JSON)");
    app->add_option("--write-default", write_default, "Write the default manifest to this path and exit");
    app->add_option("--out", out, "Output directory (default $HRM_OUT_DIR/pipeline)");
    app->callback([this] { run(); });
  }

  void run() {
    if (!write_default.empty()) {
      write_text_file(write_default, experiment_to_json(ExperimentConfig{}).dump(1) + "\n");
      std::cout << "wrote " << write_default << "\n";
      return;
    }
    if (manifest.empty()) throw UsageError("pipeline needs --manifest (or --write-default)");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_text_file(manifest));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(manifest + ": " + e.what());
    }
    const ExperimentConfig config = experiment_from_json(j.contains("config") ? j.at("config") : j);
    const fs::path dir = resolve_out(out, "pipeline");
    const PipelineResult result =
        run_pipeline(config, dir, command_line, [](const std::string& msg) { std::cerr << msg << "\n"; });
    std::cerr << render_table(result.report);
    std::cout << (dir / "manifest.json").string() << "\n";
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical reasoning model on Sudoku: data, training, evaluation and analysis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);
  DatasetCmd dataset;
  TrainCmd train;
  EvalCmd eval;
  AnalyzeCmd analyze;
  PipelineCmd pipeline;
  pipeline.command_line = join_args(argc, argv);
  dataset.add(app);
  train.add(app);
  eval.add(app);
  analyze.add(app);
  pipeline.add(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const GridError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
