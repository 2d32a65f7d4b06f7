#include "hrm/pipeline.hpp"

#include <stdexcept>

#include "hrm/checkpoint.hpp"
#include "hrm/rng.hpp"

namespace hrm {

nlohmann::json experiment_to_json(const ExperimentConfig& c) {
  nlohmann::json model = config_to_json(c.model);
  model.erase("seed");
  nlohmann::json train = train_config_to_json(c.train);
  train.erase("seed");
  return {{"seed", c.seed},
          {"model", model},
          {"train", train},
          {"data", {{"train_count", c.train_count}, {"eval_count", c.eval_count}, {"clues", c.clues}}},
          {"eval", {{"bootstrap_count", c.bootstrap_count}, {"relabel_k", c.relabel_k}}},
          {"train_unmixed", c.train_unmixed}};
}

ExperimentConfig experiment_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  c.seed = j.value("seed", c.seed);
  if (j.contains("model")) c.model = config_from_json(j.at("model"));
  if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
  if (j.contains("data")) {
    const auto& d = j.at("data");
    c.train_count = d.value("train_count", c.train_count);
    c.eval_count = d.value("eval_count", c.eval_count);
    c.clues = d.value("clues", c.clues);
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    c.bootstrap_count = e.value("bootstrap_count", c.bootstrap_count);
    c.relabel_k = e.value("relabel_k", c.relabel_k);
  }
  c.train_unmixed = j.value("train_unmixed", c.train_unmixed);
  return c;
}

std::uint64_t manifest_hash(const ExperimentConfig& c) {
  return fnv1a(experiment_to_json(c).dump());
}

StageSeeds stage_seeds(std::uint64_t root) {
  return {derive_seed(root, "dataset", 0), derive_seed(root, "dataset", 1), derive_seed(root, "mixing"),
          derive_seed(root, "train"),      derive_seed(root, "eval"),       derive_seed(root, "analysis")};
}

std::vector<double> segment_losses(const Dataset& data, const ModelParams<float>& params, const ModelConfig& config) {
  std::vector<PuzzleGrid> xs;
  std::vector<PuzzleGrid> ys;
  for (const Sample& s : data) {
    xs.push_back(s.puzzle);
    ys.push_back(s.solution);
  }
  const auto runs = rollout<float>(xs, params, config, {}, ys);
  std::vector<double> mean(static_cast<std::size_t>(config.max_segments), 0.0);
  for (const auto& r : runs) {
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += r.loss[i];
  }
  for (double& v : mean) v /= static_cast<double>(std::max<std::size_t>(1, runs.size()));
  return mean;
}

nlohmann::json run_summary_to_json(const RunSummary& r) {
  nlohmann::json modes;
  for (int m = 0; m < 4; ++m) modes[mode_name(static_cast<Mode>(m))] = r.mode_counts.empty() ? 0 : r.mode_counts[static_cast<std::size_t>(m)];
  return {{"name", r.name},
          {"checkpoints", r.checkpoints},
          {"segment_loss", r.segment_loss},
          {"final_segment_accuracy", r.final_accuracy},
          {"stability",
           {{"fully-revealed", stability_to_json(r.fully_revealed)},
            {"one-cell", stability_to_json(r.one_cell)},
            {"one-row", stability_to_json(r.one_row)}}},
          {"modes", modes}};
}

PipelineResult run_pipeline(const ExperimentConfig& input, const std::filesystem::path& out_dir,
                            const std::string& command_line, const Logger& log) {
  auto say = [&](const std::string& msg) {
    if (log) log(msg);
  };
  ExperimentConfig config = input;
  config.model.validate();
  config.train.validate();
  if (config.train_count < 1 || config.eval_count < 1) throw std::invalid_argument("pipeline: dataset sizes must be >= 1");
  if (config.bootstrap_count < 1 || config.relabel_k < 1) throw std::invalid_argument("pipeline: bootstrap_count and relabel_k must be >= 1");

  const std::uint64_t hash = manifest_hash(config);
  const std::string hash_hex = hex64(hash);
  const StageSeeds seeds = stage_seeds(config.seed);
  config.model.seed = derive_seed(config.seed, "init");
  config.train.seed = seeds.training;
  const int n = config.model.box_size;

  say("generating datasets");
  const Dataset base = generate_dataset(seeds.train_data, n, config.train_count, config.clues);
  const Dataset eval = generate_dataset(seeds.eval_data, n, config.eval_count, config.clues, &base);
  const Dataset mixed = build_mixed_dataset(base, config.train.mix_replicates, config.train.reveal, seeds.mixing);
  write_dataset(out_dir / "data" / "train.jsonl", base);
  write_dataset(out_dir / "data" / "train_mixed.jsonl", mixed);
  write_dataset(out_dir / "data" / "eval.jsonl", eval);

  std::vector<PuzzleGrid> solutions;
  for (const Sample& s : eval) solutions.push_back(s.solution);
  const auto full_probes = make_probes(solutions, ProbeKind::FullyRevealed, seeds.probes);
  const auto cell_probes = make_probes(solutions, ProbeKind::OneCell, seeds.probes);
  const auto row_probes = make_probes(solutions, ProbeKind::OneRow, seeds.probes);

  PipelineResult result;
  RunCheckpoints sets[2];
  struct Plan {
    std::string name;
    const Dataset* data;
    int slot;
  };
  std::vector<Plan> plans;
  if (config.train_unmixed) plans.push_back({"unmixed", &base, 0});
  plans.push_back({"mixed", &mixed, 1});

  nlohmann::json runs_json;
  for (const Plan& plan : plans) {
    say("training " + plan.name + " on " + std::to_string(plan.data->size()) + " samples");
    const auto dir = out_dir / "runs" / plan.name;
    const TrainingRun run = run_training(*plan.data, config.model, config.train, dir, hash, std::nullopt,
                                         [&](const nlohmann::json& line) { say(plan.name + " " + line.dump()); });
    RunSummary summary;
    summary.name = plan.name;
    for (const auto& p : run.checkpoints) {
      summary.checkpoints.push_back(std::filesystem::relative(p, out_dir).generic_string());
    }
    runs_json[plan.name] = summary.checkpoints;

    RunCheckpoints& set = sets[plan.slot];
    for (std::size_t idx : select_bootstrap(run.checkpoints.size(), static_cast<std::size_t>(config.bootstrap_count))) {
      set.members.push_back(load_checkpoint(run.checkpoints[idx]).params);
      set.names.push_back(summary.checkpoints[idx]);
    }

    say("analyzing " + plan.name);
    const ModelParams<float>& final_params = run.params;
    summary.segment_loss = segment_losses(eval, final_params, config.model);
    const ModelParams<double> final_double = final_params.cast<double>();
    std::vector<PuzzleGrid> xs;
    for (const Sample& s : eval) xs.push_back(s.puzzle);
    const auto traces = capture_traces(xs, solutions, final_double, config.model);
    summary.mode_counts.assign(4, 0);
    int correct = 0;
    for (const ReasoningTrace& t : traces) {
      ++summary.mode_counts[static_cast<std::size_t>(classify_mode(t).mode)];
      correct += t.exact.back() ? 1 : 0;
    }
    summary.final_accuracy = static_cast<double>(correct) / static_cast<double>(traces.size());
    summary.fully_revealed = stability_audit(final_double, full_probes, config.model);
    summary.one_cell = stability_audit(final_double, cell_probes, config.model);
    summary.one_row = stability_audit(final_double, row_probes, config.model);
    result.runs.push_back(std::move(summary));
  }

  say("evaluating ablations");
  EvalSettings settings;
  settings.relabel_k = config.relabel_k;
  settings.seed = seeds.evaluation;
  result.report = evaluate_ablation(eval, sets[0], sets[1], config.model, settings);
  write_text_file(out_dir / "report.json", report_to_json(result.report, hash_hex).dump(1) + "\n");
  write_text_file(out_dir / "report.csv", report_to_csv(result.report));

  nlohmann::json analysis;
  analysis["manifest_hash"] = hash_hex;
  analysis["runs"] = nlohmann::json::array();
  for (const RunSummary& r : result.runs) analysis["runs"].push_back(run_summary_to_json(r));
  write_text_file(out_dir / "analysis.json", analysis.dump(1) + "\n");

  nlohmann::json manifest;
  manifest["schema"] = kManifestSchema;
  manifest["tool_version"] = kToolVersion;
  manifest["manifest_hash"] = hash_hex;
  manifest["config"] = experiment_to_json(input);
  manifest["seeds"] = {{"train_data", seeds.train_data}, {"eval_data", seeds.eval_data}, {"mixing", seeds.mixing},
                       {"training", seeds.training},     {"evaluation", seeds.evaluation}, {"probes", seeds.probes},
                       {"init", config.model.seed}};
  manifest["datasets"] = {
      {"train", {{"path", "data/train.jsonl"}, {"hash", dataset_hash(base)}, {"count", base.size()}}},
      {"train_mixed", {{"path", "data/train_mixed.jsonl"}, {"hash", dataset_hash(mixed)}, {"count", mixed.size()}}},
      {"eval", {{"path", "data/eval.jsonl"}, {"hash", dataset_hash(eval)}, {"count", eval.size()}}}};
  manifest["checkpoints"] = runs_json;
  manifest["reports"] = {"report.json", "report.csv", "analysis.json"};
  manifest["command_line"] = command_line;
  write_text_file(out_dir / "manifest.json", manifest.dump(1) + "\n");
  result.manifest = std::move(manifest);
  return result;
}

}  // namespace hrm
