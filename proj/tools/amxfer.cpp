// amxfer command-line entry point.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <opencv2/core/version.hpp>

#include "amxfer/amxfer.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::json;
using namespace amxfer;

namespace {

fs::path project_root() { return fs::path(AMXFER_DATA_DIR).parent_path(); }

/// As given when it exists, else under the output root, else relative to the
/// project root.
fs::path resolve_input(const std::string &p) {
  const fs::path path(p);
  if (path.is_absolute() || fs::exists(path))
    return path;
  if (const char *root = std::getenv("AMXFER_OUTPUT_ROOT"); root && *root && fs::exists(fs::path(root) / path))
    return fs::path(root) / path;
  const fs::path alt = project_root() / path;
  return fs::exists(alt) ? alt : path;
}

fs::path resolve_output(const std::string &p) {
  const fs::path path(p);
  const char *root = std::getenv("AMXFER_OUTPUT_ROOT");
  if (path.is_relative() && root && *root)
    return fs::path(root) / path;
  return path;
}

/// A synth run directory holds its frames under dataset/.
fs::path dataset_dir(const std::string &p) {
  const fs::path dir = resolve_input(p);
  if (!fs::exists(dir / "manifest.json") || fs::exists(dir / "dataset" / "manifest.json"))
    return dir / "dataset";
  return dir;
}

std::string read_bytes(const fs::path &p) {
  std::ifstream f(p, std::ios::binary);
  if (!f)
    throw IoError("cannot read " + p.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string input_hash(const fs::path &p) {
  if (fs::is_directory(p))
    return fs::exists(p / "manifest.json") ? nn::hex64(nn::fnv1a64(read_bytes(p / "manifest.json")))
                                           : std::string();
  return fs::exists(p) ? nn::hex64(nn::fnv1a64(read_bytes(p))) : std::string();
}

struct Options {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  bool force = false;
};

/// One command invocation: resolved config, output directory and manifest.
class Run {
public:
  Run(std::string command, const Options &opt, std::vector<std::string> argv)
      : command_(std::move(command)), argv_(std::move(argv)) {
    fs::path cfg_path;
    if (!opt.config.empty()) {
      cfg_path = resolve_input(opt.config);
      inputs_.push_back({{"role", "config"}, {"path", cfg_path.string()}, {"hash", input_hash(cfg_path)}});
    }
    cfg = load_config(cfg_path, opt.sets);
    hash = config_hash(cfg);
    out = resolve_output(opt.out.empty() ? (fs::path(cfg.paths.output_dir) / command_).string()
                                         : opt.out);
    if (fs::exists(out) && !fs::is_directory(out))
      throw ContractError("output path " + out.string() + " exists and is not a directory");
    if (fs::exists(out) && !fs::is_empty(out) && !opt.force)
      throw ContractError("output directory " + out.string() +
                          " is not empty; pass --force to overwrite");
    fs::create_directories(out);
  }

  void input(const std::string &role, const fs::path &p) {
    inputs_.push_back({{"role", role}, {"path", p.string()}, {"hash", input_hash(p)}});
  }

  /// Writes a JSON artifact with the resolved config echoed into it.
  void write(const std::string &name, Json doc) {
    if (doc.is_object())
      doc["run"] = {{"command", command_}, {"config_hash", hash}, {"config", to_json(cfg)}};
    write_json_file(doc, out / name);
    artifacts_.push_back(name);
  }

  void artifact(const std::string &name) { artifacts_.push_back(name); }

  void finish() {
    Json versions = {{"amxfer", kVersion},
                     {"config_schema", kConfigSchemaVersion},
                     {"checkpoint_format", nn::kCheckpointVersion},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                   std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"opencv", CV_VERSION},
                     {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
    Json manifest = {{"schema_version", 1},
                     {"kind", "amxfer.run_manifest"},
                     {"command", command_},
                     {"argv", argv_},
                     {"inputs", inputs_},
                     {"config", to_json(cfg)},
                     {"config_hash", hash},
                     {"seed", cfg.seed},
                     {"artifacts", artifacts_},
                     {"versions", versions}};
    write_json_file(manifest, out / "manifest.json");
  }

  ExperimentConfig cfg;
  std::string hash;
  fs::path out;

private:
  std::string command_;
  std::vector<std::string> argv_;
  Json inputs_ = Json::array();
  std::vector<std::string> artifacts_;
};

ReplicaSeeds seeds_of(const ExperimentConfig &cfg) { return ReplicaSeeds::from(cfg.seed); }

StructuredSets structure_dataset(Run &run, const std::string &path, const std::string &role) {
  const fs::path dir = dataset_dir(path);
  run.input(role, dir);
  const BuildDataset ds = read_dataset(dir);
  return structure_stream(ds, run.cfg.structure.inactive_threshold, run.cfg.structure.window,
                          run.cfg.structure.stride, ds.process_tag);
}

Json window_list(const std::vector<Concatenation> &cs) {
  Json a = Json::array();
  for (const auto &c : cs)
    a.push_back({{"start_index", c.start_index}, {"label", to_string(c.label)}});
  return a;
}

nn::TrainConfig train_config(const ExperimentConfig &cfg) { return cfg.training; }

plot::Series history_series(const std::string &label, const std::vector<double> &losses,
                            double x_start = 0) {
  return plot::indexed(label, losses, x_start);
}

// ---------------------------------------------------------------- commands

void cmd_analyze(Run &run, const std::vector<std::string> &sources_in, const std::string &target_in) {
  std::vector<std::string> source_paths = sources_in;
  if (source_paths.empty())
    source_paths.push_back(run.cfg.paths.source_context);
  const fs::path target_path = resolve_input(target_in.empty() ? run.cfg.paths.target_context : target_in);
  run.input("target_context", target_path);
  const KnowledgeContext target = load_context_file(target_path);
  std::vector<KnowledgeContext> sources;
  for (const auto &s : source_paths) {
    const fs::path p = resolve_input(s);
    run.input("source_context", p);
    sources.push_back(load_context_file(p));
  }
  // Descriptor errors surface before anything is written.
  for (const auto &s : sources)
    compare(s, target);

  const auto ranked = rank_sources(sources, target);
  const KnowledgeContext *best = nullptr;
  for (const auto &s : sources)
    if (s.context_id == ranked.front().source_id)
      best = &s;
  const TransferPlan plan = compare(*best, target);

  Json plan_doc = to_json(plan);
  plan_doc["schema_version"] = 1;
  plan_doc["kind"] = "amxfer.transfer_plan";
  plan_doc["source_id"] = best->context_id;
  plan_doc["target_id"] = target.context_id;
  run.write("transfer_plan.json", plan_doc);

  Json report = to_json(ranked.front());
  report["schema_version"] = 1;
  report["kind"] = "amxfer.pretransfer_report";
  run.write("pretransfer_report.json", report);
  if (sources.size() > 1) {
    Json list = Json::array();
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      Json r = to_json(ranked[i]);
      r["rank"] = i + 1;
      list.push_back(std::move(r));
    }
    run.write("ranking.json", {{"schema_version", 1}, {"kind", "amxfer.source_ranking"},
                               {"target_id", target.context_id}, {"ranking", list}});
  }

  const auto &r = ranked.front();
  std::ostringstream os;
  os << render_table(r, *best, target) << "\n"
     << "S = " << r.am_similarity + r.ml_similarity << "/" << r.kc_total << " = "
     << display2(r.similarity_index) << ", M = " << display2(r.maturity_factor)
     << ", A = " << r.availability_factor << ", score = " << display2(r.pre_transfer_score)
     << (r.significant ? " (significant)" : " (not significant)") << "\n"
     << "scenario: " << to_string(plan.scenario) << ", method: " << to_string(plan.method_family)
     << "\n";
  std::ofstream(run.out / "pretransfer_table.txt") << os.str();
  run.artifact("pretransfer_table.txt");
  std::cout << os.str();
  if (sources.size() > 1)
    for (std::size_t i = 0; i < ranked.size(); ++i)
      std::cout << i + 1 << ". " << ranked[i].source_id << " " << display2(ranked[i].pre_transfer_score)
                << "\n";
}

void cmd_synth(Run &run, const std::string &profile_name, int frames, std::optional<std::uint64_t> seed) {
  const auto [lpbf, ded] = default_profiles();
  const bool is_source = profile_name == lpbf.name || profile_name == "lpbf";
  if (!is_source && profile_name != ded.name && profile_name != "ded")
    throw ArgumentError("unknown profile '" + profile_name + "' (lpbf_like or ded_like)");
  const ProcessProfile &profile = is_source ? lpbf : ded;
  const int n = frames > 0 ? frames : (is_source ? run.cfg.synth.source_frames : run.cfg.synth.target_frames);
  const std::uint64_t s = seed ? *seed : (is_source ? seeds_of(run.cfg).source_stream : seeds_of(run.cfg).target_stream);
  const BuildDataset ds = generate_stream(profile, n, s);
  write_dataset(ds, run.out / "dataset");
  run.artifact("dataset/manifest.json");

  std::map<std::string, int> labels, kinds;
  for (const auto &f : ds.frames) {
    labels[std::string(to_string(f.label))]++;
    for (auto k : f.anomaly_kinds)
      kinds[std::string(to_string(k))]++;
  }
  run.write("synth_summary.json", {{"schema_version", 1},
                                   {"kind", "amxfer.synth_summary"},
                                   {"profile", profile.name},
                                   {"frames", n},
                                   {"stream_seed", s},
                                   {"labels", labels},
                                   {"anomaly_kinds", kinds}});
  std::cout << "synthesized " << n << " " << profile.name << " frames into " << (run.out / "dataset").string()
            << "\n";
}

void cmd_structure(Run &run, const std::string &dataset) {
  const auto sets = structure_dataset(run, dataset, "dataset");
  run.write("windows.json", {{"schema_version", 1},
                             {"kind", "amxfer.structured_windows"},
                             {"frames_in", sets.frames_in},
                             {"frames_kept", sets.frames_kept},
                             {"window", run.cfg.structure.window},
                             {"stride", run.cfg.structure.stride},
                             {"train_windows", sets.train.size()},
                             {"test_windows", sets.test.size()},
                             {"train", window_list(sets.train)},
                             {"test", window_list(sets.test)}});
  std::cout << sets.frames_kept << "/" << sets.frames_in << " frames kept, " << sets.train.size()
            << " normal and " << sets.test.size() << " anomalous windows\n";
}

void cmd_train(Run &run, const std::string &dataset) {
  const auto sets = structure_dataset(run, dataset, "dataset");
  const nn::TrainConfig tc = train_config(run.cfg);
  nn::Autoencoder<float> model(run.cfg.model, seeds_of(run.cfg).source_init);
  const auto losses = nn::train(model, sets.train, tc, "source", [](int epoch, double loss) {
    std::cout << "epoch " << epoch << " loss " << loss << "\n";
    return true;
  });
  const auto h = nn::save_checkpoint(model, tc, run.out / "model.ckpt");
  run.artifact("model.ckpt");
  Json accuracy;
  if (!sets.test.empty())
    accuracy = score_model(model, sets.train, sets.test, run.cfg.scoring).evaluation.accuracy_pct;
  run.write("train_report.json", {{"schema_version", 1},
                                  {"kind", "amxfer.train_report"},
                                  {"losses", losses},
                                  {"checkpoint_hash", nn::hex64(h)},
                                  {"parameter_count", model.parameter_count()},
                                  {"train_windows", sets.train.size()},
                                  {"test_windows", sets.test.size()},
                                  {"accuracy_pct", accuracy}});
  plot::Chart c;
  c.title = "training loss";
  c.x_label = "epoch";
  c.y_label = "mse";
  c.log_y = true;
  c.series.push_back(history_series("train", losses));
  plot::save(c, run.out / "loss.png");
  run.artifact("loss.png");
  std::cout << "checkpoint " << nn::hex64(h) << "\n";
}

void cmd_transfer(Run &run, const std::string &checkpoint, const std::string &dataset,
                  std::vector<std::string> strategies) {
  const fs::path ckpt = resolve_input(checkpoint);
  run.input("checkpoint", ckpt);
  auto loaded = nn::load_checkpoint(ckpt);
  const auto sets = structure_dataset(run, dataset, "target_dataset");
  if (strategies.empty())
    strategies = run.cfg.transfer.strategies;
  TransferConfig tc = run.cfg.transfer_config();
  tc.train = train_config(run.cfg);

  std::optional<BaselineResult> scratch;
  if (tc.run_scratch) {
    scratch = train_scratch_baseline<float>(loaded.model.architecture(), sets.train, sets.test,
                                            run.cfg.transfer.budget, tc);
    std::cout << "scratch: best loss " << scratch->best_loss << ", accuracy " << scratch->accuracy_pct
              << "\n";
  }
  plot::Chart c;
  c.title = "target fine-tuning loss";
  c.x_label = "epoch";
  c.y_label = "mse";
  c.log_y = true;
  if (scratch)
    c.series.push_back(history_series("scratch", scratch->losses));

  Json summary = Json::array();
  for (const auto &name : strategies) {
    const auto strategy = make_strategy(name, run.cfg.transfer.budget);
    nn::Autoencoder<float> tuned = loaded.model;
    auto rep = run_transfer(loaded.model, sets.train, sets.test, strategy, tc,
                            scratch ? &*scratch : nullptr, &tuned);
    const auto h = nn::save_checkpoint(tuned, tc.train, run.out / (name + ".ckpt"));
    run.artifact(name + ".ckpt");
    Json doc = to_json(rep);
    doc["schema_version"] = 1;
    doc["kind"] = "amxfer.transfer_run";
    doc["checkpoint_hash"] = nn::hex64(h);
    Json verdict;
    if (rep.scratch) {
      const Verdict v = post_transfer_validate(rep, run.cfg.transfer.verdict_margin);
      verdict = std::string(to_string(v));
      append_knowledge_record(run.out / "knowledge_record.json", rep, v,
                              {{"checkpoint", ckpt.string()}, {"config_hash", run.hash}});
    }
    doc["verdict"] = verdict;
    run.write("transfer_" + name + ".json", doc);

    std::vector<double> all;
    for (const auto &ph : rep.phases) {
      if (!all.empty() && ph.phase.group != Trainable::all)
        c.vlines.push_back(static_cast<double>(all.size()) - 0.5);
      all.insert(all.end(), ph.losses.begin(), ph.losses.end());
    }
    c.series.push_back(history_series(name, all));
    summary.push_back({{"strategy", name},
                       {"final_loss", rep.final_loss},
                       {"pre_accuracy_pct", rep.pre_accuracy_pct},
                       {"post_accuracy_pct", rep.post_accuracy_pct},
                       {"improved", rep.improved},
                       {"loss_below_scratch", rep.loss_below_scratch},
                       {"verdict", verdict},
                       {"checkpoint_hash", nn::hex64(h)}});
    std::cout << name << ": final loss " << rep.final_loss << ", accuracy " << rep.pre_accuracy_pct
              << " -> " << rep.post_accuracy_pct << "\n";
  }
  if (fs::exists(run.out / "knowledge_record.json"))
    run.artifact("knowledge_record.json");
  Json scratch_doc;
  if (scratch)
    scratch_doc = {{"losses", scratch->losses},
                   {"best_loss", scratch->best_loss},
                   {"accuracy_pct", scratch->accuracy_pct}};
  run.write("transfer_summary.json", {{"schema_version", 1},
                                      {"kind", "amxfer.transfer_summary"},
                                      {"scratch", scratch_doc},
                                      {"strategies", summary}});
  plot::save(c, run.out / "transfer_loss.png");
  run.artifact("transfer_loss.png");
}

void cmd_evaluate(Run &run, const std::string &checkpoint, const std::string &dataset,
                  const std::string &test_dataset) {
  const fs::path ckpt = resolve_input(checkpoint);
  run.input("checkpoint", ckpt);
  auto loaded = nn::load_checkpoint(ckpt);
  const auto calib = structure_dataset(run, dataset, "calibration_dataset");
  std::vector<Concatenation> test = calib.test;
  if (!test_dataset.empty()) {
    const auto t = structure_dataset(run, test_dataset, "test_dataset");
    test = t.train;
    test.insert(test.end(), t.test.begin(), t.test.end());
  }
  const auto rep = score_model(loaded.model, calib.train, test, run.cfg.scoring);
  Json doc = to_json(rep);
  doc["checkpoint"] = ckpt.string();
  run.write("regularity_report.json", doc);
  plot::save(plot::regularity_chart(rep, "regularity on test windows"), run.out / "regularity.png");
  run.artifact("regularity.png");
  std::cout << "threshold " << rep.threshold << ", detected " << rep.evaluation.detected_anomalies << "/"
            << rep.evaluation.anomalies << " anomalies (" << rep.evaluation.accuracy_pct << "%)\n";
}

void replica_plot(const ReplicaRun &r, const fs::path &path) {
  plot::Chart c;
  c.title = "seed " + std::to_string(r.seed) + ": target loss";
  c.x_label = "epoch";
  c.y_label = "mse";
  c.log_y = true;
  c.series.push_back(history_series("scratch", r.scratch.losses));
  for (const auto &run : r.runs) {
    std::vector<double> all;
    for (const auto &ph : run.phases)
      all.insert(all.end(), ph.losses.begin(), ph.losses.end());
    c.series.push_back(history_series(run.strategy.name, all));
  }
  plot::save(c, path);
}

void cmd_replicate(Run &run, std::vector<std::uint64_t> seeds) {
  if (seeds.empty())
    seeds = run.cfg.replica_seeds;
  Json per_seed = Json::array();
  int passing = 0;
  for (auto s : seeds) {
    const ReplicaRun r = run_replica(run.cfg.recipe(), s, &std::cout);
    const std::string stem = "replica_seed" + std::to_string(s);
    Json doc = to_json(r);
    doc["schema_version"] = 1;
    doc["kind"] = "amxfer.replica_run";
    run.write(stem + ".json", doc);
    replica_plot(r, run.out / (stem + "_loss.png"));
    run.artifact(stem + "_loss.png");
    passing += r.all_properties();
    per_seed.push_back({{"seed", s},
                        {"loss_below_scratch", r.loss_property()},
                        {"accuracy_at_least_scratch", r.accuracy_property()},
                        {"all_improved", r.improved_property()},
                        {"scratch_accuracy_pct", r.scratch.accuracy_pct},
                        {"source_checkpoint_hash", r.source_checkpoint_hash},
                        {"checkpoint_hashes", r.transferred_checkpoint_hashes}});
  }
  run.write("replica.json", {{"schema_version", 1},
                             {"kind", "amxfer.replica_summary"},
                             {"seeds", per_seed},
                             {"seeds_with_all_properties", passing}});
  std::cout << passing << "/" << seeds.size() << " seeds hold all properties\n";
}

std::string fmt(const Json &v) {
  if (v.is_number_float()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v.get<double>());
    return buf;
  }
  return v.is_string() ? v.get<std::string>() : v.dump();
}

void cmd_report(Run &run, const std::vector<std::string> &dirs) {
  std::ostringstream md;
  Json runs = Json::array();
  md << "# amxfer report\n";
  for (const auto &d : dirs) {
    const fs::path dir = resolve_input(d);
    run.input("run", dir);
    const Json manifest = read_json_file(dir / "manifest.json");
    Json entry = {{"dir", dir.string()}, {"command", manifest.value("command", "")},
                  {"config_hash", manifest.value("config_hash", "")}};
    md << "\n## " << dir.filename().string() << " (" << manifest.value("command", "?") << ", config "
       << manifest.value("config_hash", "?") << ")\n\n";
    if (fs::exists(dir / "pretransfer_report.json")) {
      const auto r = read_json_file(dir / "pretransfer_report.json");
      md << "pre-transfer score " << r["display"]["pre_transfer_score"].get<std::string>() << " ("
         << r["source_id"].get<std::string>() << " -> " << r["target_id"].get<std::string>() << ")\n";
      entry["pre_transfer_score"] = r["pre_transfer_score"];
    }
    if (fs::exists(dir / "transfer_plan.json")) {
      const auto p = read_json_file(dir / "transfer_plan.json");
      md << "scenario " << p["scenario"].get<std::string>() << ", method "
         << p["method_family"].get<std::string>() << "\n";
      entry["scenario"] = p["scenario"];
    }
    if (fs::exists(dir / "train_report.json")) {
      const auto r = read_json_file(dir / "train_report.json");
      md << "final train loss " << fmt(r["losses"].back()) << ", checkpoint "
         << r["checkpoint_hash"].get<std::string>() << "\n";
      entry["train"] = {{"final_loss", r["losses"].back()}, {"checkpoint_hash", r["checkpoint_hash"]}};
    }
    if (fs::exists(dir / "transfer_summary.json")) {
      const auto s = read_json_file(dir / "transfer_summary.json");
      md << "| strategy | final loss | accuracy before | accuracy after | improved | verdict |\n"
         << "|---|---|---|---|---|---|\n";
      if (!s["scratch"].is_null())
        md << "| scratch | " << fmt(s["scratch"]["best_loss"]) << " (best) | | "
           << fmt(s["scratch"]["accuracy_pct"]) << " | | |\n";
      for (const auto &r : s["strategies"])
        md << "| " << fmt(r["strategy"]) << " | " << fmt(r["final_loss"]) << " | "
           << fmt(r["pre_accuracy_pct"]) << " | " << fmt(r["post_accuracy_pct"]) << " | "
           << fmt(r["improved"]) << " | " << fmt(r["verdict"]) << " |\n";
      entry["transfer"] = s["strategies"];
    }
    if (fs::exists(dir / "regularity_report.json")) {
      const auto r = read_json_file(dir / "regularity_report.json");
      md << "threshold " << fmt(r["threshold"]) << " (" << fmt(r["threshold_rule"]) << "), detected "
         << fmt(r["detected_anomalies"]) << "/" << fmt(r["anomalies"]) << " = "
         << fmt(r["accuracy_pct"]) << "%\n";
      entry["accuracy_pct"] = r["accuracy_pct"];
    }
    if (fs::exists(dir / "replica.json")) {
      const auto r = read_json_file(dir / "replica.json");
      md << "| seed | loss below scratch | accuracy >= scratch | all improved |\n|---|---|---|---|\n";
      for (const auto &s : r["seeds"])
        md << "| " << fmt(s["seed"]) << " | " << fmt(s["loss_below_scratch"]) << " | "
           << fmt(s["accuracy_at_least_scratch"]) << " | " << fmt(s["all_improved"]) << " |\n";
      md << "\nseeds holding all properties: " << fmt(r["seeds_with_all_properties"]) << "/"
         << r["seeds"].size() << "\n";
      entry["replica"] = r["seeds"];
    }
    runs.push_back(std::move(entry));
  }
  std::ofstream(run.out / "report.md") << md.str();
  run.artifact("report.md");
  run.write("report.json", {{"schema_version", 1}, {"kind", "amxfer.report"}, {"runs", runs}});
  std::cout << md.str();
}

int fail(const std::string &kind, const std::string &message, int code) {
  std::cerr << Json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << "\n";
  return code;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Knowledge-transfer toolkit for melt-pool anomaly detection"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  Options opt;
  auto common = [&](CLI::App *sub) {
    sub->add_option("--config", opt.config, "experiment config JSON");
    sub->add_option("--set", opt.sets, "override, e.g. training.epochs=5")->take_all();
    sub->add_option("--out", opt.out, "output directory (relative paths go under $AMXFER_OUTPUT_ROOT)");
    sub->add_flag("--force", opt.force, "write into a non-empty output directory");
  };

  std::vector<std::string> sources, strategies, run_dirs;
  std::vector<std::uint64_t> seeds;
  std::string target, dataset, test_dataset, checkpoint, profile = "lpbf_like";
  int frames = 0;
  std::optional<std::uint64_t> synth_seed;

  auto *analyze = app.add_subcommand("analyze", "pre-transfer score and transfer plan");
  common(analyze);
  analyze->add_option("--source", sources, "source context JSON (repeat to rank several)");
  analyze->add_option("--target", target, "target context JSON");

  auto *synth = app.add_subcommand("synth", "generate a synthetic melt-pool stream");
  common(synth);
  synth->add_option("--profile", profile, "lpbf_like or ded_like");
  synth->add_option("--frames", frames, "frame count (default from config)");
  synth->add_option("--seed", synth_seed, "stream seed (default derived from config seed)");

  auto *structure = app.add_subcommand("structure", "filter, window and split a dataset");
  common(structure);
  structure->add_option("--dataset", dataset, "dataset directory")->required();

  auto *train = app.add_subcommand("train", "train the autoencoder on normal windows");
  common(train);
  train->add_option("--dataset", dataset, "dataset directory")->required();

  auto *transfer = app.add_subcommand("transfer", "fine-tune a source checkpoint on target data");
  common(transfer);
  transfer->add_option("--checkpoint", checkpoint, "source checkpoint")->required();
  transfer->add_option("--dataset", dataset, "target dataset directory")->required();
  transfer->add_option("--strategy", strategies, "strategy name (repeatable)");

  auto *evaluate = app.add_subcommand("evaluate", "score windows and detect anomalies");
  common(evaluate);
  evaluate->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  evaluate->add_option("--dataset", dataset, "dataset whose normal windows set the threshold")->required();
  evaluate->add_option("--test-dataset", test_dataset, "dataset to score (default: anomalous windows of --dataset)");

  auto *report = app.add_subcommand("report", "summarize run directories");
  common(report);
  report->add_option("--run", run_dirs, "run directory (repeatable)")->required();

  auto *replicate = app.add_subcommand("replicate", "desk-scale cross-process replica");
  common(replicate);
  replicate->add_option("--seed", seeds, "seed (repeatable; default from config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    return fail("usage", e.what(), 2);
  }

  try {
    auto *sub = app.get_subcommands().front();
    Run run(sub->get_name(), opt, std::vector<std::string>(argv, argv + argc));
    if (sub == analyze)
      cmd_analyze(run, sources, target);
    else if (sub == synth)
      cmd_synth(run, profile, frames, synth_seed);
    else if (sub == structure)
      cmd_structure(run, dataset);
    else if (sub == train)
      cmd_train(run, dataset);
    else if (sub == transfer)
      cmd_transfer(run, checkpoint, dataset, strategies);
    else if (sub == evaluate)
      cmd_evaluate(run, checkpoint, dataset, test_dataset);
    else if (sub == report)
      cmd_report(run, run_dirs);
    else if (sub == replicate)
      cmd_replicate(run, seeds);
    run.finish();
  } catch (const Error &e) {
    const bool data_error = e.kind() == "io" || e.kind() == "ingest";
    return fail(e.kind(), e.what(), data_error ? 1 : 2);
  } catch (const std::exception &e) {
    return fail("internal", e.what(), 1);
  }
  return 0;
}
