// tempo_meta command-line entry point: train, eval, ablate, synth, gradcheck.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tempo_meta/backbone.hpp"
#include "tempo_meta/error.hpp"
#include "tempo_meta/evaluation.hpp"
#include "tempo_meta/experiment.hpp"
#include "tempo_meta/gradcheck.hpp"
#include "tempo_meta/meta_learner.hpp"
#include "tempo_meta/synthetic.hpp"
#include "tempo_meta/tkg_data.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace tempo_meta;

namespace {

constexpr const char* kToolVersion = TEMPO_META_VERSION;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("failed writing " + path.string());
}

// FNV-1a, 64-bit.
std::string fingerprint(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream s;
  s << "fnv1a64:" << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

SplitProportions parse_split(const std::string& text) {
  SplitProportions p{};
  std::stringstream s(text);
  std::string item;
  std::size_t i = 0;
  while (std::getline(s, item, ',')) {
    if (i == 3) throw ParseError("--split takes exactly three proportions");
    try {
      p[i++] = std::stod(item);
    } catch (const std::exception&) {
      throw ParseError("--split: not a number: '" + item + "'");
    }
  }
  if (i != 3) throw ParseError("--split takes exactly three proportions");
  return p;
}

std::vector<std::uint32_t> parse_bounds(const std::string& text) {
  std::vector<std::uint32_t> out;
  std::stringstream s(text);
  std::string item;
  while (std::getline(s, item, ',')) out.push_back(static_cast<std::uint32_t>(std::stoul(item)));
  return out;
}

std::string config_text(const MetaConfig& c) {
  std::ostringstream s;
  write_config(s, c);
  return s.str();
}

std::string joined_command(int argc, char** argv) {
  std::string cmd;
  for (int i = 0; i < argc; ++i) {
    if (i) cmd += ' ';
    cmd += argv[i];
  }
  return cmd;
}

struct DatasetOptions {
  std::string path;
  std::int64_t time_gap = 1;
  std::string split = "0.8,0.1,0.1";
  std::size_t num_entities = 0;
  std::size_t num_relations = 0;
};

void add_dataset_options(CLI::App* cmd, DatasetOptions& d, bool required) {
  auto* opt = cmd->add_option("--data,--train-file", d.path, "Quadruple file (s r o time)");
  if (required) opt->required();
  cmd->add_option("--time-gap", d.time_gap, "Raw time units per timestamp")->capture_default_str();
  cmd->add_option("--split", d.split, "Train,valid,test proportions")->capture_default_str();
  cmd->add_option("--num-entities", d.num_entities, "Minimum entity vocabulary size");
  cmd->add_option("--num-relations", d.num_relations, "Minimum relation vocabulary size");
}

struct LoadedData {
  TemporalKG kg;
  std::string fingerprint;
};

LoadedData load_dataset(const DatasetOptions& d) {
  const std::string bytes = read_file(d.path);
  std::istringstream in(bytes);
  const ParseResult parsed = parse_quadruples(in, d.time_gap);
  TemporalKG kg = build_temporal_kg(parsed.quads, d.num_entities, d.num_relations);
  return {split_by_time(kg, parse_split(d.split)), fingerprint(bytes)};
}

json dataset_json(const DatasetOptions& d, const LoadedData& data) {
  const Split& s = data.kg.require_split();
  return {{"path", d.path},
          {"fingerprint", data.fingerprint},
          {"time_gap", d.time_gap},
          {"split", d.split},
          {"num_entities", data.kg.num_entities()},
          {"num_relations", data.kg.num_relations()},
          {"num_timestamps", data.kg.num_timestamps()},
          {"train_end", s.train_end},
          {"valid_end", s.valid_end},
          {"facts", {{"train", data.kg.num_facts(1, s.train_end)},
                     {"valid", data.kg.num_facts(s.train_end + 1, s.valid_end)},
                     {"test", data.kg.num_facts(s.valid_end + 1, s.test_end)}}}};
}

void print_metrics(const std::string& label, const Metrics& m) {
  std::cout << std::fixed << std::setprecision(2) << label << "  MRR " << 100 * m.mrr
            << "  H@1 " << 100 * m.hits1 << "  H@3 " << 100 * m.hits3 << "  H@10 "
            << 100 * m.hits10 << "  (n=" << m.count << ")\n";
}

// ---- train ----

struct TrainArgs {
  DatasetOptions data;
  std::string config_path;
  std::string out;
  std::string mode = "meta";
};

int cmd_train(const TrainArgs& a, const std::string& command) {
  const MetaConfig config = a.config_path.empty() ? MetaConfig{} : load_config(a.config_path);
  config.validate();
  const RunMode mode = parse_run_mode(a.mode);
  if (mode == RunMode::kFinetune) throw Error("train: mode must be meta or plain");
  const LoadedData data = load_dataset(a.data);

  const fs::path out(a.out);
  fs::create_directories(out);
  const json manifest = {
      {"tool", "tempo_meta"},
      {"version", kToolVersion},
      {"command", command},
      {"subcommand", "train"},
      {"mode", a.mode},
      {"seed", config.seed},
      {"config", config_text(config)},
      {"dataset", dataset_json(a.data, data)},
      {"outputs", mode == RunMode::kMeta
                      ? json::array({"config.cfg", "theta.ckpt", "theta_prev.ckpt", "gates.bin",
                                     "loss_log.csv"})
                      : json::array({"config.cfg", "theta.ckpt"})}};
  write_file(out / "manifest.json", manifest.dump(2) + "\n");
  write_file(out / "config.cfg", config_text(config));

  const TrilinearBackbone backbone;
  const auto start = std::chrono::steady_clock::now();
  if (mode == RunMode::kMeta) {
    const TrainResult result = train(data.kg, config, backbone);
    save_checkpoint((out / "theta.ckpt").string(), result.state.history.prev);
    save_checkpoint((out / "theta_prev.ckpt").string(), result.state.history.prevprev);
    std::ostringstream gates;
    write_gates(gates, result.state.gates);
    write_file(out / "gates.bin", gates.str());
    std::ostringstream log;
    write_loss_log(log, result.log);
    write_file(out / "loss_log.csv", log.str());
    if (!result.log.empty()) {
      const LossRecord& last = result.log.back();
      std::cout << "final task t=" << last.t << " support loss " << last.support_loss
                << " query loss " << last.query_loss << '\n';
    }
  } else {
    save_checkpoint((out / "theta.ckpt").string(), train_plain(data.kg, config, backbone));
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << "trained " << a.mode << " model: " << data.kg.num_entities() << " entities, "
            << data.kg.num_relations() << " relations, " << config.epochs << " epochs in "
            << std::setprecision(3) << secs << "s -> " << out.string() << '\n';
  return 0;
}

// ---- eval ----

struct EvalArgs {
  std::string run;
  DatasetOptions data;
  int test_steps = 0;
  std::vector<std::string> buckets;
  int periods = 4;
  std::string history_bounds = "50,200,500";
  std::string history_key = "gold";
  std::string history_mode = "all";
  std::string mode;
  std::string out;
};

int cmd_eval(EvalArgs a, const std::string& command) {
  const fs::path run(a.run);
  if (!fs::exists(run / "theta.ckpt")) {
    throw Error("no checkpoint at " + (run / "theta.ckpt").string());
  }
  const json train_manifest = json::parse(read_file(run / "manifest.json"));
  const json& ds = train_manifest.at("dataset");
  if (a.data.path.empty()) {
    a.data.path = ds.at("path").get<std::string>();
    a.data.time_gap = ds.at("time_gap").get<std::int64_t>();
    a.data.split = ds.at("split").get<std::string>();
  }
  if (a.data.num_entities == 0) a.data.num_entities = ds.at("num_entities").get<std::size_t>();
  if (a.data.num_relations == 0) a.data.num_relations = ds.at("num_relations").get<std::size_t>();

  MetaConfig config = load_config((run / "config.cfg").string());
  if (a.test_steps > 0) config.test_steps = a.test_steps;
  config.validate();
  const RunMode mode =
      parse_run_mode(a.mode.empty() ? train_manifest.at("mode").get<std::string>() : a.mode);

  ReportOptions opts;
  for (const std::string& b : a.buckets) {
    if (b == "period") {
      opts.periods = a.periods;
    } else if (b == "history") {
      opts.history_bounds = parse_bounds(a.history_bounds);
    } else {
      throw ParseError("--buckets: expected period or history, got '" + b + "'");
    }
  }
  if (a.history_key == "gold") {
    opts.history_key = HistoryKey::kGold;
  } else if (a.history_key == "subject") {
    opts.history_key = HistoryKey::kAnchor;
  } else {
    throw ParseError("--history-key: expected gold or subject");
  }
  if (a.history_mode == "all") {
    opts.history_mode = HistoryMode::kAllPreceding;
  } else if (a.history_mode == "train") {
    opts.history_mode = HistoryMode::kTrainOnly;
  } else {
    throw ParseError("--history-mode: expected all or train");
  }

  const LoadedData data = load_dataset(a.data);
  if (ds.contains("fingerprint") && ds.at("fingerprint") != data.fingerprint) {
    std::cerr << "warning: dataset fingerprint differs from the training run\n";
  }
  ParamSet theta = load_checkpoint((run / "theta.ckpt").string());
  if (theta.num_entities() != data.kg.num_entities() ||
      theta.num_relations() != data.kg.num_relations() || theta.dim() != config.dim) {
    throw ShapeError("checkpoint dimensions do not match the dataset/config");
  }

  const TrilinearBackbone backbone;
  RankLog ranks;
  if (mode == RunMode::kMeta) {
    if (!fs::exists(run / "gates.bin") || !fs::exists(run / "theta_prev.ckpt")) {
      throw Error("meta evaluation needs gates.bin and theta_prev.ckpt in " + run.string());
    }
    std::istringstream gates_in(read_file(run / "gates.bin"));
    MetaState state{ParamHistory{std::move(theta), load_checkpoint((run / "theta_prev.ckpt").string())},
                    read_gates(gates_in)};
    ranks = std::move(*evaluate_meta(data.kg, std::move(state), config, backbone).ranks);
  } else {
    const Split& s = data.kg.require_split();
    const int steps = mode == RunMode::kPlain ? 0 : config.test_steps;
    BaselineResult valid = finetune_eval(std::move(theta),
                                         make_tasks(data.kg, s.train_end + 1, s.valid_end), steps,
                                         config, backbone, false);
    ranks = std::move(*finetune_eval(std::move(valid.params),
                                     make_tasks(data.kg, s.valid_end + 1, s.test_end), steps,
                                     config, backbone, true)
                           .ranks);
  }
  const EvalReport report = make_report(data.kg, ranks, opts);

  const fs::path out = a.out.empty() ? run / ("eval_" + to_string(mode)) : fs::path(a.out);
  fs::create_directories(out);
  json report_json = to_json(report);
  report_json["mode"] = to_string(mode);
  report_json["test_steps"] = config.test_steps;
  std::ostringstream csv;
  write_rank_log(csv, ranks);
  write_file(out / "ranks.csv", csv.str());
  write_file(out / "report.json", report_json.dump(2) + "\n");
  const json manifest = {{"tool", "tempo_meta"},
                         {"version", kToolVersion},
                         {"command", command},
                         {"subcommand", "eval"},
                         {"mode", to_string(mode)},
                         {"run", a.run},
                         {"config", config_text(config)},
                         {"dataset", dataset_json(a.data, data)},
                         {"outputs", json::array({"ranks.csv", "report.json"})}};
  write_file(out / "manifest.json", manifest.dump(2) + "\n");

  print_metrics("test " + to_string(mode) + " (K=" + std::to_string(config.test_steps) + ")",
                report.overall);
  for (const Bucket& b : report.periods) {
    if (b.metrics) print_metrics("  " + b.label, *b.metrics);
  }
  for (const Bucket& b : report.history) {
    if (b.metrics) {
      print_metrics("  history " + b.label + " entities=" + std::to_string(b.num_entities),
                    *b.metrics);
    } else {
      std::cout << "  history " << b.label << "  (empty)\n";
    }
  }
  std::cout << "wrote " << out.string() << '\n';
  return 0;
}

// ---- ablate ----

struct AblateArgs {
  DatasetOptions data;
  std::string config_path;
  std::string out;
  std::string seeds = "0";
};

int cmd_ablate(const AblateArgs& a, const std::string& command) {
  const MetaConfig base = a.config_path.empty() ? MetaConfig{} : load_config(a.config_path);
  base.validate();
  std::vector<std::uint64_t> seeds;
  {
    std::stringstream s(a.seeds);
    std::string item;
    while (std::getline(s, item, ',')) seeds.push_back(std::stoull(item));
  }
  if (seeds.empty()) throw ParseError("--seeds: need at least one seed");
  const LoadedData data = load_dataset(a.data);

  const fs::path out(a.out);
  fs::create_directories(out);
  const json manifest = {{"tool", "tempo_meta"},
                         {"version", kToolVersion},
                         {"command", command},
                         {"subcommand", "ablate"},
                         {"seeds", seeds},
                         {"config", config_text(base)},
                         {"dataset", dataset_json(a.data, data)},
                         {"outputs", json::array({"ablation.csv", "ablation.json"})}};
  write_file(out / "manifest.json", manifest.dump(2) + "\n");

  const TrilinearBackbone backbone;
  const std::pair<Ablation, const char*> variants[] = {
      {Ablation::kFull, "MetaTKG"}, {Ablation::kNoGate, "MetaTKG-G"},
      {Ablation::kSharedGate, "MetaTKG-C"}};
  std::ostringstream csv;
  csv << std::fixed << std::setprecision(2) << "variant,ablation,mrr,hits1,hits3,hits10\n";
  json table = json::array();
  std::cout << std::fixed << std::setprecision(2);
  std::cout << "variant      ablation      MRR    H@1    H@3    H@10  (median over "
            << seeds.size() << " seeds)\n";
  for (const auto& [ablation, name] : variants) {
    std::vector<double> mrr, h1, h3, h10;
    for (std::uint64_t seed : seeds) {
      MetaConfig config = base;
      config.ablation = ablation;
      config.seed = seed;
      const ExperimentResult r = run_experiment(data.kg, config, RunMode::kMeta, backbone);
      std::ostringstream log;
      write_loss_log(log, r.train_log);
      write_file(out / ("loss_log_" + to_string(ablation) + "_seed" + std::to_string(seed) + ".csv"),
                 log.str());
      const Metrics m = compute_metrics(r.test_ranks);
      mrr.push_back(m.mrr);
      h1.push_back(m.hits1);
      h3.push_back(m.hits3);
      h10.push_back(m.hits10);
    }
    const Metrics med{median(mrr), median(h1), median(h3), median(h10), 0};
    csv << name << ',' << to_string(ablation) << ',' << 100 * med.mrr << ',' << 100 * med.hits1
        << ',' << 100 * med.hits3 << ',' << 100 * med.hits10 << '\n';
    json row = to_json(med);
    row.erase("count");
    row["variant"] = name;
    row["ablation"] = to_string(ablation);
    table.push_back(row);
    std::cout << std::left << std::setw(13) << name << std::setw(12) << to_string(ablation)
              << std::right << std::setw(7) << 100 * med.mrr << std::setw(7) << 100 * med.hits1
              << std::setw(7) << 100 * med.hits3 << std::setw(7) << 100 * med.hits10 << '\n';
  }
  write_file(out / "ablation.csv", csv.str());
  write_file(out / "ablation.json", json{{"seeds", seeds}, {"rows", table}}.dump(2) + "\n");
  return 0;
}

// ---- synth ----

struct SynthArgs {
  RegimeSpec spec;
  double changepoint = 0.85;
  std::string out;
};

int cmd_synth(SynthArgs a) {
  a.spec.changepoint = changepoint_at(a.changepoint, a.spec.timestamps);
  a.spec.validate();
  const SyntheticDataset data = generate(a.spec);
  const fs::path out(a.out);
  fs::create_directories(out);
  write_file(out / "data.txt", format_quadruples(data.kg, 1));
  write_file(out / "rules.json", sidecar_json(data).dump(2) + "\n");
  std::cout << "wrote " << data.kg.num_facts() << " facts over " << data.kg.num_timestamps()
            << " timestamps (changepoint t=" << a.spec.changepoint << ", "
            << data.cold_entities.size() << " cold entities) -> " << out.string() << '\n';
  return 0;
}

// ---- gradcheck ----

int cmd_gradcheck(std::uint64_t seed, std::size_t instances, double l2) {
  constexpr double kTolerance = 1e-4;
  const auto start = std::chrono::steady_clock::now();
  const GradCheckSuiteResult r = run_gradcheck_suite(seed, instances, l2);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << std::scientific << std::setprecision(3);
  std::cout << "backbone gradient: max relative error " << r.backbone.max_rel_error << " over "
            << r.backbone.coordinates << " coordinates\n";
  std::cout << "gate gradient:     max relative error " << r.gates.max_rel_error << " over "
            << r.gates.coordinates << " coordinates\n";
  std::cout << std::fixed << std::setprecision(2) << r.instances << " instances in " << secs
            << "s\n";
  const bool ok = r.backbone.max_rel_error < kTolerance && r.gates.max_rel_error < kTolerance;
  std::cout << (ok ? "PASS" : "FAIL") << " (tolerance 1e-4)\n";
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal meta-learning for temporal knowledge graph entity prediction"};
  app.require_subcommand(1);
  const std::string command = joined_command(argc, argv);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Meta-train (or plain-train) a model");
  add_dataset_options(train_cmd, train_args.data, true);
  train_cmd->add_option("--config", train_args.config_path, "key=value config file");
  train_cmd->add_option("--out", train_args.out, "Run directory")->required();
  train_cmd->add_option("--mode", train_args.mode, "meta or plain")->capture_default_str();

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Adapt on valid, then rank the test span");
  eval_cmd->add_option("--run", eval_args.run, "Run directory written by train")->required();
  add_dataset_options(eval_cmd, eval_args.data, false);
  eval_cmd->add_option("--test-steps", eval_args.test_steps, "Support steps per task (K)");
  eval_cmd->add_option("--buckets", eval_args.buckets, "period and/or history");
  eval_cmd->add_option("--periods", eval_args.periods)->capture_default_str();
  eval_cmd->add_option("--history-bounds", eval_args.history_bounds)->capture_default_str();
  eval_cmd->add_option("--history-key", eval_args.history_key, "gold or subject")
      ->capture_default_str();
  eval_cmd->add_option("--history-mode", eval_args.history_mode, "all or train")
      ->capture_default_str();
  eval_cmd->add_option("--mode", eval_args.mode, "meta, plain or finetune (default: run mode)");
  eval_cmd->add_option("--out", eval_args.out, "Output directory (default: <run>/eval_<mode>)");

  AblateArgs ablate_args;
  auto* ablate_cmd = app.add_subcommand("ablate", "Compare full, no-gate and shared-gate");
  add_dataset_options(ablate_cmd, ablate_args.data, true);
  ablate_cmd->add_option("--config", ablate_args.config_path);
  ablate_cmd->add_option("--out", ablate_args.out)->required();
  ablate_cmd->add_option("--seeds", ablate_args.seeds, "Comma-separated seeds")
      ->capture_default_str();

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a regime-shift synthetic TKG");
  RegimeSpec& spec = synth_args.spec;
  synth_cmd->add_option("--entities", spec.num_entities)->capture_default_str();
  synth_cmd->add_option("--relations", spec.num_relations)->capture_default_str();
  synth_cmd->add_option("--groups", spec.num_groups)->capture_default_str();
  synth_cmd->add_option("--timestamps", spec.timestamps)->capture_default_str();
  synth_cmd->add_option("--changepoint", synth_args.changepoint, "Fraction of the timeline")
      ->capture_default_str();
  synth_cmd->add_option("--facts-per-snapshot", spec.facts_per_snapshot)->capture_default_str();
  synth_cmd->add_option("--noise", spec.noise_rate)->capture_default_str();
  synth_cmd->add_option("--cold-fraction", spec.cold_entity_fraction)->capture_default_str();
  synth_cmd->add_option("--skew", spec.popularity_skew)->capture_default_str();
  synth_cmd->add_option("--shift", spec.shift_fraction)->capture_default_str();
  synth_cmd->add_option("--seed", spec.seed)->capture_default_str();
  synth_cmd->add_option("--out", synth_args.out)->required();

  std::uint64_t gc_seed = 0;
  std::size_t gc_instances = 8;
  double gc_l2 = 1e-5;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of all gradients");
  gc_cmd->add_option("--seed", gc_seed)->capture_default_str();
  gc_cmd->add_option("--instances", gc_instances)->capture_default_str();
  gc_cmd->add_option("--l2", gc_l2)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) return cmd_train(train_args, command);
    if (*eval_cmd) return cmd_eval(eval_args, command);
    if (*ablate_cmd) return cmd_ablate(ablate_args, command);
    if (*synth_cmd) return cmd_synth(synth_args);
    if (*gc_cmd) return cmd_gradcheck(gc_seed, gc_instances, gc_l2);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
