#include "tempo_meta/experiment.hpp"

#include <algorithm>

#include "tempo_meta/error.hpp"

namespace tempo_meta {

std::string to_string(RunMode m) {
  switch (m) {
    case RunMode::kMeta: return "meta";
    case RunMode::kPlain: return "plain";
    case RunMode::kFinetune: return "finetune";
  }
  return "meta";
}

RunMode parse_run_mode(const std::string& s) {
  if (s == "meta") return RunMode::kMeta;
  if (s == "plain") return RunMode::kPlain;
  if (s == "finetune") return RunMode::kFinetune;
  throw ParseError("unknown mode '" + s + "' (expected meta, plain, finetune)");
}

AdaptResult evaluate_meta(const TemporalKG& kg, MetaState state, const MetaConfig& config,
                          const Backbone& backbone) {
  const Split& split = kg.require_split();
  AdaptResult valid = adapt(std::move(state), make_tasks(kg, split.train_end + 1, split.valid_end),
                            config, backbone, false);
  AdaptResult test = adapt(std::move(valid.state),
                           make_tasks(kg, split.valid_end + 1, split.test_end), config, backbone,
                           true);
  test.log.insert(test.log.begin(), valid.log.begin(), valid.log.end());
  return test;
}

ExperimentResult run_experiment(const TemporalKG& kg, const MetaConfig& config, RunMode mode,
                                const Backbone& backbone) {
  if (mode == RunMode::kMeta) {
    TrainResult trained = train(kg, config, backbone);
    AdaptResult evaluated = evaluate_meta(kg, std::move(trained.state), config, backbone);
    return {std::move(*evaluated.ranks), std::move(trained.log)};
  }
  BaselineResult r = run_baseline(
      kg, config, backbone, mode == RunMode::kPlain ? BaselineMode::kPlain : BaselineMode::kFinetune);
  return {std::move(*r.ranks), {}};
}

EvalReport make_report(const TemporalKG& kg, const RankLog& log, const ReportOptions& options) {
  EvalReport report;
  report.overall = compute_metrics(log);
  if (options.periods) report.periods = bucket_by_period(log, *options.periods);
  if (options.history_bounds) {
    const HistoryIndex hist = build_history_index(kg, options.history_mode);
    report.history = bucket_by_history(log, hist, *options.history_bounds, options.history_key);
  }
  return report;
}

RankLog entries_from(const RankLog& log, TimeIndex first_t) {
  RankLog out;
  std::copy_if(log.begin(), log.end(), std::back_inserter(out),
               [first_t](const RankEntry& e) { return e.t >= first_t; });
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace tempo_meta
