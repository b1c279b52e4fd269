#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tempo_meta/backbone.hpp"
#include "tempo_meta/evaluation.hpp"
#include "tempo_meta/meta_learner.hpp"
#include "tempo_meta/tkg_data.hpp"

namespace tempo_meta {

enum class RunMode { kMeta, kPlain, kFinetune };

std::string to_string(RunMode m);
RunMode parse_run_mode(const std::string& s);

// Validation adaptation (unrecorded) followed by test adaptation (recorded),
// starting from a trained meta state.
AdaptResult evaluate_meta(const TemporalKG& kg, MetaState state, const MetaConfig& config,
                          const Backbone& backbone);

struct ExperimentResult {
  RankLog test_ranks;
  std::vector<LossRecord> train_log;
};

// Train + evaluate end to end in one of the three modes.
ExperimentResult run_experiment(const TemporalKG& kg, const MetaConfig& config, RunMode mode,
                                const Backbone& backbone);

struct ReportOptions {
  std::optional<int> periods;
  std::optional<std::vector<std::uint32_t>> history_bounds;
  HistoryMode history_mode = HistoryMode::kAllPreceding;
  HistoryKey history_key = HistoryKey::kGold;
};

EvalReport make_report(const TemporalKG& kg, const RankLog& log, const ReportOptions& options);

// Entries with t >= changepoint.
RankLog entries_from(const RankLog& log, TimeIndex first_t);

double median(std::vector<double> values);

}  // namespace tempo_meta
