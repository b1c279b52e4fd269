#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tempo_meta/backbone.hpp"
#include "tempo_meta/evaluation.hpp"
#include "tempo_meta/tkg_data.hpp"

namespace tempo_meta {

enum class Ablation { kFull, kNoGate, kSharedGate };
enum class OptimizerKind { kSgd, kAdam };

std::string to_string(Ablation a);
Ablation parse_ablation(const std::string& s);

struct MetaConfig {
  double alpha = 0.001;  // support (inner) step size
  double beta = 0.001;   // query (outer) step size
  double l2 = 1e-5;
  // Gate step size; alpha when unset.
  std::optional<double> gate_lr;
  std::size_t dim = 32;
  int epochs = 1;
  std::uint64_t seed = 0;
  int test_steps = 1;
  Ablation ablation = Ablation::kFull;
  bool gate_update_in_eval = true;
  // Applies to the query step (and plain baseline training) only.
  OptimizerKind optimizer = OptimizerKind::kSgd;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  double effective_gate_lr() const { return gate_lr.value_or(alpha); }
  void validate() const;

  friend bool operator==(const MetaConfig&, const MetaConfig&) = default;
};

// Flat key=value lines; '#' starts a comment. Unknown keys are an error.
MetaConfig parse_config(std::istream& in);
MetaConfig load_config(const std::string& path);
void write_config(std::ostream& out, const MetaConfig& config);

struct MetaTask {
  TimeIndex t = 0;
  const Snapshot* support = nullptr;  // G_{t-1}
  const Snapshot* query = nullptr;    // G_t
};

// One task per t in [first, last]; first must be >= 2.
std::vector<MetaTask> make_tasks(const TemporalKG& kg, TimeIndex first, TimeIndex last);

// Raw gate values; squashed by the logistic function when applied. The
// entity and relation gates hold one entry per embedding dimension and are
// broadcast across rows.
struct GateSet {
  Vector ent;
  Vector rel;
  Vector other;

  static GateSet zeros(std::size_t dim);
  std::size_t dim() const { return static_cast<std::size_t>(ent.size()); }

  friend bool operator==(const GateSet& a, const GateSet& b) {
    return a.ent == b.ent && a.rel == b.rel && a.other == b.other;
  }
};

// "TMGS" | u32 version=1 | u64 d | f64[d] ent | f64[d] rel | f64[d] other
void write_gates(std::ostream& out, const GateSet& gates);
GateSet read_gates(std::istream& in);

struct ParamHistory {
  ParamSet prev;      // theta_{t-1}
  ParamSet prevprev;  // theta_{t-2}

  static ParamHistory bootstrap(const ParamSet& theta);
  // prevprev <- prev, prev <- theta_t
  void push(ParamSet theta_t);
};

double logistic(double x);

// theta^s = sigmoid(g) * theta_{t-1} + (1 - sigmoid(g)) * theta_{t-2}, per component.
ParamSet init_support_params(const ParamHistory& hist, const GateSet& gates);

// theta^q = theta_{t-1}, by value.
ParamSet init_query_params(const ParamHistory& hist);

// Backbone loss plus 0.5 * l2 * ||theta||^2 over the parameters the snapshot
// touches: all entity rows (every entity is a softmax candidate), the forward
// and inverse rows of relations present in the snapshot, and `other`.
LossGrad regularized_grad(const Backbone& backbone, const ParamSet& params,
                          const Snapshot& snap, double l2);
double regularized_loss(const Backbone& backbone, const ParamSet& params,
                        const Snapshot& snap, double l2);

struct InnerResult {
  ParamSet adapted;  // theta'_t
  GradSet support_grad;
  double loss = 0.0;
};

InnerResult inner_update(const ParamSet& theta_s, const Snapshot& support, double alpha,
                         double l2, const Backbone& backbone);

// d loss / d raw gates, by the chain rule through init_support_params.
GateSet gate_gradient(const GateSet& gates, const ParamHistory& hist,
                      const GradSet& support_grad);
GateSet gate_update(const GateSet& gates, const ParamHistory& hist,
                    const GradSet& support_grad, double lr);
// Shared-gate variant: one vector updated with the sum of the three component
// gradients, then copied into all three slots.
GateSet shared_gate_update(const GateSet& gates, const ParamHistory& hist,
                           const GradSet& support_grad, double lr);

// Adam moments for the query step. Lazily sized on first use.
class AdamState {
 public:
  AdamState(double beta1, double beta2, double eps) : beta1_(beta1), beta2_(beta2), eps_(eps) {}
  // theta -= lr * adam_direction(grad)
  void step(Components& theta, const Components& grad, double lr);
  std::int64_t steps() const { return t_; }

 private:
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::optional<GradSet> m_, v_;
};

struct OuterResult {
  ParamSet updated;  // theta_t
  double query_loss = 0.0;
};

// First-order meta step: the query gradient is evaluated at theta_inner and
// applied to theta_q. With `adam` set, the step uses Adam instead of SGD.
OuterResult outer_update(const ParamSet& theta_q, const ParamSet& theta_inner,
                         const Snapshot& query, double beta, double l2,
                         const Backbone& backbone, AdamState* adam = nullptr);

struct LossRecord {
  int epoch = 0;
  TimeIndex t = 0;
  double support_loss = 0.0;
  double query_loss = 0.0;
  double gate_ent_mean = 0.0;
  double gate_rel_mean = 0.0;
  double gate_other_mean = 0.0;
};

void write_loss_log(std::ostream& out, const std::vector<LossRecord>& log);

// Optional instrumentation of the training / adaptation loop. epoch is -1
// during adapt().
class MetaHooks {
 public:
  virtual ~MetaHooks() = default;
  virtual void on_task_begin(int /*epoch*/, const MetaTask& /*task*/,
                             const ParamHistory& /*hist*/) {}
  virtual void on_support_step(int /*epoch*/, TimeIndex /*t*/, int /*step*/) {}
  virtual void on_gate_step(int /*epoch*/, TimeIndex /*t*/) {}
  virtual void on_query_step(int /*epoch*/, TimeIndex /*t*/) {}
  virtual void on_task_end(int /*epoch*/, const MetaTask& /*task*/,
                           const ParamSet& /*theta_t*/, const ParamHistory& /*hist*/) {}
};

// State carried from training into validation and test adaptation.
struct MetaState {
  ParamHistory history;
  GateSet gates;

  const ParamSet& params() const { return history.prev; }
};

struct TrainResult {
  MetaState state;
  std::vector<LossRecord> log;

  const ParamSet& params() const { return state.params(); }
};

TrainResult train(const TemporalKG& kg, const MetaConfig& config, const Backbone& backbone,
                  MetaHooks* hooks = nullptr);
TrainResult train(const TemporalKG& kg, const MetaConfig& config, const Backbone& backbone,
                  ParamSet initial, MetaHooks* hooks = nullptr);

struct AdaptResult {
  MetaState state;
  std::optional<RankLog> ranks;
  std::vector<LossRecord> log;
};

// Validation / test adaptation: per task, gated support init, test_steps
// support steps (gates updated after the first one when gate_update_in_eval),
// optional ranking of the query snapshot under the adapted parameters, then
// the query update and history push. Tasks must be consecutive in t.
AdaptResult adapt(MetaState state, const std::vector<MetaTask>& tasks,
                  const MetaConfig& config, const Backbone& backbone,
                  bool record_predictions, MetaHooks* hooks = nullptr);

enum class BaselineMode { kPlain, kFinetune };

// Non-meta sequential training: one step per train snapshot per epoch.
ParamSet train_plain(const TemporalKG& kg, const MetaConfig& config, const Backbone& backbone,
                     MetaHooks* hooks = nullptr);

struct BaselineResult {
  ParamSet params;
  std::optional<RankLog> ranks;
};

// Baseline evaluation over tasks: `steps` support steps per task (0 = frozen
// parameters), then the query snapshot is ranked when record_predictions.
BaselineResult finetune_eval(ParamSet params, const std::vector<MetaTask>& tasks,
                             int steps, const MetaConfig& config, const Backbone& backbone,
                             bool record_predictions);

// Plain training followed by evaluation on valid (unrecorded) and test
// (recorded). kPlain keeps parameters frozen; kFinetune takes test_steps
// support steps per task.
BaselineResult run_baseline(const TemporalKG& kg, const MetaConfig& config,
                            const Backbone& backbone, BaselineMode mode);

}  // namespace tempo_meta
