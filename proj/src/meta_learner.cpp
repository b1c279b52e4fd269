#include "tempo_meta/meta_learner.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "tempo_meta/error.hpp"

namespace tempo_meta {

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::kFull: return "full";
    case Ablation::kNoGate: return "no-gate";
    case Ablation::kSharedGate: return "shared-gate";
  }
  return "full";
}

Ablation parse_ablation(const std::string& s) {
  if (s == "full") return Ablation::kFull;
  if (s == "no-gate") return Ablation::kNoGate;
  if (s == "shared-gate") return Ablation::kSharedGate;
  throw ParseError("unknown ablation '" + s + "' (expected full, no-gate, shared-gate)");
}

void MetaConfig::validate() const {
  if (!(alpha > 0.0) || !(beta > 0.0)) throw RangeError("alpha and beta must be > 0");
  if (!(l2 >= 0.0)) throw RangeError("l2 must be >= 0");
  if (gate_lr && !(*gate_lr >= 0.0)) throw RangeError("gate_lr must be >= 0");
  if (dim == 0) throw RangeError("dim must be positive");
  if (epochs < 0) throw RangeError("epochs must be >= 0");
  if (test_steps < 1) throw RangeError("test_steps must be >= 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0 &&
        adam_eps > 0.0)) {
    throw RangeError("invalid Adam coefficients");
  }
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ParseError("config key '" + key + "': not a number: '" + v + "'");
  }
  return x;
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  std::int64_t x = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ParseError("config key '" + key + "': not an integer: '" + v + "'");
  }
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ParseError("config key '" + key + "': not a boolean: '" + v + "'");
}

}  // namespace

MetaConfig parse_config(std::istream& in) {
  MetaConfig c;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ParseError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key == "alpha") {
      c.alpha = to_double(key, value);
    } else if (key == "beta") {
      c.beta = to_double(key, value);
    } else if (key == "l2") {
      c.l2 = to_double(key, value);
    } else if (key == "gate_lr") {
      c.gate_lr = to_double(key, value);
    } else if (key == "dim") {
      const auto d = to_int(key, value);
      if (d <= 0) throw RangeError("dim must be positive");
      c.dim = static_cast<std::size_t>(d);
    } else if (key == "epochs") {
      c.epochs = static_cast<int>(to_int(key, value));
    } else if (key == "seed") {
      const auto s = to_int(key, value);
      if (s < 0) throw RangeError("seed must be non-negative");
      c.seed = static_cast<std::uint64_t>(s);
    } else if (key == "test_steps") {
      c.test_steps = static_cast<int>(to_int(key, value));
    } else if (key == "ablation") {
      c.ablation = parse_ablation(value);
    } else if (key == "gate_update_in_eval") {
      c.gate_update_in_eval = to_bool(key, value);
    } else if (key == "optimizer") {
      if (value == "sgd") {
        c.optimizer = OptimizerKind::kSgd;
      } else if (value == "adam") {
        c.optimizer = OptimizerKind::kAdam;
      } else {
        throw ParseError("unknown optimizer '" + value + "' (expected sgd or adam)");
      }
    } else if (key == "adam_beta1") {
      c.adam_beta1 = to_double(key, value);
    } else if (key == "adam_beta2") {
      c.adam_beta2 = to_double(key, value);
    } else if (key == "adam_eps") {
      c.adam_eps = to_double(key, value);
    } else {
      throw ParseError("unknown config key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

MetaConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path);
  return parse_config(in);
}

void write_config(std::ostream& out, const MetaConfig& c) {
  std::ostringstream s;
  s << std::setprecision(17);
  s << "alpha=" << c.alpha << '\n'
    << "beta=" << c.beta << '\n'
    << "l2=" << c.l2 << '\n';
  if (c.gate_lr) s << "gate_lr=" << *c.gate_lr << '\n';
  s << "dim=" << c.dim << '\n'
    << "epochs=" << c.epochs << '\n'
    << "seed=" << c.seed << '\n'
    << "test_steps=" << c.test_steps << '\n'
    << "ablation=" << to_string(c.ablation) << '\n'
    << "gate_update_in_eval=" << (c.gate_update_in_eval ? "true" : "false") << '\n'
    << "optimizer=" << (c.optimizer == OptimizerKind::kAdam ? "adam" : "sgd") << '\n'
    << "adam_beta1=" << c.adam_beta1 << '\n'
    << "adam_beta2=" << c.adam_beta2 << '\n'
    << "adam_eps=" << c.adam_eps << '\n';
  out << s.str();
}

std::vector<MetaTask> make_tasks(const TemporalKG& kg, TimeIndex first, TimeIndex last) {
  if (first < 2) throw RangeError("meta-task span must start at t >= 2");
  if (last > kg.num_timestamps()) throw RangeError("meta-task span exceeds the KG");
  std::vector<MetaTask> tasks;
  for (TimeIndex t = first; t <= last; ++t) tasks.push_back({t, &kg.at(t - 1), &kg.at(t)});
  return tasks;
}

GateSet GateSet::zeros(std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  return GateSet{Vector::Zero(d), Vector::Zero(d), Vector::Zero(d)};
}

namespace {

constexpr char kGateMagic[4] = {'T', 'M', 'G', 'S'};

void put_u64(std::ostream& out, std::uint64_t v, int bytes = 8) {
  for (int i = 0; i < bytes; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint64_t get_u64(std::istream& in, int bytes = 8) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw ParseError("gate file truncated");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

}  // namespace

void write_gates(std::ostream& out, const GateSet& g) {
  out.write(kGateMagic, 4);
  put_u64(out, 1, 4);
  put_u64(out, g.dim());
  for (const Vector* v : {&g.ent, &g.rel, &g.other}) {
    for (Eigen::Index i = 0; i < v->size(); ++i) {
      put_u64(out, std::bit_cast<std::uint64_t>((*v)(i)));
    }
  }
  if (!out) throw Error("failed writing gates");
}

GateSet read_gates(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::string_view(magic, 4) != std::string_view(kGateMagic, 4)) {
    throw ParseError("not a gate file");
  }
  if (get_u64(in, 4) != 1) throw ParseError("unsupported gate file version");
  const std::uint64_t d = get_u64(in);
  if (d == 0 || d >= (1ull << 32)) throw ParseError("gate file has invalid dimension");
  GateSet g = GateSet::zeros(d);
  for (Vector* v : {&g.ent, &g.rel, &g.other}) {
    for (Eigen::Index i = 0; i < v->size(); ++i) (*v)(i) = std::bit_cast<double>(get_u64(in));
  }
  return g;
}

ParamHistory ParamHistory::bootstrap(const ParamSet& theta) { return {theta, theta}; }

void ParamHistory::push(ParamSet theta_t) {
  prevprev = std::move(prev);
  prev = std::move(theta_t);
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

Vector squash(const Vector& g) { return g.unaryExpr([](double x) { return logistic(x); }); }

// s * a + (1 - s) * b, clamped to [min(a, b), max(a, b)] so rounding never
// leaves the segment.
double blend(double s, double a, double b) {
  const double v = s * a + (1.0 - s) * b;
  return std::clamp(v, std::min(a, b), std::max(a, b));
}

void blend_rows(Matrix& out, const Matrix& a, const Matrix& b, const Vector& s) {
  out.resize(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index k = 0; k < a.cols(); ++k) out(i, k) = blend(s(k), a(i, k), b(i, k));
  }
}

void check_gate_shapes(const ParamHistory& hist, const GateSet& gates) {
  if (!hist.prev.same_shape(hist.prevprev)) throw ShapeError("history slots differ in shape");
  const auto d = static_cast<Eigen::Index>(hist.prev.dim());
  if (gates.ent.size() != d || gates.rel.size() != d || gates.other.size() != d ||
      hist.prev.entity.cols() != d || hist.prev.relation.cols() != d) {
    throw ShapeError("gate dimension does not match parameter dimension");
  }
}

}  // namespace

ParamSet init_support_params(const ParamHistory& hist, const GateSet& gates) {
  check_gate_shapes(hist, gates);
  ParamSet out;
  out.seed = hist.prev.seed;
  blend_rows(out.entity, hist.prev.entity, hist.prevprev.entity, squash(gates.ent));
  blend_rows(out.relation, hist.prev.relation, hist.prevprev.relation, squash(gates.rel));
  const Vector s = squash(gates.other);
  out.other.resize(s.size());
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    out.other(k) = blend(s(k), hist.prev.other(k), hist.prevprev.other(k));
  }
  return out;
}

ParamSet init_query_params(const ParamHistory& hist) { return hist.prev; }

namespace {

std::vector<bool> touched_relation_rows(const ParamSet& params, const Snapshot& snap) {
  const std::size_t nr = params.num_relations();
  std::vector<bool> mask(2 * nr, false);
  for (const Quadruple& f : snap.facts) {
    const auto r = static_cast<std::size_t>(f.relation);
    if (r >= nr) throw RangeError("relation id out of range");
    mask[r] = true;
    mask[r + nr] = true;
  }
  return mask;
}

double l2_penalty(const ParamSet& params, const std::vector<bool>& rel_rows) {
  double sq = params.entity.squaredNorm() + params.other.squaredNorm();
  for (std::size_t r = 0; r < rel_rows.size(); ++r) {
    if (rel_rows[r]) sq += params.relation.row(static_cast<Eigen::Index>(r)).squaredNorm();
  }
  return sq;
}

}  // namespace

LossGrad regularized_grad(const Backbone& backbone, const ParamSet& params,
                          const Snapshot& snap, double l2) {
  LossGrad lg = backbone.grad(params, snap);
  if (l2 == 0.0) return lg;
  const auto rel_rows = touched_relation_rows(params, snap);
  lg.loss += 0.5 * l2 * l2_penalty(params, rel_rows);
  lg.grad.entity += l2 * params.entity;
  lg.grad.other += l2 * params.other;
  for (std::size_t r = 0; r < rel_rows.size(); ++r) {
    if (!rel_rows[r]) continue;
    const auto row = static_cast<Eigen::Index>(r);
    lg.grad.relation.row(row) += l2 * params.relation.row(row);
  }
  return lg;
}

double regularized_loss(const Backbone& backbone, const ParamSet& params, const Snapshot& snap,
                        double l2) {
  double loss = backbone.loss(params, snap);
  if (l2 != 0.0) loss += 0.5 * l2 * l2_penalty(params, touched_relation_rows(params, snap));
  return loss;
}

InnerResult inner_update(const ParamSet& theta_s, const Snapshot& support, double alpha,
                         double l2, const Backbone& backbone) {
  if (!(alpha > 0.0)) throw RangeError("alpha must be > 0");
  LossGrad lg = regularized_grad(backbone, theta_s, support, l2);
  if (!std::isfinite(lg.loss)) {
    throw NumericError("non-finite support loss at t=" + std::to_string(support.t));
  }
  InnerResult out{theta_s, std::move(lg.grad), lg.loss};
  axpy(out.adapted, -alpha, out.support_grad);
  return out;
}

namespace {

// sum over rows of grad[row,k] * (a[row,k] - b[row,k]), times sigma'(g_k).
Vector row_gate_grad(const Matrix& grad, const Matrix& a, const Matrix& b, const Vector& g) {
  Vector out = (grad.array() * (a - b).array()).colwise().sum().transpose();
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    const double s = logistic(g(k));
    out(k) *= s * (1.0 - s);
  }
  return out;
}

}  // namespace

GateSet gate_gradient(const GateSet& gates, const ParamHistory& hist,
                      const GradSet& support_grad) {
  check_gate_shapes(hist, gates);
  if (!support_grad.same_shape(hist.prev)) throw ShapeError("support gradient shape mismatch");
  GateSet out;
  out.ent = row_gate_grad(support_grad.entity, hist.prev.entity, hist.prevprev.entity, gates.ent);
  out.rel = row_gate_grad(support_grad.relation, hist.prev.relation, hist.prevprev.relation,
                          gates.rel);
  out.other = support_grad.other.cwiseProduct(hist.prev.other - hist.prevprev.other);
  for (Eigen::Index k = 0; k < out.other.size(); ++k) {
    const double s = logistic(gates.other(k));
    out.other(k) *= s * (1.0 - s);
  }
  return out;
}

GateSet gate_update(const GateSet& gates, const ParamHistory& hist, const GradSet& support_grad,
                    double lr) {
  const GateSet grad = gate_gradient(gates, hist, support_grad);
  return GateSet{gates.ent - lr * grad.ent, gates.rel - lr * grad.rel,
                 gates.other - lr * grad.other};
}

GateSet shared_gate_update(const GateSet& gates, const ParamHistory& hist,
                           const GradSet& support_grad, double lr) {
  const GateSet grad = gate_gradient(gates, hist, support_grad);
  const Vector shared = gates.ent - lr * (grad.ent + grad.rel + grad.other);
  return GateSet{shared, shared, shared};
}

namespace {

template <typename Block>
void adam_block(Block& theta, const Block& grad, Block& m, Block& v, double b1, double b2,
                double eps, double lr, double c1, double c2) {
  m = b1 * m + (1.0 - b1) * grad;
  v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
  theta.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

}  // namespace

void AdamState::step(Components& theta, const Components& grad, double lr) {
  if (!m_) {
    m_ = GradSet::zeros_like(theta);
    v_ = GradSet::zeros_like(theta);
  }
  if (!m_->same_shape(grad) || !theta.same_shape(grad)) throw ShapeError("Adam shape mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  adam_block(theta.entity, grad.entity, m_->entity, v_->entity, beta1_, beta2_, eps_, lr, c1, c2);
  adam_block(theta.relation, grad.relation, m_->relation, v_->relation, beta1_, beta2_, eps_, lr,
             c1, c2);
  adam_block(theta.other, grad.other, m_->other, v_->other, beta1_, beta2_, eps_, lr, c1, c2);
}

OuterResult outer_update(const ParamSet& theta_q, const ParamSet& theta_inner,
                         const Snapshot& query, double beta, double l2, const Backbone& backbone,
                         AdamState* adam) {
  if (!(beta > 0.0)) throw RangeError("beta must be > 0");
  if (!theta_q.same_shape(theta_inner)) throw ShapeError("outer_update: shape mismatch");
  LossGrad lg = regularized_grad(backbone, theta_inner, query, l2);
  if (!std::isfinite(lg.loss)) {
    throw NumericError("non-finite query loss at t=" + std::to_string(query.t));
  }
  OuterResult out{theta_q, lg.loss};
  if (adam != nullptr) {
    adam->step(out.updated, lg.grad, beta);
  } else {
    axpy(out.updated, -beta, lg.grad);
  }
  return out;
}

void write_loss_log(std::ostream& out, const std::vector<LossRecord>& log) {
  std::ostringstream s;
  s << std::setprecision(10);
  s << "epoch,t,support_loss,query_loss,gate_ent_mean,gate_rel_mean,gate_other_mean\n";
  for (const LossRecord& r : log) {
    s << r.epoch << ',' << r.t << ',' << r.support_loss << ',' << r.query_loss << ','
      << r.gate_ent_mean << ',' << r.gate_rel_mean << ',' << r.gate_other_mean << '\n';
  }
  out << s.str();
}

namespace {

struct TaskOutcome {
  double support_loss = 0.0;
  double query_loss = 0.0;
};

// One pass of gated support init -> support steps -> gate step -> query step
// -> history push.
TaskOutcome run_task(MetaState& state, const MetaTask& task, int epoch, int support_steps,
                     bool update_gates, const MetaConfig& config, const Backbone& backbone,
                     AdamState* adam, RankLog* ranks, MetaHooks* hooks) {
  if (hooks) hooks->on_task_begin(epoch, task, state.history);
  const ParamHistory& hist = state.history;
  const bool gated = config.ablation != Ablation::kNoGate;
  ParamSet theta_s = gated ? init_support_params(hist, state.gates) : hist.prev;

  InnerResult inner = inner_update(theta_s, *task.support, config.alpha, config.l2, backbone);
  const double support_loss = inner.loss;
  if (hooks) hooks->on_support_step(epoch, task.t, 1);
  if (gated && update_gates) {
    const double lr = config.effective_gate_lr();
    state.gates = config.ablation == Ablation::kSharedGate
                      ? shared_gate_update(state.gates, hist, inner.support_grad, lr)
                      : gate_update(state.gates, hist, inner.support_grad, lr);
    if (hooks) hooks->on_gate_step(epoch, task.t);
  }
  for (int step = 2; step <= support_steps; ++step) {
    inner = inner_update(inner.adapted, *task.support, config.alpha, config.l2, backbone);
    if (hooks) hooks->on_support_step(epoch, task.t, step);
  }

  if (ranks != nullptr) {
    RankLog r = rank_snapshot(inner.adapted, backbone, *task.query);
    ranks->insert(ranks->end(), r.begin(), r.end());
  }

  OuterResult outer = outer_update(init_query_params(hist), inner.adapted, *task.query,
                                   config.beta, config.l2, backbone, adam);
  if (hooks) hooks->on_query_step(epoch, task.t);
  state.history.push(std::move(outer.updated));
  if (hooks) hooks->on_task_end(epoch, task, state.history.prev, state.history);
  return {support_loss, outer.query_loss};
}

LossRecord make_record(int epoch, TimeIndex t, const TaskOutcome& o, const GateSet& g) {
  return {epoch, t, o.support_loss, o.query_loss, g.ent.mean(), g.rel.mean(), g.other.mean()};
}

std::optional<AdamState> make_optimizer(const MetaConfig& config) {
  if (config.optimizer != OptimizerKind::kAdam) return std::nullopt;
  return AdamState(config.adam_beta1, config.adam_beta2, config.adam_eps);
}

}  // namespace

TrainResult train(const TemporalKG& kg, const MetaConfig& config, const Backbone& backbone,
                  MetaHooks* hooks) {
  config.validate();
  return train(kg, config, backbone,
               init_params(kg.num_entities(), kg.num_relations(), config.dim, config.seed), hooks);
}

TrainResult train(const TemporalKG& kg, const MetaConfig& config, const Backbone& backbone,
                  ParamSet initial, MetaHooks* hooks) {
  config.validate();
  const Split& split = kg.require_split();
  const auto tasks = make_tasks(kg, 2, split.train_end);
  TrainResult result{MetaState{ParamHistory::bootstrap(initial), GateSet::zeros(initial.dim())},
                     {}};
  auto adam = make_optimizer(config);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Both slots restart from the current parameters at every epoch.
    result.state.history = ParamHistory::bootstrap(result.state.history.prev);
    for (const MetaTask& task : tasks) {
      try {
        const TaskOutcome o = run_task(result.state, task, epoch, 1, true, config, backbone,
                                       adam ? &*adam : nullptr, nullptr, hooks);
        result.log.push_back(make_record(epoch, task.t, o, result.state.gates));
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + " task t=" +
                           std::to_string(task.t) + ": " + e.what());
      }
    }
  }
  return result;
}

AdaptResult adapt(MetaState state, const std::vector<MetaTask>& tasks, const MetaConfig& config,
                  const Backbone& backbone, bool record_predictions, MetaHooks* hooks) {
  config.validate();
  for (std::size_t i = 1; i < tasks.size(); ++i) {
    if (tasks[i].t != tasks[i - 1].t + 1) throw Error("adapt: tasks must be consecutive in t");
  }
  AdaptResult result{std::move(state), std::nullopt, {}};
  if (record_predictions) result.ranks.emplace();
  auto adam = make_optimizer(config);
  for (const MetaTask& task : tasks) {
    const TaskOutcome o =
        run_task(result.state, task, -1, config.test_steps, config.gate_update_in_eval, config,
                 backbone, adam ? &*adam : nullptr, result.ranks ? &*result.ranks : nullptr,
                 hooks);
    result.log.push_back(make_record(-1, task.t, o, result.state.gates));
  }
  return result;
}

ParamSet train_plain(const TemporalKG& kg, const MetaConfig& config, const Backbone& backbone,
                     MetaHooks* hooks) {
  config.validate();
  const Split& split = kg.require_split();
  ParamSet theta = init_params(kg.num_entities(), kg.num_relations(), config.dim, config.seed);
  auto adam = make_optimizer(config);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (TimeIndex t = 1; t <= split.train_end; ++t) {
      const LossGrad lg = regularized_grad(backbone, theta, kg.at(t), config.l2);
      if (adam) {
        adam->step(theta, lg.grad, config.beta);
      } else {
        axpy(theta, -config.beta, lg.grad);
      }
      if (hooks) hooks->on_query_step(epoch, t);
    }
  }
  return theta;
}

BaselineResult finetune_eval(ParamSet params, const std::vector<MetaTask>& tasks, int steps,
                             const MetaConfig& config, const Backbone& backbone,
                             bool record_predictions) {
  if (steps < 0) throw RangeError("fine-tune steps must be >= 0");
  BaselineResult result{std::move(params), std::nullopt};
  if (record_predictions) result.ranks.emplace();
  for (const MetaTask& task : tasks) {
    for (int s = 0; s < steps; ++s) {
      const LossGrad lg = regularized_grad(backbone, result.params, *task.support, config.l2);
      axpy(result.params, -config.alpha, lg.grad);
    }
    if (record_predictions) {
      RankLog r = rank_snapshot(result.params, backbone, *task.query);
      result.ranks->insert(result.ranks->end(), r.begin(), r.end());
    }
  }
  return result;
}

BaselineResult run_baseline(const TemporalKG& kg, const MetaConfig& config,
                            const Backbone& backbone, BaselineMode mode) {
  const Split& split = kg.require_split();
  const int steps = mode == BaselineMode::kPlain ? 0 : config.test_steps;
  ParamSet theta = train_plain(kg, config, backbone);
  BaselineResult valid = finetune_eval(
      std::move(theta), make_tasks(kg, split.train_end + 1, split.valid_end), steps, config,
      backbone, false);
  return finetune_eval(std::move(valid.params),
                       make_tasks(kg, split.valid_end + 1, split.test_end), steps, config,
                       backbone, true);
}

}  // namespace tempo_meta
