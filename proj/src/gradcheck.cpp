#include "tempo_meta/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace tempo_meta {

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), floor});
}

GradCheckResult check_backbone_gradient(const Backbone& backbone, const ParamSet& params,
                                        const Snapshot& snap, double l2, double h) {
  const LossGrad lg = regularized_grad(backbone, params, snap, l2);
  ParamSet probe = params;
  GradCheckResult out;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double orig = probe.flat(i);
    probe.flat(i) = orig + h;
    const double up = regularized_loss(backbone, probe, snap, l2);
    probe.flat(i) = orig - h;
    const double down = regularized_loss(backbone, probe, snap, l2);
    probe.flat(i) = orig;
    const double numeric = (up - down) / (2.0 * h);
    out.max_rel_error = std::max(out.max_rel_error, relative_error(lg.grad.flat(i), numeric));
    ++out.coordinates;
  }
  return out;
}

GradCheckResult check_gate_gradient(const Backbone& backbone, const ParamHistory& hist,
                                    const GateSet& gates, const Snapshot& support, double l2,
                                    double h) {
  const ParamSet theta_s = init_support_params(hist, gates);
  const LossGrad lg = regularized_grad(backbone, theta_s, support, l2);
  const GateSet analytic = gate_gradient(gates, hist, lg.grad);
  auto loss_at = [&](const GateSet& g) {
    return regularized_loss(backbone, init_support_params(hist, g), support, l2);
  };
  GradCheckResult out;
  GateSet probe = gates;
  const std::pair<Vector GateSet::*, const Vector*> parts[] = {
      {&GateSet::ent, &analytic.ent}, {&GateSet::rel, &analytic.rel},
      {&GateSet::other, &analytic.other}};
  for (const auto& [member, grad] : parts) {
    Vector& v = probe.*member;
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      const double orig = v(k);
      v(k) = orig + h;
      const double up = loss_at(probe);
      v(k) = orig - h;
      const double down = loss_at(probe);
      v(k) = orig;
      const double numeric = (up - down) / (2.0 * h);
      out.max_rel_error = std::max(out.max_rel_error, relative_error((*grad)(k), numeric));
      ++out.coordinates;
    }
  }
  return out;
}

GradCheckInstance make_gradcheck_instance(std::uint64_t seed, std::size_t num_entities,
                                          std::size_t num_relations, std::size_t dim,
                                          std::size_t num_facts) {
  std::mt19937_64 rng(seed);
  ParamSet prev = init_params(num_entities, num_relations, dim, seed);
  ParamSet prevprev = init_params(num_entities, num_relations, dim, seed + 1000003);
  // Scale up so softmax outputs are far from uniform and `other` is not all ones.
  std::normal_distribution<double> normal(0.0, 1.0);
  for (ParamSet* p : {&prev, &prevprev}) {
    p->entity *= 3.0;
    p->relation *= 3.0;
    for (Eigen::Index k = 0; k < p->other.size(); ++k) p->other(k) += 0.5 * normal(rng);
  }
  GateSet gates = GateSet::zeros(dim);
  for (Vector* v : {&gates.ent, &gates.rel, &gates.other}) {
    for (Eigen::Index k = 0; k < v->size(); ++k) (*v)(k) = normal(rng);
  }
  std::uniform_int_distribution<EntityId> ent(0, static_cast<EntityId>(num_entities - 1));
  // Leave the last relation unused so zero rows are exercised too.
  std::uniform_int_distribution<RelationId> rel(
      0, static_cast<RelationId>(std::max<std::size_t>(num_relations, 2) - 2));
  Snapshot snap{1, {}};
  for (std::size_t i = 0; i < num_facts; ++i) snap.facts.push_back({ent(rng), rel(rng), ent(rng), 1});
  return {ParamHistory{std::move(prev), std::move(prevprev)}, std::move(gates), std::move(snap)};
}

GradCheckSuiteResult run_gradcheck_suite(std::uint64_t seed, std::size_t instances, double l2) {
  const TrilinearBackbone backbone;
  GradCheckSuiteResult out;
  for (std::size_t i = 0; i < instances; ++i) {
    // Instance 0 is |E|=10, |R|=3, d=4, 8 facts; the rest cycle within
    // |E| <= 16, |R| <= 4, d <= 8.
    const std::size_t ne = i == 0 ? 10 : 6 + (i * 5) % 11;
    const std::size_t nr = i == 0 ? 3 : 2 + i % 3;
    const std::size_t d = i == 0 ? 4 : 1 + (i * 3) % 8;
    const std::size_t facts = i == 0 ? 8 : 1 + (i * 7) % 12;
    const GradCheckInstance inst = make_gradcheck_instance(seed * 7919 + i, ne, nr, d, facts);
    const GradCheckResult b =
        check_backbone_gradient(backbone, inst.history.prev, inst.snapshot, l2);
    const GradCheckResult g =
        check_gate_gradient(backbone, inst.history, inst.gates, inst.snapshot, l2);
    out.backbone.max_rel_error = std::max(out.backbone.max_rel_error, b.max_rel_error);
    out.backbone.coordinates += b.coordinates;
    out.gates.max_rel_error = std::max(out.gates.max_rel_error, g.max_rel_error);
    out.gates.coordinates += g.coordinates;
    ++out.instances;
  }
  return out;
}

}  // namespace tempo_meta
