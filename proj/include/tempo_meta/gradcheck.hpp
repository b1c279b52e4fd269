#pragma once

#include <cstdint>

#include "tempo_meta/backbone.hpp"
#include "tempo_meta/meta_learner.hpp"

namespace tempo_meta {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
};

// |analytic - numeric| / max(|analytic|, |numeric|, floor). The floor keeps
// coordinates whose true gradient is ~0 from dividing roundoff by roundoff.
double relative_error(double analytic, double numeric, double floor = 1e-6);

// Central differences of regularized_loss against regularized_grad, every
// coordinate.
GradCheckResult check_backbone_gradient(const Backbone& backbone, const ParamSet& params,
                                        const Snapshot& snap, double l2, double h = 1e-5);

// Central differences of the support loss through init_support_params with
// respect to every raw gate entry.
GradCheckResult check_gate_gradient(const Backbone& backbone, const ParamHistory& hist,
                                    const GateSet& gates, const Snapshot& support, double l2,
                                    double h = 1e-5);

// A random small instance (|E| <= 16, |R| <= 4, d <= 8).
struct GradCheckInstance {
  ParamHistory history;
  GateSet gates;
  Snapshot snapshot;
};

GradCheckInstance make_gradcheck_instance(std::uint64_t seed, std::size_t num_entities = 10,
                                          std::size_t num_relations = 3, std::size_t dim = 4,
                                          std::size_t num_facts = 8);

struct GradCheckSuiteResult {
  GradCheckResult backbone;
  GradCheckResult gates;
  std::size_t instances = 0;
};

// Runs both checks over `instances` random instances derived from seed.
GradCheckSuiteResult run_gradcheck_suite(std::uint64_t seed, std::size_t instances = 8,
                                         double l2 = 1e-5);

}  // namespace tempo_meta
