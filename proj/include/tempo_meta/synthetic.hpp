#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"
#include "tempo_meta/tkg_data.hpp"

namespace tempo_meta {

// Parameters of a two-regime synthetic TKG. Regime A is active for t < changepoint,
// regime B from the changepoint on.
struct RegimeSpec {
  std::size_t num_entities = 200;
  std::size_t num_relations = 8;
  std::size_t num_groups = 10;
  TimeIndex timestamps = 60;
  TimeIndex changepoint = 51;
  std::size_t facts_per_snapshot = 300;
  double noise_rate = 0.1;
  double cold_entity_fraction = 0.0;
  // Zipf exponent of per-entity popularity; 0 gives uniform sampling.
  double popularity_skew = 1.0;
  // Fraction of (relation, group) rules that regime B rewires; at least 0.5.
  double shift_fraction = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

// round(fraction * timestamps), e.g. 0.85 of 60 timestamps -> 51.
TimeIndex changepoint_at(double fraction, TimeIndex timestamps);

// Maps (relation, subject group) to an object group.
struct RuleTable {
  std::size_t num_relations = 0;
  std::size_t num_groups = 0;
  std::vector<std::uint32_t> object_group;  // row-major [relation][group]

  std::uint32_t at(RelationId r, std::uint32_t subject_group) const {
    return object_group[static_cast<std::size_t>(r) * num_groups + subject_group];
  }
};

struct SyntheticDataset {
  RegimeSpec spec;
  TemporalKG kg;
  std::vector<std::uint32_t> group_of;  // per entity
  std::vector<EntityId> cold_entities;  // ascending
  RuleTable regime_a;
  RuleTable regime_b;

  const RuleTable& active_rules(TimeIndex t) const {
    return t < spec.changepoint ? regime_a : regime_b;
  }
  bool obeys(const Quadruple& q, const RuleTable& rules) const;
};

// Each snapshot holds facts_per_snapshot rule facts followed by
// round(noise_rate * facts_per_snapshot) uniform-random facts. Cold entities
// are only sampled from the changepoint on. Raw timestamps are 1..T.
SyntheticDataset generate(const RegimeSpec& spec);

nlohmann::json sidecar_json(const SyntheticDataset& data);

}  // namespace tempo_meta
