#include "tempo_meta/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "tempo_meta/error.hpp"

namespace tempo_meta {

void RegimeSpec::validate() const {
  if (num_entities == 0 || num_relations == 0 || num_groups == 0 || facts_per_snapshot == 0) {
    throw RangeError("synthetic spec: counts must be positive");
  }
  if (num_groups > num_entities) throw RangeError("synthetic spec: more groups than entities");
  if (num_groups < 2) throw RangeError("synthetic spec: need at least 2 groups for a shift");
  if (!(changepoint > 1 && changepoint < timestamps)) {
    throw RangeError("synthetic spec: changepoint must satisfy 1 < c < T");
  }
  if (!(noise_rate >= 0.0 && noise_rate < 1.0)) throw RangeError("noise_rate must be in [0,1)");
  if (!(cold_entity_fraction >= 0.0 && cold_entity_fraction < 1.0)) {
    throw RangeError("cold_entity_fraction must be in [0,1)");
  }
  if (!(popularity_skew >= 0.0)) throw RangeError("popularity_skew must be >= 0");
  if (!(shift_fraction >= 0.5 && shift_fraction <= 1.0)) {
    throw RangeError("shift_fraction must be in [0.5, 1]");
  }
}

TimeIndex changepoint_at(double fraction, TimeIndex timestamps) {
  return static_cast<TimeIndex>(std::lround(fraction * timestamps));
}

bool SyntheticDataset::obeys(const Quadruple& q, const RuleTable& rules) const {
  return group_of[static_cast<std::size_t>(q.object)] ==
         rules.at(q.relation, group_of[static_cast<std::size_t>(q.subject)]);
}

namespace {

// Popularity-weighted sampler over a fixed entity list.
struct Sampler {
  std::vector<EntityId> entities;
  std::discrete_distribution<std::size_t> dist;

  Sampler(std::vector<EntityId> ids, const std::vector<double>& weight) : entities(std::move(ids)) {
    std::vector<double> w;
    w.reserve(entities.size());
    for (EntityId e : entities) w.push_back(weight[static_cast<std::size_t>(e)]);
    dist = std::discrete_distribution<std::size_t>(w.begin(), w.end());
  }
  EntityId operator()(std::mt19937_64& rng) { return entities[dist(rng)]; }
};

struct Regime {
  Sampler subjects;
  std::vector<Sampler> objects_by_group;
};

}  // namespace

SyntheticDataset generate(const RegimeSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const std::size_t ne = spec.num_entities;
  const std::size_t ng = spec.num_groups;

  std::vector<EntityId> order(ne);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::uint32_t> group_of(ne);
  std::vector<std::vector<EntityId>> members(ng);
  for (std::size_t i = 0; i < ne; ++i) {
    const auto g = static_cast<std::uint32_t>(i % ng);
    group_of[static_cast<std::size_t>(order[i])] = g;
    members[g].push_back(order[i]);
  }

  // Cold entities: a fixed share of each group, always leaving one warm member.
  std::vector<bool> cold(ne, false);
  std::vector<EntityId> cold_entities;
  for (auto& m : members) {
    auto n_cold = static_cast<std::size_t>(std::floor(spec.cold_entity_fraction * m.size()));
    n_cold = std::min(n_cold, m.size() - 1);
    for (std::size_t i = 0; i < n_cold; ++i) {
      cold[static_cast<std::size_t>(m[m.size() - 1 - i])] = true;
      cold_entities.push_back(m[m.size() - 1 - i]);
    }
  }
  std::sort(cold_entities.begin(), cold_entities.end());

  std::vector<EntityId> rank(ne);
  std::iota(rank.begin(), rank.end(), 0);
  std::shuffle(rank.begin(), rank.end(), rng);
  std::vector<double> weight(ne);
  for (std::size_t i = 0; i < ne; ++i) {
    weight[static_cast<std::size_t>(rank[i])] =
        1.0 / std::pow(static_cast<double>(i + 1), spec.popularity_skew);
  }

  RuleTable a{spec.num_relations, ng, std::vector<std::uint32_t>(spec.num_relations * ng)};
  std::uniform_int_distribution<std::uint32_t> pick_group(0, static_cast<std::uint32_t>(ng - 1));
  for (auto& g : a.object_group) g = pick_group(rng);
  RuleTable b = a;
  std::vector<std::size_t> cells(b.object_group.size());
  std::iota(cells.begin(), cells.end(), 0);
  std::shuffle(cells.begin(), cells.end(), rng);
  const auto n_changed =
      static_cast<std::size_t>(std::ceil(spec.shift_fraction * static_cast<double>(cells.size())));
  std::uniform_int_distribution<std::uint32_t> pick_other(0, static_cast<std::uint32_t>(ng - 2));
  for (std::size_t i = 0; i < n_changed; ++i) {
    std::uint32_t& g = b.object_group[cells[i]];
    const std::uint32_t alt = pick_other(rng);
    g = alt >= g ? alt + 1 : alt;
  }

  auto make_regime = [&](bool include_cold) {
    std::vector<EntityId> active;
    for (std::size_t e = 0; e < ne; ++e) {
      if (include_cold || !cold[e]) active.push_back(static_cast<EntityId>(e));
    }
    Regime r{Sampler(active, weight), {}};
    for (std::size_t g = 0; g < ng; ++g) {
      std::vector<EntityId> ids;
      for (EntityId e : members[g]) {
        if (include_cold || !cold[static_cast<std::size_t>(e)]) ids.push_back(e);
      }
      std::sort(ids.begin(), ids.end());
      r.objects_by_group.emplace_back(std::move(ids), weight);
    }
    return r;
  };
  Regime warm = make_regime(false);
  Regime all = make_regime(true);
  const std::vector<EntityId>& all_ids = all.subjects.entities;
  const std::vector<EntityId>& warm_ids = warm.subjects.entities;

  const auto n_noise = static_cast<std::size_t>(
      std::lround(spec.noise_rate * static_cast<double>(spec.facts_per_snapshot)));
  std::uniform_int_distribution<RelationId> pick_rel(
      0, static_cast<RelationId>(spec.num_relations - 1));
  std::vector<Quadruple> quads;
  quads.reserve(static_cast<std::size_t>(spec.timestamps) * (spec.facts_per_snapshot + n_noise));
  for (TimeIndex t = 1; t <= spec.timestamps; ++t) {
    const bool post = t >= spec.changepoint;
    Regime& regime = post ? all : warm;
    const RuleTable& rules = post ? b : a;
    for (std::size_t i = 0; i < spec.facts_per_snapshot; ++i) {
      const RelationId r = pick_rel(rng);
      const EntityId s = regime.subjects(rng);
      const std::uint32_t og = rules.at(r, group_of[static_cast<std::size_t>(s)]);
      const EntityId o = regime.objects_by_group[og](rng);
      quads.push_back({s, r, o, t});
    }
    const std::vector<EntityId>& ids = post ? all_ids : warm_ids;
    std::uniform_int_distribution<std::size_t> pick_entity(0, ids.size() - 1);
    for (std::size_t i = 0; i < n_noise; ++i) {
      const RelationId r = pick_rel(rng);
      const EntityId s = ids[pick_entity(rng)];
      const EntityId o = ids[pick_entity(rng)];
      quads.push_back({s, r, o, t});
    }
  }

  return SyntheticDataset{spec,
                          build_temporal_kg(quads, ne, spec.num_relations),
                          std::move(group_of),
                          std::move(cold_entities),
                          std::move(a),
                          std::move(b)};
}

nlohmann::json sidecar_json(const SyntheticDataset& data) {
  const RegimeSpec& s = data.spec;
  auto rules = [](const RuleTable& table) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < table.num_relations; ++r) {
      std::vector<std::uint32_t> row(table.object_group.begin() + r * table.num_groups,
                                     table.object_group.begin() + (r + 1) * table.num_groups);
      rows.push_back(row);
    }
    return rows;
  };
  nlohmann::json j;
  j["spec"] = {{"num_entities", s.num_entities},
               {"num_relations", s.num_relations},
               {"num_groups", s.num_groups},
               {"timestamps", s.timestamps},
               {"changepoint", s.changepoint},
               {"facts_per_snapshot", s.facts_per_snapshot},
               {"noise_rate", s.noise_rate},
               {"cold_entity_fraction", s.cold_entity_fraction},
               {"popularity_skew", s.popularity_skew},
               {"shift_fraction", s.shift_fraction},
               {"seed", s.seed}};
  j["changepoint"] = s.changepoint;
  j["time_gap"] = 1;
  j["group_of"] = data.group_of;
  j["cold_entities"] = data.cold_entities;
  j["regime_a"] = rules(data.regime_a);
  j["regime_b"] = rules(data.regime_b);
  return j;
}

}  // namespace tempo_meta
