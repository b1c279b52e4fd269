#pragma once

// Reference computations for tests. Deliberately naive: scalar loops, full
// sorts, brute-force scans. Nothing here calls the code paths it checks.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "tempo_meta/backbone.hpp"
#include "tempo_meta/evaluation.hpp"
#include "tempo_meta/tkg_data.hpp"

namespace oracle {

using namespace tempo_meta;

inline double naive_score(const ParamSet& p, EntityId s, int r, EntityId o) {
  double total = 0.0;
  for (Eigen::Index k = 0; k < p.other.size(); ++k) {
    total += p.other(k) * p.entity(s, k) * p.relation(r, k) * p.entity(o, k);
  }
  return total;
}

// Mean over directed queries of -log softmax(gold), summed the long way.
inline double direct_loss(const ParamSet& p, const Snapshot& snap) {
  const auto ne = static_cast<EntityId>(p.num_entities());
  const auto nr = static_cast<int>(p.num_relations());
  double total = 0.0;
  int queries = 0;
  auto one = [&](EntityId anchor, int r, EntityId gold) {
    long double denom = 0.0L;
    for (EntityId e = 0; e < ne; ++e) denom += std::exp(static_cast<long double>(naive_score(p, anchor, r, e)));
    total += static_cast<double>(std::log(denom) - naive_score(p, anchor, r, gold));
    ++queries;
  };
  for (const Quadruple& f : snap.facts) {
    one(f.subject, f.relation, f.object);
    one(f.object, f.relation + nr, f.subject);
  }
  return total / queries;
}

// Central differences of an arbitrary scalar function of the flat parameters.
inline std::vector<double> fd_gradient(const std::function<double(const ParamSet&)>& f,
                                       ParamSet p, double h = 1e-5) {
  std::vector<double> g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double orig = p.flat(i);
    p.flat(i) = orig + h;
    const double up = f(p);
    p.flat(i) = orig - h;
    const double down = f(p);
    p.flat(i) = orig;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

inline double rel_err(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Position of gold after a stable sort by descending score where ties place
// gold last among equals.
inline std::int64_t sort_rank(const std::vector<double>& scores, EntityId gold) {
  std::vector<EntityId> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](EntityId a, EntityId b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    if (a == gold) return false;
    if (b == gold) return true;
    return a < b;
  });
  return std::find(idx.begin(), idx.end(), gold) - idx.begin() + 1;
}

struct ScalarMetrics {
  double mrr = 0, h1 = 0, h3 = 0, h10 = 0;
};

inline ScalarMetrics scalar_metrics(const std::vector<std::int64_t>& ranks) {
  ScalarMetrics m;
  long double rr = 0;
  std::size_t c1 = 0, c3 = 0, c10 = 0;
  for (std::int64_t r : ranks) {
    rr += 1.0L / r;
    c1 += r == 1;
    c3 += r <= 3;
    c10 += r <= 10;
  }
  const double n = static_cast<double>(ranks.size());
  m.mrr = static_cast<double>(rr / n);
  m.h1 = c1 / n;
  m.h3 = c3 / n;
  m.h10 = c10 / n;
  return m;
}

// Facts involving e strictly before t, optionally only within [1, last_counted].
inline std::uint32_t brute_history(const TemporalKG& kg, EntityId e, TimeIndex t,
                                   TimeIndex last_counted) {
  std::uint32_t n = 0;
  for (const Snapshot& s : kg.snapshots()) {
    if (s.t >= t || s.t > last_counted) continue;
    for (const Quadruple& q : s.facts) n += (q.subject == e || q.object == e) ? 1 : 0;
  }
  return n;
}

inline std::vector<Quadruple> random_quads(std::mt19937_64& rng, std::size_t n, EntityId ne,
                                           RelationId nr, TimeIndex nt) {
  std::uniform_int_distribution<EntityId> ent(0, ne - 1);
  std::uniform_int_distribution<RelationId> rel(0, nr - 1);
  std::uniform_int_distribution<TimeIndex> time(0, nt - 1);
  std::vector<Quadruple> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({ent(rng), rel(rng), ent(rng), time(rng)});
  return out;
}

}  // namespace oracle
