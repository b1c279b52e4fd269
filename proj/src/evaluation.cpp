#include "tempo_meta/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ostream>
#include <set>
#include <thread>

#include "tempo_meta/error.hpp"

namespace tempo_meta {

std::int64_t pessimistic_rank(std::span<const double> scores, EntityId gold) {
  if (gold < 0 || static_cast<std::size_t>(gold) >= scores.size()) {
    throw RangeError("gold entity out of range");
  }
  const double g = scores[static_cast<std::size_t>(gold)];
  std::int64_t rank = 1;
  for (std::size_t e = 0; e < scores.size(); ++e) {
    if (static_cast<EntityId>(e) != gold && scores[e] >= g) ++rank;
  }
  return rank;
}

std::int64_t rank_query(const ParamSet& params, const Backbone& backbone, EntityId anchor,
                        DirectedRelation relation, EntityId gold) {
  std::vector<double> scores(params.num_entities());
  backbone.score_all(params, anchor, relation, scores);
  return pessimistic_rank(scores, gold);
}

unsigned ranking_threads() {
  if (const char* env = std::getenv("TEMPO_META_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

RankLog rank_snapshot(const ParamSet& params, const Backbone& backbone, const Snapshot& snap) {
  const auto num_rel = static_cast<DirectedRelation>(params.num_relations());
  RankLog log(2 * snap.facts.size());
  for (std::size_t i = 0; i < snap.facts.size(); ++i) {
    const Quadruple& f = snap.facts[i];
    log[2 * i] = {snap.t, f.subject, f.relation, Direction::kForward, f.object, 0};
    log[2 * i + 1] = {snap.t, f.object, f.relation, Direction::kInverse, f.subject, 0};
  }
  auto work = [&](std::size_t begin, std::size_t end) {
    std::vector<double> scores(params.num_entities());
    for (std::size_t j = begin; j < end; ++j) {
      RankEntry& e = log[j];
      const DirectedRelation r =
          e.direction == Direction::kForward ? e.relation : e.relation + num_rel;
      backbone.score_all(params, e.anchor, r, scores);
      e.rank = pessimistic_rank(scores, e.gold);
    }
  };
  const std::size_t threads =
      std::min<std::size_t>(ranking_threads(), std::max<std::size_t>(1, log.size() / 64));
  if (threads <= 1) {
    work(0, log.size());
    return log;
  }
  std::vector<std::jthread> pool;
  const std::size_t chunk = (log.size() + threads - 1) / threads;
  for (std::size_t begin = 0; begin < log.size(); begin += chunk) {
    pool.emplace_back(work, begin, std::min(log.size(), begin + chunk));
  }
  pool.clear();
  return log;
}

Metrics compute_metrics(std::span<const RankEntry> log) {
  if (log.empty()) throw Error("cannot compute metrics over an empty rank log");
  Metrics m;
  for (const RankEntry& e : log) {
    if (e.rank < 1) throw RangeError("rank must be positive");
    m.mrr += 1.0 / static_cast<double>(e.rank);
    m.hits1 += e.rank <= 1 ? 1.0 : 0.0;
    m.hits3 += e.rank <= 3 ? 1.0 : 0.0;
    m.hits10 += e.rank <= 10 ? 1.0 : 0.0;
  }
  const auto n = static_cast<double>(log.size());
  m.mrr /= n;
  m.hits1 /= n;
  m.hits3 /= n;
  m.hits10 /= n;
  m.count = log.size();
  return m;
}

namespace {

Bucket finish_bucket(Bucket b, const std::vector<RankEntry>& entries) {
  b.count = entries.size();
  if (!entries.empty()) b.metrics = compute_metrics(entries);
  return b;
}

}  // namespace

std::vector<Bucket> bucket_by_period(std::span<const RankEntry> log, int periods) {
  if (periods < 1) throw RangeError("period count must be positive");
  std::set<TimeIndex> distinct;
  for (const RankEntry& e : log) distinct.insert(e.t);
  const std::vector<TimeIndex> times(distinct.begin(), distinct.end());
  const auto p = static_cast<std::size_t>(periods);
  if (times.size() < p) {
    throw Error("rank log spans " + std::to_string(times.size()) +
                " timestamps, fewer than " + std::to_string(periods) + " periods");
  }
  const std::size_t base = times.size() / p;
  const std::size_t extra = times.size() % p;
  std::vector<Bucket> out;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < p; ++i) {
    const std::size_t len = base + (i < extra ? 1 : 0);
    Bucket b;
    b.first_t = times[pos];
    b.last_t = times[pos + len - 1];
    b.label = "period " + std::to_string(i + 1) + " [t=" + std::to_string(b.first_t) + ".." +
              std::to_string(b.last_t) + "]";
    std::vector<RankEntry> entries;
    for (const RankEntry& e : log) {
      if (e.t >= b.first_t && e.t <= b.last_t) entries.push_back(e);
    }
    out.push_back(finish_bucket(std::move(b), entries));
    pos += len;
  }
  return out;
}

std::vector<Bucket> bucket_by_history(std::span<const RankEntry> log, const HistoryIndex& hist,
                                      std::span<const std::uint32_t> bounds, HistoryKey key) {
  if (!std::is_sorted(bounds.begin(), bounds.end()) ||
      std::adjacent_find(bounds.begin(), bounds.end()) != bounds.end()) {
    throw RangeError("history bounds must be strictly ascending");
  }
  const std::size_t n = bounds.size() + 1;
  std::vector<std::vector<RankEntry>> entries(n);
  std::vector<std::set<EntityId>> entities(n);
  for (const RankEntry& e : log) {
    const EntityId keyed = key == HistoryKey::kGold ? e.gold : e.anchor;
    const std::uint32_t c = hist.count(keyed, e.t);
    // First bound >= c; closed upper bounds.
    const auto idx = static_cast<std::size_t>(
        std::lower_bound(bounds.begin(), bounds.end(), c) - bounds.begin());
    entries[idx].push_back(e);
    entities[idx].insert(keyed);
  }
  std::vector<Bucket> out;
  for (std::size_t i = 0; i < n; ++i) {
    Bucket b;
    if (i == 0) {
      b.label = bounds.empty() ? "[0,inf)" : "[0," + std::to_string(bounds[0]) + "]";
    } else if (i == n - 1) {
      b.label = "(" + std::to_string(bounds[i - 1]) + ",inf)";
    } else {
      b.label = "(" + std::to_string(bounds[i - 1]) + "," + std::to_string(bounds[i]) + "]";
    }
    b.num_entities = entities[i].size();
    out.push_back(finish_bucket(std::move(b), entries[i]));
  }
  return out;
}

namespace {

double pct(double x) { return std::round(x * 10000.0) / 100.0; }

nlohmann::json bucket_json(const Bucket& b, bool history) {
  nlohmann::json j;
  j["label"] = b.label;
  j["count"] = b.count;
  j["metrics"] = b.metrics ? to_json(*b.metrics) : nlohmann::json(nullptr);
  if (history) {
    j["num_entities"] = b.num_entities;
  } else {
    j["first_t"] = b.first_t;
    j["last_t"] = b.last_t;
  }
  return j;
}

}  // namespace

nlohmann::json to_json(const Metrics& m) {
  return nlohmann::json{{"mrr", pct(m.mrr)},       {"hits1", pct(m.hits1)},
                        {"hits3", pct(m.hits3)},   {"hits10", pct(m.hits10)},
                        {"count", m.count}};
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json j;
  j["overall"] = to_json(report.overall);
  if (!report.periods.empty()) {
    j["periods"] = nlohmann::json::array();
    for (const Bucket& b : report.periods) j["periods"].push_back(bucket_json(b, false));
  }
  if (!report.history.empty()) {
    j["history"] = nlohmann::json::array();
    for (const Bucket& b : report.history) j["history"].push_back(bucket_json(b, true));
  }
  return j;
}

void write_rank_log(std::ostream& out, const RankLog& log) {
  out << "t,subject,relation,direction,gold,rank\n";
  for (const RankEntry& e : log) {
    out << e.t << ',' << e.anchor << ',' << e.relation << ','
        << (e.direction == Direction::kForward ? "forward" : "inverse") << ',' << e.gold << ','
        << e.rank << '\n';
  }
}

}  // namespace tempo_meta
