#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "tempo_meta/backbone.hpp"
#include "tempo_meta/tkg_data.hpp"

namespace tempo_meta {

enum class Direction : std::uint8_t {
  kForward,  // (s, r, ?) -> object
  kInverse,  // (o, r^-1, ?) -> subject
};

struct RankEntry {
  TimeIndex t = 0;
  EntityId anchor = 0;  // the known entity of the query
  RelationId relation = 0;
  Direction direction = Direction::kForward;
  EntityId gold = 0;
  std::int64_t rank = 0;

  friend bool operator==(const RankEntry&, const RankEntry&) = default;
};

using RankLog = std::vector<RankEntry>;

// 1 + number of other candidates scoring >= the gold candidate.
std::int64_t pessimistic_rank(std::span<const double> scores, EntityId gold);

// Raw setting: the gold entity competes against every entity.
std::int64_t rank_query(const ParamSet& params, const Backbone& backbone, EntityId anchor,
                        DirectedRelation relation, EntityId gold);

// Ranks both directed queries of every fact, object query first. Uses up to
// ranking_threads() worker threads; output order is fixed.
RankLog rank_snapshot(const ParamSet& params, const Backbone& backbone, const Snapshot& snap);

// TEMPO_META_THREADS if set to a positive integer, else hardware concurrency.
unsigned ranking_threads();

struct Metrics {
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;
  std::size_t count = 0;
};

Metrics compute_metrics(std::span<const RankEntry> log);

struct Bucket {
  std::string label;
  std::size_t count = 0;
  // Absent when the bucket is empty.
  std::optional<Metrics> metrics;
  // Period buckets: inclusive timestamp span.
  TimeIndex first_t = 0;
  TimeIndex last_t = 0;
  // History buckets: distinct keyed entities in the bucket.
  std::size_t num_entities = 0;
};

// Splits the distinct timestamps of the log into `periods` contiguous spans;
// the first (n mod periods) spans get one extra timestamp.
std::vector<Bucket> bucket_by_period(std::span<const RankEntry> log, int periods);

enum class HistoryKey { kGold, kAnchor };

inline const std::vector<std::uint32_t> kDefaultHistoryBounds = {50, 200, 500};

// Buckets [0, b0], (b0, b1], ..., (b_last, inf) by the keyed entity's
// interaction count before the entry's timestamp.
std::vector<Bucket> bucket_by_history(std::span<const RankEntry> log, const HistoryIndex& hist,
                                      std::span<const std::uint32_t> bounds,
                                      HistoryKey key = HistoryKey::kGold);

struct EvalReport {
  Metrics overall;
  std::vector<Bucket> periods;
  std::vector<Bucket> history;
};

// Metrics as percentages rounded to 2 decimals.
nlohmann::json to_json(const Metrics& m);
nlohmann::json to_json(const EvalReport& report);

// Columns: t,subject,relation,direction,gold,rank. "subject" is the query's
// known entity; direction is "forward" or "inverse".
void write_rank_log(std::ostream& out, const RankLog& log);

}  // namespace tempo_meta
