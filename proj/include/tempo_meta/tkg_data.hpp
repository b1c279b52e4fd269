#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tempo_meta {

using EntityId = std::int32_t;
using RelationId = std::int32_t;
// Dense 1-based timestamp index.
using TimeIndex = std::int32_t;

struct Quadruple {
  EntityId subject = 0;
  RelationId relation = 0;
  EntityId object = 0;
  TimeIndex time = 0;

  friend bool operator==(const Quadruple&, const Quadruple&) = default;
};

struct ParseResult {
  std::vector<Quadruple> quads;
  EntityId max_entity = -1;
  RelationId max_relation = -1;
};

// Parses one quadruple per line: subject relation object raw_time, separated
// by tabs or spaces. Blank lines and lines starting with '#' are skipped.
// time = floor(raw_time / time_gap).
ParseResult parse_quadruples(std::istream& in, std::int64_t time_gap);
ParseResult parse_quadruples_file(const std::string& path, std::int64_t time_gap);

struct Snapshot {
  TimeIndex t = 0;
  std::vector<Quadruple> facts;

  friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

// Inclusive upper bounds of the train / valid / test spans: train is
// [1, train_end], valid is (train_end, valid_end], test is (valid_end, test_end].
struct Split {
  TimeIndex train_end = 0;
  TimeIndex valid_end = 0;
  TimeIndex test_end = 0;

  friend bool operator==(const Split&, const Split&) = default;
};

class TemporalKG {
 public:
  TemporalKG(std::vector<Snapshot> snapshots, std::size_t num_entities,
             std::size_t num_relations);

  const std::vector<Snapshot>& snapshots() const { return snapshots_; }
  // t is the dense 1-based index.
  const Snapshot& at(TimeIndex t) const;
  TimeIndex num_timestamps() const {
    return static_cast<TimeIndex>(snapshots_.size());
  }
  std::size_t num_entities() const { return num_entities_; }
  std::size_t num_relations() const { return num_relations_; }
  std::size_t num_facts() const;
  std::size_t num_facts(TimeIndex first, TimeIndex last) const;

  const std::optional<Split>& split() const { return split_; }
  // Throws if no split has been assigned.
  const Split& require_split() const;
  TemporalKG with_split(const Split& split) const;

  friend bool operator==(const TemporalKG&, const TemporalKG&) = default;

 private:
  std::vector<Snapshot> snapshots_;
  std::size_t num_entities_ = 0;
  std::size_t num_relations_ = 0;
  std::optional<Split> split_;
};

// Groups quadruples by timestamp and re-indexes the timestamps densely to
// 1..n. Vocabulary sizes are 1 + the max id seen, raised to min_entities /
// min_relations when given.
TemporalKG build_temporal_kg(std::span<const Quadruple> quads,
                             std::size_t min_entities = 0,
                             std::size_t min_relations = 0);

using SplitProportions = std::array<double, 3>;
inline constexpr SplitProportions kDefaultSplit = {0.8, 0.1, 0.1};

Split compute_split(TimeIndex num_timestamps, const SplitProportions& p);
TemporalKG split_by_time(const TemporalKG& kg,
                         const SplitProportions& p = kDefaultSplit);

// Writes every fact as "s\tr\to\traw_time" with raw_time = t * time_gap.
void write_quadruples(std::ostream& out, const TemporalKG& kg,
                      std::int64_t time_gap = 1);
std::string format_quadruples(const TemporalKG& kg, std::int64_t time_gap = 1);

enum class HistoryMode {
  // Every fact at an earlier timestamp, regardless of split.
  kAllPreceding,
  // Only facts inside the train span.
  kTrainOnly,
};

// Per-entity count of facts (as subject or object) strictly before each
// timestamp. A self-loop fact counts once.
class HistoryIndex {
 public:
  HistoryIndex(const TemporalKG& kg, HistoryMode mode);

  // Valid for t in [1, num_timestamps + 1].
  std::uint32_t count(EntityId e, TimeIndex t) const;
  std::size_t num_entities() const { return num_entities_; }
  TimeIndex num_timestamps() const { return num_timestamps_; }
  HistoryMode mode() const { return mode_; }

 private:
  std::size_t num_entities_ = 0;
  TimeIndex num_timestamps_ = 0;
  HistoryMode mode_;
  // Row-major |E| x (n + 2); column t holds the count before t.
  std::vector<std::uint32_t> counts_;
};

HistoryIndex build_history_index(
    const TemporalKG& kg, HistoryMode mode = HistoryMode::kAllPreceding);

}  // namespace tempo_meta
