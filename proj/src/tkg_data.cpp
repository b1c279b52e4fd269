#include "tempo_meta/tkg_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <sstream>

#include "tempo_meta/error.hpp"

namespace tempo_meta {
namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r'; }

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    if (i == line.size()) break;
    std::size_t j = i;
    while (j < line.size() && !is_space(line[j])) ++j;
    fields.push_back(line.substr(i, j - i));
    i = j;
  }
  return fields;
}

std::int64_t parse_field(std::string_view field, std::size_t line_no) {
  std::int64_t value = 0;
  const char* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ParseError("line " + std::to_string(line_no) +
                     ": not an integer: '" + std::string(field) + "'");
  }
  return value;
}

}  // namespace

ParseResult parse_quadruples(std::istream& in, std::int64_t time_gap) {
  if (time_gap <= 0) throw RangeError("time gap must be positive");
  ParseResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_fields(line);
    if (fields.empty() || fields.front().starts_with('#')) continue;
    if (fields.size() != 4) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 4 fields, got " +
                       std::to_string(fields.size()));
    }
    std::array<std::int64_t, 4> v{};
    for (std::size_t i = 0; i < 4; ++i) {
      v[i] = parse_field(fields[i], line_no);
      if (v[i] < 0) {
        throw RangeError("line " + std::to_string(line_no) + ": negative field");
      }
    }
    constexpr auto kMaxId = std::numeric_limits<std::int32_t>::max();
    if (v[0] > kMaxId || v[1] > kMaxId || v[2] > kMaxId || v[3] / time_gap > kMaxId) {
      throw RangeError("line " + std::to_string(line_no) + ": id out of range");
    }
    Quadruple q{static_cast<EntityId>(v[0]), static_cast<RelationId>(v[1]),
                static_cast<EntityId>(v[2]),
                static_cast<TimeIndex>(v[3] / time_gap)};
    result.max_entity = std::max({result.max_entity, q.subject, q.object});
    result.max_relation = std::max(result.max_relation, q.relation);
    result.quads.push_back(q);
  }
  return result;
}

ParseResult parse_quadruples_file(const std::string& path, std::int64_t time_gap) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return parse_quadruples(in, time_gap);
}

TemporalKG::TemporalKG(std::vector<Snapshot> snapshots, std::size_t num_entities,
                       std::size_t num_relations)
    : snapshots_(std::move(snapshots)),
      num_entities_(num_entities),
      num_relations_(num_relations) {
  for (std::size_t i = 0; i < snapshots_.size(); ++i) {
    const Snapshot& s = snapshots_[i];
    if (s.t != static_cast<TimeIndex>(i + 1)) {
      throw Error("snapshots must be densely indexed from 1");
    }
    if (s.facts.empty()) throw Error("empty snapshot at t=" + std::to_string(s.t));
    for (const Quadruple& q : s.facts) {
      if (q.time != s.t) throw Error("fact time does not match its snapshot");
      if (q.subject < 0 || q.object < 0 || q.relation < 0 ||
          static_cast<std::size_t>(q.subject) >= num_entities_ ||
          static_cast<std::size_t>(q.object) >= num_entities_ ||
          static_cast<std::size_t>(q.relation) >= num_relations_) {
        throw RangeError("fact id outside the vocabulary");
      }
    }
  }
}

const Snapshot& TemporalKG::at(TimeIndex t) const {
  if (t < 1 || t > num_timestamps()) {
    throw RangeError("timestamp " + std::to_string(t) + " outside [1, " +
                     std::to_string(num_timestamps()) + "]");
  }
  return snapshots_[static_cast<std::size_t>(t - 1)];
}

std::size_t TemporalKG::num_facts() const {
  return num_timestamps() == 0 ? 0 : num_facts(1, num_timestamps());
}

std::size_t TemporalKG::num_facts(TimeIndex first, TimeIndex last) const {
  std::size_t n = 0;
  for (TimeIndex t = first; t <= last; ++t) n += at(t).facts.size();
  return n;
}

const Split& TemporalKG::require_split() const {
  if (!split_) throw Error("temporal KG has no train/valid/test split");
  return *split_;
}

TemporalKG TemporalKG::with_split(const Split& split) const {
  if (split.test_end != num_timestamps() || split.train_end < 2 ||
      split.train_end >= split.valid_end || split.valid_end >= split.test_end) {
    throw RangeError("split must satisfy 2 <= k < m < n = #timestamps");
  }
  TemporalKG out = *this;
  out.split_ = split;
  return out;
}

TemporalKG build_temporal_kg(std::span<const Quadruple> quads,
                             std::size_t min_entities,
                             std::size_t min_relations) {
  if (quads.empty()) throw Error("cannot build a temporal KG from no facts");
  std::map<TimeIndex, std::vector<Quadruple>> by_time;
  std::size_t num_entities = min_entities;
  std::size_t num_relations = min_relations;
  for (const Quadruple& q : quads) {
    if (q.subject < 0 || q.object < 0 || q.relation < 0 || q.time < 0) {
      throw RangeError("negative id in quadruple");
    }
    by_time[q.time].push_back(q);
    num_entities = std::max<std::size_t>(
        num_entities, static_cast<std::size_t>(std::max(q.subject, q.object)) + 1);
    num_relations =
        std::max<std::size_t>(num_relations, static_cast<std::size_t>(q.relation) + 1);
  }
  std::vector<Snapshot> snapshots;
  snapshots.reserve(by_time.size());
  TimeIndex dense = 0;
  for (auto& [raw, facts] : by_time) {
    ++dense;
    for (Quadruple& q : facts) q.time = dense;
    snapshots.push_back(Snapshot{dense, std::move(facts)});
  }
  return TemporalKG(std::move(snapshots), num_entities, num_relations);
}

Split compute_split(TimeIndex n, const SplitProportions& p) {
  if (n < 4) throw Error("need at least 4 snapshots to split, got " + std::to_string(n));
  for (double x : p) {
    if (!(x > 0.0)) throw RangeError("split proportions must be positive");
  }
  if (std::abs(p[0] + p[1] + p[2] - 1.0) > 1e-9) {
    throw RangeError("split proportions must sum to 1");
  }
  // The small slack keeps e.g. 0.8 * 10 from flooring to 7.
  constexpr double kSlack = 1e-9;
  auto k = static_cast<TimeIndex>(std::floor(p[0] * n + kSlack));
  auto m = static_cast<TimeIndex>(std::floor((p[0] + p[1]) * n + kSlack));
  k = std::clamp<TimeIndex>(k, 2, n - 2);
  m = std::clamp<TimeIndex>(m, k + 1, n - 1);
  return Split{k, m, n};
}

TemporalKG split_by_time(const TemporalKG& kg, const SplitProportions& p) {
  return kg.with_split(compute_split(kg.num_timestamps(), p));
}

void write_quadruples(std::ostream& out, const TemporalKG& kg, std::int64_t time_gap) {
  for (const Snapshot& s : kg.snapshots()) {
    for (const Quadruple& q : s.facts) {
      out << q.subject << '\t' << q.relation << '\t' << q.object << '\t'
          << static_cast<std::int64_t>(q.time) * time_gap << '\n';
    }
  }
}

std::string format_quadruples(const TemporalKG& kg, std::int64_t time_gap) {
  std::ostringstream out;
  write_quadruples(out, kg, time_gap);
  return out.str();
}

HistoryIndex::HistoryIndex(const TemporalKG& kg, HistoryMode mode)
    : num_entities_(kg.num_entities()),
      num_timestamps_(kg.num_timestamps()),
      mode_(mode) {
  TimeIndex last_counted = num_timestamps_;
  if (mode == HistoryMode::kTrainOnly) last_counted = kg.require_split().train_end;
  const std::size_t cols = static_cast<std::size_t>(num_timestamps_) + 2;
  counts_.assign(num_entities_ * cols, 0);
  std::vector<std::uint32_t> running(num_entities_, 0);
  for (TimeIndex t = 1; t <= num_timestamps_ + 1; ++t) {
    for (std::size_t e = 0; e < num_entities_; ++e) {
      counts_[e * cols + static_cast<std::size_t>(t)] = running[e];
    }
    if (t > num_timestamps_ || t > last_counted) continue;
    for (const Quadruple& q : kg.at(t).facts) {
      ++running[static_cast<std::size_t>(q.subject)];
      if (q.object != q.subject) ++running[static_cast<std::size_t>(q.object)];
    }
  }
}

std::uint32_t HistoryIndex::count(EntityId e, TimeIndex t) const {
  if (e < 0 || static_cast<std::size_t>(e) >= num_entities_) {
    throw RangeError("entity id out of range");
  }
  if (t < 1 || t > num_timestamps_ + 1) throw RangeError("timestamp out of range");
  const std::size_t cols = static_cast<std::size_t>(num_timestamps_) + 2;
  return counts_[static_cast<std::size_t>(e) * cols + static_cast<std::size_t>(t)];
}

HistoryIndex build_history_index(const TemporalKG& kg, HistoryMode mode) {
  return HistoryIndex(kg, mode);
}

}  // namespace tempo_meta
