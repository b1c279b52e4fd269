#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tempo_meta/tkg_data.hpp"

namespace tempo_meta {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Relation rows [0, |R|) score object queries; rows [|R|, 2|R|) are the
// inverse relations used for subject queries.
using DirectedRelation = std::int32_t;

// The three parameter groups that receive separate gates.
struct Components {
  Matrix entity;    // |E| x d
  Matrix relation;  // 2|R| x d
  Vector other;     // d

  std::size_t num_entities() const { return static_cast<std::size_t>(entity.rows()); }
  std::size_t num_relations() const {
    return static_cast<std::size_t>(relation.rows()) / 2;
  }
  std::size_t dim() const { return static_cast<std::size_t>(other.size()); }
  std::size_t size() const {
    return static_cast<std::size_t>(entity.size() + relation.size() + other.size());
  }

  bool same_shape(const Components& rhs) const;
  bool all_finite() const;
  void set_zero();

  // Flat view over entity, relation, other in that order. Mainly for
  // finite-difference checks and tests.
  double& flat(std::size_t i);
  double flat(std::size_t i) const;

  friend bool operator==(const Components& a, const Components& b) {
    return a.entity == b.entity && a.relation == b.relation && a.other == b.other;
  }
};

struct ParamSet : Components {
  std::uint64_t seed = 0;

  static ParamSet zeros(std::size_t num_entities, std::size_t num_relations, std::size_t dim);
};

struct GradSet : Components {
  static GradSet zeros_like(const Components& shape);
};

// y += a * x
void axpy(Components& y, double a, const Components& x);
double squared_norm(const Components& c);

struct LossGrad {
  double loss = 0.0;
  GradSet grad;
};

// Pluggable model interface consumed by the meta-learner and evaluator.
class Backbone {
 public:
  virtual ~Backbone() = default;

  virtual std::vector<double> score(const ParamSet& params, EntityId anchor,
                                    DirectedRelation relation,
                                    std::span<const EntityId> candidates) const = 0;
  // Scores every entity; out.size() must equal |E|.
  virtual void score_all(const ParamSet& params, EntityId anchor,
                         DirectedRelation relation, std::span<double> out) const = 0;
  virtual double loss(const ParamSet& params, const Snapshot& snap) const = 0;
  virtual LossGrad grad(const ParamSet& params, const Snapshot& snap) const = 0;
};

// Weighted trilinear scorer:
//   score(s, r, o) = sum_k other[k] * entity[s,k] * relation[r,k] * entity[o,k]
// trained with full-softmax cross-entropy over all entities. Each fact yields an
// object query (s, r, ?) and a subject query (o, r + |R|, ?).
class TrilinearBackbone final : public Backbone {
 public:
  std::vector<double> score(const ParamSet& params, EntityId anchor,
                            DirectedRelation relation,
                            std::span<const EntityId> candidates) const override;
  void score_all(const ParamSet& params, EntityId anchor, DirectedRelation relation,
                 std::span<double> out) const override;
  double loss(const ParamSet& params, const Snapshot& snap) const override;
  LossGrad grad(const ParamSet& params, const Snapshot& snap) const override;
};

// Xavier-uniform embeddings, `other` set to ones.
ParamSet init_params(std::size_t num_entities, std::size_t num_relations, std::size_t dim,
                     std::uint64_t seed);

// Binary checkpoint, all integers and doubles little-endian:
//   "TMPS" | u32 version=1 | u64 |E| | u64 |R| | u64 d | u64 seed
//   | f64[|E|*d] entity | f64[2|R|*d] relation | f64[d] other
void write_checkpoint(std::ostream& out, const ParamSet& params);
ParamSet read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const ParamSet& params);
ParamSet load_checkpoint(const std::string& path);

}  // namespace tempo_meta
