#include "tempo_meta/backbone.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>

#include "tempo_meta/error.hpp"

namespace tempo_meta {

bool Components::same_shape(const Components& rhs) const {
  return entity.rows() == rhs.entity.rows() && entity.cols() == rhs.entity.cols() &&
         relation.rows() == rhs.relation.rows() &&
         relation.cols() == rhs.relation.cols() && other.size() == rhs.other.size();
}

bool Components::all_finite() const {
  return entity.allFinite() && relation.allFinite() && other.allFinite();
}

void Components::set_zero() {
  entity.setZero();
  relation.setZero();
  other.setZero();
}

double& Components::flat(std::size_t i) {
  const auto ne = static_cast<std::size_t>(entity.size());
  const auto nr = static_cast<std::size_t>(relation.size());
  if (i < ne) return entity.data()[i];
  if (i < ne + nr) return relation.data()[i - ne];
  if (i < size()) return other.data()[i - ne - nr];
  throw RangeError("flat parameter index out of range");
}

double Components::flat(std::size_t i) const {
  return const_cast<Components*>(this)->flat(i);
}

ParamSet ParamSet::zeros(std::size_t num_entities, std::size_t num_relations,
                         std::size_t dim) {
  ParamSet p;
  const auto d = static_cast<Eigen::Index>(dim);
  p.entity = Matrix::Zero(static_cast<Eigen::Index>(num_entities), d);
  p.relation = Matrix::Zero(static_cast<Eigen::Index>(2 * num_relations), d);
  p.other = Vector::Zero(d);
  return p;
}

GradSet GradSet::zeros_like(const Components& shape) {
  GradSet g;
  g.entity = Matrix::Zero(shape.entity.rows(), shape.entity.cols());
  g.relation = Matrix::Zero(shape.relation.rows(), shape.relation.cols());
  g.other = Vector::Zero(shape.other.size());
  return g;
}

void axpy(Components& y, double a, const Components& x) {
  if (!y.same_shape(x)) throw ShapeError("axpy: shape mismatch");
  y.entity += a * x.entity;
  y.relation += a * x.relation;
  y.other += a * x.other;
}

double squared_norm(const Components& c) {
  return c.entity.squaredNorm() + c.relation.squaredNorm() + c.other.squaredNorm();
}

namespace {

void check_entity(const ParamSet& p, EntityId e) {
  if (e < 0 || static_cast<std::size_t>(e) >= p.num_entities()) {
    throw RangeError("entity id " + std::to_string(e) + " out of range");
  }
}

void check_relation(const ParamSet& p, DirectedRelation r) {
  if (r < 0 || static_cast<std::size_t>(r) >= 2 * p.num_relations()) {
    throw RangeError("directed relation id " + std::to_string(r) + " out of range");
  }
}

// One row per directed query: object query then subject query for each fact.
struct Queries {
  std::vector<EntityId> anchor;
  std::vector<DirectedRelation> relation;
  std::vector<EntityId> gold;
};

Queries make_queries(const ParamSet& p, const Snapshot& snap) {
  const auto num_rel = static_cast<DirectedRelation>(p.num_relations());
  Queries q;
  const std::size_t n = 2 * snap.facts.size();
  q.anchor.reserve(n);
  q.relation.reserve(n);
  q.gold.reserve(n);
  for (const Quadruple& f : snap.facts) {
    check_entity(p, f.subject);
    check_entity(p, f.object);
    check_relation(p, f.relation);
    check_relation(p, f.relation + num_rel);
    q.anchor.push_back(f.subject);
    q.relation.push_back(f.relation);
    q.gold.push_back(f.object);
    q.anchor.push_back(f.object);
    q.relation.push_back(f.relation + num_rel);
    q.gold.push_back(f.subject);
  }
  return q;
}

struct Forward {
  Queries queries;
  Matrix query_vec;  // B x d: other * entity[anchor] * relation[r]
  Matrix prob;       // B x |E| softmax
  double loss = 0.0;
};

constexpr double kUnderflowCutoff = -700.0;

// Shared by loss() and grad() so both return bit-identical losses.
Forward forward(const ParamSet& p, const Snapshot& snap, bool keep_prob) {
  if (snap.facts.empty()) throw Error("loss over an empty snapshot");
  Forward fw;
  fw.queries = make_queries(p, snap);
  const auto batch = static_cast<Eigen::Index>(fw.queries.anchor.size());
  fw.query_vec.resize(batch, p.entity.cols());
  for (Eigen::Index j = 0; j < batch; ++j) {
    fw.query_vec.row(j) = p.other.transpose().cwiseProduct(
        p.entity.row(fw.queries.anchor[j]).cwiseProduct(p.relation.row(fw.queries.relation[j])));
  }
  Matrix scores = fw.query_vec * p.entity.transpose();
  double total = 0.0;
  for (Eigen::Index j = 0; j < batch; ++j) {
    auto row = scores.row(j);
    const double max = row.maxCoeff();
    const double gold_logit = row(fw.queries.gold[j]) - max;
    // exp underflows to subnormals below about -708; those terms are < 1e-300
    // of the max term and are flushed to zero.
    row.array() = (row.array() - max).unaryExpr(
        [](double x) { return x < kUnderflowCutoff ? 0.0 : std::exp(x); });
    const double sum = row.sum();
    const double qloss = std::log(sum) - gold_logit;
    if (!std::isfinite(qloss)) {
      const Quadruple& f = snap.facts[static_cast<std::size_t>(j / 2)];
      throw NumericError("non-finite loss at t=" + std::to_string(snap.t) + " fact #" +
                         std::to_string(j / 2) + " (" + std::to_string(f.subject) + ", " +
                         std::to_string(f.relation) + ", " + std::to_string(f.object) + ")");
    }
    total += qloss;
    if (keep_prob) row /= sum;
  }
  fw.loss = total / static_cast<double>(batch);
  if (keep_prob) fw.prob = std::move(scores);
  return fw;
}

}  // namespace

std::vector<double> TrilinearBackbone::score(const ParamSet& params, EntityId anchor,
                                             DirectedRelation relation,
                                             std::span<const EntityId> candidates) const {
  check_entity(params, anchor);
  check_relation(params, relation);
  const Vector q = params.other.cwiseProduct(
      params.entity.row(anchor).transpose().cwiseProduct(params.relation.row(relation).transpose()));
  std::vector<double> out;
  out.reserve(candidates.size());
  for (EntityId c : candidates) {
    check_entity(params, c);
    out.push_back(params.entity.row(c).dot(q));
  }
  return out;
}

void TrilinearBackbone::score_all(const ParamSet& params, EntityId anchor,
                                  DirectedRelation relation, std::span<double> out) const {
  check_entity(params, anchor);
  check_relation(params, relation);
  if (out.size() != params.num_entities()) throw ShapeError("score_all: output size != |E|");
  const Vector q = params.other.cwiseProduct(
      params.entity.row(anchor).transpose().cwiseProduct(params.relation.row(relation).transpose()));
  Eigen::Map<Vector> scores(out.data(), static_cast<Eigen::Index>(out.size()));
  scores.noalias() = params.entity * q;
}

double TrilinearBackbone::loss(const ParamSet& params, const Snapshot& snap) const {
  return forward(params, snap, false).loss;
}

LossGrad TrilinearBackbone::grad(const ParamSet& params, const Snapshot& snap) const {
  Forward fw = forward(params, snap, true);
  const auto batch = static_cast<Eigen::Index>(fw.queries.anchor.size());
  // d loss / d score = (softmax - onehot) / B
  Matrix& delta = fw.prob;
  for (Eigen::Index j = 0; j < batch; ++j) delta(j, fw.queries.gold[j]) -= 1.0;
  delta /= static_cast<double>(batch);

  LossGrad out{fw.loss, GradSet::zeros_like(params)};
  GradSet& g = out.grad;
  g.entity.noalias() = delta.transpose() * fw.query_vec;
  const Matrix dquery = delta * params.entity;
  for (Eigen::Index j = 0; j < batch; ++j) {
    const EntityId a = fw.queries.anchor[j];
    const DirectedRelation r = fw.queries.relation[j];
    const auto dq = dquery.row(j).transpose();
    const Vector e = params.entity.row(a).transpose();
    const Vector rel = params.relation.row(r).transpose();
    g.entity.row(a) += dq.cwiseProduct(params.other).cwiseProduct(rel).transpose();
    g.relation.row(r) += dq.cwiseProduct(params.other).cwiseProduct(e).transpose();
    g.other += dq.cwiseProduct(e).cwiseProduct(rel);
  }
  if (!g.all_finite()) {
    throw NumericError("non-finite gradient at t=" + std::to_string(snap.t));
  }
  return out;
}

ParamSet init_params(std::size_t num_entities, std::size_t num_relations, std::size_t dim,
                     std::uint64_t seed) {
  if (num_entities == 0 || num_relations == 0 || dim == 0) {
    throw RangeError("init_params: dimensions must be positive");
  }
  ParamSet p = ParamSet::zeros(num_entities, num_relations, dim);
  p.seed = seed;
  std::mt19937_64 rng(seed);
  auto fill = [&rng](Matrix& m) {
    const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  };
  fill(p.entity);
  fill(p.relation);
  p.other.setOnes();
  return p;
}

namespace {

constexpr char kMagic[4] = {'T', 'M', 'P', 'S'};
constexpr std::uint32_t kVersion = 1;

void put_u64(std::ostream& out, std::uint64_t v, int bytes = 8) {
  for (int i = 0; i < bytes; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint64_t get_u64(std::istream& in, int bytes = 8) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw ParseError("checkpoint truncated");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

void put_block(std::ostream& out, const double* data, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) put_u64(out, std::bit_cast<std::uint64_t>(data[i]));
}

void get_block(std::istream& in, double* data, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) data[i] = std::bit_cast<double>(get_u64(in));
}

}  // namespace

void write_checkpoint(std::ostream& out, const ParamSet& p) {
  out.write(kMagic, 4);
  put_u64(out, kVersion, 4);
  put_u64(out, p.num_entities());
  put_u64(out, p.num_relations());
  put_u64(out, p.dim());
  put_u64(out, p.seed);
  put_block(out, p.entity.data(), p.entity.size());
  put_block(out, p.relation.data(), p.relation.size());
  put_block(out, p.other.data(), p.other.size());
  if (!out) throw Error("failed writing checkpoint");
}

ParamSet read_checkpoint(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::string_view(magic, 4) != std::string_view(kMagic, 4)) {
    throw ParseError("not a parameter checkpoint");
  }
  if (get_u64(in, 4) != kVersion) throw ParseError("unsupported checkpoint version");
  const std::uint64_t ne = get_u64(in);
  const std::uint64_t nr = get_u64(in);
  const std::uint64_t d = get_u64(in);
  constexpr std::uint64_t kSane = 1ull << 32;
  if (ne == 0 || nr == 0 || d == 0 || ne >= kSane || nr >= kSane || d >= kSane) {
    throw ParseError("checkpoint header has invalid dimensions");
  }
  ParamSet p = ParamSet::zeros(ne, nr, d);
  p.seed = get_u64(in);
  get_block(in, p.entity.data(), p.entity.size());
  get_block(in, p.relation.data(), p.relation.size());
  get_block(in, p.other.data(), p.other.size());
  return p;
}

void save_checkpoint(const std::string& path, const ParamSet& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  write_checkpoint(out, params);
}

ParamSet load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path);
  return read_checkpoint(in);
}

}  // namespace tempo_meta
