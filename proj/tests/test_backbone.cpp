#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "tempo_meta/backbone.hpp"
#include "tempo_meta/error.hpp"
#include "tempo_meta/gradcheck.hpp"

using namespace tempo_meta;

namespace {

const TrilinearBackbone kBackbone;

Snapshot random_snapshot(std::mt19937_64& rng, EntityId ne, RelationId nr, std::size_t n) {
  std::uniform_int_distribution<EntityId> ent(0, ne - 1);
  std::uniform_int_distribution<RelationId> rel(0, nr - 1);
  Snapshot s{1, {}};
  for (std::size_t i = 0; i < n; ++i) s.facts.push_back({ent(rng), rel(rng), ent(rng), 1});
  return s;
}

ParamSet scaled_params(std::size_t ne, std::size_t nr, std::size_t d, std::uint64_t seed,
                       double scale) {
  ParamSet p = init_params(ne, nr, d, seed);
  p.entity *= scale;
  p.relation *= scale;
  return p;
}

}  // namespace

TEST_CASE("score by hand") {
  ParamSet p = ParamSet::zeros(2, 1, 2);
  p.entity.row(0) << 1, 2;
  p.entity.row(1) << 3, 4;
  p.relation.row(0) << 1, 0;
  p.other << 1, 1;
  const std::vector<EntityId> cands = {1};
  CHECK(kBackbone.score(p, 0, 0, cands)[0] == doctest::Approx(3.0));
  p.other.setZero();
  const std::vector<EntityId> both = {0, 1};
  for (double s : kBackbone.score(p, 0, 0, both)) CHECK(s == 0.0);
}

TEST_CASE("score matches the scalar triple loop") {
  const ParamSet p = init_params(9, 2, 4, 0);
  const std::vector<EntityId> cands = {3, 0, 8, 5, 5};
  const auto scores = kBackbone.score(p, 2, 3, cands);
  for (std::size_t i = 0; i < cands.size(); ++i) {
    CHECK(scores[i] == doctest::Approx(oracle::naive_score(p, 2, 3, cands[i])).epsilon(1e-12));
  }
  std::vector<double> all(9);
  kBackbone.score_all(p, 2, 3, all);
  for (EntityId e = 0; e < 9; ++e) {
    CHECK(all[e] == doctest::Approx(oracle::naive_score(p, 2, 3, e)).epsilon(1e-12));
  }
}

TEST_CASE("permuting candidates permutes scores") {
  std::mt19937_64 rng(5);
  const ParamSet p = init_params(12, 3, 5, 1);
  std::vector<EntityId> cands(12);
  std::iota(cands.begin(), cands.end(), 0);
  const auto base = kBackbone.score(p, 4, 1, cands);
  std::shuffle(cands.begin(), cands.end(), rng);
  const auto shuffled = kBackbone.score(p, 4, 1, cands);
  for (std::size_t i = 0; i < cands.size(); ++i) CHECK(shuffled[i] == base[cands[i]]);
}

TEST_CASE("score rejects out-of-range ids") {
  const ParamSet p = init_params(4, 2, 3, 0);
  const std::vector<EntityId> ok = {0};
  const std::vector<EntityId> bad = {4};
  CHECK_THROWS_AS(kBackbone.score(p, 4, 0, ok), RangeError);
  CHECK_THROWS_AS(kBackbone.score(p, 0, 4, ok), RangeError);
  CHECK_THROWS_AS(kBackbone.score(p, 0, 0, bad), RangeError);
  const Snapshot s{1, {{0, 2, 1, 1}}};
  CHECK_THROWS_AS(kBackbone.loss(p, s), RangeError);
}

TEST_CASE("uniform softmax gives ln 2 per query") {
  ParamSet p = ParamSet::zeros(2, 1, 3);
  p.entity.setConstant(0.3);
  p.relation.setConstant(0.7);
  p.other.setOnes();
  const Snapshot s{1, {{0, 0, 1, 1}, {1, 0, 1, 1}}};
  CHECK(kBackbone.loss(p, s) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("loss vanishes as the gold score dominates") {
  // Object query favours e1 (gold), the inverse relation flips sign so the
  // subject query favours e0 (gold).
  ParamSet p = ParamSet::zeros(2, 1, 1);
  p.relation << 1, -1;
  p.other << 1;
  const Snapshot s{1, {{0, 0, 1, 1}}};
  double last = std::numeric_limits<double>::infinity();
  for (double scale : {1.0, 2.0, 5.0, 10.0}) {
    p.entity << scale, 2 * scale;
    const double l = kBackbone.loss(p, s);
    CHECK(l < last);
    last = l;
  }
  CHECK(last < 1e-6);
}

TEST_CASE("loss matches the direct softmax oracle and ignores fact order") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const ParamSet p = scaled_params(7, 3, 4, trial, 4.0);
    Snapshot s = random_snapshot(rng, 7, 3, 6);
    const double l = kBackbone.loss(p, s);
    CHECK(l == doctest::Approx(oracle::direct_loss(p, s)).epsilon(1e-12));
    std::shuffle(s.facts.begin(), s.facts.end(), rng);
    CHECK(kBackbone.loss(p, s) == doctest::Approx(l).epsilon(1e-13));
  }
  CHECK_THROWS_AS(kBackbone.loss(init_params(3, 1, 2, 0), Snapshot{1, {}}), Error);
}

TEST_CASE("grad returns exactly the loss of loss()") {
  std::mt19937_64 rng(9);
  const ParamSet p = scaled_params(10, 3, 4, 0, 3.0);
  const Snapshot s = random_snapshot(rng, 10, 3, 8);
  CHECK(kBackbone.grad(p, s).loss == kBackbone.loss(p, s));
}

TEST_CASE("single fact, d=1, |E|=2: hand-derived chain rule") {
  // L = 0.5 * (CE over w*e0*r*e_i with gold 1 + CE over w*e1*r'*e_i with gold 0),
  // differentiated symbolically at e0=1/2, e1=-1, r=2, r'=1/2, w=3/2.
  ParamSet p = ParamSet::zeros(2, 1, 1);
  p.entity << 0.5, -1.0;
  p.relation << 2.0, 0.5;
  p.other << 1.5;
  const Snapshot s{1, {{0, 0, 1, 1}}};
  const LossGrad lg = kBackbone.grad(p, s);
  CHECK(lg.loss == doctest::Approx(1.8781783475825310).epsilon(1e-13));
  CHECK(lg.grad.entity(0, 0) == doctest::Approx(2.9970447253780321).epsilon(1e-13));
  CHECK(lg.grad.entity(1, 0) == doctest::Approx(-1.3862207015140694).epsilon(1e-13));
  CHECK(lg.grad.relation(0, 0) == doctest::Approx(0.50886592599425091).epsilon(1e-13));
  CHECK(lg.grad.relation(1, 0) == doctest::Approx(0.84927936022608183).epsilon(1e-13));
  CHECK(lg.grad.other(0) == doctest::Approx(0.96158102140102849).epsilon(1e-13));
}

TEST_CASE("saturated softmax has ~zero gradient") {
  ParamSet p = ParamSet::zeros(2, 1, 1);
  p.entity << 20.0, -20.0;
  p.relation << 1.0, 1.0;
  p.other << 1.0;
  // Self-loop on e0: both directions score e0 at +400 and e1 at -400.
  const Snapshot s{1, {{0, 0, 0, 1}}};
  const LossGrad lg = kBackbone.grad(p, s);
  CHECK(lg.loss < 1e-12);
  for (std::size_t i = 0; i < lg.grad.size(); ++i) CHECK(std::abs(lg.grad.flat(i)) < 1e-12);
}

TEST_CASE("gradient matches central finite differences") {
  std::mt19937_64 rng(0);
  SUBCASE("seed-0 instance |E|=10 |R|=3 d=4 8 facts") {
    const ParamSet p = scaled_params(10, 3, 4, 0, 3.0);
    const Snapshot s = random_snapshot(rng, 10, 3, 8);
    const LossGrad lg = kBackbone.grad(p, s);
    const auto fd = oracle::fd_gradient([&](const ParamSet& q) { return kBackbone.loss(q, s); }, p);
    double worst = 0;
    for (std::size_t i = 0; i < fd.size(); ++i) {
      worst = std::max(worst, oracle::rel_err(lg.grad.flat(i), fd[i]));
    }
    CHECK(worst < 1e-4);
  }
  SUBCASE("random small instances") {
    for (int trial = 0; trial < 12; ++trial) {
      const std::size_t ne = 2 + rng() % 15, nr = 1 + rng() % 4, d = 1 + rng() % 8;
      const ParamSet p = scaled_params(ne, nr, d, trial, 2.5);
      const Snapshot s = random_snapshot(rng, static_cast<EntityId>(ne),
                                         static_cast<RelationId>(nr), 1 + rng() % 10);
      const LossGrad lg = kBackbone.grad(p, s);
      const auto fd =
          oracle::fd_gradient([&](const ParamSet& q) { return kBackbone.loss(q, s); }, p);
      for (std::size_t i = 0; i < fd.size(); ++i) {
        CHECK(oracle::rel_err(lg.grad.flat(i), fd[i]) < 1e-4);
      }
    }
  }
}

TEST_CASE("relation rows absent from the snapshot get exactly zero gradient") {
  const ParamSet p = init_params(6, 4, 3, 2);
  const Snapshot s{1, {{0, 1, 2, 1}, {3, 1, 4, 1}}};
  const LossGrad lg = kBackbone.grad(p, s);
  for (int r : {0, 2, 3, 4, 6, 7}) CHECK(lg.grad.relation.row(r).isZero(0.0));
  CHECK_FALSE(lg.grad.relation.row(1).isZero(0.0));
  CHECK_FALSE(lg.grad.relation.row(5).isZero(0.0));
}

TEST_CASE("init_params") {
  const ParamSet a = init_params(50, 4, 8, 17);
  const ParamSet b = init_params(50, 4, 8, 17);
  CHECK(a == b);
  CHECK(a.seed == 17);
  CHECK_FALSE(a == init_params(50, 4, 8, 18));
  const double ent_limit = std::sqrt(6.0 / (50 + 8));
  const double rel_limit = std::sqrt(6.0 / (8 + 8));
  CHECK(a.entity.cwiseAbs().maxCoeff() <= ent_limit);
  CHECK(a.relation.cwiseAbs().maxCoeff() <= rel_limit);
  CHECK(a.other == Vector::Ones(8));
  CHECK(a.relation.rows() == 8);
  CHECK_THROWS_AS(init_params(0, 1, 1, 0), RangeError);
  CHECK_THROWS_AS(init_params(1, 0, 1, 0), RangeError);
  CHECK_THROWS_AS(init_params(1, 1, 0, 0), RangeError);
}

TEST_CASE("init_params is centred") {
  const ParamSet p = init_params(1000, 5, 100, 0);
  CHECK(std::abs(p.entity.mean()) < 0.01);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  ParamSet p = init_params(13, 3, 5, 99);
  p.entity(0, 0) = -0.0;
  p.entity(1, 1) = 1e-310;
  std::stringstream buf;
  write_checkpoint(buf, p);
  const std::string bytes = buf.str();
  CHECK(bytes.size() == 4 + 4 + 8 * 4 + 8 * (13 * 5 + 6 * 5 + 5));
  const ParamSet back = read_checkpoint(buf);
  CHECK(back == p);
  CHECK(back.seed == 99);
  CHECK(std::signbit(back.entity(0, 0)));
  std::stringstream again;
  write_checkpoint(again, back);
  CHECK(again.str() == bytes);

  std::stringstream bad("XXXX");
  CHECK_THROWS_AS(read_checkpoint(bad), ParseError);
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_checkpoint(truncated), ParseError);
}

TEST_CASE("library finite-difference suite agrees") {
  const GradCheckSuiteResult r = run_gradcheck_suite(0, 4);
  CHECK(r.backbone.max_rel_error < 1e-4);
  CHECK(r.gates.max_rel_error < 1e-4);
  CHECK(r.instances == 4);
}
