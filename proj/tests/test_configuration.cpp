#include <doctest.h>

#include <numbers>

#include "cfse/configuration.hpp"
#include "cfse/errors.hpp"
#include "cfse/group_sampler.hpp"
#include "cfse/lagrangian.hpp"
#include "oracles.hpp"

using namespace cfse;

namespace {

double maxdiff(const CMat& a, const CMat& b) { return (a - b).cwiseAbs().maxCoeff(); }

OperatorPoint diagonal_seed() {
  CMat m = CMat::Zero(2, 2);
  m(0, 0) = 1;
  return make_point(m, 1);
}

OperatorPoint plus_seed() {
  Eigen::VectorXcd v(2);
  v << 1, 1;
  return make_point(projector(v), 1);
}

}  // namespace

TEST_CASE("static vacuum construction") {
  auto vac = build_static_vacuum(2, 1, {0, 1}, 1.0, 8, {plus_seed()}, {1.0});
  REQUIRE(vac.size() == 8);
  CMat H = CMat::Zero(2, 2);
  H(1, 1) = 2 * std::numbers::pi;
  for (std::size_t m = 0; m < 8; ++m) {
    const auto& a = vac.atoms[m];
    CHECK(a.point.matrix().trace().real() == doctest::Approx(1.0).epsilon(1e-12));
    CMat U = time_translation(a.t, H);
    CHECK(maxdiff(a.point.matrix(), U * plus_seed().matrix() * U.adjoint()) < 1e-12);
    for (std::size_t k = 0; k < 8; ++k) {
      // Any two atoms of the orbit are conjugate by the translation between them.
      CMat V = time_translation(vac.atoms[k].t - a.t, H);
      CHECK(maxdiff(V * a.point.matrix() * V.adjoint(), vac.atoms[k].point.matrix()) < 1e-9);
    }
  }
  auto still = build_static_vacuum(2, 1, {0, 1}, 1.0, 8, {diagonal_seed()}, {1.0});
  for (const auto& a : still.atoms) CHECK(maxdiff(a.point.matrix(), diagonal_seed().matrix()) < 1e-15);
}

TEST_CASE("static vacuum validation") {
  auto expect = [](ErrorKind k, const std::function<void()>& fn) {
    try {
      fn();
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.kind() == k);
    }
  };
  expect(ErrorKind::NonPeriodicGenerator, [] { build_static_vacuum(2, 1, {0, 1.5}, 1.0, 8, {plus_seed()}, {1.0}); });
  Rng rng = make_rng(1);
  auto wrong = random_point(3, 1, rng);
  expect(ErrorKind::InvalidSeed, [&] { build_static_vacuum(2, 1, {0, 1}, 1.0, 8, {wrong}, {1.0}); });
}

TEST_CASE("vacuum volume and static consistency") {
  auto vac = oracle::small_vacuum(11, 4, false);
  double total = 0;
  for (const auto& a : vac.atoms) total += a.weight;
  CHECK(total == doctest::Approx(vac.period * 4.0).epsilon(1e-12));
  const CMat& H = vac.static_info->generator;
  const double step = vac.lattice_step;
  for (const auto& a : vac.atoms) {
    CMat U = time_translation(step, H);
    double t_next = std::fmod(a.t + step, vac.period);
    for (const auto& b : vac.atoms)
      if (b.site == a.site && std::abs(b.t - t_next) < 1e-12)
        CHECK(maxdiff(U * a.point.matrix() * U.adjoint(), b.point.matrix()) < 1e-9);
  }
}

TEST_CASE("pushforward") {
  auto vac = oracle::small_vacuum(11, 3, false);
  auto same = pushforward(vac, CMat::Identity(4, 4));
  for (std::size_t i = 0; i < vac.size(); ++i) CHECK(maxdiff(same.atoms[i].point.matrix(), vac.atoms[i].point.matrix()) == 0.0);

  // A lattice translation permutes the atoms within each site.
  const double step = vac.lattice_step;
  auto shifted = pushforward(vac, time_translation(2 * step, vac.static_info->generator));
  for (const auto& a : shifted.atoms) {
    double t = std::fmod(a.t + 2 * step, vac.period);
    bool found = false;
    for (const auto& b : vac.atoms)
      if (b.site == a.site && std::abs(b.t - t) < 1e-12) found = maxdiff(a.point.matrix(), b.point.matrix()) < 1e-9;
    CHECK(found);
  }

  Rng rng = make_rng(2);
  ModelParams p;
  CMat U = haar_sample(4, rng);
  CHECK(causal_action(pushforward(vac, U), p) == doctest::Approx(causal_action(vac, p)).epsilon(1e-10));
  CHECK_THROWS_AS(pushforward(vac, 1.1 * CMat::Identity(4, 4)), Error);
}

TEST_CASE("apply_cutoff") {
  auto vac = oracle::small_vacuum(11, 2, false);
  auto one = apply_cutoff(vac, [](double) { return 1.0; });
  REQUIRE(one.size() == vac.size());
  for (std::size_t i = 0; i < vac.size(); ++i) CHECK(one.atoms[i].weight == vac.atoms[i].weight);
  auto again = apply_cutoff(one, [](double) { return 1.0; });
  CHECK(configuration_checksum(again) == configuration_checksum(one));
  CHECK(apply_cutoff(vac, [](double) { return 0.0; }).size() == 0);

  auto cut = default_cutoff(vac, 0.5, 0.1);
  auto eta = apply_cutoff(vac, cut);
  std::size_t k = 0;
  for (const auto& a : vac.atoms) {
    double e = cut.eta(a.t);
    if (e == 0) continue;
    REQUIRE(k < eta.size());
    CHECK(eta.atoms[k].weight == a.weight * e);
    ++k;
  }
  CHECK(k == eta.size());
}

TEST_CASE("cutoff shapes") {
  auto vac = oracle::small_vacuum(11, 1, false);
  auto cut = default_cutoff(vac, 0.5, 0.1);
  for (int i = 0; i <= 1000; ++i) {
    double t = i / 1000.0;
    double e = cut.eta(t);
    CHECK(e >= 0.0);
    CHECK(e <= 1.0);
    if (t >= 0.4 && t <= 0.6) CHECK(e == 1.0);
    if (t <= 0.1 || t >= 0.9) CHECK(e == 0.0);
  }
  auto soft = softened_cutoff(vac, 40.0);
  for (int i = 0; i <= 100; ++i) {
    double s = i / 100.0;
    CHECK(soft.theta(0.5, s) >= 0.0);
    double h = 1e-6;
    double fd = (soft.eta_window(0.5 + h, s) - soft.eta_window(0.5 - h, s)) / (2 * h);
    CHECK(soft.theta(0.5, s) == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("past masks") {
  auto vac = oracle::small_vacuum(11, 2, false);
  auto none = past_mask(vac, -1.0);
  auto all = past_mask(vac, 10.0);
  for (auto m : none) CHECK(m == 0);
  for (auto m : all) CHECK(m == 1);

  PastSet T{{0.25, 0.625}};
  auto mask = past_mask(vac, T);
  for (std::size_t a = 0; a < vac.size(); ++a)
    CHECK(mask[a] == (vac.atoms[a].t <= T.T[static_cast<std::size_t>(vac.atoms[a].site)] ? 1 : 0));

  // Monotone in T; fractional membership agrees on lattice values.
  Rng rng = make_rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    PastSet lo{{u(rng), u(rng)}};
    PastSet hi{{lo.T[0] + u(rng) * 0.3, lo.T[1] + u(rng) * 0.3}};
    auto ml = past_mask(vac, lo), mh = past_mask(vac, hi);
    for (std::size_t a = 0; a < vac.size(); ++a) CHECK(ml[a] <= mh[a]);
    auto cl = membership(vac, lo), ch = membership(vac, hi);
    for (std::size_t a = 0; a < vac.size(); ++a) {
      CHECK(cl[a] <= ch[a]);
      CHECK(cl[a] >= 0.0);
      CHECK(cl[a] <= 1.0);
    }
    PastSet lat{{vac.lattice_step * static_cast<int>(u(rng) * 8), vac.lattice_step * static_cast<int>(u(rng) * 8)}};
    auto chi = membership(vac, lat);
    auto m = past_mask(vac, lat);
    for (std::size_t a = 0; a < vac.size(); ++a) CHECK(chi[a] == static_cast<double>(m[a]));
  }
}

TEST_CASE("site regions") {
  auto vac = oracle::small_vacuum(11, 3, false);
  auto r = site_region(vac, {true, false, true});
  for (std::size_t a = 0; a < vac.size(); ++a) CHECK(r[a] == (vac.atoms[a].site != 1 ? 1 : 0));
}

TEST_CASE("perturbations") {
  auto vac = oracle::small_vacuum();
  auto zero = perturb(vac, 0.0, 5);
  for (std::size_t i = 0; i < vac.size(); ++i) CHECK(maxdiff(zero.atoms[i].point.matrix(), vac.atoms[i].point.matrix()) < 1e-15);
  CHECK(configuration_checksum(perturb(vac, 0.2, 5)) == configuration_checksum(perturb(vac, 0.2, 5)));
  CHECK(configuration_checksum(perturb(vac, 0.2, 5)) != configuration_checksum(perturb(vac, 0.2, 6)));

  auto small = build_static_vacuum(2, 1, {0, 1}, 1.0, 8, {plus_seed()}, {1.0});
  auto p = perturb(small, 0.1, 3);
  for (const auto& a : p.atoms) {
    CHECK(a.point.matrix().trace().real() == doctest::Approx(1.0).epsilon(1e-10));
    CHECK_NOTHROW(make_point(a.point.matrix(), 1));
  }
}

TEST_CASE("JSON round trip is bit faithful") {
  auto vac = perturb(oracle::small_vacuum(), 0.2, 8);
  auto back = configuration_from_json(to_json(vac));
  REQUIRE(back.size() == vac.size());
  for (std::size_t i = 0; i < vac.size(); ++i) {
    CHECK(maxdiff(back.atoms[i].point.matrix(), vac.atoms[i].point.matrix()) == 0.0);
    CHECK(back.atoms[i].weight == vac.atoms[i].weight);
    CHECK(back.atoms[i].t == vac.atoms[i].t);
  }
  CHECK(configuration_checksum(back) == configuration_checksum(vac));
  auto st = configuration_from_json(to_json(oracle::small_vacuum()));
  REQUIRE(st.static_info);
  CHECK(maxdiff(st.static_info->generator, oracle::small_vacuum().static_info->generator) == 0.0);
  CHECK_THROWS_AS(configuration_from_json("{not json"), Error);
}
