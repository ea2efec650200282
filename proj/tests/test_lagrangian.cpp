#include <doctest.h>

#include "cfse/group_sampler.hpp"
#include "cfse/lagrangian.hpp"
#include "oracles.hpp"

using namespace cfse;

namespace {

CMat diag(std::initializer_list<double> d) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(d.size()));
  Eigen::Index i = 0;
  for (double x : d) v(i++) = x;
  return v.cast<cplx>().asDiagonal();
}

DiscreteConfiguration config_of(std::vector<std::pair<CMat, double>> atoms, int f) {
  DiscreteConfiguration c;
  c.f = f;
  c.n = 1;
  c.sites = static_cast<int>(atoms.size());
  c.lattice_step = 1;
  int s = 0;
  for (auto& [m, w] : atoms) c.atoms.push_back({make_point(m, 1), 0.0, s++, w});
  c.t_lattice = {0.0};
  return c;
}

}  // namespace

TEST_CASE("kappa Lagrangian examples") {
  ModelParams p;
  auto e1 = make_point(diag({1, 0}), 1);
  auto e2 = make_point(diag({0, 1}), 1);
  auto d = make_point(diag({2, -1}), 1);
  CHECK(kappa_lagrangian(e1, e1, p) == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(kappa_lagrangian(e1, e2, p) == 0.0);
  ModelParams k3{3.0, 1, 0};
  CHECK(kappa_lagrangian(e1, e2, k3) == 0.0);
  CHECK(kappa_lagrangian(d, d, p) == doctest::Approx(29.5).epsilon(1e-14));
}

TEST_CASE("Lagrangian matches the full eigensolve oracle") {
  for (int t = 0; t < 300; ++t) {
    Rng rng = make_rng(derive_seed(21, "lag", static_cast<std::uint64_t>(t)));
    int f = 2 + t % 7;
    int n = 1 + t % std::min(3, f / 2);
    ModelParams p{0.5 + (t % 4), n, 0};
    auto x = random_point(f, n, rng);
    auto y = random_point(f, n, rng);
    double ref = oracle::full_lagrangian(x.matrix(), y.matrix(), n, p.kappa);
    CHECK(std::abs(kappa_lagrangian(x, y, p) - ref) <= 1e-9 * std::max(1.0, ref));
  }
}

TEST_CASE("Lagrangian symmetry, unitary invariance, diagonal positivity") {
  ModelParams p;
  for (int t = 0; t < 200; ++t) {
    Rng rng = make_rng(derive_seed(23, "sym", static_cast<std::uint64_t>(t)));
    int f = 2 + t % 5;
    auto x = random_point(f, 1, rng);
    auto y = random_point(f, 1, rng);
    CMat U = haar_sample(f, rng);
    double l = kappa_lagrangian(x, y, p);
    CHECK(std::abs(l - kappa_lagrangian(y, x, p)) <= 1e-10 * std::max(1.0, l));
    CHECK(std::abs(l - kappa_lagrangian(conjugate(U, x), conjugate(U, y), p)) <= 1e-9 * std::max(1.0, l));
    double lxx = kappa_lagrangian(x, x, p);
    // The chain spectrum of (x, x) is the squared spectrum of x.
    double sum_sq = x.nonzero_eigenvalues().squaredNorm();
    CHECK(lxx >= p.kappa * sum_sq * sum_sq * (1 - 1e-12));
    CHECK(lxx > 0);
  }
}

TEST_CASE("Lagrangian is continuous") {
  ModelParams p;
  Rng rng = make_rng(29);
  auto x = random_point(4, 1, rng);
  auto y = random_point(4, 1, rng);
  CMat A = CMat::Random(4, 4);
  A = (A + A.adjoint()).eval() / 2.0;
  Eigen::SelfAdjointEigenSolver<CMat> es(A);
  double prev = 1e300;
  for (double eps : {1e-1, 1e-2, 1e-3, 1e-4, 1e-5}) {
    Eigen::VectorXcd ph(4);
    for (int i = 0; i < 4; ++i) ph(i) = std::polar(1.0, eps * es.eigenvalues()(i));
    CMat V = es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
    double d = std::abs(kappa_lagrangian(conjugate(V, x), y, p) - kappa_lagrangian(x, y, p));
    CHECK(d <= prev);
    prev = d;
  }
  CHECK(prev < 1e-3);
}

TEST_CASE("causal action examples") {
  ModelParams p;
  CHECK(causal_action(config_of({{diag({1, 0}), 2.0}}, 2), p) == doctest::Approx(6.0).epsilon(1e-14));
  CHECK(causal_action(config_of({{diag({1, 0}), 1.0}, {diag({0, 1}), 1.0}}, 2), p) ==
        doctest::Approx(3.0).epsilon(1e-14));
  DiscreteConfiguration empty;
  empty.f = 2;
  empty.n = 1;
  CHECK(causal_action(empty, p) == 0.0);
}

TEST_CASE("EL function examples") {
  auto c = config_of({{diag({1, 0}), 1.0}}, 2);
  ModelParams p{1.0, 1, 1.5};
  CHECK(ell(make_point(diag({1, 0}), 1), c, p) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(ell(make_point(diag({0, 1}), 1), c, p) == doctest::Approx(-1.5).epsilon(1e-14));
  DiscreteConfiguration empty;
  empty.f = 2;
  empty.n = 1;
  CHECK(ell(make_point(diag({1, 0}), 1), empty, ModelParams{}) == 0.0);
}

TEST_CASE("EL residual examples") {
  auto c = config_of({{diag({1, 0}), 2.0}}, 2);
  ModelParams tuned{1.0, 1, 2.0 * 1.5};
  CHECK(el_residual(c, tuned, 1).max_abs_on_M == doctest::Approx(0.0));
  ModelParams zero{1.0, 1, 0.0};
  CHECK(el_residual(c, zero, 1).max_abs_on_M == doctest::Approx(3.0));
  DiscreteConfiguration empty;
  empty.f = 2;
  empty.n = 1;
  auto r = el_residual(empty, zero, 1);
  CHECK(r.max_abs_on_M == 0.0);
  CHECK(r.min_off_M_probe == 0.0);
}

TEST_CASE("minimal atom level makes ell nonnegative on the support") {
  auto vac = oracle::small_vacuum();
  ModelParams p;
  p.s_param = minimal_atom_level(vac, p);
  double lowest = 1e300;
  for (const auto& a : vac.atoms) lowest = std::min(lowest, ell(a.point, vac, p));
  CHECK(lowest == doctest::Approx(0.0).epsilon(1e-12));
}
