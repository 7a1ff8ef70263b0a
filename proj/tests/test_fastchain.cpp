#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "doctest.h"
#include "oracles.hpp"
#include "twoscale/csma.hpp"
#include "twoscale/fastchain.hpp"
#include "twoscale/meanfield.hpp"

using namespace twoscale;

namespace {

double inf_norm(const Matrix& m) { return m.lpNorm<Eigen::Infinity>(); }

void check_identities(const FastChainAnalysis& a) {
  const auto m = a.K.rows();
  const Matrix I = Matrix::Identity(m, m);
  CHECK(inf_norm(a.K.rowwise().sum()) <= 1e-12);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      if (i != j) CHECK(a.K(i, j) >= 0.0);
    }
  }
  CHECK(a.pi.minCoeff() >= 0.0);
  CHECK(std::abs(a.pi.sum() - 1.0) <= 1e-12);
  CHECK(inf_norm(a.pi.transpose() * a.K) <= 1e-10);
  CHECK(inf_norm(a.K * a.Kplus - (I - a.Pi)) <= 1e-10);
  CHECK(inf_norm(a.Pi * a.Kplus) <= 1e-10);
  CHECK(inf_norm(a.Pi * a.KPiInv - a.Pi) <= 1e-10);
  CHECK(inf_norm(a.Kplus.rowwise().sum()) <= 1e-12);
}

}  // namespace

TEST_SUITE("fastchain") {
  TEST_CASE("symmetric two-state chain") {
    Matrix K(2, 2);
    K << -1, 1, 1, -1;
    const Vector pi = stationary_distribution(K);
    CHECK(pi[0] == doctest::Approx(0.5));
    const Matrix Kp = deviation_matrix(K, pi);
    Matrix expected(2, 2);
    expected << -0.25, 0.25, 0.25, -0.25;
    CHECK(inf_norm(Kp - expected) <= 1e-14);
    Matrix IminusPi(2, 2);
    IminusPi << 0.5, -0.5, -0.5, 0.5;
    CHECK(inf_norm(K * Kp - IminusPi) <= 1e-14);
  }

  TEST_CASE("two-state balance") {
    const double a = 0.7, b = 2.3;
    Matrix K(2, 2);
    K << -a, a, b, -b;
    const Vector pi = stationary_distribution(K);
    CHECK(pi[0] == doctest::Approx(b / (a + b)).epsilon(1e-14));
    CHECK(pi[1] == doctest::Approx(a / (a + b)).epsilon(1e-14));
  }

  TEST_CASE("transient state gets zero mass") {
    // 0 -> 1 one way; 1 <-> 2 cycle.
    Matrix K(3, 3);
    K << -2, 2, 0, 0, -1, 1, 0, 3, -3;
    const Vector pi = stationary_distribution(K);
    const Matrix P = (K * 200.0).exp();
    CHECK(pi[0] == 0.0);
    CHECK(inf_norm(P.row(0).transpose() - pi) <= 1e-10);
  }

  TEST_CASE("reducible chain has no unique law") {
    Matrix K = Matrix::Zero(2, 2);
    CHECK_THROWS_WITH_AS(stationary_distribution(K), "no unique stationary distribution",
                         NumericalError);
  }

  TEST_CASE("negative rate names the fast pair") {
    std::vector<Transition> trs;
    trs.push_back({Vector::Zero(1), 1, [](const Vector&, FastIndex) { return -1.0; }, {}, 0, "neg"});
    TwoTimescaleModel m(1, {"a", "b"}, std::move(trs), Vector::Zero(1), Vector::Ones(1));
    CHECK_THROWS_WITH_AS(build_kernel(m, Vector::Constant(1, 0.5)),
                         doctest::Contains("(0, 1)"), NumericalError);
  }

  TEST_CASE("Poisson solutions") {
    Matrix K(2, 2);
    K << -1, 1, 1, -1;
    FastChainAnalysis a;
    a.K = K;
    a.pi = stationary_distribution(K);
    a.Pi = Vector::Ones(2) * a.pi.transpose();
    a.Kplus = deviation_matrix(K, a.pi);
    CHECK(inf_norm(solve_fast_poisson(a, Matrix::Constant(2, 1, 4.0))) <= 1e-15);
    Matrix h(2, 1);
    h << 1, 0;
    const Matrix G = solve_fast_poisson(a, h);
    CHECK(G(0, 0) == doctest::Approx(-0.25));
    CHECK(G(1, 0) == doctest::Approx(0.25));
    CHECK_THROWS_AS(solve_fast_poisson(a, Matrix::Zero(3, 1)), ValidationError);
  }

  TEST_CASE("CSMA kernel entries") {
    const CsmaSpec spec = csma_three_node();
    const auto model = build_csma(spec);
    const auto ys = enumerate_feasible_activations(spec.adjacency);
    std::mt19937_64 rng(3);
    const Vector x = oracle::csma_random_x(rng, 3, 10);
    const Matrix K = build_kernel(model, x);
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t y : csma_startable_states(ys, spec.adjacency, c)) {
        Activation up = ys[y];
        up[c] = 1;
        const auto t = std::find(ys.begin(), ys.end(), up) - ys.begin();
        CHECK(K(static_cast<Eigen::Index>(y), t) ==
              doctest::Approx(spec.nu[c] * x[static_cast<Eigen::Index>(c * 10)]).epsilon(1e-14));
      }
      for (std::size_t y : csma_active_states(ys, c)) {
        Activation down = ys[y];
        down[c] = 0;
        const auto t = std::find(ys.begin(), ys.end(), down) - ys.begin();
        CHECK(K(static_cast<Eigen::Index>(y), t) == doctest::Approx(spec.mu[c]));
      }
    }
    // With empty first levels only completions remain.
    const Matrix K0 = build_kernel(model, Vector::Zero(30));
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t y : csma_startable_states(ys, spec.adjacency, c)) {
        Activation up = ys[y];
        up[c] = 1;
        const auto t = std::find(ys.begin(), ys.end(), up) - ys.begin();
        CHECK(K0(static_cast<Eigen::Index>(y), t) == 0.0);
      }
    }
  }

  TEST_CASE("identities and product form on random CSMA states") {
    for (const CsmaSpec& spec : {csma_three_node(), csma_five_node()}) {
      const auto model = build_csma(spec);
      const auto ys = enumerate_feasible_activations(spec.adjacency);
      std::mt19937_64 rng(5);
      for (int k = 0; k < 10; ++k) {
        const Vector x = oracle::csma_random_x(rng, spec.classes(), spec.buffer);
        const auto a = analyze(model, x, false);
        check_identities(a);
        const Vector pf = oracle::csma_pi(ys, spec.nu, spec.mu, spec.buffer, x);
        CHECK(inf_norm(a.pi - pf) <= 1e-10);
        // Poisson residual with the drift columns.
        const Matrix F = drift_matrix(model, x);
        const Matrix G = solve_fast_poisson(a, F);
        const Matrix rhs = F - Vector::Ones(F.rows()) * (a.pi.transpose() * F);
        CHECK(inf_norm(a.K * G - rhs) <= 1e-9);
        CHECK(inf_norm(a.pi.transpose() * G) <= 1e-10);
        // Shift invariance: G + 1 c^T satisfies the same equation.
        const Matrix G2 = G + Vector::Ones(G.rows()) * Vector::Constant(G.cols(), 3.0).transpose();
        CHECK(inf_norm(a.K * G2 - rhs) <= 1e-9);
      }
    }
  }

  TEST_CASE("identities at the centre of the 3-node box") {
    const auto model = build_csma(csma_three_node());
    check_identities(analyze(model, Vector::Constant(30, 0.5), false));
  }

  TEST_CASE("derivatives match finite differences on CSMA") {
    const CsmaSpec spec = csma_five_node();
    const auto model = build_csma(spec);
    std::mt19937_64 rng(9);
    const Vector x = oracle::csma_random_x(rng, spec.classes(), spec.buffer);
    const auto a = analyze(model, x, true);
    const double h = 1e-5;
    for (Eigen::Index i : {Eigen::Index{0}, Eigen::Index{10}, Eigen::Index{25}, Eigen::Index{41}}) {
      Vector p = x, m = x;
      p[i] += h;
      m[i] -= h;
      const Vector pp = stationary_distribution(build_kernel(model, p));
      const Vector pm = stationary_distribution(build_kernel(model, m));
      const Vector dpi = (pp - pm) / (2 * h);
      const Matrix kp = deviation_matrix(build_kernel(model, p), pp);
      const Matrix km = deviation_matrix(build_kernel(model, m), pm);
      const Matrix dkp = (kp - km) / (2 * h);
      const auto ii = static_cast<std::size_t>(i);
      CHECK(inf_norm(a.dPi[ii].row(0).transpose() - dpi) <= 1e-6 * (1 + dpi.lpNorm<Eigen::Infinity>()));
      CHECK(inf_norm(a.dKplus[ii] - dkp) <= 1e-6 * (1 + inf_norm(dkp)));
    }
  }

  TEST_CASE("x-independent kernel has zero derivatives") {
    std::vector<Transition> trs;
    trs.push_back({Vector::Zero(1), 1, [](const Vector&, FastIndex y) { return y == 0 ? 2.0 : 0.0; },
                   [](const Vector&, FastIndex) { return Vector::Zero(1).eval(); }, 0, ""});
    trs.push_back({Vector::Zero(1), 0, [](const Vector&, FastIndex y) { return y == 1 ? 1.0 : 0.0; },
                   [](const Vector&, FastIndex) { return Vector::Zero(1).eval(); }, 1, ""});
    TwoTimescaleModel m(1, {"a", "b"}, std::move(trs), Vector::Zero(1), Vector::Ones(1));
    const auto a = analyze(m, Vector::Constant(1, 0.3));
    CHECK(inf_norm(a.dK[0]) == 0.0);
    CHECK(inf_norm(a.dPi[0]) == 0.0);
    CHECK(inf_norm(a.dKplus[0]) == 0.0);
  }

  TEST_CASE("analytic and finite-difference kernel gradients agree") {
    const CsmaSpec spec = csma_three_node();
    const auto model = build_csma(spec);
    // Same catalog without gradients forces finite differences.
    std::vector<Transition> trs = model.transitions();
    for (auto& tr : trs) tr.rate_gradient = nullptr;
    TwoTimescaleModel fd(model.dx(), model.fast_states(), trs, model.box_lower(), model.box_upper());
    std::mt19937_64 rng(21);
    const Vector x = oracle::csma_random_x(rng, 3, 10);
    const auto ga = kernel_gradient(model, x);
    const auto gf = kernel_gradient(fd, x);
    for (std::size_t i = 0; i < ga.size(); ++i) {
      CHECK(inf_norm(ga[i] - gf[i]) <= 1e-6 * (1 + inf_norm(ga[i])));
    }
  }
}
