#include "entcap/optimize.hpp"

#include <catch2/catch_amalgamated.hpp>

#include "entcap/capacity.hpp"
#include "entcap/gco.hpp"
#include "entcap/metrics.hpp"
#include "oracles.hpp"

using namespace entcap;
using Catch::Approx;

namespace {

UnitaryOperator cz_operator() { return gco_build(cz_family()).unitary; }

OptimizerOptions quick_opts(std::uint64_t seed, int restarts = 16) {
  OptimizerOptions opt;
  opt.seed = seed;
  opt.restarts = restarts;
  return opt;
}

}  // namespace

TEST_CASE("maximize_over_product_states on a constant objective", "[optimize]") {
  auto constant = [](const Vector&, const Vector&) { return 0.375; };
  const auto run = maximize_over_product_states(constant, 2, 3, quick_opts(1, 4));
  CHECK(run.best_value == 0.375);
  CHECK(run.converged);
}

TEST_CASE("maximize_over_product_states matches the grid oracle on d_state",
          "[optimize]") {
  const auto cz = cz_operator();
  const auto id = validate_unitary(Matrix::Identity(4, 4));
  // oracle first: the dense grid puts the product max of d at 1.0 exactly
  // (the overlap 1 - 2|a_1|^2|b_1|^2 crosses zero), not at 1/sqrt(2)
  const double oracle = oracles::grid_max_d_product(id.matrix, cz.matrix);
  CHECK(oracle == Approx(1.0).margin(1e-6));

  auto objective = [&](const Vector& alpha, const Vector& beta) {
    return d_state(id, cz, BipartiteState(2, 2, kron_vector(alpha, beta)));
  };
  const auto run = maximize_over_product_states(objective, 2, 2, quick_opts(2));
  CHECK(run.best_value == Approx(oracle).margin(1e-4));
}

TEST_CASE("product-state minimization of s1 for CZ and locals", "[optimize]") {
  const auto cz = cz_operator();
  const double oracle = oracles::grid_min_largest_schmidt(cz.matrix);
  CHECK(oracle == Approx(1.0 / std::sqrt(2.0)).margin(1e-6));

  auto s1 = [&](const Vector& alpha, const Vector& beta) {
    return largest_schmidt_after(cz, alpha, beta);
  };
  const auto run = minimize_over_product_states(s1, 2, 2, quick_opts(3));
  CHECK(run.best_value == Approx(1.0 / std::sqrt(2.0)).margin(1e-4));

  // negated objective through the maximizer reaches -1/sqrt(2)
  auto neg = [&](const Vector& a, const Vector& b) { return -s1(a, b); };
  const auto mx = maximize_over_product_states(neg, 2, 2, quick_opts(4));
  CHECK(mx.best_value == Approx(-1.0 / std::sqrt(2.0)).margin(1e-4));

  const auto local = validate_unitary(
      kron(random_unitary(2, 5).matrix, random_unitary(2, 6).matrix), 1e-8);
  auto s1_local = [&](const Vector& alpha, const Vector& beta) {
    return largest_schmidt_after(local, alpha, beta);
  };
  const auto run_local =
      minimize_over_product_states(s1_local, 2, 2, quick_opts(7, 4));
  CHECK(run_local.best_value == Approx(1.0).margin(1e-12));
}

TEST_CASE("minimize_over_local_unitaries recovers local operators",
          "[optimize]") {
  const auto u = validate_unitary(
      kron(random_unitary(2, 41).matrix, random_unitary(2, 42).matrix), 1e-8);
  OptimizerOptions inner = quick_opts(1, 6);
  auto objective = [&](const Matrix& v1, const Matrix& v2, bool) {
    const auto v = validate_unitary(kron(v1, v2), 1e-6);
    return d_restricted(u, v, StateSet::pure_products(2, 2), inner).value;
  };
  OptimizerOptions opt = quick_opts(8, 6);
  opt.max_iters = 4000;
  opt.patience = 200;
  opt.f_tol = 1e-14;
  const auto run = minimize_over_local_unitaries(objective, 2, 2, false, opt);
  CHECK(run.best_value < 1e-6);
}

TEST_CASE("minimize_over_local_unitaries on CZ finds the paper witness value",
          "[optimize]") {
  const auto cz = cz_operator();

  // the paper's witness V1 = V2 = diag(1, i) achieves d_pi = 1/sqrt(2)
  Matrix vp = Matrix::Identity(2, 2);
  vp(1, 1) = Complex(0.0, 1.0);
  const auto v_paper = validate_unitary(kron(vp, vp));
  CHECK(d_eigenphase(cz, v_paper) == Approx(1.0 / std::sqrt(2.0)));
  const double dpi_paper =
      d_restricted(cz, v_paper, StateSet::pure_products(2, 2), quick_opts(11))
          .value;
  CHECK(dpi_paper == Approx(1.0 / std::sqrt(2.0)).margin(1e-4));

  OptimizerOptions inner = quick_opts(1, 8);
  auto objective = [&](const Matrix& v1, const Matrix& v2, bool) {
    const auto v = validate_unitary(kron(v1, v2), 1e-6);
    return d_restricted(cz, v, StateSet::pure_products(2, 2), inner).value;
  };
  std::vector<double> bests;
  for (const std::uint64_t seed : {13u, 14u}) {
    const auto run =
        minimize_over_local_unitaries(objective, 2, 2, false, quick_opts(seed, 10));
    bests.push_back(run.best_value);
    CHECK(run.best_value == Approx(1.0 / std::sqrt(2.0)).margin(1e-3));
  }
  // seed stability on the CZ instance
  CHECK(std::abs(bests[0] - bests[1]) < 1e-3);
}

TEST_CASE("nested_minimax solves the analytic box saddle", "[optimize]") {
  // F(x, y) = (x - y)^2 on [-1, 1]^2: max_y at y = -sign(x), giving
  // (|x| + 1)^2, minimized at x = 0 with value 1
  ChartSpec box;
  box.dim = 1;
  box.structured_starts = {Eigen::VectorXd::Constant(1, 0.7)};
  box.sample_start = [](Rng& rng) {
    return Eigen::VectorXd::Constant(1, 2.0 * rng.next_double() - 1.0);
  };
  box.project = [](Eigen::VectorXd& x) {
    x(0) = std::clamp(x(0), -1.0, 1.0);
  };

  OuterProblem make_inner = [](const Eigen::VectorXd& x) -> InnerObjective {
    const double xv = x(0);
    return [xv](const Eigen::VectorXd& y) {
      const double d = xv - y(0);
      return d * d;
    };
  };
  NestedOptions nopt;
  nopt.outer.restarts = 4;
  nopt.inner.restarts = 4;
  nopt.outer.seed = 5;
  nopt.inner.seed = 6;
  const auto res = nested_minimax(make_inner, box, box, nopt);
  CHECK(res.value == Approx(1.0).margin(1e-3));
  CHECK(std::abs(res.outer_point(0)) < 2e-3);
}

TEST_CASE("nested_minimax reproduces the CZ capacity", "[optimize]") {
  const auto cz = cz_operator();
  const auto res = capacity_primal(cz, 2, 2, PrimalOptions::seeded(3, 8, 12));
  CHECK(res.value == Approx(1.0 / std::sqrt(2.0)).margin(2e-3));
}

TEST_CASE("maximin never exceeds minimax on bilinear box problems",
          "[optimize]") {
  for (const std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    Rng rng(seed);
    Eigen::Matrix2d a;
    Eigen::Vector2d b, c;
    for (int i = 0; i < 2; ++i) {
      b(i) = rng.next_gaussian();
      c(i) = rng.next_gaussian();
      for (int j = 0; j < 2; ++j) {
        a(i, j) = rng.next_gaussian();
      }
    }
    auto f = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
      return (x.transpose() * a * y)(0) + b.dot(x) + c.dot(y);
    };

    ChartSpec box;
    box.dim = 2;
    box.structured_starts = {Eigen::VectorXd::Zero(2)};
    box.sample_start = [](Rng& r) {
      Eigen::VectorXd v(2);
      v << 2.0 * r.next_double() - 1.0, 2.0 * r.next_double() - 1.0;
      return v;
    };
    box.project = [](Eigen::VectorXd& v) {
      v(0) = std::clamp(v(0), -1.0, 1.0);
      v(1) = std::clamp(v(1), -1.0, 1.0);
    };
    NestedOptions nopt;
    nopt.outer.restarts = 4;
    nopt.inner.restarts = 4;
    nopt.outer.seed = seed;
    nopt.inner.seed = seed + 10;
    nopt.kick_rounds = 2;

    OuterProblem minimax_prob = [&](const Eigen::VectorXd& x) -> InnerObjective {
      Eigen::VectorXd xc = x;
      return [&f, xc](const Eigen::VectorXd& y) { return f(xc, y); };
    };
    const double big_m = nested_minimax(minimax_prob, box, box, nopt).value;

    // maximin via the negated dual ordering: max_y min_x F = -min_y max_x (-F)
    OuterProblem maximin_prob = [&](const Eigen::VectorXd& y) -> InnerObjective {
      Eigen::VectorXd yc = y;
      return [&f, yc](const Eigen::VectorXd& x) { return -f(x, yc); };
    };
    const double small_m = -nested_minimax(maximin_prob, box, box, nopt).value;

    CHECK(small_m <= big_m + 1e-6);
  }
}

TEST_CASE("optimizer runs are deterministic and restart-monotone",
          "[optimize]") {
  const auto cz = cz_operator();
  auto s1 = [&](const Vector& alpha, const Vector& beta) {
    return largest_schmidt_after(cz, alpha, beta);
  };
  const auto a = minimize_over_product_states(s1, 2, 2, quick_opts(100, 8));
  const auto b = minimize_over_product_states(s1, 2, 2, quick_opts(100, 8));
  CHECK(a.best_value == b.best_value);
  CHECK((a.best_point - b.best_point).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(a.per_restart_values.size() == b.per_restart_values.size());
  for (std::size_t i = 0; i < a.per_restart_values.size(); ++i) {
    CHECK(a.per_restart_values[i] == b.per_restart_values[i]);
  }

  // growing the restart schedule keeps the seed prefix, so the min shrinks
  const auto more = minimize_over_product_states(s1, 2, 2, quick_opts(100, 16));
  CHECK(more.best_value <= a.best_value);
  for (std::size_t i = 0; i < a.per_restart_values.size(); ++i) {
    CHECK(more.per_restart_values[i] == a.per_restart_values[i]);
  }
}

TEST_CASE("best points satisfy the manifold constraints", "[optimize]") {
  const auto cz = cz_operator();
  auto s1 = [&](const Vector& alpha, const Vector& beta) {
    return largest_schmidt_after(cz, alpha, beta);
  };
  const auto run = minimize_over_product_states(s1, 2, 2, quick_opts(5, 6));
  const auto [alpha, beta] = product_point(run.best_point, 2, 2);
  CHECK(alpha.norm() == Approx(1.0).margin(1e-10));
  CHECK(beta.norm() == Approx(1.0).margin(1e-10));

  OptimizerOptions inner = quick_opts(1, 4);
  auto objective = [&](const Matrix& v1, const Matrix& v2, bool) {
    CHECK(unitarity_residual_of(v1) < 1e-10);
    CHECK(unitarity_residual_of(v2) < 1e-10);
    const auto v = validate_unitary(kron(v1, v2), 1e-6);
    return d_restricted(cz, v, StateSet::pure_products(2, 2), inner).value;
  };
  OptimizerOptions opt = quick_opts(6, 2);
  opt.max_iters = 30;
  minimize_over_local_unitaries(objective, 2, 2, false, opt);
}

TEST_CASE("certificate never falls below the search value", "[optimize]") {
  const auto cz = cz_operator();
  const auto res = capacity_primal(cz, 2, 2, PrimalOptions::seeded(17, 6, 8));
  CHECK(res.value >= res.diagnostics.search_value - 1e-12);
}
