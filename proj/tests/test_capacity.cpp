#include "entcap/capacity.hpp"

#include <catch2/catch_amalgamated.hpp>

#include "entcap/gco.hpp"
#include "entcap/metrics.hpp"
#include "oracles.hpp"

using namespace entcap;
using Catch::Approx;

namespace {

UnitaryOperator cz_operator() { return gco_build(cz_family()).unitary; }

UnitaryOperator controlled_phase_operator(double theta) {
  return gco_build(controlled_phase_family(theta)).unitary;
}

Vector plus2() {
  Vector v(2);
  v << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
  return v;
}

OptimizerOptions dual_opts(std::uint64_t seed, int restarts = 16) {
  OptimizerOptions opt;
  opt.seed = seed;
  opt.restarts = restarts;
  return opt;
}

}  // namespace

TEST_CASE("g_function closed values", "[capacity]") {
  const auto u1 = random_unitary(2, 1);
  const auto u2 = random_unitary(3, 2);
  const auto local = validate_unitary(kron(u1.matrix, u2.matrix), 1e-8);
  Rng rng(3);
  const Vector alpha = random_state_vector(2, rng);
  const Vector beta = random_state_vector(3, rng);
  CHECK(g_function(alpha, beta, u1, u2, local) == Approx(1.0).margin(1e-12));

  const auto cz = cz_operator();
  const auto id2 = validate_unitary(Matrix::Identity(2, 2));
  CHECK(g_function(plus2(), plus2(), id2, id2, cz) == Approx(0.5));

  CHECK_THROWS_AS(g_function(alpha, beta, u1, u2, cz), DimensionMismatchError);
}

TEST_CASE("G stays below the largest Schmidt coefficient and attains it at "
          "aligned unitaries",
          "[capacity]") {
  for (int t = 0; t < 25; ++t) {
    const auto u = random_unitary(6, 100 + t);
    Rng rng(200 + t);
    const Vector alpha = random_state_vector(2, rng);
    const Vector beta = random_state_vector(3, rng);
    const auto u1 = random_unitary(2, 300 + t);
    const auto u2 = random_unitary(3, 400 + t);
    const double g = g_function(alpha, beta, u1, u2, u);
    const double s1 = largest_schmidt_after(u, alpha, beta);
    CHECK(g <= s1 + 1e-12);

    // choosing U1 alpha = alpha_1, U2 beta = beta_1 realizes G = s1 (the
    // proved bound's exponent: G <= s1, not s1^2)
    const BipartiteState out(2, 3, u.matrix * kron_vector(alpha, beta));
    const auto sd = schmidt_decompose(out);
    const Matrix v1 = detail::complete_to_unitary(sd.left_basis.col(0)) *
                      detail::complete_to_unitary(alpha).adjoint();
    const Matrix v2 = detail::complete_to_unitary(sd.right_basis.col(0)) *
                      detail::complete_to_unitary(beta).adjoint();
    const double g_aligned =
        g_function(alpha, beta, validate_unitary(v1, 1e-8),
                   validate_unitary(v2, 1e-8), u);
    CHECK(g_aligned == Approx(s1).margin(1e-10));
  }
}

TEST_CASE("largest_schmidt_after known values", "[capacity]") {
  const auto local = validate_unitary(
      kron(random_unitary(2, 7).matrix, random_unitary(2, 8).matrix), 1e-8);
  Rng rng(9);
  CHECK(largest_schmidt_after(local, random_state_vector(2, rng),
                              random_state_vector(2, rng)) ==
        Approx(1.0).margin(1e-12));

  const auto cz = cz_operator();
  CHECK(largest_schmidt_after(cz, plus2(), plus2()) ==
        Approx(1.0 / std::sqrt(2.0)));

  Vector e0(2);
  e0 << 1.0, 0.0;
  CHECK(largest_schmidt_after(cz, e0, random_state_vector(2, rng)) ==
        Approx(1.0).margin(1e-12));
}

TEST_CASE("capacity_dual on product unitaries vanishes", "[capacity]") {
  const auto local = validate_unitary(
      kron(random_unitary(2, 11).matrix, random_unitary(2, 12).matrix), 1e-8);
  const auto res = capacity_dual(local, 2, 2, dual_opts(1, 8));
  CHECK(res.value == Approx(0.0).margin(1e-6));
  CHECK(*res.s_mu == Approx(1.0).margin(1e-12));
}

TEST_CASE("capacity_dual reproduces the CZ and controlled-phase closed forms",
          "[capacity]") {
  const auto cz_res = capacity_dual(cz_operator(), 2, 2, dual_opts(2));
  CHECK(cz_res.value == Approx(1.0 / std::sqrt(2.0)).margin(1e-4));
  CHECK(cz_res.bound_status == BoundStatus::NumericEstimate);
  REQUIRE(cz_res.witness_state.has_value());
}

TEST_CASE("capacity_dual controlled-phase half", "[capacity]") {
  const auto res =
      capacity_dual(controlled_phase_operator(0.5), 2, 2, dual_opts(3));
  const double closed = std::sqrt((1.0 - std::cos(std::numbers::pi / 4.0)) / 2.0);
  CHECK(res.value == Approx(closed).margin(1e-4));
  CHECK(res.value == Approx(0.3827).margin(1e-4));
}

TEST_CASE("capacity_dual agrees with the grid oracle on random 2x2 instances",
          "[capacity]") {
  for (const std::uint64_t seed : {21u, 22u, 23u}) {
    const auto u = random_unitary(4, seed);
    const double oracle = oracles::grid_min_largest_schmidt(u.matrix);
    const auto res = capacity_dual(u, 2, 2, dual_opts(seed));
    REQUIRE(res.s_mu.has_value());
    CHECK(*res.s_mu == Approx(oracle).margin(1e-3));
    CHECK(res.value ==
          Approx(std::sqrt(std::max(0.0, 1.0 - oracle * oracle))).margin(1e-3));
    // value and s_mu stay algebraically linked
    CHECK(res.value ==
          Approx(std::sqrt(1.0 - *res.s_mu * *res.s_mu)).margin(1e-12));
    // witness reproduces the reported s_mu
    const auto sd = schmidt_decompose(*res.witness_state);
    CHECK(sd.rank == 1);
    const Vector alpha = sd.left_basis.col(0);
    const Vector beta = sd.right_basis.col(0);
    CHECK(largest_schmidt_after(u, alpha, beta) ==
          Approx(*res.s_mu).margin(1e-10));
  }
}

TEST_CASE("capacity_dual range respects the dimension ceiling", "[capacity]") {
  for (const std::uint64_t seed : {31u, 32u}) {
    const auto u = random_unitary(6, seed);
    const auto res = capacity_dual(u, 2, 3, dual_opts(seed, 12));
    CHECK(res.value <= std::sqrt(1.0 - 1.0 / 2.0) + 1e-9);
    CHECK(res.value >= 0.0);
  }
}

TEST_CASE("capacity_primal on a local unitary is near zero", "[capacity]") {
  const auto local = validate_unitary(
      kron(random_unitary(2, 41).matrix, random_unitary(2, 42).matrix), 1e-8);
  const auto res = capacity_primal(local, 2, 2, PrimalOptions::seeded(5, 6, 8));
  CHECK(res.value < 1e-4);
}

TEST_CASE("capacity_primal reproduces the CZ value with and without swap",
          "[capacity]") {
  PrimalOptions popt = PrimalOptions::seeded(6, 8, 12);
  popt.include_swap = false;
  const auto plain = capacity_primal(cz_operator(), 2, 2, popt);
  CHECK(plain.value == Approx(1.0 / std::sqrt(2.0)).margin(2e-3));
  REQUIRE(plain.witness_local_unitary.has_value());
  CHECK_FALSE(plain.witness_local_unitary->swapped);

  popt.include_swap = true;
  const auto swapped = capacity_primal(cz_operator(), 2, 2, popt);
  CHECK(swapped.value == Approx(1.0 / std::sqrt(2.0)).margin(2e-3));

  // the winning local unitary achieves the reported distance
  const auto& wit = *swapped.witness_local_unitary;
  Matrix v = kron(wit.v1, wit.v2);
  if (wit.swapped) {
    v = detail::swap_operator(2) * v;
  }
  OptimizerOptions opts = dual_opts(7, 12);
  const double dpi_at_witness =
      d_restricted(cz_operator(), validate_unitary(v, 1e-8),
                   StateSet::pure_products(2, 2), opts)
          .value;
  CHECK(dpi_at_witness == Approx(swapped.value).margin(1e-3));
}

TEST_CASE("minimax inequality on random 2-qubit instances", "[capacity]") {
  for (const std::uint64_t seed : {51u, 52u}) {
    const auto u = random_unitary(4, seed);
    const auto ce = capacity_dual(u, 2, 2, dual_opts(seed));
    const auto c = capacity_primal(u, 2, 2, PrimalOptions::seeded(seed, 10, 12));
    CHECK(c.value >= ce.value - 2e-3);
  }
}

TEST_CASE("ce_upper_bound", "[capacity]") {
  CHECK(ce_upper_bound(1) == 0.0);
  CHECK(ce_upper_bound(2) == Approx(1.0 / std::sqrt(2.0)));
  CHECK(ce_upper_bound(3) == Approx(std::sqrt(2.0 / 3.0)));
  CHECK_THROWS_AS(ce_upper_bound(0), OutOfRangeError);
}

TEST_CASE("primal_lower_bound_if_maximal", "[capacity]") {
  const auto at_max = primal_lower_bound_if_maximal(1.0 / std::sqrt(2.0), 2);
  REQUIRE(at_max.has_value());
  CHECK(*at_max == Approx(1.0 / std::sqrt(2.0)));

  CHECK_FALSE(primal_lower_bound_if_maximal(0.3, 2).has_value());

  const auto dim3 = primal_lower_bound_if_maximal(std::sqrt(2.0 / 3.0), 3);
  REQUIRE(dim3.has_value());
  CHECK(*dim3 == Approx(std::sqrt(2.0 / 3.0)));
}

TEST_CASE("geometric entanglement of pure states", "[capacity]") {
  CHECK(geometric_entanglement_pure(random_product_state(2, 3, 61)) ==
        Approx(0.0).margin(1e-7));

  Vector bell(4);
  bell << 1.0 / std::sqrt(2.0), 0.0, 0.0, 1.0 / std::sqrt(2.0);
  CHECK(geometric_entanglement_pure(BipartiteState(2, 2, bell)) ==
        Approx(1.0 / std::sqrt(2.0)));

  // Monte-Carlo oracle over a million product states approaches from above
  for (const std::uint64_t seed : {2u, 7u}) {
    const auto psi = random_state(2, 2, seed);
    const double exact = geometric_entanglement_pure(psi);
    const double mc = oracles::sampled_min_product_distance(psi.amplitudes, 2,
                                                            2, 1000000, 555);
    CHECK(mc >= exact - 1e-9);
    CHECK(mc - exact < 2e-3);
  }
}

TEST_CASE("minimax_gap on CZ, locals, and controlled-W", "[capacity]") {
  const auto cz_gap =
      minimax_gap(cz_operator(), 2, 2, PrimalOptions::seeded(8, 8, 12), dual_opts(8));
  CHECK(std::abs(cz_gap.gap) < 2e-3);
  CHECK_FALSE(cz_gap.violation);

  const auto local = validate_unitary(
      kron(random_unitary(2, 71).matrix, random_unitary(2, 72).matrix), 1e-8);
  const auto local_gap =
      minimax_gap(local, 2, 2, PrimalOptions::seeded(9, 6, 8), dual_opts(9, 8));
  CHECK(local_gap.c_e == Approx(0.0).margin(1e-5));
  CHECK(local_gap.c == Approx(0.0).margin(1e-4));

  // controlled-W operators satisfy C = C_E
  const auto w = random_unitary(2, 74);
  const auto uw = gco_build(controlled_w_family(w.matrix)).unitary;
  const auto wgap =
      minimax_gap(uw, 2, 2, PrimalOptions::seeded(10, 8, 12), dual_opts(10));
  CHECK(std::abs(wgap.gap) < 2e-3);
  CHECK_FALSE(wgap.violation);
}

TEST_CASE("capacity theorem properties on sample instances", "[capacity]") {
  // single-instance versions; the acceptance suite runs the full schedule
  const auto u = random_unitary(4, 81);
  const auto x = validate_unitary(
      kron(random_unitary(2, 82).matrix, random_unitary(2, 83).matrix), 1e-8);

  const double ce = capacity_dual(u, 2, 2, dual_opts(11)).value;
  const double ce_left = capacity_dual(
      validate_unitary(x.matrix * u.matrix, 1e-8), 2, 2, dual_opts(12)).value;
  const double ce_right = capacity_dual(
      validate_unitary(u.matrix * x.matrix, 1e-8), 2, 2, dual_opts(13)).value;
  CHECK(std::abs(ce_left - ce) <= 2e-3);
  CHECK(std::abs(ce_right - ce) <= 2e-3);

  const double c = capacity_primal(u, 2, 2, PrimalOptions::seeded(14, 10, 12)).value;
  const double c_adj =
      capacity_primal(validate_unitary(u.matrix.adjoint()), 2, 2,
                      PrimalOptions::seeded(15, 10, 12))
          .value;
  CHECK(std::abs(c - c_adj) <= 5e-3);
}
