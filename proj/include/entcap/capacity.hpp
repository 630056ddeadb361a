#pragma once

#include "entcap/linalg.hpp"
#include "entcap/metrics.hpp"
#include "entcap/optimize.hpp"

#include <limits>
#include <memory>
#include <optional>

namespace entcap {

// ---------------------------------------------------------------------------
// Results

enum class CapacityKind { Primal_C, Dual_CE };

enum class BoundStatus { Exact_ClosedForm, NumericUpperBound, NumericEstimate };

struct LocalUnitaryWitness {
  Matrix v1;
  Matrix v2;
  bool swapped = false;
};

struct CapacityDiagnostics {
  int restarts = 0;
  long evaluations = 0;
  double best_second_spread = 0.0;  // gap between best and runner-up restart
  bool converged = false;
  double search_value = std::numeric_limits<double>::quiet_NaN();
  double certified_lower = std::numeric_limits<double>::quiet_NaN();
  double certified_upper = std::numeric_limits<double>::quiet_NaN();
};

struct CapacityResult {
  double value = 0.0;
  CapacityKind kind = CapacityKind::Dual_CE;
  std::optional<BipartiteState> witness_state;
  std::optional<LocalUnitaryWitness> witness_local_unitary;
  std::optional<double> s_mu;
  BoundStatus bound_status = BoundStatus::NumericEstimate;
  CapacityDiagnostics diagnostics;
};

struct GapReport {
  double c_e = 0.0;
  double c = 0.0;
  double gap = 0.0;  // c - c_e; the minimax inequality keeps this >= 0
  bool violation = false;
  CapacityResult dual;
  CapacityResult primal;
};

// ---------------------------------------------------------------------------
// Pointwise quantities

/// G(alpha, beta, U1, U2; U) = |<alpha|<beta| U1^dag (x) U2^dag U |alpha>|beta>|.
inline double g_function(const Vector& alpha, const Vector& beta,
                         const UnitaryOperator& u1, const UnitaryOperator& u2,
                         const UnitaryOperator& u) {
  if (u1.dim != alpha.size() || u2.dim != beta.size() ||
      u.dim != alpha.size() * beta.size()) {
    throw DimensionMismatchError("g_function: incompatible dimensions");
  }
  const Vector lhs = kron_vector(u1.matrix * alpha, u2.matrix * beta);
  const Vector rhs = u.matrix * kron_vector(alpha, beta);
  return clamp01(std::abs(Complex(lhs.adjoint() * rhs)));
}

/// Largest Schmidt coefficient of U(alpha (x) beta).
inline double largest_schmidt_after(const UnitaryOperator& u, const Vector& alpha,
                                    const Vector& beta) {
  const int m = static_cast<int>(alpha.size());
  const int n = static_cast<int>(beta.size());
  if (u.dim != m * n) {
    throw DimensionMismatchError("largest_schmidt_after: dims");
  }
  const Vector out = u.matrix * kron_vector(alpha, beta);
  return largest_schmidt_coefficient(out, m, n);
}

/// Geometric entanglement of a pure state: distance to the closest pure
/// product state, sqrt(1 - s1^2).
inline double geometric_entanglement_pure(const BipartiteState& psi) {
  const double s1 =
      largest_schmidt_coefficient(psi.amplitudes, psi.dim_left, psi.dim_right);
  return clamp01(std::sqrt(std::max(0.0, 1.0 - s1 * s1)));
}

/// C_E(U) <= sqrt(1 - 1/r) for Schmidt rank r.
inline double ce_upper_bound(int r) {
  if (r < 1) {
    throw OutOfRangeError("ce_upper_bound: rank must be >= 1");
  }
  return std::sqrt(1.0 - 1.0 / static_cast<double>(r));
}

/// When C_E is maximal (within tol of sqrt(1-1/m)) the minimax inequality
/// turns it into a lower bound on C(U).
inline std::optional<double> primal_lower_bound_if_maximal(double ce, int m,
                                                           double tol = 2e-3) {
  if (m < 1) {
    throw OutOfRangeError("primal_lower_bound_if_maximal: m must be >= 1");
  }
  const double maximal = std::sqrt(1.0 - 1.0 / static_cast<double>(m));
  if (std::abs(ce - maximal) <= tol) {
    return maximal;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Dual capacity: C_E(U) = sqrt(1 - s_mu^2), s_mu the minimal largest Schmidt
// coefficient of U(alpha (x) beta) over product inputs.

inline CapacityResult capacity_dual(const UnitaryOperator& u, int m, int n,
                                    const OptimizerOptions& opts = {}) {
  if (u.dim != m * n) {
    throw DimensionMismatchError("capacity_dual: dims");
  }
  auto chart_objective = [&u, m, n](const Eigen::VectorXd& x) {
    ProductScratch& ws = decode_product_chart(x, m, n);
    const Eigen::Index d = u.matrix.rows();
    for (Eigen::Index r = 0; r < d; ++r) {
      ws.tmp[static_cast<std::size_t>(r)] = 0.0;
    }
    const Complex* col = u.matrix.data();
    for (Eigen::Index c = 0; c < d; ++c, col += d) {
      const Complex pc = ws.psi[static_cast<std::size_t>(c)];
      for (Eigen::Index r = 0; r < d; ++r) {
        ws.tmp[static_cast<std::size_t>(r)] += col[r] * pc;
      }
    }
    return largest_schmidt_coefficient(ws.tmp.data(), m, n);
  };
  auto start_for = [&](int k) -> Eigen::VectorXd {
    if (k == 0) {
      return uniform_superposition_chart(m, n);
    }
    Rng rng(derive_seed(opts.seed, static_cast<std::uint64_t>(k)));
    return random_product_chart(m, n, rng);
  };
  OptRunResult run =
      detail::multistart_min(chart_objective, product_chart_dim(m, n), start_for,
                             product_chart_projector(m, n), opts);
  if (!run.converged) {
    throw OptimizerFailureError("capacity_dual: search did not converge");
  }
  const double s_mu = run.best_value;
  auto [alpha, beta] = product_point(run.best_point, m, n);

  CapacityResult res;
  res.kind = CapacityKind::Dual_CE;
  res.value = clamp01(std::sqrt(std::max(0.0, 1.0 - s_mu * s_mu)));
  res.s_mu = s_mu;
  res.witness_state = BipartiteState(m, n, kron_vector(alpha, beta));
  // s_mu is approached from above, so the returned C_E estimates the true
  // value from below
  res.bound_status = BoundStatus::NumericEstimate;
  res.diagnostics.restarts = opts.restarts;
  res.diagnostics.evaluations = run.evaluations;
  res.diagnostics.converged = run.converged;
  std::vector<double> sorted = run.per_restart_values;
  std::sort(sorted.begin(), sorted.end());
  res.diagnostics.best_second_spread =
      sorted.size() > 1 ? sorted[1] - sorted[0] : 0.0;
  return res;
}

// ---------------------------------------------------------------------------
// Primal capacity: C(U) = min over product unitaries V of d_pi(U, V), the
// nested minimax of Eq. form min_V max_psi.

struct PrimalOptions {
  OptimizerOptions outer;  // restarts applies to outer starts
  OptimizerOptions inner;  // restarts applies to each converged inner solve
  std::optional<bool> include_swap;  // default: on when m == n

  PrimalOptions() {
    outer.restarts = 16;
    // outer values carry inner-solve noise, so stopping is coarser
    outer.max_iters = 300;
    outer.f_tol = 1e-6;
    outer.patience = 20;
    outer.step_min = 3e-5;
    inner.restarts = 24;
    inner.max_iters = 600;
  }

  static PrimalOptions seeded(std::uint64_t seed, int outer_restarts = 16,
                              int inner_restarts = 24) {
    PrimalOptions p;
    p.outer.seed = seed;
    p.inner.seed = derive_seed(seed, 0x5EEDu);
    p.outer.restarts = outer_restarts;
    p.inner.restarts = inner_restarts;
    return p;
  }
};

namespace detail {

// Completes a unit vector to a unitary with that vector as first column
// (Gram-Schmidt over basis vectors, re-orthogonalized once).
inline Matrix complete_to_unitary(Vector v) {
  const int m = static_cast<int>(v.size());
  v /= v.norm();
  Matrix q(m, m);
  q.col(0) = v;
  int filled = 1;
  for (int e = 0; e < m && filled < m; ++e) {
    Vector c = Vector::Zero(m);
    c(e) = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (int j = 0; j < filled; ++j) {
        c -= q.col(j) * Complex(q.col(j).adjoint() * c);
      }
    }
    const double nrm = c.norm();
    if (nrm > 1e-8) {
      q.col(filled++) = c / nrm;
    }
  }
  if (filled < m) {
    throw EigenFailureError("complete_to_unitary: completion failed");
  }
  return q;
}

inline Matrix swap_operator(int m) {
  Matrix s = Matrix::Zero(m * m, m * m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      s(i * m + j, j * m + i) = 1.0;
    }
  }
  return s;
}

struct PrimalBranchResult {
  NestedResult nested;
  bool swapped = false;
};

// Local unitaries aligned with the Schmidt frame of U(alpha* (x) beta*) at
// the dual witness: the G-function maximizer there, a strong outer start
// wherever minimax duality holds or nearly holds.
struct AlignedStarts {
  std::optional<Eigen::VectorXd> plain;
  std::optional<Eigen::VectorXd> swapped;
};

inline AlignedStarts dual_aligned_starts(const UnitaryOperator& u, int m, int n,
                                         const PrimalOptions& popt) {
  AlignedStarts out;
  try {
    OptimizerOptions dual_opt;
    dual_opt.seed = derive_seed(popt.outer.seed, 0xD0A1u);
    dual_opt.restarts = 8;
    const CapacityResult dual = capacity_dual(u, m, n, dual_opt);
    const BipartiteState& psi = *dual.witness_state;
    const SchmidtDecomposition in_sd = schmidt_decompose(psi);
    const Vector alpha = in_sd.left_basis.col(0);
    const Vector beta = in_sd.right_basis.col(0);
    const BipartiteState out_state(m, n, u.matrix * psi.amplitudes);
    const SchmidtDecomposition out_sd = schmidt_decompose(out_state);
    const Matrix qa = complete_to_unitary(alpha).adjoint();
    const Matrix qb = complete_to_unitary(beta).adjoint();
    Eigen::VectorXd chart(unitary_chart_dim(m) + unitary_chart_dim(n));
    chart.head(unitary_chart_dim(m)) =
        unitary_to_chart(out_sd.left_basis * qa);
    chart.tail(unitary_chart_dim(n)) =
        unitary_to_chart(out_sd.right_basis * qb);
    out.plain = chart;
    if (m == n) {
      Eigen::VectorXd swapped(chart.size());
      swapped.head(unitary_chart_dim(m)) =
          unitary_to_chart(out_sd.right_basis * qa);
      swapped.tail(unitary_chart_dim(n)) =
          unitary_to_chart(out_sd.left_basis * qb);
      out.swapped = swapped;
    }
  } catch (const Error&) {
    // alignment is a heuristic start; fall back to the default schedule
  }
  return out;
}

// The true outer objective max_psi d_psi(U, V) equals 1 on most of the
// local-unitary group (some product state is mapped orthogonally), so plain
// descent stalls on that plateau.  Phase one instead descends on the mean of
// d_psi^2 over a fixed probe set, which stays informative everywhere, and its
// endpoints seed the nested solve.
inline std::vector<Eigen::VectorXd> surrogate_basin_starts(
    const UnitaryOperator& u, int m, int n, bool swapped,
    const PrimalOptions& popt,
    const std::optional<Eigen::VectorXd>& aligned_start) {
  const int d1 = unitary_chart_dim(m);
  const int d2 = unitary_chart_dim(n);
  const Matrix swap = swapped ? swap_operator(m) : Matrix();

  const int probe_count = 64;
  std::vector<Vector> probes;
  probes.reserve(probe_count);
  for (int k = 0; k < probe_count; ++k) {
    probes.push_back(
        random_product_state(m, n, derive_seed(popt.outer.seed, 0x9B0Bu + k))
            .amplitudes);
  }

  OptimizerOptions sopt;
  sopt.seed = derive_seed(popt.outer.seed, 0x50F7u);
  sopt.max_iters = 400;
  sopt.patience = 40;
  sopt.f_tol = 1e-9;
  sopt.step_min = 1e-4;

  std::vector<std::pair<double, Eigen::VectorXd>> endpoints;
  const int n_descents = std::max(4, popt.outer.restarts);
  std::vector<std::pair<double, Eigen::VectorXd>> results(
      static_cast<std::size_t>(n_descents));
  for_each_index(n_descents, [&](int k) {
    Eigen::VectorXd x0;
    if (k == 0) {
      x0 = Eigen::VectorXd::Zero(d1 + d2);
    } else if (k == 1 && aligned_start) {
      x0 = *aligned_start;
    } else {
      Rng rng(derive_seed(sopt.seed, static_cast<std::uint64_t>(k)));
      x0 = Eigen::VectorXd(d1 + d2);
      x0.head(d1) = random_unitary_chart(m, rng);
      x0.tail(d2) = random_unitary_chart(n, rng);
    }
    // surrogate evals share the probe list but need private scratch
    std::vector<Complex> scratch(static_cast<std::size_t>(m) * n);
    auto obj = [&](const Eigen::VectorXd& x) {
      const Matrix v1 = unitary_from_chart(x.head(d1), m);
      const Matrix v2 = unitary_from_chart(x.tail(d2), n);
      Matrix v = kron(v1, v2);
      if (swapped) {
        v = swap * v;
      }
      const Matrix w = v.adjoint() * u.matrix;
      double acc = 0.0;
      for (const Vector& psi : probes) {
        const Complex ov = quadratic_form(w, psi.data(), scratch.data());
        acc += 1.0 - std::norm(ov);
      }
      return acc / probe_count;
    };
    PatternResult r = pattern_search_min(obj, std::move(x0), sopt, project_none);
    results[static_cast<std::size_t>(k)] = {r.value, r.point};
  });

  std::stable_sort(results.begin(), results.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Eigen::VectorXd> starts;
  const int cap = std::max(2, popt.outer.restarts - 2);
  for (const auto& [val, pt] : results) {
    bool dup = false;
    for (const auto& s : starts) {
      if ((s - pt).norm() < 1e-2) {
        dup = true;
        break;
      }
    }
    if (!dup) {
      starts.push_back(pt);
    }
    if (static_cast<int>(starts.size()) >= cap) {
      break;
    }
  }
  return starts;
}

inline PrimalBranchResult solve_primal_branch(
    const UnitaryOperator& u, int m, int n, bool swapped,
    const PrimalOptions& popt,
    const std::optional<Eigen::VectorXd>& aligned_start) {
  const int d1 = unitary_chart_dim(m);
  const Matrix swap = swapped ? swap_operator(m) : Matrix();
  OuterProblem make_inner = [&u, m, n, d1, swapped,
                             swap](const Eigen::VectorXd& x) -> InnerObjective {
    const Matrix v1 = unitary_from_chart(x.head(d1), m);
    const Matrix v2 = unitary_from_chart(x.tail(x.size() - d1), n);
    Matrix v = kron(v1, v2);
    if (swapped) {
      v = swap * v;
    }
    auto w = std::make_shared<Matrix>(v.adjoint() * u.matrix);
    return [w, m, n](const Eigen::VectorXd& y) {
      ProductScratch& ws = decode_product_chart(y, m, n);
      const Complex overlap =
          quadratic_form(*w, ws.psi.data(), ws.tmp.data());
      return std::sqrt(std::max(0.0, 1.0 - std::norm(overlap)));
    };
  };

  NestedOptions nopt;
  nopt.outer = popt.outer;
  nopt.inner = popt.inner;
  if (swapped) {
    nopt.outer.seed = derive_seed(nopt.outer.seed, 0x53AAu);
    nopt.inner.seed = derive_seed(nopt.inner.seed, 0x53AAu);
  }
  ChartSpec outer_chart = local_unitary_chart_spec(m, n);
  outer_chart.structured_starts =
      surrogate_basin_starts(u, m, n, swapped, popt, aligned_start);
  outer_chart.structured_starts.push_back(Eigen::VectorXd::Zero(outer_chart.dim));
  if (aligned_start) {
    outer_chart.structured_starts.push_back(*aligned_start);
  }
  PrimalBranchResult out;
  out.nested = nested_minimax(make_inner, outer_chart,
                              product_state_chart_spec(m, n), nopt);
  out.swapped = swapped;
  return out;
}

}  // namespace detail

inline CapacityResult capacity_primal(const UnitaryOperator& u, int m, int n,
                                      const PrimalOptions& popt = {}) {
  if (u.dim != m * n) {
    throw DimensionMismatchError("capacity_primal: dims");
  }
  const bool with_swap = popt.include_swap.value_or(m == n);
  const detail::AlignedStarts aligned = detail::dual_aligned_starts(u, m, n, popt);

  detail::PrimalBranchResult best =
      detail::solve_primal_branch(u, m, n, false, popt, aligned.plain);
  long evaluations = best.nested.evaluations;
  std::vector<double> restart_values = best.nested.per_restart_values;
  if (with_swap && m == n) {
    detail::PrimalBranchResult alt =
        detail::solve_primal_branch(u, m, n, true, popt, aligned.swapped);
    evaluations += alt.nested.evaluations;
    restart_values.insert(restart_values.end(),
                          alt.nested.per_restart_values.begin(),
                          alt.nested.per_restart_values.end());
    if (alt.nested.value < best.nested.value) {
      best = std::move(alt);
    }
  }

  const NestedResult& nest = best.nested;
  const int d1 = unitary_chart_dim(m);
  CapacityResult res;
  res.kind = CapacityKind::Primal_C;
  res.value = clamp01(nest.value);
  res.bound_status = BoundStatus::NumericEstimate;
  LocalUnitaryWitness wit;
  wit.v1 = unitary_from_chart(nest.outer_point.head(d1), m);
  wit.v2 = unitary_from_chart(nest.outer_point.tail(nest.outer_point.size() - d1), n);
  wit.swapped = best.swapped;
  res.witness_local_unitary = std::move(wit);
  auto [alpha, beta] = product_point(nest.inner_witness, m, n);
  res.witness_state = BipartiteState(m, n, kron_vector(alpha, beta));

  res.diagnostics.restarts = popt.outer.restarts;
  res.diagnostics.evaluations = evaluations;
  res.diagnostics.converged = nest.converged;
  res.diagnostics.search_value = nest.search_value;
  res.diagnostics.certified_upper = nest.value;
  // any product input gives sqrt(1 - s1^2) <= C_E <= C
  res.diagnostics.certified_lower = clamp01(std::sqrt(std::max(
      0.0,
      1.0 - std::pow(largest_schmidt_after(u, alpha, beta), 2.0))));
  std::vector<double> sorted = restart_values;
  std::sort(sorted.begin(), sorted.end());
  res.diagnostics.best_second_spread =
      sorted.size() > 1 ? sorted[1] - sorted[0] : 0.0;
  return res;
}

// ---------------------------------------------------------------------------
// Minimax gap

inline GapReport minimax_gap(const UnitaryOperator& u, int m, int n,
                             const PrimalOptions& popt = {},
                             const OptimizerOptions& dual_opts = {},
                             double slack = 5e-3) {
  GapReport report;
  report.dual = capacity_dual(u, m, n, dual_opts);
  report.primal = capacity_primal(u, m, n, popt);
  report.c_e = report.dual.value;
  report.c = report.primal.value;
  report.gap = report.c - report.c_e;
  report.violation = report.gap < -slack;
  return report;
}

}  // namespace entcap
