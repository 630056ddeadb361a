#pragma once

#include "entcap/linalg.hpp"
#include "entcap/optimize.hpp"

#include <functional>
#include <optional>
#include <utility>

namespace entcap {

inline double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

// ---------------------------------------------------------------------------
// State-induced pseudometric d_psi(U, V) = sqrt(1 - |<psi| U^dag V |psi>|^2)

inline double d_state(const UnitaryOperator& u, const UnitaryOperator& v,
                      const Vector& psi) {
  if (u.dim != v.dim || psi.size() != u.dim) {
    throw DimensionMismatchError("d_state: incompatible dimensions");
  }
  const Complex overlap = (u.matrix * psi).adjoint() * (v.matrix * psi);
  return clamp01(std::sqrt(std::max(0.0, 1.0 - std::norm(overlap))));
}

inline double d_state(const UnitaryOperator& u, const UnitaryOperator& v,
                      const BipartiteState& psi) {
  return d_state(u, v, psi.amplitudes);
}

// ---------------------------------------------------------------------------
// Covering arc of eigenvalues and the closed-form metric

/// Length of the smallest closed arc of the unit circle containing all the
/// given phases: 2*pi minus the largest circular gap.
inline double covering_arc(const std::vector<double>& sorted_phases) {
  const std::size_t n = sorted_phases.size();
  if (n <= 1) {
    return 0.0;
  }
  double max_gap = sorted_phases.front() + two_pi - sorted_phases.back();
  for (std::size_t i = 1; i < n; ++i) {
    max_gap = std::max(max_gap, sorted_phases[i] - sorted_phases[i - 1]);
  }
  return two_pi - max_gap;
}

/// The exact pure-state-maximized metric: with W = U^dag V and alpha the
/// covering arc of its eigenphases, d = sin(alpha/2) for alpha < pi, else 1.
inline double d_eigenphase(const UnitaryOperator& u, const UnitaryOperator& v) {
  if (u.dim != v.dim) {
    throw DimensionMismatchError("d_eigenphase: incompatible dimensions");
  }
  const UnitaryOperator w{u.dim, u.matrix.adjoint() * v.matrix, 0.0};
  const double alpha = covering_arc(eigenphases(w));
  if (alpha >= std::numbers::pi) {
    return 1.0;
  }
  return clamp01(std::sin(0.5 * alpha));
}

// ---------------------------------------------------------------------------
// Restricted metrics d_K

enum class MetricMethod { ClosedForm, Optimized, Sampled };

struct MetricValue {
  double value = 0.0;
  std::optional<BipartiteState> witness;
  MetricMethod method = MetricMethod::ClosedForm;
};

/// The state set K over which d_K maximizes.  AllPureStates is exact via the
/// eigenphase formula; PureProductStates is the d_pi metric (optimized);
/// explicit lists and samplers take the max over their members.
struct StateSet {
  enum class Kind { AllPureStates, PureProductStates, ExplicitList, Sampler };

  Kind kind = Kind::AllPureStates;
  int dim_left = 0;
  int dim_right = 0;
  std::vector<BipartiteState> states;
  int sample_count = 0;
  std::uint64_t sample_seed = 0;
  std::function<BipartiteState(std::uint64_t, int)> sampler;

  static StateSet all_pure(int m, int n = 1) {
    StateSet k;
    k.kind = Kind::AllPureStates;
    k.dim_left = m;
    k.dim_right = n;
    return k;
  }

  static StateSet pure_products(int m, int n) {
    StateSet k;
    k.kind = Kind::PureProductStates;
    k.dim_left = m;
    k.dim_right = n;
    return k;
  }

  static StateSet explicit_list(std::vector<BipartiteState> members) {
    if (members.empty()) {
      throw OutOfRangeError("StateSet: explicit list must be nonempty");
    }
    StateSet k;
    k.kind = Kind::ExplicitList;
    k.dim_left = members.front().dim_left;
    k.dim_right = members.front().dim_right;
    for (const auto& s : members) {
      if (s.dim_left != k.dim_left || s.dim_right != k.dim_right) {
        throw DimensionMismatchError("StateSet: mixed dimensions in list");
      }
    }
    k.states = std::move(members);
    return k;
  }

  static StateSet sampled(std::function<BipartiteState(std::uint64_t, int)> gen,
                          int count, std::uint64_t seed) {
    StateSet k;
    k.kind = Kind::Sampler;
    k.sampler = std::move(gen);
    k.sample_count = count;
    k.sample_seed = seed;
    return k;
  }
};

namespace detail {

// Builds a state achieving d = 1: a combination of eigenvectors whose
// eigenvalues' convex hull contains the origin.  Looks for a near-antipodal
// pair first, then for a triangle containing 0.
inline std::optional<Vector> orthogonality_witness(const Vector& eigenvalues,
                                                   const Matrix& eigenvectors) {
  const Eigen::Index n = eigenvalues.size();
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = a + 1; b < n; ++b) {
      if (std::abs(eigenvalues(a) + eigenvalues(b)) < 1e-9) {
        Vector w = (eigenvectors.col(a) + eigenvectors.col(b)) / std::sqrt(2.0);
        return w;
      }
    }
  }
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = a + 1; b < n; ++b) {
      for (Eigen::Index c = b + 1; c < n; ++c) {
        Eigen::Matrix3d sys;
        sys << eigenvalues(a).real(), eigenvalues(b).real(), eigenvalues(c).real(),
            eigenvalues(a).imag(), eigenvalues(b).imag(), eigenvalues(c).imag(),
            1.0, 1.0, 1.0;
        Eigen::Vector3d rhs(0.0, 0.0, 1.0);
        Eigen::FullPivLU<Eigen::Matrix3d> lu(sys);
        if (!lu.isInvertible()) {
          continue;
        }
        const Eigen::Vector3d p = lu.solve(rhs);
        if (p.minCoeff() < -1e-12) {
          continue;
        }
        Vector w = std::sqrt(std::max(0.0, p(0))) * eigenvectors.col(a) +
                   std::sqrt(std::max(0.0, p(1))) * eigenvectors.col(b) +
                   std::sqrt(std::max(0.0, p(2))) * eigenvectors.col(c);
        const double norm = w.norm();
        if (norm > 1e-12) {
          return Vector(w / norm);
        }
      }
    }
  }
  return std::nullopt;
}

struct ArcAnalysis {
  double value = 0.0;
  std::optional<Vector> witness;
};

inline ArcAnalysis analyze_arc(const Matrix& w_matrix) {
  Eigen::ComplexEigenSolver<Matrix> solver(w_matrix, true);
  if (solver.info() != Eigen::Success) {
    throw EigenFailureError("d_eigenphase: eigensolver did not converge");
  }
  const Vector& vals = solver.eigenvalues();
  const Eigen::Index n = vals.size();
  std::vector<std::pair<double, Eigen::Index>> phased(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    double theta = std::arg(vals(i));
    if (theta < 0.0) {
      theta += two_pi;
    }
    phased[static_cast<std::size_t>(i)] = {theta, i};
  }
  std::sort(phased.begin(), phased.end());

  // largest circular gap between consecutive phases; arc endpoints are the
  // phases bounding it
  double max_gap = phased.front().first + two_pi - phased.back().first;
  std::size_t gap_at = phased.size() - 1;  // gap between last and first
  for (std::size_t i = 1; i < phased.size(); ++i) {
    const double gap = phased[i].first - phased[i - 1].first;
    if (gap > max_gap) {
      max_gap = gap;
      gap_at = i - 1;
    }
  }
  const double alpha = (n <= 1) ? 0.0 : two_pi - max_gap;

  ArcAnalysis out;
  if (alpha >= std::numbers::pi) {
    out.value = 1.0;
    out.witness = orthogonality_witness(vals, solver.eigenvectors());
    return out;
  }
  out.value = clamp01(std::sin(0.5 * alpha));
  // arc runs from the phase after the gap to the phase before it; the
  // maximizer is the balanced combination of the extreme eigenvectors
  const Eigen::Index lo = phased[(gap_at + 1) % phased.size()].second;
  const Eigen::Index hi = phased[gap_at].second;
  if (lo != hi) {
    Vector w = (solver.eigenvectors().col(lo) + solver.eigenvectors().col(hi)) /
               std::sqrt(2.0);
    out.witness = w;
  } else {
    out.witness = solver.eigenvectors().col(lo);
  }
  return out;
}

}  // namespace detail

/// d_K(U, V) = max over rho in K of d_rho(U, V).
inline MetricValue d_restricted(const UnitaryOperator& u,
                                const UnitaryOperator& v, const StateSet& k,
                                const OptimizerOptions& opts = {}) {
  if (u.dim != v.dim) {
    throw DimensionMismatchError("d_restricted: operators differ in dimension");
  }
  MetricValue out;
  switch (k.kind) {
    case StateSet::Kind::AllPureStates: {
      if (k.dim_left * std::max(1, k.dim_right) != u.dim) {
        throw DimensionMismatchError("d_restricted: state set dimension");
      }
      const Matrix w = u.matrix.adjoint() * v.matrix;
      detail::ArcAnalysis arc = detail::analyze_arc(w);
      out.value = arc.value;
      out.method = MetricMethod::ClosedForm;
      if (arc.witness) {
        const int m = k.dim_left;
        const int n = std::max(1, k.dim_right);
        out.witness = BipartiteState::normalized(m, n, *arc.witness);
      }
      return out;
    }
    case StateSet::Kind::PureProductStates: {
      const int m = k.dim_left;
      const int n = k.dim_right;
      if (m * n != u.dim) {
        throw DimensionMismatchError("d_restricted: product dims mismatch");
      }
      const Matrix w = u.matrix.adjoint() * v.matrix;
      auto neg_objective = [&w, m, n](const Eigen::VectorXd& x) {
        ProductScratch& ws = decode_product_chart(x, m, n);
        const Complex overlap = quadratic_form(w, ws.psi.data(), ws.tmp.data());
        return -std::sqrt(std::max(0.0, 1.0 - std::norm(overlap)));
      };
      auto start_for = [&](int k) -> Eigen::VectorXd {
        if (k == 0) {
          return uniform_superposition_chart(m, n);
        }
        Rng rng(derive_seed(opts.seed, static_cast<std::uint64_t>(k)));
        return random_product_chart(m, n, rng);
      };
      OptRunResult run =
          detail::multistart_min(neg_objective, product_chart_dim(m, n),
                                 start_for, product_chart_projector(m, n), opts);
      run.best_value = -run.best_value;
      if (!run.converged) {
        throw OptimizerFailureError("d_restricted: product-state search stalled");
      }
      auto [alpha, beta] = product_point(run.best_point, m, n);
      out.value = clamp01(run.best_value);
      out.witness = BipartiteState(m, n, kron_vector(alpha, beta));
      out.method = MetricMethod::Optimized;
      return out;
    }
    case StateSet::Kind::ExplicitList: {
      double best = -1.0;
      const BipartiteState* arg = nullptr;
      for (const auto& s : k.states) {
        const double val = d_state(u, v, s);
        if (val > best) {
          best = val;
          arg = &s;
        }
      }
      out.value = clamp01(best);
      out.witness = *arg;
      out.method = MetricMethod::Sampled;
      return out;
    }
    case StateSet::Kind::Sampler: {
      double best = -1.0;
      std::optional<BipartiteState> arg;
      for (int i = 0; i < k.sample_count; ++i) {
        BipartiteState s = k.sampler(k.sample_seed, i);
        const double val = d_state(u, v, s);
        if (val > best) {
          best = val;
          arg = std::move(s);
        }
      }
      if (!arg) {
        throw OptimizerFailureError("d_restricted: sampler produced no states");
      }
      out.value = clamp01(best);
      out.witness = std::move(arg);
      out.method = MetricMethod::Sampled;
      return out;
    }
  }
  throw Error("d_restricted: unreachable");
}

/// d_pi(U, V): the product-state restricted metric, value only.
inline double d_pi(const UnitaryOperator& u, const UnitaryOperator& v, int m,
                   int n, const OptimizerOptions& opts = {}) {
  return d_restricted(u, v, StateSet::pure_products(m, n), opts).value;
}

// ---------------------------------------------------------------------------
// Tensor composition of distances

/// Distance of a tensor pair from the factor distances:
/// d1*sqrt(1-d2^2) + d2*sqrt(1-d1^2) when d1^2 + d2^2 < 1, else 1.
inline double compose_tensor_distance(double delta1, double delta2) {
  if (!(delta1 >= 0.0 && delta1 <= 1.0 && delta2 >= 0.0 && delta2 <= 1.0)) {
    throw OutOfRangeError("compose_tensor_distance: inputs must be in [0,1]");
  }
  if (delta1 * delta1 + delta2 * delta2 < 1.0) {
    return clamp01(delta1 * std::sqrt(1.0 - delta2 * delta2) +
                   delta2 * std::sqrt(1.0 - delta1 * delta1));
  }
  return 1.0;
}

}  // namespace entcap
