#pragma once

#include "entcap/capacity.hpp"
#include "entcap/linalg.hpp"
#include "entcap/optimize.hpp"

#include <optional>
#include <string>
#include <vector>

namespace entcap {

// ---------------------------------------------------------------------------
// Unitary families and generalized control operators:
// U(alpha_i (x) beta) = alpha_i (x) U_i beta for the control basis {alpha_i}.

/// The GCO definition requires m <= n; construction rejects the transposed
/// convention rather than guessing one.
struct ControlDimensionError : InvalidFamilyError {
  using InvalidFamilyError::InvalidFamilyError;
};

struct UnitaryFamily {
  int dim_control = 0;  // m
  int dim_target = 0;   // n
  std::vector<UnitaryOperator> members;
  Matrix control_basis;  // columns are the alpha_i; identity = computational
  std::string label;

  static UnitaryFamily create(int m, int n, std::vector<UnitaryOperator> members,
                              std::optional<Matrix> control_basis = std::nullopt,
                              std::string label = {}) {
    if (m < 1 || n < 1) {
      throw InvalidFamilyError("unitary family: dims must be >= 1");
    }
    if (m > n) {
      throw ControlDimensionError(
          "unitary family: control dimension exceeds target dimension (m > n)");
    }
    if (static_cast<int>(members.size()) != m) {
      throw InvalidFamilyError("unitary family: need exactly m members");
    }
    for (const auto& u : members) {
      if (u.dim != n) {
        throw InvalidFamilyError("unitary family: member is not n x n");
      }
    }
    UnitaryFamily f;
    f.dim_control = m;
    f.dim_target = n;
    f.members = std::move(members);
    if (control_basis) {
      if (control_basis->rows() != m || control_basis->cols() != m) {
        throw InvalidFamilyError("unitary family: control basis is not m x m");
      }
      if (unitarity_residual_of(*control_basis) > default_unitary_tol) {
        throw InvalidFamilyError("unitary family: control basis not unitary");
      }
      f.control_basis = *control_basis;
    } else {
      f.control_basis = Matrix::Identity(m, m);
    }
    f.label = std::move(label);
    return f;
  }
};

/// Eigenphase matrix of an abelian family in its common eigenbasis:
/// entries(i, j) = e^{i pi theta_ij} with theta_ij in [0, 2).
struct ThetaMatrix {
  RealMatrix phases;   // m x n, theta_ij
  Matrix entries;      // m x n, unit modulus
  int rank = 0;        // numerical SVD rank at 1e-8 * s1
  Matrix common_eigenbasis;  // n x n unitary
};

struct GcoOperator {
  UnitaryOperator unitary;  // on the m*n-dimensional product space
  UnitaryFamily family;
  bool abelian = false;
  std::optional<ThetaMatrix> theta;
};

namespace detail {

inline bool is_abelian_family(const std::vector<UnitaryOperator>& members,
                              double tol = 1e-10) {
  for (std::size_t i = 0; i + 1 < members.size(); ++i) {
    for (std::size_t j = i + 1; j < members.size(); ++j) {
      const Matrix comm = members[i].matrix * members[j].matrix -
                          members[j].matrix * members[i].matrix;
      if (comm.cwiseAbs().maxCoeff() > tol) {
        return false;
      }
    }
  }
  return true;
}

inline int svd_rank(const Matrix& a, double rel_tol = 1e-8) {
  Eigen::JacobiSVD<Matrix> svd(a);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) <= 0.0) {
    return 0;
  }
  const double tol = rel_tol * s(0);
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > tol) {
      ++r;
    }
  }
  return r;
}

// Common eigenbasis of a commuting family: diagonalize a random Hermitian
// combination; a generic combination separates all joint eigenspaces.
// Retries with fresh coefficients if a degeneracy slips through.
inline Matrix common_eigenbasis(const std::vector<UnitaryOperator>& members,
                                int n, std::uint64_t seed = 0x7EAFu) {
  for (int attempt = 0; attempt < 8; ++attempt) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(attempt)));
    Matrix h = Matrix::Zero(n, n);
    for (const auto& u : members) {
      const Complex c = rng.next_complex_gaussian();
      h += c * u.matrix + std::conj(c) * u.matrix.adjoint();
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(h);
    if (es.info() != Eigen::Success) {
      continue;
    }
    const Matrix q = es.eigenvectors();
    bool ok = true;
    for (const auto& u : members) {
      const Matrix d = q.adjoint() * u.matrix * q;
      Matrix off = d;
      off.diagonal().setZero();
      if (off.cwiseAbs().maxCoeff() > 1e-9) {
        ok = false;
        break;
      }
    }
    if (ok) {
      return q;
    }
  }
  throw EigenFailureError("common_eigenbasis: could not diagonalize family");
}

}  // namespace detail

/// Assembles the GCO, checks unitarity, and detects abelianness (computing
/// the Theta matrix when the members commute).
inline GcoOperator gco_build(const UnitaryFamily& family) {
  const int m = family.dim_control;
  const int n = family.dim_target;
  Matrix block = Matrix::Zero(m * n, m * n);
  for (int i = 0; i < m; ++i) {
    block.block(i * n, i * n, n, n) = family.members[static_cast<std::size_t>(i)].matrix;
  }
  Matrix u = block;
  const bool computational =
      (family.control_basis - Matrix::Identity(m, m)).cwiseAbs().maxCoeff() <
      1e-14;
  if (!computational) {
    const Matrix c = kron(family.control_basis, Matrix::Identity(n, n));
    u = c * block * c.adjoint();
  }

  GcoOperator gco;
  gco.unitary = validate_unitary(u);
  gco.family = family;

  gco.abelian = detail::is_abelian_family(family.members);

  if (gco.abelian) {
    ThetaMatrix theta;
    theta.common_eigenbasis = detail::common_eigenbasis(family.members, n);
    theta.phases.resize(m, n);
    theta.entries.resize(m, n);
    for (int i = 0; i < m; ++i) {
      const Matrix d = theta.common_eigenbasis.adjoint() *
                       family.members[static_cast<std::size_t>(i)].matrix *
                       theta.common_eigenbasis;
      for (int j = 0; j < n; ++j) {
        Complex z = d(j, j);
        z /= std::abs(z);  // eigenvalue of a unitary; strip roundoff modulus
        theta.entries(i, j) = z;
        double t = std::arg(z) / std::numbers::pi;
        if (t < 0.0) {
          t += 2.0;
        }
        theta.phases(i, j) = t;
      }
    }
    theta.rank = detail::svd_rank(theta.entries);
    gco.theta = std::move(theta);
  }
  return gco;
}

// ---------------------------------------------------------------------------
// Family rank: max over beta of rank([U_1 beta ... U_m beta])

struct FamilyRankOptions {
  std::uint64_t seed = 0;
  int random_probes = 64;
  double rank_rel_tol = 1e-8;
};

inline int family_rank(const UnitaryFamily& family,
                       const FamilyRankOptions& opts = {}) {
  const int m = family.dim_control;
  const int n = family.dim_target;

  // abelian path: rank of Theta equals the family rank
  if (detail::is_abelian_family(family.members)) {
    const Matrix q = detail::common_eigenbasis(family.members, n);
    Matrix theta(m, n);
    for (int i = 0; i < m; ++i) {
      const Matrix d =
          q.adjoint() * family.members[static_cast<std::size_t>(i)].matrix * q;
      for (int j = 0; j < n; ++j) {
        theta(i, j) = d(j, j) / std::abs(d(j, j));
      }
    }
    return detail::svd_rank(theta, opts.rank_rel_tol);
  }

  // general path: probe with structured and random beta, keep the max
  auto rank_at = [&](const Vector& beta) {
    Matrix cols(n, m);
    for (int i = 0; i < m; ++i) {
      cols.col(i) = family.members[static_cast<std::size_t>(i)].matrix * beta;
    }
    return detail::svd_rank(cols, opts.rank_rel_tol);
  };

  int best = 0;
  for (int j = 0; j < n && best < m; ++j) {
    Vector e = Vector::Zero(n);
    e(j) = 1.0;
    best = std::max(best, rank_at(e));
  }
  if (best < m) {
    best = std::max(
        best, rank_at(Vector::Constant(n, Complex(1.0, 0.0)) / std::sqrt(n)));
  }
  for (int k = 0; k < opts.random_probes && best < m; ++k) {
    Rng rng(derive_seed(opts.seed, 0xFA71u + static_cast<std::uint64_t>(k)));
    best = std::max(best, rank_at(random_state_vector(n, rng)));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Dual capacity via the Theta matrix: minimize the largest singular value of
// D_a Theta D_b over unit vectors a, b.  Phases of a and b are absorbed by
// the SVD, so both are restricted to nonnegative reals.

inline CapacityResult capacity_dual_abelian(const ThetaMatrix& theta,
                                            const OptimizerOptions& opts = {}) {
  const int m = static_cast<int>(theta.entries.rows());
  const int n = static_cast<int>(theta.entries.cols());

  auto decode = [&](const Eigen::VectorXd& x, RealVector& a, RealVector& b) {
    a = x.head(m).cwiseAbs();
    b = x.tail(n).cwiseAbs();
    const double na = a.norm();
    const double nb = b.norm();
    a = na > 1e-14 ? RealVector(a / na)
                   : RealVector(RealVector::Unit(m, 0));
    b = nb > 1e-14 ? RealVector(b / nb)
                   : RealVector(RealVector::Unit(n, 0));
  };
  auto objective = [&](const Eigen::VectorXd& x) {
    RealVector a, b;
    decode(x, a, b);
    const Matrix scaled =
        theta.entries.cwiseProduct((a * b.transpose()).cast<Complex>());
    Eigen::JacobiSVD<Matrix> svd(scaled);
    return svd.singularValues()(0);
  };
  ProjectFn project = [m, n](Eigen::VectorXd& x) {
    Eigen::VectorXd a = x.head(m).cwiseAbs();
    Eigen::VectorXd b = x.tail(n).cwiseAbs();
    const double na = a.norm();
    const double nb = b.norm();
    x.head(m) = na > 1e-14 ? (a / na).eval() : Eigen::VectorXd::Unit(m, 0);
    x.tail(n) = nb > 1e-14 ? (b / nb).eval() : Eigen::VectorXd::Unit(n, 0);
  };
  auto start_for = [&](int k) -> Eigen::VectorXd {
    Eigen::VectorXd x(m + n);
    if (k == 0) {
      x.head(m).setConstant(1.0 / std::sqrt(static_cast<double>(m)));
      x.tail(n).setConstant(1.0 / std::sqrt(static_cast<double>(n)));
      return x;
    }
    Rng rng(derive_seed(opts.seed, static_cast<std::uint64_t>(k)));
    for (int i = 0; i < m + n; ++i) {
      x(i) = std::abs(rng.next_gaussian());
    }
    project(x);
    return x;
  };
  OptRunResult run = detail::multistart_min(objective, m + n, start_for, project, opts);
  if (!run.converged) {
    throw OptimizerFailureError("capacity_dual_abelian: search stalled");
  }

  RealVector a, b;
  decode(run.best_point, a, b);
  const double s_mu = run.best_value;

  CapacityResult res;
  res.kind = CapacityKind::Dual_CE;
  res.value = clamp01(std::sqrt(std::max(0.0, 1.0 - s_mu * s_mu)));
  res.s_mu = s_mu;
  res.bound_status = BoundStatus::NumericEstimate;
  // witness in the (control basis, common eigenbasis) coordinates
  const Vector beta = theta.common_eigenbasis * b.cast<Complex>();
  res.witness_state =
      BipartiteState::normalized(m, n, kron_vector(a.cast<Complex>(), beta));
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
// Maximal-entanglement witness: beta with {U_i beta} mutually orthogonal.

struct WitnessOptions {
  std::uint64_t seed = 0;
  int restarts = 64;
  double accept_residual = 1e-8;  // off-diagonal Frobenius norm of the Gram
  OptimizerOptions search;

  WitnessOptions() {
    // the objective is quadratic around exact-orthogonality zeros; chasing a
    // 1e-8 residual needs a much finer stop than the generic defaults
    search.max_iters = 4000;
    search.f_tol = 1e-18;
    search.patience = 400;
    search.step_min = 1e-10;
  }
};

inline double gram_offdiag_residual(const UnitaryFamily& family,
                                    const Vector& beta) {
  const int m = family.dim_control;
  double sum = 0.0;
  std::vector<Vector> images(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    images[static_cast<std::size_t>(i)] =
        family.members[static_cast<std::size_t>(i)].matrix * beta;
  }
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      sum += std::norm(Complex(images[static_cast<std::size_t>(i)].adjoint() *
                               images[static_cast<std::size_t>(j)]));
    }
  }
  return std::sqrt(2.0 * sum);
}

/// Searches the target sphere for beta making the images {U_i beta} mutually
/// orthogonal.  Structured starts (uniform superposition, basis vectors) are
/// polled first and returned untouched when they already meet the residual.
inline std::optional<Vector> max_entanglement_witness(
    const UnitaryFamily& family, const WitnessOptions& opts = {}) {
  const int n = family.dim_target;

  const Vector uniform = Vector::Constant(n, Complex(1.0, 0.0)) / std::sqrt(n);
  if (gram_offdiag_residual(family, uniform) < opts.accept_residual) {
    return uniform;
  }
  for (int j = 0; j < n; ++j) {
    Vector e = Vector::Zero(n);
    e(j) = 1.0;
    if (gram_offdiag_residual(family, e) < opts.accept_residual) {
      return e;
    }
  }

  auto objective = [&](const Eigen::VectorXd& x) {
    const Vector beta = sphere_point(x, n);
    const double r = gram_offdiag_residual(family, beta);
    return 0.5 * r * r;  // sum_{i<j} |G_ij|^2
  };
  auto start_for = [&](int k) -> Eigen::VectorXd {
    if (k == 0) {
      return sphere_chart(uniform);
    }
    Rng rng(derive_seed(opts.seed, static_cast<std::uint64_t>(k)));
    return sphere_chart(random_state_vector(n, rng));
  };
  OptimizerOptions sopt = opts.search;
  sopt.restarts = opts.restarts;
  sopt.seed = opts.seed;
  ProjectFn project = [](Eigen::VectorXd& x) { sphere_chart_project(x); };
  OptRunResult run =
      detail::multistart_min(objective, 2 * n - 1, start_for, project, sopt);

  const Vector beta = sphere_point(run.best_point, n);
  if (gram_offdiag_residual(family, beta) < opts.accept_residual) {
    return beta;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Builtin operators and families

/// Phase operator Z alpha_j = omega^(j-1) alpha_j, omega = e^(2 pi i / n).
inline Matrix phase_operator(int n) {
  Matrix z = Matrix::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    z(j, j) = std::exp(Complex(0.0, two_pi * j / n));
  }
  return z;
}

/// Cyclic shift X alpha_j = alpha_(j+1 mod n).
inline Matrix shift_operator(int n) {
  Matrix x = Matrix::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    x((j + 1) % n, j) = 1.0;
  }
  return x;
}

inline UnitaryFamily controlled_w_family(const Matrix& w) {
  std::vector<UnitaryOperator> members;
  members.push_back(validate_unitary(Matrix::Identity(w.rows(), w.cols())));
  members.push_back(validate_unitary(w));
  return UnitaryFamily::create(2, static_cast<int>(w.rows()),
                               std::move(members), std::nullopt, "controlled_w");
}

/// U_2 = diag(1, e^(i pi theta)).
inline UnitaryFamily controlled_phase_family(double theta) {
  Matrix w = Matrix::Identity(2, 2);
  w(1, 1) = std::exp(Complex(0.0, std::numbers::pi * theta));
  UnitaryFamily f = controlled_w_family(w);
  f.label = "controlled_phase";
  return f;
}

inline UnitaryFamily cnot_family() {
  UnitaryFamily f = controlled_w_family(shift_operator(2));
  f.label = "cnot";
  return f;
}

inline UnitaryFamily cz_family() {
  UnitaryFamily f = controlled_w_family(phase_operator(2));
  f.label = "cz";
  return f;
}

/// The abelian family {Z^0, ..., Z^(n-1)} on an n-dimensional control.
inline UnitaryFamily qft_powers_family(int n) {
  const Matrix z = phase_operator(n);
  std::vector<UnitaryOperator> members;
  Matrix p = Matrix::Identity(n, n);
  for (int k = 0; k < n; ++k) {
    members.push_back(validate_unitary(p));
    p = p * z;
  }
  return UnitaryFamily::create(n, n, std::move(members), std::nullopt,
                               "qft_powers");
}

/// Nonabelian dim-3 family {I, Z, X}.
inline UnitaryFamily shift_phase_3_family() {
  std::vector<UnitaryOperator> members;
  members.push_back(validate_unitary(Matrix::Identity(3, 3)));
  members.push_back(validate_unitary(phase_operator(3)));
  members.push_back(validate_unitary(shift_operator(3)));
  return UnitaryFamily::create(3, 3, std::move(members), std::nullopt,
                               "shift_phase_3");
}

inline std::vector<std::string> builtin_family_names() {
  return {"cz", "cnot", "controlled_phase", "qft_powers", "shift_phase_3"};
}

/// Catalog lookup used by the CLI: "cz", "cnot", "controlled_phase:<theta>",
/// "qft_powers:<n>", "shift_phase_3".
inline UnitaryFamily builtin_family(const std::string& name) {
  const auto colon = name.find(':');
  const std::string head = name.substr(0, colon);
  const std::string arg =
      colon == std::string::npos ? std::string() : name.substr(colon + 1);
  if (head == "cz") {
    return cz_family();
  }
  if (head == "cnot") {
    return cnot_family();
  }
  if (head == "controlled_phase") {
    return controlled_phase_family(arg.empty() ? 1.0 : std::stod(arg));
  }
  if (head == "qft_powers") {
    return qft_powers_family(arg.empty() ? 3 : std::stoi(arg));
  }
  if (head == "shift_phase_3") {
    return shift_phase_3_family();
  }
  throw OutOfRangeError("unknown builtin family: " + name);
}

}  // namespace entcap
