#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace entcap {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

// ---------------------------------------------------------------------------
// Errors

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotSquareError : Error {
  NotSquareError(Eigen::Index rows, Eigen::Index cols)
      : Error("matrix is not square: " + std::to_string(rows) + "x" +
              std::to_string(cols)) {}
};

struct NotUnitaryError : Error {
  double residual;
  explicit NotUnitaryError(double r)
      : Error("matrix is not unitary: |U^dag U - I|_max = " +
              std::to_string(r)),
        residual(r) {}
};

struct DimensionMismatchError : Error {
  using Error::Error;
};

struct EigenFailureError : Error {
  using Error::Error;
};

struct OptimizerFailureError : Error {
  using Error::Error;
};

struct InvalidFamilyError : Error {
  using Error::Error;
};

struct OutOfRangeError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Seeded randomness.  Every random quantity in the toolkit flows through an
// explicit 64-bit seed; there is no global RNG state.

// SplitMix64 step, used both as a generator and to derive stream seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Derives an independent stream seed from (seed, k); used for restart k.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t k) {
  std::uint64_t s = seed ^ (0x9E3779B97F4A7C15ull * (k + 1));
  return splitmix64(s);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  // uniform in [0, 1)
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // standard normal via Box-Muller; implemented here so streams are
  // reproducible independent of the standard library
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_double();
    while (u1 <= 0.0) {
      u1 = next_double();
    }
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(two_pi * u2);
    have_spare_ = true;
    return r * std::cos(two_pi * u2);
  }

  Complex next_complex_gaussian() {
    const double re = next_gaussian();
    const double im = next_gaussian();
    return {re, im};
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Domain types

inline double unitarity_residual_of(const Matrix& m) {
  const Matrix gram = m.adjoint() * m;
  const Matrix eye = Matrix::Identity(m.cols(), m.cols());
  return (gram - eye).cwiseAbs().maxCoeff();
}

/// A validated unitary operator.  Construct through validate_unitary() or one
/// of the toolkit factories; `unitarity_residual` records |U^dag U - I|_max
/// as measured at construction.
struct UnitaryOperator {
  int dim = 0;
  Matrix matrix;
  double unitarity_residual = 0.0;
};

inline constexpr double default_unitary_tol = 1e-10;

inline UnitaryOperator validate_unitary(const Matrix& m,
                                        double tol = default_unitary_tol) {
  if (m.rows() != m.cols()) {
    throw NotSquareError(m.rows(), m.cols());
  }
  if (!m.allFinite()) {
    throw NotUnitaryError(std::numeric_limits<double>::infinity());
  }
  const double residual = unitarity_residual_of(m);
  if (residual > tol) {
    throw NotUnitaryError(residual);
  }
  return UnitaryOperator{static_cast<int>(m.rows()), m, residual};
}

/// Pure state of an (m x n)-dimensional bipartite system.  Amplitude of
/// e_i (x) f_j sits at index i*n + j (left factor major).
struct BipartiteState {
  int dim_left = 0;
  int dim_right = 0;
  Vector amplitudes;

  BipartiteState() = default;

  BipartiteState(int m, int n, Vector amps)
      : dim_left(m), dim_right(n), amplitudes(std::move(amps)) {
    if (dim_left < 1 || dim_right < 1 ||
        amplitudes.size() !=
            static_cast<Eigen::Index>(dim_left) * dim_right) {
      throw DimensionMismatchError(
          "bipartite state: amplitude length != dim_left * dim_right");
    }
    if (std::abs(amplitudes.norm() - 1.0) > 1e-12) {
      throw DimensionMismatchError(
          "bipartite state: amplitudes are not normalized");
    }
  }

  static BipartiteState normalized(int m, int n, Vector amps) {
    const double norm = amps.norm();
    if (!(norm > 0.0)) {
      throw DimensionMismatchError("bipartite state: zero amplitude vector");
    }
    return BipartiteState(m, n, amps / norm);
  }

  int total_dim() const { return dim_left * dim_right; }
};

/// psi = sum_i coefficients[i] * left_basis.col(i) (x) right_basis.col(i),
/// coefficients descending; rank counts coefficients above the tolerance
/// used at decomposition time.
struct SchmidtDecomposition {
  RealVector coefficients;  // length min(m, n), descending
  Matrix left_basis;        // m x m unitary
  Matrix right_basis;       // n x n, first min(m, n) columns orthonormal
  int rank = 0;
};

// ---------------------------------------------------------------------------
// Operations

/// Eigenvalue phases of U, each mapped to [0, 2*pi), sorted ascending.
inline std::vector<double> eigenphases(const UnitaryOperator& u) {
  Eigen::ComplexEigenSolver<Matrix> solver(u.matrix, false);
  if (solver.info() != Eigen::Success) {
    throw EigenFailureError("eigensolver did not converge");
  }
  std::vector<double> phases(static_cast<std::size_t>(u.dim));
  for (int i = 0; i < u.dim; ++i) {
    double theta = std::arg(solver.eigenvalues()(i));
    if (theta < 0.0) {
      theta += two_pi;
    }
    if (theta >= two_pi) {
      theta = 0.0;
    }
    phases[static_cast<std::size_t>(i)] = theta;
  }
  std::sort(phases.begin(), phases.end());
  return phases;
}

/// Reshape to the m x n coefficient matrix (row-major by the i*n + j
/// convention, so this is a plain view of the amplitude vector) and SVD it.
/// rank_tol counts coefficients; defaults to 1e-8 * s1 when not given.
inline SchmidtDecomposition schmidt_decompose(
    const BipartiteState& psi, std::optional<double> rank_tol = std::nullopt) {
  const int m = psi.dim_left;
  const int n = psi.dim_right;
  Eigen::Map<const Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic,
                                 Eigen::RowMajor>>
      coeff(psi.amplitudes.data(), m, n);
  Eigen::JacobiSVD<Matrix> svd(coeff, Eigen::ComputeFullU | Eigen::ComputeFullV);
  SchmidtDecomposition out;
  out.coefficients = svd.singularValues();
  out.left_basis = svd.matrixU();
  // A = U S V^dag means psi = sum_k s_k u_k (x) conj(v_k)
  out.right_basis = svd.matrixV().conjugate();
  const double tol = rank_tol.value_or(1e-8 * out.coefficients(0));
  out.rank = 0;
  for (Eigen::Index i = 0; i < out.coefficients.size(); ++i) {
    if (out.coefficients(i) > tol) {
      ++out.rank;
    }
  }
  return out;
}

/// Largest Schmidt coefficient of psi; cheaper than a full decomposition.
inline double largest_schmidt_coefficient(const Complex* amplitudes, int m,
                                          int n) {
  if (m == 2 && n == 2) {
    // closed form: s1^2 + s2^2 = |A|_F^2, s1 s2 = |det A|
    const double t = std::norm(amplitudes[0]) + std::norm(amplitudes[1]) +
                     std::norm(amplitudes[2]) + std::norm(amplitudes[3]);
    const double d =
        std::abs(amplitudes[0] * amplitudes[3] - amplitudes[1] * amplitudes[2]);
    const double disc = std::max(0.0, t * t - 4.0 * d * d);
    return std::sqrt(0.5 * (t + std::sqrt(disc)));
  }
  Eigen::Map<const Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic,
                                 Eigen::RowMajor>>
      coeff(amplitudes, m, n);
  Eigen::JacobiSVD<Matrix> svd(coeff);
  return svd.singularValues()(0);
}

inline double largest_schmidt_coefficient(const Vector& amplitudes, int m,
                                          int n) {
  return largest_schmidt_coefficient(amplitudes.data(), m, n);
}

/// Kronecker product consistent with the i*n + j index convention.
inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

inline Vector kron_vector(const Vector& a, const Vector& b) {
  Vector out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    out.segment(i * b.size(), b.size()) = a(i) * b;
  }
  return out;
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the R
/// diagonal phases absorbed into Q.  Deterministic per seed.
inline UnitaryOperator random_unitary(int dim, std::uint64_t seed) {
  if (dim < 1) {
    throw OutOfRangeError("random_unitary: dim must be >= 1");
  }
  Rng rng(seed);
  Matrix g(dim, dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    for (Eigen::Index i = 0; i < dim; ++i) {
      g(i, j) = rng.next_complex_gaussian();
    }
  }
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < dim; ++j) {
    const Complex d = r(j, j);
    const double mag = std::abs(d);
    q.col(j) *= (mag > 0.0) ? d / mag : Complex(1.0, 0.0);
  }
  return UnitaryOperator{dim, q, unitarity_residual_of(q)};
}

/// Uniform point on the unit sphere of C^dim.
inline Vector random_state_vector(int dim, Rng& rng) {
  Vector v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    v(i) = rng.next_complex_gaussian();
  }
  const double norm = v.norm();
  if (!(norm > 0.0)) {
    v.setZero();
    v(0) = 1.0;
    return v;
  }
  return v / norm;
}

/// Haar-random pure state of the full m*n-dimensional space.
inline BipartiteState random_state(int m, int n, std::uint64_t seed) {
  Rng rng(seed);
  return BipartiteState(m, n, random_state_vector(m * n, rng));
}

/// alpha and beta independently uniform on their unit spheres.
inline BipartiteState random_product_state(int m, int n, std::uint64_t seed) {
  if (m < 1 || n < 1) {
    throw OutOfRangeError("random_product_state: dims must be >= 1");
  }
  Rng rng(seed);
  const Vector alpha = random_state_vector(m, rng);
  const Vector beta = random_state_vector(n, rng);
  return BipartiteState(m, n, kron_vector(alpha, beta));
}

}  // namespace entcap
