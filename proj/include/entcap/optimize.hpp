#pragma once

#include "entcap/linalg.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <limits>
#include <thread>
#include <utility>

namespace entcap {

// ---------------------------------------------------------------------------
// Options and results

struct OptimizerOptions {
  std::uint64_t seed = 0;
  int restarts = 32;
  int max_iters = 2000;  // poll steps per restart
  double f_tol = 1e-10;  // stop when improvement stays below this
  int patience = 50;     // ...for this many polls
  double step_init = 0.3;
  double step_min = 1e-7;

  OptimizerOptions with_seed(std::uint64_t s) const {
    OptimizerOptions o = *this;
    o.seed = s;
    return o;
  }
  OptimizerOptions with_restarts(int r) const {
    OptimizerOptions o = *this;
    o.restarts = r;
    return o;
  }
};

struct OptRunResult {
  double best_value = 0.0;
  Eigen::VectorXd best_point;  // chart coordinates
  std::vector<double> per_restart_values;
  bool converged = false;
  long evaluations = 0;
  int best_restart = 0;
  int best_branch = 0;  // used by the local-unitary search (1 = swap branch)
};

// ---------------------------------------------------------------------------
// Compass pattern search.  Derivative free: objectives here include largest
// singular values and moduli of inner products, both nonsmooth at the optima
// the theory cares about.

struct PatternResult {
  double value = 0.0;
  Eigen::VectorXd point;
  long evaluations = 0;
  bool converged = false;
};

using ProjectFn = std::function<void(Eigen::VectorXd&)>;

inline void project_none(Eigen::VectorXd&) {}

template <typename F>
PatternResult pattern_search_min(F&& f, Eigen::VectorXd x,
                                 const OptimizerOptions& opt,
                                 const ProjectFn& project,
                                 double step_init = -1.0) {
  project(x);
  PatternResult res;
  double fx = f(x);
  long evals = 1;
  double step = step_init > 0.0 ? step_init : opt.step_init;
  int stall = 0;
  Eigen::VectorXd y(x.size());
  Eigen::VectorXd best_y(x.size());
  for (int it = 0; it < opt.max_iters; ++it) {
    double best_f = fx;
    bool moved = false;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      for (const double s : {step, -step}) {
        y = x;
        y(i) += s;
        project(y);
        const double fy = f(y);
        ++evals;
        if (fy < best_f) {
          best_f = fy;
          best_y = y;
          moved = true;
        }
      }
    }
    if (moved) {
      stall = (fx - best_f < opt.f_tol) ? stall + 1 : 0;
      x = best_y;
      fx = best_f;
    } else {
      step *= 0.5;
      ++stall;
    }
    if (step < opt.step_min || stall >= opt.patience) {
      res.converged = true;
      break;
    }
  }
  res.value = fx;
  res.point = std::move(x);
  res.evaluations = evals;
  return res;
}

// ---------------------------------------------------------------------------
// Charts

// Unit sphere of C^m as 2m-1 reals: component 0 real, then (re, im) pairs.
// The global phase is the gauge removed; the map normalizes.
inline Vector sphere_point(const Eigen::VectorXd& x, int m) {
  Vector v(m);
  v(0) = Complex(x(0), 0.0);
  for (int i = 1; i < m; ++i) {
    v(i) = Complex(x(2 * i - 1), x(2 * i));
  }
  const double norm = v.norm();
  if (!(norm > 1e-14)) {
    v.setZero();
    v(0) = 1.0;
    return v;
  }
  return v / norm;
}

// Gauge-fix (first component real nonnegative) and embed.
inline Eigen::VectorXd sphere_chart(const Vector& v_in) {
  const int m = static_cast<int>(v_in.size());
  Vector v = v_in;
  const double a0 = std::abs(v(0));
  if (a0 > 1e-14) {
    v *= std::conj(v(0)) / a0;
  }
  Eigen::VectorXd x(2 * m - 1);
  x(0) = v(0).real();
  for (int i = 1; i < m; ++i) {
    x(2 * i - 1) = v(i).real();
    x(2 * i) = v(i).imag();
  }
  return x;
}

inline void sphere_chart_project(Eigen::VectorXd& x) {
  const double norm = x.norm();
  if (norm > 1e-14) {
    x /= norm;
  } else {
    x.setZero();
    x(0) = 1.0;
  }
}

// Allocation-free chart decode for hot objective loops.  `out` must hold m
// entries; x points at 2m-1 chart coordinates.
inline void sphere_point_into(const double* x, int m, Complex* out) {
  out[0] = Complex(x[0], 0.0);
  double sq = x[0] * x[0];
  for (int i = 1; i < m; ++i) {
    out[i] = Complex(x[2 * i - 1], x[2 * i]);
    sq += std::norm(out[i]);
  }
  if (sq > 1e-28) {
    const double inv = 1.0 / std::sqrt(sq);
    for (int i = 0; i < m; ++i) {
      out[i] *= inv;
    }
  } else {
    for (int i = 0; i < m; ++i) {
      out[i] = 0.0;
    }
    out[0] = 1.0;
  }
}

// Scratch buffers for chart-level objectives; thread_local so objectives are
// re-entrant under restart-level threading.
struct ProductScratch {
  std::vector<Complex> alpha, beta, psi, tmp;
  void resize(int m, int n) {
    alpha.resize(static_cast<std::size_t>(m));
    beta.resize(static_cast<std::size_t>(n));
    psi.resize(static_cast<std::size_t>(m) * n);
    tmp.resize(static_cast<std::size_t>(m) * n);
  }
};

inline ProductScratch& product_scratch() {
  thread_local ProductScratch ws;
  return ws;
}

// Decodes (alpha, beta) from a product chart point and forms psi = alpha(x)beta
// in ws.psi.  Returns the scratch holding them.
inline ProductScratch& decode_product_chart(const Eigen::VectorXd& x, int m,
                                            int n) {
  ProductScratch& ws = product_scratch();
  ws.resize(m, n);
  sphere_point_into(x.data(), m, ws.alpha.data());
  sphere_point_into(x.data() + 2 * m - 1, n, ws.beta.data());
  for (int i = 0; i < m; ++i) {
    const Complex a = ws.alpha[static_cast<std::size_t>(i)];
    for (int j = 0; j < n; ++j) {
      ws.psi[static_cast<std::size_t>(i) * n + j] =
          a * ws.beta[static_cast<std::size_t>(j)];
    }
  }
  return ws;
}

// overlap <psi| M |psi> with column-major access; psi and a scratch live in ws.
inline Complex quadratic_form(const Matrix& m_mat, const Complex* psi,
                              Complex* tmp) {
  const Eigen::Index d = m_mat.rows();
  for (Eigen::Index r = 0; r < d; ++r) {
    tmp[r] = 0.0;
  }
  const Complex* col = m_mat.data();
  for (Eigen::Index c = 0; c < d; ++c, col += d) {
    const Complex pc = psi[c];
    for (Eigen::Index r = 0; r < d; ++r) {
      tmp[r] += col[r] * pc;
    }
  }
  Complex acc = 0.0;
  for (Eigen::Index r = 0; r < d; ++r) {
    acc += std::conj(psi[r]) * tmp[r];
  }
  return acc;
}

inline int product_chart_dim(int m, int n) { return 2 * m - 1 + 2 * n - 1; }

inline std::pair<Vector, Vector> product_point(const Eigen::VectorXd& x, int m,
                                               int n) {
  return {sphere_point(x.head(2 * m - 1), m), sphere_point(x.tail(2 * n - 1), n)};
}

inline Eigen::VectorXd product_chart(const Vector& alpha, const Vector& beta) {
  Eigen::VectorXd x(product_chart_dim(static_cast<int>(alpha.size()),
                                      static_cast<int>(beta.size())));
  x.head(2 * alpha.size() - 1) = sphere_chart(alpha);
  x.tail(2 * beta.size() - 1) = sphere_chart(beta);
  return x;
}

inline ProjectFn product_chart_projector(int m, int n) {
  const int da = 2 * m - 1;
  const int db = 2 * n - 1;
  return [da, db](Eigen::VectorXd& x) {
    Eigen::VectorXd a = x.head(da);
    Eigen::VectorXd b = x.tail(db);
    sphere_chart_project(a);
    sphere_chart_project(b);
    x.head(da) = a;
    x.tail(db) = b;
  };
}

inline Eigen::VectorXd uniform_superposition_chart(int m, int n) {
  return product_chart(Vector::Constant(m, Complex(1.0, 0.0)) / std::sqrt(m),
                       Vector::Constant(n, Complex(1.0, 0.0)) / std::sqrt(n));
}

inline Eigen::VectorXd random_product_chart(int m, int n, Rng& rng) {
  return product_chart(random_state_vector(m, rng), random_state_vector(n, rng));
}

// U(m) modulo phase as exp(i H) with H traceless Hermitian: m-1 free diagonal
// entries (last is minus their sum) followed by (re, im) per strict upper
// entry, m^2 - 1 reals in all.
inline int unitary_chart_dim(int m) { return m * m - 1; }

inline Matrix unitary_from_chart(const Eigen::VectorXd& p, int m) {
  Matrix h = Matrix::Zero(m, m);
  double trace = 0.0;
  for (int i = 0; i < m - 1; ++i) {
    h(i, i) = p(i);
    trace += p(i);
  }
  h(m - 1, m - 1) = -trace;
  int k = m - 1;
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      h(i, j) = Complex(p(k), p(k + 1));
      h(j, i) = std::conj(h(i, j));
      k += 2;
    }
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  if (es.info() != Eigen::Success) {
    throw EigenFailureError("unitary_from_chart: eigensolver failed");
  }
  Vector phases(m);
  for (int i = 0; i < m; ++i) {
    phases(i) = std::exp(Complex(0.0, es.eigenvalues()(i)));
  }
  return es.eigenvectors() * phases.asDiagonal() *
         es.eigenvectors().adjoint();
}

/// Inverse of unitary_from_chart up to global phase: H = -i log V through the
/// Schur form (exactly diagonal for normal V), trace gauge removed.
inline Eigen::VectorXd unitary_to_chart(const Matrix& v) {
  const int m = static_cast<int>(v.rows());
  Eigen::ComplexSchur<Matrix> schur(v, true);
  if (schur.info() != Eigen::Success) {
    throw EigenFailureError("unitary_to_chart: Schur decomposition failed");
  }
  RealVector theta(m);
  for (int i = 0; i < m; ++i) {
    theta(i) = std::arg(schur.matrixT()(i, i));
  }
  theta.array() -= theta.mean();  // traceless gauge
  const Matrix& q = schur.matrixU();
  Matrix h = q * theta.cast<Complex>().asDiagonal() * q.adjoint();
  h = 0.5 * (h + h.adjoint()).eval();
  Eigen::VectorXd p(unitary_chart_dim(m));
  for (int i = 0; i < m - 1; ++i) {
    p(i) = h(i, i).real();
  }
  int k = m - 1;
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      p(k) = h(i, j).real();
      p(k + 1) = h(i, j).imag();
      k += 2;
    }
  }
  return p;
}

// Random generator direction with radius uniform in [0, pi].
inline Eigen::VectorXd random_unitary_chart(int m, Rng& rng) {
  const int d = unitary_chart_dim(m);
  Eigen::VectorXd p(d);
  for (int i = 0; i < d; ++i) {
    p(i) = rng.next_gaussian();
  }
  const double norm = p.norm();
  if (norm > 1e-14) {
    p *= (std::numbers::pi * rng.next_double()) / norm;
  }
  return p;
}

// ---------------------------------------------------------------------------
// Deterministic multi-start driver.  Restarts run independently (optionally
// on worker threads) and are reduced in index order, so results do not
// depend on scheduling.

namespace detail {

template <typename Fn>
void for_each_index(int count, Fn&& fn, bool parallel = true) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers = std::min<unsigned>(hw, static_cast<unsigned>(count));
  if (!parallel || workers <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) {
      fn(i);
    }
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (int i = static_cast<int>(w); i < count;
           i += static_cast<int>(workers)) {
        fn(i);
      }
    });
  }
  for (auto& t : pool) {
    t.join();
  }
}

struct RestartOutcome {
  PatternResult run;
  Eigen::VectorXd start;
};

// Multi-start minimization over a chart.  start_for(k) supplies the k-th
// start (structured starts first, then seeded random ones).
template <typename F>
OptRunResult multistart_min(F&& f, int dim,
                            const std::function<Eigen::VectorXd(int)>& start_for,
                            const ProjectFn& project,
                            const OptimizerOptions& opt) {
  const int n = std::max(1, opt.restarts);
  std::vector<RestartOutcome> outs(static_cast<std::size_t>(n));
  for_each_index(n, [&](int k) {
    Eigen::VectorXd x0 = start_for(k);
    outs[static_cast<std::size_t>(k)].start = x0;
    outs[static_cast<std::size_t>(k)].run =
        pattern_search_min(f, std::move(x0), opt, project);
  });
  OptRunResult res;
  res.best_point = Eigen::VectorXd::Zero(dim);
  res.per_restart_values.reserve(static_cast<std::size_t>(n));
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < n; ++k) {
    const auto& r = outs[static_cast<std::size_t>(k)].run;
    res.per_restart_values.push_back(r.value);
    res.evaluations += r.evaluations;
    if (r.value < best) {
      best = r.value;
      res.best_point = r.point;
      res.best_restart = k;
      res.converged = r.converged;
    }
  }
  res.best_value = best;
  return res;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Product-state searches

/// Multi-start maximization of objective(alpha, beta) over the pure product
/// manifold.  Restart 0 starts from the uniform superposition.
template <typename F>
OptRunResult maximize_over_product_states(F&& objective, int m, int n,
                                          const OptimizerOptions& opt) {
  const int dim = product_chart_dim(m, n);
  auto neg = [&](const Eigen::VectorXd& x) {
    auto [alpha, beta] = product_point(x, m, n);
    return -objective(alpha, beta);
  };
  auto start_for = [&](int k) -> Eigen::VectorXd {
    if (k == 0) {
      return uniform_superposition_chart(m, n);
    }
    Rng rng(derive_seed(opt.seed, static_cast<std::uint64_t>(k)));
    return random_product_chart(m, n, rng);
  };
  OptRunResult res = detail::multistart_min(neg, dim, start_for,
                                            product_chart_projector(m, n), opt);
  res.best_value = -res.best_value;
  for (auto& v : res.per_restart_values) {
    v = -v;
  }
  return res;
}

template <typename F>
OptRunResult minimize_over_product_states(F&& objective, int m, int n,
                                          const OptimizerOptions& opt) {
  auto flip = [&](const Vector& a, const Vector& b) { return -objective(a, b); };
  OptRunResult res = maximize_over_product_states(flip, m, n, opt);
  res.best_value = -res.best_value;
  for (auto& v : res.per_restart_values) {
    v = -v;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Local-unitary search

/// Multi-start minimization of objective(V1, V2, swapped) over product
/// unitaries, optionally extended by the swap branch when m == n.  Restart 0
/// starts from the identity.
template <typename F>
OptRunResult minimize_over_local_unitaries(F&& objective, int m, int n,
                                           bool include_swap,
                                           const OptimizerOptions& opt) {
  const int d1 = unitary_chart_dim(m);
  const int d2 = unitary_chart_dim(n);
  const int dim = d1 + d2;
  auto start_for = [&](int k) -> Eigen::VectorXd {
    if (k == 0) {
      return Eigen::VectorXd::Zero(dim);
    }
    Rng rng(derive_seed(opt.seed, static_cast<std::uint64_t>(k)));
    Eigen::VectorXd x(dim);
    x.head(d1) = random_unitary_chart(m, rng);
    x.tail(d2) = random_unitary_chart(n, rng);
    return x;
  };
  const int branches = (include_swap && m == n) ? 2 : 1;
  OptRunResult best;
  best.best_value = std::numeric_limits<double>::infinity();
  long total_evals = 0;
  std::vector<double> all_values;
  for (int b = 0; b < branches; ++b) {
    const bool swapped = b == 1;
    auto f = [&, swapped](const Eigen::VectorXd& x) {
      const Matrix v1 = unitary_from_chart(x.head(d1), m);
      const Matrix v2 = unitary_from_chart(x.tail(d2), n);
      return objective(v1, v2, swapped);
    };
    OptRunResult r = detail::multistart_min(f, dim, start_for, project_none, opt);
    total_evals += r.evaluations;
    all_values.insert(all_values.end(), r.per_restart_values.begin(),
                      r.per_restart_values.end());
    if (b == 0 || r.best_value < best.best_value) {
      r.best_branch = b;
      best = std::move(r);
    }
  }
  best.evaluations = total_evals;
  best.per_restart_values = std::move(all_values);
  return best;
}

// ---------------------------------------------------------------------------
// Nested minimax

/// Chart description used by the nested driver: dimension, structured starts,
/// seeded random starts and an optional projection back onto the chart.
struct ChartSpec {
  int dim = 0;
  std::vector<Eigen::VectorXd> structured_starts;
  std::function<Eigen::VectorXd(Rng&)> sample_start;
  ProjectFn project = project_none;

  Eigen::VectorXd start(int k, std::uint64_t seed) const {
    if (k < static_cast<int>(structured_starts.size())) {
      return structured_starts[static_cast<std::size_t>(k)];
    }
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
    return sample_start(rng);
  }
};

inline ChartSpec product_state_chart_spec(int m, int n) {
  ChartSpec spec;
  spec.dim = product_chart_dim(m, n);
  spec.structured_starts = {uniform_superposition_chart(m, n)};
  spec.sample_start = [m, n](Rng& rng) { return random_product_chart(m, n, rng); };
  spec.project = product_chart_projector(m, n);
  return spec;
}

inline ChartSpec local_unitary_chart_spec(int m, int n) {
  ChartSpec spec;
  const int d1 = unitary_chart_dim(m);
  const int d2 = unitary_chart_dim(n);
  spec.dim = d1 + d2;
  spec.structured_starts = {Eigen::VectorXd::Zero(spec.dim)};
  spec.sample_start = [m, n, d1, d2](Rng& rng) {
    Eigen::VectorXd x(d1 + d2);
    x.head(d1) = random_unitary_chart(m, rng);
    x.tail(d2) = random_unitary_chart(n, rng);
    return x;
  };
  return spec;
}

/// Inner objective produced for one outer point; called many times with
/// inner chart coordinates.
using InnerObjective = std::function<double(const Eigen::VectorXd&)>;

/// make_inner(x) prepares the inner maximization problem at outer point x
/// (e.g. fixes the candidate local unitary and premultiplies matrices).
using OuterProblem = std::function<InnerObjective(const Eigen::VectorXd&)>;

struct NestedOptions {
  OptimizerOptions outer;
  OptimizerOptions inner;          // full inner solves (first point, re-solves)
  int warm_pool = 4;               // witnesses carried between outer iterations
  int warm_max_iters = 150;        // per pool member during outer polls
  double warm_step_init = 0.15;
  double warm_step_min = 1e-5;
  long inner_eval_cap = 100000;    // per outer point
  int certificate_factor = 4;      // restart multiplier for the final re-solve
  int kick_rounds = 4;             // perturb-and-descend rounds at the incumbent
  double kick_scale = 0.2;

  NestedOptions() {
    // the outer objective carries inner-solve noise well above machine
    // precision, so outer stopping is coarser than a plain pattern search
    outer.max_iters = 300;
    outer.f_tol = 1e-6;
    outer.patience = 20;
    outer.step_min = 3e-5;
  }
};

struct NestedResult {
  double value = 0.0;              // certified: re-solved inner max at best x
  double search_value = 0.0;       // raw min over outer evaluations
  Eigen::VectorXd outer_point;
  Eigen::VectorXd inner_witness;
  bool converged = false;
  long evaluations = 0;
  std::vector<double> per_restart_values;  // certified per outer restart
  int best_restart = 0;
};

namespace detail {

struct InnerSolve {
  double value = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd witness;
  long evaluations = 0;
  bool capped = false;
};

// Full multi-start inner maximization (used at restart heads and for
// certificates).  Extra starts (the warm pool) are appended after the
// chart's structured and random starts, so a certificate can only improve
// on the value the search saw.
inline InnerSolve solve_inner_full(const InnerObjective& f, const ChartSpec& chart,
                                   const OptimizerOptions& opt,
                                   const std::vector<Eigen::VectorXd>& extra,
                                   long eval_cap) {
  auto neg = [&](const Eigen::VectorXd& y) { return -f(y); };
  InnerSolve out;
  const int n = std::max(1, opt.restarts) + static_cast<int>(extra.size());
  std::vector<PatternResult> runs(static_cast<std::size_t>(n));
  // sequential: inner solves already run inside outer restart workers
  for_each_index(
      n,
      [&](int k) {
        Eigen::VectorXd y0 =
            (k < opt.restarts)
                ? chart.start(k, opt.seed)
                : extra[static_cast<std::size_t>(k - opt.restarts)];
        runs[static_cast<std::size_t>(k)] =
            pattern_search_min(neg, std::move(y0), opt, chart.project);
      },
      /*parallel=*/false);
  for (int k = 0; k < n; ++k) {
    const auto& r = runs[static_cast<std::size_t>(k)];
    out.evaluations += r.evaluations;
    if (-r.value > out.value) {
      out.value = -r.value;
      out.witness = r.point;
    }
  }
  out.capped = out.evaluations > eval_cap;
  return out;
}

// Warm inner maximization during outer polls: refines every pool witness and
// the chart's structured starts (the latter never age out of the pool).
inline InnerSolve solve_inner_warm(const InnerObjective& f, const ChartSpec& chart,
                                   const std::deque<Eigen::VectorXd>& pool,
                                   const NestedOptions& nopt) {
  auto neg = [&](const Eigen::VectorXd& y) { return -f(y); };
  OptimizerOptions wopt = nopt.inner;
  wopt.max_iters = nopt.warm_max_iters;
  wopt.patience = std::min(nopt.inner.patience, 20);
  wopt.step_min = nopt.warm_step_min;
  InnerSolve out;
  auto refine = [&](const Eigen::VectorXd& start) {
    PatternResult r =
        pattern_search_min(neg, start, wopt, chart.project, nopt.warm_step_init);
    out.evaluations += r.evaluations;
    if (-r.value > out.value) {
      out.value = -r.value;
      out.witness = r.point;
    }
    return out.evaluations <= nopt.inner_eval_cap;
  };
  for (const auto& p : pool) {
    if (!refine(p)) {
      out.capped = true;
      return out;
    }
  }
  for (const auto& s : chart.structured_starts) {
    if (!refine(s)) {
      out.capped = true;
      return out;
    }
  }
  return out;
}

inline void pool_insert(std::deque<Eigen::VectorXd>& pool,
                        const Eigen::VectorXd& w, int cap) {
  for (const auto& p : pool) {
    if ((p - w).norm() < 1e-3) {
      return;
    }
  }
  pool.push_back(w);
  while (static_cast<int>(pool.size()) > cap) {
    pool.pop_front();
  }
}

}  // namespace detail

/// Outer derivative-free minimization where every outer query solves the
/// inner maximization to convergence, warm-started from a pool of witnesses
/// collected at previous outer points.  The reported value re-solves the
/// inner problem at the best outer point with certificate_factor times the
/// inner restarts.
inline NestedResult nested_minimax(const OuterProblem& make_inner,
                                   const ChartSpec& outer,
                                   const ChartSpec& inner,
                                   const NestedOptions& nopt) {
  struct RestartRecord {
    double certified = std::numeric_limits<double>::infinity();
    double searched = std::numeric_limits<double>::infinity();
    Eigen::VectorXd x;
    Eigen::VectorXd witness;
    long evals = 0;
    bool converged = false;
    bool capped = false;
  };

  auto run_from = [&](Eigen::VectorXd x, std::uint64_t inner_seed) {
    RestartRecord rec;
    OptimizerOptions inner_opt = nopt.inner.with_seed(inner_seed);
    outer.project(x);
    std::deque<Eigen::VectorXd> pool(inner.structured_starts.begin(),
                                     inner.structured_starts.end());

    InnerObjective fx_obj = make_inner(x);
    detail::InnerSolve cur = detail::solve_inner_full(
        fx_obj, inner, inner_opt, {pool.begin(), pool.end()},
        nopt.inner_eval_cap);
    rec.evals += cur.evaluations;
    rec.capped = rec.capped || cur.capped;
    detail::pool_insert(pool, cur.witness, nopt.warm_pool);
    double fx = cur.value;

    double step = nopt.outer.step_init;
    int stall = 0;
    Eigen::VectorXd witness = cur.witness;
    for (int it = 0; it < nopt.outer.max_iters; ++it) {
      double best_f = fx;
      Eigen::VectorXd best_y;
      Eigen::VectorXd best_w;
      bool moved = false;
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        for (const double s : {step, -step}) {
          Eigen::VectorXd y = x;
          y(i) += s;
          outer.project(y);
          InnerObjective fy_obj = make_inner(y);
          detail::InnerSolve iy = detail::solve_inner_warm(fy_obj, inner, pool, nopt);
          rec.evals += iy.evaluations;
          rec.capped = rec.capped || iy.capped;
          if (iy.value < best_f) {
            best_f = iy.value;
            best_y = y;
            best_w = iy.witness;
            moved = true;
          }
        }
      }
      if (moved) {
        stall = (fx - best_f < nopt.outer.f_tol) ? stall + 1 : 0;
        x = best_y;
        fx = best_f;
        witness = best_w;
        // pool update happens between outer iterations only
        detail::pool_insert(pool, witness, nopt.warm_pool);
      } else {
        step *= 0.5;
        ++stall;
      }
      if (step < nopt.outer.step_min || stall >= nopt.outer.patience) {
        rec.converged = true;
        break;
      }
    }

    // converged re-solve at the final point of this restart
    InnerObjective f_final = make_inner(x);
    detail::InnerSolve fin = detail::solve_inner_full(
        f_final, inner, inner_opt, {pool.begin(), pool.end()},
        nopt.inner_eval_cap);
    rec.evals += fin.evaluations;
    rec.searched = fx;
    rec.certified = std::max(fx, fin.value);
    rec.x = std::move(x);
    rec.witness = fin.value >= fx ? fin.witness : witness;
    return rec;
  };

  const int n_restarts = std::max(1, nopt.outer.restarts);
  std::vector<RestartRecord> recs(static_cast<std::size_t>(n_restarts));
  detail::for_each_index(n_restarts, [&](int r) {
    recs[static_cast<std::size_t>(r)] = run_from(
        outer.start(r, nopt.outer.seed),
        derive_seed(nopt.inner.seed, 0x1000u + static_cast<std::uint64_t>(r)));
  });

  NestedResult res;
  double best = std::numeric_limits<double>::infinity();
  double best_search = std::numeric_limits<double>::infinity();
  auto absorb = [&](const RestartRecord& rec, int index) {
    res.per_restart_values.push_back(rec.certified);
    res.evaluations += rec.evals;
    best_search = std::min(best_search, rec.searched);
    if (rec.certified < best) {
      best = rec.certified;
      res.outer_point = rec.x;
      res.inner_witness = rec.witness;
      res.best_restart = index;
      res.converged = rec.converged && !rec.capped;
    }
  };
  for (int r = 0; r < n_restarts; ++r) {
    absorb(recs[static_cast<std::size_t>(r)], r);
  }

  // perturb-and-descend rounds around the incumbent; escapes shallow outer
  // stalls without the cost of a full fresh restart schedule
  if (nopt.kick_rounds > 0) {
    std::vector<RestartRecord> kicks(static_cast<std::size_t>(nopt.kick_rounds));
    const Eigen::VectorXd incumbent = res.outer_point;
    detail::for_each_index(nopt.kick_rounds, [&](int kk) {
      Rng krng(derive_seed(nopt.outer.seed, 0x717Cu + static_cast<std::uint64_t>(kk)));
      Eigen::VectorXd x = incumbent;
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        x(i) += nopt.kick_scale * krng.next_gaussian();
      }
      kicks[static_cast<std::size_t>(kk)] = run_from(
          std::move(x),
          derive_seed(nopt.inner.seed, 0x2000u + static_cast<std::uint64_t>(kk)));
    });
    for (int kk = 0; kk < nopt.kick_rounds; ++kk) {
      absorb(kicks[static_cast<std::size_t>(kk)], n_restarts + kk);
    }
  }
  res.search_value = best_search;

  // certificate: 4x restarts at the winning outer point, seeded with the
  // witness the search ended on
  OptimizerOptions cert_opt = nopt.inner.with_restarts(
      nopt.inner.restarts * std::max(1, nopt.certificate_factor));
  cert_opt.seed = derive_seed(nopt.inner.seed, 0xCE27u);
  InnerObjective f_best = make_inner(res.outer_point);
  detail::InnerSolve cert = detail::solve_inner_full(
      f_best, inner, cert_opt, {res.inner_witness},
      nopt.inner_eval_cap * nopt.certificate_factor);
  res.evaluations += cert.evaluations;
  res.value = std::max(best, cert.value);
  if (cert.value >= best) {
    res.inner_witness = cert.witness;
  }
  return res;
}

}  // namespace entcap
