// entcap command-line front end: metric and capacity computations on
// operators loaded from JSON documents, GCO assembly and analysis, and the
// built-in reproduction suite.

#include "entcap/capacity.hpp"
#include "entcap/gco.hpp"
#include "entcap/io.hpp"
#include "entcap/metrics.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace entcap;

constexpr int kExitOk = 0;
constexpr int kExitFailures = 1;
constexpr int kExitParse = 2;
constexpr int kExitDims = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitControlDim = 5;

struct GlobalFlags {
  std::uint64_t seed = 0;
  bool json = false;
  int restarts = 0;  // 0 = module defaults
  std::string out_path;
};

std::string fmt5(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.5g", x);
  return buf;
}

void emit(const ResultDocument& doc, const GlobalFlags& flags) {
  if (flags.json) {
    std::cout << to_json(doc).dump(2) << "\n";
  }
  if (!flags.out_path.empty()) {
    std::ofstream out(flags.out_path);
    if (!out) {
      throw ParseError("cannot write output file: " + flags.out_path);
    }
    out << to_json(doc).dump(2) << "\n";
  }
}

json witness_state_json(const BipartiteState& s) {
  json j;
  j["dims"] = {s.dim_left, s.dim_right};
  j["amplitudes"] = vector_to_json(s.amplitudes);
  return j;
}

json capacity_json(const CapacityResult& r) {
  json j;
  j["value"] = r.value;
  j["kind"] = r.kind == CapacityKind::Primal_C ? "primal_C" : "dual_CE";
  if (r.s_mu) {
    j["s_mu"] = *r.s_mu;
  }
  if (r.witness_state) {
    j["witness_state"] = witness_state_json(*r.witness_state);
  }
  if (r.witness_local_unitary) {
    j["witness_local_unitary"] = {
        {"v1", matrix_to_json(r.witness_local_unitary->v1)},
        {"v2", matrix_to_json(r.witness_local_unitary->v2)},
        {"swapped", r.witness_local_unitary->swapped}};
  }
  j["bound_status"] = bound_status_name(r.bound_status);
  json d;
  d["restarts"] = r.diagnostics.restarts;
  d["evaluations"] = r.diagnostics.evaluations;
  d["best_second_spread"] = r.diagnostics.best_second_spread;
  d["converged"] = r.diagnostics.converged;
  if (std::isfinite(r.diagnostics.search_value)) {
    d["search_value"] = r.diagnostics.search_value;
  }
  if (std::isfinite(r.diagnostics.certified_lower)) {
    d["certified_interval"] = {r.diagnostics.certified_lower,
                               r.diagnostics.certified_upper};
  }
  j["diagnostics"] = std::move(d);
  return j;
}

OptimizerOptions dual_options(const GlobalFlags& flags) {
  OptimizerOptions opt;
  opt.seed = flags.seed;
  if (flags.restarts > 0) {
    opt.restarts = flags.restarts;
  }
  return opt;
}

PrimalOptions primal_options(const GlobalFlags& flags,
                             std::optional<bool> include_swap) {
  PrimalOptions popt = PrimalOptions::seeded(flags.seed);
  if (flags.restarts > 0) {
    popt.outer.restarts = flags.restarts;
  }
  popt.include_swap = include_swap;
  return popt;
}

// ---------------------------------------------------------------------------
// metric

int cmd_metric(const std::string& a_path, const std::string& b_path,
               const std::vector<int>& dims, const GlobalFlags& flags) {
  auto [doc_a, u] = load_operator_document(a_path);
  auto [doc_b, v] = load_operator_document(b_path);
  if (u.dim != v.dim) {
    throw DimensionMismatchError("operators have different dimensions");
  }

  ResultDocument res;
  res.command = "metric";
  res.label = doc_a.label + " vs " + doc_b.label;
  res.seed = flags.seed;

  const double d_global = d_eigenphase(u, v);
  res.values["d_eigenphase"] = d_global;
  std::cout << "d_eigenphase = " << fmt5(d_global) << "\n";

  int m = 0, n = 0;
  if (dims.size() == 2) {
    m = dims[0];
    n = dims[1];
  } else if (doc_a.dim_left > 1 || doc_a.dim_right > 1) {
    m = doc_a.dim_left;
    n = doc_a.dim_right;
  }
  if (m > 0 && n > 0) {
    if (m * n != u.dim) {
      throw DimensionMismatchError("--dims do not factor the operator size");
    }
    MetricValue dpi = d_restricted(u, v, StateSet::pure_products(m, n),
                                   dual_options(flags));
    res.values["d_pi"] = dpi.value;
    if (dpi.witness) {
      res.values["d_pi_witness"] = witness_state_json(*dpi.witness);
    }
    std::cout << "d_pi         = " << fmt5(dpi.value) << "\n";
  }
  emit(res, flags);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// capacity

int cmd_capacity(const std::string& op_path, const std::vector<int>& dims,
                 bool dual, bool primal, bool both,
                 std::optional<bool> include_swap, const GlobalFlags& flags) {
  auto [doc, u] = load_operator_document(op_path);
  const int m = dims[0];
  const int n = dims[1];
  if (m * n != u.dim) {
    throw DimensionMismatchError("--dims do not factor the operator size");
  }
  if (both || (!dual && !primal)) {
    dual = primal = true;
  }

  ResultDocument res;
  res.command = "capacity";
  res.label = doc.label;
  res.seed = flags.seed;

  std::optional<CapacityResult> ce;
  std::optional<CapacityResult> c;
  if (dual) {
    ce = capacity_dual(u, m, n, dual_options(flags));
    res.values["dual"] = capacity_json(*ce);
    res.bound_status = bound_status_name(ce->bound_status);
    std::cout << "C_E = " << fmt5(ce->value) << "  (s_mu = " << fmt5(*ce->s_mu)
              << ", ceiling sqrt(1-1/m) = "
              << fmt5(ce_upper_bound(std::min(m, n))) << ")\n";
  }
  if (primal) {
    c = capacity_primal(u, m, n, primal_options(flags, include_swap));
    res.values["primal"] = capacity_json(*c);
    res.bound_status = bound_status_name(c->bound_status);
    std::cout << "C   = " << fmt5(c->value) << "  (swap branch: "
              << (c->witness_local_unitary->swapped ? "yes" : "no") << ")\n";
  }
  if (ce && c) {
    const double gap = c->value - ce->value;
    res.values["gap"] = gap;
    res.values["violation"] = gap < -5e-3;
    std::cout << "gap C - C_E = " << fmt5(gap) << "\n";
  }
  emit(res, flags);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// gco

int cmd_gco(const std::string& builtin, const std::string& family_path,
            const std::string& emit_operator, const GlobalFlags& flags) {
  UnitaryFamily family = builtin.empty() ? load_family_document(family_path)
                                         : builtin_family(builtin);
  GcoOperator gco = gco_build(family);
  const int m = family.dim_control;
  const int n = family.dim_target;

  ResultDocument res;
  res.command = "gco";
  res.label = family.label.empty() ? "family" : family.label;
  res.seed = flags.seed;

  const int rank = family_rank(family, {.seed = flags.seed});
  res.values["dims"] = {m, n};
  res.values["abelian"] = gco.abelian;
  res.values["family_rank"] = rank;
  res.values["unitarity_residual"] = gco.unitary.unitarity_residual;
  std::cout << "GCO on " << m << "x" << n << ": "
            << (gco.abelian ? "abelian" : "nonabelian") << ", family rank "
            << rank << "\n";

  CapacityResult ce = capacity_dual(gco.unitary, m, n, dual_options(flags));
  res.values["dual"] = capacity_json(ce);
  res.bound_status = bound_status_name(ce.bound_status);
  std::cout << "C_E (generic path) = " << fmt5(ce.value) << "\n";

  if (gco.theta) {
    res.values["theta_rank"] = gco.theta->rank;
    CapacityResult ab = capacity_dual_abelian(*gco.theta, dual_options(flags));
    res.values["dual_abelian"] = capacity_json(ab);
    std::cout << "C_E (Theta path)   = " << fmt5(ab.value) << "  (Theta rank "
              << gco.theta->rank << ")\n";
  }

  WitnessOptions wopt;
  wopt.seed = flags.seed;
  if (auto beta = max_entanglement_witness(family, wopt)) {
    res.values["witness_beta"] = vector_to_json(*beta);
    res.values["witness_gram_residual"] = gram_offdiag_residual(family, *beta);
    std::cout << "maximal-entanglement witness found (gram residual "
              << fmt5(gram_offdiag_residual(family, *beta)) << ")\n";
  } else {
    res.values["witness_beta"] = nullptr;
    std::cout << "no maximal-entanglement witness found\n";
  }

  if (!emit_operator.empty()) {
    OperatorDocument out;
    out.label = res.label;
    out.dim_left = m;
    out.dim_right = n;
    out.matrix = gco.unitary.matrix;
    save_operator_document(out, emit_operator);
    std::cout << "wrote assembled operator to " << emit_operator << "\n";
  }
  emit(res, flags);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// reproduce

struct ReproRow {
  std::string name;
  double expected;
  double measured;
  double tol;
  bool pass;
};

int cmd_reproduce(bool quick, const GlobalFlags& flags) {
  std::vector<ReproRow> rows;
  auto check = [&](const std::string& name, double expected, double measured,
                   double tol) {
    rows.push_back({name, expected, measured, tol,
                    std::abs(measured - expected) <= tol});
  };
  const std::uint64_t seed = flags.seed;

  // CZ dual capacity
  const UnitaryOperator cz = gco_build(cz_family()).unitary;
  {
    OptimizerOptions opt;
    opt.seed = seed;
    check("cz_dual", 1.0 / std::sqrt(2.0), capacity_dual(cz, 2, 2, opt).value,
          1e-4);
  }

  // controlled-phase sweep, generic and Theta paths
  for (const double theta : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    const GcoOperator g = gco_build(controlled_phase_family(theta));
    OptimizerOptions opt;
    opt.seed = seed;
    const double closed =
        std::sqrt((1.0 - std::cos(std::numbers::pi * theta / 2.0)) / 2.0);
    const double generic = capacity_dual(g.unitary, 2, 2, opt).value;
    check("cphase_dual(theta=" + fmt5(theta) + ")", closed, generic, 1e-4);
    const double abelian = capacity_dual_abelian(*g.theta, opt).value;
    check("cphase_theta_path(theta=" + fmt5(theta) + ")", generic, abelian,
          2e-3);
  }

  // QFT-power families
  for (int n = 2; n <= (quick ? 3 : 5); ++n) {
    const UnitaryFamily fam = qft_powers_family(n);
    const GcoOperator g = gco_build(fam);
    OptimizerOptions opt;
    opt.seed = seed;
    check("qft_dual(n=" + std::to_string(n) + ")",
          std::sqrt(1.0 - 1.0 / n), capacity_dual(g.unitary, n, n, opt).value,
          2e-3);
    WitnessOptions wopt;
    wopt.seed = seed;
    const auto beta = max_entanglement_witness(fam, wopt);
    check("qft_witness_residual(n=" + std::to_string(n) + ")", 0.0,
          beta ? gram_offdiag_residual(fam, *beta) : 1.0, 1e-10);
  }

  // nonabelian shift/phase family
  {
    const UnitaryFamily fam = shift_phase_3_family();
    const GcoOperator g = gco_build(fam);
    OptimizerOptions opt;
    opt.seed = seed;
    check("shift_phase_3_dual", std::sqrt(2.0 / 3.0),
          capacity_dual(g.unitary, 3, 3, opt).value, 2e-3);
    const Complex w3 = std::exp(Complex(0.0, two_pi / 3.0));
    Vector beta(3);
    beta << 1.0, w3 * w3, w3 * w3;
    beta /= std::sqrt(3.0);
    check("shift_phase_3_paper_beta", 0.0, gram_offdiag_residual(fam, beta),
          1e-12);
  }

  // metric axiom fuzz: worst slack must stay above -1e-8
  {
    const int triples = quick ? 50 : 150;
    double worst = 0.0;
    int t = 0;
    for (int dim : {2, 3, 4}) {
      for (int k = 0; k < triples / 3; ++k) {
        const auto u = random_unitary(dim, derive_seed(seed, 3000 + t));
        const auto v = random_unitary(dim, derive_seed(seed, 4000 + t));
        const auto w = random_unitary(dim, derive_seed(seed, 5000 + t));
        ++t;
        const double duv = d_eigenphase(u, v);
        worst = std::max(worst, std::abs(duv - d_eigenphase(v, u)));
        worst = std::max(
            worst, duv - (d_eigenphase(u, w) + d_eigenphase(w, v)));
        const Complex c = std::exp(Complex(0.0, 1.3));
        worst = std::max(
            worst,
            std::abs(duv - d_eigenphase(
                               u, UnitaryOperator{dim, c * v.matrix, 0.0})));
        worst = std::max(
            worst, std::abs(duv - d_eigenphase(
                                      UnitaryOperator{
                                          dim, w.matrix * u.matrix, 0.0},
                                      UnitaryOperator{
                                          dim, w.matrix * v.matrix, 0.0})));
      }
    }
    check("metric_axiom_worst_slack", 0.0, worst, 1e-8);
  }

  // tensor composition
  {
    double worst = 0.0;
    const int pairs = quick ? 60 : 200;
    for (int k = 0; k < pairs; ++k) {
      const auto u = random_unitary(2, derive_seed(seed, 6000 + k));
      const auto v = random_unitary(2, derive_seed(seed, 7000 + k));
      const auto w = random_unitary(2, derive_seed(seed, 8000 + k));
      const auto x = random_unitary(2, derive_seed(seed, 9000 + k));
      const double lhs = d_eigenphase(
          UnitaryOperator{4, kron(u.matrix, w.matrix), 0.0},
          UnitaryOperator{4, kron(v.matrix, x.matrix), 0.0});
      const double rhs =
          compose_tensor_distance(d_eigenphase(u, v), d_eigenphase(w, x));
      worst = std::max(worst, std::abs(lhs - rhs));
    }
    check("tensor_composition_worst", 0.0, worst, 1e-8);
  }

  // eigenphase formula vs sampled brute force
  {
    const int pairs = quick ? 8 : 50;
    const int samples = quick ? 20000 : 100000;
    double worst = 0.0;
    for (int k = 0; k < pairs; ++k) {
      const auto u = random_unitary(4, derive_seed(seed, 10000 + k));
      const auto v = random_unitary(4, derive_seed(seed, 11000 + k));
      const Matrix w = u.matrix.adjoint() * v.matrix;
      const double closed = d_eigenphase(u, v);
      double sampled = 0.0;
      Rng rng(derive_seed(seed, 12000 + k));
      std::vector<Complex> tmp(4);
      for (int s = 0; s < samples; ++s) {
        const Vector psi = random_state_vector(4, rng);
        const Complex ov = quadratic_form(w, psi.data(), tmp.data());
        sampled = std::max(
            sampled, std::sqrt(std::max(0.0, 1.0 - std::norm(ov))));
      }
      worst = std::max(worst, closed - sampled);
      if (sampled > closed + 1e-9) {
        worst = 1.0;  // sampled max must not exceed the closed form
      }
    }
    check("eigenphase_vs_bruteforce_worst", 0.0, worst, 2e-3);
  }

  // CZ primal + minimax fuzz (the expensive tier)
  if (!quick) {
    const CapacityResult c = capacity_primal(cz, 2, 2, primal_options(flags, {}));
    check("cz_primal", 1.0 / std::sqrt(2.0), c.value, 2e-3);
    OptimizerOptions dopt;
    dopt.seed = seed;
    const double ce = capacity_dual(cz, 2, 2, dopt).value;
    check("cz_gap", 0.0, std::abs(c.value - ce), 2e-3);
  }
  {
    const int count = quick ? 2 : 30;
    double worst = -1.0;
    for (int k = 0; k < count; ++k) {
      const auto u = random_unitary(4, derive_seed(seed, 20000 + k));
      const GapReport g =
          minimax_gap(u, 2, 2, primal_options(flags, {}),
                      dual_options(flags).with_seed(derive_seed(seed, 21000 + k)));
      worst = std::max(worst, g.c_e - g.c);
    }
    check("minimax_inequality_worst(C_E - C)", 0.0, std::max(0.0, worst), 5e-3);
  }

  // report
  bool all_pass = true;
  std::printf("%-42s %12s %12s %9s  %s\n", "check", "expected", "measured",
              "tol", "verdict");
  for (const auto& r : rows) {
    all_pass = all_pass && r.pass;
    std::printf("%-42s %12.6g %12.6g %9.1e  %s\n", r.name.c_str(), r.expected,
                r.measured, r.tol, r.pass ? "PASS" : "FAIL");
  }
  std::printf("%s: %zu checks, %zu failed\n", all_pass ? "PASS" : "FAIL",
              rows.size(),
              static_cast<std::size_t>(std::count_if(
                  rows.begin(), rows.end(), [](auto& r) { return !r.pass; })));

  ResultDocument res;
  res.command = "reproduce";
  res.label = quick ? "quick" : "full";
  res.seed = seed;
  json jrows = json::array();
  for (const auto& r : rows) {
    jrows.push_back({{"name", r.name},
                     {"expected", r.expected},
                     {"measured", r.measured},
                     {"tol", r.tol},
                     {"pass", r.pass}});
  }
  res.values["rows"] = std::move(jrows);
  res.values["all_pass"] = all_pass;
  emit(res, flags);
  return all_pass ? kExitOk : kExitFailures;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"entcap: entangling capacities and unitary-group metrics"};
  app.require_subcommand(1);

  GlobalFlags flags;
  app.add_option("--seed", flags.seed, "seed for all randomized computations");
  app.add_flag("--json", flags.json, "emit a machine-readable result document");
  app.add_option("--restarts", flags.restarts, "override optimizer restarts");
  app.add_option("--out", flags.out_path, "write the result document to a file");

  // metric
  auto* metric = app.add_subcommand("metric", "distance between two operators");
  std::string a_path, b_path;
  std::vector<int> metric_dims;
  metric->add_option("--a", a_path, "first operator document")->required();
  metric->add_option("--b", b_path, "second operator document")->required();
  metric->add_option("--dims", metric_dims, "bipartite factor dims m n")
      ->expected(2);

  // capacity
  auto* capacity =
      app.add_subcommand("capacity", "entangling capacities of an operator");
  std::string op_path;
  std::vector<int> cap_dims;
  bool dual = false, primal = false, both = false;
  bool swap_on = false, swap_off = false;
  capacity->add_option("operator", op_path, "operator document")->required();
  capacity->add_option("--dims", cap_dims, "bipartite factor dims m n")
      ->expected(2)
      ->required();
  capacity->add_flag("--dual", dual, "dual capacity C_E");
  capacity->add_flag("--primal", primal, "primal capacity C");
  capacity->add_flag("--both", both, "both capacities and their gap");
  capacity->add_flag("--include-swap", swap_on, "extend by the swap branch");
  capacity->add_flag("--no-include-swap", swap_off, "plain product unitaries");

  // gco
  auto* gco = app.add_subcommand("gco", "generalized control operators");
  std::string builtin, family_path, emit_operator;
  gco->add_option("--builtin", builtin,
                  "builtin family (cz, cnot, controlled_phase:<t>, "
                  "qft_powers:<n>, shift_phase_3)");
  gco->add_option("--family", family_path, "family description document");
  gco->add_option("--emit-operator", emit_operator,
                  "write the assembled unitary as an operator document");

  // reproduce
  auto* reproduce =
      app.add_subcommand("reproduce", "run the paper-reproduction suite");
  bool quick = false;
  reproduce->add_flag("--quick", quick, "subset completing in under a minute");

  CLI11_PARSE(app, argc, argv);

  try {
    if (metric->parsed()) {
      return cmd_metric(a_path, b_path, metric_dims, flags);
    }
    if (capacity->parsed()) {
      std::optional<bool> include_swap;
      if (swap_on) {
        include_swap = true;
      }
      if (swap_off) {
        include_swap = false;
      }
      return cmd_capacity(op_path, cap_dims, dual, primal, both, include_swap,
                          flags);
    }
    if (gco->parsed()) {
      if (builtin.empty() == family_path.empty()) {
        std::cerr << "gco: give exactly one of --builtin or --family\n";
        return kExitParse;
      }
      return cmd_gco(builtin, family_path, emit_operator, flags);
    }
    if (reproduce->parsed()) {
      return cmd_reproduce(quick, flags);
    }
  } catch (const ControlDimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitControlDim;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const DimensionMismatchError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDims;
  } catch (const InvalidFamilyError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitOk;
}
