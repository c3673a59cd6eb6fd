#pragma once

// Small dense semidefinite programs in primal standard form
//
//   minimize    sum_b <C_b, X_b> + c_f . x_f
//   subject to  sum_b <A_ib, X_b> + B_i . x_f = b_i,   X_b PSD,  x_f free,
//
// solved with an infeasible-start primal-dual interior-point method
// (HKM search direction, Mehrotra predictor-corrector). Free variables are
// handled exactly through an augmented Schur system instead of splitting.
//
// Pure feasibility problems (zero objective) are solved as
//   maximize t  s.t.  A(Z + tI) + B x_f = b,  Z PSD,  t <= 1
// and reported Feasible only when t* clears a strict margin.

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "roa/error.hpp"

namespace roa {

/// One upper-triangle entry (row <= col) of a symmetric coefficient matrix.
struct SdpEntry {
  int block = 0;
  int row = 0;
  int col = 0;
  double value = 0.0;
};

struct SdpConstraint {
  std::vector<SdpEntry> entries;
  std::vector<std::pair<int, double>> free_coeffs;
  double rhs = 0.0;
};

struct SdpProblem {
  std::vector<int> block_dims;
  int num_free = 0;
  std::vector<SdpConstraint> constraints;
  std::vector<SdpEntry> objective;
  std::vector<double> free_objective;

  bool is_feasibility() const {
    for (const auto& e : objective) {
      if (e.value != 0.0) return false;
    }
    for (double c : free_objective) {
      if (c != 0.0) return false;
    }
    return true;
  }

  /// Over-determined systems are accepted; solve() drops dependent rows and
  /// reports inconsistent ones as Infeasible.
  std::size_t num_symmetric_entries() const {
    std::size_t n = static_cast<std::size_t>(num_free);
    for (int d : block_dims) n += static_cast<std::size_t>(d) * (d + 1) / 2;
    return n;
  }

  void validate() const {
    auto check_entry = [&](const SdpEntry& e) {
      if (e.block < 0 || e.block >= static_cast<int>(block_dims.size())) {
        throw ContractViolation("SdpProblem: block index out of range");
      }
      const int d = block_dims[e.block];
      if (e.row < 0 || e.col < 0 || e.row >= d || e.col >= d) {
        throw ContractViolation("SdpProblem: entry index out of range");
      }
      if (e.row > e.col) throw ContractViolation("SdpProblem: entries must be upper-triangular");
      if (!std::isfinite(e.value)) throw ContractViolation("SdpProblem: non-finite coefficient");
    };
    for (int d : block_dims) {
      if (d <= 0) throw ContractViolation("SdpProblem: block dimension must be positive");
    }
    if (num_free < 0) throw ContractViolation("SdpProblem: negative free-variable count");
    for (const auto& c : constraints) {
      for (const auto& e : c.entries) check_entry(e);
      for (const auto& [j, v] : c.free_coeffs) {
        if (j < 0 || j >= num_free) throw ContractViolation("SdpProblem: free index out of range");
        if (!std::isfinite(v)) throw ContractViolation("SdpProblem: non-finite coefficient");
      }
      if (!std::isfinite(c.rhs)) throw ContractViolation("SdpProblem: non-finite right-hand side");
    }
    for (const auto& e : objective) check_entry(e);
    if (!free_objective.empty() && static_cast<int>(free_objective.size()) != num_free) {
      throw ContractViolation("SdpProblem: free objective length mismatch");
    }
  }
};

enum class SdpStatus { Optimal, Feasible, Infeasible, NumericalFailure };

inline const char* to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::Optimal: return "Optimal";
    case SdpStatus::Feasible: return "Feasible";
    case SdpStatus::Infeasible: return "Infeasible";
    case SdpStatus::NumericalFailure: return "NumericalFailure";
  }
  return "?";
}

struct SdpSolution {
  SdpStatus status = SdpStatus::NumericalFailure;
  std::vector<Eigen::MatrixXd> X;
  Eigen::VectorXd free;
  Eigen::VectorXd y;
  double objective_value = 0.0;
  double dual_objective = 0.0;
  double max_equality_residual = std::numeric_limits<double>::infinity();
  double min_eigenvalue = -std::numeric_limits<double>::infinity();
  /// Optimal eigenvalue slack t* of the feasibility phase (NaN if not run).
  double margin = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  std::string message;

  bool certified() const { return status == SdpStatus::Optimal || status == SdpStatus::Feasible; }
};

struct SdpOptions {
  double feas_tol = 1e-7;
  double psd_tol = 1e-8;
  double strict_margin = 1e-7;
  int max_iterations = 200;
  /// Relative primal/dual infeasibility and gap targets of the interior-point loop.
  double ipm_tol = 1e-10;
  /// A stalled run whose best iterate reaches this is still accepted.
  double ipm_reduced_tol = 1e-8;
  /// Trace weight on Z in the feasibility phase; keeps its dual strictly feasible.
  double phase1_regularization = 1e-9;
  double phase1_cap = 1.0;
  /// Feasibility problems: move the phase-1 point to the analytic center of
  /// the feasible set (max sum log det X) when that set is bounded.
  bool center = false;
  /// Per-iteration progress lines on std::clog when positive.
  int verbosity = 0;
};

struct SdpResiduals {
  double max_equality_residual = 0.0;
  double min_eigenvalue = std::numeric_limits<double>::infinity();
};

namespace sdp_detail {

inline double entry_inner(const SdpEntry& e, const Eigen::MatrixXd& X) {
  return e.row == e.col ? e.value * X(e.row, e.row) : e.value * (X(e.row, e.col) + X(e.col, e.row));
}

inline double min_eigenvalue(const Eigen::MatrixXd& M) {
  if (M.size() == 0) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

}  // namespace sdp_detail

/// Recomputes equality residuals and block eigenvalues from scratch.
inline SdpResiduals residuals(const SdpProblem& prob, const std::vector<Eigen::MatrixXd>& X,
                              const Eigen::VectorXd& free = Eigen::VectorXd()) {
  if (X.size() != prob.block_dims.size()) throw ContractViolation("residuals: block count mismatch");
  for (std::size_t b = 0; b < X.size(); ++b) {
    if (X[b].rows() != prob.block_dims[b] || X[b].cols() != prob.block_dims[b]) {
      throw ContractViolation("residuals: block dimension mismatch");
    }
  }
  if (prob.num_free > 0 && free.size() != prob.num_free) {
    throw ContractViolation("residuals: free-variable vector has wrong length");
  }
  SdpResiduals r;
  for (const auto& c : prob.constraints) {
    double lhs = 0.0;
    for (const auto& e : c.entries) lhs += sdp_detail::entry_inner(e, X[e.block]);
    for (const auto& [j, v] : c.free_coeffs) lhs += v * free(j);
    r.max_equality_residual = std::max(r.max_equality_residual, std::abs(lhs - c.rhs));
  }
  for (const auto& Xb : X) {
    const Eigen::MatrixXd sym = 0.5 * (Xb + Xb.transpose());
    r.min_eigenvalue = std::min(r.min_eigenvalue, sdp_detail::min_eigenvalue(sym));
  }
  return r;
}

namespace sdp_detail {

struct IpmResult {
  bool converged = false;
  int iterations = 0;
  std::vector<Eigen::MatrixXd> X, S;
  Eigen::VectorXd xf, y;
  double pobj = 0.0, dobj = 0.0;
  double pinf = 0.0, dinf = 0.0, gap = 0.0;
  std::string message;
};

/// Dense per-block view of the constraint data used by the iteration.
struct Assembled {
  std::vector<int> dims;
  int m = 0;
  int k = 0;
  // block_rows[b] = constraints touching block b, each with its entries.
  std::vector<std::vector<std::pair<int, std::vector<SdpEntry>>>> block_rows;
  std::vector<Eigen::MatrixXd> C;
  Eigen::MatrixXd B;
  Eigen::VectorXd b, cf;

  explicit Assembled(const SdpProblem& p)
      : dims(p.block_dims), m(static_cast<int>(p.constraints.size())), k(p.num_free) {
    const std::size_t nb = dims.size();
    block_rows.resize(nb);
    C.resize(nb);
    for (std::size_t i = 0; i < nb; ++i) C[i] = Eigen::MatrixXd::Zero(dims[i], dims[i]);
    for (const auto& e : p.objective) {
      C[e.block](e.row, e.col) += e.value;
      if (e.row != e.col) C[e.block](e.col, e.row) += e.value;
    }
    B = Eigen::MatrixXd::Zero(m, k);
    b.resize(m);
    cf = Eigen::VectorXd::Zero(k);
    for (int j = 0; j < k && j < static_cast<int>(p.free_objective.size()); ++j) cf(j) = p.free_objective[j];
    for (int i = 0; i < m; ++i) {
      const auto& c = p.constraints[i];
      b(i) = c.rhs;
      for (const auto& [j, v] : c.free_coeffs) B(i, j) += v;
      std::vector<std::vector<SdpEntry>> per_block(nb);
      for (const auto& e : c.entries) per_block[e.block].push_back(e);
      for (std::size_t bl = 0; bl < nb; ++bl) {
        if (!per_block[bl].empty()) block_rows[bl].emplace_back(i, std::move(per_block[bl]));
      }
    }
  }

  Eigen::VectorXd apply(const std::vector<Eigen::MatrixXd>& X) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(m);
    for (std::size_t bl = 0; bl < dims.size(); ++bl) {
      for (const auto& [i, ents] : block_rows[bl]) {
        for (const auto& e : ents) out(i) += entry_inner(e, X[bl]);
      }
    }
    return out;
  }

  std::vector<Eigen::MatrixXd> adjoint(const Eigen::VectorXd& y) const {
    std::vector<Eigen::MatrixXd> out(dims.size());
    for (std::size_t bl = 0; bl < dims.size(); ++bl) {
      out[bl] = Eigen::MatrixXd::Zero(dims[bl], dims[bl]);
      for (const auto& [i, ents] : block_rows[bl]) {
        for (const auto& e : ents) {
          out[bl](e.row, e.col) += y(i) * e.value;
          if (e.row != e.col) out[bl](e.col, e.row) += y(i) * e.value;
        }
      }
    }
    return out;
  }
};

inline double frob(const std::vector<Eigen::MatrixXd>& Ms) {
  double s = 0.0;
  for (const auto& M : Ms) s += M.squaredNorm();
  return std::sqrt(s);
}

inline double inner(const std::vector<Eigen::MatrixXd>& A, const std::vector<Eigen::MatrixXd>& B) {
  double s = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) s += A[i].cwiseProduct(B[i]).sum();
  return s;
}

inline Eigen::MatrixXd sym(const Eigen::MatrixXd& M) { return 0.5 * (M + M.transpose()); }

/// Largest alpha in (0, inf] with X + alpha*dX PSD, X positive definite.
inline double max_step(const Eigen::MatrixXd& X, const Eigen::MatrixXd& dX) {
  Eigen::LLT<Eigen::MatrixXd> llt(X);
  double lam = 0.0;
  if (llt.info() == Eigen::Success) {
    const Eigen::MatrixXd L = llt.matrixL();
    Eigen::MatrixXd T = L.triangularView<Eigen::Lower>().solve(dX);
    T = L.triangularView<Eigen::Lower>().solve(T.transpose()).transpose();
    lam = min_eigenvalue(sym(T));
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X);
    const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(1e-300);
    const Eigen::MatrixXd W = es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal();
    lam = min_eigenvalue(sym(W.transpose() * dX * W));
  }
  return lam < 0.0 ? -1.0 / lam : std::numeric_limits<double>::infinity();
}

inline Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& S) {
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() == Eigen::Success) {
    return sym(llt.solve(Eigen::MatrixXd::Identity(S.rows(), S.cols())));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  const Eigen::VectorXd inv = es.eigenvalues().cwiseMax(1e-300).cwiseInverse();
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

inline IpmResult interior_point(const Assembled& a, const SdpOptions& opts) {
  const std::size_t nb = a.dims.size();
  const int m = a.m;
  const int k = a.k;
  IpmResult res;

  int total_dim = 0;
  for (int d : a.dims) total_dim += d;

  // Starting point scaled to the data.
  res.X.resize(nb);
  res.S.resize(nb);
  for (std::size_t bl = 0; bl < nb; ++bl) {
    const double n = a.dims[bl];
    double xi = std::max(10.0, std::sqrt(n));
    double eta = std::max({10.0, std::sqrt(n), a.C[bl].norm()});
    for (const auto& [i, ents] : a.block_rows[bl]) {
      double nrm2 = 0.0;
      for (const auto& e : ents) nrm2 += (e.row == e.col ? 1.0 : 2.0) * e.value * e.value;
      const double nrm = std::sqrt(nrm2);
      xi = std::max(xi, n * (1.0 + std::abs(a.b(i))) / (1.0 + nrm));
      eta = std::max(eta, nrm);
    }
    res.X[bl] = xi * Eigen::MatrixXd::Identity(a.dims[bl], a.dims[bl]);
    res.S[bl] = eta * Eigen::MatrixXd::Identity(a.dims[bl], a.dims[bl]);
  }
  res.xf = Eigen::VectorXd::Zero(k);
  res.y = Eigen::VectorXd::Zero(m);

  const double bnorm = a.b.norm();
  const double cnorm = std::sqrt(frob(a.C) * frob(a.C) + a.cf.squaredNorm());

  auto& X = res.X;
  auto& S = res.S;
  auto& xf = res.xf;
  auto& y = res.y;

  // Best iterate seen so far; the gap can stall just above ipm_tol on
  // nearly degenerate problems and later steps may blow up.
  IpmResult best;
  double best_merit = std::numeric_limits<double>::infinity();
  int no_progress = 0;
  auto finish = [&](const std::string& why) {
    if (best_merit <= opts.ipm_tol) {
      best.converged = true;
      best.message = "converged";
    } else if (best_merit <= opts.ipm_reduced_tol) {
      best.converged = true;
      best.message = "converged to reduced accuracy (" + why + ")";
    } else {
      best.converged = false;
      best.message = why;
    }
    best.iterations = res.iterations;
    return best;
  };

  int stall = 0;
  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    res.iterations = iter;
    const Eigen::VectorXd rp = a.b - a.apply(X) - a.B * xf;
    std::vector<Eigen::MatrixXd> Rd = a.adjoint(y);
    for (std::size_t bl = 0; bl < nb; ++bl) Rd[bl] = a.C[bl] - Rd[bl] - S[bl];
    const Eigen::VectorXd rf = a.cf - a.B.transpose() * y;

    res.pobj = inner(a.C, X) + a.cf.dot(xf);
    res.dobj = a.b.dot(y);
    res.pinf = rp.norm() / (1.0 + bnorm);
    res.dinf = std::sqrt(frob(Rd) * frob(Rd) + rf.squaredNorm()) / (1.0 + cnorm);
    const double xs = inner(X, S);
    res.gap = std::max(std::abs(res.pobj - res.dobj), total_dim > 0 ? xs : 0.0) /
              (1.0 + std::abs(res.pobj) + std::abs(res.dobj));
    if (opts.verbosity > 0) {
      std::clog << "ipm " << iter << " pobj " << res.pobj << " dobj " << res.dobj << " pinf " << res.pinf
                << " dinf " << res.dinf << " gap " << res.gap << " |X| " << frob(X) << " |y| " << y.norm() << "\n";
    }
    const double merit = std::max({res.pinf, res.dinf, res.gap});
    if (!std::isfinite(merit) || frob(X) > 1e14 || y.norm() > 1e14) return finish("iterates diverged");
    if (merit < 0.9 * best_merit) {
      best_merit = merit;
      best = res;
      no_progress = 0;
    } else if (++no_progress >= 10) {
      return finish("no progress");
    }
    if (merit <= opts.ipm_tol) return finish("converged");

    const double mu = total_dim > 0 ? xs / total_dim : 0.0;
    std::vector<Eigen::MatrixXd> Sinv(nb);
    for (std::size_t bl = 0; bl < nb; ++bl) Sinv[bl] = spd_inverse(S[bl]);

    // Schur complement M_ij = sum_b tr(A_i X A_j S^-1).
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(m + k, m + k);
    for (std::size_t bl = 0; bl < nb; ++bl) {
      const int n = a.dims[bl];
      const auto& rows = a.block_rows[bl];
      for (std::size_t p = 0; p < rows.size(); ++p) {
        Eigen::MatrixXd ASinv = Eigen::MatrixXd::Zero(n, n);
        for (const auto& e : rows[p].second) {
          ASinv.row(e.row) += e.value * Sinv[bl].row(e.col);
          if (e.row != e.col) ASinv.row(e.col) += e.value * Sinv[bl].row(e.row);
        }
        const Eigen::MatrixXd W = X[bl] * ASinv;
        const int i = rows[p].first;
        for (std::size_t q = p; q < rows.size(); ++q) {
          double v = 0.0;
          for (const auto& e : rows[q].second) v += entry_inner(e, W);
          const int j = rows[q].first;
          K(i, j) += v;
          if (i != j) K(j, i) += v;
        }
      }
    }
    K.topRightCorner(m, k) = a.B;
    K.bottomLeftCorner(k, m) = a.B.transpose();
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(K);

    auto direction = [&](const std::vector<Eigen::MatrixXd>& Rc, std::vector<Eigen::MatrixXd>& dX,
                         std::vector<Eigen::MatrixXd>& dS, Eigen::VectorXd& dy, Eigen::VectorXd& dxf) {
      std::vector<Eigen::MatrixXd> G(nb);
      for (std::size_t bl = 0; bl < nb; ++bl) G[bl] = Rc[bl] - sym(X[bl] * Rd[bl] * Sinv[bl]);
      Eigen::VectorXd rhs(m + k);
      rhs.head(m) = rp - a.apply(G);
      rhs.tail(k) = rf;
      const Eigen::VectorXd sol = lu.solve(rhs);
      dy = sol.head(m);
      dxf = sol.tail(k);
      const auto ATdy = a.adjoint(dy);
      dX.resize(nb);
      dS.resize(nb);
      for (std::size_t bl = 0; bl < nb; ++bl) {
        dS[bl] = Rd[bl] - ATdy[bl];
        dX[bl] = Rc[bl] - sym(X[bl] * dS[bl] * Sinv[bl]);
      }
    };
    auto step_lengths = [&](const std::vector<Eigen::MatrixXd>& dX, const std::vector<Eigen::MatrixXd>& dS) {
      double ap = std::numeric_limits<double>::infinity();
      double ad = std::numeric_limits<double>::infinity();
      for (std::size_t bl = 0; bl < nb; ++bl) {
        ap = std::min(ap, max_step(X[bl], dX[bl]));
        ad = std::min(ad, max_step(S[bl], dS[bl]));
      }
      return std::pair{ap, ad};
    };

    // Predictor.
    std::vector<Eigen::MatrixXd> Rc(nb);
    for (std::size_t bl = 0; bl < nb; ++bl) Rc[bl] = -X[bl];
    std::vector<Eigen::MatrixXd> dXa, dSa;
    Eigen::VectorXd dya, dxfa;
    direction(Rc, dXa, dSa, dya, dxfa);
    auto [apa, ada] = step_lengths(dXa, dSa);
    apa = std::min(1.0, apa);
    ada = std::min(1.0, ada);
    double sigma = 0.0;
    if (mu > 0.0) {
      double mu_aff = 0.0;
      for (std::size_t bl = 0; bl < nb; ++bl) {
        mu_aff += (X[bl] + apa * dXa[bl]).cwiseProduct(S[bl] + ada * dSa[bl]).sum();
      }
      mu_aff /= total_dim;
      sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, 3.0), 0.0, 1.0);
    }

    // Corrector with the second-order term.
    for (std::size_t bl = 0; bl < nb; ++bl) {
      Rc[bl] = sigma * mu * Sinv[bl] - X[bl] - sym(dXa[bl] * dSa[bl] * Sinv[bl]);
    }
    std::vector<Eigen::MatrixXd> dX, dS;
    Eigen::VectorXd dy, dxf;
    direction(Rc, dX, dS, dy, dxf);
    auto [ap, ad] = step_lengths(dX, dS);
    const double fraction = 0.9 + 0.09 * std::min(apa, ada);
    ap = std::min(1.0, fraction * ap);
    ad = std::min(1.0, fraction * ad);
    if (!std::isfinite(ap) || !std::isfinite(ad) || !dy.allFinite() || !dxf.allFinite()) {
      return finish("non-finite search direction");
    }

    for (std::size_t bl = 0; bl < nb; ++bl) {
      X[bl] = sym(X[bl] + ap * dX[bl]);
      S[bl] = sym(S[bl] + ad * dS[bl]);
    }
    xf += ap * dxf;
    y += ad * dy;

    stall = (std::max(ap, ad) < 1e-8) ? stall + 1 : 0;
    if (stall >= 5) return finish("step lengths stalled");
  }
  res.iterations = opts.max_iterations;
  return finish("iteration limit reached");
}

/// Damped Newton on max sum_b log det X_b over {A(X) + B x_f = b}, started
/// from a strictly feasible point. Steps keep the equalities exactly (up to
/// rounding); the step 1/(1+lambda) keeps X positive definite.
inline bool analytic_center(const SdpProblem& p, std::vector<Eigen::MatrixXd>& X, Eigen::VectorXd& xf,
                            int max_iterations = 100, double tol = 1e-10) {
  const Assembled a(p);
  const std::size_t nb = a.dims.size();
  const int m = a.m;
  const int k = a.k;
  for (int iter = 0; iter < max_iterations; ++iter) {
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(m + k, m + k);
    for (std::size_t bl = 0; bl < nb; ++bl) {
      const int n = a.dims[bl];
      const auto& rows = a.block_rows[bl];
      for (std::size_t q = 0; q < rows.size(); ++q) {
        Eigen::MatrixXd AX = Eigen::MatrixXd::Zero(n, n);
        for (const auto& e : rows[q].second) {
          AX.row(e.row) += e.value * X[bl].row(e.col);
          if (e.row != e.col) AX.row(e.col) += e.value * X[bl].row(e.row);
        }
        const Eigen::MatrixXd W = X[bl] * AX;
        const int i = rows[q].first;
        for (std::size_t r = q; r < rows.size(); ++r) {
          double v = 0.0;
          for (const auto& e : rows[r].second) v += entry_inner(e, W);
          const int j = rows[r].first;
          K(i, j) += v;
          if (i != j) K(j, i) += v;
        }
      }
    }
    K.topRightCorner(m, k) = a.B;
    K.bottomLeftCorner(k, m) = a.B.transpose();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + k);
    rhs.head(m) = a.apply(X);
    const Eigen::VectorXd sol = K.partialPivLu().solve(rhs);
    if (!sol.allFinite()) return false;
    const auto AT = a.adjoint(sol.head(m));
    std::vector<Eigen::MatrixXd> dX(nb);
    double lambda2 = 0.0;
    for (std::size_t bl = 0; bl < nb; ++bl) {
      dX[bl] = sym(X[bl] - X[bl] * AT[bl] * X[bl]);
      const Eigen::MatrixXd Z = X[bl].llt().solve(dX[bl]);
      lambda2 += (Z * Z).trace();
    }
    if (!std::isfinite(lambda2)) return false;
    const double lambda = std::sqrt(std::max(lambda2, 0.0));
    if (lambda2 <= tol) return true;
    const double alpha = lambda > 0.25 ? 1.0 / (1.0 + lambda) : 1.0;
    for (std::size_t bl = 0; bl < nb; ++bl) X[bl] = sym(X[bl] + alpha * dX[bl]);
    xf -= alpha * sol.tail(k);
  }
  return false;
}

/// Dense row view of the constraints; symmetric off-diagonals count twice.
inline Eigen::MatrixXd constraint_matrix(const SdpProblem& p) {
  std::vector<int> offset(p.block_dims.size() + 1, 0);
  for (std::size_t b = 0; b < p.block_dims.size(); ++b) {
    const int d = p.block_dims[b];
    offset[b + 1] = offset[b] + d * (d + 1) / 2;
  }
  const int nsym = offset.back();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p.constraints.size()), nsym + p.num_free);
  for (std::size_t i = 0; i < p.constraints.size(); ++i) {
    const auto& c = p.constraints[i];
    for (const auto& e : c.entries) {
      const int d = p.block_dims[e.block];
      // Upper-triangle packed index of (row, col), row <= col.
      const int idx = offset[e.block] + e.row * d - e.row * (e.row - 1) / 2 + (e.col - e.row);
      A(static_cast<Eigen::Index>(i), idx) += e.row == e.col ? e.value : 2.0 * e.value;
    }
    for (const auto& [j, v] : c.free_coeffs) A(static_cast<Eigen::Index>(i), nsym + j) += v;
  }
  return A;
}

/// Least-norm correction of (X, free) onto the affine set A(X) + B free = b.
/// Only used on iterates with a positive eigenvalue margin, so the tiny
/// correction cannot break positive semidefiniteness; callers recheck anyway.
inline void project_affine(const SdpProblem& p, std::vector<Eigen::MatrixXd>& X, Eigen::VectorXd& free) {
  const Eigen::Index m = static_cast<Eigen::Index>(p.constraints.size());
  if (m == 0) return;
  const Eigen::MatrixXd A = constraint_matrix(p);
  std::vector<int> offset(p.block_dims.size() + 1, 0);
  for (std::size_t b = 0; b < p.block_dims.size(); ++b) {
    const int d = p.block_dims[b];
    offset[b + 1] = offset[b] + d * (d + 1) / 2;
  }
  const int nsym = offset.back();
  Eigen::VectorXd v(nsym + p.num_free);
  for (std::size_t b = 0; b < p.block_dims.size(); ++b) {
    const int d = p.block_dims[b];
    int idx = offset[b];
    for (int i = 0; i < d; ++i) {
      for (int j = i; j < d; ++j) v(idx++) = X[b](i, j);
    }
  }
  if (p.num_free > 0) v.tail(p.num_free) = free;
  Eigen::VectorXd rhs(m);
  for (Eigen::Index i = 0; i < m; ++i) rhs(i) = p.constraints[static_cast<std::size_t>(i)].rhs;
  const Eigen::VectorXd r = rhs - A * v;
  const Eigen::VectorXd dv = A.transpose() * (A * A.transpose()).ldlt().solve(r);
  if (!dv.allFinite()) return;
  v += dv;
  for (std::size_t b = 0; b < p.block_dims.size(); ++b) {
    const int d = p.block_dims[b];
    int idx = offset[b];
    for (int i = 0; i < d; ++i) {
      for (int j = i; j < d; ++j) {
        X[b](i, j) = v(idx);
        X[b](j, i) = v(idx);
        ++idx;
      }
    }
  }
  if (p.num_free > 0) free = v.tail(p.num_free);
}

struct Reduction {
  bool consistent = true;
  double inconsistency = 0.0;
  std::vector<int> keep;
};

/// Drops linearly dependent equality rows; flags inconsistent systems.
inline Reduction reduce_constraints(const SdpProblem& p) {
  Reduction red;
  const Eigen::Index m = static_cast<Eigen::Index>(p.constraints.size());
  if (m == 0) return red;
  const Eigen::MatrixXd A = constraint_matrix(p);
  Eigen::VectorXd b(m);
  for (Eigen::Index i = 0; i < m; ++i) b(i) = p.constraints[static_cast<std::size_t>(i)].rhs;

  // The pivoted factorization of A^T ranks constraint rows.
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A.transpose());
  qr.setThreshold(1e-11);
  const Eigen::Index rank = qr.rank();
  for (Eigen::Index i = 0; i < rank; ++i) red.keep.push_back(static_cast<int>(qr.colsPermutation().indices()(i)));
  std::sort(red.keep.begin(), red.keep.end());

  if (rank < m) {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
    cod.setThreshold(1e-11);
    const Eigen::VectorXd x = cod.solve(b);
    red.inconsistency = (A * x - b).lpNorm<Eigen::Infinity>();
    red.consistent = red.inconsistency <= 1e-9 * (1.0 + b.lpNorm<Eigen::Infinity>());
  }
  return red;
}

inline SdpProblem subset(const SdpProblem& p, const std::vector<int>& keep) {
  SdpProblem out = p;
  out.constraints.clear();
  for (int i : keep) out.constraints.push_back(p.constraints[static_cast<std::size_t>(i)]);
  return out;
}

/// maximize t - eps*tr(Z)  s.t.  A(Z) + t*A(I) + B x_f = b,  t + w = cap.
inline SdpProblem phase1_problem(const SdpProblem& p, const SdpOptions& opts) {
  SdpProblem q;
  q.block_dims = p.block_dims;
  q.block_dims.push_back(1);
  const int wblock = static_cast<int>(q.block_dims.size()) - 1;
  const int tvar = p.num_free;
  q.num_free = p.num_free + 1;
  for (const auto& c : p.constraints) {
    SdpConstraint nc = c;
    double trace = 0.0;
    for (const auto& e : c.entries) {
      if (e.row == e.col) trace += e.value;
    }
    if (trace != 0.0) nc.free_coeffs.emplace_back(tvar, trace);
    q.constraints.push_back(std::move(nc));
  }
  SdpConstraint cap;
  cap.entries.push_back({wblock, 0, 0, 1.0});
  cap.free_coeffs.emplace_back(tvar, 1.0);
  cap.rhs = opts.phase1_cap;
  q.constraints.push_back(std::move(cap));
  for (std::size_t b = 0; b < p.block_dims.size(); ++b) {
    for (int i = 0; i < p.block_dims[b]; ++i) {
      q.objective.push_back({static_cast<int>(b), i, i, opts.phase1_regularization});
    }
  }
  q.free_objective.assign(static_cast<std::size_t>(q.num_free), 0.0);
  q.free_objective[static_cast<std::size_t>(tvar)] = -1.0;
  return q;
}

struct Phase1 {
  bool converged = false;
  double t = 0.0;
  std::vector<Eigen::MatrixXd> X;
  Eigen::VectorXd free;
  Eigen::VectorXd y;
  int iterations = 0;
  std::string message;
};

inline Phase1 run_phase1(const SdpProblem& reduced, const SdpOptions& opts) {
  const SdpProblem q = phase1_problem(reduced, opts);
  const Assembled a(q);
  IpmResult r = interior_point(a, opts);
  Phase1 out;
  out.converged = r.converged;
  out.iterations = r.iterations;
  out.message = r.message;
  out.t = r.xf(reduced.num_free);
  out.free = r.xf.head(reduced.num_free);
  out.y = r.y.head(static_cast<Eigen::Index>(reduced.constraints.size()));
  for (std::size_t b = 0; b < reduced.block_dims.size(); ++b) {
    out.X.push_back(r.X[b] + out.t * Eigen::MatrixXd::Identity(reduced.block_dims[b], reduced.block_dims[b]));
  }
  return out;
}

}  // namespace sdp_detail

inline SdpSolution solve(const SdpProblem& prob, const SdpOptions& opts = {}) {
  prob.validate();
  SdpSolution sol;
  const auto red = sdp_detail::reduce_constraints(prob);
  if (!red.consistent) {
    sol.status = SdpStatus::Infeasible;
    std::ostringstream os;
    os << "equality constraints are inconsistent (least-squares residual " << red.inconsistency << ")";
    sol.message = os.str();
    return sol;
  }
  const SdpProblem reduced =
      red.keep.size() == prob.constraints.size() ? prob : sdp_detail::subset(prob, red.keep);

  auto finish = [&](std::vector<Eigen::MatrixXd> X, Eigen::VectorXd free) {
    auto r = residuals(prob, X, free);
    if (r.max_equality_residual > 0.0 && r.min_eigenvalue > 0.0) {
      auto Xp = X;
      Eigen::VectorXd fp = free;
      sdp_detail::project_affine(reduced, Xp, fp);
      const auto rp = residuals(prob, Xp, fp);
      if (rp.max_equality_residual < r.max_equality_residual && rp.min_eigenvalue >= -opts.psd_tol) {
        X = std::move(Xp);
        free = std::move(fp);
        r = rp;
      }
    }
    sol.X = std::move(X);
    sol.free = std::move(free);
    sol.max_equality_residual = r.max_equality_residual;
    sol.min_eigenvalue = r.min_eigenvalue;
    const sdp_detail::Assembled a(prob);
    sol.objective_value = sdp_detail::inner(a.C, sol.X) + a.cf.dot(sol.free);
    return r.max_equality_residual <= opts.feas_tol && r.min_eigenvalue >= -opts.psd_tol;
  };

  if (prob.is_feasibility()) {
    const auto ph = sdp_detail::run_phase1(reduced, opts);
    sol.iterations = ph.iterations;
    sol.margin = ph.t;
    const bool valid = finish(ph.X, ph.free);
    std::ostringstream os;
    os << "phase-1 " << ph.message << ", eigenvalue margin t* = " << ph.t;
    sol.message = os.str();
    if (ph.t >= opts.strict_margin && valid) {
      sol.status = SdpStatus::Feasible;
      if (opts.center) {
        auto Xc = sol.X;
        Eigen::VectorXd fc = sol.free;
        if (sdp_detail::analytic_center(reduced, Xc, fc)) {
          const SdpSolution keep = sol;
          if (finish(std::move(Xc), std::move(fc))) {
            sol.message += ", centered";
          } else {
            sol = keep;
          }
        }
      }
    } else if (ph.converged && ph.t < opts.strict_margin) {
      sol.status = SdpStatus::Infeasible;
    } else {
      sol.status = SdpStatus::NumericalFailure;
    }
    return sol;
  }

  const sdp_detail::Assembled a(reduced);
  const auto r = sdp_detail::interior_point(a, opts);
  sol.iterations = r.iterations;
  if (r.converged) {
    const bool valid = finish(r.X, r.xf);
    sol.dual_objective = r.dobj;
    Eigen::VectorXd yfull = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(prob.constraints.size()));
    for (std::size_t i = 0; i < red.keep.size(); ++i) yfull(red.keep[i]) = r.y(static_cast<Eigen::Index>(i));
    sol.y = std::move(yfull);
    sol.status = valid ? SdpStatus::Optimal : SdpStatus::NumericalFailure;
    sol.message = valid ? "optimal" : "converged but recomputed residuals exceed tolerance";
    return sol;
  }
  // Classify the failure with the feasibility phase.
  const auto ph = sdp_detail::run_phase1(reduced, opts);
  sol.margin = ph.t;
  finish(ph.X, ph.free);
  if (ph.converged && ph.t < -opts.strict_margin) {
    sol.status = SdpStatus::Infeasible;
    sol.message = "no PSD point satisfies the equalities (phase-1 margin " + std::to_string(ph.t) + ")";
  } else {
    sol.status = SdpStatus::NumericalFailure;
    sol.message = "interior point: " + r.message;
  }
  return sol;
}

}  // namespace roa
