#pragma once

// Generators for SDP instances with known verdicts, shared by the unit and
// acceptance suites.

#include <random>
#include <vector>

#include <Eigen/Dense>

#include "roa/sdp.hpp"

namespace roa::testing_fixtures {

/// minimize <diag(c), X>  s.t.  trace(X) = 1; optimum is min_i c_i.
inline SdpProblem diagonal_trace_problem(const std::vector<double>& c) {
  SdpProblem p;
  const int n = static_cast<int>(c.size());
  p.block_dims = {n};
  SdpConstraint trace;
  for (int i = 0; i < n; ++i) {
    trace.entries.push_back({0, i, i, 1.0});
    p.objective.push_back({0, i, i, c[static_cast<std::size_t>(i)]});
  }
  trace.rhs = 1.0;
  p.constraints.push_back(trace);
  return p;
}

inline Eigen::MatrixXd random_spd(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd Q(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) Q(i, j) = g(rng);
  }
  return Q * Q.transpose() / n + 0.1 * Eigen::MatrixXd::Identity(n, n);
}

inline SdpConstraint random_constraint(std::mt19937_64& rng, const std::vector<int>& dims) {
  std::normal_distribution<double> g;
  std::bernoulli_distribution keep(0.5);
  SdpConstraint c;
  for (int b = 0; b < static_cast<int>(dims.size()); ++b) {
    for (int i = 0; i < dims[static_cast<std::size_t>(b)]; ++i) {
      for (int j = i; j < dims[static_cast<std::size_t>(b)]; ++j) {
        if (keep(rng)) c.entries.push_back({b, i, j, g(rng)});
      }
    }
  }
  if (c.entries.empty()) c.entries.push_back({0, 0, 0, 1.0});
  return c;
}

/// Constraints sampled at random; b = A(X0) for a random X0 > 0.
inline SdpProblem random_feasible_problem(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nblocks(1, 3), bdim(1, 5);
  SdpProblem p;
  for (int b = nblocks(rng); b > 0; --b) p.block_dims.push_back(bdim(rng));
  std::vector<Eigen::MatrixXd> X0;
  for (int d : p.block_dims) X0.push_back(random_spd(rng, d));
  const int max_m = static_cast<int>(p.num_symmetric_entries());
  std::uniform_int_distribution<int> mdist(1, std::max(1, max_m - 1));
  const int m = mdist(rng);
  for (int i = 0; i < m; ++i) {
    SdpConstraint c = random_constraint(rng, p.block_dims);
    double rhs = 0.0;
    for (const auto& e : c.entries) {
      const auto& X = X0[static_cast<std::size_t>(e.block)];
      rhs += e.row == e.col ? e.value * X(e.row, e.row) : 2.0 * e.value * X(e.row, e.col);
    }
    c.rhs = rhs;
    p.constraints.push_back(std::move(c));
  }
  return p;
}

/// A feasible random problem plus a scalar block pinned to two different values
/// (or to a negative value).
inline SdpProblem random_infeasible_problem(std::mt19937_64& rng) {
  SdpProblem p = random_feasible_problem(rng);
  p.block_dims.push_back(1);
  const int s = static_cast<int>(p.block_dims.size()) - 1;
  std::uniform_real_distribution<double> u(0.1, 5.0);
  std::bernoulli_distribution negative(0.3);
  if (negative(rng)) {
    p.constraints.push_back({{{s, 0, 0, 1.0}}, {}, -u(rng)});
  } else {
    const double v = u(rng);
    const double scale = u(rng);
    p.constraints.push_back({{{s, 0, 0, 1.0}}, {}, v});
    p.constraints.push_back({{{s, 0, 0, scale}}, {}, scale * v + u(rng)});
  }
  return p;
}

/// Infeasible by a Farkas certificate: for a random y with y_m = 1 the last
/// constraint is chosen so that sum_i y_i A_i = S with S > 0, and b with
/// b.y = -1. Any X >= 0 would give b.y = <S, X> >= 0.
inline SdpProblem random_farkas_infeasible_problem(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nblocks(1, 3), bdim(1, 5);
  std::normal_distribution<double> g;
  SdpProblem p;
  for (int b = nblocks(rng); b > 0; --b) p.block_dims.push_back(bdim(rng));
  const std::size_t nb = p.block_dims.size();
  const int max_m = static_cast<int>(p.num_symmetric_entries());
  std::uniform_int_distribution<int> mdist(1, std::max(1, max_m - 1));
  const int m = mdist(rng);
  std::vector<double> y(static_cast<std::size_t>(m), 1.0);
  std::vector<Eigen::MatrixXd> last;
  for (int d : p.block_dims) last.push_back(random_spd(rng, d));
  double by = 0.0;
  for (int i = 0; i + 1 < m; ++i) {
    SdpConstraint c = random_constraint(rng, p.block_dims);
    c.rhs = g(rng);
    y[static_cast<std::size_t>(i)] = g(rng);
    for (const auto& e : c.entries) {
      auto& M = last[static_cast<std::size_t>(e.block)];
      M(e.row, e.col) -= y[static_cast<std::size_t>(i)] * e.value;
      if (e.row != e.col) M(e.col, e.row) -= y[static_cast<std::size_t>(i)] * e.value;
    }
    by += y[static_cast<std::size_t>(i)] * c.rhs;
    p.constraints.push_back(std::move(c));
  }
  SdpConstraint c;
  for (std::size_t b = 0; b < nb; ++b) {
    for (int i = 0; i < p.block_dims[b]; ++i) {
      for (int j = i; j < p.block_dims[b]; ++j) c.entries.push_back({static_cast<int>(b), i, j, last[b](i, j)});
    }
  }
  c.rhs = -1.0 - by;
  p.constraints.push_back(std::move(c));
  return p;
}

}  // namespace roa::testing_fixtures
