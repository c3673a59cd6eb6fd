#pragma once

// Forward simulation of polynomial ODEs: Dormand-Prince 5(4) integration,
// trajectory classification and a grid-based reference region of attraction.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "roa/error.hpp"
#include "roa/format.hpp"
#include "roa/grid.hpp"
#include "roa/poly.hpp"
#include "roa/setgeom.hpp"

namespace roa {

enum class Verdict { ConvergedToOrigin, Diverged, Undecided };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::ConvergedToOrigin: return "ConvergedToOrigin";
    case Verdict::Diverged: return "Diverged";
    case Verdict::Undecided: return "Undecided";
  }
  return "?";
}

struct IntegratorOptions {
  double atol = 1e-8;
  double rtol = 1e-6;
  double converge_eps = 1e-3;
  double escape_radius = 10.0;
  /// End time; negative integrates backward.
  double t_max = 100.0;
  /// When set, takes steps of exactly this size (the last one shortened).
  std::optional<double> fixed_step;
  double h_min = 1e-12;
  long max_steps = 1000000;
  /// Keep every accepted (t, state) pair, not only the endpoints.
  bool record = false;
  /// Stop as soon as the state enters the converge_eps ball or leaves the escape ball.
  bool early_exit = true;
};

struct Trajectory {
  std::vector<double> x0;
  std::vector<double> times;
  std::vector<std::vector<double>> states;
  Verdict verdict = Verdict::Undecided;
  std::string note;

  const std::vector<double>& final_state() const { return states.back(); }
  double final_time() const { return times.back(); }
};

namespace odesim_detail {

inline double norm(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// Difference between the 5th and embedded 4th order weights.
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

class Stepper {
 public:
  explicit Stepper(const CompiledField& f) : f_(f), n_(f.dimension()) {
    for (auto& k : k_) k.assign(n_, 0.0);
    tmp_.assign(n_, 0.0);
  }

  /// One step of size h from (t, y); writes the 5th order result and an error estimate.
  void step(const std::vector<double>& y, double h, std::vector<double>& out, std::vector<double>& err) {
    out.resize(n_);
    err.resize(n_);
    f_(y, k_[0]);
    stage(y, h, {a21}, 1);
    stage(y, h, {a31, a32}, 2);
    stage(y, h, {a41, a42, a43}, 3);
    stage(y, h, {a51, a52, a53, a54}, 4);
    stage(y, h, {a61, a62, a63, a64, a65}, 5);
    for (std::size_t i = 0; i < n_; ++i) {
      out[i] = y[i] + h * (b1 * k_[0][i] + b3 * k_[2][i] + b4 * k_[3][i] + b5 * k_[4][i] + b6 * k_[5][i]);
    }
    f_(out, k_[6]);
    for (std::size_t i = 0; i < n_; ++i) {
      err[i] = h * (e1 * k_[0][i] + e3 * k_[2][i] + e4 * k_[3][i] + e5 * k_[4][i] + e6 * k_[5][i] + e7 * k_[6][i]);
    }
  }

 private:
  void stage(const std::vector<double>& y, double h, std::initializer_list<double> a, std::size_t s) {
    for (std::size_t i = 0; i < n_; ++i) {
      double acc = 0.0;
      std::size_t j = 0;
      for (double aij : a) acc += aij * k_[j++][i];
      tmp_[i] = y[i] + h * acc;
    }
    f_(tmp_, k_[s]);
  }

  const CompiledField& f_;
  std::size_t n_;
  std::array<std::vector<double>, 7> k_;
  std::vector<double> tmp_;
};

}  // namespace odesim_detail

inline Trajectory integrate(const CompiledField& f, const std::vector<double>& x0, const IntegratorOptions& opts = {}) {
  if (x0.size() != f.dimension()) throw ContractViolation("integrate: initial state has wrong dimension");
  for (double v : x0) {
    if (!std::isfinite(v)) throw ContractViolation("integrate: initial state must be finite");
  }
  Trajectory tr;
  tr.x0 = x0;
  const double dir = opts.t_max < 0.0 ? -1.0 : 1.0;
  const double t_end = opts.t_max;
  std::vector<double> y = x0;
  double t = 0.0;
  auto push = [&](bool force) {
    if (opts.record || force || tr.times.empty()) {
      tr.times.push_back(t);
      tr.states.push_back(y);
    } else {
      tr.times.back() = t;
      tr.states.back() = y;
    }
  };
  auto classify = [&]() -> bool {
    if (!opts.early_exit) return false;
    const double r = odesim_detail::norm(y);
    if (r <= opts.converge_eps) {
      tr.verdict = Verdict::ConvergedToOrigin;
      return true;
    }
    if (r >= opts.escape_radius) {
      tr.verdict = Verdict::Diverged;
      return true;
    }
    return false;
  };
  push(true);
  if (classify() || t_end == 0.0) return tr;
  if (!opts.record) push(true);  // separate slot for the moving endpoint

  odesim_detail::Stepper stepper(f);
  std::vector<double> next, err;
  const std::size_t n = y.size();

  if (opts.fixed_step) {
    const double h0 = std::abs(*opts.fixed_step);
    if (!(h0 > 0.0)) throw ContractViolation("integrate: fixed step must be positive");
    const long steps = static_cast<long>(std::ceil(std::abs(t_end) / h0 - 1e-9));
    for (long s = 0; s < steps; ++s) {
      const double h = s + 1 == steps ? t_end - t : dir * h0;
      stepper.step(y, h, next, err);
      y = next;
      t = s + 1 == steps ? t_end : t + h;
      push(false);
      if (classify()) return tr;
    }
    tr.verdict = Verdict::Undecided;
    return tr;
  }

  double h = dir * std::min(std::abs(t_end), 1e-2 * std::max(1.0, odesim_detail::norm(y)));
  for (long s = 0; s < opts.max_steps; ++s) {
    if (dir * (t + h - t_end) > 0.0) h = t_end - t;
    stepper.step(y, h, next, err);
    double e = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sc = opts.atol + opts.rtol * std::max(std::abs(y[i]), std::abs(next[i]));
      e = std::max(e, std::abs(err[i]) / sc);
    }
    if (!std::isfinite(e)) e = std::numeric_limits<double>::infinity();
    if (e <= 1.0) {
      t = (dir * (t + h - t_end) >= 0.0) ? t_end : t + h;
      y = next;
      push(false);
      if (classify()) return tr;
      if (t == t_end) {
        tr.verdict = Verdict::Undecided;
        return tr;
      }
    }
    const double factor = e == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(e, -0.2), 0.2, 5.0);
    h *= factor;
    if (std::abs(h) < opts.h_min) {
      tr.verdict = Verdict::Undecided;
      tr.note = "step size underflow";
      return tr;
    }
  }
  tr.verdict = Verdict::Undecided;
  tr.note = "step limit reached";
  return tr;
}

inline Trajectory integrate(const VectorField& f, const std::vector<double>& x0, const IntegratorOptions& opts = {}) {
  return integrate(CompiledField(f), x0, opts);
}

enum class CellLabel : std::uint8_t { Inside, Outside, Undecided };

inline const char* to_string(CellLabel l) {
  switch (l) {
    case CellLabel::Inside: return "inside";
    case CellLabel::Outside: return "outside";
    case CellLabel::Undecided: return "undecided";
  }
  return "?";
}

struct ReferenceRoa {
  UniformGrid grid;
  std::vector<CellLabel> labels;
  std::size_t origin_cell = 0;
  std::size_t inside = 0, outside = 0, undecided = 0;
  /// Inside cells that converged but are not grid-connected to the origin cell.
  std::size_t detached = 0;

  PointSet points(CellLabel which) const {
    PointSet out(grid.dim());
    std::vector<double> p;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != which) continue;
      grid.point(i, p);
      out.add(p);
    }
    return out;
  }
  PointSet inside_points() const { return points(CellLabel::Inside); }

  /// Inside cells with at least one neighbour carrying a different label.
  PointSet boundary() const {
    PointSet out(grid.dim());
    std::vector<double> p;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != CellLabel::Inside) continue;
      bool mixed = false;
      grid.for_each_neighbour(i, [&](std::size_t j) { mixed = mixed || labels[j] != CellLabel::Inside; });
      if (!mixed) continue;
      grid.point(i, p);
      out.add(p);
    }
    return out;
  }
};

/// Classifies every grid node by forward integration. Converged nodes that
/// are not connected to the origin node are relabeled Undecided.
inline ReferenceRoa reference_roa(const VectorField& f, const UniformGrid& grid, const IntegratorOptions& opts = {}) {
  if (grid.dim() != f.dimension()) throw ContractViolation("reference_roa: grid and field dimensions differ");
  for (std::size_t k = 0; k < grid.dim(); ++k) {
    if (grid.lo()[k] > 0.0 || grid.hi()[k] < 0.0) throw ContractViolation("reference_roa: box must contain the origin");
  }
  const CompiledField cf(f);
  ReferenceRoa ref;
  ref.grid = grid;
  ref.labels.assign(grid.size(), CellLabel::Undecided);
  IntegratorOptions o = opts;
  o.record = false;
  o.early_exit = true;
  std::vector<std::uint8_t> converged(grid.size(), 0);
  std::vector<double> x;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    grid.point(i, x);
    const Trajectory tr = integrate(cf, x, o);
    if (tr.verdict == Verdict::ConvergedToOrigin) converged[i] = 1;
    ref.labels[i] = tr.verdict == Verdict::Diverged ? CellLabel::Outside : CellLabel::Undecided;
  }
  ref.origin_cell = grid.nearest(std::vector<double>(grid.dim(), 0.0));
  if (converged[ref.origin_cell]) {
    const auto comp = flood_fill(grid, converged, ref.origin_cell);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (comp[i]) {
        ref.labels[i] = CellLabel::Inside;
      } else if (converged[i]) {
        ++ref.detached;
      }
    }
  } else {
    for (auto c : converged) ref.detached += c;
  }
  for (auto l : ref.labels) {
    if (l == CellLabel::Inside) ++ref.inside;
    if (l == CellLabel::Outside) ++ref.outside;
    if (l == CellLabel::Undecided) ++ref.undecided;
  }
  return ref;
}

/// "x1,...,xn,label" rows with a header.
inline void write_labeled_csv(std::ostream& os, const ReferenceRoa& ref) {
  for (std::size_t k = 0; k < ref.grid.dim(); ++k) os << "x" << k + 1 << ",";
  os << "label\n";
  std::vector<double> p;
  for (std::size_t i = 0; i < ref.labels.size(); ++i) {
    ref.grid.point(i, p);
    for (double v : p) os << format_double(v) << ",";
    os << to_string(ref.labels[i]) << "\n";
  }
}

namespace odesim_detail {
inline IntegratorOptions tight_integrator() {
  IntegratorOptions o;
  o.atol = 1e-12;
  o.rtol = 1e-10;
  return o;
}
}  // namespace odesim_detail

struct DecayCheckOptions {
  IntegratorOptions integrator = odesim_detail::tight_integrator();
  /// Integration error allowance: excess below rel*|x(t)| + abs is not a violation.
  double band_rel = 1e-8;
  double band_abs = 1e-12;
};

/// max over points and accepted times of |x(t)| - mu |x0| exp(-delta t), after
/// subtracting the integration error band. -infinity for an empty list.
inline double check_exponential_decay(const VectorField& f, const std::vector<std::vector<double>>& points, double mu,
                                      double delta, double t_max, const DecayCheckOptions& opts = {}) {
  if (!(mu > 0.0) || !(delta > 0.0)) throw ContractViolation("check_exponential_decay: mu and delta must be positive");
  double worst = -std::numeric_limits<double>::infinity();
  if (points.empty()) return worst;
  const CompiledField cf(f);
  IntegratorOptions o = opts.integrator;
  o.t_max = t_max;
  o.record = true;
  o.early_exit = false;
  for (const auto& x0 : points) {
    const double r0 = odesim_detail::norm(x0);
    const Trajectory tr = integrate(cf, x0, o);
    for (std::size_t k = 0; k < tr.times.size(); ++k) {
      const double r = odesim_detail::norm(tr.states[k]);
      const double bound = mu * r0 * std::exp(-delta * tr.times[k]);
      const double excess = r - bound;
      const double band = k == 0 ? 0.0 : opts.band_rel * r + opts.band_abs;
      worst = std::max(worst, excess > 0.0 ? std::max(0.0, excess - band) : excess);
    }
  }
  return worst;
}

}  // namespace roa
