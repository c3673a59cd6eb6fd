#pragma once

// Finite point sets, the directed distance
//   zeta(A, B) = max_{a in A} min_{b in B} |a - b|
// and the Hausdorff distance H(A, B) = max(zeta(A, B), zeta(B, A)).

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "roa/error.hpp"
#include "roa/format.hpp"

namespace roa {

/// Points stored row-major in one flat buffer.
class PointSet {
 public:
  PointSet() = default;
  explicit PointSet(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw ContractViolation("PointSet: dimension must be positive");
  }
  PointSet(std::size_t dim, std::initializer_list<std::vector<double>> pts) : PointSet(dim) {
    for (const auto& p : pts) add(p);
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : coords_.size() / dim_; }
  bool empty() const { return coords_.empty(); }
  const std::vector<double>& coords() const { return coords_; }

  std::span<const double> operator[](std::size_t i) const { return {coords_.data() + i * dim_, dim_}; }

  void add(std::span<const double> p) {
    if (p.size() != dim_) throw ContractViolation("PointSet::add: dimension mismatch");
    coords_.insert(coords_.end(), p.begin(), p.end());
  }
  void add(const std::vector<double>& p) { add(std::span<const double>(p)); }
  void reserve(std::size_t n) { coords_.reserve(n * dim_); }

  /// Exact coordinate match.
  bool contains(std::span<const double> p) const {
    for (std::size_t i = 0; i < size(); ++i) {
      if (std::equal(p.begin(), p.end(), (*this)[i].begin())) return true;
    }
    return false;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<double> coords_;
};

namespace setgeom_detail {

inline void check_pair(const PointSet& a, const PointSet& b, const char* who) {
  if (a.empty() || b.empty()) throw ContractViolation(std::string(who) + ": point sets must be nonempty");
  if (a.dim() != b.dim()) throw ContractViolation(std::string(who) + ": dimension mismatch");
}

// Accumulates from axis 0 so the partial sum after axis 0 equals the sweep key.
inline double squared_distance(const double* x, const double* y, std::size_t dim) {
  double s = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    const double d = x[k] - y[k];
    s += d * d;
  }
  return s;
}

// Brute force: compares every pair.
inline double directed_squared_brute(const PointSet& a, const PointSet& b) {
  const std::size_t dim = a.dim();
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < b.size(); ++j) {
      best = std::min(best, squared_distance(a[i].data(), b[j].data(), dim));
    }
    worst = std::max(worst, best);
  }
  return worst;
}

// Sweep over B sorted by the first coordinate. A candidate is skipped only when
// its first-axis term alone already exceeds the best squared distance; adding
// nonnegative terms never rounds a sum downward, so the skipped pairs could not
// have been the minimum and the result is bit-identical to brute force. The
// outer loop also abandons a point once it cannot raise the running maximum.
inline double directed_squared_sweep(const PointSet& a, const PointSet& b) {
  const std::size_t dim = a.dim();
  const std::size_t nb = b.size();
  std::vector<std::size_t> order(nb);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return b[i][0] < b[j][0]; });
  std::vector<double> sorted(nb * dim);
  for (std::size_t k = 0; k < nb; ++k) std::copy_n(b[order[k]].data(), dim, sorted.data() + k * dim);
  std::vector<double> keys(nb);
  for (std::size_t k = 0; k < nb; ++k) keys[k] = sorted[k * dim];

  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double* x = a[i].data();
    const std::size_t start =
        static_cast<std::size_t>(std::lower_bound(keys.begin(), keys.end(), x[0]) - keys.begin());
    double best = std::numeric_limits<double>::infinity();
    std::size_t up = start;
    std::size_t down = start;
    bool up_open = up < nb;
    bool down_open = down > 0;
    while (up_open || down_open) {
      if (up_open) {
        const double d0 = keys[up] - x[0];
        if (d0 * d0 > best) {
          up_open = false;
        } else {
          best = std::min(best, squared_distance(x, sorted.data() + up * dim, dim));
          up_open = ++up < nb;
        }
      }
      if (down_open) {
        const double d0 = x[0] - keys[down - 1];
        if (d0 * d0 > best) {
          down_open = false;
        } else {
          best = std::min(best, squared_distance(x, sorted.data() + (down - 1) * dim, dim));
          down_open = --down > 0;
        }
      }
      if (best <= worst) break;
    }
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace setgeom_detail

/// zeta(A, B); zero iff every point of A is also in B.
inline double directed_distance(const PointSet& a, const PointSet& b) {
  setgeom_detail::check_pair(a, b, "directed_distance");
  const double pairs = static_cast<double>(a.size()) * static_cast<double>(b.size());
  const double sq = pairs < 4096.0 ? setgeom_detail::directed_squared_brute(a, b)
                                   : setgeom_detail::directed_squared_sweep(a, b);
  return std::sqrt(sq);
}

inline double hausdorff(const PointSet& a, const PointSet& b) {
  setgeom_detail::check_pair(a, b, "hausdorff");
  return std::max(directed_distance(a, b), directed_distance(b, a));
}

namespace setgeom_detail {

inline std::string describe(std::span<const double> p) {
  std::string s = "(";
  for (std::size_t k = 0; k < p.size(); ++k) s += (k ? ", " : "") + format_double(p[k]);
  return s + ")";
}

inline void require_subset(const PointSet& inner, const PointSet& outer, const char* names) {
  std::set<std::vector<double>> pool;
  for (std::size_t i = 0; i < outer.size(); ++i) pool.emplace(outer[i].begin(), outer[i].end());
  for (std::size_t i = 0; i < inner.size(); ++i) {
    if (!pool.count(std::vector<double>(inner[i].begin(), inner[i].end()))) {
      throw ContractViolation(std::string("check_nested_triangle: ") + names + " violated; point " +
                              describe(inner[i]) + " is missing");
    }
  }
}

}  // namespace setgeom_detail

/// For X ⊆ Y ⊆ Z: H(X, Z) >= max(H(X, Y), H(Y, Z)).
inline bool check_nested_triangle(const PointSet& x, const PointSet& y, const PointSet& z) {
  setgeom_detail::require_subset(x, y, "X subset of Y");
  setgeom_detail::require_subset(y, z, "Y subset of Z");
  return hausdorff(x, z) >= std::max(hausdorff(x, y), hausdorff(y, z));
}

/// One point per line, comma separated.
inline void write_csv(std::ostream& os, const PointSet& s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto p = s[i];
    for (std::size_t k = 0; k < p.size(); ++k) os << (k ? "," : "") << format_double(p[k]);
    os << '\n';
  }
}

/// Blank lines and lines starting with '#' are skipped; a header line whose
/// first field is not numeric is skipped too.
inline PointSet read_csv(std::istream& is) {
  PointSet out;
  std::string line;
  std::size_t lineno = 0;
  bool first_data = true;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> p;
    std::istringstream ls(line);
    std::string field;
    bool numeric = true;
    while (std::getline(ls, field, ',')) {
      const auto b = field.find_first_not_of(" \t");
      const auto e = field.find_last_not_of(" \t");
      if (b == std::string::npos) {
        numeric = false;
        break;
      }
      double v = 0.0;
      const char* s = field.data() + b;
      const char* end = field.data() + e + 1;
      if (*s == '+') ++s;
      auto [ptr, ec] = std::from_chars(s, end, v);
      if (ec != std::errc() || ptr != end) {
        numeric = false;
        break;
      }
      p.push_back(v);
    }
    if (!numeric) {
      if (first_data) {
        first_data = false;
        continue;
      }
      throw ParseError("point CSV line " + std::to_string(lineno) + ": expected numbers");
    }
    first_data = false;
    if (out.dim() == 0) {
      if (p.empty()) throw ParseError("point CSV line " + std::to_string(lineno) + ": empty point");
      out = PointSet(p.size());
    }
    if (p.size() != out.dim()) throw ParseError("point CSV line " + std::to_string(lineno) + ": dimension mismatch");
    out.add(p);
  }
  return out;
}

}  // namespace roa
