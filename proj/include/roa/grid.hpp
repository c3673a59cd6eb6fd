#pragma once

// Uniform node grid over an axis-aligned box and 2n-neighbour flood fill.
// Nodes sit at lo + i * (hi - lo) / (N - 1); with N odd and a box symmetric
// about 0 the origin is a node. N = 1 degenerates to the box center.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "roa/error.hpp"

namespace roa {

class UniformGrid {
 public:
  UniformGrid() = default;
  UniformGrid(std::vector<double> lo, std::vector<double> hi, int resolution)
      : lo_(std::move(lo)), hi_(std::move(hi)), n_(resolution) {
    if (lo_.empty() || lo_.size() != hi_.size()) throw ContractViolation("UniformGrid: bad box dimensions");
    if (resolution < 1) throw ContractViolation("UniformGrid: resolution must be >= 1");
    for (std::size_t k = 0; k < lo_.size(); ++k) {
      if (!(lo_[k] < hi_[k])) throw ContractViolation("UniformGrid: box must have lo < hi");
    }
    total_ = 1;
    for (std::size_t k = 0; k < lo_.size(); ++k) {
      if (total_ > (std::size_t{1} << 40) / static_cast<std::size_t>(n_)) {
        throw ContractViolation("UniformGrid: too many nodes");
      }
      total_ *= static_cast<std::size_t>(n_);
    }
  }

  /// Square box [-half, half]^dim.
  static UniformGrid centered(std::size_t dim, double half, int resolution) {
    return UniformGrid(std::vector<double>(dim, -half), std::vector<double>(dim, half), resolution);
  }

  std::size_t dim() const { return lo_.size(); }
  int resolution() const { return n_; }
  std::size_t size() const { return total_; }
  const std::vector<double>& lo() const { return lo_; }
  const std::vector<double>& hi() const { return hi_; }

  double spacing(std::size_t axis) const { return n_ > 1 ? (hi_[axis] - lo_[axis]) / (n_ - 1) : hi_[axis] - lo_[axis]; }
  /// Length of one cell diagonal.
  double diagonal() const {
    double s = 0.0;
    for (std::size_t k = 0; k < dim(); ++k) s += spacing(k) * spacing(k);
    return std::sqrt(s);
  }
  double cell_volume() const {
    double v = 1.0;
    for (std::size_t k = 0; k < dim(); ++k) v *= spacing(k);
    return v;
  }

  double coordinate(std::size_t axis, int i) const {
    if (n_ == 1) return 0.5 * (lo_[axis] + hi_[axis]);
    if (i == n_ - 1) return hi_[axis];
    return lo_[axis] + i * spacing(axis);
  }

  /// Axis 0 varies fastest.
  std::vector<int> unflatten(std::size_t idx) const {
    std::vector<int> ix(dim());
    for (std::size_t k = 0; k < dim(); ++k) {
      ix[k] = static_cast<int>(idx % static_cast<std::size_t>(n_));
      idx /= static_cast<std::size_t>(n_);
    }
    return ix;
  }
  std::size_t flatten(const std::vector<int>& ix) const {
    std::size_t idx = 0;
    for (std::size_t k = dim(); k-- > 0;) idx = idx * static_cast<std::size_t>(n_) + static_cast<std::size_t>(ix[k]);
    return idx;
  }

  void point(std::size_t idx, std::vector<double>& out) const {
    out.resize(dim());
    for (std::size_t k = 0; k < dim(); ++k) {
      out[k] = coordinate(k, static_cast<int>(idx % static_cast<std::size_t>(n_)));
      idx /= static_cast<std::size_t>(n_);
    }
  }
  std::vector<double> point(std::size_t idx) const {
    std::vector<double> out;
    point(idx, out);
    return out;
  }

  /// Node closest to x (clamped to the box).
  std::size_t nearest(const std::vector<double>& x) const {
    if (x.size() != dim()) throw ContractViolation("UniformGrid::nearest: dimension mismatch");
    std::vector<int> ix(dim());
    for (std::size_t k = 0; k < dim(); ++k) {
      int i = 0;
      if (n_ > 1) i = static_cast<int>(std::lround((x[k] - lo_[k]) / spacing(k)));
      ix[k] = std::min(std::max(i, 0), n_ - 1);
    }
    return flatten(ix);
  }

  /// Calls visit(j) for each of the up to 2n axis neighbours of node idx.
  template <class Visit>
  void for_each_neighbour(std::size_t idx, Visit&& visit) const {
    std::size_t stride = 1;
    for (std::size_t k = 0; k < dim(); ++k) {
      const int i = static_cast<int>((idx / stride) % static_cast<std::size_t>(n_));
      if (i > 0) visit(idx - stride);
      if (i + 1 < n_) visit(idx + stride);
      stride *= static_cast<std::size_t>(n_);
    }
  }

 private:
  std::vector<double> lo_, hi_;
  int n_ = 1;
  std::size_t total_ = 0;
};

/// Nodes reachable from seed through nodes with mask set. The seed itself is
/// always part of the result.
inline std::vector<std::uint8_t> flood_fill(const UniformGrid& grid, const std::vector<std::uint8_t>& mask,
                                            std::size_t seed) {
  if (mask.size() != grid.size()) throw ContractViolation("flood_fill: mask size does not match grid");
  if (seed >= grid.size()) throw ContractViolation("flood_fill: seed outside grid");
  std::vector<std::uint8_t> out(grid.size(), 0);
  std::vector<std::size_t> stack{seed};
  out[seed] = 1;
  while (!stack.empty()) {
    const std::size_t cur = stack.back();
    stack.pop_back();
    grid.for_each_neighbour(cur, [&](std::size_t j) {
      if (mask[j] && !out[j]) {
        out[j] = 1;
        stack.push_back(j);
      }
    });
  }
  return out;
}

}  // namespace roa
