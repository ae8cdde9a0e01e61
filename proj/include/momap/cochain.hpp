#pragma once

// Cochains on a ParameterGrid: values on nodes (k=0), forward edges (k=1) and
// oriented plaquettes (k=2), with the coboundary operator d.
//
// Layout: a k-cochain holds one value array per component; a component is an
// axis (k=1) or an ordered axis pair j<l (k=2). Every cell is anchored at its
// lowest node. Cells that leave an open grid are masked out and hold zero.

#include "momap/grid.hpp"

#include <array>
#include <ostream>
#include <utility>
#include <vector>

namespace momap {

class Cochain {
 public:
  Cochain() = default;
  Cochain(ParameterGrid grid, int degree) : grid_(std::move(grid)), degree_(degree) {
    require(degree >= 0 && degree <= 2, "cochain degree must be 0, 1 or 2");
    require(degree <= grid_.dim(), "cochain degree exceeds grid dimension");
    const int nc = component_count(grid_.dim(), degree);
    values_.assign(static_cast<std::size_t>(nc), Eigen::ArrayXd::Zero(grid_.node_count()));
    valid_.assign(static_cast<std::size_t>(nc), Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(grid_.node_count(), true));
    for (int c = 0; c < nc; ++c)
      for (Eigen::Index x = 0; x < grid_.node_count(); ++x) valid_[c](x) = cell_exists(c, x);
  }

  static int component_count(int dim, int degree) {
    if (degree == 0) return 1;
    if (degree == 1) return dim;
    return dim * (dim - 1) / 2;
  }

  /// Axis pair spanned by 2-form component c.
  static std::pair<int, int> plane_axes(int c) {
    static constexpr std::array<std::pair<int, int>, 3> planes{{{0, 1}, {0, 2}, {1, 2}}};
    return planes[static_cast<std::size_t>(c)];
  }

  static int plane_component(int j, int l) {
    if (j == 0 && l == 1) return 0;
    if (j == 0 && l == 2) return 1;
    return 2;
  }

  const ParameterGrid& grid() const { return grid_; }
  int degree() const { return degree_; }
  int components() const { return static_cast<int>(values_.size()); }

  Eigen::ArrayXd& values(int c = 0) { return values_[static_cast<std::size_t>(c)]; }
  const Eigen::ArrayXd& values(int c = 0) const { return values_[static_cast<std::size_t>(c)]; }
  bool valid(int c, Eigen::Index x) const { return valid_[static_cast<std::size_t>(c)](x); }

  double& operator()(int c, Eigen::Index x) { return values_[static_cast<std::size_t>(c)](x); }
  double operator()(int c, Eigen::Index x) const { return values_[static_cast<std::size_t>(c)](x); }

  double max_abs() const {
    double m = 0.0;
    for (const auto& v : values_) m = std::max(m, v.abs().maxCoeff());
    return m;
  }

  Cochain& operator+=(const Cochain& o) {
    check_compatible(o);
    for (std::size_t c = 0; c < values_.size(); ++c) values_[c] += o.values_[c];
    return *this;
  }
  Cochain& operator-=(const Cochain& o) {
    check_compatible(o);
    for (std::size_t c = 0; c < values_.size(); ++c) values_[c] -= o.values_[c];
    return *this;
  }
  Cochain& operator*=(double s) {
    for (auto& v : values_) v *= s;
    return *this;
  }
  friend Cochain operator+(Cochain a, const Cochain& b) { return a += b; }
  friend Cochain operator-(Cochain a, const Cochain& b) { return a -= b; }
  friend Cochain operator*(double s, Cochain a) { return a *= s; }

  void check_compatible(const Cochain& o) const {
    require(degree_ == o.degree_, "cochain degree mismatch");
    require_same_grid(grid_, o.grid_, "cochain");
  }

  /// Cochain whose value at x is this cochain's value at x+offset (periodic grids).
  Cochain shifted(std::array<Eigen::Index, 3> offset) const {
    require(grid_.periodic(), "cochain shift requires a periodic grid");
    Cochain out(grid_, degree_);
    for (Eigen::Index x = 0; x < grid_.node_count(); ++x) {
      Eigen::Index y = x;
      for (int j = 0; j < grid_.dim(); ++j) y = *grid_.shift(y, j, offset[static_cast<std::size_t>(j)]);
      for (int c = 0; c < components(); ++c) out(c, x) = (*this)(c, y);
    }
    return out;
  }

 private:
  bool cell_exists(int c, Eigen::Index x) const {
    if (degree_ == 0) return true;
    if (degree_ == 1) return grid_.shift(x, c, 1).has_value();
    const auto [j, l] = plane_axes(c);
    return grid_.shift(x, j, 1).has_value() && grid_.shift(x, l, 1).has_value();
  }

  ParameterGrid grid_;
  int degree_ = 0;
  std::vector<Eigen::ArrayXd> values_;
  std::vector<Eigen::Array<bool, Eigen::Dynamic, 1>> valid_;
};

/// Coboundary: (d theta)_j(x) = theta(x+e_j) - theta(x) and
/// (d A)_{jl}(x) = A_j(x) + A_l(x+e_j) - A_j(x+e_l) - A_l(x).
inline Cochain exterior_derivative(const Cochain& c) {
  const auto& g = c.grid();
  if (c.degree() >= 2) throw InputError("exterior_derivative: no 3-form storage for degree-2 input");
  if (c.degree() + 1 > g.dim()) throw InputError("exterior_derivative: result degree exceeds grid dimension");
  Cochain out(g, c.degree() + 1);
  if (c.degree() == 0) {
    for (int j = 0; j < g.dim(); ++j)
      for (Eigen::Index x = 0; x < g.node_count(); ++x)
        if (out.valid(j, x)) out(j, x) = c(0, *g.shift(x, j, 1)) - c(0, x);
    return out;
  }
  for (int comp = 0; comp < out.components(); ++comp) {
    const auto [j, l] = Cochain::plane_axes(comp);
    for (Eigen::Index x = 0; x < g.node_count(); ++x) {
      if (!out.valid(comp, x)) continue;
      const Eigen::Index xj = *g.shift(x, j, 1);
      const Eigen::Index xl = *g.shift(x, l, 1);
      out(comp, x) = c(j, x) + c(l, xj) - c(j, xl) - c(l, x);
    }
  }
  return out;
}

/// Sum of a 1-cochain around the closed loop through `start` along `axis`.
inline double holonomy(const Cochain& a, int axis, Eigen::Index start = 0) {
  require(a.degree() == 1, "holonomy needs a 1-cochain");
  require(a.grid().periodic(), "holonomy needs a periodic grid");
  double s = 0.0;
  Eigen::Index x = start;
  for (Eigen::Index k = 0; k < a.grid().count(axis); ++k) {
    s += a(axis, x);
    x = *a.grid().shift(x, axis, 1);
  }
  return s;
}

/// CSV dump: cell,component,i0,i1,i2,value (one row per unmasked cell).
inline void write_cochain_csv(std::ostream& os, const Cochain& c) {
  static constexpr const char* cell[] = {"node", "edge", "plaquette"};
  os << "cell,component,i0,i1,i2,value\n";
  os.precision(17);
  for (int comp = 0; comp < c.components(); ++comp) {
    std::string label = "-";
    if (c.degree() == 1) label = std::to_string(comp);
    if (c.degree() == 2) {
      const auto [j, l] = Cochain::plane_axes(comp);
      label = std::to_string(j) + std::to_string(l);
    }
    for (Eigen::Index x = 0; x < c.grid().node_count(); ++x) {
      if (!c.valid(comp, x)) continue;
      const auto m = c.grid().multi_index(x);
      os << cell[c.degree()] << ',' << label << ',' << m[0] << ',' << m[1] << ',' << m[2] << ',' << c(comp, x)
         << '\n';
    }
  }
}

}  // namespace momap
