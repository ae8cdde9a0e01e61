#pragma once

// Uniform tensor-product parameter grids in 1-3 dimensions and weight
// densities sampled on them.

#include "momap/core.hpp"

#include <array>
#include <functional>
#include <optional>
#include <string>

namespace momap {

enum class Boundary { periodic, open };

inline std::string to_string(Boundary b) { return b == Boundary::periodic ? "periodic" : "open"; }

struct Axis {
  double lower = 0.0;
  double upper = 1.0;
  Eigen::Index count = 4;
};

/// Node i along an axis sits at lower + i*h. Periodic axes use h = L/N (the
/// upper end is identified with the lower one); open axes include both end
/// points, h = L/(N-1), and integrate with the trapezoid rule.
class ParameterGrid {
 public:
  ParameterGrid() = default;
  ParameterGrid(int dim, std::array<Axis, 3> axes, Boundary boundary) : dim_(dim), axes_(axes), boundary_(boundary) {
    require(dim >= 1 && dim <= 3, "parameter grid dimension must be 1, 2 or 3");
    for (int j = 0; j < dim; ++j) {
      require(axes_[j].count >= 4, "parameter grid needs at least 4 nodes per axis");
      require(axes_[j].upper > axes_[j].lower, "parameter grid axis must have positive extent");
    }
    for (int j = dim; j < 3; ++j) axes_[j] = Axis{0.0, 1.0, 1};
  }

  static ParameterGrid line(double a, double b, Eigen::Index n, Boundary bc) {
    return ParameterGrid(1, {Axis{a, b, n}, Axis{}, Axis{}}, bc);
  }
  static ParameterGrid square(double a, double b, Eigen::Index n, Boundary bc) {
    return ParameterGrid(2, {Axis{a, b, n}, Axis{a, b, n}, Axis{}}, bc);
  }

  int dim() const { return dim_; }
  Boundary boundary() const { return boundary_; }
  bool periodic() const { return boundary_ == Boundary::periodic; }
  const Axis& axis(int j) const { return axes_[j]; }
  Eigen::Index count(int j) const { return axes_[j].count; }

  Eigen::Index node_count() const { return axes_[0].count * axes_[1].count * axes_[2].count; }

  double spacing(int j) const {
    const auto& a = axes_[j];
    return periodic() ? (a.upper - a.lower) / static_cast<double>(a.count)
                      : (a.upper - a.lower) / static_cast<double>(a.count - 1);
  }

  Eigen::Index index(std::array<Eigen::Index, 3> m) const {
    return m[0] + axes_[0].count * (m[1] + axes_[1].count * m[2]);
  }

  std::array<Eigen::Index, 3> multi_index(Eigen::Index flat) const {
    std::array<Eigen::Index, 3> m{};
    m[0] = flat % axes_[0].count;
    flat /= axes_[0].count;
    m[1] = flat % axes_[1].count;
    m[2] = flat / axes_[1].count;
    return m;
  }

  double coordinate(Eigen::Index flat, int j) const {
    return axes_[j].lower + static_cast<double>(multi_index(flat)[j]) * spacing(j);
  }

  Eigen::Vector3d point(Eigen::Index flat) const {
    Eigen::Vector3d r = Eigen::Vector3d::Zero();
    for (int j = 0; j < dim_; ++j) r(j) = coordinate(flat, j);
    return r;
  }

  /// Neighbour at offset `step` along axis j; empty when it leaves an open grid.
  std::optional<Eigen::Index> shift(Eigen::Index flat, int j, Eigen::Index step) const {
    auto m = multi_index(flat);
    const Eigen::Index n = axes_[j].count;
    Eigen::Index k = m[j] + step;
    if (periodic()) {
      k = ((k % n) + n) % n;
    } else if (k < 0 || k >= n) {
      return std::nullopt;
    }
    m[j] = k;
    return index(m);
  }

  double cell_volume() const {
    double v = 1.0;
    for (int j = 0; j < dim_; ++j) v *= spacing(j);
    return v;
  }

  double quadrature_weight(Eigen::Index flat) const {
    double q = cell_volume();
    if (!periodic()) {
      const auto m = multi_index(flat);
      for (int j = 0; j < dim_; ++j)
        if (m[j] == 0 || m[j] == axes_[j].count - 1) q *= 0.5;
    }
    return q;
  }

  RVector quadrature_weights() const {
    RVector q(node_count());
    for (Eigen::Index i = 0; i < node_count(); ++i) q(i) = quadrature_weight(i);
    return q;
  }

  bool on_boundary_layer(Eigen::Index flat) const {
    if (periodic()) return false;
    const auto m = multi_index(flat);
    for (int j = 0; j < dim_; ++j)
      if (m[j] == 0 || m[j] == axes_[j].count - 1) return true;
    return false;
  }

  bool operator==(const ParameterGrid& o) const {
    if (dim_ != o.dim_ || boundary_ != o.boundary_) return false;
    for (int j = 0; j < 3; ++j)
      if (axes_[j].lower != o.axes_[j].lower || axes_[j].upper != o.axes_[j].upper ||
          axes_[j].count != o.axes_[j].count)
        return false;
    return true;
  }

 private:
  int dim_ = 1;
  std::array<Axis, 3> axes_{Axis{0.0, 1.0, 4}, Axis{0.0, 1.0, 1}, Axis{0.0, 1.0, 1}};
  Boundary boundary_ = Boundary::open;
};

inline void require_same_grid(const ParameterGrid& a, const ParameterGrid& b, const char* what) {
  if (!(a == b)) throw InputError(std::string(what) + ": grid mismatch");
}

/// Nonnegative density w(r) sampled per node.
struct WeightDensity {
  ParameterGrid grid;
  RVector values;
  double total = 0.0;

  WeightDensity() = default;
  WeightDensity(ParameterGrid g, RVector v) : grid(std::move(g)), values(std::move(v)) {
    require(values.size() == grid.node_count(), "weight density size does not match grid");
    require(all_finite(values), "weight density has non-finite entries");
    require(values.minCoeff() >= 0.0, "weight density must be nonnegative");
    total = grid.quadrature_weights().dot(values);
  }

  static WeightDensity from_function(const ParameterGrid& g, const std::function<double(const Eigen::Vector3d&)>& f) {
    RVector v(g.node_count());
    for (Eigen::Index i = 0; i < g.node_count(); ++i) v(i) = f(g.point(i));
    return WeightDensity(g, std::move(v));
  }

  static WeightDensity uniform(const ParameterGrid& g, double mass = 1.0) {
    RVector v = RVector::Ones(g.node_count());
    const double raw = g.quadrature_weights().sum();
    return WeightDensity(g, v * (mass / raw));
  }

  /// Fraction of the total mass carried by nodes on an open boundary layer.
  double boundary_mass_fraction() const {
    if (grid.periodic() || total <= 0.0) return 0.0;
    double m = 0.0;
    for (Eigen::Index i = 0; i < grid.node_count(); ++i)
      if (grid.on_boundary_layer(i)) m += grid.quadrature_weight(i) * values(i);
    return m / total;
  }
};

}  // namespace momap
