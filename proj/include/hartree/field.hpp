#ifndef HARTREE_FIELD_HPP
#define HARTREE_FIELD_HPP

#include <Eigen/Dense>
#include <memory>

#include "hartree/grid.hpp"

namespace hartree {

using VectorXd = Eigen::VectorXd;
using VectorXcd = Eigen::VectorXcd;
using MatrixXd = Eigen::MatrixXd;

/// Complex radial function sampled on the nodes of a RadialGrid.
/// The grid is shared, immutable, and referenced by pointer; fields on
/// different grids never mix.
class RadialField {
 public:
  RadialField() = default;
  explicit RadialField(std::shared_ptr<const RadialGrid> grid)
      : grid_(std::move(grid)), values_(VectorXcd::Zero(grid_->size())) {}
  RadialField(std::shared_ptr<const RadialGrid> grid, VectorXcd values)
      : grid_(std::move(grid)), values_(std::move(values)) {
    if (std::size_t(values_.size()) != grid_->size())
      throw error("grid-mismatch", "value count differs from node count");
  }

  const RadialGrid& grid() const { return *grid_; }
  const std::shared_ptr<const RadialGrid>& grid_ptr() const { return grid_; }
  VectorXcd& values() { return values_; }
  const VectorXcd& values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  complexd operator[](std::size_t i) const { return values_[i]; }
  complexd& operator[](std::size_t i) { return values_[i]; }

  bool same_grid(const RadialField& other) const { return grid_ == other.grid_; }

  bool all_finite() const {
    for (Eigen::Index i = 0; i < values_.size(); ++i)
      if (!finite(values_[i])) return false;
    return true;
  }

  VectorXd real() const { return values_.real(); }
  VectorXd imag() const { return values_.imag(); }

  static RadialField from_real(std::shared_ptr<const RadialGrid> grid,
                               const VectorXd& re) {
    VectorXcd v(re.size());
    v.real() = re;
    v.imag().setZero();
    return RadialField(std::move(grid), std::move(v));
  }
  static RadialField from_parts(std::shared_ptr<const RadialGrid> grid,
                                const VectorXd& re, const VectorXd& im) {
    VectorXcd v(re.size());
    v.real() = re;
    v.imag() = im;
    return RadialField(std::move(grid), std::move(v));
  }

  /// Profile sampler: f(r) at every node.
  template <class F>
  static RadialField sample(std::shared_ptr<const RadialGrid> grid, const F& f) {
    RadialField out(grid);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(out.grid().nodes[i]);
    return out;
  }

  /// Weighted L2 inner product Re<f, g>_w with the grid quadrature weights.
  static double inner_w(const RadialField& f, const RadialField& g) {
    require_same_grid(f, g);
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
      s += f.grid().weights[i] * std::real(f[i] * std::conj(g[i]));
    return s;
  }

  static void require_same_grid(const RadialField& f, const RadialField& g) {
    if (!f.same_grid(g)) throw error("grid-mismatch", "fields live on different grids");
  }

 private:
  std::shared_ptr<const RadialGrid> grid_;
  VectorXcd values_;
};

inline RadialField operator+(const RadialField& a, const RadialField& b) {
  RadialField::require_same_grid(a, b);
  return RadialField(a.grid_ptr(), a.values() + b.values());
}
inline RadialField operator-(const RadialField& a, const RadialField& b) {
  RadialField::require_same_grid(a, b);
  return RadialField(a.grid_ptr(), a.values() - b.values());
}
inline RadialField operator*(complexd c, const RadialField& a) {
  return RadialField(a.grid_ptr(), c * a.values());
}
inline RadialField operator*(double c, const RadialField& a) {
  return RadialField(a.grid_ptr(), c * a.values());
}

}  // namespace hartree

#endif
