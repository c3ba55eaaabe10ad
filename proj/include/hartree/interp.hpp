#ifndef HARTREE_INTERP_HPP
#define HARTREE_INTERP_HPP

#include "hartree/field.hpp"

namespace hartree {

/// Off-node evaluation of a sampled radial field.
///
/// Inside the grid: cubic Lagrange interpolation in the grading coordinate
/// (log r on geometric grids). Beyond the last node: the declared tail law
/// f ~ r^{-(d-2)}. Below the first node: even quadratic in r through the
/// innermost samples (radial fields are even and smooth through r = 0).
class FieldInterpolator {
 public:
  explicit FieldInterpolator(const RadialField& f)
      : grid_(f.grid_ptr()), v_(f.values()) {}

  complexd operator()(double r) const {
    const RadialGrid& g = *grid_;
    const auto& rn = g.nodes;
    const std::size_t n = g.size();
    if (!(r >= 0.0)) throw error("degenerate-range", "need r >= 0");
    if (r >= rn[n - 1])
      return v_[n - 1] * std::pow(rn[n - 1] / r, double(g.d - 2));
    if (r <= rn[0]) {
      // even quadratic in r: p(r^2) through the first three samples
      const double x = r * r;
      const double x0 = rn[0] * rn[0], x1 = rn[1] * rn[1], x2 = rn[2] * rn[2];
      return v_[0] * (x - x1) * (x - x2) / ((x0 - x1) * (x0 - x2)) +
             v_[1] * (x - x0) * (x - x2) / ((x1 - x0) * (x1 - x2)) +
             v_[2] * (x - x0) * (x - x1) / ((x2 - x0) * (x2 - x1));
    }
    const double t = g.grading == Grading::geometric ? std::log(r) : r;
    // cell index by binary search on the grading coordinate
    const auto it = std::upper_bound(g.coord.begin(), g.coord.end(), t);
    std::size_t c = std::size_t(it - g.coord.begin());
    c = std::min(std::max<std::size_t>(c, 1), n - 1) - 1;
    const std::size_t i0 = (c == 0) ? 0 : (c + 2 < n ? c - 1 : n - 4);
    complexd out = 0.0;
    for (std::size_t m = 0; m < 4; ++m) {
      double L = 1.0;
      for (std::size_t p = 0; p < 4; ++p)
        if (p != m) L *= (t - g.coord[i0 + p]) / (g.coord[i0 + m] - g.coord[i0 + p]);
      out += v_[i0 + m] * L;
    }
    return out;
  }

 private:
  std::shared_ptr<const RadialGrid> grid_;
  VectorXcd v_;
};

}  // namespace hartree

#endif
