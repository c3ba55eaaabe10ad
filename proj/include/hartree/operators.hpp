#ifndef HARTREE_OPERATORS_HPP
#define HARTREE_OPERATORS_HPP

#include "hartree/field.hpp"

namespace hartree {

namespace detail {

/// Fornberg finite-difference weights: derivatives 0..M at x0 from
/// arbitrary nodes. Returns (nodes x (M+1)) weight matrix.
inline MatrixXd fornberg_weights(double x0, const std::vector<double>& x, int M) {
  const int n = int(x.size());
  MatrixXd c = MatrixXd::Zero(n, M + 1);
  double c1 = 1.0, c4 = x[0] - x0;
  c(0, 0) = 1.0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, M);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - x0;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          c(i, k) = c1 * (k * c(i - 1, k - 1) - c5 * c(i - 1, k)) / c2;
        c(i, 0) = -c1 * c5 * c(i - 1, 0) / c2;
      }
      for (int k = mn; k >= 1; --k)
        c(j, k) = (c4 * c(j, k) - k * c(j, k - 1)) / c3;
      c(j, 0) = c4 * c(j, 0) / c3;
    }
    c1 = c2;
  }
  return c;
}

}  // namespace detail

/// High-order radial differential operators on a RadialGrid.
///
/// Five-point Fornberg stencils in r; the inner boundary uses the even
/// extension u(-r) = u(r) (regularity u'(0) = 0), the outer boundary
/// continues the field by the harmonic tail law u(r) ~ u(r_max)
/// (r_max/r)^{d-2} on ghost nodes. Zero ghosts there would make the
/// last-row derivative error ~ u(r_max)/dr, which the r^{d-1} measure
/// amplifies into an outer-boundary error floor that grows with N; the
/// tail law is exact for every power-tail profile of this problem and
/// harmless for faster-decaying fields.
///
/// These are the accurate (non-symmetric) discretizations, used for
/// residual diagnostics and the Hdot1 inner product. The self-adjoint
/// flux-form Laplacian used by the linearized operators and the
/// propagator lives in FluxLaplacian below.
class RadialOperators {
 public:
  explicit RadialOperators(std::shared_ptr<const RadialGrid> grid)
      : grid_(std::move(grid)) {
    build();
  }

  const RadialGrid& grid() const { return *grid_; }
  const MatrixXd& d1() const { return D1_; }
  const MatrixXd& laplacian() const { return Lap_; }

  RadialField apply_laplacian(const RadialField& f) const {
    if (!f.all_finite()) throw error("invalid-field", "non-finite samples");
    VectorXcd v(f.size());
    v.real() = Lap_ * f.values().real().eval();
    v.imag() = Lap_ * f.values().imag().eval();
    return RadialField(f.grid_ptr(), std::move(v));
  }

  RadialField derivative(const RadialField& f) const {
    VectorXcd v(f.size());
    v.real() = D1_ * f.values().real().eval();
    v.imag() = D1_ * f.values().imag().eval();
    return RadialField(f.grid_ptr(), std::move(v));
  }

  /// Real Hilbert-space inner product on Hdot1: Re int grad f . conj(grad g).
  double h1_inner(const RadialField& f, const RadialField& g) const {
    RadialField::require_same_grid(f, g);
    if (f.grid_ptr() != grid_) throw error("grid-mismatch", "operator grid differs");
    const VectorXcd df = derivative(f).values();
    const VectorXcd dg = derivative(g).values();
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
      s += grid_->weights[i] * std::real(df[i] * std::conj(dg[i]));
    return s;
  }

  double h1_norm_sq(const RadialField& f) const { return h1_inner(f, f); }

 private:
  void build() {
    const auto& r = grid_->nodes;
    const std::size_t n = grid_->size();
    const int d = grid_->d;
    D1_ = MatrixXd::Zero(n, n);
    Lap_ = MatrixXd::Zero(n, n);
    constexpr int W = 5;  // stencil width

    for (std::size_t i = 0; i < n; ++i) {
      // Select the 5 nodes nearest to r_i from the extended set
      // {-r_2, -r_1, r_1 ... r_N, ghosts beyond r_N (Dirichlet)}.
      std::vector<double> xs;
      std::vector<long> cols;     // column carrying the ghost/mirror value
      std::vector<double> scale;  // multiplier of that column's sample
      long lo = long(i) - W / 2, hi = long(i) + W / 2;
      // shift window inside the mirrored-extended index range
      for (long j = lo; j <= hi; ++j) {
        if (j >= 0 && j < long(n)) {
          xs.push_back(r[j]);
          cols.push_back(j);
          scale.push_back(1.0);
        } else if (j < 0) {
          xs.push_back(-r[-j - 1]);  // mirror node, carries value u(r_{-j-1})
          cols.push_back(-j - 1);
          scale.push_back(1.0);
        } else {
          // continued mesh beyond r_max, tail-law ghost value
          double rg = r[n - 1];
          const double step = grid_->grading == Grading::geometric
                                  ? r[n - 1] / r[n - 2]
                                  : 0.0;
          for (long k = long(n) - 1; k < j; ++k)
            rg = grid_->grading == Grading::geometric ? rg * step
                                                      : rg + (r[n - 1] - r[n - 2]);
          xs.push_back(rg);
          cols.push_back(long(n) - 1);
          scale.push_back(std::pow(r[n - 1] / rg, double(d - 2)));
        }
      }
      const MatrixXd wts = detail::fornberg_weights(r[i], xs, 2);
      for (std::size_t m = 0; m < xs.size(); ++m) {
        D1_(i, cols[m]) += scale[m] * wts(m, 1);
        Lap_(i, cols[m]) += scale[m] * (wts(m, 2) + (d - 1) / r[i] * wts(m, 1));
      }
    }

    // Roundoff guard for deeply graded grids. Where the local spacing is
    // many orders below the profile scale, the stencil reconstructs
    // r^2 * Delta u by cancellation and rounding of the samples swamps the
    // value (error ~ eps / dr^2). Radial H^1 profiles are even and smooth
    // through r = 0, so such rows are refitted with an even polynomial in
    // r anchored at nodes near the roundoff-optimal radius eps^{1/6}:
    // rounding ~ eps / delta^2 and truncation ~ u^(10) delta^8 are then
    // both negligible.
    double t0 = 2e-3;
    if (r[n - 1] < 32.0 * t0) t0 = r[n - 1] / 32.0;
    std::vector<std::size_t> anchor;
    for (int m = 0; m < 4; ++m) {
      const double target = t0 * double(1 << m);
      std::size_t best = 0;
      for (std::size_t j = 1; j < n; ++j)
        if (std::abs(r[j] - target) < std::abs(r[best] - target)) best = j;
      if (!anchor.empty() && best <= anchor.back()) best = anchor.back() + 1;
      if (best >= n) return;  // grid too short for distinct anchors
      anchor.push_back(best);
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double dr_loc = r[i + 1] - r[i];
      if (!(dr_loc < 3e-5 && r[i] < 0.6 * r[anchor[0]])) continue;
      // Interpolate {u_i, u_anchors} by p(y), y = (r / r_top)^2, and take
      // the exact Laplacian of the interpolant at r_i:
      // Delta r^{2k} = 2k (2k + d - 2) r^{2k-2}.
      const double r_top = r[anchor[3]];
      Eigen::Matrix<double, 5, 5> Vt;
      Eigen::Matrix<double, 5, 1> gv;
      std::array<std::size_t, 5> col{i, anchor[0], anchor[1], anchor[2], anchor[3]};
      for (int k = 0; k < 5; ++k) {
        for (int j = 0; j < 5; ++j) {
          const double y = (r[col[j]] / r_top) * (r[col[j]] / r_top);
          Vt(k, j) = std::pow(y, k);
        }
        gv[k] = k == 0 ? 0.0
                       : 2.0 * k * (2.0 * k + d - 2.0) *
                             std::pow(r[i], 2 * k - 2) / std::pow(r_top, 2 * k);
      }
      const Eigen::Matrix<double, 5, 1> wrow = Vt.fullPivLu().solve(gv);
      Lap_.row(i).setZero();
      for (int j = 0; j < 5; ++j) Lap_(i, col[j]) += wrow[j];
    }
  }

  std::shared_ptr<const RadialGrid> grid_;
  MatrixXd D1_, Lap_;
};

/// Conservative discretization of -Delta: A = diag(1/m) F with the
/// symmetric stiffness F assembled from dual-cell face fluxes
/// (r^{d-1} u' at faces; zero flux through r = 0). The outer face carries
/// the flux of the harmonic continuation u ~ r^{-(d-2)}, i.e. a Robin term
/// -(d-2) r^{d-2} u: exact for power-law tails, and it adds exactly the
/// exterior Dirichlet energy of that continuation to u^T F u. Exactly
/// self-adjoint and positive definite in the cell-measure inner product;
/// the propagator's Cayley step is exactly unitary in it.
class FluxLaplacian {
 public:
  explicit FluxLaplacian(std::shared_ptr<const RadialGrid> grid)
      : grid_(std::move(grid)) {
    const auto& r = grid_->nodes;
    const auto& rf = grid_->faces;
    const std::size_t n = grid_->size();
    const double Sd = sphere_area(grid_->d);
    lower_.assign(n, 0.0);
    diag_.assign(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double c = Sd * std::pow(rf[i + 1], grid_->d - 1) / (r[i + 1] - r[i]);
      diag_[i] += c;
      diag_[i + 1] += c;
      lower_[i + 1] -= c;  // F(i+1, i) = F(i, i+1)
    }
    diag_[n - 1] += Sd * (grid_->d - 2) * std::pow(r[n - 1], grid_->d - 2);
  }

  const RadialGrid& grid() const { return *grid_; }

  /// Stiffness action (F u): <f, F g> = int grad f . grad g for the
  /// piecewise-linear interpretation; tridiagonal.
  template <class Vec>
  Vec stiffness_apply(const Vec& u) const {
    const std::size_t n = diag_.size();
    Vec out(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto s = diag_[i] * u[i];
      if (i > 0) s += lower_[i] * u[i - 1];
      if (i + 1 < n) s += lower_[i + 1] * u[i + 1];
      out[i] = s;
    }
    return out;
  }

  /// (-Delta u) in the cell-measure normalization.
  template <class Vec>
  Vec apply(const Vec& u) const {
    Vec out = stiffness_apply(u);
    for (std::size_t i = 0; i < diag_.size(); ++i) out[i] /= grid_->cell_weights[i];
    return out;
  }

  MatrixXd dense() const {
    const std::size_t n = diag_.size();
    MatrixXd A = MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      A(i, i) = diag_[i] / grid_->cell_weights[i];
      if (i > 0) A(i, i - 1) = lower_[i] / grid_->cell_weights[i];
      if (i + 1 < n) A(i, i + 1) = lower_[i + 1] / grid_->cell_weights[i];
    }
    return A;
  }

  /// Dirichlet energy u^T F u (= |u|_{Hdot1}^2 in this discretization).
  double dirichlet_energy(const VectorXd& u) const {
    VectorXd Fu = stiffness_apply(u);
    return u.dot(Fu);
  }

  const std::vector<double>& diag() const { return diag_; }
  const std::vector<double>& lower() const { return lower_; }

 private:
  std::shared_ptr<const RadialGrid> grid_;
  std::vector<double> lower_, diag_;
};

}  // namespace hartree

#endif
