#ifndef HARTREE_LINEARIZED_HPP
#define HARTREE_LINEARIZED_HPP

#include "hartree/ground_state.hpp"
#include "hartree/lapack.hpp"

namespace hartree {

/// Discrete linearization of the flow at the ground state:
///   L- h = -Delta h - (K4 W^2) h
///   L+ h = L- h - 2 (K4 (W h)) W
/// acting on real radial sample vectors, plus the block generator
/// L = [[0, -L-], [L+, 0]] of the linearized equation dt h + L h = R(h).
///
/// Discretization: the conservative flux-form Laplacian and a
/// cell-measure-symmetrized copy of the convolution matrix, so both L+-
/// are exactly self-adjoint in the cell-measure inner product <f, g>_m.
/// The dual-measure rescaling perturbs the kernel at the discretization
/// order in the interior and O(1) only in the first/last rows, whose
/// cell measure is negligible.
struct LinearizedSystem {
  std::shared_ptr<const RadialGrid> grid;
  RadialField W, Wtilde;
  MatrixXd Lp, Lm;  // operator form (act on sample vectors)
  MatrixXd F;       // symmetric stiffness: <f, F g> = int grad f . grad g
  VectorXd m;       // cell measures

  double inner_m(const VectorXd& f, const VectorXd& g) const {
    return (f.array() * m.array() * g.array()).sum();
  }
  double norm_m(const VectorXcd& f) const {
    return std::sqrt((f.cwiseAbs2().array() * m.array()).sum());
  }

  /// Block action L h = (-L- h2) + i (L+ h1).
  VectorXcd apply_block(const VectorXcd& h) const {
    VectorXcd out(h.size());
    out.real() = -(Lm * h.imag().eval());
    out.imag() = Lp * h.real().eval();
    return out;
  }

  /// B(g, h) = 1/2 <L+ g1, h1>_m + 1/2 <L- g2, h2>_m.
  double bilinear_B(const RadialField& g, const RadialField& h) const {
    RadialField::require_same_grid(g, h);
    if (g.grid_ptr() != grid) throw error("grid-mismatch", "field on another grid");
    return 0.5 * inner_m(Lp * g.real(), h.real()) +
           0.5 * inner_m(Lm * g.imag(), h.imag());
  }
  double phi(const RadialField& h) const { return bilinear_B(h, h); }

  /// Hdot1 inner product in the stiffness discretization (compatible with
  /// the flux Laplacian): Re <f, g>_{Hdot1} = f1' F g1 + f2' F g2.
  double h1_flux(const RadialField& f, const RadialField& g) const {
    return f.real().dot(F * g.real()) + f.imag().dot(F * g.imag());
  }

  /// max of the two self-adjointness defects, relative, in the m-metric.
  double weighted_asymmetry() const {
    double num = 0.0, den = 0.0;
    for (Eigen::Index i = 0; i < Lp.rows(); ++i)
      for (Eigen::Index j = 0; j < Lp.cols(); ++j) {
        num = std::max(num, std::abs(m[i] * Lp(i, j) - m[j] * Lp(j, i)));
        num = std::max(num, std::abs(m[i] * Lm(i, j) - m[j] * Lm(j, i)));
        den = std::max(den, std::abs(m[i] * Lp(i, j)));
      }
    return num / den;
  }

  /// Similarity transform making the operator symmetric:
  /// S = diag(sqrt m) L diag(1/sqrt m).
  MatrixXd symmetrized(const MatrixXd& L) const {
    const VectorXd s = m.cwiseSqrt();
    return s.asDiagonal() * L * s.cwiseInverse().asDiagonal();
  }
};

inline LinearizedSystem assemble_linearized(const GroundState& gs,
                                            const NonlocalKernelMatrix& K4) {
  if (!gs.W.grid_ptr() || gs.W.grid_ptr() != K4.grid)
    throw error("calibration-missing", "ground state and kernel grids must match");
  LinearizedSystem sys;
  sys.grid = gs.W.grid_ptr();
  sys.W = gs.W;
  sys.Wtilde = gs.Wtilde;
  const std::size_t n = sys.grid->size();
  sys.m = Eigen::Map<const VectorXd>(sys.grid->cell_weights.data(), n);

  FluxLaplacian flux(sys.grid);
  sys.F = MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    sys.F(i, i) = flux.diag()[i];
    if (i > 0) {
      sys.F(i, i - 1) = flux.lower()[i];
      sys.F(i - 1, i) = flux.lower()[i];
    }
  }

  // cell-measure-symmetrized kernel copy
  MatrixXd Km = K4.K;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = 0.5 * (sys.m[i] * Km(i, j) + sys.m[j] * Km(j, i));
      Km(i, j) = s / sys.m[i];
      Km(j, i) = s / sys.m[j];
    }

  const VectorXd Wv = gs.W.real();
  const VectorXd pot = K4.apply(VectorXd(Wv.array().square()));
  sys.Lm = sys.m.cwiseInverse().asDiagonal() * sys.F;
  sys.Lm -= MatrixXd(pot.asDiagonal());
  sys.Lp = sys.Lm - 2.0 * (Wv.asDiagonal() * Km * Wv.asDiagonal());
  return sys;
}

/// First-order potential and quadratic remainder of the flow at W:
///   V h = -(K4 W^2) h - 2 (K4 (W Re h)) W
///   R(h) = i (K4 |h|^2)(W + h) + 2 i (K4 (W Re h)) h.
inline RadialField potential_V(const RadialField& h, const RadialField& W,
                               const NonlocalKernelMatrix& K4) {
  RadialField::require_same_grid(h, W);
  const VectorXd pot = K4.apply(VectorXd(W.real().array().square()));
  const VectorXd cross = K4.apply(VectorXd(W.real().array() * h.real().array()));
  VectorXcd out = -(pot.array() * h.values().array());
  out.real() -= 2.0 * (cross.array() * W.real().array()).matrix();
  return RadialField(h.grid_ptr(), std::move(out));
}

inline RadialField remainder_R(const RadialField& h, const RadialField& W,
                               const NonlocalKernelMatrix& K4) {
  RadialField::require_same_grid(h, W);
  const VectorXd h2 = K4.apply(VectorXd(h.values().cwiseAbs2()));
  const VectorXd cross = K4.apply(VectorXd(W.real().array() * h.real().array()));
  const complexd im(0.0, 1.0);
  VectorXcd out(h.size());
  for (std::size_t i = 0; i < h.size(); ++i)
    out[i] = im * h2[i] * (W[i] + h[i]) + 2.0 * im * cross[i] * h[i];
  return RadialField(h.grid_ptr(), std::move(out));
}

/// The unique positive real eigenvalue of the block generator and its
/// eigenfunction Y+ = Y1 + i Y2, cross-checked by three routes:
/// (i) real spectrum of the 2N x 2N block matrix, (ii) the quadratic
/// pencil L- L+ Y1 = -e0^2 Y1, (iii) the symmetric operator
/// sqrt(L-) L+ sqrt(L-) whose lowest eigenvalue is -e0^2.
struct EigenPair {
  double e0 = 0.0;          // adopted value (block matrix)
  double e0_pencil = 0.0;   // oracle (ii)
  double e0_sqrt = 0.0;     // oracle (iii)
  RadialField Y1, Y2;       // Y+ = Y1 + i Y2
  double B_sign = 1.0;      // sign absorbed into Y- so that B(Y+, Y-) = +1
  double B_prenorm = 0.0;   // raw value before normalization
  double eigen_residual = 0.0;  // ||L Y+ - e0 Y+||_m / ||Y+||_m
  int real_positive_count = 0;  // genuine positive real eigenvalues found
  std::vector<double> real_eigs;  // all real block eigenvalues (magnitude > floor)

  RadialField Yplus() const {
    return RadialField::from_parts(Y1.grid_ptr(), Y1.real(), Y2.real());
  }
  /// The -e0 eigenfunction. Its overall sign is a free choice (it is an
  /// independent eigenvector), fixed here so that B(Y+, Y-) = +1.
  RadialField Yminus() const {
    return RadialField::from_parts(Y1.grid_ptr(), B_sign * Y1.real(),
                                   -B_sign * Y2.real());
  }
};

inline EigenPair compute_eigenpair(const LinearizedSystem& sys) {
  const std::size_t n = sys.grid->size();
  EigenPair out;

  // (i) block matrix, eigenvalues + vectors
  MatrixXd Lb = MatrixXd::Zero(2 * n, 2 * n);
  Lb.topRightCorner(n, n) = -sys.Lm;
  Lb.bottomLeftCorner(n, n) = sys.Lp;
  const auto be = detail::eig_general(std::move(Lb), true);

  // Genuine real eigenvalues: dgeev marks them with wi == 0 exactly.
  // Discrete null modes appear as real values at the null-residual scale;
  // the floor separates them from +-e0 = O(1).
  double wmax = 0.0;
  for (Eigen::Index j = 0; j < be.wr.size(); ++j)
    wmax = std::max(wmax, std::abs(be.wr[j]));
  const double floor = 1e-3 * wmax;
  Eigen::Index jbest = -1;
  for (Eigen::Index j = 0; j < be.wr.size(); ++j) {
    if (be.wi[j] != 0.0 || std::abs(be.wr[j]) <= floor) continue;
    out.real_eigs.push_back(be.wr[j]);
    if (be.wr[j] > 0.0) {
      ++out.real_positive_count;
      if (jbest < 0 || be.wr[j] > be.wr[jbest]) jbest = j;
    }
  }
  if (jbest < 0) throw error("no-real-eigenvalue", "block matrix has no positive real eigenvalue");
  out.e0 = be.wr[jbest];
  for (double lam : out.real_eigs)
    if (lam > 0.0 && std::abs(lam - out.e0) > 1e-3 * out.e0)
      throw error("spurious-multiplicity", "more than one positive real eigenvalue");

  VectorXd Y1 = be.VR.col(jbest).head(n);
  VectorXd Y2 = be.VR.col(jbest).tail(n);

  // (ii) quadratic pencil: most negative real eigenvalue of L- L+
  {
    const auto pe = detail::eig_general(MatrixXd(sys.Lm * sys.Lp), false);
    double best = 0.0;
    for (Eigen::Index j = 0; j < pe.wr.size(); ++j)
      if (pe.wi[j] == 0.0 && pe.wr[j] < best) best = pe.wr[j];
    if (best >= 0.0) throw error("no-real-eigenvalue", "pencil has no negative eigenvalue");
    out.e0_pencil = std::sqrt(-best);
  }

  // (iii) sqrt(L-) L+ sqrt(L-), negative round-off eigenvalues clamped
  {
    const auto se = detail::eig_symmetric(sys.symmetrized(sys.Lm));
    VectorXd lam = se.w.cwiseMax(0.0).cwiseSqrt();
    const MatrixXd R = se.V * lam.asDiagonal() * se.V.transpose();
    MatrixXd P = R * sys.symmetrized(sys.Lp) * R;
    P = 0.5 * (P + P.transpose());
    const auto pe = detail::eig_symmetric(std::move(P));
    if (pe.w[0] >= 0.0) throw error("no-real-eigenvalue", "symmetric oracle found no negative mode");
    out.e0_sqrt = std::sqrt(-pe.w[0]);
  }

  // sign convention <W, Y1>_{Hdot1} > 0, then normalization B(Y+, Y-) = 1
  if (Y1.dot(sys.F * sys.W.real()) < 0.0) {
    Y1 = -Y1;
    Y2 = -Y2;
  }
  const double b = 0.5 * sys.inner_m(sys.Lp * Y1, Y1) -
                   0.5 * sys.inner_m(sys.Lm * Y2, Y2);
  out.B_prenorm = b;
  out.B_sign = b >= 0.0 ? 1.0 : -1.0;
  const double scale = 1.0 / std::sqrt(std::abs(b));
  Y1 *= scale;
  Y2 *= scale;
  out.Y1 = RadialField::from_real(sys.grid, Y1);
  out.Y2 = RadialField::from_real(sys.grid, Y2);

  VectorXcd Yp(n);
  Yp.real() = Y1;
  Yp.imag() = Y2;
  const VectorXcd res = sys.apply_block(Yp) - out.e0 * Yp;
  out.eigen_residual = sys.norm_m(res) / sys.norm_m(Yp);
  return out;
}

/// Exponential-tail diagnostic: least squares of log(r^{(d-1)/2} |y|)
/// against r over the window where |y| lies in [lo, hi] x max|y|; the
/// radial prefactor r^{-(d-1)/2} of exponentially decaying radial modes is
/// divided out so the regression is genuinely linear. Returns (rate, R^2).
inline std::pair<double, double> exponential_tail_fit(const RadialField& y,
                                                      double lo = 1e-10,
                                                      double hi = 1e-2) {
  const RadialGrid& g = y.grid();
  double ymax = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) ymax = std::max(ymax, std::abs(y[i]));
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double a = std::abs(y[i]);
    if (a < lo * ymax || a > hi * ymax || g.nodes[i] < 1.0) continue;
    xs.push_back(g.nodes[i]);
    ys.push_back(std::log(a) + 0.5 * (g.d - 1) * std::log(g.nodes[i]));
  }
  const std::size_t m = xs.size();
  if (m < 8) throw error("degenerate-range", "tail window too small for a fit");
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < m; ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
    syy += ys[i] * ys[i];
  }
  const double cov = m * sxy - sx * sy;
  const double vx = m * sxx - sx * sx, vy = m * syy - sy * sy;
  return {cov / vx, cov * cov / (vx * vy)};
}

/// Constraint sets for the coercivity minimization.
enum class Subspace { unconstrained, Hperp, Gperp };

/// Minimal Rayleigh quotient Phi(h) / ||h||^2_{Hdot1} over the constrained
/// subspace, via the projected symmetric generalized eigenproblem.
inline double coercivity_constant(const LinearizedSystem& sys, Subspace sub,
                                  const EigenPair* pair = nullptr) {
  const std::size_t n = sys.grid->size();
  const std::size_t N2 = 2 * n;

  // quadratic forms on (h1; h2)
  MatrixXd P = MatrixXd::Zero(N2, N2);
  P.topLeftCorner(n, n) = 0.5 * (sys.m.asDiagonal() * sys.Lp);
  P.bottomRightCorner(n, n) = 0.5 * (sys.m.asDiagonal() * sys.Lm);
  P = 0.5 * (P + P.transpose()).eval();
  MatrixXd G = MatrixXd::Zero(N2, N2);
  G.topLeftCorner(n, n) = sys.F;
  G.bottomRightCorner(n, n) = sys.F;

  std::vector<VectorXd> constraints;
  const VectorXd FW = sys.F * sys.W.real();
  const VectorXd FWt = sys.F * sys.Wtilde.real();
  auto topc = [&](const VectorXd& v) {
    VectorXd c = VectorXd::Zero(N2);
    c.head(n) = v;
    return c;
  };
  auto botc = [&](const VectorXd& v) {
    VectorXd c = VectorXd::Zero(N2);
    c.tail(n) = v;
    return c;
  };
  if (sub == Subspace::Hperp) {
    constraints = {topc(FW), botc(FW), topc(FWt)};
  } else if (sub == Subspace::Gperp) {
    if (!pair) throw error("unnormalized-pair", "G-perp needs the eigenpair");
    constraints = {botc(FW), topc(FWt),
                   topc(VectorXd(sys.m.asDiagonal() * (sys.Lp * pair->Y1.real()))),
                   botc(VectorXd(sys.m.asDiagonal() * (sys.Lm * pair->Y2.real())))};
  }

  if (constraints.empty()) {
    const auto ev = detail::eig_sym_generalized(P, G);
    return ev.w[0];
  }
  MatrixXd C(N2, constraints.size());
  for (std::size_t k = 0; k < constraints.size(); ++k) C.col(k) = constraints[k];
  // orthonormal basis of the constraint null space from the full Q factor
  Eigen::HouseholderQR<MatrixXd> qr(C);
  MatrixXd Q = qr.householderQ();
  const MatrixXd B = Q.rightCols(N2 - constraints.size());
  const auto ev = detail::eig_sym_generalized(MatrixXd(B.transpose() * P * B),
                                              MatrixXd(B.transpose() * G * B));
  return ev.w[0];
}

/// Decomposition v = a+ Y+ + a- Y- + beta iW + gamma Wtilde + vperp with
/// vperp in G-perp, i.e. annihilated by all four constraint functionals
///   c1 = B(., Y+),  c2 = B(., Y-),  c3 = <., iW>_{Hdot1},  c4 = <., Wtilde>_{Hdot1}.
struct Decomposition {
  double alpha_plus = 0.0, alpha_minus = 0.0, beta = 0.0, gamma = 0.0;
  RadialField vperp;
};

/// Oblique projection: the constraint functionals are not biorthogonal to
/// the basis {Y+, Y-, iW, Wtilde} at the discrete level (the continuum
/// cross-pairings vanish only up to discretization error), so the
/// coefficients solve the full 4 x 4 Gram system c_i(basis_j) x_j = c_i(v).
/// The residuals c_i(vperp) are then zero to solver roundoff, not merely
/// to discretization order.
inline Decomposition decompose_perturbation(const RadialField& v,
                                            const EigenPair& pair,
                                            const LinearizedSystem& sys) {
  const RadialField Yp = pair.Yplus(), Ym = pair.Yminus();
  if (std::abs(sys.bilinear_B(Yp, Ym) - 1.0) > 1e-8)
    throw error("unnormalized-pair", "eigenpair not normalized to B(Y+, Y-) = 1");
  const RadialField iW(sys.W.grid_ptr(), complexd(0, 1) * sys.W.values());
  const std::array<const RadialField*, 4> basis{&Yp, &Ym, &iW, &sys.Wtilde};
  auto functional = [&](int i, const RadialField& f) {
    switch (i) {
      case 0: return sys.bilinear_B(f, Yp);
      case 1: return sys.bilinear_B(f, Ym);
      case 2: return sys.h1_flux(f, iW);
      default: return sys.h1_flux(f, sys.Wtilde);
    }
  };
  Eigen::Matrix4d M;
  Eigen::Vector4d c;
  for (int i = 0; i < 4; ++i) {
    c[i] = functional(i, v);
    for (int j = 0; j < 4; ++j) M(i, j) = functional(i, *basis[j]);
  }
  const Eigen::Vector4d x = M.fullPivLu().solve(c);
  if (!x.allFinite())
    throw error("projection-rank-deficient", "singular modulation Gram matrix");

  Decomposition out;
  out.alpha_plus = x[0];
  out.alpha_minus = x[1];
  out.beta = x[2];
  out.gamma = x[3];
  out.vperp = v - x[0] * Yp - x[1] * Ym - x[2] * iW - x[3] * sys.Wtilde;
  return out;
}

}  // namespace hartree

#endif
