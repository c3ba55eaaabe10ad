#ifndef HARTREE_LAPACK_HPP
#define HARTREE_LAPACK_HPP

#include <lapacke.h>

#include "hartree/field.hpp"

namespace hartree {
namespace detail {

/// Eigenvalues (and optionally right eigenvectors) of a general real
/// matrix. Returns (wr, wi, VR); for a complex pair (wi[j] > 0) columns
/// j, j+1 of VR hold Re v, Im v per LAPACK convention.
struct GeneralEig {
  VectorXd wr, wi;
  MatrixXd VR;
};

inline GeneralEig eig_general(MatrixXd A, bool vectors) {
  const lapack_int n = lapack_int(A.rows());
  GeneralEig out;
  out.wr.resize(n);
  out.wi.resize(n);
  if (vectors) out.VR.resize(n, n);
  const lapack_int info = LAPACKE_dgeev(
      LAPACK_COL_MAJOR, 'N', vectors ? 'V' : 'N', n, A.data(), n, out.wr.data(),
      out.wi.data(), nullptr, 1, vectors ? out.VR.data() : nullptr,
      vectors ? n : 1);
  if (info != 0) throw error("eig-failure", "dgeev info = " + std::to_string(info));
  return out;
}

/// Ascending eigenvalues and orthonormal eigenvectors of a symmetric
/// matrix (upper triangle referenced).
struct SymEig {
  VectorXd w;
  MatrixXd V;
};

inline SymEig eig_symmetric(MatrixXd A) {
  const lapack_int n = lapack_int(A.rows());
  SymEig out;
  out.w.resize(n);
  const lapack_int info =
      LAPACKE_dsyev(LAPACK_COL_MAJOR, 'V', 'U', n, A.data(), n, out.w.data());
  if (info != 0) throw error("eig-failure", "dsyev info = " + std::to_string(info));
  out.V = std::move(A);
  return out;
}

/// Symmetric-definite generalized problem A x = lambda B x (B SPD),
/// ascending eigenvalues.
inline SymEig eig_sym_generalized(MatrixXd A, MatrixXd B) {
  const lapack_int n = lapack_int(A.rows());
  SymEig out;
  out.w.resize(n);
  const lapack_int info = LAPACKE_dsygv(LAPACK_COL_MAJOR, 1, 'V', 'U', n, A.data(),
                                        n, B.data(), n, out.w.data());
  if (info != 0)
    throw error("projection-rank-deficient", "dsygv info = " + std::to_string(info));
  out.V = std::move(A);
  return out;
}

}  // namespace detail
}  // namespace hartree

#endif
