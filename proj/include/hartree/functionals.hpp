#ifndef HARTREE_FUNCTIONALS_HPP
#define HARTREE_FUNCTIONALS_HPP

#include <sstream>

#include "hartree/kernel.hpp"
#include "hartree/operators.hpp"

namespace hartree {

/// Quartic interaction integral int int |u(x)|^2 |u(y)|^2 / |x-y|^4,
/// evaluated as <K4 |u|^2, |u|^2> in the grid quadrature.
inline double quartic_term(const NonlocalKernelMatrix& K4, const RadialField& u) {
  if (K4.grid != u.grid_ptr())
    throw error("grid-mismatch", "kernel and field live on different grids");
  if (K4.gamma != 4.0)
    throw error("unsupported-exponent", "the quartic term needs the gamma = 4 kernel");
  VectorXd usq = u.values().cwiseAbs2();
  const VectorXd Ku = K4.apply(usq);
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i)
    s += u.grid().weights[i] * Ku[i] * usq[i];
  return s;
}

/// Conserved energy E(u) = 1/2 |grad u|^2 - 1/4 int int |u|^2|u|^2/|x-y|^4.
inline double energy(const RadialOperators& ops, const NonlocalKernelMatrix& K4,
                     const RadialField& u) {
  return 0.5 * ops.h1_norm_sq(u) - 0.25 * quartic_term(K4, u);
}

/// Gradient variant delta(u) = | |grad u|^2 - |grad W|^2 |, the
/// distance-to-ground-state proxy.
inline double delta_value(const RadialOperators& ops, const RadialField& u,
                          double grad_W_sq) {
  return std::abs(ops.h1_norm_sq(u) - grad_W_sq);
}

/// Sharp-interpolation functional
///   I(u) = |grad u|^4 / |grad W|^4 - Q(u) / Q(W),
/// where Q is the quartic interaction. Nonnegative (up to quadrature
/// error), zero exactly at the extremal family.
inline double hls_functional(const RadialOperators& ops,
                             const NonlocalKernelMatrix& K4, const RadialField& u,
                             double grad_W_sq, double quartic_W) {
  const double g = ops.h1_norm_sq(u);
  if (g == 0.0) throw error("zero-input", "functional undefined at u = 0");
  return (g / grad_W_sq) * (g / grad_W_sq) - quartic_term(K4, u) / quartic_W;
}

/// Named scalar values plus the producing configuration hash; one CSV row
/// per value: name,value,config_hash.
struct ScalarReport {
  std::string config_hash;
  std::vector<std::pair<std::string, double>> values;

  void add(const std::string& name, double v) {
    if (!finite(v)) throw error("invalid-field", "non-finite report value: " + name);
    values.emplace_back(name, v);
  }
  double get(const std::string& name) const {
    for (const auto& [k, v] : values)
      if (k == name) return v;
    throw error("missing-value", "no report entry named " + name);
  }
  std::string to_csv() const {
    if (config_hash.empty()) throw error("invalid-field", "empty configuration hash");
    std::ostringstream os;
    os << "name,value,config_hash\n";
    os.precision(17);
    for (const auto& [k, v] : values) os << k << "," << v << "," << config_hash << "\n";
    return os.str();
  }
};

}  // namespace hartree

#endif
