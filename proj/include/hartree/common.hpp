#ifndef HARTREE_COMMON_HPP
#define HARTREE_COMMON_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace hartree {

using complexd = std::complex<double>;

/// Error category for precondition violations and numeric failures.
/// The code carries a stable machine-readable identifier (e.g.
/// "invalid-dimension") used by the CLI to produce module-qualified
/// diagnostics.
class error : public std::runtime_error {
 public:
  error(std::string code, const std::string& what)
      : std::runtime_error(code + ": " + what), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

constexpr double pi = 3.14159265358979323846;

/// Area of the unit sphere S^{n-1} in R^n.
inline double sphere_area(int n) {
  return 2.0 * std::pow(pi, 0.5 * n) / std::tgamma(0.5 * n);
}

inline bool finite(double x) { return std::isfinite(x); }
inline bool finite(complexd z) {
  return std::isfinite(z.real()) && std::isfinite(z.imag());
}

}  // namespace hartree

#endif
