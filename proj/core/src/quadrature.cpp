#include "stepdeconv/quadrature.hpp"

namespace stepdeconv {

std::vector<double> make_breakpoints(double lo, double hi, std::span<const double> interior) {
  std::vector<double> out{lo};
  for (double p : interior) {
    if (std::isfinite(p) && p > lo && p < hi) out.push_back(p);
  }
  out.push_back(hi);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace stepdeconv
