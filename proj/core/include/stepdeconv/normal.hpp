#pragma once

namespace stepdeconv {

double normal_cdf(double z);

// Standard-normal quantile. Acklam's rational approximation refined by one
// Halley step against erfc; absolute error well below 1e-12 on (1e-300, 1).
double normal_quantile(double p);

}  // namespace stepdeconv
