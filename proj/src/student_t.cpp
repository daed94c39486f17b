#include "tdpkit/student_t.hpp"

#include "tdpkit/error.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace tdpkit {

namespace {

// Even df = 2k:
//   p = 1 - s * sum_{j<k} c_j x^j = s * sum_{j>=k} c_j x^j,  c_j = (2j-1)!!/(2j)!!
// Odd df = 2k+1:
//   p = 1 - (2/pi) [theta + s c sum_{j<k} d_j x^j]
//     = (2/pi) s c sum_{j>=k} d_j x^j,                       d_j = (2j)!!/(2j+1)!!
// with theta = atan(|t|/sqrt(df)), s = sin(theta), c = cos(theta), x = c^2.
double two_sided(double t, int df) {
  const double at = std::fabs(t);
  if (std::isinf(at)) {
    return 0.0;
  }
  const double nu = static_cast<double>(df);
  const double r = std::hypot(at, std::sqrt(nu));
  const double s = at / r;
  const double c = std::sqrt(nu) / r;
  const double x = c * c;
  const bool even = (df % 2) == 0;
  const int k = even ? df / 2 : (df - 1) / 2;

  if (x < 0.5) {
    // Tail series; the term ratio is below x < 1/2.
    double term = 1.0; // coefficient * x^j, starting at j = 0
    for (int j = 1; j <= k; ++j) {
      term *= even ? x * (2.0 * j - 1.0) / (2.0 * j) : x * (2.0 * j) / (2.0 * j + 1.0);
    }
    double sum = 0.0;
    for (int j = k; j < k + 2000; ++j) {
      sum += term;
      const double jj = static_cast<double>(j + 1);
      term *= even ? x * (2.0 * jj - 1.0) / (2.0 * jj) : x * (2.0 * jj) / (2.0 * jj + 1.0);
      if (term <= sum * 1e-17) {
        break;
      }
    }
    return even ? s * sum : (2.0 / std::numbers::pi) * s * c * sum;
  }

  double term = 1.0;
  double sum = 0.0;
  for (int j = 0; j < k; ++j) {
    sum += term;
    const double jj = static_cast<double>(j + 1);
    term *= even ? x * (2.0 * jj - 1.0) / (2.0 * jj) : x * (2.0 * jj) / (2.0 * jj + 1.0);
  }
  double p;
  if (even) {
    p = 1.0 - s * sum;
  } else {
    const double theta = std::atan2(at, std::sqrt(nu));
    p = 1.0 - (2.0 / std::numbers::pi) * (theta + s * c * sum);
  }
  return std::clamp(p, 0.0, 1.0);
}

} // namespace

double student_t_two_sided_sf(double t, int df) {
  if (df < 1) {
    fail(ErrorCode::InvalidArg, "degrees of freedom must be >= 1");
  }
  if (std::isnan(t)) {
    fail(ErrorCode::InvalidArg, "t statistic is NaN");
  }
  return two_sided(t, df);
}

double student_t_upper_sf(double t, int df) {
  const double half = 0.5 * student_t_two_sided_sf(t, df);
  return t >= 0.0 ? half : 1.0 - half;
}

double equivalent_z(double p_two_sided, double t) {
  if (!(p_two_sided > 0.0)) {
    p_two_sided = std::numeric_limits<double>::min();
  }
  if (p_two_sided >= 1.0) {
    return 0.0;
  }
  const boost::math::normal_distribution<double> unit;
  const double z = boost::math::quantile(boost::math::complement(unit, 0.5 * p_two_sided));
  return t < 0.0 ? -z : z;
}

} // namespace tdpkit
