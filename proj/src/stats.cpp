#include "safespec/stats.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace safespec {

double log_beta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

namespace {

// continued fraction for the incomplete beta (Lentz's method)
double betacf(double a, double b, double x) {
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-16;
  constexpr int kMaxIter = 500;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw std::runtime_error("incomplete beta continued fraction did not converge");
}

}  // namespace

double betainc_reg(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("betainc_reg requires a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double front = std::exp(a * std::log(x) + b * std::log1p(-x) - log_beta(a, b));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double betainc_inv(double a, double b, double y) {
  if (y <= 0.0) return 0.0;
  if (y >= 1.0) return 1.0;
  double lo = 0.0, hi = 1.0;
  double x = 0.5;
  // bisection to bracket tightly, then Newton polish
  for (int i = 0; i < 80; ++i) {
    x = 0.5 * (lo + hi);
    if (betainc_reg(a, b, x) < y)
      lo = x;
    else
      hi = x;
  }
  x = 0.5 * (lo + hi);
  const double log_b = log_beta(a, b);
  for (int i = 0; i < 8; ++i) {
    const double f = betainc_reg(a, b, x) - y;
    const double pdf = std::exp((a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - log_b);
    if (pdf <= 0.0 || !std::isfinite(pdf)) break;
    double next = x - f / pdf;
    if (next <= lo || next >= hi) break;
    x = next;
  }
  return x;
}

double student_t_cdf(double t, double dof) {
  if (!(dof > 0.0)) throw std::invalid_argument("student_t_cdf requires dof > 0");
  if (t == 0.0) return 0.5;
  const double x = dof / (dof + t * t);
  const double half_tail = 0.5 * betainc_reg(0.5 * dof, 0.5, x);
  return t > 0.0 ? 1.0 - half_tail : half_tail;
}

double student_t_quantile(double q, double dof) {
  if (!(dof > 0.0)) throw std::invalid_argument("student_t_quantile requires dof > 0");
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("quantile level must be in (0,1)");
  if (q == 0.5) return 0.0;
  if (q < 0.5) return -student_t_quantile(1.0 - q, dof);
  // q > 1/2: P(T > t) = (1-q) = I_x(dof/2, 1/2) / 2 with x = dof/(dof+t^2)
  const double x = betainc_inv(0.5 * dof, 0.5, 2.0 * (1.0 - q));
  if (x <= 0.0) return std::numeric_limits<double>::infinity();
  return std::sqrt(dof * (1.0 - x) / x);
}

}  // namespace safespec
