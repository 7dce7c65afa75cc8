#pragma once

namespace safespec {

double log_beta(double a, double b);

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation
// (modified Lentz), accurate to ~1e-15.
double betainc_reg(double a, double b, double x);

// Inverse of I_x(a, b) in x, bisection refined by Newton steps.
double betainc_inv(double a, double b, double y);

// CDF of Student's t with dof degrees of freedom.
double student_t_cdf(double t, double dof);

// Quantile t_{q,dof}: inverse CDF via the incomplete-beta relation.
double student_t_quantile(double q, double dof);

}  // namespace safespec
