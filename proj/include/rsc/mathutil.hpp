#pragma once

namespace rsc {

// Regularized incomplete beta function I_x(a, b), continued-fraction
// evaluation (Lentz), accurate to ~1e-14 for moderate a, b.
double incomplete_beta(double a, double b, double x);

// Student-t distribution with dof degrees of freedom.
double student_t_cdf(double t, double dof);

// Two-sided p-value for a t statistic.
double student_t_two_sided_p(double t, double dof);

}  // namespace rsc
