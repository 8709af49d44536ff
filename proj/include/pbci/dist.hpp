#pragma once

namespace pbci {

// Standard normal quantile, P(X < z) = p.
double normal_quantile(double p);

// Student-t distribution with real-valued degrees of freedom.
double student_t_quantile(double p, double df);
double student_t_cdf(double t, double df);

}  // namespace pbci
