#include "pbci/dist.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace pbci {

double normal_quantile(double p) {
  boost::math::normal_distribution<double> dist(0.0, 1.0);
  return boost::math::quantile(dist, p);
}

double student_t_quantile(double p, double df) {
  boost::math::students_t_distribution<double> dist(df);
  return boost::math::quantile(dist, p);
}

double student_t_cdf(double t, double df) {
  boost::math::students_t_distribution<double> dist(df);
  return boost::math::cdf(dist, t);
}

}  // namespace pbci
