#include "dpmstream/special.hpp"

#include <cmath>
#include <stdexcept>

namespace dpmstream {

double digamma(double x)
{
  if (!(x > 0.0))
    throw std::domain_error("digamma: argument must be positive");

  double acc = 0.0;
  // shift into the asymptotic regime: psi(x) = psi(x+1) - 1/x
  while (x < 10.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }

  // psi(x) ~ ln x - 1/(2x) - sum_n B_{2n} / (2n x^{2n})
  const double r = 1.0 / (x * x);
  double series = r * (1.0 / 12.0
             - r * (1.0 / 120.0
             - r * (1.0 / 252.0
             - r * (1.0 / 240.0
             - r * (1.0 / 132.0
             - r * (691.0 / 32760.0
             - r * (1.0 / 12.0)))))));
  return acc + std::log(x) - 0.5 / x - series;
}

double trigamma(double x)
{
  if (!(x > 0.0))
    throw std::domain_error("trigamma: argument must be positive");

  double acc = 0.0;
  // psi'(x) = psi'(x+1) + 1/x^2
  while (x < 10.0) {
    acc += 1.0 / (x * x);
    x += 1.0;
  }

  // psi'(x) ~ 1/x + 1/(2x^2) + sum_n B_{2n} / x^{2n+1}
  const double r = 1.0 / (x * x);
  double series = 1.0
      + r * (1.0 / 6.0
      - r * (1.0 / 30.0
      - r * (1.0 / 42.0
      - r * (1.0 / 30.0
      - r * (5.0 / 66.0
      - r * (691.0 / 2730.0
      - r * (7.0 / 6.0)))))));
  return acc + 0.5 * r + series / x;
}

}  // namespace dpmstream
