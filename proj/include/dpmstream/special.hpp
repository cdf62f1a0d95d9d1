#pragma once

namespace dpmstream {

/// psi(x) = d/dx log Gamma(x), for x > 0.
/// Upward recurrence into the asymptotic regime, then a Bernoulli-number
/// tail; relative error below 1e-12 over the positive axis.
double digamma(double x);

/// psi'(x) = d^2/dx^2 log Gamma(x), for x > 0.
double trigamma(double x);

}  // namespace dpmstream
