#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "fdiff/common.hpp"

namespace fdiff {

/// Adaptive Dormand-Prince 5(4) over an Eigen vector type.  `times` must
/// be increasing and start at the initial time; the integrator lands on
/// every sample time exactly and invokes `on_sample`.
template <class Vec>
void integrate_adaptive(
    const std::function<void(double, const Vec&, Vec&)>& rhs, Vec y,
    const std::vector<double>& times, double tol,
    const std::function<void(std::size_t, double, const Vec&)>& on_sample) {
  static const double a[7][6] = {
      {},
      {1.0 / 5},
      {3.0 / 40, 9.0 / 40},
      {44.0 / 45, -56.0 / 15, 32.0 / 9},
      {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
      {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176,
       -5103.0 / 18656},
      {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784,
       11.0 / 84}};
  static const double c[7] = {0.0,     1.0 / 5, 3.0 / 10, 4.0 / 5,
                              8.0 / 9, 1.0,     1.0};
  static const double e[7] = {
      71.0 / 57600,  0.0,          -71.0 / 16695, 71.0 / 1920,
      -17253.0 / 339200, 22.0 / 525, -1.0 / 40};

  if (times.empty()) return;
  double t = times.front();
  on_sample(0, t, y);

  std::vector<Vec> k(7);
  Vec ytmp = y, yerr = y, ynew = y;
  rhs(t, y, k[0]);  // FSAL seed

  double h = 0.0;
  for (std::size_t target = 1; target < times.size(); ++target) {
    double tend = times[target];
    if (h <= 0.0) h = (tend - t) / 16.0;
    while (t < tend) {
      bool clipped = false;
      if (t + h >= tend) {
        h = tend - t;
        clipped = true;
      }
      for (int i = 1; i < 7; ++i) {
        ytmp = y;
        for (int j = 0; j < i; ++j)
          if (a[i][j] != 0.0) ytmp += (h * a[i][j]) * k[j];
        rhs(t + c[i] * h, ytmp, k[i]);
      }
      ynew = y;
      for (int j = 0; j < 6; ++j)
        if (a[6][j] != 0.0) ynew += (h * a[6][j]) * k[j];
      yerr.setZero();
      for (int j = 0; j < 7; ++j)
        if (e[j] != 0.0) yerr += (h * e[j]) * k[j];

      double scale = std::max(1.0, std::max(y.norm(), ynew.norm()));
      double err = yerr.norm() / (tol * scale);
      if (err <= 1.0) {
        t += h;
        y.swap(ynew);
        k[0].swap(k[6]);  // FSAL
      }
      double factor = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
      double hnew = h * std::clamp(factor, 0.2, 5.0);
      if (!(err <= 1.0) || !clipped) h = hnew;
      if (h < 1e-14 * std::max(1.0, std::abs(t)))
        throw NumericalError("integrator step size underflow");
    }
    on_sample(target, t, y);
  }
}

}  // namespace fdiff
