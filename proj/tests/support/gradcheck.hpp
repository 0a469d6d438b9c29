#pragma once

// Central finite-difference oracle for analytic gradients.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "udil/diff.hpp"

namespace udil::testing {

struct GradCheckResult {
  double worst_rel = 0.0;  // over entries with |gradient| > 1e-6
  std::size_t checked = 0;
  std::size_t failures = 0;
  std::size_t kinks = 0;  // entries skipped as non-differentiable
  std::string first_failure;
};

// Entries whose one-sided differences disagree by more than `kink_tol`, or
// that fail at `eps` but pass at eps / 10, sit on a ReLU switch inside the
// stencil; they are counted as kinks rather than checked.
// An entry passes when |analytic - numeric| <= rel_tol * max(|analytic|, |numeric|)
// or, for entries that are zero up to roundoff, |analytic - numeric| <= abs_floor.
inline GradCheckResult gradcheck(const std::function<Var()>& loss, const std::vector<Tensor*>& params,
                                 double eps = 1e-5, double rel_tol = 1e-4, double abs_floor = 1e-8,
                                 double kink_tol = 1e-3) {
  for (Tensor* p : params) p->zero_grad();
  const Var base = loss();
  const double f0 = base.item();
  backward(base);
  GradCheckResult res;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    const Matrix analytic = p.has_grad() ? p.grad() : Matrix::Zero(p.rows(), p.cols());
    for (Index i = 0; i < p.size(); ++i) {
      double& x = p.data().data()[i];
      const double saved = x;
      auto probe = [&](double h) {
        x = saved + h;
        const double up = loss().item();
        x = saved - h;
        const double down = loss().item();
        x = saved;
        return std::pair{up, down};
      };
      const double a = analytic.data()[i];
      auto passes = [&](double numeric) {
        const double diff = std::abs(a - numeric);
        return diff <= abs_floor || diff <= rel_tol * std::max(std::abs(a), std::abs(numeric));
      };
      auto [up, down] = probe(eps);
      double numeric = (up - down) / (2.0 * eps);
      bool kink = std::abs((up - f0) - (f0 - down)) / eps > kink_tol * std::max(1.0, std::abs(numeric));
      if (!kink && !passes(numeric)) {
        // A kink barely inside the stencil bends one side only slightly;
        // a tenfold smaller stencil usually steps past it.
        const auto [up2, down2] = probe(eps / 10.0);
        const double retry = (up2 - down2) / (2.0 * eps / 10.0);
        if (passes(retry)) {
          kink = true;
        }
      }
      if (kink) {
        ++res.kinks;
        continue;
      }
      const double diff = std::abs(a - numeric);
      const double scale = std::max(std::abs(a), std::abs(numeric));
      const double rel = scale > 0.0 ? diff / scale : 0.0;
      ++res.checked;
      if (scale > 1e-6) res.worst_rel = std::max(res.worst_rel, rel);
      if (!passes(numeric)) {
        if (res.failures++ == 0) {
          res.first_failure = "param " + std::to_string(k) + " entry " + std::to_string(i) + ": analytic " +
                              std::to_string(a) + " numeric " + std::to_string(numeric);
        }
      }
    }
    p.zero_grad();
  }
  return res;
}

}  // namespace udil::testing
