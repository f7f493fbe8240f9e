#pragma once

#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <mutex>
#include <type_traits>
#include <vector>

namespace ddsim {

namespace nm_detail {
inline constexpr double kPenalty = 1e200;
}

struct NelderMeadOptions {
  std::size_t max_iterations = 5000;
  /// Stop once the simplex size (mean vertex distance to its centre) is below this.
  double x_tolerance = 1e-9;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Simplex minimization via GSL nmsimplex2. Non-finite objective values are
/// replaced by a large finite penalty (GSL refuses non-finite values).
template <typename Fn>
NelderMeadResult nelder_mead(Fn&& objective, std::vector<double> x0, double initial_step,
                             const NelderMeadOptions& opts = {}) {
  static std::once_flag quiet;
  std::call_once(quiet, [] { gsl_set_error_handler_off(); });
  const std::size_t n = x0.size();
  struct Ctx {
    std::remove_reference_t<Fn>* fn;
    std::size_t n;
  } ctx{&objective, n};

  gsl_multimin_function f;
  f.n = n;
  f.params = &ctx;
  f.f = [](const gsl_vector* v, void* p) {
    auto* c = static_cast<Ctx*>(p);
    std::vector<double> x(c->n);
    for (std::size_t k = 0; k < c->n; ++k) x[k] = gsl_vector_get(v, k);
    const double val = (*c->fn)(x);
    return std::isfinite(val) ? std::min(val, nm_detail::kPenalty) : nm_detail::kPenalty;
  };

  std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> x(gsl_vector_alloc(n), gsl_vector_free);
  std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> step(gsl_vector_alloc(n), gsl_vector_free);
  for (std::size_t k = 0; k < n; ++k) gsl_vector_set(x.get(), k, x0[k]);
  gsl_vector_set_all(step.get(), initial_step);
  std::unique_ptr<gsl_multimin_fminimizer, decltype(&gsl_multimin_fminimizer_free)> s(
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n), gsl_multimin_fminimizer_free);
  NelderMeadResult res;
  if (gsl_multimin_fminimizer_set(s.get(), &f, x.get(), step.get()) != GSL_SUCCESS) {
    res.x = x0;
    res.value = INFINITY;
    return res;
  }
  for (res.iterations = 0; res.iterations < opts.max_iterations; ++res.iterations) {
    if (gsl_multimin_fminimizer_iterate(s.get()) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s.get()), opts.x_tolerance) == GSL_SUCCESS) {
      res.converged = true;
      break;
    }
  }
  res.x.resize(n);
  for (std::size_t k = 0; k < n; ++k) res.x[k] = gsl_vector_get(s->x, k);
  res.value = s->fval >= nm_detail::kPenalty ? INFINITY : s->fval;
  return res;
}

}  // namespace ddsim
