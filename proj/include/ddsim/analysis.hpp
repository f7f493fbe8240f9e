#pragma once

// Decay-curve fitting and local decay-rate profiles.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/LevenbergMarquardt>

#include "ddsim/error.hpp"

namespace ddsim {

struct DecayCurve {
  std::vector<double> times_s;
  std::vector<double> amplitudes;
  std::vector<double> sigmas;  // optional, empty or one per point

  std::size_t size() const { return times_s.size(); }

  void validate() const {
    if (times_s.size() != amplitudes.size()) throw ConfigError("decay curve: times and amplitudes differ in length");
    if (!sigmas.empty() && sigmas.size() != times_s.size())
      throw ConfigError("decay curve: sigma column length differs");
    for (std::size_t i = 0; i < times_s.size(); ++i) {
      if (!std::isfinite(times_s[i]) || !std::isfinite(amplitudes[i]))
        throw ConfigError("decay curve: non-finite entry");
      if (i > 0 && !(times_s[i] > times_s[i - 1])) throw ConfigError("decay curve: times must be strictly increasing");
      if (!sigmas.empty() && !(sigmas[i] > 0.0)) throw ConfigError("decay curve: sigmas must be positive");
    }
  }
};

enum class DecayModel { single_exp, stretched, inv_recovery };

inline const char* model_name(DecayModel m) {
  switch (m) {
    case DecayModel::single_exp: return "single_exp";
    case DecayModel::stretched: return "stretched";
    case DecayModel::inv_recovery: return "inv_recovery";
  }
  return "?";
}

inline DecayModel parse_model(std::string_view s) {
  if (s == "single_exp") return DecayModel::single_exp;
  if (s == "stretched") return DecayModel::stretched;
  if (s == "inv_recovery") return DecayModel::inv_recovery;
  throw ConfigError("unknown decay model '" + std::string(s) + "' (single_exp, stretched, inv_recovery)");
}

struct FitParameter {
  std::string name;
  double value = 0.0;
  double sigma = 0.0;
};

struct DecayFit {
  DecayModel model = DecayModel::single_exp;
  std::vector<FitParameter> parameters;
  double residual_norm = 0.0;
  std::size_t iterations = 0;
  /// single_exp only: no measurable decay (rate <= 0 or rate * t_max <= 1e-9); T2 reported as infinite.
  bool no_decay = false;
  /// First time the data fall to 1/e of the fitted initial amplitude (inf if never).
  double one_over_e_time_s = INFINITY;
  std::vector<std::string> warnings;

  const FitParameter& parameter(std::string_view name) const {
    for (const auto& p : parameters)
      if (p.name == name) return p;
    throw Error("fit has no parameter '" + std::string(name) + "'");
  }
  double value(std::string_view name) const { return parameter(name).value; }
  double sigma(std::string_view name) const { return parameter(name).sigma; }
};

namespace fit_detail {

using Vec = Eigen::VectorXd;

struct Problem {
  // value and parameter gradient at time t
  std::function<double(double t, const Vec& p, Vec* grad)> model;
  std::function<bool(const Vec& p)> admissible;
};

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};

inline LinearFit linear_regression(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LinearFit f;
  f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  return f;
}

struct Solution {
  Vec p;
  Eigen::MatrixXd covariance;
  double residual_norm = 0.0;
  std::size_t iterations = 0;
};

// Levenberg-Marquardt (Gauss-Newton with adaptive diagonal damping).
// MINPACK-style trust region (Eigen unsupported). Inadmissible trial points get
// a huge finite residual so the step is rejected and the region shrinks.
struct ResidualFunctor : Eigen::DenseFunctor<double> {
  const DecayCurve& c;
  const Problem& prob;
  Vec w;
  ResidualFunctor(const DecayCurve& curve, const Problem& pr, const Vec& weights, Eigen::Index k)
      : Eigen::DenseFunctor<double>(static_cast<int>(k), static_cast<int>(curve.size())), c(curve), prob(pr), w(weights) {}
  int operator()(const Vec& q, Vec& f) const {
    if (!prob.admissible(q)) {
      f.setConstant(1e100);
      return 0;
    }
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      const auto ii = static_cast<std::size_t>(i);
      f[i] = w[i] * (c.amplitudes[ii] - prob.model(c.times_s[ii], q, nullptr));
      if (!std::isfinite(f[i])) f[i] = 1e100;
    }
    return 0;
  }
  int df(const Vec& q, Eigen::MatrixXd& jac) const {
    Vec g(q.size());
    for (Eigen::Index i = 0; i < jac.rows(); ++i) {
      const auto ii = static_cast<std::size_t>(i);
      prob.model(c.times_s[ii], q, &g);
      jac.row(i) = -w[i] * g.transpose();
    }
    return 0;
  }
};

inline Solution levenberg_marquardt(const DecayCurve& c, const Problem& prob, Vec p) {
  const auto n = static_cast<Eigen::Index>(c.size());
  const Eigen::Index k = p.size();
  Vec w = Vec::Ones(n);
  if (!c.sigmas.empty())
    for (Eigen::Index i = 0; i < n; ++i) w[i] = 1.0 / c.sigmas[static_cast<std::size_t>(i)];

  ResidualFunctor f(c, prob, w, k);
  Eigen::LevenbergMarquardt<ResidualFunctor> lm(f);
  lm.setXtol(1e-14);
  lm.setFtol(1e-15);
  lm.setGtol(0.0);
  lm.setMaxfev(2000);
  const auto status = lm.minimize(p);
  if (status == Eigen::LevenbergMarquardtSpace::ImproperInputParameters) throw FitError("fit setup rejected");

  Vec r(n);
  f(p, r);
  Eigen::MatrixXd J(n, k);
  f.df(p, J);
  const double cost = r.squaredNorm();
  if (!p.allFinite() || !std::isfinite(cost) || cost >= 1e199) throw FitError("fit did not reach an admissible point");

  Solution sol;
  sol.iterations = static_cast<std::size_t>(lm.iterations());
  sol.p = p;
  sol.residual_norm = std::sqrt(cost);

  const Eigen::MatrixXd jtj = J.transpose() * J;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(jtj);
  const auto& s = svd.singularValues();
  if (s[0] <= 0.0 || s[k - 1] <= 1e-14 * s[0]) throw FitError("fit is rank-deficient: parameters are not identifiable");
  Eigen::MatrixXd cov = jtj.inverse();
  if (c.sigmas.empty()) {
    const double dof = static_cast<double>(n - k);
    cov *= dof > 0 ? cost / dof : 0.0;
  }
  sol.covariance = cov;
  return sol;
}

inline double one_over_e_time(const DecayCurve& c, double reference) {
  const double target = reference / std::exp(1.0);
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c.amplitudes[i] <= target) {
      if (i == 0) return c.times_s[0];
      const double a0 = c.amplitudes[i - 1], a1 = c.amplitudes[i];
      const double t0 = c.times_s[i - 1], t1 = c.times_s[i];
      if (a0 > 0.0 && a1 > 0.0) {
        const double f = (std::log(a0) - std::log(target)) / (std::log(a0) - std::log(a1));
        return t0 + f * (t1 - t0);
      }
      return t0 + (a0 - target) / (a0 - a1) * (t1 - t0);
    }
  }
  return INFINITY;
}

// Log-linear initialization; non-positive amplitudes are left out.
inline LinearFit log_linear(const DecayCurve& c, std::vector<std::string>& warnings) {
  std::vector<double> t, y;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c.amplitudes[i] > 0.0) {
      t.push_back(c.times_s[i]);
      y.push_back(std::log(c.amplitudes[i]));
    }
  }
  if (t.size() < c.size()) warnings.push_back("non-positive amplitudes clipped from the log-linear initialization");
  if (t.size() < 2) throw FitError("too few positive amplitudes to initialize the fit");
  return linear_regression(t, y);
}

}  // namespace fit_detail

/// Nonlinear least-squares fit of a decay model.
///   single_exp:   A exp(-t/T2)              (fitted through the rate 1/T2)
///   stretched:    A exp(-(t/T_M)^x)         (t = total evolution time)
///   inv_recovery: m_eq - (m_eq - m0) exp(-t/T1)
inline DecayFit fit_decay(const DecayCurve& curve, DecayModel model) {
  using fit_detail::Vec;
  curve.validate();
  const std::size_t min_points = model == DecayModel::stretched ? 6 : 4;
  if (curve.size() < min_points)
    throw FitError(std::string(model_name(model)) + " fit needs at least " + std::to_string(min_points) +
                   " points, got " + std::to_string(curve.size()));

  DecayFit out;
  out.model = model;
  fit_detail::Problem prob;
  Vec p0;

  switch (model) {
    case DecayModel::single_exp: {
      const auto lin = fit_detail::log_linear(curve, out.warnings);
      p0 = Vec(2);
      p0 << std::exp(lin.intercept), -lin.slope;
      prob.model = [](double t, const Vec& p, Vec* g) {
        const double e = std::exp(-p[1] * t);
        if (g) *g << e, -p[0] * t * e;
        return p[0] * e;
      };
      prob.admissible = [](const Vec&) { return true; };
      break;
    }
    case DecayModel::stretched: {
      const auto lin = fit_detail::log_linear(curve, out.warnings);
      const double a0 = std::exp(lin.intercept);
      std::vector<double> lx, ly;
      for (std::size_t i = 0; i < curve.size(); ++i) {
        const double t = curve.times_s[i], a = curve.amplitudes[i];
        if (t > 0.0 && a > 0.0 && a < a0) {
          lx.push_back(std::log(t));
          ly.push_back(std::log(-std::log(a / a0)));
        }
      }
      double x = 1.0, tm = lin.slope < 0.0 ? -1.0 / lin.slope : curve.times_s.back();
      if (lx.size() >= 2) {
        const auto s = fit_detail::linear_regression(lx, ly);
        if (s.slope > 0.0) {
          x = std::clamp(s.slope, 0.2, 5.0);
          tm = std::exp(-s.intercept / s.slope);
        }
      }
      p0 = Vec(3);
      p0 << a0, tm, x;
      prob.model = [](double t, const Vec& p, Vec* g) {
        const double ratio = t / p[1];
        const double u = t > 0.0 ? std::pow(ratio, p[2]) : 0.0;
        const double e = std::exp(-u);
        if (g) {
          const double lr = t > 0.0 ? std::log(ratio) : 0.0;
          *g << e, p[0] * e * u * p[2] / p[1], -p[0] * e * u * lr;
        }
        return p[0] * e;
      };
      prob.admissible = [](const Vec& p) { return p[1] > 0.0 && p[2] > 0.0 && p[2] <= 5.0; };
      break;
    }
    case DecayModel::inv_recovery: {
      const double meq = curve.amplitudes.back();
      std::vector<double> t, y;
      const double span = std::abs(meq - curve.amplitudes.front());
      for (std::size_t i = 0; i + 1 < curve.size(); ++i) {
        const double d = std::abs(meq - curve.amplitudes[i]);
        if (d > 1e-3 * span) {
          t.push_back(curve.times_s[i]);
          y.push_back(std::log(d));
        }
      }
      double t1 = curve.times_s.back() / 3.0;
      double m0 = curve.amplitudes.front();
      if (t.size() >= 2) {
        const auto lin = fit_detail::linear_regression(t, y);
        if (lin.slope < 0.0) t1 = -1.0 / lin.slope;
        const double sign = curve.amplitudes.front() < meq ? -1.0 : 1.0;
        m0 = meq + sign * std::exp(lin.intercept);
      }
      p0 = Vec(3);
      p0 << m0, meq, t1;
      prob.model = [](double t, const Vec& p, Vec* g) {
        const double e = std::exp(-t / p[2]);
        if (g) *g << e, 1.0 - e, -(p[1] - p[0]) * e * t / (p[2] * p[2]);
        return p[1] - (p[1] - p[0]) * e;
      };
      prob.admissible = [](const Vec& p) { return p[2] > 0.0; };
      break;
    }
  }

  const auto sol = fit_detail::levenberg_marquardt(curve, prob, p0);
  out.residual_norm = sol.residual_norm;
  out.iterations = sol.iterations;
  auto sd = [&](Eigen::Index i) { return std::sqrt(std::max(0.0, sol.covariance(i, i))); };

  switch (model) {
    case DecayModel::single_exp: {
      const double a = sol.p[0], k = sol.p[1];
      // negligible decay over the observed span counts as none
      out.no_decay = !(k * curve.times_s.back() > 1e-9);
      const double t2 = out.no_decay ? INFINITY : 1.0 / k;
      const double t2_sigma = out.no_decay ? INFINITY : sd(1) / (k * k);
      out.parameters = {{"amplitude", a, sd(0)}, {"rate_per_s", k, sd(1)}, {"t2_s", t2, t2_sigma}};
      out.one_over_e_time_s = fit_detail::one_over_e_time(curve, a);
      break;
    }
    case DecayModel::stretched:
      out.parameters = {{"amplitude", sol.p[0], sd(0)}, {"t_m_s", sol.p[1], sd(1)}, {"exponent", sol.p[2], sd(2)}};
      out.one_over_e_time_s = fit_detail::one_over_e_time(curve, sol.p[0]);
      break;
    case DecayModel::inv_recovery:
      out.parameters = {{"m0", sol.p[0], sd(0)}, {"m_eq", sol.p[1], sd(1)}, {"t1_s", sol.p[2], sd(2)}};
      out.one_over_e_time_s = INFINITY;
      break;
  }
  return out;
}

inline DecayFit fit_inversion_recovery(const DecayCurve& curve) { return fit_decay(curve, DecayModel::inv_recovery); }

struct RateProfile {
  std::vector<double> centers_s;
  std::vector<double> rates_per_s;
  std::size_t skipped_windows = 0;
};

/// Sliding-window regression of log amplitude; rate = -slope.
inline RateProfile rate_profile(const DecayCurve& curve, std::size_t window) {
  curve.validate();
  if (window < 3) throw ConfigError("rate profile window must be at least 3 points");
  RateProfile out;
  if (curve.size() < window) return out;
  std::vector<double> t(window), y(window);
  for (std::size_t start = 0; start + window <= curve.size(); ++start) {
    bool positive = true;
    for (std::size_t k = 0; k < window; ++k) {
      const double a = curve.amplitudes[start + k];
      if (!(a > 0.0)) {
        positive = false;
        break;
      }
      t[k] = curve.times_s[start + k];
      y[k] = std::log(a);
    }
    if (!positive) {
      ++out.skipped_windows;
      continue;
    }
    const auto lin = fit_detail::linear_regression(t, y);
    double center = 0.0;
    for (double v : t) center += v;
    out.centers_s.push_back(center / static_cast<double>(window));
    out.rates_per_s.push_back(-lin.slope);
  }
  return out;
}

}  // namespace ddsim
