#pragma once

#include "allocsim/domain.hpp"

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace allocsim {

inline constexpr double kDaysPerYear = 365.25;

struct SurvivalSample {
  double time = 0.0;   // days
  bool event = false;  // false = right-censored
  Vector covariates;
};

/// Cox proportional-hazards model with a Breslow step-function baseline.
///
/// The cumulative baseline hazard H0 is right-continuous: H0(t) is 0 before
/// the first stored time and baseline_cumhaz[i] on [baseline_times[i],
/// baseline_times[i+1]).
struct CoxModel {
  Vector coefficients;
  std::vector<double> baseline_times;
  std::vector<double> baseline_cumhaz;
  int covariate_dim = 0;
  std::string schema_hash;

  /// Throws Error(InvalidArgument) when the invariants are broken.
  void validate() const;

  double cumulative_baseline(double t) const;
  double linear_predictor(const Vector& x) const;
};

struct FitOptions {
  double ridge_penalty = 0.1;
  int max_newton_iters = 100;
  double tolerance = 1e-8;            // relative change of the objective
  double gradient_tolerance = 1e-6;   // sup-norm of the gradient
};

struct FitReport {
  CoxModel model;
  /// Penalized objective after each accepted Newton step, starting at theta = 0.
  std::vector<double> objective_trace;
  int iterations = 0;
};

struct LogLikGrad {
  double value = 0.0;
  Vector gradient;
};

/// Penalized Breslow partial log-likelihood
///   sum_j [ sum_{i in D_j} theta'x_i - d_j log sum_{k in R_j} exp(theta'x_k) ]
///   - penalty/2 |theta|^2
/// and its exact gradient.
LogLikGrad partial_loglik_grad(std::span<const SurvivalSample> data, const Vector& theta,
                               double ridge_penalty);

/// Newton-Raphson with step halving on internally standardized covariates.
/// The penalty is carried into the standardized coordinates exactly, so the
/// returned coefficients maximize the penalized objective in the original units.
FitReport fit_cox_report(std::span<const SurvivalSample> data, const FitOptions& opts = {});

inline CoxModel fit_cox(std::span<const SurvivalSample> data, const FitOptions& opts = {}) {
  return fit_cox_report(data, opts).model;
}

/// Breslow cumulative baseline at the given coefficients.
void breslow_baseline(std::span<const SurvivalSample> data, const Vector& theta,
                      std::vector<double>& times, std::vector<double>& cumhaz);

/// S(t | x) = exp(-exp(theta'x) H0(t)).
double survival_prob(const CoxModel& model, const Vector& x, double t);

struct MedianSurvival {
  double time = 0.0;  // days
  bool reached_median = false;
};

MedianSurvival median_survival(const CoxModel& model, const Vector& x);

/// Harrell's C for risk scores (higher score = shorter predicted survival).
/// Ties in score count one half; equal observed times are never comparable.
double concordance_index(std::span<const double> scores, std::span<const SurvivalSample> data);

/// donor covariates ++ patient graft covariates ++ distance in thousands of nm.
Vector graft_features(const Donor& donor, const Patient& patient);

/// Median graft survival in years for a donor/patient pair.
double graft_surv(const CoxModel& graft_model, const Donor& donor, const Patient& patient);

/// Median waitlist survival in years.
double waitlist_surv(const CoxModel& waitlist_model, const Patient& patient);

/// Cox model with H0(t) = rate * t sampled on a regular grid.
CoxModel exponential_baseline_model(Vector coefficients, double rate_per_day, double grid_step_days,
                                    double max_days, std::string schema_hash = {});

}  // namespace allocsim
