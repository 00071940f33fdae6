#pragma once

#include "allocsim/domain.hpp"

#include <span>
#include <string>

namespace allocsim {

/// Source of offer-acceptance probabilities for a donor/patient pair.
class AcceptancePredictor {
 public:
  virtual ~AcceptancePredictor() = default;
  virtual double probability(const Donor& donor, const Patient& patient) const = 0;
};

/// donor covariates ++ patient waitlist covariates ++ distance in thousands of nm.
Vector acceptance_features(const Donor& donor, const Patient& patient);

/// Logistic model over acceptance_features.
struct AcceptanceModel {
  double intercept = 0.0;
  Vector weights;
  std::string schema_hash;

  double predict(const Vector& features) const;
};

class LogisticAcceptance final : public AcceptancePredictor {
 public:
  explicit LogisticAcceptance(AcceptanceModel model) : model_(std::move(model)) {}
  double probability(const Donor& donor, const Patient& patient) const override;
  const AcceptanceModel& model() const { return model_; }

 private:
  AcceptanceModel model_;
};

/// Fixed probability regardless of the pair; handy for tests and what-if runs.
class ConstantAcceptance final : public AcceptancePredictor {
 public:
  explicit ConstantAcceptance(double p);
  double probability(const Donor&, const Patient&) const override { return p_; }

 private:
  double p_;
};

double predict_acceptance(const AcceptanceModel& model, const Donor& donor, const Patient& patient);

struct AcceptancePolicyConfig {
  double exponent_alpha = 1.0;
  bool always_accept = false;

  void validate() const;
};

/// p^alpha, with p^0 = 1 (including p = 0).
double adjusted_probability(double p, double alpha);

struct LogisticFitOptions {
  double l2_penalty = 0.0;
  int iters = 2000;
  double step = 1.0;
  double tolerance = 1e-9;  // sup-norm of the mean gradient
};

/// Penalized maximum likelihood by fixed-step gradient ascent on the mean
/// log-likelihood. The intercept is not penalized.
AcceptanceModel fit_logistic(const Matrix& features, std::span<const int> labels,
                             const LogisticFitOptions& opts = {});

/// Mann-Whitney AUROC with average ranks for ties.
double auroc(std::span<const double> scores, std::span<const int> labels);

}  // namespace allocsim
