#include "allocsim/acceptance.hpp"

#include "allocsim/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace allocsim {

namespace {

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void require_both_classes(std::span<const int> labels) {
  const bool has_pos = std::any_of(labels.begin(), labels.end(), [](int y) { return y != 0; });
  const bool has_neg = std::any_of(labels.begin(), labels.end(), [](int y) { return y == 0; });
  if (!has_pos || !has_neg) throw Error(ErrorCode::SingleClass, "labels contain a single class");
}

}  // namespace

Vector acceptance_features(const Donor& donor, const Patient& patient) {
  const auto dd = donor.donor_covariates.size();
  const auto dw = patient.waitlist_covariates.size();
  Vector x(dd + dw + 1);
  x << donor.donor_covariates, patient.waitlist_covariates,
      distance_nm(donor.location, patient.center) / 1000.0;
  return x;
}

double AcceptanceModel::predict(const Vector& features) const {
  if (features.size() != weights.size())
    throw Error(ErrorCode::DimensionMismatch,
                "acceptance model expects " + std::to_string(weights.size()) + " features, got " +
                    std::to_string(features.size()));
  return logistic(intercept + (weights.size() ? weights.dot(features) : 0.0));
}

double predict_acceptance(const AcceptanceModel& model, const Donor& donor,
                          const Patient& patient) {
  return model.predict(acceptance_features(donor, patient));
}

double LogisticAcceptance::probability(const Donor& donor, const Patient& patient) const {
  return predict_acceptance(model_, donor, patient);
}

ConstantAcceptance::ConstantAcceptance(double p) : p_(p) {
  if (!(p >= 0.0 && p <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "acceptance probability outside [0, 1]");
}

void AcceptancePolicyConfig::validate() const {
  if (!(exponent_alpha >= 0.0 && exponent_alpha <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "exponent_alpha must lie in [0, 1]");
}

double adjusted_probability(double p, double alpha) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidArgument, "p outside [0, 1]");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha outside [0, 1]");
  if (alpha == 0.0) return 1.0;
  return std::pow(p, alpha);
}

AcceptanceModel fit_logistic(const Matrix& features, std::span<const int> labels,
                             const LogisticFitOptions& opts) {
  const Eigen::Index n = features.rows();
  if (static_cast<std::size_t>(n) != labels.size())
    throw Error(ErrorCode::DimensionMismatch, "features and labels differ in length");
  require_both_classes(labels);

  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = labels[static_cast<std::size_t>(i)] != 0 ? 1.0 : 0.0;

  const Eigen::Index dim = features.cols();
  Vector w = Vector::Zero(dim);
  double b = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int it = 0; it < opts.iters; ++it) {
    const Vector z = (features * w).array() + b;
    const Vector residual = y - z.unaryExpr([](double v) { return logistic(v); });
    const Vector grad_w = inv_n * (features.transpose() * residual - opts.l2_penalty * w);
    const double grad_b = inv_n * residual.sum();
    w += opts.step * grad_w;
    b += opts.step * grad_b;
    const double sup = std::max(grad_w.size() ? grad_w.cwiseAbs().maxCoeff() : 0.0, std::abs(grad_b));
    if (sup < opts.tolerance) break;
  }
  return AcceptanceModel{b, w, {}};
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw Error(ErrorCode::DimensionMismatch, "scores and labels differ in length");
  require_both_classes(labels);

  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double positive_rank_sum = 0.0;
  double positives = 0.0;
  std::size_t k = 0;
  while (k < n) {
    std::size_t end = k;
    while (end < n && scores[order[end]] == scores[order[k]]) ++end;
    const double avg_rank = 0.5 * static_cast<double>(k + 1 + end);  // 1-based ranks k+1..end
    for (std::size_t m = k; m < end; ++m) {
      if (labels[order[m]] != 0) {
        positive_rank_sum += avg_rank;
        positives += 1.0;
      }
    }
    k = end;
  }
  const double negatives = static_cast<double>(n) - positives;
  return (positive_rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

}  // namespace allocsim
