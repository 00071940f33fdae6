#include "allocsim/survival.hpp"

#include "allocsim/error.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace allocsim {

namespace {

struct Objective {
  double value = 0.0;
  Vector gradient;
  Matrix hessian;
};

// Design matrix plus row order by descending time, so risk sets accumulate
// in a single backward sweep.
struct CoxData {
  Matrix x;
  std::vector<double> time;
  std::vector<char> event;
  std::vector<Eigen::Index> order;
};

int check_dimensions(std::span<const SurvivalSample> data) {
  if (data.empty()) return 0;
  const auto dim = data.front().covariates.size();
  for (const auto& s : data) {
    if (s.covariates.size() != dim)
      throw Error(ErrorCode::DimensionMismatch, "covariate dimension differs across samples");
    if (!(s.time >= 0.0))
      throw Error(ErrorCode::InvalidArgument, "survival time must be non-negative");
  }
  return static_cast<int>(dim);
}

CoxData make_data(std::span<const SurvivalSample> data, int dim) {
  const auto n = static_cast<Eigen::Index>(data.size());
  CoxData d;
  d.x.resize(n, dim);
  d.time.resize(n);
  d.event.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (dim > 0) d.x.row(i) = data[i].covariates.transpose();
    d.time[i] = data[i].time;
    d.event[i] = data[i].event ? 1 : 0;
  }
  d.order.resize(n);
  std::iota(d.order.begin(), d.order.end(), Eigen::Index{0});
  std::stable_sort(d.order.begin(), d.order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return d.time[a] > d.time[b]; });
  return d;
}

Objective evaluate(const CoxData& d, const Vector& theta, const Vector& penalty,
                   bool with_hessian) {
  const Eigen::Index dim = theta.size();
  const Eigen::Index n = d.x.rows();
  Objective out;
  out.gradient = Vector::Zero(dim);
  if (with_hessian) out.hessian = Matrix::Zero(dim, dim);

  const Vector eta = dim > 0 ? Vector(d.x * theta) : Vector::Zero(n);
  const double shift = n > 0 ? eta.maxCoeff() : 0.0;

  double s0 = 0.0;
  Vector s1 = Vector::Zero(dim);
  Matrix s2 = with_hessian ? Matrix::Zero(dim, dim) : Matrix();

  Eigen::Index k = 0;
  while (k < n) {
    const double t = d.time[d.order[k]];
    Eigen::Index end = k;
    int events = 0;
    Vector event_x_sum = Vector::Zero(dim);
    double event_eta_sum = 0.0;
    while (end < n && d.time[d.order[end]] == t) {
      const Eigen::Index i = d.order[end];
      const double w = std::exp(eta[i] - shift);
      s0 += w;
      if (dim > 0) {
        s1.noalias() += w * d.x.row(i).transpose();
        if (with_hessian) s2.noalias() += w * d.x.row(i).transpose() * d.x.row(i);
      }
      if (d.event[i]) {
        ++events;
        event_eta_sum += eta[i];
        if (dim > 0) event_x_sum.noalias() += d.x.row(i).transpose();
      }
      ++end;
    }
    if (events > 0) {
      out.value += event_eta_sum - events * (std::log(s0) + shift);
      const Vector mean = s1 / s0;
      out.gradient.noalias() += event_x_sum - events * mean;
      if (with_hessian)
        out.hessian.noalias() -= events * (s2 / s0 - mean * mean.transpose());
    }
    k = end;
  }

  out.value -= 0.5 * (penalty.array() * theta.array().square()).sum();
  out.gradient.array() -= penalty.array() * theta.array();
  if (with_hessian) out.hessian.diagonal() -= penalty;
  return out;
}

double sup_norm(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

void CoxModel::validate() const {
  if (coefficients.size() != covariate_dim)
    throw Error(ErrorCode::InvalidArgument, "coefficient length differs from covariate_dim");
  if (baseline_times.size() != baseline_cumhaz.size())
    throw Error(ErrorCode::InvalidArgument, "baseline times and cumulative hazard differ in length");
  for (std::size_t i = 0; i < baseline_times.size(); ++i) {
    if (i > 0 && !(baseline_times[i] > baseline_times[i - 1]))
      throw Error(ErrorCode::InvalidArgument, "baseline times must be strictly increasing");
    if (i > 0 && baseline_cumhaz[i] < baseline_cumhaz[i - 1])
      throw Error(ErrorCode::InvalidArgument, "cumulative hazard must be non-decreasing");
  }
  if (!baseline_cumhaz.empty() && baseline_cumhaz.front() < 0.0)
    throw Error(ErrorCode::InvalidArgument, "cumulative hazard must start non-negative");
}

double CoxModel::cumulative_baseline(double t) const {
  auto it = std::upper_bound(baseline_times.begin(), baseline_times.end(), t);
  if (it == baseline_times.begin()) return 0.0;
  return baseline_cumhaz[static_cast<std::size_t>(it - baseline_times.begin()) - 1];
}

double CoxModel::linear_predictor(const Vector& x) const {
  if (x.size() != covariate_dim)
    throw Error(ErrorCode::DimensionMismatch,
                "expected " + std::to_string(covariate_dim) + " covariates, got " +
                    std::to_string(x.size()));
  return covariate_dim ? coefficients.dot(x) : 0.0;
}

LogLikGrad partial_loglik_grad(std::span<const SurvivalSample> data, const Vector& theta,
                               double ridge_penalty) {
  const int dim = check_dimensions(data);
  if (!data.empty() && theta.size() != dim)
    throw Error(ErrorCode::DimensionMismatch, "theta length differs from covariate dimension");
  const CoxData d = make_data(data, static_cast<int>(theta.size()));
  const Objective obj =
      evaluate(d, theta, Vector::Constant(theta.size(), ridge_penalty), false);
  return {obj.value, obj.gradient};
}

void breslow_baseline(std::span<const SurvivalSample> data, const Vector& theta,
                      std::vector<double>& times, std::vector<double>& cumhaz) {
  const int dim = static_cast<int>(theta.size());
  const CoxData d = make_data(data, dim);
  const Eigen::Index n = d.x.rows();
  const Vector eta = dim > 0 ? Vector(d.x * theta) : Vector::Zero(n);

  // Backward sweep gives the risk-set sums; increments are collected in
  // descending time and reversed afterwards.
  std::vector<std::pair<double, double>> increments;
  double s0 = 0.0;
  Eigen::Index k = 0;
  while (k < n) {
    const double t = d.time[d.order[k]];
    int events = 0;
    while (k < n && d.time[d.order[k]] == t) {
      const Eigen::Index i = d.order[k];
      s0 += std::exp(eta[i]);
      events += d.event[i];
      ++k;
    }
    if (events > 0) increments.emplace_back(t, events / s0);
  }
  std::reverse(increments.begin(), increments.end());
  times.clear();
  cumhaz.clear();
  double h = 0.0;
  for (const auto& [t, dh] : increments) {
    h += dh;
    times.push_back(t);
    cumhaz.push_back(h);
  }
}

FitReport fit_cox_report(std::span<const SurvivalSample> data, const FitOptions& opts) {
  if (opts.ridge_penalty < 0.0)
    throw Error(ErrorCode::InvalidArgument, "ridge_penalty must be non-negative");
  if (!(opts.tolerance > 0.0)) throw Error(ErrorCode::InvalidArgument, "tolerance must be positive");
  const int dim = check_dimensions(data);
  if (std::none_of(data.begin(), data.end(), [](const SurvivalSample& s) { return s.event; }))
    throw Error(ErrorCode::NoEvents, "all samples are censored");

  CoxData d = make_data(data, dim);

  // Centering cancels in the partial likelihood; scaling is a change of
  // coordinates beta = theta * scale, with the penalty rescaled to match.
  Vector scale = Vector::Ones(dim);
  if (dim > 0) {
    const Eigen::RowVectorXd mean = d.x.colwise().mean();
    d.x.rowwise() -= mean;
    for (int j = 0; j < dim; ++j) {
      const double sd = std::sqrt(d.x.col(j).squaredNorm() / static_cast<double>(d.x.rows()));
      if (sd > 0.0) {
        scale[j] = sd;
        d.x.col(j) /= sd;
      }
    }
  }
  const Vector penalty = opts.ridge_penalty * scale.array().square().inverse().matrix();

  FitReport report;
  Vector beta = Vector::Zero(dim);
  Objective current = evaluate(d, beta, penalty, true);
  report.objective_trace.push_back(current.value);

  bool converged = sup_norm(current.gradient) < opts.gradient_tolerance;
  int iter = 0;
  while (!converged && iter < opts.max_newton_iters) {
    ++iter;
    Eigen::LLT<Matrix> llt(-current.hessian);
    if (llt.info() != Eigen::Success)
      throw Error(ErrorCode::SingularHessian,
                  "negative Hessian is not positive definite; covariates may be collinear or constant");
    const Vector step = llt.solve(current.gradient);
    if (!step.allFinite())
      throw Error(ErrorCode::SingularHessian, "Newton step is not finite");

    double factor = 1.0;
    Objective next;
    bool improved = false;
    for (int halving = 0; halving < 40; ++halving) {
      next = evaluate(d, beta + factor * step, penalty, true);
      if (std::isfinite(next.value) && next.value >= current.value) {
        improved = true;
        break;
      }
      factor *= 0.5;
    }
    if (!improved) {
      // No ascent direction left at machine precision.
      converged = true;
      break;
    }
    beta += factor * step;
    const double change = std::abs(next.value - current.value);
    const double rel = change / std::max(std::abs(current.value), 1e-300);
    current = std::move(next);
    report.objective_trace.push_back(current.value);
    converged = rel < opts.tolerance || sup_norm(current.gradient) < opts.gradient_tolerance;
  }
  if (!converged)
    throw Error(ErrorCode::NonConvergence,
                "Newton iterations did not converge within " + std::to_string(opts.max_newton_iters));

  report.iterations = iter;
  CoxModel& model = report.model;
  model.covariate_dim = dim;
  model.coefficients = (beta.array() / scale.array()).matrix();
  breslow_baseline(data, model.coefficients, model.baseline_times, model.baseline_cumhaz);
  return report;
}

double survival_prob(const CoxModel& model, const Vector& x, double t) {
  const double eta = model.linear_predictor(x);
  if (t < 0.0) throw Error(ErrorCode::InvalidArgument, "time must be non-negative");
  return std::exp(-std::exp(eta) * model.cumulative_baseline(t));
}

MedianSurvival median_survival(const CoxModel& model, const Vector& x) {
  if (model.baseline_times.empty())
    throw Error(ErrorCode::EmptyBaseline, "model has no baseline event times");
  const double risk = std::exp(model.linear_predictor(x));
  const auto& h = model.baseline_cumhaz;
  // First step at which S = exp(-risk * H0) drops to one half or below.
  const auto it = std::partition_point(h.begin(), h.end(),
                                       [&](double cum) { return std::exp(-risk * cum) > 0.5; });
  if (it == h.end()) return {model.baseline_times.back(), false};
  return {model.baseline_times[static_cast<std::size_t>(it - h.begin())], true};
}

double concordance_index(std::span<const double> scores, std::span<const SurvivalSample> data) {
  if (scores.size() != data.size())
    throw Error(ErrorCode::DimensionMismatch, "scores and samples differ in length");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return data[a].time < data[b].time; });

  double concordant = 0.0;
  double comparable = 0.0;
  std::size_t group_end = 0;
  for (std::size_t a = 0; a < order.size(); ++a) {
    const std::size_t i = order[a];
    // Skip samples sharing this time; equal times are never comparable.
    if (group_end <= a) {
      group_end = a + 1;
      while (group_end < order.size() && data[order[group_end]].time == data[i].time) ++group_end;
    }
    if (!data[i].event) continue;
    for (std::size_t b = group_end; b < order.size(); ++b) {
      const std::size_t j = order[b];
      comparable += 1.0;
      if (scores[i] > scores[j])
        concordant += 1.0;
      else if (scores[i] == scores[j])
        concordant += 0.5;
    }
  }
  if (comparable == 0.0)
    throw Error(ErrorCode::NoComparablePairs, "dataset has no comparable pairs");
  return concordant / comparable;
}

Vector graft_features(const Donor& donor, const Patient& patient) {
  const auto dd = donor.donor_covariates.size();
  const auto dg = patient.graft_covariates.size();
  Vector x(dd + dg + 1);
  x << donor.donor_covariates, patient.graft_covariates,
      distance_nm(donor.location, patient.center) / 1000.0;
  return x;
}

double graft_surv(const CoxModel& graft_model, const Donor& donor, const Patient& patient) {
  return median_survival(graft_model, graft_features(donor, patient)).time / kDaysPerYear;
}

double waitlist_surv(const CoxModel& waitlist_model, const Patient& patient) {
  return median_survival(waitlist_model, patient.waitlist_covariates).time / kDaysPerYear;
}

CoxModel exponential_baseline_model(Vector coefficients, double rate_per_day,
                                    double grid_step_days, double max_days,
                                    std::string schema_hash) {
  if (!(rate_per_day > 0.0) || !(grid_step_days > 0.0) || !(max_days >= grid_step_days))
    throw Error(ErrorCode::InvalidArgument, "invalid exponential baseline grid");
  CoxModel m;
  m.covariate_dim = static_cast<int>(coefficients.size());
  m.coefficients = std::move(coefficients);
  m.schema_hash = std::move(schema_hash);
  const auto steps = static_cast<std::size_t>(std::floor(max_days / grid_step_days));
  m.baseline_times.reserve(steps);
  m.baseline_cumhaz.reserve(steps);
  for (std::size_t i = 1; i <= steps; ++i) {
    const double t = static_cast<double>(i) * grid_step_days;
    m.baseline_times.push_back(t);
    m.baseline_cumhaz.push_back(rate_per_day * t);
  }
  return m;
}

}  // namespace allocsim
