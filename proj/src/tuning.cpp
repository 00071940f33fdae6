#include "allocsim/tuning.hpp"

#include "allocsim/error.hpp"
#include "allocsim/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace allocsim {

void TuneConfig::validate() const {
  if (budget_evals < 1) throw Error(ErrorCode::InvalidArgument, "tuning budget must be at least 1");
  for (const auto& [lo, hi] : search_box)
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo <= hi))
      throw Error(ErrorCode::InvalidArgument, "search box bounds must be finite with lo <= hi");
}

double evaluate_theta(const PotentialVector& theta, std::span<const Cohort> cohorts,
                      const ModelSet& models, const PolicySpec& base_spec) {
  if (base_spec.kind != PolicyKind::Potential)
    throw Error(ErrorCode::InvalidArgument, "evaluate_theta needs a potential policy spec");
  double total = 0.0;
  for (const auto& cohort : cohorts) {
    SimConfig config;
    config.horizon_days = cohort.horizon_days;
    config.policy = base_spec;
    config.policy.potential_theta = theta;
    config.acceptance.always_accept = true;
    config.batch_size = 1;
    total += run(config, cohort, models).total_life_years;
  }
  return total;
}

SobolSequence::SobolSequence(std::uint64_t seed) {
  // Degree s, polynomial coefficients a and initial direction integers m of
  // dimensions 2-4; dimension 1 is the van der Corput sequence.
  struct Primitive {
    int s;
    std::uint32_t a;
    std::array<std::uint32_t, 3> m;
  };
  constexpr std::array<Primitive, 3> kPoly = {{{1, 0, {1, 0, 0}}, {2, 1, {1, 3, 0}}, {3, 1, {1, 3, 1}}}};
  for (int k = 0; k < 32; ++k) directions_[0][k] = std::uint32_t{1} << (31 - k);
  for (std::size_t d = 1; d < 4; ++d) {
    const auto& poly = kPoly[d - 1];
    auto& v = directions_[d];
    for (int k = 0; k < poly.s; ++k) v[k] = poly.m[k] << (31 - k);
    for (int k = poly.s; k < 32; ++k) {
      std::uint32_t x = v[k - poly.s] ^ (v[k - poly.s] >> poly.s);
      for (int i = 1; i < poly.s; ++i)
        if ((poly.a >> (poly.s - 1 - i)) & 1u) x ^= v[k - i];
      v[k] = x;
    }
  }
  Rng rng(seed);
  for (auto& s : shift_) s = static_cast<std::uint32_t>(rng.next_u64() >> 32);
}

std::array<double, 4> SobolSequence::next() {
  std::array<double, 4> point{};
  for (std::size_t d = 0; d < 4; ++d) point[d] = static_cast<double>(state_[d] ^ shift_[d]) * 0x1.0p-32;
  // Gray-code update: flip the direction of the lowest zero bit of the index.
  const int c = std::countr_one(index_);
  for (std::size_t d = 0; d < 4; ++d) state_[d] ^= directions_[d][c];
  ++index_;
  return point;
}

TuneResult tune_potentials(const TuneConfig& cfg, const ModelSet& models, const PolicySpec& base_spec) {
  cfg.validate();
  TuneResult result;
  auto evaluate = [&](const PotentialVector& theta) {
    const double score = evaluate_theta(theta, cfg.training_cohorts, models, base_spec);
    result.evaluation_log.push_back({theta, score});
    if (result.evaluation_log.size() == 1 || score > result.best_score) {
      result.best_score = score;
      result.best_theta = theta;
    }
  };
  auto remaining = [&] { return cfg.budget_evals - static_cast<int>(result.evaluation_log.size()); };

  evaluate(PotentialVector{});

  const int exploration = cfg.local_refine ? static_cast<int>(std::lround(0.6 * (cfg.budget_evals - 1)))
                                           : cfg.budget_evals - 1;
  SobolSequence sobol(cfg.seed);
  for (int i = 0; i < exploration && remaining() > 0; ++i) {
    const auto u = sobol.next();
    PotentialVector theta{};
    for (std::size_t d = 0; d < 4; ++d) {
      const auto [lo, hi] = cfg.search_box[d];
      theta[d] = lo + u[d] * (hi - lo);
    }
    evaluate(theta);
  }

  if (!cfg.local_refine) return result;
  std::array<double, 4> step{};
  for (std::size_t d = 0; d < 4; ++d)
    step[d] = 0.25 * (cfg.search_box[d].second - cfg.search_box[d].first);
  while (remaining() > 0) {
    bool improved = false;
    for (std::size_t d = 0; d < 4 && remaining() > 0; ++d) {
      for (double sign : {1.0, -1.0}) {
        if (remaining() <= 0 || step[d] == 0.0) break;
        PotentialVector trial = result.best_theta;
        const auto [lo, hi] = cfg.search_box[d];
        trial[d] = std::clamp(trial[d] + sign * step[d], lo, hi);
        if (trial == result.best_theta) continue;
        const double before = result.best_score;
        evaluate(trial);
        if (result.best_score > before) {
          improved = true;
          break;
        }
      }
    }
    if (!improved) {
      bool any = false;
      for (auto& s : step) {
        s *= 0.5;
        any = any || s > 1e-6;
      }
      if (!any) break;
    }
  }
  return result;
}

}  // namespace allocsim
