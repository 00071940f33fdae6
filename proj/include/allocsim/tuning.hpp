#pragma once

#include "allocsim/cohort.hpp"
#include "allocsim/policies.hpp"
#include "allocsim/simulator.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace allocsim {

using PotentialVector = std::array<double, 4>;  // O, A, B, AB

struct TuneConfig {
  std::vector<Cohort> training_cohorts;
  int budget_evals = 50;
  std::array<std::pair<double, double>, 4> search_box{
      {{-5.0, 5.0}, {-5.0, 5.0}, {-5.0, 5.0}, {-5.0, 5.0}}};
  bool local_refine = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TuneEvaluation {
  PotentialVector theta{};
  double score = 0.0;
};

struct TuneResult {
  PotentialVector best_theta{};
  double best_score = 0.0;
  std::vector<TuneEvaluation> evaluation_log;
};

/// Summed life-years over the cohorts for the potential policy with the given
/// theta, under always-accept so every run is deterministic.
double evaluate_theta(const PotentialVector& theta, std::span<const Cohort> cohorts,
                      const ModelSet& models, const PolicySpec& base_spec);

/// 4-D Sobol points (Joe-Kuo direction numbers) with a seeded digital shift.
class SobolSequence {
 public:
  explicit SobolSequence(std::uint64_t seed);
  std::array<double, 4> next();

 private:
  std::array<std::array<std::uint32_t, 32>, 4> directions_{};
  std::array<std::uint32_t, 4> state_{};
  std::array<std::uint32_t, 4> shift_{};
  std::uint32_t index_ = 0;
};

/// theta = 0 first, then quasi-random points in the box, then (optionally)
/// coordinate-wise refinement around the incumbent. Never exceeds the budget.
TuneResult tune_potentials(const TuneConfig& cfg, const ModelSet& models, const PolicySpec& base_spec);

}  // namespace allocsim
