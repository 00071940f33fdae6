#include "allocsim/error.hpp"
#include "allocsim/tuning.hpp"

#include "doctest.h"
#include "support.hpp"

#include <algorithm>
#include <set>

using namespace allocsim;
using testing::half_year_covariate;
using testing::half_year_waitlist_model;
using testing::make_donor;
using testing::make_patient;
using testing::step_model;

namespace {

// An O patient (benefit 5) and an AB patient (benefit 5.5); an O donor
// arrives first, then an A donor who can only serve the AB patient.
Cohort scarce_ab_cohort() {
  Cohort c;
  c.schema = CohortSchema{1, 1, 1};
  c.horizon_days = 10.0;
  c.events = {{0.0, make_patient(1, BloodType::O, 4, 0.0, GeoPoint(40, -75), half_year_covariate(5.0))},
              {0.0, make_patient(2, BloodType::AB, 4, 0.0, GeoPoint(40, -75), half_year_covariate(4.5))},
              {1.0, make_donor(10, BloodType::O, GeoPoint(40, -75), 1.0)},
              {2.0, make_donor(11, BloodType::A, GeoPoint(40, -75), 2.0)}};
  return c;
}

ModelSet hand_models() {
  return ModelSet{step_model(Vector::Zero(3), 10.0), half_year_waitlist_model(), nullptr};
}

PolicySpec potential_spec() {
  PolicySpec s;
  s.kind = PolicyKind::Potential;
  return s;
}

}  // namespace

TEST_CASE("Sobol points stratify every axis") {
  for (std::uint64_t seed : {0u, 1u, 99u}) {
    SobolSequence sobol(seed);
    std::array<std::set<int>, 4> bins;
    for (int i = 0; i < 64; ++i) {
      const auto u = sobol.next();
      for (std::size_t d = 0; d < 4; ++d) {
        CHECK(u[d] >= 0.0);
        CHECK(u[d] < 1.0);
        bins[d].insert(static_cast<int>(u[d] * 64));
      }
    }
    for (const auto& b : bins) CHECK(b.size() == 64);
  }
  SobolSequence a(5), b(5), c(6);
  CHECK(a.next() == b.next());
  CHECK(a.next() != c.next());
}

TEST_CASE("evaluate_theta contracts") {
  const std::vector<Cohort> cohorts{scarce_ab_cohort()};
  const ModelSet m = hand_models();

  SimConfig myopic;
  myopic.policy.kind = PolicyKind::Myopic;
  myopic.acceptance.always_accept = true;
  myopic.horizon_days = 10.0;
  const double baseline = run(myopic, cohorts[0], m).total_life_years;
  CHECK(evaluate_theta({0, 0, 0, 0}, cohorts, m, potential_spec()) == baseline);
  CHECK(baseline == doctest::Approx(5.5));

  // Hand replay with theta_AB = -3: scores 5 (O) vs 2.5 (AB), so the O donor
  // goes to the O patient and the A donor to the AB patient.
  const double held_back = evaluate_theta({0, 0, 0, -3}, cohorts, m, potential_spec());
  CHECK(held_back == doctest::Approx(10.5));
  CHECK(held_back == evaluate_theta({0, 0, 0, -3}, cohorts, m, potential_spec()));

  const std::vector<Cohort> twice{scarce_ab_cohort(), scarce_ab_cohort()};
  CHECK(evaluate_theta({0, 0, 0, -3}, twice, m, potential_spec()) == doctest::Approx(21.0));

  PolicySpec wrong;
  wrong.kind = PolicyKind::Myopic;
  CHECK_THROWS_AS(evaluate_theta({0, 0, 0, 0}, cohorts, m, wrong), Error);
}

TEST_CASE("tuning with a single evaluation returns the zero vector") {
  TuneConfig cfg;
  cfg.training_cohorts = {scarce_ab_cohort()};
  cfg.budget_evals = 1;
  const TuneResult r = tune_potentials(cfg, hand_models(), potential_spec());
  CHECK(r.best_theta == PotentialVector{});
  CHECK(r.best_score == doctest::Approx(5.5));
  CHECK(r.evaluation_log.size() == 1);
}

TEST_CASE("tuning learns to hold back AB patients on the engineered cohort") {
  for (bool refine : {true, false}) {
    TuneConfig cfg;
    cfg.training_cohorts = {scarce_ab_cohort()};
    cfg.local_refine = refine;
    cfg.seed = 3;
    const TuneResult r = tune_potentials(cfg, hand_models(), potential_spec());
    CHECK(r.evaluation_log.size() <= 50);
    CHECK(r.best_score == doctest::Approx(10.5));
    CHECK(r.best_theta[3] < r.best_theta[0]);
    double best = r.evaluation_log.front().score;
    for (const auto& e : r.evaluation_log) {
      best = std::max(best, e.score);
      for (std::size_t d = 0; d < 4; ++d) {
        CHECK(e.theta[d] >= -5.0);
        CHECK(e.theta[d] <= 5.0);
      }
    }
    CHECK(r.best_score == best);
    CHECK(r.evaluation_log.front().theta == PotentialVector{});
  }
}

TEST_CASE("tuning is reproducible and never regresses") {
  CohortConfig cc = CohortConfig::one_month_preset(31);
  cc.initial_waitlist_size = 120;
  const Cohort cohort = generate(cc);
  const ModelSet m = models_from_truth(*cohort.truth);
  PolicySpec spec = potential_spec();
  spec.max_distance_nm = 1000.0;
  TuneConfig cfg;
  cfg.training_cohorts = {cohort};
  cfg.budget_evals = 12;
  cfg.seed = 8;
  const TuneResult a = tune_potentials(cfg, m, spec);
  const TuneResult b = tune_potentials(cfg, m, spec);
  REQUIRE(a.evaluation_log.size() == b.evaluation_log.size());
  for (std::size_t i = 0; i < a.evaluation_log.size(); ++i) {
    CHECK(a.evaluation_log[i].theta == b.evaluation_log[i].theta);
    CHECK(a.evaluation_log[i].score == b.evaluation_log[i].score);
  }
  CHECK(a.best_score >= evaluate_theta({0, 0, 0, 0}, cfg.training_cohorts, m, spec));
}

TEST_CASE("tune config validation") {
  TuneConfig cfg;
  cfg.budget_evals = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.budget_evals = 5;
  cfg.search_box[2] = {1.0, -1.0};
  CHECK_THROWS_AS(cfg.validate(), Error);
}
