#pragma once

#include "allocsim/acceptance.hpp"
#include "allocsim/domain.hpp"
#include "allocsim/survival.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace allocsim {

struct CohortSchema {
  int waitlist_dim = 0;
  int donor_dim = 0;
  int graft_dim = 0;  // patient-side graft covariates

  /// Graft model input: donor ++ patient graft ++ distance.
  int graft_model_dim() const { return donor_dim + graft_dim + 1; }
  /// Acceptance model input: donor ++ patient waitlist ++ distance.
  int acceptance_model_dim() const { return donor_dim + waitlist_dim + 1; }
  std::string hash() const;

  friend bool operator==(const CohortSchema&, const CohortSchema&) = default;
};

struct CovariateUpdate {
  PatientId patient_id = 0;
  Vector waitlist_covariates;
};

struct PatientDeath {
  PatientId patient_id = 0;
};

struct CohortEvent {
  double time = 0.0;
  std::variant<Patient, Donor, CovariateUpdate, PatientDeath> payload;
};

/// Processing rank at equal times: death, covariate update, patient arrival,
/// donor arrival.
int event_priority(const CohortEvent& e);
std::uint64_t event_subject_id(const CohortEvent& e);
bool event_before(const CohortEvent& a, const CohortEvent& b);

bool operator==(const CohortEvent& a, const CohortEvent& b);

struct GroundTruth {
  CoxModel graft;
  CoxModel waitlist;
  AcceptanceModel acceptance;
};

struct Cohort {
  CohortSchema schema;
  double horizon_days = 0.0;
  std::vector<CohortEvent> events;  // time-sorted
  std::optional<GroundTruth> truth;
  bool resorted = false;  // input rows were out of time order and got sorted

  std::vector<Patient> patients() const;
  std::vector<Donor> donors() const;
  /// Throws when events are unsorted or reference unknown patients.
  void validate() const;
};

bool operator==(const Cohort& a, const Cohort& b);

struct CohortConfig {
  double patient_rate_per_day = 3.0;
  double donor_rate_per_day = 3.3;
  double dbd_fraction = 0.8;
  std::array<double, 4> blood_type_dist{0.44, 0.42, 0.10, 0.04};  // O, A, B, AB
  std::array<double, 6> status_dist{0.05, 0.15, 0.15, 0.30, 0.05, 0.30};
  /// Correlation between the latent urgency draw behind the status and the
  /// true waitlist risk score; 0 makes status independent of risk.
  double status_risk_correlation = 0.8;
  std::vector<GeoPoint> center_locations;  // empty = built-in US list
  double donor_location_jitter_deg = 1.0;
  CohortSchema dims{2, 1, 1};
  std::vector<double> true_waitlist_theta{1.0, -0.5};
  std::vector<double> true_graft_theta{-0.3, 0.3, 0.15};
  double baseline_rate = 9.5e-4;         // waitlist hazard per day at x = 0
  double graft_baseline_rate = 1.9e-4;   // graft failure hazard per day at x = 0
  double acceptance_intercept = -1.0;
  std::vector<double> acceptance_weights{-0.5, 0.3, 0.2, -0.8};
  int initial_waitlist_size = 0;
  double listing_history_days = 730.0;   // initial patients listed up to this long ago
  double covariate_update_rate = 0.0;    // per active patient per day
  double covariate_update_sd = 0.25;
  double truth_grid_step_days = 1.0;
  double truth_grid_max_days = 36525.0;
  double horizon_days = 30.0;
  std::uint64_t seed = 1;

  void validate() const;

  /// One synthetic month with roughly 100 donors and a standing waitlist.
  static CohortConfig one_month_preset(std::uint64_t seed = 1);
};

std::vector<GeoPoint> default_center_locations();

GroundTruth ground_truth(const CohortConfig& config);

Cohort generate(const CohortConfig& config);

struct LoadOptions {
  std::optional<std::filesystem::path> updates_path;
  std::optional<double> horizon_days;  // default: latest event time
};

/// Reads the patient and donor CSVs (and optional covariate updates).
/// Throws Error(ParseError) naming line and column, Error(SchemaMismatch) on
/// header disagreement.
Cohort load_csv(const std::filesystem::path& patients_path, const std::filesystem::path& donors_path,
                const CohortSchema& schema, const LoadOptions& options = {});

void save_csv(const Cohort& cohort, const std::filesystem::path& patients_path,
              const std::filesystem::path& donors_path,
              const std::optional<std::filesystem::path>& updates_path = std::nullopt);

/// patients.csv, donors.csv, updates.csv and schema.json in one directory.
void save_cohort_dir(const Cohort& cohort, const std::filesystem::path& dir);
Cohort load_cohort_dir(const std::filesystem::path& dir);

/// Time from observation start to death or censoring, one sample per patient,
/// covariates as at listing. Observation starts at max(listing_time, 0).
/// Patients in `transplanted` are censored at their transplant time.
std::vector<SurvivalSample> waitlist_training_data(
    const Cohort& cohort, std::span<const std::pair<PatientId, double>> transplanted = {});

/// Random blood-compatible pairs with graft failure times drawn from the
/// ground-truth graft model and uniform administrative censoring.
std::vector<SurvivalSample> graft_training_data(const Cohort& cohort, std::size_t n_pairs,
                                                double follow_up_days, std::uint64_t seed);

struct LabeledPairs {
  Matrix features;
  std::vector<int> labels;
};

/// Random blood-compatible pairs labeled by Bernoulli draws from the
/// ground-truth acceptance model.
LabeledPairs acceptance_training_data(const Cohort& cohort, std::size_t n_pairs, std::uint64_t seed);

}  // namespace allocsim
