#pragma once

#include "allocsim/acceptance.hpp"
#include "allocsim/cohort.hpp"
#include "allocsim/policies.hpp"
#include "allocsim/rng.hpp"
#include "allocsim/survival.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace allocsim {

struct SimConfig {
  double horizon_days = 30.0;
  PolicySpec policy;
  AcceptancePolicyConfig acceptance;
  int batch_size = 1;  // B; 1 disables batching
  double batch_window_hours = 48.0;
  std::uint64_t seed = 0;
  int replications = 1;

  void validate() const;
};

/// Models shared read-only by every run.
struct ModelSet {
  CoxModel graft;
  CoxModel waitlist;
  std::shared_ptr<const AcceptancePredictor> acceptance;

  SurvivalModels survival() const { return {graft, waitlist}; }
};

/// Builds a ModelSet from a cohort's ground truth.
ModelSet models_from_truth(const GroundTruth& truth);

struct TransplantRecord {
  DonorId donor_id = 0;
  PatientId patient_id = 0;
  double time_days = 0.0;
  double delta_years = 0.0;

  friend bool operator==(const TransplantRecord&, const TransplantRecord&) = default;
};

struct SimResult {
  double total_life_years = 0.0;
  std::vector<TransplantRecord> transplants;
  std::size_t discarded_donors = 0;
  std::size_t waitlist_deaths = 0;
  std::size_t offers_made = 0;
  std::size_t offers_rejected = 0;

  friend bool operator==(const SimResult&, const SimResult&) = default;
};

struct CascadeOutcome {
  std::optional<TransplantRecord> transplant;
  std::size_t offers_made = 0;
  std::size_t offers_rejected = 0;
};

/// Offers the donor down the policy's ordering. Each eligible candidate
/// accepts with probability adjusted_probability(p, alpha), one uniform draw
/// per offer in cascade order; always_accept skips the draws.
CascadeOutcome offer_cascade(const Donor& donor, std::span<const Patient> waitlist,
                             const ModelSet& models, const PolicySpec& policy,
                             const AcceptancePolicyConfig& acceptance, Rng& rng);

/// Runs one replication seeded with config.seed. Throws Error(SchemaMismatch)
/// when model dimensions disagree with the cohort, Error(EventOutOfRange) for
/// events outside [0, horizon].
SimResult run(const SimConfig& config, const Cohort& cohort, const ModelSet& models);

struct ReplicationSummary {
  double mean = 0.0;
  double std_dev = 0.0;  // sample standard deviation; 0 for one replication
  std::vector<std::uint64_t> seeds;
  std::vector<double> totals;
};

/// Mean and sample standard deviation of a set of values.
ReplicationSummary summarize(std::span<const double> totals);

/// Full results of replications seeded config.seed + i, in seed order.
std::vector<SimResult> run_replications(const SimConfig& config, const Cohort& cohort,
                                        const ModelSet& models, int threads = 1);

/// Replication i runs with seed config.seed + i. Runs may execute on up to
/// `threads` workers; results do not depend on the thread count.
ReplicationSummary replicate(const SimConfig& config, const Cohort& cohort, const ModelSet& models,
                             int threads = 1);

void write_transplants_csv(std::ostream& out, const SimResult& result);

}  // namespace allocsim
