#pragma once

#include "allocsim/domain.hpp"
#include "allocsim/survival.hpp"

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace allocsim {

enum class PolicyKind { StatusQuo, Myopic, Potential };

std::string_view to_string(PolicyKind kind);
PolicyKind parse_policy_kind(std::string_view text);

struct PolicySpec {
  PolicyKind kind = PolicyKind::Myopic;
  bool delta_tiebreak = false;  // StatusQuo only
  bool delta_exclude = false;   // StatusQuo only
  double urgency_weight = 1.0;  // W >= 1, scales waitlist survival
  std::optional<double> max_distance_nm;  // nullopt = unbounded
  std::array<double, 4> potential_theta{};  // indexed O, A, B, AB

  void validate() const;
  bool within_distance(double nm) const { return !max_distance_nm || nm <= *max_distance_nm; }
};

struct SurvivalModels {
  const CoxModel& graft;
  const CoxModel& waitlist;
};

struct RankedCandidate {
  PatientId patient_id = 0;
  std::optional<int> tier;
  double delta_years = 0.0;
  double score = 0.0;
  bool eligible_to_transplant = false;
};

/// Estimated life-years gained: GraftSurv - W * WaitlistSurv.
double delta(const Donor& donor, const Patient& patient, const CoxModel& graft_model,
             const CoxModel& waitlist_model, double urgency_weight = 1.0);

/// Status-quo priority tier (1 = highest, 68 = lowest); nullopt when the
/// blood types are incompatible.
std::optional<int> tier_lookup(int status, BloodMatch match, double distance_nm);

std::vector<RankedCandidate> status_quo_order(std::span<const Patient> waitlist, const Donor& donor,
                                              const SurvivalModels& models, const PolicySpec& spec);
std::vector<RankedCandidate> myopic_order(std::span<const Patient> waitlist, const Donor& donor,
                                          const SurvivalModels& models, const PolicySpec& spec);
std::vector<RankedCandidate> potential_order(std::span<const Patient> waitlist, const Donor& donor,
                                             const SurvivalModels& models, const PolicySpec& spec);

/// Dispatches on spec.kind.
std::vector<RankedCandidate> rank_candidates(std::span<const Patient> waitlist, const Donor& donor,
                                             const SurvivalModels& models, const PolicySpec& spec);

}  // namespace allocsim
