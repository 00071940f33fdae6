#include "allocsim/policies.hpp"

#include "allocsim/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace allocsim {

namespace {

constexpr double kAny = std::numeric_limits<double>::infinity();

struct TierRow {
  int status;
  BloodMatch match;
  double max_nm;
};

constexpr BloodMatch P = BloodMatch::Primary;
constexpr BloodMatch S = BloodMatch::Secondary;

// Rows in tier order; tier k is kTiers[k - 1].
constexpr std::array<TierRow, 68> kTiers = {{
    {1, P, 500},  {1, S, 500},  {2, P, 500},  {2, S, 500},  {3, P, 250},  {3, S, 250},
    {1, P, 1000}, {1, S, 1000}, {2, P, 1000}, {2, S, 1000}, {4, P, 250},  {4, S, 250},
    {3, P, 500},  {3, S, 500},  {5, P, 250},  {5, S, 250},  {3, P, 1000}, {3, S, 1000},
    {6, P, 250},  {6, S, 250},  {1, P, 1500}, {1, S, 1500}, {2, P, 1500}, {2, S, 1500},
    {3, P, 1500}, {3, S, 1500}, {4, P, 500},  {4, S, 500},  {5, P, 500},  {5, S, 500},
    {6, P, 500},  {6, S, 500},  {1, P, 2500}, {1, S, 2500}, {2, P, 2500}, {2, S, 2500},
    {3, P, 2500}, {3, S, 2500}, {4, P, 1000}, {4, S, 1000}, {5, P, 1000}, {5, S, 1000},
    {6, P, 1000}, {6, S, 1000}, {1, P, kAny}, {1, S, kAny}, {2, P, kAny}, {2, S, kAny},
    {3, P, kAny}, {3, S, kAny}, {4, P, 1500}, {4, S, 1500}, {5, P, 1500}, {5, S, 1500},
    {6, P, 1500}, {6, S, 1500}, {4, P, 2500}, {4, S, 2500}, {5, P, 2500}, {5, S, 2500},
    {6, P, 2500}, {6, S, 2500}, {4, P, kAny}, {4, S, kAny}, {5, P, kAny}, {5, S, kAny},
    {6, P, kAny}, {6, S, kAny},
}};

struct Entry {
  RankedCandidate candidate;
  double listing_time;
};

bool earlier_then_id(const Entry& a, const Entry& b) {
  if (a.listing_time != b.listing_time) return a.listing_time < b.listing_time;
  return a.candidate.patient_id < b.candidate.patient_id;
}

std::vector<RankedCandidate> unwrap(std::vector<Entry>&& entries) {
  std::vector<RankedCandidate> out;
  out.reserve(entries.size());
  for (auto& e : entries) out.push_back(e.candidate);
  return out;
}

// Blood-compatible candidates within the distance bound, scored by delta
// plus an optional per-blood-type potential. Transplant requires delta > 0.
std::vector<RankedCandidate> score_order(std::span<const Patient> waitlist, const Donor& donor,
                                         const SurvivalModels& models, const PolicySpec& spec,
                                         const std::array<double, 4>* potential) {
  std::vector<Entry> entries;
  for (const auto& p : waitlist) {
    if (!p.active || !compatible(donor.blood_type, p.blood_type)) continue;
    if (!spec.within_distance(distance_nm(donor.location, p.center))) continue;
    const double d = delta(donor, p, models.graft, models.waitlist, spec.urgency_weight);
    const double bonus = potential ? (*potential)[index_of(p.blood_type)] : 0.0;
    entries.push_back({{p.id, std::nullopt, d, d + bonus, d > 0.0}, p.listing_time});
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.candidate.score != b.candidate.score) return a.candidate.score > b.candidate.score;
    return earlier_then_id(a, b);
  });
  return unwrap(std::move(entries));
}

}  // namespace

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::StatusQuo: return "status_quo";
    case PolicyKind::Myopic: return "myopic";
    case PolicyKind::Potential: return "potential";
  }
  return "?";
}

PolicyKind parse_policy_kind(std::string_view text) {
  if (text == "status_quo") return PolicyKind::StatusQuo;
  if (text == "myopic") return PolicyKind::Myopic;
  if (text == "potential") return PolicyKind::Potential;
  throw Error(ErrorCode::ConfigError, "unknown policy kind '" + std::string(text) + "'");
}

void PolicySpec::validate() const {
  if (!(urgency_weight >= 1.0) || !std::isfinite(urgency_weight))
    throw Error(ErrorCode::InvalidArgument, "urgency weight W must be >= 1");
  if (max_distance_nm && !(*max_distance_nm > 0.0))
    throw Error(ErrorCode::InvalidArgument, "max_distance_nm must be positive");
  for (double t : potential_theta)
    if (!std::isfinite(t)) throw Error(ErrorCode::InvalidArgument, "potential theta must be finite");
}

double delta(const Donor& donor, const Patient& patient, const CoxModel& graft_model,
             const CoxModel& waitlist_model, double urgency_weight) {
  return graft_surv(graft_model, donor, patient) -
         urgency_weight * waitlist_surv(waitlist_model, patient);
}

std::optional<int> tier_lookup(int status, BloodMatch match, double distance) {
  if (status < 1 || status > 6)
    throw Error(ErrorCode::InvalidArgument, "status must be in 1..6");
  if (match == BloodMatch::Incompatible) return std::nullopt;
  for (std::size_t k = 0; k < kTiers.size(); ++k) {
    const auto& row = kTiers[k];
    if (row.status == status && row.match == match && distance <= row.max_nm)
      return static_cast<int>(k + 1);
  }
  return std::nullopt;  // unreachable: every (status, match) has an "Any" row
}

std::vector<RankedCandidate> status_quo_order(std::span<const Patient> waitlist, const Donor& donor,
                                              const SurvivalModels& models,
                                              const PolicySpec& spec) {
  std::vector<Entry> entries;
  for (const auto& p : waitlist) {
    if (!p.active) continue;
    const auto tier = tier_lookup(p.status, blood_match(donor.blood_type, p.blood_type),
                                  distance_nm(donor.location, p.center));
    if (!tier) continue;
    const double d = delta(donor, p, models.graft, models.waitlist, spec.urgency_weight);
    const bool eligible = !spec.delta_exclude || d >= 0.0;
    entries.push_back({{p.id, tier, d, static_cast<double>(*tier), eligible}, p.listing_time});
  }
  std::sort(entries.begin(), entries.end(), [&](const Entry& a, const Entry& b) {
    if (*a.candidate.tier != *b.candidate.tier) return *a.candidate.tier < *b.candidate.tier;
    if (spec.delta_tiebreak && a.candidate.delta_years != b.candidate.delta_years)
      return a.candidate.delta_years > b.candidate.delta_years;
    return earlier_then_id(a, b);
  });
  return unwrap(std::move(entries));
}

std::vector<RankedCandidate> myopic_order(std::span<const Patient> waitlist, const Donor& donor,
                                          const SurvivalModels& models, const PolicySpec& spec) {
  return score_order(waitlist, donor, models, spec, nullptr);
}

std::vector<RankedCandidate> potential_order(std::span<const Patient> waitlist, const Donor& donor,
                                             const SurvivalModels& models,
                                             const PolicySpec& spec) {
  return score_order(waitlist, donor, models, spec, &spec.potential_theta);
}

std::vector<RankedCandidate> rank_candidates(std::span<const Patient> waitlist, const Donor& donor,
                                             const SurvivalModels& models, const PolicySpec& spec) {
  switch (spec.kind) {
    case PolicyKind::StatusQuo: return status_quo_order(waitlist, donor, models, spec);
    case PolicyKind::Myopic: return myopic_order(waitlist, donor, models, spec);
    case PolicyKind::Potential: return potential_order(waitlist, donor, models, spec);
  }
  return {};
}

}  // namespace allocsim
