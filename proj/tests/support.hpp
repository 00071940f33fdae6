#pragma once

#include "allocsim/cohort.hpp"
#include "allocsim/domain.hpp"
#include "allocsim/survival.hpp"

#include <cmath>
#include <filesystem>
#include <string>

namespace testing {

using namespace allocsim;

inline Patient make_patient(PatientId id, BloodType bt, int status = 6, double listing = 0.0,
                            GeoPoint center = GeoPoint(40.0, -75.0), Vector wl = Vector::Zero(1),
                            Vector gr = Vector::Zero(1)) {
  Patient p;
  p.id = id;
  p.blood_type = bt;
  p.status = status;
  p.listing_time = listing;
  p.center = center;
  p.waitlist_covariates = std::move(wl);
  p.graft_covariates = std::move(gr);
  return p;
}

inline Donor make_donor(DonorId id, BloodType bt, GeoPoint at = GeoPoint(40.0, -75.0), double arrival = 0.0,
                        Vector cov = Vector::Zero(1), bool dbd = true) {
  Donor d;
  d.id = id;
  d.blood_type = bt;
  d.location = at;
  d.arrival_time = arrival;
  d.donor_covariates = std::move(cov);
  d.is_dbd = dbd;
  return d;
}

// A one-step baseline with H0 = 1 from `years` on: the median at theta'x = 0
// is exactly that many years.
inline CoxModel step_model(Vector coefficients, double years) {
  CoxModel m;
  m.covariate_dim = static_cast<int>(coefficients.size());
  m.coefficients = std::move(coefficients);
  m.baseline_times = {years * 365.25};
  m.baseline_cumhaz = {1.0};
  return m;
}

// Waitlist model on a half-year grid, H0(k/2 years) = ln2 * k / 20, with a
// unit coefficient on the single waitlist covariate. A patient carrying
// half_year_covariate(m) has median waitlist survival of exactly m years.
inline CoxModel half_year_waitlist_model() {
  CoxModel m;
  m.covariate_dim = 1;
  m.coefficients = Vector::Ones(1);
  for (int k = 1; k <= 400; ++k) {
    m.baseline_times.push_back(k * 0.5 * 365.25);
    m.baseline_cumhaz.push_back(std::log(2.0) * k / 20.0);
  }
  return m;
}

inline Vector half_year_covariate(double median_years) {
  return Vector::Constant(1, std::log(20.0 / (2.0 * median_years - 0.5)));
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::path(ALLOCSIM_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
