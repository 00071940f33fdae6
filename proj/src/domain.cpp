#include "allocsim/domain.hpp"

#include "allocsim/error.hpp"

#include <string>

namespace allocsim {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NoEvents: return "NoEvents";
    case ErrorCode::SingularHessian: return "SingularHessian";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::EmptyBaseline: return "EmptyBaseline";
    case ErrorCode::NoComparablePairs: return "NoComparablePairs";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::EventOutOfRange: return "EventOutOfRange";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

std::string_view to_string(BloodType bt) {
  switch (bt) {
    case BloodType::O: return "O";
    case BloodType::A: return "A";
    case BloodType::B: return "B";
    case BloodType::AB: return "AB";
  }
  return "?";
}

std::string_view to_string(BloodMatch m) {
  switch (m) {
    case BloodMatch::Primary: return "Primary";
    case BloodMatch::Secondary: return "Secondary";
    case BloodMatch::Incompatible: return "Incompatible";
  }
  return "?";
}

BloodType parse_blood_type(std::string_view text) {
  if (text == "O") return BloodType::O;
  if (text == "A") return BloodType::A;
  if (text == "B") return BloodType::B;
  if (text == "AB") return BloodType::AB;
  throw Error(ErrorCode::ParseError, "unknown blood type '" + std::string(text) + "'");
}

GeoPoint::GeoPoint(double latitude, double longitude) : lat_(latitude), lon_(longitude) {
  if (!(latitude >= -90.0 && latitude <= 90.0))
    throw Error(ErrorCode::InvalidArgument, "latitude out of [-90, 90]: " + std::to_string(latitude));
  if (!(longitude >= -180.0 && longitude <= 180.0))
    throw Error(ErrorCode::InvalidArgument,
                "longitude out of [-180, 180]: " + std::to_string(longitude));
}

void Patient::validate() const {
  if (status < 1 || status > 6)
    throw Error(ErrorCode::InvalidArgument,
                "patient " + std::to_string(id) + ": status must be in 1..6");
  if (death_time && *death_time < listing_time)
    throw Error(ErrorCode::InvalidArgument,
                "patient " + std::to_string(id) + ": death_time precedes listing_time");
}

namespace {
bool same_vector(const Vector& a, const Vector& b) {
  return a.size() == b.size() && (a.size() == 0 || a == b);
}
}  // namespace

bool operator==(const Patient& a, const Patient& b) {
  return a.id == b.id && a.blood_type == b.blood_type && a.status == b.status &&
         a.listing_time == b.listing_time && a.center == b.center &&
         same_vector(a.waitlist_covariates, b.waitlist_covariates) &&
         same_vector(a.graft_covariates, b.graft_covariates) && a.death_time == b.death_time &&
         a.active == b.active;
}

bool operator==(const Donor& a, const Donor& b) {
  return a.id == b.id && a.blood_type == b.blood_type && a.location == b.location &&
         a.arrival_time == b.arrival_time && a.is_dbd == b.is_dbd &&
         same_vector(a.donor_covariates, b.donor_covariates);
}

}  // namespace allocsim
