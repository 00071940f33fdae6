#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string_view>

namespace allocsim {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

using PatientId = std::uint64_t;
using DonorId = std::uint64_t;

enum class BloodType : std::uint8_t { O = 0, A = 1, B = 2, AB = 3 };

inline constexpr std::array<BloodType, 4> kBloodTypes = {
    BloodType::O, BloodType::A, BloodType::B, BloodType::AB};

enum class BloodMatch : std::uint8_t { Primary, Secondary, Incompatible };

std::string_view to_string(BloodType bt);
std::string_view to_string(BloodMatch m);
/// Throws Error(ParseError) on anything other than O, A, B, AB.
BloodType parse_blood_type(std::string_view text);

constexpr std::size_t index_of(BloodType bt) { return static_cast<std::size_t>(bt); }

/// ABO compatibility grade for a donor/recipient pair.
///   donor O  -> O, B primary; A, AB secondary
///   donor A  -> A, AB primary
///   donor B  -> B, AB primary
///   donor AB -> AB primary
constexpr BloodMatch blood_match(BloodType donor, BloodType patient) {
  switch (donor) {
    case BloodType::O:
      return (patient == BloodType::O || patient == BloodType::B) ? BloodMatch::Primary
                                                                  : BloodMatch::Secondary;
    case BloodType::A:
      return (patient == BloodType::A || patient == BloodType::AB) ? BloodMatch::Primary
                                                                   : BloodMatch::Incompatible;
    case BloodType::B:
      return (patient == BloodType::B || patient == BloodType::AB) ? BloodMatch::Primary
                                                                   : BloodMatch::Incompatible;
    case BloodType::AB:
      return patient == BloodType::AB ? BloodMatch::Primary : BloodMatch::Incompatible;
  }
  return BloodMatch::Incompatible;
}

constexpr bool compatible(BloodType donor, BloodType patient) {
  return blood_match(donor, patient) != BloodMatch::Incompatible;
}

/// Latitude/longitude in degrees; ranges checked on construction.
class GeoPoint {
 public:
  GeoPoint() = default;
  GeoPoint(double latitude, double longitude);

  double latitude() const { return lat_; }
  double longitude() const { return lon_; }

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;

 private:
  double lat_ = 0.0;
  double lon_ = 0.0;
};

/// Mean Earth radius in nautical miles.
inline constexpr double kEarthRadiusNm = 3440.065;

/// Haversine great-circle distance on a sphere of the given radius.
template <typename Scalar>
Scalar haversine(Scalar lat1_deg, Scalar lon1_deg, Scalar lat2_deg, Scalar lon2_deg,
                 Scalar radius) {
  using std::asin;
  using std::cos;
  using std::min;
  using std::sin;
  using std::sqrt;
  const Scalar to_rad = std::numbers::pi_v<Scalar> / Scalar(180);
  const Scalar phi1 = lat1_deg * to_rad;
  const Scalar phi2 = lat2_deg * to_rad;
  const Scalar dphi = (lat2_deg - lat1_deg) * to_rad;
  const Scalar dlambda = (lon2_deg - lon1_deg) * to_rad;
  const Scalar s_phi = sin(dphi / Scalar(2));
  const Scalar s_lambda = sin(dlambda / Scalar(2));
  Scalar h = s_phi * s_phi + cos(phi1) * cos(phi2) * s_lambda * s_lambda;
  h = min(h, Scalar(1));
  return Scalar(2) * radius * asin(sqrt(h));
}

inline double distance_nm(const GeoPoint& a, const GeoPoint& b) {
  return haversine(a.latitude(), a.longitude(), b.latitude(), b.longitude(), kEarthRadiusNm);
}

struct Patient {
  PatientId id = 0;
  BloodType blood_type = BloodType::O;
  int status = 6;  // 1 most urgent .. 6 least urgent
  double listing_time = 0.0;
  GeoPoint center;
  Vector waitlist_covariates;
  Vector graft_covariates;
  /// Latent ground truth; stripped before a patient reaches any policy.
  std::optional<double> death_time;
  bool active = true;

  /// Throws Error(InvalidArgument) on a bad status or death before listing.
  void validate() const;
};

struct Donor {
  DonorId id = 0;
  BloodType blood_type = BloodType::O;
  GeoPoint location;
  double arrival_time = 0.0;
  bool is_dbd = true;
  Vector donor_covariates;
};

bool operator==(const Patient& a, const Patient& b);
bool operator==(const Donor& a, const Donor& b);

}  // namespace allocsim
