#pragma once

#include <stdexcept>
#include <string>

namespace marvel {

// Conversions live at the API boundary; the simulator works in SI.
inline constexpr double kMetersPerMile = 1609.344;
inline constexpr double kMetersPerFoot = 0.3048;
inline constexpr double kMpsPerMph = 0.44704;

constexpr double mph_to_mps(double mph) { return mph * kMpsPerMph; }
constexpr double mps_to_mph(double mps) { return mps / kMpsPerMph; }
constexpr double miles_to_meters(double mi) { return mi * kMetersPerMile; }
constexpr double meters_to_miles(double m) { return m / kMetersPerMile; }
constexpr double feet_to_meters(double ft) { return ft * kMetersPerFoot; }
constexpr double meters_to_feet(double m) { return m / kMetersPerFoot; }

// Thrown for malformed configs or input files. The CLI maps it to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace marvel
