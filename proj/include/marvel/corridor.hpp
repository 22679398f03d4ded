#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace marvel::sim {

// Posted-limit values a gantry may display.
inline constexpr double kMinLimitMph = 30.0;
inline constexpr double kMaxLimitMph = 70.0;
inline constexpr double kMaxDecel = 8.0;  // m/s^2, hard braking bound

struct DriverParams {
  double desired_time_headway_s = 1.0;
  double max_accel = 1.0;      // m/s^2
  double comfort_decel = 2.0;  // m/s^2
  double jam_gap_m = 2.0;
  double free_speed_mean_mph = 72.0;
  double free_speed_std_mph = 4.0;
  double accel_exponent = 4.0;
  double vehicle_length_ft = 16.0;

  void validate() const;
};

struct Ramp {
  double merge_milepoint = 0.0;
  int ramp_lanes = 1;
};

// Mile points are measured upstream from the downstream end of the corridor,
// so index 0 is the most downstream gantry and values grow upstream.
struct CorridorLayout {
  double length_mi = 0.0;
  int lanes = 1;
  std::vector<double> gantry_milepoints;
  std::vector<double> sensor_milepoints;
  std::vector<Ramp> ramps;

  void validate() const;
  int gantry_count() const { return static_cast<int>(gantry_milepoints.size()); }

  // Gantry whose control segment (its position up to the next gantry
  // upstream, or the corridor entry for the last one) contains `milepoint`.
  std::optional<int> controlling_gantry(double milepoint) const;
};

struct RateInterval {
  double start_s = 0.0;
  double end_s = 0.0;
  double rate = 0.0;  // veh/lane/hr
};

// Piecewise-constant arrival rate; must cover the simulation horizon.
struct RateSchedule {
  std::vector<RateInterval> intervals;

  double rate_at(double t_s) const;
  void validate(double horizon_s, const std::string& what) const;
  static RateSchedule constant(double rate, double horizon_s);
};

struct DemandProfile {
  RateSchedule mainline;
  std::vector<RateSchedule> per_ramp;
};

struct MergeParams {
  double merge_zone_m = 250.0;      // acceptance region upstream of the nose
  double weave_length_m = 800.0;    // downstream stretch where merged cars move over
  double accept_headway_s = 0.3;    // lead gap acceptance, tighter than car-following
  double follower_headway_s = 0.0;  // lag gap acceptance; the new follower brakes
  double ramp_speed_mph = 45.0;
  double lane_change_cooldown_s = 3.0;
};

// External (paper-facing) view of one vehicle.
struct VehicleState {
  std::uint64_t id = 0;
  int lane = 0;
  double position_mi = 0.0;  // from the corridor entry, increasing downstream
  double speed_mph = 0.0;
  double free_speed_mph = 0.0;
  bool compliant = false;
  double length_ft = 16.0;
};

// Internal SI representation.
struct Vehicle {
  std::uint64_t id = 0;
  double x = 0.0;  // front bumper, m from entry
  double v = 0.0;  // m/s
  double free_speed = 0.0;
  double length = 0.0;
  bool compliant = false;
  int target_lane = 0;
  double weave_end = -1.0;
  double last_lane_change_s = -1e9;
};

struct Crossing {
  int detector = 0;
  double time_s = 0.0;
  double speed_mph = 0.0;
  double length_ft = 0.0;
};

struct World {
  World(CorridorLayout layout, DriverParams driver, MergeParams merge, std::uint64_t seed);

  CorridorLayout layout;
  DriverParams driver;
  MergeParams merge;
  double length_m = 0.0;
  std::vector<double> detector_x;  // one per sensor, same order as layout
  std::vector<int> detector_order;  // detector indices by increasing x

  double time_s = 0.0;
  std::vector<std::vector<Vehicle>> lanes;  // each lane sorted downstream-first
  std::vector<std::deque<Vehicle>> entry_queue;  // per mainline lane
  std::vector<std::deque<Vehicle>> ramp_queue;   // per ramp
  std::mt19937_64 rng;
  std::uint64_t next_id = 1;

  std::int64_t entered_total = 0;
  std::int64_t exited_total = 0;
  std::int64_t blocked_insertions = 0;
  std::int64_t safety_corrections = 0;
  std::int64_t last_entered = 0;  // during the most recent spawn+merge+step cycle
  std::int64_t last_exited = 0;
  std::vector<Crossing> crossings;  // produced by the most recent step

  std::size_t vehicle_count() const;
  std::vector<VehicleState> snapshot() const;
  double milepoint_of(double x_m) const;
};

// Acceleration (m/s^2) of `follower` given its leader, clamped to
// [-kMaxDecel, max_accel]. Throws std::invalid_argument on a non-positive gap.
double car_following_accel(const VehicleState& follower, const VehicleState* leader,
                           const DriverParams& params, double desired_speed_mph);

// Same law in SI units; gap is bumper-to-bumper in meters.
double idm_accel(double v, double desired_v, std::optional<double> gap, double leader_v,
                 const DriverParams& params);

// Poisson arrivals on every mainline lane and ramp; mainline arrivals are
// inserted at the entry when the boundary gap is safe, otherwise carried over.
void spawn_vehicles(World& world, const DemandProfile& demand, double compliance_rate,
                    double dt);

// Gap-acceptance insertion of queued ramp vehicles into lane 0 near the nose.
void merge_onramp(World& world, int ramp);

// One car-following step plus weaving lane changes and exits.
void step_simulation(World& world, std::span<const double> posted_limits_mph, double dt);

// Empty when all ordering/gap/speed invariants hold, else a description.
std::optional<std::string> check_invariants(const World& world);

}  // namespace marvel::sim
