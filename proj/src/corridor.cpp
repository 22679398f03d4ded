#include "marvel/corridor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "marvel/units.hpp"

namespace marvel::sim {

namespace {

constexpr double kMinBumperGap = 0.25;  // m, floor enforced by the safety projection

bool is_legal_limit(double mph) {
  for (double v = kMinLimitMph; v <= kMaxLimitMph; v += 10.0) {
    if (mph == v) return true;
  }
  return false;
}

double sample_free_speed_mph(const DriverParams& p, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(p.free_speed_mean_mph, p.free_speed_std_mph);
  for (;;) {
    const double s = dist(rng);
    if (s >= 50.0 && s <= 85.0) return s;
  }
}

Vehicle sample_vehicle(World& w, double compliance_rate) {
  Vehicle v;
  v.id = w.next_id++;
  v.free_speed = mph_to_mps(sample_free_speed_mph(w.driver, w.rng));
  v.length = feet_to_meters(w.driver.vehicle_length_ft);
  std::bernoulli_distribution comply(compliance_rate);
  v.compliant = comply(w.rng);
  return v;
}

// Desired speed after applying the posted limit of the vehicle's segment.
double desired_speed(const World& w, const Vehicle& v, std::span<const double> limits_mph) {
  if (!v.compliant || limits_mph.empty()) return v.free_speed;
  const auto g = w.layout.controlling_gantry(w.milepoint_of(v.x));
  if (!g) return v.free_speed;
  return std::min(v.free_speed, mph_to_mps(limits_mph[*g]));
}

// Index in a downstream-first lane of the first vehicle at or upstream of x.
std::size_t first_at_or_behind(const std::vector<Vehicle>& lane, double x) {
  auto it = std::partition_point(lane.begin(), lane.end(),
                                 [x](const Vehicle& o) { return o.x > x; });
  return static_cast<std::size_t>(it - lane.begin());
}

}  // namespace

void DriverParams::validate() const {
  const double vals[] = {desired_time_headway_s, max_accel,          comfort_decel,
                         jam_gap_m,              free_speed_mean_mph, free_speed_std_mph,
                         accel_exponent,         vehicle_length_ft};
  for (double v : vals) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ValidationError("driver parameters must be finite and strictly positive");
    }
  }
}

void CorridorLayout::validate() const {
  if (!(length_mi > 0.0)) throw ValidationError("corridor length must be positive");
  if (lanes < 1) throw ValidationError("corridor needs at least one lane");
  if (gantry_milepoints.empty()) throw ValidationError("corridor needs at least one gantry");
  if (sensor_milepoints.size() != gantry_milepoints.size()) {
    throw ValidationError("exactly one sensor per gantry is required");
  }
  for (std::size_t i = 0; i < gantry_milepoints.size(); ++i) {
    const double g = gantry_milepoints[i];
    if (g < 0.0 || g > length_mi) throw ValidationError("gantry outside the corridor");
    if (i > 0 && !(g > gantry_milepoints[i - 1])) {
      throw ValidationError("gantry mile points must increase upstream");
    }
    const double s = sensor_milepoints[i];
    if (s < g - 1e-9 || s > g + 0.2 + 1e-9 || s > length_mi) {
      std::ostringstream os;
      os << "sensor " << i << " at " << s << " is not within 0.2 mi upstream of its gantry";
      throw ValidationError(os.str());
    }
  }
  for (const auto& r : ramps) {
    if (r.merge_milepoint < 0.0 || r.merge_milepoint > length_mi) {
      throw ValidationError("ramp merge outside the corridor");
    }
    if (r.ramp_lanes < 1) throw ValidationError("ramp needs at least one lane");
  }
}

std::optional<int> CorridorLayout::controlling_gantry(double milepoint) const {
  auto it = std::upper_bound(gantry_milepoints.begin(), gantry_milepoints.end(), milepoint);
  if (it == gantry_milepoints.begin()) return std::nullopt;
  return static_cast<int>(it - gantry_milepoints.begin()) - 1;
}

double RateSchedule::rate_at(double t_s) const {
  for (const auto& iv : intervals) {
    if (t_s >= iv.start_s && t_s < iv.end_s) return iv.rate;
  }
  return intervals.empty() ? 0.0 : intervals.back().rate;
}

void RateSchedule::validate(double horizon_s, const std::string& what) const {
  if (intervals.empty()) throw ValidationError(what + ": demand schedule is empty");
  double cursor = 0.0;
  for (const auto& iv : intervals) {
    if (!(iv.rate >= 0.0) || !std::isfinite(iv.rate)) {
      throw ValidationError(what + ": demand rates must be finite and >= 0");
    }
    if (std::abs(iv.start_s - cursor) > 1e-9 || !(iv.end_s > iv.start_s)) {
      throw ValidationError(what + ": demand intervals must be contiguous from t=0");
    }
    cursor = iv.end_s;
  }
  if (cursor + 1e-9 < horizon_s) {
    throw ValidationError(what + ": demand intervals do not cover the horizon");
  }
}

RateSchedule RateSchedule::constant(double rate, double horizon_s) {
  return RateSchedule{{RateInterval{0.0, horizon_s, rate}}};
}

World::World(CorridorLayout layout_in, DriverParams driver_in, MergeParams merge_in,
             std::uint64_t seed)
    : layout(std::move(layout_in)),
      driver(driver_in),
      merge(merge_in),
      rng(seed) {
  layout.validate();
  driver.validate();
  length_m = miles_to_meters(layout.length_mi);
  for (double s : layout.sensor_milepoints) {
    detector_x.push_back(miles_to_meters(layout.length_mi - s));
  }
  detector_order.resize(detector_x.size());
  for (std::size_t i = 0; i < detector_order.size(); ++i) detector_order[i] = static_cast<int>(i);
  std::sort(detector_order.begin(), detector_order.end(),
            [this](int a, int b) { return detector_x[a] < detector_x[b]; });
  lanes.resize(static_cast<std::size_t>(layout.lanes));
  entry_queue.resize(static_cast<std::size_t>(layout.lanes));
  ramp_queue.resize(layout.ramps.size());
}

std::size_t World::vehicle_count() const {
  std::size_t n = 0;
  for (const auto& l : lanes) n += l.size();
  return n;
}

std::vector<VehicleState> World::snapshot() const {
  std::vector<VehicleState> out;
  out.reserve(vehicle_count());
  for (std::size_t li = 0; li < lanes.size(); ++li) {
    for (const auto& v : lanes[li]) {
      out.push_back(VehicleState{v.id, static_cast<int>(li), meters_to_miles(v.x),
                                 mps_to_mph(v.v), mps_to_mph(v.free_speed), v.compliant,
                                 meters_to_feet(v.length)});
    }
  }
  return out;
}

double World::milepoint_of(double x_m) const { return layout.length_mi - meters_to_miles(x_m); }

double idm_accel(double v, double desired_v, std::optional<double> gap, double leader_v,
                 const DriverParams& p) {
  const double a = p.max_accel;
  const double b = p.comfort_decel;
  const double delta = p.accel_exponent;
  double acc;
  if (desired_v <= 0.0) {
    acc = -b;
  } else if (v <= desired_v) {
    const double r = v / desired_v;
    acc = a * (1.0 - (delta == 4.0 ? (r * r) * (r * r) : std::pow(r, delta)));
  } else {
    // Above the desired speed (e.g. after a limit drop) relax with comfortable
    // braking instead of the unbounded (v/v0)^delta term.
    acc = -b * (1.0 - std::pow(desired_v / v, a * delta / b));
  }
  if (gap) {
    if (!(*gap > 0.0)) throw std::invalid_argument("car-following gap must be positive");
    const double dv = v - leader_v;
    const double s_star = std::max(
        0.0, p.jam_gap_m + v * p.desired_time_headway_s + v * dv / (2.0 * std::sqrt(a * b)));
    const double ratio = s_star / *gap;
    acc -= a * ratio * ratio;
  }
  return std::clamp(acc, -kMaxDecel, a);
}

double car_following_accel(const VehicleState& follower, const VehicleState* leader,
                           const DriverParams& params, double desired_speed_mph) {
  std::optional<double> gap;
  double leader_v = 0.0;
  if (leader != nullptr) {
    gap = miles_to_meters(leader->position_mi - follower.position_mi) -
          feet_to_meters(leader->length_ft);
    leader_v = mph_to_mps(leader->speed_mph);
  }
  return idm_accel(mph_to_mps(follower.speed_mph), mph_to_mps(desired_speed_mph), gap, leader_v,
                   params);
}

void spawn_vehicles(World& w, const DemandProfile& demand, double compliance_rate, double dt) {
  if (compliance_rate < 0.0 || compliance_rate > 1.0) {
    throw std::invalid_argument("compliance rate must lie in [0, 1]");
  }
  const double lane_rate = demand.mainline.rate_at(w.time_s);
  const double lane_mean = lane_rate * dt / 3600.0;
  for (std::size_t li = 0; li < w.lanes.size(); ++li) {
    if (lane_mean > 0.0) {
      std::poisson_distribution<int> arrivals(lane_mean);
      const int n = arrivals(w.rng);
      for (int k = 0; k < n; ++k) w.entry_queue[li].push_back(sample_vehicle(w, compliance_rate));
    }
  }
  for (std::size_t r = 0; r < w.layout.ramps.size() && r < demand.per_ramp.size(); ++r) {
    const double mean =
        demand.per_ramp[r].rate_at(w.time_s) * w.layout.ramps[r].ramp_lanes * dt / 3600.0;
    if (mean <= 0.0) continue;
    std::poisson_distribution<int> arrivals(mean);
    const int n = arrivals(w.rng);
    std::uniform_int_distribution<int> lane_pick(0, w.layout.lanes - 1);
    for (int k = 0; k < n; ++k) {
      Vehicle v = sample_vehicle(w, compliance_rate);
      v.target_lane = lane_pick(w.rng);
      w.ramp_queue[r].push_back(v);
    }
  }

  // Boundary insertion: at most one vehicle per lane per step.
  for (std::size_t li = 0; li < w.lanes.size(); ++li) {
    auto& queue = w.entry_queue[li];
    if (queue.empty()) continue;
    auto& lane = w.lanes[li];
    Vehicle v = queue.front();
    v.x = 0.0;
    double speed = v.free_speed;
    if (!lane.empty()) {
      const Vehicle& last = lane.back();
      const double gap = last.x - last.length - v.x;
      speed = std::min(speed, last.v);
      if (gap < w.driver.jam_gap_m + speed * w.driver.desired_time_headway_s) {
        ++w.blocked_insertions;
        continue;
      }
    }
    v.v = speed;
    queue.pop_front();
    lane.push_back(v);
    ++w.entered_total;
    ++w.last_entered;
  }
}

void merge_onramp(World& w, int ramp) {
  const auto& r = w.layout.ramps.at(static_cast<std::size_t>(ramp));
  auto& queue = w.ramp_queue[static_cast<std::size_t>(ramp)];
  const double nose = miles_to_meters(w.layout.length_mi - r.merge_milepoint);
  const double zone_start = nose - w.merge.merge_zone_m;
  const double ramp_v = mph_to_mps(w.merge.ramp_speed_mph);
  const double s0 = w.driver.jam_gap_m;
  const double h = w.merge.accept_headway_s;
  const double h_lag = w.merge.follower_headway_s;
  auto& lane = w.lanes[0];

  for (int attempt = 0; attempt < r.ramp_lanes && !queue.empty(); ++attempt) {
    Vehicle cand = queue.front();
    bool inserted = false;
    // Scan gaps from the nose upstream; the first acceptable one wins.
    for (std::size_t k = first_at_or_behind(lane, nose + 1000.0); k <= lane.size(); ++k) {
      const Vehicle* leader = k > 0 ? &lane[k - 1] : nullptr;
      const Vehicle* follower = k < lane.size() ? &lane[k] : nullptr;
      const double v_ins = leader ? std::min(ramp_v, leader->v) : ramp_v;
      double p = nose;
      if (leader) p = std::min(p, leader->x - leader->length - (s0 + v_ins * h));
      if (p < zone_start) break;
      if (follower && follower->x >= p) continue;
      if (follower && p - cand.length - follower->x < s0 + follower->v * h_lag) continue;
      cand.x = p;
      cand.v = v_ins;
      cand.weave_end = nose + w.merge.weave_length_m;
      cand.last_lane_change_s = w.time_s;
      lane.insert(lane.begin() + static_cast<std::ptrdiff_t>(k), cand);
      inserted = true;
      break;
    }
    if (!inserted) break;
    queue.pop_front();
    ++w.entered_total;
    ++w.last_entered;
  }
}

namespace {

void weave(World& w) {
  const double s0 = w.driver.jam_gap_m;
  const double h = w.merge.accept_headway_s;
  const double h_lag = w.merge.follower_headway_s;
  for (std::size_t li = 0; li + 1 < w.lanes.size(); ++li) {
    auto& from = w.lanes[li];
    auto& to = w.lanes[li + 1];
    for (std::size_t k = 0; k < from.size();) {
      Vehicle& v = from[k];
      const bool wants = v.target_lane > static_cast<int>(li) && v.x <= v.weave_end &&
                         w.time_s - v.last_lane_change_s >= w.merge.lane_change_cooldown_s;
      if (!wants) {
        ++k;
        continue;
      }
      const std::size_t pos = first_at_or_behind(to, v.x);
      const Vehicle* leader = pos > 0 ? &to[pos - 1] : nullptr;
      const Vehicle* follower = pos < to.size() ? &to[pos] : nullptr;
      bool ok = true;
      if (leader && leader->x - leader->length - v.x < s0 + v.v * h) ok = false;
      if (follower && v.x - v.length - follower->x < s0 + follower->v * h_lag) ok = false;
      if (!ok) {
        ++k;
        continue;
      }
      Vehicle moved = v;
      moved.last_lane_change_s = w.time_s;
      from.erase(from.begin() + static_cast<std::ptrdiff_t>(k));
      to.insert(to.begin() + static_cast<std::ptrdiff_t>(pos), moved);
    }
  }
}

}  // namespace

void step_simulation(World& w, std::span<const double> posted_limits_mph, double dt) {
  if (!(dt > 0.0 && dt <= 1.0)) throw std::invalid_argument("dt must lie in (0, 1] s");
  if (posted_limits_mph.size() != w.layout.gantry_milepoints.size()) {
    throw std::invalid_argument("posted limit count must equal the gantry count");
  }
  for (double l : posted_limits_mph) {
    if (!is_legal_limit(l)) throw std::invalid_argument("posted limit outside {30,...,70}");
  }
  w.crossings.clear();
  std::vector<double> acc;
  for (auto& lane : w.lanes) {
    acc.assign(lane.size(), 0.0);
    for (std::size_t k = 0; k < lane.size(); ++k) {
      const Vehicle& v = lane[k];
      if (!std::isfinite(v.x) || !std::isfinite(v.v)) {
        throw std::invalid_argument("non-finite vehicle state");
      }
      const double v0 = desired_speed(w, v, posted_limits_mph);
      std::optional<double> gap;
      double leader_v = 0.0;
      if (k > 0) {
        gap = lane[k - 1].x - lane[k - 1].length - v.x;
        leader_v = lane[k - 1].v;
      }
      acc[k] = idm_accel(v.v, v0, gap, leader_v, w.driver);
    }
    for (std::size_t k = 0; k < lane.size(); ++k) {
      Vehicle& v = lane[k];
      const double x_old = v.x;
      double v_new = v.v + acc[k] * dt;
      double x_new;
      if (v_new < 0.0) {
        x_new = x_old - v.v * v.v / (2.0 * acc[k]);
        v_new = 0.0;
      } else {
        x_new = x_old + 0.5 * (v.v + v_new) * dt;
      }
      if (k > 0) {
        const Vehicle& leader = lane[k - 1];
        const double limit = leader.x - leader.length - kMinBumperGap;
        if (x_new > limit) {
          x_new = std::max(limit, x_old);
          v_new = std::min(v_new, leader.v);
          ++w.safety_corrections;
        }
      }
      if (x_new > x_old) {
        const double crossing_speed = mps_to_mph((x_new - x_old) / dt);
        auto d = std::upper_bound(w.detector_order.begin(), w.detector_order.end(), x_old,
                                  [&w](double x, int idx) { return x < w.detector_x[idx]; });
        for (; d != w.detector_order.end() && w.detector_x[*d] <= x_new; ++d) {
          w.crossings.push_back(
              Crossing{*d, w.time_s + dt, crossing_speed, meters_to_feet(v.length)});
        }
      }
      v.x = x_new;
      v.v = v_new;
    }
  }
  weave(w);
  for (auto& lane : w.lanes) {
    std::size_t n_exit = 0;
    while (n_exit < lane.size() && lane[n_exit].x >= w.length_m) ++n_exit;
    lane.erase(lane.begin(), lane.begin() + static_cast<std::ptrdiff_t>(n_exit));
    w.exited_total += static_cast<std::int64_t>(n_exit);
    w.last_exited += static_cast<std::int64_t>(n_exit);
  }
  w.time_s += dt;
}

std::optional<std::string> check_invariants(const World& w) {
  for (std::size_t li = 0; li < w.lanes.size(); ++li) {
    const auto& lane = w.lanes[li];
    for (std::size_t k = 0; k < lane.size(); ++k) {
      const Vehicle& v = lane[k];
      if (!(v.v >= 0.0) || !std::isfinite(v.x)) {
        return "invalid speed/position for vehicle " + std::to_string(v.id);
      }
      if (k > 0 && !(lane[k - 1].x - v.x > lane[k - 1].length)) {
        std::ostringstream os;
        os << "collision in lane " << li << " between " << lane[k - 1].id << " and " << v.id;
        return os.str();
      }
    }
  }
  return std::nullopt;
}

}  // namespace marvel::sim
