#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "evodef/config.hpp"
#include "evodef/rng.hpp"

namespace evodef::plant {

// Desk-scale process plant: a pump feeds tank 1, valve 1 drains tank 1 into
// tank 2, valve 2 drains tank 2. A master PI loop holds the tank-1 level by
// setting a drain-flow setpoint; a slave PI loop tracks that setpoint with
// valve 1. Tank 2 runs a fixed proportional level controller, and a heater
// holds the tank-1 temperature. Pressure is a static function of level and
// temperature.
//
// Sensors:   0 level1, 1 level2, 2 flow (tank1->tank2), 3 temperature, 4 pressure
// Actuators: 0 valve1, 1 valve2, 2 pump
// Configs:   0 master_kc, 1 master_ti, 2 slave_kc, 3 slave_ti,
//            4 sp_level1, 5 sp_level2, 6 sp_pump, 7 sp_temp

constexpr std::size_t kSensorCount = 5;
constexpr std::size_t kActuatorCount = 3;
constexpr std::size_t kConfigCount = 8;
constexpr std::size_t kAttackSlotCount = kSensorCount + kActuatorCount + kConfigCount;

enum Sensor : std::size_t { kLevel1 = 0, kLevel2, kFlow, kTemperature, kPressure };
enum Actuator : std::size_t { kValve1 = 0, kValve2, kPump };
enum ConfigSlot : std::size_t {
  kMasterKc = 0,
  kMasterTi,
  kSlaveKc,
  kSlaveTi,
  kSpLevel1,
  kSpLevel2,
  kSpPump,
  kSpTemp
};

// Attack slot layout: [sensor biases, actuator biases, config deltas].
constexpr std::size_t sensor_slot(std::size_t s) { return s; }
constexpr std::size_t actuator_slot(std::size_t a) { return kSensorCount + a; }
constexpr std::size_t config_slot(std::size_t c) { return kSensorCount + kActuatorCount + c; }

// Per-variable delta vector; a slot of exactly 0.0 leaves its variable
// untouched.
struct AttackVector {
  std::vector<double> deltas;

  AttackVector() : deltas(kAttackSlotCount, 0.0) {}
  explicit AttackVector(std::vector<double> d) : deltas(std::move(d)) {}

  static AttackVector zero() { return AttackVector(); }

  std::size_t nonzero_slots() const {
    std::size_t n = 0;
    for (double d : deltas)
      if (d != 0.0) ++n;
    return n;
  }
  bool is_zero() const { return nonzero_slots() == 0; }
};

struct OdeParams {
  double tank_area1 = 6.0;
  double tank_area2 = 4.0;
  double pump_max_flow = 0.02;
  double valve1_coeff = 0.025;
  double valve2_coeff = 0.025;
  double flow_setpoint_max = 0.02;
  double nominal_drain_flow = 0.011;
  double nominal_valve1 = 0.6223;
  double nominal_valve2 = 0.6957;
  double valve2_level_gain = 2.0;
  double heater_gain = 0.08;      // heater command per degC of error
  double heater_nominal = 0.474;
  double heat_rate_max = 0.24;    // degC/s at full heater
  double heat_loss_coeff = 0.0005;
  double inflow_temperature = 25.0;
  double ambient_temperature = 25.0;
  double reference_volume = 4.0;
  double pressure_base = 100.0;
  double pressure_level_gain = 40.0;
  double pressure_temp_gain = 0.8;
  double pressure_temp_ref = 60.0;
  // slow demand cycles: pump drive and inflow temperature oscillate, so
  // nominal operation has predictable dynamics rather than a flat noise floor
  double demand_wave_amplitude = 0.04;   // pump command units
  double demand_wave_period = 900.0;     // seconds
  double temp_wave_amplitude = 2.0;      // degC on the inflow temperature
  double temp_wave_period = 600.0;       // seconds
  double noise_level = 0.003;
  double noise_flow = 0.0002;
  double noise_temp = 0.1;
  double noise_pressure = 0.15;
  double actuator_jitter = 0.004;
};

struct PlantSpec {
  double dt = 0.5;
  long warmup_ticks = 500;
  long max_ticks = 4000;
  OdeParams ode;
  std::array<double, kConfigCount> nominal_configs = {0.06, 150.0, 25.0, 25.0,
                                                      0.5,  0.4,   0.55, 60.0};

  std::size_t n_sensors() const { return kSensorCount; }
  std::size_t n_actuators() const { return kActuatorCount; }
  std::size_t n_configs() const { return kConfigCount; }
};

struct SafetyEnvelope {
  std::array<double, kSensorCount> low{};
  std::array<double, kSensorCount> high{};
};

struct PlantState {
  long tick = 0;
  std::vector<double> actuators;        // commanded values applied this tick
  std::vector<double> sensors;          // true readings
  std::vector<double> spoofed_sensors;  // controller-visible readings
  std::vector<double> configs;
  bool shutdown = false;

  // physical state
  double level1 = 0.0;
  double level2 = 0.0;
  double temperature = 0.0;

  // controller state
  double master_integral = 0.0;
  double slave_integral = 0.0;

  // persistent attack offsets
  std::vector<double> sensor_bias;
  std::vector<double> actuator_bias;
};

enum class Outcome { Effective, Ineffective, ExcludedShort };

inline std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::Effective: return "effective";
    case Outcome::Ineffective: return "ineffective";
    case Outcome::ExcludedShort: return "excluded_short";
  }
  return "?";
}

inline Outcome outcome_from_string(const std::string& s) {
  if (s == "effective") return Outcome::Effective;
  if (s == "ineffective") return Outcome::Ineffective;
  if (s == "excluded_short") return Outcome::ExcludedShort;
  throw std::runtime_error("unknown outcome: " + s);
}

struct TraceRow {
  long tick = 0;
  std::vector<double> actuators;
  std::vector<double> sensors;  // recorded (spoofed) readings, the historian view
};

struct Trace {
  std::string episode_id;
  long injection_tick = 0;
  std::vector<TraceRow> rows;
  std::vector<std::uint8_t> labels;  // 1 = abnormal
  Outcome outcome = Outcome::Ineffective;

  // metadata
  std::vector<double> attack;         // delta vector applied at injection_tick
  std::vector<double> initial_drift;  // delta vector applied at tick 0 (may be empty)
  std::uint64_t seed = 0;
  long shutdown_tick = -1;  // -1 when the episode ran to max_ticks

  bool attack_applied() const {
    return !rows.empty() && rows.back().tick >= injection_tick;
  }
};

// --- core dynamics ----------------------------------------------------------

namespace detail {

inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Integral time guarded away from zero so an attacked Ti cannot divide by
// zero; sign is preserved.
inline double guarded_ti(double ti) {
  constexpr double kTiMin = 1.0;
  if (std::fabs(ti) < kTiMin) return ti < 0.0 ? -kTiMin : kTiMin;
  return ti;
}

struct PiResult {
  double output = 0.0;
  bool integrate = true;
};

inline PiResult pi_control(double feedforward, double kc, double ti, double error,
                           double integral, double lo, double hi) {
  double raw = feedforward + kc * error + (kc / guarded_ti(ti)) * integral;
  PiResult r;
  r.output = std::clamp(raw, lo, hi);
  // Conditional integration: freeze the integral while the output is pinned
  // at a limit and the error keeps pushing it further out.
  double push = kc * error;
  r.integrate = !((raw > hi && push > 0.0) || (raw < lo && push < 0.0));
  return r;
}

inline void measure(PlantState& s, const PlantSpec& spec, double flow, Rng& rng) {
  const OdeParams& p = spec.ode;
  s.sensors[kLevel1] = s.level1 + rng.normal(0.0, p.noise_level);
  s.sensors[kLevel2] = s.level2 + rng.normal(0.0, p.noise_level);
  s.sensors[kFlow] = flow + rng.normal(0.0, p.noise_flow);
  s.sensors[kTemperature] = s.temperature + rng.normal(0.0, p.noise_temp);
  double pressure = p.pressure_base + p.pressure_level_gain * s.level1 +
                    p.pressure_temp_gain * (s.temperature - p.pressure_temp_ref);
  s.sensors[kPressure] = pressure + rng.normal(0.0, p.noise_pressure);
  for (std::size_t i = 0; i < kSensorCount; ++i)
    s.spoofed_sensors[i] = s.sensors[i] + s.sensor_bias[i];
}

}  // namespace detail

inline PlantState init_state(const PlantSpec& spec, Rng& rng) {
  PlantState s;
  s.actuators.assign(kActuatorCount, 0.0);
  s.sensors.assign(kSensorCount, 0.0);
  s.spoofed_sensors.assign(kSensorCount, 0.0);
  s.configs.assign(spec.nominal_configs.begin(), spec.nominal_configs.end());
  s.sensor_bias.assign(kSensorCount, 0.0);
  s.actuator_bias.assign(kActuatorCount, 0.0);
  s.level1 = spec.nominal_configs[kSpLevel1];
  s.level2 = spec.nominal_configs[kSpLevel2];
  s.temperature = spec.nominal_configs[kSpTemp];
  s.actuators[kValve1] = spec.ode.nominal_valve1;
  s.actuators[kValve2] = spec.ode.nominal_valve2;
  s.actuators[kPump] = spec.nominal_configs[kSpPump];
  double flow = spec.ode.valve1_coeff * s.actuators[kValve1] * std::sqrt(std::max(s.level1, 0.0));
  detail::measure(s, spec, flow, rng);
  return s;
}

// Advances one tick: controllers read the spoofed sensors from the previous
// measurement, physics integrates with explicit Euler, then sensors are
// re-measured. Physical saturations clamp levels to [0, 1] m and commands to
// [0, 1]; the interlock check is the caller's job.
inline void step(PlantState& s, const PlantSpec& spec, Rng& rng) {
  if (s.shutdown) throw std::logic_error("step: plant is shut down");
  const OdeParams& p = spec.ode;
  const std::vector<double>& c = s.configs;
  constexpr double kTwoPi = 6.283185307179586;
  const double t_seconds = static_cast<double>(s.tick) * spec.dt;
  const double demand_wave =
      p.demand_wave_period > 0.0
          ? p.demand_wave_amplitude * std::sin(kTwoPi * t_seconds / p.demand_wave_period)
          : 0.0;
  const double inflow_temp =
      p.inflow_temperature +
      (p.temp_wave_period > 0.0
           ? p.temp_wave_amplitude * std::sin(kTwoPi * t_seconds / p.temp_wave_period)
           : 0.0);

  // master loop: tank-1 level -> drain flow setpoint
  double level_error = s.spoofed_sensors[kLevel1] - c[kSpLevel1];
  detail::PiResult master =
      detail::pi_control(p.nominal_drain_flow, c[kMasterKc], c[kMasterTi], level_error,
                         s.master_integral, 0.0, p.flow_setpoint_max);
  if (master.integrate) s.master_integral += level_error * spec.dt;

  // slave loop: drain flow -> valve 1
  double flow_error = master.output - s.spoofed_sensors[kFlow];
  detail::PiResult slave = detail::pi_control(p.nominal_valve1, c[kSlaveKc], c[kSlaveTi],
                                              flow_error, s.slave_integral, 0.0, 1.0);
  if (slave.integrate) s.slave_integral += flow_error * spec.dt;

  double valve2_raw = p.nominal_valve2 +
                      p.valve2_level_gain * (s.spoofed_sensors[kLevel2] - c[kSpLevel2]);
  double heater = detail::clamp01(p.heater_nominal +
                                  p.heater_gain * (c[kSpTemp] - s.spoofed_sensors[kTemperature]));

  double u_valve1 = detail::clamp01(slave.output + s.actuator_bias[kValve1] +
                                    rng.normal(0.0, p.actuator_jitter));
  double u_valve2 = detail::clamp01(valve2_raw + s.actuator_bias[kValve2] +
                                    rng.normal(0.0, p.actuator_jitter));
  double u_pump = detail::clamp01(c[kSpPump] + demand_wave + s.actuator_bias[kPump] +
                                  rng.normal(0.0, p.actuator_jitter));
  s.actuators[kValve1] = u_valve1;
  s.actuators[kValve2] = u_valve2;
  s.actuators[kPump] = u_pump;

  // physics
  double q_in = p.pump_max_flow * u_pump;
  double q12 = p.valve1_coeff * u_valve1 * std::sqrt(std::max(s.level1, 0.0));
  double q_out = p.valve2_coeff * u_valve2 * std::sqrt(std::max(s.level2, 0.0));
  s.level1 = std::clamp(s.level1 + spec.dt * (q_in - q12) / p.tank_area1, 0.0, 1.0);
  s.level2 = std::clamp(s.level2 + spec.dt * (q12 - q_out) / p.tank_area2, 0.0, 1.0);
  double heat = q_in * (inflow_temp - s.temperature) / p.reference_volume +
                p.heat_rate_max * heater -
                p.heat_loss_coeff * (s.temperature - p.ambient_temperature);
  s.temperature = std::clamp(s.temperature + spec.dt * heat, 0.0, 150.0);

  detail::measure(s, spec, q12, rng);
  ++s.tick;
}

// True iff any true critical-sensor reading lies outside its closed safety
// interval. Readings exactly on a bound are safe.
inline bool check_interlock(const PlantState& s, const SafetyEnvelope& env) {
  for (std::size_t i = 0; i < kSensorCount; ++i)
    if (s.sensors[i] < env.low[i] || s.sensors[i] > env.high[i]) return true;
  return false;
}

// Adds the vector's deltas to the state: sensor slots bias the
// controller-visible readings, actuator slots bias commanded actuators,
// config slots shift configuration values. All offsets persist.
inline void apply_attack(PlantState& s, const AttackVector& v) {
  if (v.deltas.size() != kAttackSlotCount)
    throw std::invalid_argument("apply_attack: expected " + std::to_string(kAttackSlotCount) +
                                " slots, got " + std::to_string(v.deltas.size()));
  for (std::size_t i = 0; i < kSensorCount; ++i) s.sensor_bias[i] += v.deltas[sensor_slot(i)];
  for (std::size_t i = 0; i < kActuatorCount; ++i)
    s.actuator_bias[i] += v.deltas[actuator_slot(i)];
  for (std::size_t i = 0; i < kConfigCount; ++i) s.configs[i] += v.deltas[config_slot(i)];
  for (std::size_t i = 0; i < kSensorCount; ++i)
    s.spoofed_sensors[i] = s.sensors[i] + s.sensor_bias[i];
}

// Runs one labeled episode: nominal operation until injection_tick, the
// attack from injection_tick onward, stop at interlock shutdown or max_ticks.
// An optional drift vector is active from tick 0 (sensor aging); an episode
// that shuts down before the attack lands is ExcludedShort.
inline Trace run_episode(const PlantSpec& spec, const SafetyEnvelope& env, const AttackVector& v,
                         long injection_tick, std::uint64_t seed,
                         const AttackVector& initial_drift = AttackVector::zero()) {
  if (injection_tick < spec.warmup_ticks)
    throw std::invalid_argument("run_episode: injection_tick before warmup");
  if (injection_tick >= spec.max_ticks)
    throw std::invalid_argument("run_episode: injection_tick beyond max_ticks");

  Rng rng = Rng::derive(seed, "plant-episode");
  PlantState s = init_state(spec, rng);
  if (!initial_drift.is_zero()) apply_attack(s, initial_drift);

  Trace trace;
  trace.injection_tick = injection_tick;
  trace.attack = v.deltas;
  trace.initial_drift = initial_drift.is_zero() ? std::vector<double>{} : initial_drift.deltas;
  trace.seed = seed;
  trace.rows.reserve(static_cast<std::size_t>(spec.max_ticks));

  while (!s.shutdown && s.tick < spec.max_ticks) {
    if (s.tick + 1 == injection_tick) apply_attack(s, v);
    step(s, spec, rng);
    if (check_interlock(s, env)) {
      s.shutdown = true;
      trace.shutdown_tick = s.tick;
    }
    trace.rows.push_back(TraceRow{s.tick, s.actuators, s.spoofed_sensors});
  }

  if (!s.shutdown) {
    trace.outcome = Outcome::Ineffective;
  } else if (trace.shutdown_tick >= injection_tick) {
    trace.outcome = Outcome::Effective;
  } else {
    trace.outcome = Outcome::ExcludedShort;
  }
  trace.labels.assign(trace.rows.size(), 0);
  if (trace.outcome == Outcome::Effective) {
    for (std::size_t i = 0; i < trace.rows.size(); ++i)
      if (trace.rows[i].tick >= injection_tick) trace.labels[i] = 1;
  }
  return trace;
}

// --- drift ------------------------------------------------------------------

// Per-variable statistics over a nominal trace, indexed by attack slot for
// the sensor and actuator slots.
struct DriftStats {
  std::array<double, kSensorCount + kActuatorCount> mean{};
  std::array<double, kSensorCount + kActuatorCount> stddev{};
};

inline DriftStats trace_statistics(const Trace& trace) {
  if (trace.rows.empty()) throw std::invalid_argument("trace_statistics: empty trace");
  DriftStats st;
  const double n = static_cast<double>(trace.rows.size());
  for (const TraceRow& row : trace.rows) {
    for (std::size_t i = 0; i < kSensorCount; ++i) st.mean[sensor_slot(i)] += row.sensors[i];
    for (std::size_t i = 0; i < kActuatorCount; ++i) st.mean[actuator_slot(i)] += row.actuators[i];
  }
  for (double& m : st.mean) m /= n;
  for (const TraceRow& row : trace.rows) {
    for (std::size_t i = 0; i < kSensorCount; ++i) {
      double d = row.sensors[i] - st.mean[sensor_slot(i)];
      st.stddev[sensor_slot(i)] += d * d;
    }
    for (std::size_t i = 0; i < kActuatorCount; ++i) {
      double d = row.actuators[i] - st.mean[actuator_slot(i)];
      st.stddev[actuator_slot(i)] += d * d;
    }
  }
  for (double& v : st.stddev) v = std::sqrt(v / n);
  return st;
}

// Drift vector with k targets among the sensors and actuators, each offset
// uniform in [-4 sigma, +4 sigma] of its variable; config slots stay zero.
inline AttackVector make_drift(const DriftStats& stats, std::size_t k, Rng& rng) {
  AttackVector v;
  constexpr std::size_t n_vars = kSensorCount + kActuatorCount;
  if (k > n_vars) k = n_vars;
  std::vector<std::size_t> targets = rng.pick_distinct(n_vars, k);
  for (std::size_t t : targets) {
    double bound = 4.0 * stats.stddev[t];
    v.deltas[t] = rng.uniform(-bound, bound);
  }
  return v;
}

// k drawn uniformly from {1, ..., min(max_targets, #variables)}.
inline AttackVector inject_drift(const DriftStats& stats, Rng& rng, std::size_t max_targets = 10) {
  std::size_t cap = std::min(max_targets, kSensorCount + kActuatorCount);
  std::size_t k = 1 + static_cast<std::size_t>(rng.uniform_int(cap));
  return make_drift(stats, k, rng);
}

// --- configuration ----------------------------------------------------------

inline const std::array<const char*, kConfigCount>& config_names() {
  static const std::array<const char*, kConfigCount> names = {
      "master_kc", "master_ti", "slave_kc", "slave_ti",
      "sp_level1", "sp_level2", "sp_pump",  "sp_temp"};
  return names;
}

inline const std::array<const char*, kSensorCount>& sensor_names() {
  static const std::array<const char*, kSensorCount> names = {"level1", "level2", "flow",
                                                              "temperature", "pressure"};
  return names;
}

// Collects every validation failure instead of stopping at the first.
// Missing keys fall back to built-in defaults, so only present keys and the
// effective relationships are checked.
inline std::vector<std::string> validate_plant_config(const Config& cfg) {
  std::vector<std::string> errors;
  PlantSpec defaults;
  double dt = defaults.dt;
  long warmup = defaults.warmup_ticks;
  long max_ticks = defaults.max_ticks;
  if (cfg.has("plant.dt")) {
    if (auto v = cfg.check_double("plant.dt", errors)) dt = *v;
  }
  if (dt <= 0.0) errors.push_back("plant.dt: must be > 0");
  if (cfg.has("plant.warmup_ticks")) {
    if (auto v = cfg.check_int("plant.warmup_ticks", errors)) warmup = *v;
  }
  if (cfg.has("plant.max_ticks")) {
    if (auto v = cfg.check_int("plant.max_ticks", errors)) max_ticks = *v;
  }
  if (warmup < 0) errors.push_back("plant.warmup_ticks: must be >= 0");
  if (max_ticks <= warmup) errors.push_back("plant.max_ticks: must exceed plant.warmup_ticks");
  for (const char* name : config_names()) {
    std::string key = std::string("plant.configs.") + name;
    if (cfg.has(key)) cfg.check_double(key, errors);
  }
  for (std::size_t i = 0; i < kSensorCount; ++i) {
    std::string key = std::string("envelope.") + sensor_names()[i];
    if (!cfg.has(key)) continue;
    try {
      auto bounds = cfg.get_doubles(key);
      if (bounds.size() != 2)
        errors.push_back(key + ": expected two values (low high)");
      else if (bounds[1] <= bounds[0])
        errors.push_back(key + ": high bound must exceed low bound");
    } catch (const std::exception& e) {
      errors.emplace_back(e.what());
    }
  }
  return errors;
}

inline PlantSpec plant_spec_from_config(const Config& cfg) {
  PlantSpec spec;
  spec.dt = cfg.get_double("plant.dt", spec.dt);
  spec.warmup_ticks = cfg.get_int("plant.warmup_ticks", spec.warmup_ticks);
  spec.max_ticks = cfg.get_int("plant.max_ticks", spec.max_ticks);
  OdeParams& p = spec.ode;
  p.tank_area1 = cfg.get_double("plant.ode.tank_area1", p.tank_area1);
  p.tank_area2 = cfg.get_double("plant.ode.tank_area2", p.tank_area2);
  p.pump_max_flow = cfg.get_double("plant.ode.pump_max_flow", p.pump_max_flow);
  p.valve1_coeff = cfg.get_double("plant.ode.valve1_coeff", p.valve1_coeff);
  p.valve2_coeff = cfg.get_double("plant.ode.valve2_coeff", p.valve2_coeff);
  p.flow_setpoint_max = cfg.get_double("plant.ode.flow_setpoint_max", p.flow_setpoint_max);
  p.nominal_drain_flow = cfg.get_double("plant.ode.nominal_drain_flow", p.nominal_drain_flow);
  p.nominal_valve1 = cfg.get_double("plant.ode.nominal_valve1", p.nominal_valve1);
  p.nominal_valve2 = cfg.get_double("plant.ode.nominal_valve2", p.nominal_valve2);
  p.valve2_level_gain = cfg.get_double("plant.ode.valve2_level_gain", p.valve2_level_gain);
  p.heater_gain = cfg.get_double("plant.ode.heater_gain", p.heater_gain);
  p.heater_nominal = cfg.get_double("plant.ode.heater_nominal", p.heater_nominal);
  p.heat_rate_max = cfg.get_double("plant.ode.heat_rate_max", p.heat_rate_max);
  p.heat_loss_coeff = cfg.get_double("plant.ode.heat_loss_coeff", p.heat_loss_coeff);
  p.inflow_temperature = cfg.get_double("plant.ode.inflow_temperature", p.inflow_temperature);
  p.ambient_temperature = cfg.get_double("plant.ode.ambient_temperature", p.ambient_temperature);
  p.reference_volume = cfg.get_double("plant.ode.reference_volume", p.reference_volume);
  p.pressure_base = cfg.get_double("plant.ode.pressure_base", p.pressure_base);
  p.pressure_level_gain = cfg.get_double("plant.ode.pressure_level_gain", p.pressure_level_gain);
  p.pressure_temp_gain = cfg.get_double("plant.ode.pressure_temp_gain", p.pressure_temp_gain);
  p.pressure_temp_ref = cfg.get_double("plant.ode.pressure_temp_ref", p.pressure_temp_ref);
  p.demand_wave_amplitude =
      cfg.get_double("plant.ode.demand_wave_amplitude", p.demand_wave_amplitude);
  p.demand_wave_period = cfg.get_double("plant.ode.demand_wave_period", p.demand_wave_period);
  p.temp_wave_amplitude = cfg.get_double("plant.ode.temp_wave_amplitude", p.temp_wave_amplitude);
  p.temp_wave_period = cfg.get_double("plant.ode.temp_wave_period", p.temp_wave_period);
  p.noise_level = cfg.get_double("plant.ode.noise_level", p.noise_level);
  p.noise_flow = cfg.get_double("plant.ode.noise_flow", p.noise_flow);
  p.noise_temp = cfg.get_double("plant.ode.noise_temp", p.noise_temp);
  p.noise_pressure = cfg.get_double("plant.ode.noise_pressure", p.noise_pressure);
  p.actuator_jitter = cfg.get_double("plant.ode.actuator_jitter", p.actuator_jitter);
  for (std::size_t i = 0; i < kConfigCount; ++i) {
    std::string key = std::string("plant.configs.") + config_names()[i];
    spec.nominal_configs[i] = cfg.get_double(key, spec.nominal_configs[i]);
  }
  return spec;
}

inline SafetyEnvelope envelope_from_config(const Config& cfg) {
  SafetyEnvelope env{};
  static const std::array<std::pair<double, double>, kSensorCount> defaults = {
      {{0.05, 0.95}, {0.05, 0.95}, {-0.002, 0.022}, {38.0, 75.0}, {105.0, 145.0}}};
  for (std::size_t i = 0; i < kSensorCount; ++i) {
    std::string key = std::string("envelope.") + sensor_names()[i];
    if (cfg.has(key)) {
      auto bounds = cfg.get_doubles(key);
      if (bounds.size() != 2) throw std::runtime_error(key + ": expected two values (low high)");
      env.low[i] = bounds[0];
      env.high[i] = bounds[1];
    } else {
      env.low[i] = defaults[i].first;
      env.high[i] = defaults[i].second;
    }
    if (env.high[i] <= env.low[i])
      throw std::runtime_error(key + ": high bound must exceed low bound");
  }
  return env;
}

// The canonical effective attack: flip the sign of the master level loop's
// proportional gain, turning level regulation into positive feedback.
inline AttackVector kc_flip_attack(const PlantSpec& spec) {
  AttackVector v;
  v.deltas[config_slot(kMasterKc)] = -2.0 * spec.nominal_configs[kMasterKc];
  return v;
}

}  // namespace evodef::plant
