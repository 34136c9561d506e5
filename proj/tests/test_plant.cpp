#include <catch2/catch.hpp>

#include "evodef/plant.hpp"

using namespace evodef;
using namespace evodef::plant;

namespace {

SafetyEnvelope default_env() {
  Config empty;
  return envelope_from_config(empty);
}

// A spec with no flows, no noise, controllers at rest: the ODE's fixed point.
PlantSpec quiescent_spec() {
  PlantSpec spec;
  spec.ode.demand_wave_amplitude = 0.0;
  spec.ode.temp_wave_amplitude = 0.0;
  spec.ode.noise_level = 0.0;
  spec.ode.noise_flow = 0.0;
  spec.ode.noise_temp = 0.0;
  spec.ode.noise_pressure = 0.0;
  spec.ode.actuator_jitter = 0.0;
  spec.ode.nominal_drain_flow = 0.0;
  spec.ode.nominal_valve1 = 0.0;
  spec.ode.nominal_valve2 = 0.0;
  spec.ode.valve2_level_gain = 0.0;
  spec.ode.heater_nominal = 0.0;
  spec.ode.heater_gain = 0.0;
  spec.ode.heat_rate_max = 0.0;
  spec.ode.heat_loss_coeff = 0.0;
  spec.nominal_configs[kMasterKc] = 0.0;
  spec.nominal_configs[kSlaveKc] = 0.0;
  spec.nominal_configs[kSpPump] = 0.0;  // pump off
  spec.nominal_configs[kSpTemp] = 25.0;
  return spec;
}

}  // namespace

TEST_CASE("quiescent plant is a fixed point of one step", "[plant]") {
  PlantSpec spec = quiescent_spec();
  Rng rng(1);
  PlantState s = init_state(spec, rng);
  std::vector<double> sensors_before = s.sensors;
  step(s, spec, rng);
  REQUIRE(s.sensors == sensors_before);
  REQUIRE(s.actuators == std::vector<double>{0.0, 0.0, 0.0});
}

TEST_CASE("episodes are bit-identical for a fixed seed", "[plant]") {
  PlantSpec spec;
  spec.max_ticks = 1200;
  SafetyEnvelope env = default_env();
  AttackVector v = kc_flip_attack(spec);
  Trace a = run_episode(spec, env, v, 500, 314);
  Trace b = run_episode(spec, env, v, 500, 314);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    REQUIRE(a.rows[i].tick == b.rows[i].tick);
    REQUIRE(a.rows[i].actuators == b.rows[i].actuators);
    REQUIRE(a.rows[i].sensors == b.rows[i].sensors);
  }
  REQUIRE(a.labels == b.labels);
  REQUIRE(a.outcome == b.outcome);
}

TEST_CASE("nominal plant stays in its envelope for 10k ticks", "[plant]") {
  PlantSpec spec;
  spec.max_ticks = 10000;
  SafetyEnvelope env = default_env();
  Trace golden = run_episode(spec, env, AttackVector::zero(), 9000, 7);
  REQUIRE(golden.outcome == Outcome::Ineffective);
  REQUIRE(golden.rows.size() == 10000);
  for (const TraceRow& row : golden.rows)
    for (std::size_t i = 0; i < kSensorCount; ++i) {
      REQUIRE(row.sensors[i] >= env.low[i]);
      REQUIRE(row.sensors[i] <= env.high[i]);
    }
}

TEST_CASE("interlock boundary convention: closed interval is safe", "[plant]") {
  SafetyEnvelope env = default_env();
  PlantSpec spec;
  Rng rng(2);
  PlantState s = init_state(spec, rng);
  for (std::size_t i = 0; i < kSensorCount; ++i)
    s.sensors[i] = 0.5 * (env.low[i] + env.high[i]);
  REQUIRE(!check_interlock(s, env));
  s.sensors[kLevel1] = env.high[kLevel1];
  REQUIRE(!check_interlock(s, env));
  s.sensors[kLevel1] = env.high[kLevel1] + 1e-9;
  REQUIRE(check_interlock(s, env));
  s.sensors[kLevel1] = env.low[kLevel1];
  REQUIRE(!check_interlock(s, env));
  s.sensors[kLevel1] = env.low[kLevel1] - 1e-9;
  REQUIRE(check_interlock(s, env));
}

TEST_CASE("apply_attack: zero vector is the identity", "[plant]") {
  PlantSpec spec;
  Rng rng(3);
  PlantState s = init_state(spec, rng);
  PlantState before = s;
  apply_attack(s, AttackVector::zero());
  REQUIRE(s.sensors == before.sensors);
  REQUIRE(s.spoofed_sensors == before.spoofed_sensors);
  REQUIRE(s.configs == before.configs);
  REQUIRE(s.sensor_bias == before.sensor_bias);
  REQUIRE(s.actuator_bias == before.actuator_bias);
}

TEST_CASE("apply_attack: length mismatch is rejected", "[plant]") {
  PlantSpec spec;
  Rng rng(4);
  PlantState s = init_state(spec, rng);
  REQUIRE_THROWS_AS(apply_attack(s, AttackVector(std::vector<double>(5, 0.0))),
                    std::invalid_argument);
}

TEST_CASE("Kc sign flip drives the plant to interlock", "[plant]") {
  PlantSpec spec;
  SafetyEnvelope env = default_env();
  Trace t = run_episode(spec, env, kc_flip_attack(spec), 500, 11);
  REQUIRE(t.outcome == Outcome::Effective);
  REQUIRE(t.shutdown_tick >= t.injection_tick);
  REQUIRE(t.shutdown_tick < spec.max_ticks);
  // labels abnormal exactly from the injection tick onward
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    REQUIRE(int(t.labels[i]) == int(t.rows[i].tick >= t.injection_tick));
  // interlock monotonicity: the shutdown row is the last row
  REQUIRE(t.rows.back().tick == t.shutdown_tick);
}

TEST_CASE("sensor bias within four sigma completes ineffective", "[plant]") {
  PlantSpec spec;
  SafetyEnvelope env = default_env();
  Trace golden = run_episode(spec, env, AttackVector::zero(), 500, 7);
  DriftStats st = trace_statistics(golden);
  AttackVector v;
  v.deltas[sensor_slot(kLevel1)] = 4.0 * st.stddev[sensor_slot(kLevel1)];
  v.deltas[sensor_slot(kTemperature)] = -4.0 * st.stddev[sensor_slot(kTemperature)];
  Trace t = run_episode(spec, env, v, 500, 12);
  REQUIRE(t.outcome == Outcome::Ineffective);
  for (auto l : t.labels) REQUIRE(l == 0);
}

TEST_CASE("zero attack vector episode is ineffective with all-normal labels", "[plant]") {
  PlantSpec spec;
  spec.max_ticks = 1500;
  SafetyEnvelope env = default_env();
  Trace t = run_episode(spec, env, AttackVector::zero(), 500, 13);
  REQUIRE(t.outcome == Outcome::Ineffective);
  REQUIRE(t.rows.size() == 1500);
  for (auto l : t.labels) REQUIRE(l == 0);
}

TEST_CASE("extreme pre-warmup drift shuts down before injection", "[plant]") {
  PlantSpec spec;
  SafetyEnvelope env = default_env();
  AttackVector drift;
  drift.deltas[sensor_slot(kTemperature)] = -40.0;  // heater overshoots
  Trace t = run_episode(spec, env, AttackVector::zero(), 1500, 5, drift);
  REQUIRE(t.outcome == Outcome::ExcludedShort);
  REQUIRE(t.shutdown_tick >= 0);
  REQUIRE(t.shutdown_tick < 1500);
  for (auto l : t.labels) REQUIRE(l == 0);
}

TEST_CASE("run_episode rejects pre-warmup injection", "[plant]") {
  PlantSpec spec;
  SafetyEnvelope env = default_env();
  REQUIRE_THROWS_AS(run_episode(spec, env, AttackVector::zero(), spec.warmup_ticks - 1, 1),
                    std::invalid_argument);
}

TEST_CASE("drift with zero targets is the zero vector", "[plant]") {
  PlantSpec spec;
  SafetyEnvelope env = default_env();
  Trace golden = run_episode(spec, env, AttackVector::zero(), 500, 7);
  DriftStats st = trace_statistics(golden);
  Rng rng(21);
  REQUIRE(make_drift(st, 0, rng).is_zero());
}

TEST_CASE("drift vectors are reproducible per seed", "[plant]") {
  PlantSpec spec;
  SafetyEnvelope env = default_env();
  Trace golden = run_episode(spec, env, AttackVector::zero(), 500, 7);
  DriftStats st = trace_statistics(golden);
  Rng a(31), b(31);
  REQUIRE(inject_drift(st, a).deltas == inject_drift(st, b).deltas);
}

TEST_CASE("1000 drift vectors respect the 4-sigma and target-count caps", "[plant]") {
  PlantSpec spec;
  SafetyEnvelope env = default_env();
  Trace golden = run_episode(spec, env, AttackVector::zero(), 500, 7);
  DriftStats st = trace_statistics(golden);
  Rng rng(41);
  for (int i = 0; i < 1000; ++i) {
    AttackVector v = inject_drift(st, rng);
    std::size_t nonzero = 0;
    for (std::size_t slot = 0; slot < kAttackSlotCount; ++slot) {
      double d = v.deltas[slot];
      if (d == 0.0) continue;
      ++nonzero;
      REQUIRE(slot < kSensorCount + kActuatorCount);  // config slots stay zero
      REQUIRE(std::fabs(d) <= 4.0 * st.stddev[slot] + 1e-15);
    }
    REQUIRE(nonzero >= 1);
    REQUIRE(nonzero <= std::min<std::size_t>(10, kSensorCount + kActuatorCount));
  }
}

TEST_CASE("physical clamps hold across random attacked episodes", "[plant]") {
  PlantSpec spec;
  spec.max_ticks = 1200;
  SafetyEnvelope env = default_env();
  Rng rng(51);
  for (int ep = 0; ep < 8; ++ep) {
    AttackVector v;
    for (int k = 0; k < 4; ++k) {
      std::size_t slot = rng.uniform_int(kAttackSlotCount);
      v.deltas[slot] = rng.uniform(-1.0, 1.0);
    }
    Trace t = run_episode(spec, env, v, 500, 600 + ep);
    for (const TraceRow& row : t.rows)
      for (double a : row.actuators) {
        REQUIRE(a >= 0.0);
        REQUIRE(a <= 1.0);
      }
    // label soundness
    if (t.outcome != Outcome::Effective)
      for (auto l : t.labels) REQUIRE(l == 0);
    for (std::size_t i = 0; i < t.rows.size(); ++i)
      if (t.labels[i]) REQUIRE(t.rows[i].tick >= t.injection_tick);
  }
}

TEST_CASE("levels never go negative even under draining attacks", "[plant]") {
  PlantSpec spec;
  spec.max_ticks = 2000;
  SafetyEnvelope env{};
  // disable the interlock so the drain runs unchecked
  for (std::size_t i = 0; i < kSensorCount; ++i) {
    env.low[i] = -1e9;
    env.high[i] = 1e9;
  }
  Rng rng(61);
  PlantState s = init_state(spec, rng);
  AttackVector v;
  v.deltas[config_slot(kSpPump)] = -2.0;        // pump off
  v.deltas[actuator_slot(kValve1)] = 2.0;       // valve jammed open
  v.deltas[actuator_slot(kValve2)] = 2.0;
  apply_attack(s, v);
  for (int i = 0; i < 2000; ++i) {
    step(s, spec, rng);
    REQUIRE(s.level1 >= 0.0);
    REQUIRE(s.level2 >= 0.0);
  }
  REQUIRE(s.level1 < 0.01);
}

TEST_CASE("trace statistics report positive spreads on the golden trace", "[plant]") {
  PlantSpec spec;
  SafetyEnvelope env = default_env();
  Trace golden = run_episode(spec, env, AttackVector::zero(), 500, 7);
  DriftStats st = trace_statistics(golden);
  for (double s : st.stddev) REQUIRE(s > 0.0);
  REQUIRE(st.mean[sensor_slot(kLevel1)] == Approx(0.5).margin(0.01));
  REQUIRE(st.mean[sensor_slot(kTemperature)] == Approx(60.0).margin(0.5));
}
