//! Single water tank process under on/off threshold control.
//!
//! The tank is filled by a pump (binary, flow `P` when on) and drained
//! through an outlet valve (binary, gravity-driven flow `a * sqrt(2*g*h)`
//! when open). The level is integrated with an explicit Euler step and
//! clamped at zero. A four-threshold scheme governs the loop: the
//! controller switches below `L` and above `H`, holds inside the dead
//! band, and `LL`/`HH` mark the alarm levels the process must never cross.

use thiserror::Error;

use crate::config::{Config, ConfigError};

#[derive(Debug, Error, PartialEq)]
pub enum PlantError {
    #[error("tank level is negative ({0}); state is corrupted")]
    NegativeLevel(f64),
    #[error("parameter {name} must be strictly positive (got {value})")]
    NonPositiveParam { name: &'static str, value: f64 },
    #[error("thresholds must satisfy 0 < LL < L < H < HH (got LL={ll}, L={l}, H={h}, HH={hh})")]
    ThresholdOrder { ll: f64, l: f64, h: f64, hh: f64 },
    #[error(
        "pump flow {pump_flow} does not dominate the outflow {outflow} at level H={h}; \
         the fill phase would never terminate"
    )]
    PumpTooWeak { pump_flow: f64, outflow: f64, h: f64 },
}

/// Physical constants of the tank and its actuators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantParams {
    /// Pump flow when running, m^3/s.
    pub pump_max_flow: f64,
    /// Tank cross section, m^2.
    pub tank_section: f64,
    /// Outlet hole cross section, m^2.
    pub outlet_section: f64,
    /// Gravitational acceleration, m/s^2.
    pub gravity: f64,
    /// Integration timestep, s.
    pub dt: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            pump_max_flow: 0.05,
            tank_section: 1.0,
            outlet_section: 0.01,
            gravity: 9.81,
            dt: 0.1,
        }
    }
}

impl PlantParams {
    /// Checks that every constant is strictly positive.
    pub fn validate(&self) -> Result<(), PlantError> {
        let fields = [
            ("pump_max_flow", self.pump_max_flow),
            ("tank_section", self.tank_section),
            ("outlet_section", self.outlet_section),
            ("gravity", self.gravity),
            ("dt", self.dt),
        ];
        for (name, value) in fields {
            if !value.is_finite() || value <= 0.0 {
                return Err(PlantError::NonPositiveParam { name, value });
            }
        }
        Ok(())
    }

    /// Checks positivity plus fill dominance: the pump must outrun the
    /// outlet at level `H`, otherwise the fill phase never reaches it.
    pub fn validate_against(&self, thresholds: &Thresholds) -> Result<(), PlantError> {
        self.validate()?;
        thresholds.validate()?;
        let outflow_at_h = self.outlet_section * (2.0 * self.gravity * thresholds.h).sqrt();
        if self.pump_max_flow <= outflow_at_h {
            return Err(PlantError::PumpTooWeak {
                pump_flow: self.pump_max_flow,
                outflow: outflow_at_h,
                h: thresholds.h,
            });
        }
        Ok(())
    }

    pub fn from_config(config: &Config) -> Result<Self, ConfigError> {
        let mut params = Self::default();
        config.override_f64("plant.pump_max_flow", &mut params.pump_max_flow)?;
        config.override_f64("plant.tank_section", &mut params.tank_section)?;
        config.override_f64("plant.outlet_section", &mut params.outlet_section)?;
        config.override_f64("plant.gravity", &mut params.gravity)?;
        config.override_f64("plant.dt", &mut params.dt)?;
        Ok(params)
    }
}

/// Control and alarm levels, in meters: `ll < l < h < hh`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub ll: f64,
    pub l: f64,
    pub h: f64,
    pub hh: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            ll: 0.2,
            l: 0.66,
            h: 0.8,
            hh: 1.2,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), PlantError> {
        if 0.0 < self.ll && self.ll < self.l && self.l < self.h && self.h < self.hh {
            Ok(())
        } else {
            Err(PlantError::ThresholdOrder {
                ll: self.ll,
                l: self.l,
                h: self.h,
                hh: self.hh,
            })
        }
    }

    pub fn from_config(config: &Config) -> Result<Self, ConfigError> {
        let mut t = Self::default();
        config.override_f64("thresholds.ll", &mut t.ll)?;
        config.override_f64("thresholds.l", &mut t.l)?;
        config.override_f64("thresholds.h", &mut t.h)?;
        config.override_f64("thresholds.hh", &mut t.hh)?;
        Ok(t)
    }
}

/// Tank level, flows, and actuator states at one instant.
///
/// The stored flows are the ones that produced the current level, i.e.
/// the flows used in the step that returned this state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    /// Water level, m.
    pub level: f64,
    /// Inlet flow, m^3/s. Zero whenever the pump is off.
    pub inflow: f64,
    /// Outlet flow, m^3/s. Zero whenever the valve is closed.
    pub outflow: f64,
    /// Pump status.
    pub pump: bool,
    /// Outlet valve status.
    pub valve: bool,
    /// Simulation time, s.
    pub time: f64,
}

impl PlantState {
    /// Initial condition used throughout: half-full tank, filling.
    pub fn initial() -> Self {
        Self {
            level: 0.5,
            inflow: 0.0,
            outflow: 0.0,
            pump: true,
            valve: false,
            time: 0.0,
        }
    }
}

/// Process alarm state relative to the `LL`/`HH` safety thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SafetyStatus {
    Ok,
    UnderflowAlarm,
    OverflowAlarm,
}

/// Inlet flow: `pump * P`.
pub fn inflow(pump: bool, params: &PlantParams) -> f64 {
    if pump {
        params.pump_max_flow
    } else {
        0.0
    }
}

/// Gravity-driven outlet flow: `valve * a * sqrt(2*g*h)`.
///
/// A negative level signals corrupted state and is rejected.
pub fn outflow(valve: bool, level: f64, params: &PlantParams) -> Result<f64, PlantError> {
    if level < 0.0 {
        return Err(PlantError::NegativeLevel(level));
    }
    if valve {
        Ok(params.outlet_section * (2.0 * params.gravity * level).sqrt())
    } else {
        Ok(0.0)
    }
}

/// One explicit Euler step of the level balance, clamped at empty.
///
/// Flows are computed from the current actuator states and level; the
/// returned state carries those flows together with the updated level.
pub fn step(state: &PlantState, params: &PlantParams) -> PlantState {
    let q_in = inflow(state.pump, params);
    let q_out =
        outflow(state.valve, state.level, params).expect("plant invariant: level >= 0 before step");
    let level = (state.level + (q_in - q_out) * params.dt / params.tank_section).max(0.0);
    PlantState {
        level,
        inflow: q_in,
        outflow: q_out,
        pump: state.pump,
        valve: state.valve,
        time: state.time + params.dt,
    }
}

/// Threshold control law with hysteresis hold inside the dead band.
///
/// Below `L` the tank must fill (pump on, valve closed); above `H` it
/// must empty (pump off, valve open); in between the current actuator
/// pair is kept.
pub fn control(measured_level: f64, thresholds: &Thresholds, current: (bool, bool)) -> (bool, bool) {
    if measured_level < thresholds.l {
        (true, false)
    } else if measured_level > thresholds.h {
        (false, true)
    } else {
        current
    }
}

/// Alarm check against the outer `LL`/`HH` thresholds.
pub fn safety_check(level: f64, thresholds: &Thresholds) -> SafetyStatus {
    if level < thresholds.ll {
        SafetyStatus::UnderflowAlarm
    } else if level > thresholds.hh {
        SafetyStatus::OverflowAlarm
    } else {
        SafetyStatus::Ok
    }
}

/// One closed-loop iteration with the controller reading the true level:
/// advance the physics, then update the actuators from the new level.
pub fn closed_loop_step(
    state: &PlantState,
    params: &PlantParams,
    thresholds: &Thresholds,
) -> PlantState {
    let mut next = step(state, params);
    let (pump, valve) = control(next.level, thresholds, (next.pump, next.valve));
    next.pump = pump;
    next.valve = valve;
    next
}
