//! Wall-time metering per workflow phase and conversion to energy and CO2e
//! under an explicit power model.
//!
//! Hardware introspection is deliberately out of scope: average power draw
//! and grid carbon intensity are configuration, recorded verbatim in every
//! run record, so the emissions arithmetic is auditable. Elapsed time comes
//! from the monotonic clock; a wall-clock timestamp is kept separately for
//! the run log.

use std::cell::RefCell;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default assumed average power draw in watts.
pub const DEFAULT_POWER_WATTS: f64 = 45.0;
/// Default grid carbon intensity in grams CO2e per kWh.
pub const DEFAULT_CARBON_INTENSITY: f64 = 400.0;

#[derive(Debug, Error)]
pub enum MeterError {
    #[error("nested measurement attempt inside phase '{0}'")]
    NestedMeasurement(String),
    #[error("invalid meter config: {0}")]
    InvalidConfig(String),
}

/// Explicit power model: energy = time x power x overhead, emissions =
/// energy x carbon intensity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeterConfig {
    pub power_watts: f64,
    /// Grams CO2e per kWh.
    pub carbon_intensity: f64,
    pub overhead_multiplier: f64,
    /// Free-text description of the execution environment, recorded in
    /// outputs.
    pub environment_note: String,
}

impl Default for MeterConfig {
    fn default() -> Self {
        MeterConfig {
            power_watts: DEFAULT_POWER_WATTS,
            carbon_intensity: DEFAULT_CARBON_INTENSITY,
            overhead_multiplier: 1.0,
            environment_note: String::new(),
        }
    }
}

impl MeterConfig {
    pub fn validate(&self) -> Result<(), MeterError> {
        if !self.power_watts.is_finite() || self.power_watts <= 0.0 {
            return Err(MeterError::InvalidConfig("power_watts must be > 0".into()));
        }
        if !self.carbon_intensity.is_finite() || self.carbon_intensity < 0.0 {
            return Err(MeterError::InvalidConfig(
                "carbon_intensity must be >= 0".into(),
            ));
        }
        if !self.overhead_multiplier.is_finite() || self.overhead_multiplier < 1.0 {
            return Err(MeterError::InvalidConfig(
                "overhead_multiplier must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Convert elapsed seconds to (energy in kWh, emissions in grams CO2e):
/// `energy = seconds * watts * overhead / 3.6e6`, `emissions = energy *
/// intensity`.
pub fn to_emissions(total_seconds: f64, config: &MeterConfig) -> (f64, f64) {
    let energy_kwh = total_seconds * config.power_watts * config.overhead_multiplier / 3.6e6;
    let emissions_g = energy_kwh * config.carbon_intensity;
    (energy_kwh, emissions_g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub label: String,
    pub elapsed_seconds: f64,
}

/// Completed measurement of one workflow run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeasurement {
    pub phases: Vec<Phase>,
    pub total_seconds: f64,
    pub energy_kwh: f64,
    pub emissions_g: f64,
    /// Wall-clock start of the measured run (unix milliseconds); kept for
    /// the run log only.
    pub started_unix_ms: u64,
}

/// Metering context for one run. One phase may be active at a time; nested
/// `measure` calls are an error.
pub struct Meter {
    config: MeterConfig,
    phases: RefCell<Vec<Phase>>,
    active: RefCell<Option<String>>,
    started_unix_ms: u64,
}

impl Meter {
    pub fn new(config: MeterConfig) -> Result<Self, MeterError> {
        config.validate()?;
        let started_unix_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        Ok(Meter {
            config,
            phases: RefCell::new(Vec::new()),
            active: RefCell::new(None),
            started_unix_ms,
        })
    }

    pub fn config(&self) -> &MeterConfig {
        &self.config
    }

    /// Run `work` as a named phase, recording its elapsed monotonic time.
    pub fn measure<T>(&self, label: &str, work: impl FnOnce() -> T) -> Result<T, MeterError> {
        {
            let active = self.active.borrow();
            if let Some(current) = active.as_ref() {
                return Err(MeterError::NestedMeasurement(current.clone()));
            }
        }
        *self.active.borrow_mut() = Some(label.to_string());
        let start = Instant::now();
        let result = work();
        let elapsed_seconds = start.elapsed().as_secs_f64();
        *self.active.borrow_mut() = None;
        self.phases.borrow_mut().push(Phase {
            label: label.to_string(),
            elapsed_seconds,
        });
        Ok(result)
    }

    /// Snapshot the phases recorded so far into a [`RunMeasurement`].
    pub fn snapshot(&self) -> RunMeasurement {
        let phases = self.phases.borrow().clone();
        let total_seconds: f64 = phases.iter().map(|p| p.elapsed_seconds).sum();
        let (energy_kwh, emissions_g) = to_emissions(total_seconds, &self.config);
        RunMeasurement {
            phases,
            total_seconds,
            energy_kwh,
            emissions_g,
            started_unix_ms: self.started_unix_ms,
        }
    }
}
