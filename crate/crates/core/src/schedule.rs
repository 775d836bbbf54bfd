use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponential decay toward a floor: `floor + (initial - floor) * exp(-k / tau)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecaySchedule {
    pub initial: f64,
    pub floor: f64,
    pub tau: f64,
}

impl DecaySchedule {
    pub fn new(initial: f64, floor: f64, tau: f64) -> Result<Self> {
        let s = DecaySchedule { initial, floor, tau };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.initial.is_finite() && self.initial > 0.0) {
            return Err(Error::Parameter(format!(
                "schedule initial must be positive, got {}",
                self.initial
            )));
        }
        if !(self.floor.is_finite() && self.floor >= 0.0) {
            return Err(Error::Parameter(format!(
                "schedule floor must be nonnegative, got {}",
                self.floor
            )));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::Parameter(format!(
                "schedule tau must be positive, got {}",
                self.tau
            )));
        }
        Ok(())
    }

    pub fn value(&self, step: u64) -> f64 {
        self.floor + (self.initial - self.floor) * (-(step as f64) / self.tau).exp()
    }

    /// Learning-rate schedule for preferred values and tuning variances.
    pub fn default_alpha(planned_steps: u64) -> Self {
        DecaySchedule { initial: 0.1, floor: 0.001, tau: half(planned_steps) }
    }

    /// Neighbourhood width, in lattice units, for a map of `n_neurons`.
    /// It shrinks four times faster than the rates so the map has time to
    /// settle locally after the global ordering phase.
    pub fn default_sigma(n_neurons: usize, planned_steps: u64) -> Self {
        DecaySchedule::sigma_for(n_neurons, half(planned_steps) / 4.0)
    }

    /// `N/2 -> 0.5` with time constant `tau`.
    pub fn sigma_for(n_neurons: usize, tau: f64) -> Self {
        DecaySchedule { initial: (n_neurons as f64 / 2.0).max(0.5), floor: 0.5, tau }
    }

    pub fn default_eta(planned_steps: u64) -> Self {
        DecaySchedule { initial: 0.05, floor: 0.001, tau: half(planned_steps) }
    }

    pub fn default_beta(planned_steps: u64) -> Self {
        DecaySchedule { initial: 0.5, floor: 0.01, tau: half(planned_steps) }
    }
}

fn half(steps: u64) -> f64 {
    (steps as f64 / 2.0).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn starts_at_initial() {
        let s = DecaySchedule::new(0.1, 0.01, 1000.0).unwrap();
        assert_eq!(s.value(0), 0.1);
    }

    #[test]
    fn approaches_floor() {
        let s = DecaySchedule::new(0.1, 0.01, 10.0).unwrap();
        assert_relative_eq!(s.value(100_000), 0.01, epsilon = 1e-15);
    }

    #[test]
    fn one_time_constant() {
        let s = DecaySchedule::new(0.1, 0.01, 1000.0).unwrap();
        // 0.01 + 0.09 / e
        assert_relative_eq!(s.value(1000), 0.043_109_149_705_429_8, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(DecaySchedule::new(0.0, 0.0, 1.0).is_err());
        assert!(DecaySchedule::new(1.0, -0.1, 1.0).is_err());
        assert!(DecaySchedule::new(1.0, 0.1, 0.0).is_err());
    }

    #[test]
    fn monotone_above_floor() {
        let s = DecaySchedule::new(2.0, 0.5, 37.0).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..2000 {
            let v = s.value(k);
            assert!(v >= s.floor);
            assert!(v <= prev);
            if k < 500 {
                assert!(v < prev);
            }
            prev = v;
        }
    }
}
