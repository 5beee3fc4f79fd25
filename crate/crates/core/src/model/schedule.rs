//! Hourly load scheduling.

use thiserror::Error;

use super::Network;
use crate::scalar::Scalar;

/// Hourly demand multipliers applied to the nominal (peak) bus loads.
/// Hour numbering is 1-based to match the scenario clock.
#[derive(Debug, Clone)]
pub struct LoadProfile<T> {
    pub hourly_multipliers: Vec<T>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("hour {hour} outside profile of length {len}")]
    HourOutOfRange { hour: usize, len: usize },
    #[error("profile line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("profile multiplier {value} at hour {hour} outside (0, 1]")]
    BadMultiplier { hour: usize, value: f64 },
}

impl<T: Scalar> LoadProfile<T> {
    /// Parse `hour,multiplier` CSV. Lines starting with `#` and the header
    /// line are skipped; hours must be 1..=N in order.
    pub fn parse_csv(text: &str) -> Result<Self, ScheduleError> {
        let mut mult = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("hour") {
                continue;
            }
            let mut it = line.split(',');
            let parse_field = |s: Option<&str>| -> Result<f64, ScheduleError> {
                s.and_then(|v| v.trim().parse().ok())
                    .ok_or_else(|| ScheduleError::Malformed {
                        line: idx + 1,
                        reason: format!("expected `hour,multiplier`, got {line:?}"),
                    })
            };
            let hour = parse_field(it.next())? as usize;
            let value = parse_field(it.next())?;
            if hour != mult.len() + 1 {
                return Err(ScheduleError::Malformed {
                    line: idx + 1,
                    reason: format!("hour {hour} out of order, expected {}", mult.len() + 1),
                });
            }
            if !(value > 0.0 && value <= 1.0) {
                return Err(ScheduleError::BadMultiplier { hour, value });
            }
            mult.push(T::of(value));
        }
        Ok(Self {
            hourly_multipliers: mult,
        })
    }

    pub fn len(&self) -> usize {
        self.hourly_multipliers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hourly_multipliers.is_empty()
    }

    pub fn multiplier(&self, hour: usize) -> Result<T, ScheduleError> {
        if hour == 0 || hour > self.len() {
            return Err(ScheduleError::HourOutOfRange {
                hour,
                len: self.len(),
            });
        }
        Ok(self.hourly_multipliers[hour - 1])
    }
}

/// Per-bus scheduled demand for one hour: `nominal * multiplier[hour] *
/// served_fraction`, summed over the loads at each bus. Returns `(P, Q)` in
/// MW/MVAr indexed by bus.
pub fn scheduled_load<T: Scalar>(
    net: &Network<T>,
    profile: &LoadProfile<T>,
    hour: usize,
) -> Result<Vec<(T, T)>, ScheduleError> {
    let m = profile.multiplier(hour)?;
    let mut demand = vec![(T::zero(), T::zero()); net.buses.len()];
    for load in &net.loads {
        let b = net.bus_index(load.bus).expect("resolved load bus");
        demand[b].0 += load.p_nominal * m * load.served_fraction;
        demand[b].1 += load.q_nominal * m * load.served_fraction;
    }
    Ok(demand)
}
