//! Relay state machines evaluated once per dynamics step: mho distance
//! zones, staged under-frequency and under-voltage load shedding with
//! breaker delays, and the out-of-step generator-tripping corrective action.

use num_complex::Complex;
use thiserror::Error;

use crate::scalar::Scalar;

pub const NOMINAL_HZ: f64 = 60.0;

/// One graded distance zone: a mho circle reaching `reach` times the line
/// impedance with a definite-time delay in cycles.
#[derive(Debug, Clone, Copy)]
pub struct DistanceZone<T> {
    pub reach: T,
    pub delay_cycles: T,
}

/// Distance relay settings for one monitored branch end.
#[derive(Debug, Clone)]
pub struct DistanceRelaySettings<T> {
    /// Positive-sequence impedance of the protected line, per-unit.
    pub line_impedance: Complex<T>,
    pub zones: Vec<DistanceZone<T>>,
    /// Below this current magnitude (per-unit) the relay sees no measurement.
    pub current_floor: T,
}

impl<T: Scalar> DistanceRelaySettings<T> {
    /// Grading used throughout: 90% instantaneous, 120% at 15 cycles,
    /// 220% at 90 cycles.
    pub fn standard(line_impedance: Complex<T>) -> Self {
        Self {
            line_impedance,
            zones: vec![
                DistanceZone {
                    reach: T::of(0.90),
                    delay_cycles: T::zero(),
                },
                DistanceZone {
                    reach: T::of(1.20),
                    delay_cycles: T::of(15.0),
                },
                DistanceZone {
                    reach: T::of(2.20),
                    delay_cycles: T::of(90.0),
                },
            ],
            current_floor: T::of(1e-4),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RelayConfigError {
    #[error("distance zones must have strictly increasing reaches")]
    ZoneReachOrder,
    #[error("distance zone delays must be non-decreasing")]
    ZoneDelayOrder,
    #[error("stage thresholds must be strictly decreasing")]
    StageOrder,
    #[error("stage shed fractions must be positive and at most 1")]
    StageFraction,
    #[error("relay settings line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

pub fn validate_distance<T: Scalar>(s: &DistanceRelaySettings<T>) -> Result<(), RelayConfigError> {
    for w in s.zones.windows(2) {
        if w[1].reach <= w[0].reach {
            return Err(RelayConfigError::ZoneReachOrder);
        }
        if w[1].delay_cycles < w[0].delay_cycles {
            return Err(RelayConfigError::ZoneDelayOrder);
        }
    }
    Ok(())
}

/// One load-shedding stage: threshold, fraction of the remaining load to
/// shed, and the pickup delay in seconds.
#[derive(Debug, Clone, Copy)]
pub struct ShedStage<T> {
    pub threshold: T,
    pub shed_fraction: T,
    pub pickup_delay_s: T,
}

#[derive(Debug, Clone)]
pub struct UflsSettings<T> {
    pub stages: Vec<ShedStage<T>>,
    pub breaker_delay_s: T,
}

impl<T: Scalar> Default for UflsSettings<T> {
    fn default() -> Self {
        Self {
            stages: vec![
                ShedStage {
                    threshold: T::of(59.5),
                    shed_fraction: T::of(0.10),
                    pickup_delay_s: T::of(0.05),
                },
                ShedStage {
                    threshold: T::of(59.2),
                    shed_fraction: T::of(0.20),
                    pickup_delay_s: T::of(0.05),
                },
                ShedStage {
                    threshold: T::of(58.8),
                    shed_fraction: T::of(0.20),
                    pickup_delay_s: T::of(0.05),
                },
            ],
            breaker_delay_s: T::of(0.02),
        }
    }
}

#[derive(Debug, Clone)]
pub struct UvlsSettings<T> {
    pub stages: Vec<ShedStage<T>>,
    pub breaker_delay_s: T,
}

impl<T: Scalar> Default for UvlsSettings<T> {
    fn default() -> Self {
        Self {
            stages: vec![
                ShedStage {
                    threshold: T::of(0.90),
                    shed_fraction: T::of(0.30),
                    pickup_delay_s: T::of(0.75),
                },
                ShedStage {
                    threshold: T::of(0.85),
                    shed_fraction: T::of(0.50),
                    pickup_delay_s: T::of(1.00),
                },
            ],
            breaker_delay_s: T::of(0.05),
        }
    }
}

pub fn validate_stages<T: Scalar>(stages: &[ShedStage<T>]) -> Result<(), RelayConfigError> {
    for w in stages.windows(2) {
        if w[1].threshold >= w[0].threshold {
            return Err(RelayConfigError::StageOrder);
        }
    }
    for s in stages {
        if s.shed_fraction <= T::zero() || s.shed_fraction > T::one() {
            return Err(RelayConfigError::StageFraction);
        }
    }
    Ok(())
}

/// Apparent impedance seen by a relay: Z = V / I. Returns `None` when the
/// current magnitude sits below the measurement floor.
pub fn apparent_impedance<T: Scalar>(
    v_terminal: Complex<T>,
    i_line: Complex<T>,
    current_floor: T,
) -> Option<Complex<T>> {
    if i_line.norm() <= current_floor {
        return None;
    }
    Some(v_terminal / i_line)
}

/// Runtime state of one distance relay (one branch end).
#[derive(Debug, Clone)]
pub struct DistanceRelayState<T> {
    /// In-zone accumulated time per zone, seconds.
    timers: Vec<T>,
    pub operated: bool,
}

impl<T: Scalar> DistanceRelayState<T> {
    pub fn new(zones: usize) -> Self {
        Self {
            timers: vec![T::zero(); zones],
            operated: false,
        }
    }

    pub fn reset(&mut self) {
        for t in &mut self.timers {
            *t = T::zero();
        }
        self.operated = false;
    }
}

/// Is `z` inside the mho circle whose diameter runs from the origin to
/// `reach * z_line`?
fn inside_mho<T: Scalar>(z: Complex<T>, z_line: Complex<T>, reach: T) -> bool {
    let center = z_line * reach / T::of(2.0);
    (z - center).norm() <= center.norm()
}

/// Advance one distance relay by one step. `z` is the measured impedance
/// (`None` when below the current floor). Returns the tripping zone (1-based)
/// when the relay operates this step.
pub fn distance_step<T: Scalar>(
    settings: &DistanceRelaySettings<T>,
    state: &mut DistanceRelayState<T>,
    z: Option<Complex<T>>,
    dt: T,
) -> Option<usize> {
    if state.operated {
        return None;
    }
    let cycle_s = T::of(1.0 / NOMINAL_HZ);
    for (k, zone) in settings.zones.iter().enumerate() {
        let in_zone = z
            .map(|z| inside_mho(z, settings.line_impedance, zone.reach))
            .unwrap_or(false);
        if in_zone {
            let delay_s = zone.delay_cycles * cycle_s;
            if state.timers[k] >= delay_s {
                state.operated = true;
                return Some(k + 1);
            }
            state.timers[k] += dt;
            // zero-delay zones trip on the arming step
            if delay_s == T::zero() {
                state.operated = true;
                return Some(k + 1);
            }
        } else {
            state.timers[k] = T::zero();
        }
    }
    None
}

/// Runtime state of a staged load-shedding relay at one bus.
#[derive(Debug, Clone)]
pub struct ShedRelayState<T> {
    pickup_timers: Vec<T>,
    /// Breaker countdown per stage once picked up; `None` until the stage
    /// operates.
    breaker_timers: Vec<Option<T>>,
    operated: Vec<bool>,
}

impl<T: Scalar> ShedRelayState<T> {
    pub fn new(stages: usize) -> Self {
        Self {
            pickup_timers: vec![T::zero(); stages],
            breaker_timers: vec![None; stages],
            operated: vec![false; stages],
        }
    }

    pub fn any_operated(&self) -> bool {
        self.operated.iter().any(|&o| o)
    }
}

/// Shared stepping logic for UFLS/UVLS: `below_threshold` decides pickup.
/// Returns the fractions (of remaining load) to shed this step, one entry
/// per stage whose breaker expires now.
fn shed_step<T: Scalar>(
    stages: &[ShedStage<T>],
    breaker_delay_s: T,
    state: &mut ShedRelayState<T>,
    signal: T,
    dt: T,
) -> Vec<(usize, T)> {
    let mut events = Vec::new();
    for (k, stage) in stages.iter().enumerate() {
        // breaker countdown runs regardless of signal recovery
        if let Some(remaining) = state.breaker_timers[k] {
            let left = remaining - dt;
            if left <= T::zero() {
                state.breaker_timers[k] = None;
                events.push((k, stage.shed_fraction));
            } else {
                state.breaker_timers[k] = Some(left);
            }
            continue;
        }
        if state.operated[k] {
            continue;
        }
        if signal < stage.threshold {
            state.pickup_timers[k] += dt;
            if state.pickup_timers[k] >= stage.pickup_delay_s {
                state.operated[k] = true;
                if breaker_delay_s <= T::zero() {
                    events.push((k, stage.shed_fraction));
                } else {
                    state.breaker_timers[k] = Some(breaker_delay_s);
                }
            }
        } else {
            state.pickup_timers[k] = T::zero();
        }
    }
    events
}

/// Under-frequency step at one bus. Returns `(stage index, fraction of
/// remaining load)` for every stage operating this step.
pub fn ufls_step<T: Scalar>(
    settings: &UflsSettings<T>,
    state: &mut ShedRelayState<T>,
    bus_frequency_hz: T,
    dt: T,
) -> Vec<(usize, T)> {
    shed_step(
        &settings.stages,
        settings.breaker_delay_s,
        state,
        bus_frequency_hz,
        dt,
    )
}

/// Under-voltage step at one bus.
pub fn uvls_step<T: Scalar>(
    settings: &UvlsSettings<T>,
    state: &mut ShedRelayState<T>,
    bus_voltage_pu: T,
    dt: T,
) -> Vec<(usize, T)> {
    shed_step(
        &settings.stages,
        settings.breaker_delay_s,
        state,
        bus_voltage_pu,
        dt,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn zline() -> Complex64 {
        Complex64::new(0.02, 0.2)
    }

    #[test]
    fn apparent_impedance_basics() {
        let z = apparent_impedance(
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.0),
            1e-4,
        )
        .unwrap();
        assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        // bolted condition at mid-line: V = 0.5 Zline * I
        let i = Complex64::new(0.8, -0.3);
        let v = zline() * 0.5 * i;
        let z = apparent_impedance(v, i, 1e-4).unwrap();
        assert!((z - zline() * 0.5).norm() < 1e-12);
        // dead current: no measurement
        assert!(apparent_impedance(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), 1e-4)
            .is_none());
    }

    #[test]
    fn zone1_trips_instantly_at_half_line() {
        let settings = DistanceRelaySettings::standard(zline());
        let mut state = DistanceRelayState::new(3);
        let trip = distance_step(&settings, &mut state, Some(zline() * 0.5), 1.0 / 120.0);
        assert_eq!(trip, Some(1));
    }

    #[test]
    fn zone2_trips_after_fifteen_cycles() {
        let settings = DistanceRelaySettings::<f64>::standard(zline());
        let mut state = DistanceRelayState::new(3);
        let dt = 1.0 / 120.0;
        let z = Some(zline() * 1.1);
        let mut t = 0.0;
        let mut tripped_at = None;
        for _ in 0..200 {
            if let Some(zone) = distance_step(&settings, &mut state, z, dt) {
                tripped_at = Some((zone, t));
                break;
            }
            t += dt;
        }
        let (zone, at) = tripped_at.expect("zone 2 must trip");
        assert_eq!(zone, 2);
        // 15 cycles at 60 Hz = 0.25 s, quantized to one step
        assert!((at - 0.25).abs() <= dt + 1e-12, "tripped at {at}");
    }

    #[test]
    fn far_impedance_never_trips() {
        let settings = DistanceRelaySettings::standard(zline());
        let mut state = DistanceRelayState::new(3);
        for _ in 0..2000 {
            assert_eq!(
                distance_step(&settings, &mut state, Some(zline() * 3.0), 1.0 / 120.0),
                None
            );
        }
    }

    #[test]
    fn zones_are_nested() {
        use proptest::prelude::*;
        let mut runner = proptest::test_runner::TestRunner::default();
        let settings = DistanceRelaySettings::standard(zline());
        runner
            .run(&(-0.5f64..0.5, -0.5f64..0.5), |(re, im)| {
                let z = Complex64::new(re, im);
                for w in settings.zones.windows(2) {
                    let inner = inside_mho(z, settings.line_impedance, w[0].reach);
                    let outer = inside_mho(z, settings.line_impedance, w[1].reach);
                    prop_assert!(!inner || outer);
                }
                Ok(())
            })
            .unwrap();
    }

    #[test]
    fn dropout_resets_zone_timer() {
        let settings = DistanceRelaySettings::<f64>::standard(zline());
        let mut state = DistanceRelayState::new(3);
        let dt = 1.0 / 120.0;
        let z_in = Some(zline() * 1.1);
        // hold almost to the zone-2 delay, drop out, re-enter: no trip before
        // a full new delay elapses
        for _ in 0..29 {
            assert_eq!(distance_step(&settings, &mut state, z_in, dt), None);
        }
        assert_eq!(distance_step(&settings, &mut state, None, dt), None);
        for _ in 0..29 {
            assert_eq!(distance_step(&settings, &mut state, z_in, dt), None);
        }
    }

    #[test]
    fn ufls_stage1_timing_is_pickup_plus_breaker() {
        let settings = UflsSettings::<f64>::default();
        let mut state = ShedRelayState::new(settings.stages.len());
        let dt = 1.0 / 120.0;
        let mut t: f64 = 0.0;
        let mut shed_time = None;
        for _ in 0..100 {
            let events = ufls_step(&settings, &mut state, 59.4, dt);
            t += dt;
            if let Some(&(stage, frac)) = events.first() {
                assert_eq!(stage, 0);
                assert!((frac - 0.10).abs() < 1e-12);
                shed_time = Some(t);
                break;
            }
        }
        // 0.05 pickup + 0.02 breaker = 0.07 s, quantized up to whole steps
        let t = shed_time.expect("stage 1 must shed");
        assert!(t >= 0.07 - 1e-9 && t <= 0.07 + 2.0 * dt, "shed at {t}");
    }

    #[test]
    fn healthy_frequency_never_sheds() {
        let settings = UflsSettings::<f64>::default();
        let mut state = ShedRelayState::new(settings.stages.len());
        for _ in 0..10_000 {
            assert!(ufls_step(&settings, &mut state, 60.0, 1.0 / 120.0).is_empty());
        }
    }

    #[test]
    fn ramp_fires_stages_in_order_without_repeats() {
        let settings = UflsSettings::<f64>::default();
        let mut state = ShedRelayState::new(settings.stages.len());
        let dt = 1.0 / 120.0;
        let mut f = 60.0;
        let mut fired = Vec::new();
        for _ in 0..2000 {
            f = (f - 0.002).max(58.0);
            for (stage, _) in ufls_step(&settings, &mut state, f, dt) {
                fired.push(stage);
            }
        }
        assert_eq!(fired, vec![0, 1, 2]);
    }

    #[test]
    fn uvls_timing_and_stage_order() {
        let settings = UvlsSettings::<f64>::default();
        let mut state = ShedRelayState::new(settings.stages.len());
        let dt = 1.0 / 120.0;
        let mut t: f64 = 0.0;
        let mut events = Vec::new();
        for _ in 0..400 {
            for (stage, frac) in uvls_step(&settings, &mut state, 0.88, dt) {
                events.push((stage, frac, t));
            }
            t += dt;
        }
        // only stage 1 picks up at 0.88 pu: 0.75 pickup + 0.05 breaker
        assert_eq!(events.len(), 1);
        let (stage, frac, at) = events[0];
        assert_eq!(stage, 0);
        assert!((frac - 0.30).abs() < 1e-12);
        assert!((at - 0.80).abs() <= 2.0 * dt, "shed at {at}");

        // deep sag picks up both stages in order
        let mut state = ShedRelayState::new(settings.stages.len());
        let mut fired = Vec::new();
        for _ in 0..400 {
            for (stage, _) in uvls_step(&settings, &mut state, 0.80, dt) {
                fired.push(stage);
            }
        }
        assert_eq!(fired, vec![0, 1]);
    }

    #[test]
    fn recovery_before_pickup_resets() {
        let settings = UflsSettings::<f64>::default();
        let mut state = ShedRelayState::new(settings.stages.len());
        let dt = 1.0 / 120.0;
        // dip for less than the pickup delay, recover, dip again
        for _ in 0..4 {
            assert!(ufls_step(&settings, &mut state, 59.4, dt).is_empty());
        }
        assert!(ufls_step(&settings, &mut state, 60.0, dt).is_empty());
        for _ in 0..4 {
            assert!(ufls_step(&settings, &mut state, 59.4, dt).is_empty());
        }
        assert!(!state.any_operated());
    }

    #[test]
    fn default_settings_validate() {
        validate_stages(&UflsSettings::<f64>::default().stages).unwrap();
        validate_stages(&UvlsSettings::<f64>::default().stages).unwrap();
        validate_distance(&DistanceRelaySettings::<f64>::standard(zline())).unwrap();
    }

    #[test]
    fn non_monotone_stages_rejected() {
        let mut s = UflsSettings::<f64>::default();
        s.stages[2].threshold = 59.8;
        assert_eq!(
            validate_stages(&s.stages).unwrap_err(),
            RelayConfigError::StageOrder
        );
    }
}
