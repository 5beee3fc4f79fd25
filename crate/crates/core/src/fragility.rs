//! Windstorm fragility: failure probability curves, the hourly hazard
//! profile, Monte Carlo failure sampling, and MTTR-based repair scheduling.

use thiserror::Error;

use crate::model::{Network, OperatingState};
use crate::rng::RandomSource;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RobustnessClass {
    /// Less robust corridors (138 kV in the shipped data).
    Normal,
    /// Hardened corridors (230 kV in the shipped data).
    MoreRobust,
}

impl std::fmt::Display for RobustnessClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RobustnessClass::Normal => write!(f, "normal"),
            RobustnessClass::MoreRobust => write!(f, "more-robust"),
        }
    }
}

/// Failure probability as a function of wind speed: zero below the critical
/// speed `v_cr`, one above the breakdown speed `v_br`, and a monotone
/// piecewise-linear interpolation of `points` in between.
#[derive(Debug, Clone)]
pub struct FragilityCurve<T> {
    pub v_cr: T,
    pub v_br: T,
    /// `(wind m/s, probability)` samples on `[v_cr, v_br]`, non-decreasing.
    pub points: Vec<(T, T)>,
    pub class: RobustnessClass,
}

#[derive(Debug, Error, PartialEq)]
pub enum FragilityError {
    #[error("curve for class {0}: {1}")]
    BadCurve(String, String),
    #[error("fragility csv line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("no fragility curve configured for class {0}")]
    MissingCurve(String),
    #[error("wind csv line {line}: {reason}")]
    MalformedWind { line: usize, reason: String },
    #[error("wind profile covers {have} hours, need at least {need}")]
    WindTooShort { have: usize, need: usize },
}

impl<T: Scalar> FragilityCurve<T> {
    pub fn new(
        class: RobustnessClass,
        points: Vec<(T, T)>,
    ) -> Result<Self, FragilityError> {
        let name = class.to_string();
        if points.len() < 2 {
            return Err(FragilityError::BadCurve(
                name,
                "need at least two points".into(),
            ));
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(FragilityError::BadCurve(
                    name,
                    "wind speeds must be strictly increasing".into(),
                ));
            }
            if w[1].1 < w[0].1 {
                return Err(FragilityError::BadCurve(
                    name,
                    "probabilities must be non-decreasing".into(),
                ));
            }
        }
        let first = points.first().unwrap();
        let last = points.last().unwrap();
        if first.1 < T::zero() {
            return Err(FragilityError::BadCurve(
                name,
                "probability below zero at v_cr".into(),
            ));
        }
        if (last.1 - T::one()).abs() > T::of(1e-9) {
            return Err(FragilityError::BadCurve(
                name,
                "probability at v_br must be 1".into(),
            ));
        }
        Ok(Self {
            v_cr: first.0,
            v_br: last.0,
            points,
            class,
        })
    }

    /// Parse `wind_mps,probability` CSV for one robustness class.
    pub fn parse_csv(class: RobustnessClass, text: &str) -> Result<Self, FragilityError> {
        let mut points = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("wind") {
                continue;
            }
            let mut it = line.split(',');
            let mut field = || -> Result<T, FragilityError> {
                it.next()
                    .and_then(|v| v.trim().parse::<f64>().ok())
                    .map(T::of)
                    .ok_or_else(|| FragilityError::Malformed {
                        line: idx + 1,
                        reason: format!("expected `wind_mps,probability`, got {line:?}"),
                    })
            };
            let w = field()?;
            let p = field()?;
            points.push((w, p));
        }
        Self::new(class, points)
    }
}

/// Eq.-style piecewise failure probability: 0 below v_cr, 1 above v_br,
/// interpolated in between. Always lands in [0, 1].
pub fn failure_probability<T: Scalar>(curve: &FragilityCurve<T>, v: T) -> T {
    if v < curve.v_cr {
        return T::zero();
    }
    if v > curve.v_br {
        return T::one();
    }
    let pts = &curve.points;
    for w in pts.windows(2) {
        let (w0, p0) = w[0];
        let (w1, p1) = w[1];
        if v <= w1 {
            let frac = (v - w0) / (w1 - w0);
            return (p0 + frac * (p1 - p0)).min(T::one()).max(T::zero());
        }
    }
    T::one()
}

/// Hourly wind speed signal for the area hit by the storm. Hour numbering is
/// 1-based like the scenario clock.
#[derive(Debug, Clone)]
pub struct WindProfile<T> {
    pub hourly_speed: Vec<T>,
    pub affected_area: u32,
}

impl<T: Scalar> WindProfile<T> {
    /// Parse `hour,speed_mps` CSV.
    pub fn parse_csv(text: &str, affected_area: u32) -> Result<Self, FragilityError> {
        let mut speeds = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("hour") {
                continue;
            }
            let mut it = line.split(',');
            let mut field = || -> Result<f64, FragilityError> {
                it.next()
                    .and_then(|v| v.trim().parse().ok())
                    .ok_or_else(|| FragilityError::MalformedWind {
                        line: idx + 1,
                        reason: format!("expected `hour,speed_mps`, got {line:?}"),
                    })
            };
            let hour = field()? as usize;
            let speed = field()?;
            if hour != speeds.len() + 1 {
                return Err(FragilityError::MalformedWind {
                    line: idx + 1,
                    reason: format!("hour {hour} out of order"),
                });
            }
            if speed < 0.0 {
                return Err(FragilityError::MalformedWind {
                    line: idx + 1,
                    reason: format!("negative wind speed {speed}"),
                });
            }
            speeds.push(T::of(speed));
        }
        Ok(Self {
            hourly_speed: speeds,
            affected_area,
        })
    }

    pub fn speed(&self, hour: usize) -> T {
        self.hourly_speed
            .get(hour.saturating_sub(1))
            .copied()
            .unwrap_or_else(T::zero)
    }
}

/// Repair-time parameters. Lines repair five times faster than towers.
#[derive(Debug, Clone)]
pub struct RepairParams {
    pub mttr_line_hours: f64,
    pub mttr_tower_hours: f64,
    /// No repair completes while the storm is still blowing.
    pub repair_blocked_during_event: bool,
    /// Probability that a branch failure is a tower failure (vs. a line
    /// failure), deciding which MTTR applies.
    pub tower_failure_probability: f64,
    /// Use the MTTR itself as the duration instead of an exponential draw.
    pub deterministic: bool,
}

impl RepairParams {
    /// Derive line MTTR from tower MTTR at the fixed 1:5 ratio.
    pub fn from_tower_mttr(mttr_tower_hours: f64) -> Self {
        Self {
            mttr_line_hours: mttr_tower_hours / 5.0,
            mttr_tower_hours,
            repair_blocked_during_event: true,
            tower_failure_probability: 0.5,
            deterministic: false,
        }
    }
}

impl Default for RepairParams {
    fn default() -> Self {
        Self::from_tower_mttr(250.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureMode {
    Line,
    Tower,
}

impl std::fmt::Display for FailureMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FailureMode::Line => write!(f, "line"),
            FailureMode::Tower => write!(f, "tower"),
        }
    }
}

/// One branch outage: fails at `failure_hour`, back at `restore_hour`.
#[derive(Debug, Clone, PartialEq)]
pub struct Outage {
    pub branch_idx: usize,
    pub failure_hour: usize,
    pub restore_hour: usize,
    pub mode: FailureMode,
}

/// All storm-driven branch outages for one replica, sorted by failure hour
/// then branch index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutageTimeline {
    pub outages: Vec<Outage>,
}

impl OutageTimeline {
    pub fn failures_at(&self, hour: usize) -> impl Iterator<Item = &Outage> {
        self.outages.iter().filter(move |o| o.failure_hour == hour)
    }

    pub fn restores_at(&self, hour: usize) -> impl Iterator<Item = &Outage> {
        self.outages.iter().filter(move |o| o.restore_hour == hour)
    }
}

/// Survival check for one asset-hour: the asset fails iff the failure
/// probability exceeds the uniform draw.
pub fn sample_status<T: Scalar>(prob: T, rng: &mut RandomSource) -> bool {
    let failed = prob.as_f64() > rng.draw();
    failed
}

/// Repair completion hour: the failure hour plus an exponential duration
/// with the mode's MTTR as mean (or exactly the MTTR in deterministic mode),
/// rounded up to a whole hour and clamped to the event end when repairs are
/// blocked during the event.
pub fn schedule_repair(
    failure_hour: usize,
    mode: FailureMode,
    params: &RepairParams,
    event_end_hour: usize,
    rng: &mut RandomSource,
) -> usize {
    let mttr = match mode {
        FailureMode::Line => params.mttr_line_hours,
        FailureMode::Tower => params.mttr_tower_hours,
    };
    let duration = if params.deterministic {
        mttr
    } else {
        rng.draw_exponential(mttr)
    };
    let restore = failure_hour + (duration.ceil() as usize).max(1);
    if params.repair_blocked_during_event {
        restore.max(event_end_hour)
    } else {
        restore
    }
}

/// Window of storm hours, inclusive start, exclusive end.
#[derive(Debug, Clone, Copy)]
pub struct EventWindow {
    pub start_hour: usize,
    pub duration_hours: usize,
}

impl EventWindow {
    pub fn end_hour(&self) -> usize {
        self.start_hour + self.duration_hours
    }

    pub fn contains(&self, hour: usize) -> bool {
        hour >= self.start_hour && hour < self.end_hour()
    }
}

/// Pick the fragility class for a branch: hardened when either end operates
/// at 230 kV or above, normal otherwise.
pub fn branch_class<T: Scalar>(net: &Network<T>, branch_idx: usize) -> RobustnessClass {
    let br = &net.branches[branch_idx];
    let (f, t) = br.ends(net);
    let kv = net.buses[f].base_kv.max(net.buses[t].base_kv);
    if kv >= T::of(230.0) {
        RobustnessClass::MoreRobust
    } else {
        RobustnessClass::Normal
    }
}

/// True when the branch is exposed to the storm: either endpoint lies in the
/// affected area.
pub fn branch_in_area<T: Scalar>(net: &Network<T>, branch_idx: usize, area: u32) -> bool {
    let br = &net.branches[branch_idx];
    let (f, t) = br.ends(net);
    net.buses[f].area == area || net.buses[t].area == area
}

/// Sample the full outage timeline for one replica. For every event hour,
/// each still-intact exposed branch is sampled once against its class curve
/// at that hour's wind speed; failures get a mode and a restore hour.
pub fn build_outage_timeline<T: Scalar>(
    net: &Network<T>,
    wind: &WindProfile<T>,
    curves: &[FragilityCurve<T>],
    params: &RepairParams,
    window: EventWindow,
    rng: &mut RandomSource,
) -> Result<OutageTimeline, FragilityError> {
    let curve_for = |class: RobustnessClass| -> Result<&FragilityCurve<T>, FragilityError> {
        curves
            .iter()
            .find(|c| c.class == class)
            .ok_or_else(|| FragilityError::MissingCurve(class.to_string()))
    };
    if wind.hourly_speed.len() < window.end_hour().saturating_sub(1) {
        return Err(FragilityError::WindTooShort {
            have: wind.hourly_speed.len(),
            need: window.end_hour() - 1,
        });
    }

    let exposed: Vec<usize> = (0..net.branches.len())
        .filter(|&bi| branch_in_area(net, bi, wind.affected_area))
        .collect();
    // classes resolved up front so a missing curve fails before any draw
    let mut classes = Vec::with_capacity(exposed.len());
    for &bi in &exposed {
        classes.push(curve_for(branch_class(net, bi))?);
    }

    let mut down_until = vec![0usize; net.branches.len()];
    let mut outages = Vec::new();
    for hour in window.start_hour..window.end_hour() {
        let v = wind.speed(hour);
        for (&bi, curve) in exposed.iter().zip(&classes) {
            if hour < down_until[bi] {
                continue;
            }
            let p = failure_probability(curve, v);
            if sample_status(p, rng) {
                let mode = if rng.draw() < params.tower_failure_probability {
                    FailureMode::Tower
                } else {
                    FailureMode::Line
                };
                let restore = schedule_repair(hour, mode, params, window.end_hour(), rng);
                down_until[bi] = restore;
                outages.push(Outage {
                    branch_idx: bi,
                    failure_hour: hour,
                    restore_hour: restore,
                    mode,
                });
            }
        }
    }
    outages.sort_by_key(|o| (o.failure_hour, o.branch_idx));
    Ok(OutageTimeline { outages })
}

/// Apply all failures/restores effective at `hour` to an operating state.
pub fn apply_timeline_hour(
    timeline: &OutageTimeline,
    hour: usize,
    state: &mut OperatingState,
) {
    for o in timeline.restores_at(hour) {
        state.repair_branch(o.branch_idx);
    }
    for o in timeline.failures_at(hour) {
        state.damage_branch(o.branch_idx);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_case;

    fn normal_curve() -> FragilityCurve<f64> {
        FragilityCurve::new(
            RobustnessClass::Normal,
            vec![(30.0, 0.0), (40.0, 0.1), (50.0, 0.4), (60.0, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn below_critical_is_zero_above_breakdown_is_one() {
        let c = normal_curve();
        assert_eq!(failure_probability(&c, 29.0), 0.0);
        assert_eq!(failure_probability(&c, 61.0), 1.0);
    }

    #[test]
    fn interpolates_between_samples() {
        let c = normal_curve();
        // midway between (40, 0.1) and (50, 0.4)
        let p = failure_probability(&c, 45.0);
        assert!((p - 0.25).abs() < 1e-12);
        // quarter point
        let p = failure_probability(&c, 42.5);
        assert!((p - 0.175).abs() < 1e-12);
    }

    #[test]
    fn sampling_boundary_cases() {
        let mut rng = RandomSource::new(1);
        for _ in 0..1000 {
            assert!(!sample_status(0.0, &mut rng));
            assert!(sample_status(1.0, &mut rng));
        }
    }

    #[test]
    fn sampling_frequency_matches_probability() {
        let mut rng = RandomSource::new(5);
        let n = 100_000usize;
        let p = 0.7;
        let fails = (0..n).filter(|_| sample_status(p, &mut rng)).count();
        let freq = fails as f64 / n as f64;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!(
            (freq - p).abs() < 3.0 * sigma,
            "frequency {freq} outside {p} +- {}",
            3.0 * sigma
        );
    }

    #[test]
    fn monotone_in_wind_over_random_curves() {
        use proptest::prelude::*;
        let mut runner = proptest::test_runner::TestRunner::new(proptest::test_runner::Config {
            cases: 1000,
            ..Default::default()
        });
        runner
            .run(
                &(
                    proptest::collection::vec(0.01f64..10.0, 2..8),
                    proptest::collection::vec(0.0f64..1.0, 2..8),
                    10.0f64..40.0,
                    0.0f64..80.0,
                    0.0f64..80.0,
                ),
                |(dws, dps, v0, a, b)| {
                    let k = dws.len().min(dps.len());
                    let mut w = v0;
                    let mut pts = vec![(w, 0.0)];
                    let mut p = 0.0;
                    for i in 0..k {
                        w += dws[i];
                        p += dps[i];
                        pts.push((w, p));
                    }
                    // normalize to reach exactly 1 at the top
                    let top = pts.last().unwrap().1;
                    let scale = if top > 0.0 { 1.0 / top } else { 1.0 };
                    for q in pts.iter_mut() {
                        q.1 *= scale;
                    }
                    pts.last_mut().unwrap().1 = 1.0;
                    if top == 0.0 {
                        // degenerate all-zero curve: force a valid final point
                        return Ok(());
                    }
                    let curve = FragilityCurve::new(RobustnessClass::Normal, pts).unwrap();
                    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                    prop_assert!(
                        failure_probability(&curve, lo) <= failure_probability(&curve, hi) + 1e-12
                    );
                    Ok(())
                },
            )
            .unwrap();
    }

    #[test]
    fn repair_clamps_to_event_end() {
        let params = RepairParams {
            mttr_line_hours: 2.0,
            mttr_tower_hours: 10.0,
            repair_blocked_during_event: true,
            tower_failure_probability: 0.5,
            deterministic: true,
        };
        let mut rng = RandomSource::new(3);
        let restore = schedule_repair(60, FailureMode::Line, &params, 76, &mut rng);
        assert_eq!(restore, 76);
    }

    #[test]
    fn repair_mean_matches_mttr() {
        let params = RepairParams::from_tower_mttr(50.0); // line mttr 10
        let mut rng = RandomSource::new(9);
        let n = 100_000;
        let sum: f64 = (0..n)
            .map(|_| {
                let mttr = params.mttr_line_hours;
                rng.draw_exponential(mttr)
            })
            .sum();
        let mean = sum / n as f64;
        let bound = 3.0 * params.mttr_line_hours / (n as f64).sqrt();
        assert!((mean - 10.0).abs() < bound);
    }

    #[test]
    fn tower_durations_scale_line_durations_by_five() {
        let params = RepairParams::from_tower_mttr(50.0);
        // identical draw streams: the exponential scales linearly in the mean
        let mut a = RandomSource::new(21);
        let mut b = RandomSource::new(21);
        for _ in 0..1000 {
            let line = a.draw_exponential(params.mttr_line_hours);
            let tower = b.draw_exponential(params.mttr_tower_hours);
            assert!((tower / line - 5.0).abs() < 1e-9);
        }
    }

    fn two_area_net() -> Network<f64> {
        parse_case(
            "CASE areas 100\n\
             BUS 1 1 138 SLACK 1.0\n\
             BUS 2 1 138 PQ 1.0\n\
             BUS 3 2 230 PV 1.0\n\
             BRANCH 1 2 1 0.01 0.1 0.0 100 120 0\n\
             BRANCH 2 3 1 0.01 0.1 0.0 100 120 0\n\
             BRANCH 1 3 1 0.01 0.1 0.0 100 120 0\n\
             GEN 1 0 100 -50 50 40 U1\n\
             GEN 3 0 100 -50 50 40 U1\n\
             LOAD 2 30 6\n",
        )
        .unwrap()
    }

    #[test]
    fn zero_wind_gives_empty_timeline() {
        let net = two_area_net();
        let wind = WindProfile {
            hourly_speed: vec![0.0; 100],
            affected_area: 1,
        };
        let curves = vec![
            normal_curve(),
            FragilityCurve::new(
                RobustnessClass::MoreRobust,
                vec![(40.0, 0.0), (70.0, 1.0)],
            )
            .unwrap(),
        ];
        let mut rng = RandomSource::new(1);
        let tl = build_outage_timeline(
            &net,
            &wind,
            &curves,
            &RepairParams::default(),
            EventWindow {
                start_hour: 51,
                duration_hours: 25,
            },
            &mut rng,
        )
        .unwrap();
        assert!(tl.outages.is_empty());
    }

    #[test]
    fn hurricane_wind_fails_every_exposed_branch() {
        let net = two_area_net();
        let wind = WindProfile {
            hourly_speed: vec![100.0; 100],
            affected_area: 1,
        };
        let curves = vec![
            normal_curve(),
            FragilityCurve::new(
                RobustnessClass::MoreRobust,
                vec![(40.0, 0.0), (70.0, 1.0)],
            )
            .unwrap(),
        ];
        let mut rng = RandomSource::new(1);
        let tl = build_outage_timeline(
            &net,
            &wind,
            &curves,
            &RepairParams::default(),
            EventWindow {
                start_hour: 51,
                duration_hours: 25,
            },
            &mut rng,
        )
        .unwrap();
        // all three branches touch area 1, so all fail in the first hour
        let failed: Vec<usize> = tl.failures_at(51).map(|o| o.branch_idx).collect();
        assert_eq!(failed, vec![0, 1, 2]);
        // blocked repairs keep everything down through the event
        assert!(tl.outages.iter().all(|o| o.restore_hour >= 76));
    }

    #[test]
    fn timeline_is_deterministic_and_intervals_disjoint() {
        let net = two_area_net();
        let wind = WindProfile {
            hourly_speed: (0..100).map(|h| if (51..76).contains(&h) { 45.0 } else { 0.0 }).collect(),
            affected_area: 1,
        };
        let curves = vec![
            normal_curve(),
            FragilityCurve::new(
                RobustnessClass::MoreRobust,
                vec![(40.0, 0.0), (55.0, 0.2), (70.0, 1.0)],
            )
            .unwrap(),
        ];
        let window = EventWindow {
            start_hour: 51,
            duration_hours: 25,
        };
        let run = |seed| {
            let mut rng = RandomSource::new(seed);
            build_outage_timeline(&net, &wind, &curves, &RepairParams::default(), window, &mut rng)
                .unwrap()
        };
        assert_eq!(run(77), run(77));
        let tl = run(77);
        for bi in 0..net.branches.len() {
            let mut spans: Vec<(usize, usize)> = tl
                .outages
                .iter()
                .filter(|o| o.branch_idx == bi)
                .map(|o| (o.failure_hour, o.restore_hour))
                .collect();
            spans.sort_unstable();
            for w in spans.windows(2) {
                assert!(w[0].1 <= w[1].0, "overlapping outage spans {w:?}");
            }
        }
    }

    #[test]
    fn branches_outside_area_never_fail() {
        let net = two_area_net();
        let wind = WindProfile {
            hourly_speed: vec![100.0; 100],
            affected_area: 2,
        };
        let curves = vec![
            normal_curve(),
            FragilityCurve::new(
                RobustnessClass::MoreRobust,
                vec![(40.0, 0.0), (70.0, 1.0)],
            )
            .unwrap(),
        ];
        let mut rng = RandomSource::new(1);
        let tl = build_outage_timeline(
            &net,
            &wind,
            &curves,
            &RepairParams::default(),
            EventWindow {
                start_hour: 1,
                duration_hours: 5,
            },
            &mut rng,
        )
        .unwrap();
        // branch 0 (1-2) lies entirely in area 1 and must never appear
        assert!(tl.outages.iter().all(|o| o.branch_idx != 0));
        // branches 1 and 2 touch area 2 and do fail under 100 m/s wind
        assert!(tl.outages.iter().any(|o| o.branch_idx == 1));
    }

    #[test]
    fn expected_failure_count_matches_analytic_sum() {
        let net = two_area_net();
        let wind = WindProfile {
            hourly_speed: vec![0.0, 45.0, 0.0],
            affected_area: 1,
        };
        let robust = FragilityCurve::new(
            RobustnessClass::MoreRobust,
            vec![(40.0, 0.0), (50.0, 0.5), (70.0, 1.0)],
        )
        .unwrap();
        let curves = vec![normal_curve(), robust.clone()];
        let window = EventWindow {
            start_hour: 2,
            duration_hours: 1,
        };
        // analytic expectation over the single storm hour
        let mut expected = 0.0;
        for bi in 0..net.branches.len() {
            if branch_in_area(&net, bi, 1) {
                let c = match branch_class(&net, bi) {
                    RobustnessClass::Normal => &curves[0],
                    RobustnessClass::MoreRobust => &robust,
                };
                expected += failure_probability(c, 45.0);
            }
        }
        let trials = 20_000;
        let mut total = 0usize;
        for seed in 0..trials {
            let mut rng = RandomSource::new(seed);
            let tl = build_outage_timeline(
                &net,
                &wind,
                &curves,
                &RepairParams::default(),
                window,
                &mut rng,
            )
            .unwrap();
            total += tl.outages.len();
        }
        let mean = total as f64 / trials as f64;
        // binomial-ish bound: 3*sqrt(sum p(1-p)/trials), padded for the mix
        let var: f64 = (0..net.branches.len())
            .filter(|&bi| branch_in_area(&net, bi, 1))
            .map(|bi| {
                let c = match branch_class(&net, bi) {
                    RobustnessClass::Normal => &curves[0],
                    RobustnessClass::MoreRobust => &robust,
                };
                let p = failure_probability(c, 45.0);
                p * (1.0 - p)
            })
            .sum();
        let bound = 3.0 * (var / trials as f64).sqrt();
        assert!(
            (mean - expected).abs() < bound,
            "mean {mean} outside expected {expected} +- {bound}"
        );
    }
}
