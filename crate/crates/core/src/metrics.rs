//! Performance traces, trapezoid/polygon phase detection, and resilience
//! metrics over the simulation horizon.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::linalg::line_fit;
use crate::scalar::Scalar;

/// Indicator categories tracked over the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    GeneratorUnits,
    GeneratorCapacity,
    BranchesInService,
    BranchesAvailable,
    LoadServed,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::GeneratorUnits,
        Category::GeneratorCapacity,
        Category::BranchesInService,
        Category::BranchesAvailable,
        Category::LoadServed,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Category::GeneratorUnits => "generator-units",
            Category::GeneratorCapacity => "generator-capacity",
            Category::BranchesInService => "branches-in-service",
            Category::BranchesAvailable => "branches-available",
            Category::LoadServed => "load-served",
        }
    }
}

impl std::fmt::Display for Category {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TraceMode {
    SteadyState,
    Aggregated,
}

impl TraceMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            TraceMode::SteadyState => "steady-state",
            TraceMode::Aggregated => "aggregated",
        }
    }
}

impl std::fmt::Display for TraceMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Hourly indicator trace R(t) in percent. Aggregated traces can carry
/// within-hour dip values at event hours; the effective sample at a dipped
/// hour is the dip value, restored at the next hourly sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceTrace<T> {
    pub category: Category,
    pub mode: TraceMode,
    /// Hourly samples, index 0 = hour 1.
    pub hourly: Vec<T>,
    /// Within-hour dip values keyed by hour (1-based).
    pub dips: BTreeMap<usize, T>,
}

impl<T: Scalar> PerformanceTrace<T> {
    pub fn new(category: Category, mode: TraceMode, hourly: Vec<T>) -> Self {
        Self {
            category,
            mode,
            hourly,
            dips: BTreeMap::new(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.hourly.len()
    }

    /// Effective sample at `hour` (1-based): the dip value when present.
    pub fn value(&self, hour: usize) -> T {
        self.dips
            .get(&hour)
            .copied()
            .unwrap_or(self.hourly[hour - 1])
    }

    pub fn values(&self) -> Vec<T> {
        (1..=self.horizon()).map(|h| self.value(h)).collect()
    }
}

/// Trapezoid / polygon phase timestamps, in hours. Absent entries mean the
/// phase never completed inside the horizon.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhaseTimestamps {
    /// First hour the indicator drops below its pre-event value.
    pub t0: Option<usize>,
    /// End of event degradation (the event window's end).
    pub t_ee: Option<usize>,
    /// First hour of sustained restoration after the event.
    pub t_sr: Option<usize>,
    /// First hour the indicator is back within tolerance of its target.
    pub t_r: Option<usize>,
    /// Multi-stage recovery change points (operational recovery start,
    /// quasi-recovered state start, infrastructure-and-operational recovery
    /// start, system recovery complete).
    pub t_o_sr: Option<usize>,
    pub t_q_sr: Option<usize>,
    pub t_io_sr: Option<usize>,
    pub t_r_s: Option<usize>,
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("trace covers {have} hours, event window needs {need}")]
    TraceTooShort { have: usize, need: usize },
    #[error("hour {hour} missing from the record sequence")]
    MissingHour { hour: usize },
    #[error("comparison inputs disagree: {0}")]
    CategoryMismatch(String),
}

#[derive(Debug, Clone, Copy)]
pub struct PhaseOptions<T> {
    /// Consecutive rises required to call the restoration start.
    pub sustained_rises: usize,
    /// Recovery tolerance in percentage points.
    pub recovery_epsilon: T,
    /// Minimum segment length (hours) for the polygon change-point fit.
    pub min_segment_len: usize,
    /// Per-segment penalty added to the SSE in the change-point fit.
    pub segment_penalty: T,
}

impl<T: Scalar> Default for PhaseOptions<T> {
    fn default() -> Self {
        Self {
            sustained_rises: 2,
            recovery_epsilon: T::of(0.1),
            min_segment_len: 2,
            segment_penalty: T::of(4.0),
        }
    }
}

/// Detect the trapezoid phases of a trace given the event window
/// `(start_hour, end_hour)` (end exclusive, matching the storm window).
pub fn detect_phases<T: Scalar>(
    trace: &PerformanceTrace<T>,
    event_window: (usize, usize),
    options: &PhaseOptions<T>,
) -> Result<PhaseTimestamps, MetricsError> {
    let horizon = trace.horizon();
    let (ev_start, ev_end) = event_window;
    if horizon < ev_end.saturating_sub(1) {
        return Err(MetricsError::TraceTooShort {
            have: horizon,
            need: ev_end - 1,
        });
    }
    let values = trace.values();
    let pre_event = if ev_start >= 2 {
        values[ev_start - 2]
    } else {
        T::of(100.0)
    };
    let eps = options.recovery_epsilon;

    let mut stamps = PhaseTimestamps::default();

    // first hour the indicator drops below the pre-event value
    for h in ev_start..=horizon {
        if values[h - 1] < pre_event - eps {
            stamps.t0 = Some(h);
            break;
        }
    }
    if stamps.t0.is_none() {
        return Ok(stamps);
    }
    stamps.t_ee = Some(ev_end);

    // sustained rise: `sustained_rises` consecutive strict increases
    let mut t_sr = None;
    'outer: for h in ev_end..=horizon {
        if h + options.sustained_rises > horizon {
            break;
        }
        for k in 0..options.sustained_rises {
            if values[h + k] <= values[h + k - 1] {
                continue 'outer;
            }
        }
        t_sr = Some(h);
        break;
    }
    stamps.t_sr = t_sr;

    // recovery completion: back within epsilon of the pre-event target
    if let Some(t_sr) = t_sr {
        for h in t_sr..=horizon {
            if values[h - 1] >= pre_event - eps {
                stamps.t_r = Some(h);
                break;
            }
        }
    }

    // polygon stages from a piecewise-linear change-point fit over recovery
    if let (Some(t_sr), Some(t_r)) = (stamps.t_sr, stamps.t_r) {
        if t_r > t_sr + 2 * options.min_segment_len {
            let hours: Vec<T> = (t_sr..=t_r).map(|h| T::of(h as f64)).collect();
            let ys: Vec<T> = (t_sr..=t_r).map(|h| values[h - 1]).collect();
            let breaks = segment_breakpoints(&hours, &ys, options);
            let abs = |i: usize| t_sr + i;
            stamps.t_o_sr = Some(t_sr);
            stamps.t_q_sr = breaks.first().map(|&i| abs(i));
            stamps.t_io_sr = breaks.get(1).map(|&i| abs(i));
            stamps.t_r_s = Some(t_r);
        } else {
            stamps.t_o_sr = Some(t_sr);
            stamps.t_r_s = Some(t_r);
        }
    }

    Ok(stamps)
}

/// Least-squares piecewise-linear segmentation with up to three segments:
/// returns interior breakpoint indices (into the window) chosen by SSE plus
/// a per-segment penalty.
fn segment_breakpoints<T: Scalar>(ts: &[T], ys: &[T], options: &PhaseOptions<T>) -> Vec<usize> {
    let n = ts.len();
    let min_len = options.min_segment_len.max(2);
    let sse = |lo: usize, hi: usize| -> T {
        let (_, _, e) = line_fit(&ts[lo..hi], &ys[lo..hi]);
        e
    };
    let mut best: (T, Vec<usize>) = (sse(0, n) + options.segment_penalty, Vec::new());
    // two segments
    for b1 in min_len..n.saturating_sub(min_len) {
        let cost = sse(0, b1) + sse(b1, n) + options.segment_penalty * T::of(2.0);
        if cost < best.0 {
            best = (cost, vec![b1]);
        }
    }
    // three segments
    for b1 in min_len..n.saturating_sub(2 * min_len) {
        for b2 in (b1 + min_len)..n.saturating_sub(min_len) {
            let cost =
                sse(0, b1) + sse(b1, b2) + sse(b2, n) + options.segment_penalty * T::of(3.0);
            if cost < best.0 {
                best = (cost, vec![b1, b2]);
            }
        }
    }
    best.1
}

/// Resilience metrics for one trace. Rates are percentage points per hour;
/// `area_under_curve` is the mean of R(t)/100 over the horizon.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResilienceMetrics<T> {
    pub intact_period_h: Option<T>,
    pub disruption_rate: Option<T>,
    pub preparation_time_h: Option<T>,
    pub recovery_rate: Option<T>,
    pub recovery_time_h: Option<T>,
    pub area_under_curve: T,
    pub absorption_time_h: Option<T>,
}

/// Trapezoidal mean of R(t)/100 over the horizon, dips included. Equals 1
/// exactly iff the effective trace is identically 100.
pub fn area_under_curve<T: Scalar>(trace: &PerformanceTrace<T>) -> T {
    let values = trace.values();
    if values.len() < 2 {
        return values.first().map(|&v| v / T::of(100.0)).unwrap_or_else(T::one);
    }
    let mut area = T::zero();
    for w in values.windows(2) {
        area += (w[0] + w[1]) / T::of(2.0);
    }
    area / T::of((values.len() - 1) as f64) / T::of(100.0)
}

/// Apply the metric formulas to a trace and its phase timestamps.
pub fn compute_metrics<T: Scalar>(
    trace: &PerformanceTrace<T>,
    stamps: &PhaseTimestamps,
    horizon: usize,
) -> ResilienceMetrics<T> {
    let r = |h: usize| trace.value(h);
    let mut m = ResilienceMetrics {
        area_under_curve: area_under_curve(trace),
        ..Default::default()
    };
    m.intact_period_h = Some(T::of(
        (stamps.t0.unwrap_or(horizon + 1).saturating_sub(1)) as f64,
    ));
    if let (Some(t0), Some(t_ee)) = (stamps.t0, stamps.t_ee) {
        if t_ee > t0 {
            // negative by convention for degrading events
            m.disruption_rate =
                Some(-(r(t0 - 1) - r(t_ee)) / T::of((t_ee - t0) as f64));
        } else {
            m.disruption_rate = Some(T::neg_infinity()); // instantaneous drop
        }
    }
    if let (Some(t_ee), Some(t_sr)) = (stamps.t_ee, stamps.t_sr) {
        m.preparation_time_h = Some(T::of((t_sr - t_ee) as f64));
    }
    if let (Some(t0), Some(t_sr)) = (stamps.t0, stamps.t_sr) {
        m.absorption_time_h = Some(T::of((t_sr - t0) as f64));
    }
    if let (Some(t_ee), Some(t_sr), Some(t_r)) = (stamps.t_ee, stamps.t_sr, stamps.t_r) {
        if t_r > t_sr {
            m.recovery_rate = Some((r(t_r) - r(t_ee)) / T::of((t_r - t_sr) as f64));
        }
        m.recovery_time_h = Some(T::of((t_r - t_sr) as f64));
    }
    m
}

/// Per-hour transient losses used to overlay dips on the steady hourly
/// samples, all in percent of the system quantity.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TransientDip<T> {
    pub generator_units_pct: T,
    pub generator_capacity_pct: T,
    pub branches_in_service_pct: T,
    pub load_served_pct: T,
}

/// Build the five category traces from hourly indicator samples. In
/// aggregated mode, per-hour transient dips reduce the affected categories at
/// their hour; the next hourly sample restores them.
pub fn build_traces<T: Scalar>(
    hourly: &[crate::steady::IndicatorSnapshot<T>],
    transient: &BTreeMap<usize, TransientDip<T>>,
    mode: TraceMode,
) -> Vec<PerformanceTrace<T>> {
    let pick = |cat: Category| -> Vec<T> {
        hourly
            .iter()
            .map(|s| match cat {
                Category::GeneratorUnits => s.generators_online_pct,
                Category::GeneratorCapacity => s.generation_capacity_pct,
                Category::BranchesInService => s.branches_in_service_pct,
                Category::BranchesAvailable => s.branches_available_pct,
                Category::LoadServed => s.load_served_pct,
            })
            .collect()
    };
    Category::ALL
        .iter()
        .map(|&cat| {
            let mut trace = PerformanceTrace::new(cat, mode, pick(cat));
            if mode == TraceMode::Aggregated {
                for (&hour, dip) in transient {
                    if hour == 0 || hour > trace.horizon() {
                        continue;
                    }
                    let loss = match cat {
                        Category::GeneratorUnits => dip.generator_units_pct,
                        Category::GeneratorCapacity => dip.generator_capacity_pct,
                        Category::BranchesInService => dip.branches_in_service_pct,
                        Category::BranchesAvailable => T::zero(),
                        Category::LoadServed => dip.load_served_pct,
                    };
                    if loss > T::zero() {
                        let dipped = (trace.hourly[hour - 1] - loss).max(T::zero());
                        trace.dips.insert(hour, dipped);
                    }
                }
            }
            trace
        })
        .collect()
}

/// One row of the steady-vs-aggregated metric comparison.
#[derive(Debug, Clone)]
pub struct MetricDelta<T> {
    pub category: Category,
    pub metric: &'static str,
    pub steady: Option<T>,
    pub aggregated: Option<T>,
    /// `aggregated - steady` where both sides exist.
    pub delta: Option<T>,
}

/// Steady-vs-aggregated comparison: metric deltas, the dip census, and the
/// infrastructure-vs-operational gap series with extrema.
#[derive(Debug, Clone)]
pub struct ComparisonReport<T> {
    pub deltas: Vec<MetricDelta<T>>,
    /// `(hour, category, dip magnitude in percentage points)`.
    pub dips: Vec<(usize, Category, T)>,
    /// Branch availability minus in-service percentage, per hour.
    pub branch_gap: Vec<T>,
    /// Generator capacity minus load served percentage, per hour.
    pub capacity_load_gap: Vec<T>,
    pub branch_gap_max: (usize, T),
    pub capacity_load_gap_max: (usize, T),
}

pub struct ModeResults<T> {
    pub traces: Vec<PerformanceTrace<T>>,
    pub metrics: Vec<(Category, ResilienceMetrics<T>)>,
}

pub fn compare<T: Scalar>(
    steady: &ModeResults<T>,
    aggregated: &ModeResults<T>,
) -> Result<ComparisonReport<T>, MetricsError> {
    if steady.metrics.len() != aggregated.metrics.len() {
        return Err(MetricsError::CategoryMismatch(format!(
            "{} vs {} categories",
            steady.metrics.len(),
            aggregated.metrics.len()
        )));
    }
    let horizon = steady
        .traces
        .first()
        .map(|t| t.horizon())
        .unwrap_or_default();
    if aggregated
        .traces
        .first()
        .map(|t| t.horizon())
        .unwrap_or_default()
        != horizon
    {
        return Err(MetricsError::CategoryMismatch(
            "horizons differ".to_string(),
        ));
    }

    let mut deltas = Vec::new();
    for ((cat_s, ms), (cat_a, ma)) in steady.metrics.iter().zip(&aggregated.metrics) {
        if cat_s != cat_a {
            return Err(MetricsError::CategoryMismatch(format!(
                "{cat_s} vs {cat_a}"
            )));
        }
        let rows: [(&'static str, Option<T>, Option<T>); 7] = [
            ("intact-period-h", ms.intact_period_h, ma.intact_period_h),
            ("disruption-rate", ms.disruption_rate, ma.disruption_rate),
            (
                "preparation-time-h",
                ms.preparation_time_h,
                ma.preparation_time_h,
            ),
            ("recovery-rate", ms.recovery_rate, ma.recovery_rate),
            ("recovery-time-h", ms.recovery_time_h, ma.recovery_time_h),
            (
                "area-under-curve",
                Some(ms.area_under_curve),
                Some(ma.area_under_curve),
            ),
            (
                "absorption-time-h",
                ms.absorption_time_h,
                ma.absorption_time_h,
            ),
        ];
        for (metric, s, a) in rows {
            deltas.push(MetricDelta {
                category: *cat_s,
                metric,
                steady: s,
                aggregated: a,
                delta: match (s, a) {
                    (Some(s), Some(a)) => Some(a - s),
                    _ => None,
                },
            });
        }
    }

    let mut dips = Vec::new();
    for trace in &aggregated.traces {
        for (&hour, &dip) in &trace.dips {
            dips.push((hour, trace.category, trace.hourly[hour - 1] - dip));
        }
    }
    dips.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

    let find = |set: &[PerformanceTrace<T>], cat: Category| {
        set.iter()
            .find(|t| t.category == cat)
            .map(|t| t.values())
            .unwrap_or_default()
    };
    let avail = find(&aggregated.traces, Category::BranchesAvailable);
    let insvc = find(&aggregated.traces, Category::BranchesInService);
    let cap = find(&aggregated.traces, Category::GeneratorCapacity);
    let load = find(&aggregated.traces, Category::LoadServed);
    let branch_gap: Vec<T> = avail.iter().zip(&insvc).map(|(&a, &i)| a - i).collect();
    let capacity_load_gap: Vec<T> = cap.iter().zip(&load).map(|(&c, &l)| c - l).collect();
    let argmax = |xs: &[T]| -> (usize, T) {
        xs.iter()
            .enumerate()
            .fold((0, T::zero()), |(bh, bv), (i, &v)| {
                if v > bv {
                    (i + 1, v)
                } else {
                    (bh, bv)
                }
            })
    };
    let branch_gap_max = argmax(&branch_gap);
    let capacity_load_gap_max = argmax(&capacity_load_gap);

    Ok(ComparisonReport {
        deltas,
        dips,
        branch_gap,
        capacity_load_gap,
        branch_gap_max,
        capacity_load_gap_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(value: f64, hours: usize) -> PerformanceTrace<f64> {
        PerformanceTrace::new(
            Category::LoadServed,
            TraceMode::SteadyState,
            vec![value; hours],
        )
    }

    /// Drop 100→90 over hours 51..=76, flat to 100, ramp back to 100% at 150.
    fn synthetic_trapezoid() -> PerformanceTrace<f64> {
        let mut v = vec![100.0; 160];
        for h in 51..=76 {
            v[h - 1] = 100.0 - 10.0 * (h - 50) as f64 / 26.0;
        }
        let floor = v[75];
        for h in 77..100 {
            v[h - 1] = floor;
        }
        for h in 100..=150 {
            v[h - 1] = floor + (100.0 - floor) * (h - 100) as f64 / 50.0;
        }
        for h in 151..=160 {
            v[h - 1] = 100.0;
        }
        PerformanceTrace::new(Category::LoadServed, TraceMode::SteadyState, v)
    }

    #[test]
    fn flat_trace_has_no_phases_and_unit_area() {
        let trace = flat(100.0, 200);
        let stamps = detect_phases(&trace, (51, 76), &PhaseOptions::default()).unwrap();
        assert_eq!(stamps, PhaseTimestamps::default());
        let m = compute_metrics(&trace, &stamps, 200);
        assert_eq!(m.area_under_curve, 1.0);
        assert_eq!(m.intact_period_h, Some(200.0));
        assert_eq!(m.disruption_rate, None);
    }

    #[test]
    fn synthetic_trapezoid_timestamps() {
        let trace = synthetic_trapezoid();
        let stamps = detect_phases(&trace, (51, 76), &PhaseOptions::default()).unwrap();
        assert_eq!(stamps.t0, Some(51));
        assert_eq!(stamps.t_ee, Some(76));
        assert_eq!(stamps.t_sr, Some(100));
        assert_eq!(stamps.t_r, Some(150));
    }

    #[test]
    fn table_formula_arithmetic() {
        // drop 100 -> 90 between hours 51 and 76, recover 90 -> 100 between
        // t_sr = 100 and t_r = 150
        let mut v = vec![100.0; 160];
        for h in 51..160 {
            v[h] = 90.0;
        }
        let mut trace = PerformanceTrace::new(Category::LoadServed, TraceMode::SteadyState, v);
        for h in 100..=150 {
            trace.hourly[h - 1] = 90.0 + 10.0 * (h - 100) as f64 / 50.0;
        }
        for h in 151..=160 {
            trace.hourly[h - 1] = 100.0;
        }
        let stamps = PhaseTimestamps {
            t0: Some(51),
            t_ee: Some(76),
            t_sr: Some(100),
            t_r: Some(150),
            ..Default::default()
        };
        let m = compute_metrics(&trace, &stamps, 160);
        assert!((m.disruption_rate.unwrap() - (-0.4)).abs() < 1e-12);
        assert!((m.recovery_rate.unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(m.recovery_time_h, Some(50.0));
        assert_eq!(m.preparation_time_h, Some(24.0));
        assert_eq!(m.absorption_time_h, Some(49.0));
    }

    #[test]
    fn area_is_one_iff_identically_100() {
        let mut trace = flat(100.0, 50);
        assert_eq!(area_under_curve(&trace), 1.0);
        trace.hourly[20] = 99.9;
        assert!(area_under_curve(&trace) < 1.0);
    }

    #[test]
    fn pointwise_dominance_of_area() {
        use proptest::prelude::*;
        let mut runner = proptest::test_runner::TestRunner::new(proptest::test_runner::Config {
            cases: 1000,
            ..Default::default()
        });
        runner
            .run(
                &(
                    proptest::collection::vec(0.0f64..100.0, 2..80),
                    proptest::collection::vec(0.0f64..100.0, 2..80),
                ),
                |(a, gaps)| {
                    let n = a.len().min(gaps.len());
                    let hi: Vec<f64> = a[..n].to_vec();
                    let lo: Vec<f64> =
                        hi.iter().zip(&gaps[..n]).map(|(&v, &g)| (v - g).max(0.0)).collect();
                    let ta = PerformanceTrace::new(
                        Category::LoadServed,
                        TraceMode::SteadyState,
                        hi,
                    );
                    let tb = PerformanceTrace::new(
                        Category::LoadServed,
                        TraceMode::SteadyState,
                        lo,
                    );
                    prop_assert!(area_under_curve(&ta) >= area_under_curve(&tb) - 1e-12);
                    Ok(())
                },
            )
            .unwrap();
    }

    #[test]
    fn appending_flat_tail_changes_only_area() {
        let trace = synthetic_trapezoid();
        let stamps = detect_phases(&trace, (51, 76), &PhaseOptions::default()).unwrap();
        let m = compute_metrics(&trace, &stamps, trace.horizon());

        let mut extended = trace.clone();
        extended.hourly.extend(std::iter::repeat(100.0).take(40));
        let stamps2 = detect_phases(&extended, (51, 76), &PhaseOptions::default()).unwrap();
        let m2 = compute_metrics(&extended, &stamps2, extended.horizon());

        assert_eq!(m.disruption_rate, m2.disruption_rate);
        assert_eq!(m.recovery_rate, m2.recovery_rate);
        assert_eq!(m.recovery_time_h, m2.recovery_time_h);
        // the area changes exactly per the quadrature definition
        let n1 = (trace.horizon() - 1) as f64;
        let n2 = (extended.horizon() - 1) as f64;
        let expected = (m.area_under_curve * n1 + (n2 - n1) * 1.0) / n2;
        assert!((m2.area_under_curve - expected).abs() < 1e-12);
    }

    #[test]
    fn dips_lower_aggregated_area() {
        let steady = flat(100.0, 100);
        let mut aggregated = flat(100.0, 100);
        aggregated.mode = TraceMode::Aggregated;
        aggregated.dips.insert(52, 40.0);
        assert!(area_under_curve(&aggregated) < area_under_curve(&steady));
        assert_eq!(aggregated.value(52), 40.0);
        assert_eq!(aggregated.value(53), 100.0);
    }

    #[test]
    fn build_traces_overlays_dips_only_in_aggregated_mode() {
        use crate::steady::IndicatorSnapshot;
        let hourly = vec![IndicatorSnapshot::<f64>::all_hundred(); 10];
        let mut dips = BTreeMap::new();
        dips.insert(
            5usize,
            TransientDip {
                generator_units_pct: 10.0,
                generator_capacity_pct: 8.0,
                branches_in_service_pct: 0.0,
                load_served_pct: 25.0,
            },
        );
        let steady = build_traces(&hourly, &dips, TraceMode::SteadyState);
        assert!(steady.iter().all(|t| t.dips.is_empty()));
        let agg = build_traces(&hourly, &dips, TraceMode::Aggregated);
        let load = agg
            .iter()
            .find(|t| t.category == Category::LoadServed)
            .unwrap();
        assert_eq!(load.value(5), 75.0);
        assert_eq!(load.value(6), 100.0);
        let units = agg
            .iter()
            .find(|t| t.category == Category::GeneratorUnits)
            .unwrap();
        assert_eq!(units.value(5), 90.0);
    }

    #[test]
    fn compare_identical_inputs_zero_deltas() {
        let hourly = vec![crate::steady::IndicatorSnapshot::<f64>::all_hundred(); 10];
        let empty = BTreeMap::new();
        let make = |mode| {
            let traces = build_traces(&hourly, &empty, mode);
            let metrics = traces
                .iter()
                .map(|t| {
                    let stamps =
                        detect_phases(t, (3, 5), &PhaseOptions::default()).unwrap();
                    (t.category, compute_metrics(t, &stamps, t.horizon()))
                })
                .collect();
            ModeResults { traces, metrics }
        };
        let report = compare(&make(TraceMode::SteadyState), &make(TraceMode::Aggregated)).unwrap();
        assert!(report
            .deltas
            .iter()
            .all(|d| d.delta.map(|x| x.abs() < 1e-12).unwrap_or(true)));
        assert!(report.dips.is_empty());
    }

    #[test]
    fn polygon_breakpoints_recover_multistage_recovery() {
        // three recovery slopes: fast, flat plateau, slow finish
        let mut v = vec![100.0; 140];
        for h in 40..=60 {
            v[h - 1] = 100.0 - 30.0 * (h - 39) as f64 / 21.0;
        }
        for h in 61..=80 {
            v[h - 1] = 70.0;
        }
        for h in 81..=95 {
            v[h - 1] = 70.0 + 20.0 * (h - 80) as f64 / 15.0;
        }
        for h in 96..=110 {
            v[h - 1] = 90.0;
        }
        for h in 111..=130 {
            v[h - 1] = 90.0 + 10.0 * (h - 110) as f64 / 20.0;
        }
        for h in 131..=140 {
            v[h - 1] = 100.0;
        }
        let trace = PerformanceTrace::new(Category::LoadServed, TraceMode::SteadyState, v);
        let stamps = detect_phases(&trace, (40, 61), &PhaseOptions::default()).unwrap();
        assert_eq!(stamps.t0, Some(40));
        assert!(stamps.t_sr.is_some());
        assert!(stamps.t_r.is_some());
        // the segmentation found interior change points inside the recovery
        let (o, q) = (stamps.t_o_sr.unwrap(), stamps.t_q_sr.unwrap());
        assert!(o < q && q < stamps.t_r_s.unwrap());
    }
}
