//! Fixed-step time-domain transient simulation.
//!
//! Integration is implicit trapezoidal on the machine differential states,
//! alternating with an algebraic network solve (loads as constant admittance,
//! machines as Norton equivalents with saliency compensation) until the
//! interface mismatch converges. Protection relays and the out-of-step
//! corrective action are evaluated once per accepted step.

use std::collections::BTreeSet;

use num_complex::Complex;
use thiserror::Error;

use super::machine::SystemMachine;
use crate::linalg::{DenseMatrix, LuFactors};
use crate::model::{GenStatus, IslandSet, Network};
use crate::protection::{
    apparent_impedance, distance_step, ufls_step, uvls_step, DistanceRelaySettings,
    DistanceRelayState, ShedRelayState, UflsSettings, UvlsSettings, NOMINAL_HZ,
};
use crate::scalar::Scalar;
use crate::steady::PowerFlowSolution;

const INNER_TOLERANCE: f64 = 1e-8;
const INNER_CAP: usize = 10;
const NETWORK_TOLERANCE: f64 = 1e-10;
const NETWORK_CAP: usize = 25;

#[derive(Debug, Clone)]
pub struct SimConfig<T> {
    pub t_end_s: T,
    pub dt_s: T,
    pub disturbance_time_s: T,
    /// Loss-of-synchronism threshold relative to the island COI, degrees.
    pub instability_threshold_deg: T,
    /// Trip machines that lose synchronism and keep simulating.
    pub corrective_out_of_step: bool,
    pub relays_enabled: bool,
    /// Freeze exciters and governors (used by conservation tests).
    pub controllers_enabled: bool,
    /// Bus-frequency estimator filter time constant, seconds.
    pub freq_filter_s: T,
    /// Record every Nth step into the time series.
    pub series_decimation: usize,
    pub record_series: bool,
}

impl<T: Scalar> Default for SimConfig<T> {
    fn default() -> Self {
        Self {
            t_end_s: T::of(15.0),
            dt_s: T::of(1.0 / 120.0),
            disturbance_time_s: T::of(1.0),
            instability_threshold_deg: T::of(180.0),
            corrective_out_of_step: false,
            relays_enabled: true,
            controllers_enabled: true,
            freq_filter_s: T::of(3.0 / NOMINAL_HZ),
            series_decimation: 4,
            record_series: false,
        }
    }
}

/// Status change applied at the disturbance time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Disturbance {
    BranchOut(usize),
    BranchIn(usize),
    GenOut(usize),
    /// Reconnect a generator at no load, synchronized to its bus voltage.
    GenIn(usize),
}

/// Which end of a branch a distance relay protects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum BranchEnd {
    From,
    To,
}

impl std::fmt::Display for BranchEnd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BranchEnd::From => write!(f, "from"),
            BranchEnd::To => write!(f, "to"),
        }
    }
}

/// Placement and settings of every relay participating in a run.
#[derive(Debug, Clone)]
pub struct RelayPlan<T> {
    /// `(branch index, end)` pairs carrying distance protection.
    pub distance: Vec<(usize, BranchEnd, DistanceRelaySettings<T>)>,
    /// Load-bus indices carrying under-frequency shedding.
    pub ufls_buses: Vec<usize>,
    pub uvls_buses: Vec<usize>,
    pub ufls: UflsSettings<T>,
    pub uvls: UvlsSettings<T>,
}

impl<T: Scalar> RelayPlan<T> {
    pub fn empty() -> Self {
        Self {
            distance: Vec::new(),
            ufls_buses: Vec::new(),
            uvls_buses: Vec::new(),
            ufls: UflsSettings::default(),
            uvls: UvlsSettings::default(),
        }
    }

    /// Default placement: distance relays on both ends of every inter-area
    /// tie and every 230 kV branch; UFLS and UVLS at every load bus.
    pub fn standard(net: &Network<T>) -> Self {
        let mut distance = Vec::new();
        for (bi, br) in net.branches.iter().enumerate() {
            let (f, t) = br.ends(net);
            let tie = net.buses[f].area != net.buses[t].area;
            let hv = net.buses[f].base_kv >= T::of(230.0)
                && net.buses[t].base_kv >= T::of(230.0);
            if (tie || hv) && !br.is_transformer {
                let z = Complex::new(br.resistance, br.reactance);
                distance.push((bi, BranchEnd::From, DistanceRelaySettings::standard(z)));
                distance.push((bi, BranchEnd::To, DistanceRelaySettings::standard(z)));
            }
        }
        let mut load_buses: Vec<usize> = net
            .loads
            .iter()
            .map(|l| net.bus_index(l.bus).expect("resolved load bus"))
            .collect();
        load_buses.sort_unstable();
        load_buses.dedup();
        Self {
            distance,
            ufls_buses: load_buses.clone(),
            uvls_buses: load_buses,
            ufls: UflsSettings::default(),
            uvls: UvlsSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Stable,
    Unstable,
}

#[derive(Debug, Clone)]
pub struct RelayTrip<T> {
    pub t_s: T,
    pub branch_idx: usize,
    pub end: BranchEnd,
    pub zone: usize,
}

#[derive(Debug, Clone)]
pub struct TransientShed<T> {
    pub t_s: T,
    pub bus_idx: usize,
    pub relay: &'static str,
    pub stage: usize,
    /// Fraction of the load remaining at the bus when the stage operated.
    pub fraction_of_remaining: T,
    pub mw: T,
}

#[derive(Debug, Clone)]
pub struct GenTrip<T> {
    pub t_s: T,
    pub gen_idx: usize,
}

#[derive(Debug, Clone)]
pub struct SteOverload<T> {
    pub branch_idx: usize,
    pub worst_mva: T,
    pub rating_ste: T,
}

#[derive(Debug, Clone)]
pub struct SeriesRow<T> {
    pub t_s: T,
    /// Rotor angle per machine, radians (NaN when offline).
    pub machine_angle: Vec<T>,
    /// Speed deviation per machine, per-unit.
    pub machine_speed: Vec<T>,
    /// Voltage magnitude per bus, per-unit.
    pub bus_vm: Vec<T>,
    /// Estimated bus frequency, Hz.
    pub bus_freq: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct TransientResult<T> {
    pub verdict: Verdict,
    /// Machines online at the end of the run and still beyond the threshold.
    pub machines_lost_synchronism: Vec<usize>,
    /// Every machine that crossed the threshold at any point, with the time.
    pub lost_sync_log: Vec<(T, usize)>,
    pub relay_trips: Vec<RelayTrip<T>>,
    pub shed_events: Vec<TransientShed<T>>,
    pub gen_trips: Vec<GenTrip<T>>,
    /// Load disconnected by mid-run island collapse, MW.
    pub islanded_load_mw: T,
    /// Served fraction per load at the end of the run.
    pub final_served_factor: Vec<T>,
    pub ste_overloads: Vec<SteOverload<T>>,
    pub series: Vec<SeriesRow<T>>,
    pub steps: usize,
}

impl<T: Scalar> TransientResult<T> {
    /// Total transient load loss (shed plus islanded), MW.
    pub fn load_loss_mw(&self) -> T {
        let shed: T = self.shed_events.iter().map(|e| e.mw).sum();
        shed + self.islanded_load_mw
    }

    /// Union of machines tripped by corrective action and machines beyond
    /// the threshold at the end: the generators transiently lost this hour.
    pub fn machines_lost(&self) -> Vec<usize> {
        let mut set: BTreeSet<usize> = self.gen_trips.iter().map(|t| t.gen_idx).collect();
        set.extend(self.machines_lost_synchronism.iter().copied());
        set.into_iter().collect()
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("pre-disturbance power flow did not converge")]
    NotConverged,
    #[error("machine at generator {gen}: {reason}")]
    MachineInit { gen: usize, reason: String },
    #[error("network matrix singular at t = {t_s:.4} s")]
    Singular { t_s: f64 },
    #[error("inner iteration diverged at t = {t_s:.4} s (mismatch {mismatch:.3e})")]
    InnerDiverged { t_s: f64, mismatch: f64 },
}

/// Per-machine dynamic state. Angles in radians, speed deviation in pu of
/// synchronous speed, EMFs and field voltage in system per-unit.
#[derive(Debug, Clone)]
pub struct MachineState<T> {
    pub online: bool,
    pub delta: T,
    pub omega_dev: T,
    pub eq_p: T,
    pub ed_p: T,
    pub efd: T,
    pub pm: T,
    pub vref: T,
    pub pref: T,
}

#[derive(Debug, Clone)]
pub struct DynamicState<T> {
    pub t_s: T,
    pub machines: Vec<MachineState<T>>,
    /// Complex bus voltages, zero on de-energized buses.
    pub bus_v: Vec<Complex<T>>,
}

/// dq quantities seen from one machine given its state and terminal voltage.
struct StatorSolution<T> {
    id: T,
    iq: T,
    torque: T,
}

fn stator<T: Scalar>(m: &SystemMachine<T>, st: &MachineState<T>, v: Complex<T>) -> StatorSolution<T> {
    // rotate terminal voltage into the rotor dq frame
    let rot = Complex::from_polar(T::one(), -(st.delta - T::of(std::f64::consts::FRAC_PI_2)));
    let vdq = v * rot;
    let (vd, vq) = (vdq.re, vdq.im);
    let det = m.ra * m.ra + m.xd_p * m.xq_p;
    let rd = vd - st.ed_p;
    let rq = vq - st.eq_p;
    let id = (-m.ra * rd - m.xq_p * rq) / det;
    let iq = (m.xd_p * rd - m.ra * rq) / det;
    let torque = st.ed_p * id + st.eq_p * iq + (m.xq_p - m.xd_p) * id * iq;
    StatorSolution { id, iq, torque }
}

/// Machine current injection into the network frame, system base.
fn machine_injection<T: Scalar>(
    m: &SystemMachine<T>,
    st: &MachineState<T>,
    v: Complex<T>,
) -> Complex<T> {
    let s = stator(m, st, v);
    let idq = Complex::new(s.id, s.iq);
    idq * Complex::from_polar(T::one(), st.delta - T::of(std::f64::consts::FRAC_PI_2))
}

struct Derivatives<T> {
    d_delta: T,
    d_omega: T,
    d_eq_p: T,
    d_ed_p: T,
    d_efd: T,
    d_pm: T,
}

fn derivatives<T: Scalar>(
    m: &SystemMachine<T>,
    st: &MachineState<T>,
    v: Complex<T>,
    controllers: bool,
) -> Derivatives<T> {
    let omega_s = T::of(2.0 * std::f64::consts::PI * NOMINAL_HZ);
    let s = stator(m, st, v);
    let d_delta = omega_s * st.omega_dev;
    let d_omega = (st.pm - s.torque - m.damping * st.omega_dev) / m.two_h;
    let d_eq_p = (st.efd - st.eq_p - (m.xd - m.xd_p) * s.id) / m.td0_p;
    let d_ed_p = (-st.ed_p + (m.xq - m.xq_p) * s.iq) / m.tq0_p;
    let (d_efd, d_pm) = if controllers {
        let verr = st.vref - v.norm();
        let mut d_efd = (m.exc.ka * verr - st.efd) / m.exc.ta_s;
        // anti-windup at the field limits
        if (st.efd >= m.exc.efd_max && d_efd > T::zero())
            || (st.efd <= m.exc.efd_min && d_efd < T::zero())
        {
            d_efd = T::zero();
        }
        let target = st.pref - st.omega_dev / m.gov_droop;
        let mut d_pm = (target - st.pm) / m.gov_tg;
        if (st.pm >= m.gate_max && d_pm > T::zero()) || (st.pm <= m.gate_min && d_pm < T::zero())
        {
            d_pm = T::zero();
        }
        (d_efd, d_pm)
    } else {
        (T::zero(), T::zero())
    };
    Derivatives {
        d_delta,
        d_omega,
        d_eq_p,
        d_ed_p,
        d_efd,
        d_pm,
    }
}

fn clamp_state<T: Scalar>(m: &SystemMachine<T>, st: &mut MachineState<T>) {
    st.efd = st.efd.min(m.exc.efd_max).max(m.exc.efd_min);
    st.pm = st.pm.min(m.gate_max).max(m.gate_min);
}

/// Initialize machine states from a converged power flow so that every state
/// derivative vanishes at t = 0.
///
/// `unit_outputs` carries `(P MW, Q MVAr)` per generator, as produced by
/// [`crate::steady::allocate_unit_outputs`].
pub fn init_from_power_flow<T: Scalar>(
    net: &Network<T>,
    machines: &[SystemMachine<T>],
    islands: &IslandSet,
    solution: &PowerFlowSolution<T>,
    unit_outputs: &[(T, T)],
) -> Result<DynamicState<T>, SimError> {
    if !solution.converged {
        return Err(SimError::NotConverged);
    }
    let sbase = net.base_mva;
    let half_pi = T::of(std::f64::consts::FRAC_PI_2);
    let mut states = Vec::with_capacity(machines.len());
    for m in machines {
        let online = islands.gen_status[m.gen_idx] == GenStatus::Online;
        if !online {
            states.push(MachineState {
                online: false,
                delta: T::zero(),
                omega_dev: T::zero(),
                eq_p: T::zero(),
                ed_p: T::zero(),
                efd: T::zero(),
                pm: T::zero(),
                vref: T::zero(),
                pref: T::zero(),
            });
            continue;
        }
        let v = solution.voltage(m.bus_idx);
        if v.norm() < T::of(0.1) {
            return Err(SimError::MachineInit {
                gen: m.gen_idx,
                reason: "terminal bus is de-energized".into(),
            });
        }
        let (p_mw, q_mvar) = unit_outputs[m.gen_idx];
        let s = Complex::new(p_mw / sbase, q_mvar / sbase);
        let s_mach = s.norm() * sbase / m.mbase_mva;
        if s_mach > T::of(1.6) {
            return Err(SimError::MachineInit {
                gen: m.gen_idx,
                reason: format!("terminal power {s_mach:.2} pu exceeds capability"),
            });
        }
        let i = (s / v).conj();
        // rotor position from the EMF behind (ra + j xq)
        let e = v + Complex::new(m.ra, m.xq) * i;
        let delta = e.arg();
        let rot = Complex::from_polar(T::one(), -(delta - half_pi));
        let vdq = v * rot;
        let idq = i * rot;
        let (vd, vq) = (vdq.re, vdq.im);
        let (id, iq) = (idq.re, idq.im);
        let eq_p = vq + m.ra * iq + m.xd_p * id;
        let ed_p = vd + m.ra * id - m.xq_p * iq;
        let efd = eq_p + (m.xd - m.xd_p) * id;
        if efd > m.exc.efd_max || efd < m.exc.efd_min {
            return Err(SimError::MachineInit {
                gen: m.gen_idx,
                reason: format!("field voltage {efd:.2} outside limits"),
            });
        }
        let torque = ed_p * id + eq_p * iq + (m.xq_p - m.xd_p) * id * iq;
        if torque > m.gate_max || torque < m.gate_min {
            return Err(SimError::MachineInit {
                gen: m.gen_idx,
                reason: format!("mechanical power {torque:.2} outside gate limits"),
            });
        }
        let vref = v.norm() + efd / m.exc.ka;
        states.push(MachineState {
            online: true,
            delta,
            omega_dev: T::zero(),
            eq_p,
            ed_p,
            efd,
            pm: torque,
            vref,
            pref: torque,
        });
    }
    let bus_v: Vec<Complex<T>> = (0..net.buses.len()).map(|b| solution.voltage(b)).collect();
    Ok(DynamicState {
        t_s: T::zero(),
        machines: states,
        bus_v,
    })
}

/// Largest state derivative of an initialized system; equilibrium inits must
/// report at most ~1e-8.
pub fn max_initial_derivative<T: Scalar>(
    machines: &[SystemMachine<T>],
    state: &DynamicState<T>,
    controllers: bool,
) -> T {
    let mut worst = T::zero();
    for (m, st) in machines.iter().zip(&state.machines) {
        if !st.online {
            continue;
        }
        let d = derivatives(m, st, state.bus_v[m.bus_idx], controllers);
        for v in [d.d_delta, d.d_omega, d.d_eq_p, d.d_ed_p, d.d_efd, d.d_pm] {
            worst = worst.max(v.abs());
        }
    }
    worst
}

/// Inertia-weighted island COI detection: returns machines whose rotor angle
/// deviates from their island's center-of-inertia angle beyond the threshold.
pub fn detect_loss_of_synchronism<T: Scalar>(
    machines: &[SystemMachine<T>],
    state: &DynamicState<T>,
    island_of_machine: &[usize],
    threshold_deg: T,
) -> Vec<usize> {
    let threshold = threshold_deg * T::of(std::f64::consts::PI / 180.0);
    let mut islands: BTreeSet<usize> = BTreeSet::new();
    for (k, st) in state.machines.iter().enumerate() {
        if st.online {
            islands.insert(island_of_machine[k]);
        }
    }
    let mut flagged = Vec::new();
    for &island in &islands {
        let members: Vec<usize> = (0..machines.len())
            .filter(|&k| state.machines[k].online && island_of_machine[k] == island)
            .collect();
        let h_total: T = members.iter().map(|&k| machines[k].h_weight).sum();
        if h_total <= T::zero() {
            continue;
        }
        let coi: T = members
            .iter()
            .map(|&k| machines[k].h_weight * state.machines[k].delta)
            .sum::<T>()
            / h_total;
        for &k in &members {
            if (state.machines[k].delta - coi).abs() > threshold {
                flagged.push(machines[k].gen_idx);
            }
        }
    }
    flagged.sort_unstable();
    flagged
}

/// Everything the network solve needs for one topology epoch.
struct NetEpoch<T> {
    /// Global indices of energized buses.
    buses: Vec<usize>,
    local_of: Vec<Option<usize>>,
    lu: LuFactors<Complex<T>>,
    /// Island id per bus (over all buses, usize::MAX for none).
    island_of_bus: Vec<usize>,
    energized_island: Vec<bool>,
}

pub struct TransientSim<'a, T> {
    net: &'a Network<T>,
    machines: &'a [SystemMachine<T>],
    cfg: SimConfig<T>,
    relays: RelayPlan<T>,
    state: DynamicState<T>,
    /// In-sim branch statuses (starts from the hour topology).
    branch_in: Vec<bool>,
    /// Served complex power per bus at sim start, system pu.
    load_s0: Vec<Complex<T>>,
    /// Multiplicative served factor per bus (UFLS/UVLS sheds, island deaths).
    serve_factor: Vec<T>,
    epoch: NetEpoch<T>,
    // measurement state
    prev_angle: Vec<T>,
    freq_dev_hz: Vec<T>,
    // relay runtime
    distance_states: Vec<DistanceRelayState<T>>,
    ufls_states: Vec<ShedRelayState<T>>,
    uvls_states: Vec<ShedRelayState<T>>,
    flagged_ever: BTreeSet<usize>,
    // event log
    result: TransientResult<T>,
    ste_worst: Vec<T>,
}

impl<'a, T: Scalar> TransientSim<'a, T> {
    /// Set up a run from a converged pre-disturbance operating point.
    pub fn new(
        net: &'a Network<T>,
        machines: &'a [SystemMachine<T>],
        islands: &IslandSet,
        solution: &PowerFlowSolution<T>,
        served_demand: &[(T, T)],
        cfg: SimConfig<T>,
        relays: RelayPlan<T>,
    ) -> Result<Self, SimError> {
        let unit_outputs = crate::steady::allocate_unit_outputs(
            net,
            islands,
            solution,
            served_demand,
            &net.generators.iter().map(|g| g.p_set).collect::<Vec<_>>(),
        );
        Self::with_unit_outputs(net, machines, islands, solution, served_demand, &unit_outputs, cfg, relays)
    }

    /// As [`TransientSim::new`] with explicit per-unit outputs (the scenario
    /// driver passes the dispatch actually solved for the hour).
    #[allow(clippy::too_many_arguments)]
    pub fn with_unit_outputs(
        net: &'a Network<T>,
        machines: &'a [SystemMachine<T>],
        islands: &IslandSet,
        solution: &PowerFlowSolution<T>,
        served_demand: &[(T, T)],
        unit_outputs: &[(T, T)],
        cfg: SimConfig<T>,
        relays: RelayPlan<T>,
    ) -> Result<Self, SimError> {
        let state = init_from_power_flow(net, machines, islands, solution, unit_outputs)?;
        let sbase = net.base_mva;
        let load_s0: Vec<Complex<T>> = (0..net.buses.len())
            .map(|b| Complex::new(served_demand[b].0 / sbase, served_demand[b].1 / sbase))
            .collect();
        let branch_in = islands.branch_in_service.clone();
        let serve_factor = vec![T::one(); net.buses.len()];
        let n_machines = machines.len();
        let result = TransientResult {
            verdict: Verdict::Stable,
            machines_lost_synchronism: Vec::new(),
            lost_sync_log: Vec::new(),
            relay_trips: Vec::new(),
            shed_events: Vec::new(),
            gen_trips: Vec::new(),
            islanded_load_mw: T::zero(),
            final_served_factor: Vec::new(),
            ste_overloads: Vec::new(),
            series: Vec::new(),
            steps: 0,
        };
        let mut sim = Self {
            net,
            machines,
            cfg,
            distance_states: Vec::new(),
            ufls_states: Vec::new(),
            uvls_states: Vec::new(),
            relays,
            prev_angle: state.bus_v.iter().map(|v| v.arg()).collect(),
            freq_dev_hz: vec![T::zero(); net.buses.len()],
            state,
            branch_in,
            load_s0,
            serve_factor,
            epoch: NetEpoch {
                buses: Vec::new(),
                local_of: Vec::new(),
                lu: DenseMatrix::<Complex<T>>::zeros(1)
                    .factorize()
                    .expect("1x1 placeholder"),
                island_of_bus: Vec::new(),
                energized_island: Vec::new(),
            },
            flagged_ever: BTreeSet::new(),
            result,
            ste_worst: vec![T::zero(); net.branches.len()],
        };
        let _ = n_machines;
        sim.distance_states = sim
            .relays
            .distance
            .iter()
            .map(|(_, _, s)| DistanceRelayState::new(s.zones.len()))
            .collect();
        sim.ufls_states = sim
            .relays
            .ufls_buses
            .iter()
            .map(|_| ShedRelayState::new(sim.relays.ufls.stages.len()))
            .collect();
        sim.uvls_states = sim
            .relays
            .uvls_buses
            .iter()
            .map(|_| ShedRelayState::new(sim.relays.uvls.stages.len()))
            .collect();
        sim.rebuild_epoch()?;
        Ok(sim)
    }

    pub fn state(&self) -> &DynamicState<T> {
        &self.state
    }

    fn placeholder_lu() -> LuFactors<Complex<T>> {
        let mut m = DenseMatrix::<Complex<T>>::zeros(1);
        m.set(0, 0, Complex::new(T::one(), T::zero()));
        m.factorize().expect("identity factorizes")
    }

    /// Rebuild the island partition, the augmented admittance matrix, and its
    /// factorization. Loads on islands that died are disconnected and logged.
    fn rebuild_epoch(&mut self) -> Result<(), SimError> {
        let net = self.net;
        let n = net.buses.len();
        // union-find over in-sim branch statuses
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (bi, br) in net.branches.iter().enumerate() {
            if self.branch_in[bi] {
                let (f, t) = br.ends(net);
                let (rf, rt) = (find(&mut parent, f), find(&mut parent, t));
                if rf != rt {
                    let (lo, hi) = if rf < rt { (rf, rt) } else { (rt, rf) };
                    parent[hi] = lo;
                }
            }
        }
        let mut island_of_bus = vec![usize::MAX; n];
        let mut islands: Vec<usize> = Vec::new();
        for b in 0..n {
            let root = find(&mut parent, b);
            let id = match islands.iter().position(|&r| r == root) {
                Some(i) => i,
                None => {
                    islands.push(root);
                    islands.len() - 1
                }
            };
            island_of_bus[b] = id;
        }
        let mut energized_island = vec![false; islands.len()];
        for (m, st) in self.machines.iter().zip(&self.state.machines) {
            if st.online {
                energized_island[island_of_bus[m.bus_idx]] = true;
            }
        }

        // disconnect loads stranded on dead islands
        let sbase = net.base_mva;
        for b in 0..n {
            if !energized_island[island_of_bus[b]] && self.serve_factor[b] > T::zero() {
                let lost = self.load_s0[b].re * self.serve_factor[b] * sbase;
                if lost > T::zero() {
                    self.result.islanded_load_mw += lost;
                }
                self.serve_factor[b] = T::zero();
                self.state.bus_v[b] = Complex::new(T::zero(), T::zero());
            }
        }

        let buses: Vec<usize> = (0..n)
            .filter(|&b| energized_island[island_of_bus[b]])
            .collect();
        let mut local_of = vec![None; n];
        for (li, &b) in buses.iter().enumerate() {
            local_of[b] = Some(li);
        }
        let nb = buses.len();
        if nb == 0 {
            self.epoch = NetEpoch {
                buses,
                local_of,
                lu: Self::placeholder_lu(),
                island_of_bus,
                energized_island,
            };
            return Ok(());
        }

        let mut y = DenseMatrix::<Complex<T>>::zeros(nb);
        for (bi, br) in net.branches.iter().enumerate() {
            if !self.branch_in[bi] {
                continue;
            }
            let (fg, tg) = br.ends(net);
            let (Some(f), Some(t)) = (local_of[fg], local_of[tg]) else {
                continue;
            };
            let z = Complex::new(br.resistance, br.reactance);
            let ys = Complex::new(T::one(), T::zero()) / z;
            let ysh = Complex::new(T::zero(), br.charging / T::of(2.0));
            y.add_to(f, f, ys + ysh);
            y.add_to(t, t, ys + ysh);
            y.add_to(f, t, -ys);
            y.add_to(t, f, -ys);
        }
        // constant-admittance loads at their scaled served level
        for (b, &s0) in self.load_s0.iter().enumerate() {
            let Some(li) = local_of[b] else { continue };
            let v0 = self.state.bus_v[b].norm();
            if s0.norm() > T::zero() && v0 > T::of(0.05) {
                let y_load = s0.conj() * self.serve_factor[b] / (v0 * v0);
                y.add_to(li, li, y_load);
            }
        }
        // machine Norton admittances
        for (m, st) in self.machines.iter().zip(&self.state.machines) {
            if st.online {
                if let Some(li) = local_of[m.bus_idx] {
                    y.add_to(li, li, m.norton_y);
                }
            }
        }

        let lu = y.factorize().map_err(|_| SimError::Singular {
            t_s: self.state.t_s.as_f64(),
        })?;
        self.epoch = NetEpoch {
            buses,
            local_of,
            lu,
            island_of_bus,
            energized_island,
        };
        Ok(())
    }

    /// Solve the algebraic network equations for the given machine states,
    /// starting from the current bus voltages.
    fn solve_network(&self, states: &[MachineState<T>]) -> Result<Vec<Complex<T>>, SimError> {
        let nb = self.epoch.buses.len();
        let mut v: Vec<Complex<T>> = self.state.bus_v.clone();
        if nb == 0 {
            return Ok(v);
        }
        let tol = T::of(NETWORK_TOLERANCE);
        for _ in 0..NETWORK_CAP {
            let mut rhs = vec![Complex::new(T::zero(), T::zero()); nb];
            for (m, st) in self.machines.iter().zip(states) {
                if !st.online {
                    continue;
                }
                let Some(li) = self.epoch.local_of[m.bus_idx] else {
                    continue;
                };
                let vb = v[m.bus_idx];
                rhs[li] += machine_injection(m, st, vb) + m.norton_y * vb;
            }
            self.epoch.lu.solve(&mut rhs).map_err(|_| SimError::Singular {
                t_s: self.state.t_s.as_f64(),
            })?;
            let mut worst = T::zero();
            for (li, &b) in self.epoch.buses.iter().enumerate() {
                worst = worst.max((rhs[li] - v[b]).norm());
                v[b] = rhs[li];
            }
            if worst < tol {
                break;
            }
        }
        Ok(v)
    }

    /// One implicit-trapezoidal step with the alternating network solve.
    pub fn step(&mut self) -> Result<(), SimError> {
        let dt = self.cfg.dt_s;
        let controllers = self.cfg.controllers_enabled;
        let x_k = self.state.machines.clone();
        let f_k: Vec<Option<Derivatives<T>>> = self
            .machines
            .iter()
            .zip(&x_k)
            .map(|(m, st)| {
                st.online
                    .then(|| derivatives(m, st, self.state.bus_v[m.bus_idx], controllers))
            })
            .collect();

        // explicit predictor
        let mut x_next = x_k.clone();
        for (k, st) in x_next.iter_mut().enumerate() {
            if let Some(d) = &f_k[k] {
                st.delta += dt * d.d_delta;
                st.omega_dev += dt * d.d_omega;
                st.eq_p += dt * d.d_eq_p;
                st.ed_p += dt * d.d_ed_p;
                st.efd += dt * d.d_efd;
                st.pm += dt * d.d_pm;
                clamp_state(&self.machines[k], st);
            }
        }

        let half = dt / T::of(2.0);
        let mut v_next = self.state.bus_v.clone();
        let mut mismatch = T::max_value();
        for _ in 0..INNER_CAP {
            v_next = self.solve_network(&x_next)?;
            // corrector against the frozen start-of-step derivatives
            let mut worst = T::zero();
            for k in 0..x_next.len() {
                let Some(dk) = &f_k[k] else { continue };
                let m = &self.machines[k];
                let d_next = derivatives(m, &x_next[k], v_next[m.bus_idx], controllers);
                let mut corrected = x_k[k].clone();
                corrected.delta += half * (dk.d_delta + d_next.d_delta);
                corrected.omega_dev += half * (dk.d_omega + d_next.d_omega);
                corrected.eq_p += half * (dk.d_eq_p + d_next.d_eq_p);
                corrected.ed_p += half * (dk.d_ed_p + d_next.d_ed_p);
                corrected.efd += half * (dk.d_efd + d_next.d_efd);
                corrected.pm += half * (dk.d_pm + d_next.d_pm);
                clamp_state(m, &mut corrected);
                for (a, b) in [
                    (corrected.delta, x_next[k].delta),
                    (corrected.omega_dev, x_next[k].omega_dev),
                    (corrected.eq_p, x_next[k].eq_p),
                    (corrected.ed_p, x_next[k].ed_p),
                    (corrected.efd, x_next[k].efd),
                    (corrected.pm, x_next[k].pm),
                ] {
                    worst = worst.max((a - b).abs());
                }
                x_next[k] = corrected;
            }
            mismatch = worst;
            if mismatch < T::of(INNER_TOLERANCE) {
                break;
            }
        }
        if !mismatch.is_finite() {
            return Err(SimError::InnerDiverged {
                t_s: self.state.t_s.as_f64(),
                mismatch: mismatch.as_f64(),
            });
        }
        let v_final = self.solve_network(&x_next)?;

        // bus frequency estimate from the filtered angle rate
        let two_pi = T::of(2.0 * std::f64::consts::PI);
        for &b in &self.epoch.buses {
            let ang = v_final[b].arg();
            let mut d = ang - self.prev_angle[b];
            while d > T::of(std::f64::consts::PI) {
                d -= two_pi;
            }
            while d < -T::of(std::f64::consts::PI) {
                d += two_pi;
            }
            let raw_hz = d / dt / two_pi;
            let alpha = dt / self.cfg.freq_filter_s.max(dt);
            self.freq_dev_hz[b] += alpha * (raw_hz - self.freq_dev_hz[b]);
            self.prev_angle[b] = ang;
        }

        self.state.machines = x_next;
        self.state.bus_v = v_final;
        self.state.t_s += dt;
        self.result.steps += 1;
        Ok(())
    }

    fn bus_frequency(&self, bus: usize) -> T {
        T::of(NOMINAL_HZ) + self.freq_dev_hz[bus]
    }

    /// Current flowing out of `end` of a branch, system pu.
    fn branch_current(&self, bi: usize, end: BranchEnd) -> Complex<T> {
        let br = &self.net.branches[bi];
        let (f, t) = br.ends(self.net);
        let z = Complex::new(br.resistance, br.reactance);
        let ys = Complex::new(T::one(), T::zero()) / z;
        let ysh = Complex::new(T::zero(), br.charging / T::of(2.0));
        let (vf, vt) = (self.state.bus_v[f], self.state.bus_v[t]);
        match end {
            BranchEnd::From => ys * (vf - vt) + ysh * vf,
            BranchEnd::To => ys * (vt - vf) + ysh * vt,
        }
    }

    /// Evaluate relays and the out-of-step action; apply any resulting
    /// switching. Returns true when the topology changed.
    fn protection_pass(&mut self) -> Result<bool, SimError> {
        let t = self.state.t_s;
        let dt = self.cfg.dt_s;
        let mut branch_trips: Vec<(usize, BranchEnd, usize)> = Vec::new();
        let mut sheds: Vec<(usize, &'static str, usize, T)> = Vec::new();
        let mut gen_trips: Vec<usize> = Vec::new();

        if self.cfg.relays_enabled {
            for (ri, (bi, end, settings)) in self.relays.distance.iter().enumerate() {
                if !self.branch_in[*bi] {
                    continue;
                }
                let (f, tb) = self.net.branches[*bi].ends(self.net);
                let bus = match end {
                    BranchEnd::From => f,
                    BranchEnd::To => tb,
                };
                if self.epoch.local_of[bus].is_none() {
                    continue;
                }
                let v = self.state.bus_v[bus];
                let i = self.branch_current(*bi, *end);
                let z = apparent_impedance(v, i, settings.current_floor);
                if let Some(zone) =
                    distance_step(settings, &mut self.distance_states[ri], z, dt)
                {
                    branch_trips.push((*bi, *end, zone));
                }
            }

            for (k, &bus) in self.relays.ufls_buses.iter().enumerate() {
                if self.epoch.local_of[bus].is_none() || self.serve_factor[bus] <= T::zero() {
                    continue;
                }
                let f_hz = self.bus_frequency(bus);
                for (stage, frac) in
                    ufls_step(&self.relays.ufls, &mut self.ufls_states[k], f_hz, dt)
                {
                    sheds.push((bus, "ufls", stage, frac));
                }
            }
            for (k, &bus) in self.relays.uvls_buses.iter().enumerate() {
                if self.epoch.local_of[bus].is_none() || self.serve_factor[bus] <= T::zero() {
                    continue;
                }
                let vm = self.state.bus_v[bus].norm();
                for (stage, frac) in
                    uvls_step(&self.relays.uvls, &mut self.uvls_states[k], vm, dt)
                {
                    sheds.push((bus, "uvls", stage, frac));
                }
            }
        }

        // loss of synchronism
        let island_of_machine: Vec<usize> = self
            .machines
            .iter()
            .map(|m| self.epoch.island_of_bus[m.bus_idx])
            .collect();
        let flagged = detect_loss_of_synchronism(
            self.machines,
            &self.state,
            &island_of_machine,
            self.cfg.instability_threshold_deg,
        );
        for gen in flagged {
            if self.flagged_ever.insert(gen) {
                self.result.lost_sync_log.push((t, gen));
                if self.cfg.corrective_out_of_step {
                    gen_trips.push(gen);
                }
            } else if self.cfg.corrective_out_of_step {
                // flagged earlier but still online (e.g. corrective enabled
                // mid-run): trip now
                let k = self
                    .machines
                    .iter()
                    .position(|m| m.gen_idx == gen)
                    .expect("machine index");
                if self.state.machines[k].online && !gen_trips.contains(&gen) {
                    gen_trips.push(gen);
                }
            }
        }

        let mut changed = false;
        for (bi, end, zone) in branch_trips {
            if self.branch_in[bi] {
                self.branch_in[bi] = false;
                self.result.relay_trips.push(RelayTrip {
                    t_s: t,
                    branch_idx: bi,
                    end,
                    zone,
                });
                changed = true;
            }
        }
        for gen in gen_trips {
            let k = self
                .machines
                .iter()
                .position(|m| m.gen_idx == gen)
                .expect("machine index");
            if self.state.machines[k].online {
                self.state.machines[k].online = false;
                self.result.gen_trips.push(GenTrip { t_s: t, gen_idx: gen });
                changed = true;
            }
        }
        let sbase = self.net.base_mva;
        for (bus, relay, stage, frac) in sheds {
            let before = self.serve_factor[bus];
            if before <= T::zero() {
                continue;
            }
            let mw = self.load_s0[bus].re * before * frac * sbase;
            self.serve_factor[bus] = before * (T::one() - frac);
            self.result.shed_events.push(TransientShed {
                t_s: t,
                bus_idx: bus,
                relay,
                stage,
                fraction_of_remaining: frac,
                mw,
            });
            changed = true;
        }

        if changed {
            self.rebuild_epoch()?;
            // hold the frequency estimate across the switching step
            for &b in &self.epoch.buses {
                self.prev_angle[b] = self.state.bus_v[b].arg();
            }
        }
        Ok(changed)
    }

    fn apply_disturbances(&mut self, disturbances: &[Disturbance]) -> Result<(), SimError> {
        for d in disturbances {
            match *d {
                Disturbance::BranchOut(bi) => self.branch_in[bi] = false,
                Disturbance::BranchIn(bi) => self.branch_in[bi] = true,
                Disturbance::GenOut(gi) => {
                    if let Some(k) = self.machines.iter().position(|m| m.gen_idx == gi) {
                        self.state.machines[k].online = false;
                    }
                }
                Disturbance::GenIn(gi) => {
                    if let Some(k) = self.machines.iter().position(|m| m.gen_idx == gi) {
                        let bus = self.machines[k].bus_idx;
                        let v = self.state.bus_v[bus];
                        if v.norm() > T::of(0.1) {
                            let m = &self.machines[k];
                            let st = &mut self.state.machines[k];
                            st.online = true;
                            st.delta = v.arg();
                            st.omega_dev = T::zero();
                            st.eq_p = v.norm();
                            st.ed_p = T::zero();
                            st.efd = v.norm();
                            st.pm = T::zero();
                            st.vref = v.norm() + st.efd / m.exc.ka;
                            st.pref = T::zero();
                        }
                    }
                }
            }
        }
        self.rebuild_epoch()?;
        for &b in &self.epoch.buses {
            self.prev_angle[b] = self.state.bus_v[b].arg();
        }
        Ok(())
    }

    fn record_series(&mut self) {
        if !self.cfg.record_series {
            return;
        }
        let nan = T::nan();
        let row = SeriesRow {
            t_s: self.state.t_s,
            machine_angle: self
                .state
                .machines
                .iter()
                .map(|st| if st.online { st.delta } else { nan })
                .collect(),
            machine_speed: self
                .state
                .machines
                .iter()
                .map(|st| if st.online { st.omega_dev } else { nan })
                .collect(),
            bus_vm: self.state.bus_v.iter().map(|v| v.norm()).collect(),
            bus_freq: (0..self.net.buses.len())
                .map(|b| self.bus_frequency(b))
                .collect(),
        };
        self.result.series.push(row);
    }

    fn track_ste(&mut self) {
        let sbase = self.net.base_mva;
        for (bi, br) in self.net.branches.iter().enumerate() {
            if !self.branch_in[bi] {
                continue;
            }
            let (f, _) = br.ends(self.net);
            if self.epoch.local_of[f].is_none() {
                continue;
            }
            let i_from = self.branch_current(bi, BranchEnd::From);
            let s = (self.state.bus_v[f] * i_from.conj()).norm() * sbase;
            self.ste_worst[bi] = self.ste_worst[bi].max(s);
        }
    }

    /// Run to the configured horizon, applying `disturbances` at the
    /// disturbance time.
    pub fn run(mut self, disturbances: &[Disturbance]) -> Result<TransientResult<T>, SimError> {
        let dt = self.cfg.dt_s;
        let steps = (self.cfg.t_end_s / dt).round().as_f64() as usize;
        let disturb_step = (self.cfg.disturbance_time_s / dt).round().as_f64() as usize;
        let mut disturbed = false;
        self.record_series();
        for step_no in 0..steps {
            if !disturbed && step_no >= disturb_step {
                self.apply_disturbances(disturbances)?;
                disturbed = true;
            }
            self.step()?;
            self.protection_pass()?;
            self.track_ste();
            if step_no % self.cfg.series_decimation == 0 {
                self.record_series();
            }
        }

        // final verdict over machines still online
        let island_of_machine: Vec<usize> = self
            .machines
            .iter()
            .map(|m| self.epoch.island_of_bus[m.bus_idx])
            .collect();
        self.result.machines_lost_synchronism = detect_loss_of_synchronism(
            self.machines,
            &self.state,
            &island_of_machine,
            self.cfg.instability_threshold_deg,
        );
        self.result.verdict = if self.result.machines_lost_synchronism.is_empty() {
            Verdict::Stable
        } else {
            Verdict::Unstable
        };
        self.result.final_served_factor = self.serve_factor.clone();
        self.result.ste_overloads = self
            .net
            .branches
            .iter()
            .enumerate()
            .filter(|(bi, br)| self.ste_worst[*bi] > br.rating_ste)
            .map(|(bi, br)| SteOverload {
                branch_idx: bi,
                worst_mva: self.ste_worst[bi],
                rating_ste: br.rating_ste,
            })
            .collect();
        Ok(self.result)
    }
}

/// Convenience wrapper: build the sim and run the disturbance list.
#[allow(clippy::too_many_arguments)]
pub fn run_transient<T: Scalar>(
    net: &Network<T>,
    machines: &[SystemMachine<T>],
    islands: &IslandSet,
    solution: &PowerFlowSolution<T>,
    served_demand: &[(T, T)],
    unit_outputs: &[(T, T)],
    disturbances: &[Disturbance],
    relays: RelayPlan<T>,
    cfg: SimConfig<T>,
) -> Result<TransientResult<T>, SimError> {
    let sim = TransientSim::with_unit_outputs(
        net,
        machines,
        islands,
        solution,
        served_demand,
        unit_outputs,
        cfg,
        relays,
    )?;
    sim.run(disturbances)
}
