//! Minimum load shedding per energized island.
//!
//! Stage 1 is a DC linear program: minimize total MW shed subject to
//! linearized branch flows within the long-term rating, generator limits, and
//! island power balance. Stage 2 verifies the plan with a full AC power flow;
//! if the AC solve fails or any branch exceeds its LTE rating in MVA, the DC
//! flow limits are tightened by a fixed factor (0.93 per round, at most 8
//! rounds) and the LP re-solved, so the final plan is always AC-feasible or
//! the island is reported infeasible. The stage-1 objective is a lower bound
//! on the final shed.

use microlp::{ComparisonOp, OptimizationDirection, Problem, Variable};
use thiserror::Error;

use super::powerflow::{run_power_flow, PowerFlowOptions, PowerFlowSolution};
use crate::model::{GenStatus, IslandSet, Network};
use crate::scalar::Scalar;

const ESCALATION_FACTOR: f64 = 0.93;
const MAX_ESCALATIONS: usize = 8;
/// Loading-relief margin applied when pre-scaling the reference dispatch.
const DISPATCH_MARGIN: f64 = 1.02;
/// Cost per MW of dispatch deviation from the reference; small enough to
/// never trade against a single load MW.
const DEVIATION_COST: f64 = 1e-4;
/// Relative slack allowed on the AC rating check.
const RATING_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum ShedError {
    #[error("minimum-shed LP failed on island {island}: {reason}")]
    Lp { island: usize, reason: String },
    #[error(transparent)]
    PowerFlow(#[from] super::powerflow::PowerFlowError),
}

/// The dispatch and shedding decision for one hour.
#[derive(Debug, Clone)]
pub struct ShedPlan<T> {
    /// Fraction of the scheduled demand shed, per bus. Dead-island buses
    /// shed 1; buses without load report 0.
    pub bus_shed_fraction: Vec<T>,
    /// Active dispatch per generator, MW; zero for offline units.
    pub dispatch: Vec<T>,
    /// `(island id, feasible)` per energized island.
    pub island_feasible: Vec<(usize, bool)>,
    /// First-pass DC objective, MW: a lower bound on the final shed.
    pub dc_shed_mw: T,
    /// Final total shed, MW (including dead-island load).
    pub shed_mw: T,
    pub escalation_rounds: usize,
    /// AC solution at the final plan.
    pub solution: PowerFlowSolution<T>,
}

struct IslandLp {
    gens: Vec<usize>,
    load_buses: Vec<usize>,
    p_vars: Vec<Variable>,
    served_vars: Vec<Variable>,
}

fn build_island_lp<T: Scalar>(
    net: &Network<T>,
    islands: &IslandSet,
    island_id: usize,
    demand: &[(T, T)],
    limit_scale: f64,
) -> (Problem, IslandLp) {
    let island = &islands.islands[island_id];
    let buses = &island.buses;
    let slack = island.slack_bus.expect("energized island has slack");
    let local_of = |global: usize| buses.binary_search(&global).expect("bus in island");
    let base = net.base_mva.as_f64();

    let mut problem = Problem::new(OptimizationDirection::Maximize);

    // bus angle variables, slack pinned at zero
    let theta: Vec<Variable> = buses
        .iter()
        .map(|&b| {
            if b == slack {
                problem.add_var(0.0, (0.0, 0.0))
            } else {
                problem.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY))
            }
        })
        .collect();

    // generators: p plus deviation split around the pre-scaled reference
    let gens: Vec<usize> = (0..net.generators.len())
        .filter(|&gi| {
            islands.gen_status[gi] == GenStatus::Online
                && islands.island_of_bus
                    [net.bus_index(net.generators[gi].bus).expect("gen bus")]
                    == island_id
        })
        .collect();
    let total_demand: f64 = buses.iter().map(|&b| demand[b].0.as_f64()).sum();
    let total_pset: f64 = gens
        .iter()
        .map(|&gi| net.generators[gi].p_set.as_f64())
        .sum();
    let kappa = if total_pset > 0.0 {
        (total_demand * DISPATCH_MARGIN / total_pset).min(1.0)
    } else {
        0.0
    };

    let mut p_vars = Vec::with_capacity(gens.len());
    for &gi in &gens {
        let g = &net.generators[gi];
        let (p_min, p_max) = (g.p_min.as_f64(), g.p_max.as_f64());
        let reference = (g.p_set.as_f64() * kappa).clamp(p_min, p_max);
        let p = problem.add_var(0.0, (p_min, p_max));
        let up = problem.add_var(-DEVIATION_COST, (0.0, f64::INFINITY));
        let dn = problem.add_var(-DEVIATION_COST, (0.0, f64::INFINITY));
        // p - up + dn = reference
        problem.add_constraint(
            [(p, 1.0), (up, -1.0), (dn, 1.0)],
            ComparisonOp::Eq,
            reference,
        );
        p_vars.push(p);
    }

    // served demand per load bus
    let load_buses: Vec<usize> = buses
        .iter()
        .copied()
        .filter(|&b| demand[b].0.as_f64() > 0.0)
        .collect();
    let served_vars: Vec<Variable> = load_buses
        .iter()
        .map(|&b| problem.add_var(1.0, (0.0, demand[b].0.as_f64())))
        .collect();

    // branch flow limits: |base * (th_f - th_t) / x| <= scaled LTE
    for (bi, br) in net.branches.iter().enumerate() {
        if !islands.branch_in_service[bi] {
            continue;
        }
        let (f, t) = br.ends(net);
        if islands.island_of_bus[f] != island_id {
            continue;
        }
        let coeff = base / br.reactance.as_f64();
        let lim = br.rating_lte.as_f64() * limit_scale;
        let (lf, lt) = (theta[local_of(f)], theta[local_of(t)]);
        problem.add_constraint([(lf, coeff), (lt, -coeff)], ComparisonOp::Le, lim);
        problem.add_constraint([(lf, coeff), (lt, -coeff)], ComparisonOp::Ge, -lim);
    }

    // nodal balance: generation - served = sum of outgoing DC flows
    for (li, &b) in buses.iter().enumerate() {
        let mut terms: Vec<(Variable, f64)> = Vec::new();
        for (k, &gi) in gens.iter().enumerate() {
            if net.bus_index(net.generators[gi].bus).expect("gen bus") == b {
                terms.push((p_vars[k], 1.0));
            }
        }
        if let Some(pos) = load_buses.iter().position(|&lb| lb == b) {
            terms.push((served_vars[pos], -1.0));
        }
        for (bi, br) in net.branches.iter().enumerate() {
            if !islands.branch_in_service[bi] {
                continue;
            }
            let (f, t) = br.ends(net);
            if f != b && t != b {
                continue;
            }
            let coeff = base / br.reactance.as_f64();
            let (near, far) = if f == b { (f, t) } else { (t, f) };
            terms.push((theta[local_of(near)], -coeff));
            terms.push((theta[local_of(far)], coeff));
        }
        problem.add_constraint(terms, ComparisonOp::Eq, 0.0);
        let _ = li;
    }

    (
        problem,
        IslandLp {
            gens,
            load_buses,
            p_vars,
            served_vars,
        },
    )
}

/// Solve the minimum-shed problem across all islands for one hour.
///
/// `demand` is the scheduled per-bus demand (MW, MVAr) before shedding; the
/// reactive side follows the active shed at constant power factor.
pub fn solve_minimum_shed<T: Scalar>(
    net: &Network<T>,
    islands: &IslandSet,
    demand: &[(T, T)],
    warm: Option<&PowerFlowSolution<T>>,
    options: &PowerFlowOptions<T>,
) -> Result<ShedPlan<T>, ShedError> {
    let nb = net.buses.len();
    let mut served = vec![T::zero(); nb];
    let mut dispatch = vec![T::zero(); net.generators.len()];
    let mut island_feasible = Vec::new();
    let mut dc_shed_mw = T::zero();
    let mut escalation_rounds = 0usize;

    // dead-island buses shed everything; the LP only sees energized islands
    for island in islands.islands.iter().filter(|i| !i.energized) {
        let _ = island;
    }

    let energized: Vec<usize> = islands.energized_islands().map(|i| i.id).collect();
    for &island_id in &energized {
        let mut scale = 1.0f64;
        let mut feasible = false;
        let mut first_pass_shed: Option<f64> = None;
        for round in 0..=MAX_ESCALATIONS {
            let (problem, vars) = build_island_lp(net, islands, island_id, demand, scale);
            let lp = match problem.solve() {
                Ok(sol) => sol,
                Err(e) => {
                    if round == 0 {
                        return Err(ShedError::Lp {
                            island: island_id,
                            reason: e.to_string(),
                        });
                    }
                    break;
                }
            };
            let island_demand: f64 = vars
                .load_buses
                .iter()
                .map(|&b| demand[b].0.as_f64())
                .sum();
            let island_served: f64 = vars.served_vars.iter().map(|&v| lp[v]).sum();
            if first_pass_shed.is_none() {
                first_pass_shed = Some(island_demand - island_served);
            }

            // candidate plan for this island
            for (&b, &v) in vars.load_buses.iter().zip(&vars.served_vars) {
                served[b] = T::of(lp[v].max(0.0));
            }
            for (&gi, &v) in vars.gens.iter().zip(&vars.p_vars) {
                dispatch[gi] = T::of(lp[v]);
            }

            // AC verification over the whole network state so far
            let demand_after = served_demand(net, islands, demand, &served);
            let ac = run_power_flow(net, islands, &demand_after, &dispatch, warm, options)?;
            let island_ok = ac
                .islands
                .iter()
                .find(|r| r.island_id == island_id)
                .map(|r| r.converged)
                .unwrap_or(false);
            let ratings_ok = net.branches.iter().enumerate().all(|(bi, br)| {
                if !islands.branch_in_service[bi]
                    || islands.island_of_bus[br.ends(net).0] != island_id
                {
                    return true;
                }
                ac.branch_flow[bi].mva_max()
                    <= br.rating_lte * T::of(1.0 + RATING_TOLERANCE) + T::of(1e-6)
            });
            if island_ok && ratings_ok {
                feasible = true;
                break;
            }
            escalation_rounds += 1;
            scale *= ESCALATION_FACTOR;
        }
        dc_shed_mw += T::of(first_pass_shed.unwrap_or(0.0));
        island_feasible.push((island_id, feasible));
        if !feasible {
            // report and fall back to full shed on this island
            for &b in &islands.islands[island_id].buses {
                served[b] = T::zero();
            }
        }
    }

    // final consistent AC solution for the record
    let demand_after = served_demand(net, islands, demand, &served);
    let solution = run_power_flow(net, islands, &demand_after, &dispatch, warm, options)?;

    let mut bus_shed_fraction = vec![T::zero(); nb];
    let mut shed_mw = T::zero();
    for b in 0..nb {
        let scheduled = demand[b].0;
        if scheduled <= T::zero() {
            continue;
        }
        let energized_bus = islands.islands[islands.island_of_bus[b]].energized;
        let served_b = if energized_bus { served[b] } else { T::zero() };
        let frac = ((scheduled - served_b) / scheduled)
            .max(T::zero())
            .min(T::one());
        bus_shed_fraction[b] = frac;
        shed_mw += scheduled - served_b;
    }

    Ok(ShedPlan {
        bus_shed_fraction,
        dispatch,
        island_feasible,
        dc_shed_mw,
        shed_mw,
        escalation_rounds,
        solution,
    })
}

/// Demand vector after shedding: active power from the served values,
/// reactive scaled at constant power factor.
fn served_demand<T: Scalar>(
    net: &Network<T>,
    islands: &IslandSet,
    demand: &[(T, T)],
    served: &[T],
) -> Vec<(T, T)> {
    (0..net.buses.len())
        .map(|b| {
            let (p, q) = demand[b];
            if p <= T::zero() {
                // unloaded or reactive-only bus: drop demand when dead
                let energized = islands.islands[islands.island_of_bus[b]].energized;
                return if energized { (p, q) } else { (T::zero(), T::zero()) };
            }
            let frac = (served[b] / p).max(T::zero()).min(T::one());
            (p * frac, q * frac)
        })
        .collect()
}
