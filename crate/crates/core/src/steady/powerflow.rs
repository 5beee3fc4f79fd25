//! Newton-Raphson AC power flow in polar form, solved independently per
//! energized island on a dense admittance matrix.

use num_complex::Complex;
use thiserror::Error;

use crate::linalg::DenseMatrix;
use crate::model::{BusKind, IslandSet, Network};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct PowerFlowOptions<T> {
    /// Convergence tolerance on the largest power mismatch, per-unit.
    pub tolerance: T,
    pub max_iterations: usize,
}

impl<T: Scalar> Default for PowerFlowOptions<T> {
    fn default() -> Self {
        Self {
            tolerance: T::of(1e-6),
            max_iterations: 20,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PowerFlowError {
    #[error("island {island}: no slack bus available")]
    NoSlack { island: usize },
    #[error("island {island}: singular Jacobian at iteration {iteration}")]
    SingularJacobian { island: usize, iteration: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Power flow on both ends of a branch, MW / MVAr. Zero for de-energized
/// branches.
#[derive(Debug, Clone, Copy, Default)]
pub struct BranchFlow<T> {
    pub p_from: T,
    pub q_from: T,
    pub p_to: T,
    pub q_to: T,
}

impl<T: Scalar> BranchFlow<T> {
    pub fn mva_from(&self) -> T {
        (self.p_from * self.p_from + self.q_from * self.q_from).sqrt()
    }

    pub fn mva_to(&self) -> T {
        (self.p_to * self.p_to + self.q_to * self.q_to).sqrt()
    }

    pub fn mva_max(&self) -> T {
        self.mva_from().max(self.mva_to())
    }

    /// Series loss on the branch, MW.
    pub fn loss_mw(&self) -> T {
        self.p_from + self.p_to
    }
}

#[derive(Debug, Clone)]
pub struct IslandSolve<T> {
    pub island_id: usize,
    pub converged: bool,
    pub iterations: usize,
    pub max_mismatch: T,
}

/// Self-consistent network solution: bus voltages plus branch flows computed
/// from those same voltages.
#[derive(Debug, Clone)]
pub struct PowerFlowSolution<T> {
    /// Voltage magnitude per bus, per-unit; zero on de-energized buses.
    pub vm: Vec<T>,
    /// Voltage angle per bus, radians.
    pub va: Vec<T>,
    pub branch_flow: Vec<BranchFlow<T>>,
    /// Total series losses, MW.
    pub losses_mw: T,
    pub converged: bool,
    /// Worst iteration count across islands.
    pub iterations: usize,
    /// Worst final mismatch across islands, per-unit.
    pub max_mismatch: T,
    pub islands: Vec<IslandSolve<T>>,
    /// Slack active power per island, MW, keyed by island id.
    pub slack_p_mw: Vec<(usize, T)>,
}

impl<T: Scalar> PowerFlowSolution<T> {
    pub fn voltage(&self, bus_idx: usize) -> Complex<T> {
        Complex::from_polar(self.vm[bus_idx], self.va[bus_idx])
    }
}

/// Solve the network hour state: `demand` is the served demand per bus
/// (MW, MVAr), `dispatch` the active output per generator (MW, ignored for
/// offline units). Each energized island is solved independently; a
/// non-converged island is reported in the solution, not an error.
pub fn run_power_flow<T: Scalar>(
    net: &Network<T>,
    islands: &IslandSet,
    demand: &[(T, T)],
    dispatch: &[T],
    warm: Option<&PowerFlowSolution<T>>,
    options: &PowerFlowOptions<T>,
) -> Result<PowerFlowSolution<T>, PowerFlowError> {
    let n = net.buses.len();
    if demand.len() != n {
        return Err(PowerFlowError::Dimension(format!(
            "demand has {} entries for {} buses",
            demand.len(),
            n
        )));
    }
    if dispatch.len() != net.generators.len() {
        return Err(PowerFlowError::Dimension(format!(
            "dispatch has {} entries for {} generators",
            dispatch.len(),
            net.generators.len()
        )));
    }

    let mut solution = PowerFlowSolution {
        vm: vec![T::zero(); n],
        va: vec![T::zero(); n],
        branch_flow: vec![BranchFlow::default(); net.branches.len()],
        losses_mw: T::zero(),
        converged: true,
        iterations: 0,
        max_mismatch: T::zero(),
        islands: Vec::new(),
        slack_p_mw: Vec::new(),
    };

    for island in islands.energized_islands() {
        let slack = island
            .slack_bus
            .ok_or(PowerFlowError::NoSlack { island: island.id })?;
        let result = solve_island(
            net, islands, island.id, slack, demand, dispatch, warm, options, &mut solution,
        )?;
        solution.converged &= result.converged;
        solution.iterations = solution.iterations.max(result.iterations);
        solution.max_mismatch = solution.max_mismatch.max(result.max_mismatch);
        solution.islands.push(result);
    }

    // branch flows from the final voltages
    let base = net.base_mva;
    let mut losses = T::zero();
    for (bi, br) in net.branches.iter().enumerate() {
        if !islands.branch_in_service[bi] {
            continue;
        }
        let (f, t) = br.ends(net);
        let z = Complex::new(br.resistance, br.reactance);
        let y = Complex::new(T::one(), T::zero()) / z;
        let ysh = Complex::new(T::zero(), br.charging / T::of(2.0));
        let vf = solution.voltage(f);
        let vt = solution.voltage(t);
        let if_ = y * (vf - vt) + ysh * vf;
        let it = y * (vt - vf) + ysh * vt;
        let sf = vf * if_.conj() * base;
        let st = vt * it.conj() * base;
        solution.branch_flow[bi] = BranchFlow {
            p_from: sf.re,
            q_from: sf.im,
            p_to: st.re,
            q_to: st.im,
        };
        losses += solution.branch_flow[bi].loss_mw();
    }
    solution.losses_mw = losses;
    Ok(solution)
}

#[allow(clippy::too_many_arguments)]
fn solve_island<T: Scalar>(
    net: &Network<T>,
    islands: &IslandSet,
    island_id: usize,
    slack: usize,
    demand: &[(T, T)],
    dispatch: &[T],
    warm: Option<&PowerFlowSolution<T>>,
    options: &PowerFlowOptions<T>,
    solution: &mut PowerFlowSolution<T>,
) -> Result<IslandSolve<T>, PowerFlowError> {
    let buses: &[usize] = &islands.islands[island_id].buses;
    let nb = buses.len();
    let local_of = |global: usize| buses.binary_search(&global).expect("bus in island");
    let base = net.base_mva;

    // admittance matrix over island buses
    let mut g = vec![vec![T::zero(); nb]; nb];
    let mut b = vec![vec![T::zero(); nb]; nb];
    for (bi, br) in net.branches.iter().enumerate() {
        if !islands.branch_in_service[bi] {
            continue;
        }
        let (fg, tg) = br.ends(net);
        if islands.island_of_bus[fg] != island_id {
            continue;
        }
        let (f, t) = (local_of(fg), local_of(tg));
        let z = Complex::new(br.resistance, br.reactance);
        let y = Complex::new(T::one(), T::zero()) / z;
        let half_chg = br.charging / T::of(2.0);
        g[f][f] += y.re;
        b[f][f] += y.im + half_chg;
        g[t][t] += y.re;
        b[t][t] += y.im + half_chg;
        g[f][t] -= y.re;
        b[f][t] -= y.im;
        g[t][f] -= y.re;
        b[t][f] -= y.im;
    }

    // bus classification and scheduled injections (per-unit)
    let mut is_pv = vec![false; nb];
    let mut p_spec = vec![T::zero(); nb];
    let mut q_spec = vec![T::zero(); nb];
    let mut vset = vec![T::one(); nb];
    for (li, &gi) in buses.iter().enumerate() {
        p_spec[li] = -demand[gi].0 / base;
        q_spec[li] = -demand[gi].1 / base;
        vset[li] = if net.buses[gi].voltage_setpoint > T::zero() {
            net.buses[gi].voltage_setpoint
        } else {
            T::one()
        };
    }
    for (gi, gen) in net.generators.iter().enumerate() {
        if islands.gen_status[gi] != crate::model::GenStatus::Online {
            continue;
        }
        let bg = net.bus_index(gen.bus).expect("resolved gen bus");
        if islands.island_of_bus[bg] != island_id {
            continue;
        }
        let li = local_of(bg);
        is_pv[li] = true;
        p_spec[li] += dispatch[gi] / base;
    }
    let slack_local = local_of(slack);
    is_pv[slack_local] = false;

    // start point: warm voltages when available, else flat
    let mut vm = vec![T::one(); nb];
    let mut va = vec![T::zero(); nb];
    for (li, &gi) in buses.iter().enumerate() {
        if is_pv[li] || li == slack_local {
            vm[li] = vset[li];
        }
        if let Some(w) = warm {
            if w.vm[gi] > T::of(0.1) {
                vm[li] = if is_pv[li] || li == slack_local {
                    vset[li]
                } else {
                    w.vm[gi]
                };
                va[li] = w.va[gi];
            }
        }
    }

    // unknown ordering: angles at non-slack buses, then magnitudes at PQ buses
    let ang_idx: Vec<usize> = (0..nb).filter(|&i| i != slack_local).collect();
    let mag_idx: Vec<usize> = (0..nb).filter(|&i| i != slack_local && !is_pv[i]).collect();
    let n_ang = ang_idx.len();
    let n_unknown = n_ang + mag_idx.len();

    let calc_power = |vm: &[T], va: &[T]| -> (Vec<T>, Vec<T>) {
        let mut p = vec![T::zero(); nb];
        let mut q = vec![T::zero(); nb];
        for i in 0..nb {
            let mut pi = T::zero();
            let mut qi = T::zero();
            for j in 0..nb {
                if g[i][j] == T::zero() && b[i][j] == T::zero() {
                    continue;
                }
                let th = va[i] - va[j];
                let (sin, cos) = th.sin_cos();
                pi += vm[j] * (g[i][j] * cos + b[i][j] * sin);
                qi += vm[j] * (g[i][j] * sin - b[i][j] * cos);
            }
            p[i] = vm[i] * pi;
            q[i] = vm[i] * qi;
        }
        (p, q)
    };

    let mismatch = |p: &[T], q: &[T]| -> (Vec<T>, T) {
        let mut f = vec![T::zero(); n_unknown];
        let mut worst = T::zero();
        for (k, &i) in ang_idx.iter().enumerate() {
            f[k] = p_spec[i] - p[i];
            worst = worst.max(f[k].abs());
        }
        for (k, &i) in mag_idx.iter().enumerate() {
            f[n_ang + k] = q_spec[i] - q[i];
            worst = worst.max(f[n_ang + k].abs());
        }
        (f, worst)
    };

    let mut iterations = 0;
    let (mut p, mut q) = calc_power(&vm, &va);
    let (mut f, mut worst) = mismatch(&p, &q);
    let mut converged = worst <= options.tolerance;

    while !converged && iterations < options.max_iterations {
        iterations += 1;

        // dense Jacobian in the same unknown ordering
        let mut jac = DenseMatrix::<T>::zeros(n_unknown);
        for (r, &i) in ang_idx.iter().enumerate() {
            for (c, &j) in ang_idx.iter().enumerate() {
                let v = if i == j {
                    -q[i] - b[i][i] * vm[i] * vm[i]
                } else {
                    let th = va[i] - va[j];
                    let (sin, cos) = th.sin_cos();
                    vm[i] * vm[j] * (g[i][j] * sin - b[i][j] * cos)
                };
                jac.set(r, c, v);
            }
            for (c, &j) in mag_idx.iter().enumerate() {
                let v = if i == j {
                    p[i] / vm[i] + g[i][i] * vm[i]
                } else {
                    let th = va[i] - va[j];
                    let (sin, cos) = th.sin_cos();
                    vm[i] * (g[i][j] * cos + b[i][j] * sin)
                };
                jac.set(r, n_ang + c, v);
            }
        }
        for (r, &i) in mag_idx.iter().enumerate() {
            for (c, &j) in ang_idx.iter().enumerate() {
                let v = if i == j {
                    p[i] - g[i][i] * vm[i] * vm[i]
                } else {
                    let th = va[i] - va[j];
                    let (sin, cos) = th.sin_cos();
                    -vm[i] * vm[j] * (g[i][j] * cos + b[i][j] * sin)
                };
                jac.set(n_ang + r, c, v);
            }
            for (c, &j) in mag_idx.iter().enumerate() {
                let v = if i == j {
                    q[i] / vm[i] - b[i][i] * vm[i]
                } else {
                    let th = va[i] - va[j];
                    let (sin, cos) = th.sin_cos();
                    vm[i] * (g[i][j] * sin - b[i][j] * cos)
                };
                jac.set(n_ang + r, n_ang + c, v);
            }
        }

        let lu = jac
            .factorize()
            .map_err(|_| PowerFlowError::SingularJacobian {
                island: island_id,
                iteration: iterations,
            })?;
        let mut dx = f.clone();
        lu.solve(&mut dx)
            .map_err(|_| PowerFlowError::SingularJacobian {
                island: island_id,
                iteration: iterations,
            })?;

        for (k, &i) in ang_idx.iter().enumerate() {
            va[i] += dx[k];
        }
        for (k, &i) in mag_idx.iter().enumerate() {
            vm[i] += dx[n_ang + k];
        }

        let next = calc_power(&vm, &va);
        p = next.0;
        q = next.1;
        let next_f = mismatch(&p, &q);
        f = next_f.0;
        worst = next_f.1;
        converged = worst.is_finite() && worst <= options.tolerance;
        if !worst.is_finite() {
            break;
        }
    }
    let _ = f;

    for (li, &gi) in buses.iter().enumerate() {
        solution.vm[gi] = vm[li];
        solution.va[gi] = va[li];
    }
    // slack active power: calculated injection plus the local served demand
    let slack_p = (p[slack_local] + demand[slack].0 / base) * base;
    solution.slack_p_mw.push((island_id, slack_p));

    Ok(IslandSolve {
        island_id,
        converged,
        iterations,
        max_mismatch: worst,
    })
}

/// Split a solved operating point into per-unit outputs `(P MW, Q MVAr)` for
/// every generator: P from the dispatch (slack-bus units absorb the island
/// imbalance pro rata to capacity), Q from the bus reactive injection split
/// pro rata to reactive range.
pub fn allocate_unit_outputs<T: Scalar>(
    net: &Network<T>,
    islands: &IslandSet,
    solution: &PowerFlowSolution<T>,
    demand: &[(T, T)],
    dispatch: &[T],
) -> Vec<(T, T)> {
    let base = net.base_mva;
    let mut out = vec![(T::zero(), T::zero()); net.generators.len()];

    for island in islands.energized_islands() {
        let Some(slack) = island.slack_bus else {
            continue;
        };
        for &bus in &island.buses {
            let gens: Vec<usize> = net
                .gens_at(bus)
                .into_iter()
                .filter(|&gi| islands.gen_status[gi] == crate::model::GenStatus::Online)
                .collect();
            if gens.is_empty() {
                continue;
            }
            // reactive injection at the bus from the solved voltages
            let v = solution.voltage(bus);
            let mut s_inj = Complex::new(T::zero(), T::zero());
            for (bi, br) in net.branches.iter().enumerate() {
                if !islands.branch_in_service[bi] {
                    continue;
                }
                let (f, t) = br.ends(net);
                if f == bus {
                    s_inj += Complex::new(
                        solution.branch_flow[bi].p_from,
                        solution.branch_flow[bi].q_from,
                    );
                } else if t == bus {
                    s_inj +=
                        Complex::new(solution.branch_flow[bi].p_to, solution.branch_flow[bi].q_to);
                }
            }
            let _ = v;
            let q_gen_total = s_inj.im + demand[bus].1;
            let q_range: T = gens
                .iter()
                .map(|&gi| net.generators[gi].q_max - net.generators[gi].q_min)
                .sum();
            let p_total: T = if bus == slack {
                solution
                    .slack_p_mw
                    .iter()
                    .find(|(id, _)| *id == island.id)
                    .map(|(_, p)| *p)
                    .unwrap_or_else(T::zero)
            } else {
                gens.iter().map(|&gi| dispatch[gi]).sum()
            };
            let cap: T = gens.iter().map(|&gi| net.generators[gi].p_max).sum();
            for &gi in &gens {
                let gen = &net.generators[gi];
                let q_share = if q_range > T::zero() {
                    (gen.q_max - gen.q_min) / q_range
                } else {
                    T::one() / T::of(gens.len() as f64)
                };
                let p = if bus == slack {
                    if cap > T::zero() {
                        p_total * gen.p_max / cap
                    } else {
                        p_total / T::of(gens.len() as f64)
                    }
                } else {
                    dispatch[gi]
                };
                out[gi] = (p, q_gen_total * q_share);
            }
        }
    }
    let _ = base;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{connected_islands, parse_case, OperatingState};

    fn solve_case(
        text: &str,
        demand_of: impl Fn(&Network<f64>) -> Vec<(f64, f64)>,
    ) -> (Network<f64>, IslandSet, PowerFlowSolution<f64>) {
        let net = parse_case::<f64>(text).unwrap();
        let islands = connected_islands(&net, &OperatingState::intact(&net));
        let demand = demand_of(&net);
        let dispatch: Vec<f64> = net.generators.iter().map(|g| g.p_set).collect();
        let sol = run_power_flow(
            &net,
            &islands,
            &demand,
            &dispatch,
            None,
            &PowerFlowOptions::default(),
        )
        .unwrap();
        (net, islands, sol)
    }

    /// Closed-form two-bus feeder solution used as an oracle: slack at 1.0 pu
    /// feeding a constant-power load through r + jx.
    fn two_bus_analytic(r: f64, x: f64, p_mw: f64, q_mvar: f64, base: f64) -> num_complex::Complex64 {
        use num_complex::Complex64;
        let z = Complex64::new(r, x);
        let s = Complex64::new(p_mw / base, q_mvar / base);
        let a = (z * s.conj()).re;
        let b = (z * s.conj()).im;
        // |V2|^2 solves u^2 + (2a - 1)u + a^2 + b^2 = 0 given V1 = 1
        let coeff = 2.0 * a - 1.0;
        let disc = coeff * coeff - 4.0 * (a * a + b * b);
        let u = (-coeff + disc.sqrt()) / 2.0;
        // conj(V2) = (u + z conj(s)) / V1
        (Complex64::new(u, 0.0) + z * s.conj()).conj()
    }

    #[test]
    fn two_bus_matches_analytic_solution() {
        let (_, _, sol) = solve_case(
            "CASE twobus 100\n\
             BUS 1 1 230 SLACK 1.0\n\
             BUS 2 1 230 PQ 1.0\n\
             BRANCH 1 2 1 0.02 0.12 0.0 200 240 0\n\
             GEN 1 0 500 -900 900 60 U1\n\
             LOAD 2 60 25\n",
            |net| {
                let mut d = vec![(0.0, 0.0); net.buses.len()];
                d[1] = (60.0, 25.0);
                d
            },
        );
        assert!(sol.converged);
        let oracle = two_bus_analytic(0.02, 0.12, 60.0, 25.0, 100.0);
        let v2 = sol.voltage(1);
        assert!(
            (v2.re - oracle.re).abs() < 1e-8 && (v2.im - oracle.im).abs() < 1e-8,
            "NR {v2} vs analytic {oracle}"
        );
    }

    #[test]
    fn zero_injection_flat_profile_in_two_iterations() {
        let (_, _, sol) = solve_case(
            "CASE flat 100\n\
             BUS 1 1 230 SLACK 1.0\n\
             BUS 2 1 230 PQ 1.0\n\
             BUS 3 1 230 PQ 1.0\n\
             BRANCH 1 2 1 0.01 0.1 0.0 100 120 0\n\
             BRANCH 2 3 1 0.01 0.1 0.0 100 120 0\n\
             GEN 1 0 100 -50 50 0 U1\n",
            |net| vec![(0.0, 0.0); net.buses.len()],
        );
        assert!(sol.converged);
        assert!(sol.iterations <= 2);
        for i in 0..3 {
            assert!((sol.vm[i] - 1.0).abs() < 1e-9);
            assert!(sol.va[i].abs() < 1e-9);
        }
    }

    #[test]
    fn power_balance_identity_holds() {
        let (net, islands, sol) = solve_case(
            "CASE mesh 100\n\
             BUS 1 1 230 SLACK 1.02\n\
             BUS 2 1 230 PV 1.01\n\
             BUS 3 1 230 PQ 1.0\n\
             BUS 4 1 230 PQ 1.0\n\
             BRANCH 1 3 1 0.01 0.08 0.02 300 360 0\n\
             BRANCH 2 4 1 0.012 0.09 0.02 300 360 0\n\
             BRANCH 3 4 1 0.008 0.06 0.01 300 360 0\n\
             BRANCH 1 4 1 0.02 0.15 0.03 300 360 0\n\
             GEN 1 0 400 -200 300 0 U1\n\
             GEN 2 0 300 -200 300 150 U1\n\
             LOAD 3 180 40\n\
             LOAD 4 120 30\n",
            |net| {
                let mut d = vec![(0.0, 0.0); net.buses.len()];
                d[2] = (180.0, 40.0);
                d[3] = (120.0, 30.0);
                d
            },
        );
        assert!(sol.converged);
        // total generation = served load + losses
        let slack_p: f64 = sol.slack_p_mw.iter().map(|(_, p)| p).sum();
        let pv_p = 150.0;
        let total_load = 300.0;
        let imbalance = slack_p + pv_p - total_load - sol.losses_mw;
        assert!(
            imbalance.abs() / net.base_mva < 1e-6,
            "imbalance {imbalance} MW"
        );
        let _ = islands;
    }

    #[test]
    fn reports_missing_slack_as_error() {
        // an energized island always gets a slack from topology processing,
        // so force the error by clearing it
        let net = parse_case::<f64>(
            "CASE ns 100\n\
             BUS 1 1 230 SLACK 1.0\n\
             GEN 1 0 100 -50 50 0 U1\n",
        )
        .unwrap();
        let mut islands = connected_islands(&net, &OperatingState::intact(&net));
        islands.islands[0].slack_bus = None;
        let err = run_power_flow(
            &net,
            &islands,
            &[(0.0, 0.0)],
            &[0.0],
            None,
            &PowerFlowOptions::default(),
        )
        .unwrap_err();
        assert_eq!(err, PowerFlowError::NoSlack { island: 0 });
    }

    #[test]
    fn f32_instantiation_solves_small_case() {
        let net = parse_case::<f32>(
            "CASE f32 100\n\
             BUS 1 1 230 SLACK 1.0\n\
             BUS 2 1 230 PQ 1.0\n\
             BRANCH 1 2 1 0.02 0.12 0.0 200 240 0\n\
             GEN 1 0 500 -900 900 60 U1\n\
             LOAD 2 60 25\n",
        )
        .unwrap();
        let islands = connected_islands(&net, &OperatingState::intact(&net));
        let mut demand = vec![(0.0f32, 0.0f32); 2];
        demand[1] = (60.0, 25.0);
        let sol = run_power_flow(
            &net,
            &islands,
            &demand,
            &[60.0f32],
            None,
            &PowerFlowOptions {
                tolerance: 1e-4,
                max_iterations: 20,
            },
        )
        .unwrap();
        assert!(sol.converged);
        assert!(sol.vm[1] < 1.0 && sol.vm[1] > 0.8);
    }
}
