//! Island detection and status propagation.
//!
//! An island is a maximal set of buses connected through branches that are
//! not forced out of service. Islands without an online generator are dead:
//! their loads are shed completely, their generators marked
//! offline-islanded, and every branch inside them de-energized.

use super::{GenStatus, Network, OperStatus};
use crate::scalar::Scalar;

/// Forced outage flags layered over an immutable [`Network`].
///
/// `branch_damaged` tracks windstorm damage (infrastructure), `branch_forced_out`
/// any reason a branch cannot carry power (damage or a protection trip), and
/// `gen_forced_off` generators tripped by protection or corrective action.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingState {
    pub branch_damaged: Vec<bool>,
    pub branch_forced_out: Vec<bool>,
    pub gen_forced_off: Vec<bool>,
}

impl OperatingState {
    pub fn intact<T: Scalar>(net: &Network<T>) -> Self {
        Self {
            branch_damaged: vec![false; net.branches.len()],
            branch_forced_out: vec![false; net.branches.len()],
            gen_forced_off: vec![false; net.generators.len()],
        }
    }

    pub fn damage_branch(&mut self, idx: usize) {
        self.branch_damaged[idx] = true;
        self.branch_forced_out[idx] = true;
    }

    pub fn repair_branch(&mut self, idx: usize) {
        self.branch_damaged[idx] = false;
        self.branch_forced_out[idx] = false;
    }
}

#[derive(Debug, Clone)]
pub struct Island {
    pub id: usize,
    /// Bus indices belonging to this island, ascending.
    pub buses: Vec<usize>,
    /// An island with no online generator is dead.
    pub energized: bool,
    /// Bus index of the angle-reference bus: the bus with the largest online
    /// generating capacity (lowest bus id on ties). `None` for dead islands.
    pub slack_bus: Option<usize>,
}

/// Partition of the network into islands plus the per-asset effective
/// statuses that follow from it.
#[derive(Debug, Clone)]
pub struct IslandSet {
    pub islands: Vec<Island>,
    /// Island id per bus index.
    pub island_of_bus: Vec<usize>,
    /// True where the branch is energized: not forced out and inside an
    /// energized island.
    pub branch_in_service: Vec<bool>,
    pub gen_status: Vec<GenStatus>,
    /// Served fraction cap per load: 0 on dead islands, 1 elsewhere.
    pub load_energized: Vec<bool>,
}

impl IslandSet {
    pub fn energized_islands(&self) -> impl Iterator<Item = &Island> {
        self.islands.iter().filter(|i| i.energized)
    }

    pub fn oper_status(&self, branch_idx: usize) -> OperStatus {
        if self.branch_in_service[branch_idx] {
            OperStatus::InService
        } else {
            OperStatus::OutOfService
        }
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // anchor to the smaller root so island numbering is stable
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Partition buses by in-service branch connectivity and derive effective
/// statuses. Island ids are assigned in ascending order of their lowest bus
/// index, so the result is independent of branch ordering.
pub fn connected_islands<T: Scalar>(net: &Network<T>, state: &OperatingState) -> IslandSet {
    let n = net.buses.len();
    let mut uf = UnionFind::new(n);
    for (bi, br) in net.branches.iter().enumerate() {
        if !state.branch_forced_out[bi] {
            let (f, t) = br.ends(net);
            uf.union(f, t);
        }
    }

    // stable island numbering keyed by lowest member bus index
    let mut root_to_island: Vec<Option<usize>> = vec![None; n];
    let mut islands: Vec<Island> = Vec::new();
    let mut island_of_bus = vec![0usize; n];
    for bus in 0..n {
        let root = uf.find(bus);
        let id = *root_to_island[root].get_or_insert_with(|| {
            islands.push(Island {
                id: islands.len(),
                buses: Vec::new(),
                energized: false,
                slack_bus: None,
            });
            islands.len() - 1
        });
        islands[id].buses.push(bus);
        island_of_bus[bus] = id;
    }

    // energization: an island lives if it has a generator that is not
    // forced off
    for (gi, g) in net.generators.iter().enumerate() {
        if !state.gen_forced_off[gi] {
            let b = net.bus_index(g.bus).expect("resolved gen bus");
            islands[island_of_bus[b]].energized = true;
        }
    }

    // slack selection: largest online generating capacity, lowest bus id on ties
    for island in islands.iter_mut().filter(|i| i.energized) {
        let mut best: Option<(T, u32, usize)> = None;
        for &b in &island.buses {
            let cap: T = net
                .gens_at(b)
                .into_iter()
                .filter(|&gi| !state.gen_forced_off[gi])
                .map(|gi| net.generators[gi].p_max)
                .sum();
            if cap > T::zero() || !net.gens_at(b).is_empty() {
                let online_here = net
                    .gens_at(b)
                    .into_iter()
                    .any(|gi| !state.gen_forced_off[gi]);
                if !online_here {
                    continue;
                }
                let key = (cap, net.buses[b].id.0, b);
                best = match best {
                    None => Some(key),
                    Some(cur) => {
                        if key.0 > cur.0 || (key.0 == cur.0 && key.1 < cur.1) {
                            Some(key)
                        } else {
                            Some(cur)
                        }
                    }
                };
            }
        }
        island.slack_bus = best.map(|(_, _, b)| b);
    }

    let branch_in_service: Vec<bool> = net
        .branches
        .iter()
        .enumerate()
        .map(|(bi, br)| {
            let (f, _) = br.ends(net);
            !state.branch_forced_out[bi] && islands[island_of_bus[f]].energized
        })
        .collect();

    let gen_status: Vec<GenStatus> = net
        .generators
        .iter()
        .enumerate()
        .map(|(gi, g)| {
            if state.gen_forced_off[gi] {
                GenStatus::OfflineTripped
            } else {
                let b = net.bus_index(g.bus).expect("resolved gen bus");
                if islands[island_of_bus[b]].energized {
                    GenStatus::Online
                } else {
                    GenStatus::OfflineIslanded
                }
            }
        })
        .collect();

    let load_energized: Vec<bool> = net
        .loads
        .iter()
        .map(|l| {
            let b = net.bus_index(l.bus).expect("resolved load bus");
            islands[island_of_bus[b]].energized
        })
        .collect();

    IslandSet {
        islands,
        island_of_bus,
        branch_in_service,
        gen_status,
        load_energized,
    }
}
