//! Successive shortest paths on the layered assignment network.
//!
//! ```text
//! source ──(1, 0)──▶ sample i ──(1, -U[i,k])──▶ category k ══▶ sink
//! ```
//!
//! Each category reaches the sink through `n` parallel unit arcs costing
//! `2λ'(j - 1)` for `j = 1..n`, so sending `n_k` units costs exactly
//! `λ' n_k (n_k - 1)`. Because those costs are non-decreasing, the cheapest
//! parallel arcs are always used first and the convex penalty is exact.

use super::{Assignment, AssignmentInstance};
use crate::Result;

#[derive(Clone, Debug)]
struct Arc {
    to: usize,
    rev: usize,
    cap: i64,
    cost: f64,
}

/// Residual network plus node potentials after a solve.
#[derive(Clone, Debug)]
pub struct FlowNetwork {
    adj: Vec<Vec<Arc>>,
    potential: Vec<f64>,
    /// Original capacity per (node, arc index); 0 for reverse arcs.
    capacity: Vec<Vec<i64>>,
    n: usize,
    s: usize,
}

impl FlowNetwork {
    fn source(&self) -> usize {
        0
    }

    fn sink(&self) -> usize {
        self.n + self.s + 1
    }

    fn sample(i: usize) -> usize {
        1 + i
    }

    fn category(&self, k: usize) -> usize {
        1 + self.n + k
    }

    fn build(inst: &AssignmentInstance) -> Self {
        let (n, s) = (inst.n(), inst.categories());
        let nodes = n + s + 2;
        let mut net = FlowNetwork {
            adj: vec![Vec::new(); nodes],
            potential: vec![0.0; nodes],
            capacity: vec![Vec::new(); nodes],
            n,
            s,
        };
        let u = inst.utilities();
        for i in 0..n {
            net.add_arc(net.source(), Self::sample(i), 1, 0.0);
        }
        for i in 0..n {
            for k in 0..s {
                let cat = net.category(k);
                net.add_arc(Self::sample(i), cat, 1, -u.get(i, k));
            }
        }
        let step = 2.0 * inst.lambda_prime();
        for k in 0..s {
            let cat = net.category(k);
            for j in 0..n {
                net.add_arc(cat, net.sink(), 1, step * j as f64);
            }
        }
        net
    }

    fn add_arc(&mut self, from: usize, to: usize, cap: i64, cost: f64) {
        let fwd = self.adj[from].len();
        let back = self.adj[to].len() + usize::from(from == to);
        self.adj[from].push(Arc { to, rev: back, cap, cost });
        self.capacity[from].push(cap);
        self.adj[to].push(Arc { to: from, rev: fwd, cap: 0, cost: -cost });
        self.capacity[to].push(0);
    }

    /// Exact shortest distances from the source over the acyclic pre-flow
    /// graph, layer by layer.
    fn init_potentials(&mut self) {
        let mut dist = vec![f64::INFINITY; self.adj.len()];
        dist[self.source()] = 0.0;
        let layers: Vec<Vec<usize>> = vec![
            vec![self.source()],
            (0..self.n).map(Self::sample).collect(),
            (0..self.s).map(|k| self.category(k)).collect(),
        ];
        for layer in layers {
            for u in layer {
                for arc in &self.adj[u] {
                    if arc.cap > 0 {
                        let cand = dist[u] + arc.cost;
                        if cand < dist[arc.to] {
                            dist[arc.to] = cand;
                        }
                    }
                }
            }
        }
        self.potential = dist;
    }

    /// Dijkstra on reduced costs. Returns distances and the predecessor
    /// `(node, arc index)` of every reached node. Dense O(V²) scan; V is tiny.
    fn shortest_paths(&self) -> (Vec<f64>, Vec<Option<(usize, usize)>>) {
        let v = self.adj.len();
        let mut dist = vec![f64::INFINITY; v];
        let mut prev = vec![None; v];
        let mut done = vec![false; v];
        dist[self.source()] = 0.0;
        loop {
            let mut u = None;
            for node in 0..v {
                if !done[node] && dist[node].is_finite() && u.map_or(true, |b: usize| dist[node] < dist[b]) {
                    u = Some(node);
                }
            }
            let Some(u) = u else { break };
            done[u] = true;
            for (idx, arc) in self.adj[u].iter().enumerate() {
                if arc.cap <= 0 || done[arc.to] {
                    continue;
                }
                // Rounding can leave reduced costs a hair below zero.
                let reduced = (arc.cost + self.potential[u] - self.potential[arc.to]).max(0.0);
                let cand = dist[u] + reduced;
                if cand < dist[arc.to] {
                    dist[arc.to] = cand;
                    prev[arc.to] = Some((u, idx));
                }
            }
        }
        (dist, prev)
    }

    fn push_unit(&mut self) -> bool {
        let (dist, prev) = self.shortest_paths();
        let t = self.sink();
        if !dist[t].is_finite() {
            return false;
        }
        let dt = dist[t];
        for (p, d) in self.potential.iter_mut().zip(&dist) {
            *p += d.min(dt);
        }
        let mut node = t;
        while let Some((u, idx)) = prev[node] {
            let rev = self.adj[u][idx].rev;
            self.adj[u][idx].cap -= 1;
            self.adj[node][rev].cap += 1;
            node = u;
        }
        true
    }

    fn flow(&self, u: usize, idx: usize) -> i64 {
        self.capacity[u][idx] - self.adj[u][idx].cap
    }

    /// Category receiving each sample's unit of flow.
    fn labels(&self) -> Vec<usize> {
        (0..self.n)
            .map(|i| {
                let node = Self::sample(i);
                self.adj[node]
                    .iter()
                    .enumerate()
                    .find(|(idx, _)| self.capacity[node][*idx] > 0 && self.flow(node, *idx) > 0)
                    .map(|(_, arc)| arc.to - 1 - self.n)
                    .expect("every sample carries one unit")
            })
            .collect()
    }

    /// Smallest reduced cost over arcs with residual capacity. Non-negative
    /// (up to rounding) certifies optimality of the current flow.
    pub fn min_residual_reduced_cost(&self) -> f64 {
        let mut worst = f64::INFINITY;
        for (u, arcs) in self.adj.iter().enumerate() {
            for arc in arcs {
                if arc.cap > 0 {
                    worst = worst.min(arc.cost + self.potential[u] - self.potential[arc.to]);
                }
            }
        }
        worst
    }

    /// Flow conservation at interior nodes and `0 <= flow <= capacity`.
    pub fn is_feasible(&self) -> bool {
        let mut balance = vec![0i64; self.adj.len()];
        for (u, arcs) in self.adj.iter().enumerate() {
            for (idx, arc) in arcs.iter().enumerate() {
                let cap = self.capacity[u][idx];
                if cap == 0 {
                    continue;
                }
                let f = self.flow(u, idx);
                if f < 0 || f > cap {
                    return false;
                }
                balance[u] -= f;
                balance[arc.to] += f;
            }
        }
        let (src, sink) = (self.source(), self.sink());
        balance
            .iter()
            .enumerate()
            .all(|(v, &b)| v == src || v == sink || b == 0)
            && balance[sink] == self.n as i64
    }
}

/// Min-cost-flow solve; the objective is reported in the maximization
/// convention, computed from the labels exactly as the brute-force oracle does.
pub fn solve_mcf(inst: &AssignmentInstance) -> Result<Assignment> {
    solve_mcf_with_network(inst).map(|(a, _)| a)
}

/// As [`solve_mcf`], also returning the final residual network.
pub fn solve_mcf_with_network(inst: &AssignmentInstance) -> Result<(Assignment, FlowNetwork)> {
    let mut net = FlowNetwork::build(inst);
    net.init_potentials();
    for _ in 0..inst.n() {
        let pushed = net.push_unit();
        debug_assert!(pushed, "assignment network is always feasible");
    }
    let labels = net.labels();
    let objective = inst.objective(&labels)?;
    Ok((Assignment { labels, objective }, net))
}
