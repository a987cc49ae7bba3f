//! Balanced transportation problems.
//!
//! [`solve_exact`] is a primal network simplex on the complete bipartite
//! graph with integer supplies, so flows are exact and only the objective
//! carries rounding. [`solve_entropic`] is a log-domain Sinkhorn iteration
//! for supports too large for the exact solver.

use crate::error::{Error, Result};

/// An optimal (or, for the entropic solver, approximate) coupling.
#[derive(Clone, Debug, PartialEq)]
pub struct Transport {
    /// Minimal `Σ flow·cost / Σ supply`.
    pub cost: f64,
    /// Nonzero flows as `(source, sink, amount)`, ordered by `(source, sink)`.
    pub flows: Vec<(usize, usize, f64)>,
    pub pivots: usize,
}

const STATE_UPPER: i8 = -1;
const STATE_TREE: i8 = 0;
const STATE_LOWER: i8 = 1;
const DIR_UP: i64 = 1;
const DIR_DOWN: i64 = -1;

/// Spanning-tree network simplex with block-search pivoting.
///
/// Nodes `0..m` are sources, `m..m+n` sinks and `m+n` the artificial
/// root. Arcs `0..m·n` are the real source→sink arcs; the rest join each
/// node to the root and start as the basis.
struct NetworkSimplex {
    node_num: usize,
    arc_num: usize,
    source: Vec<usize>,
    target: Vec<usize>,
    cost: Vec<f64>,
    flow: Vec<i64>,
    state: Vec<i8>,
    pi: Vec<f64>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    pred_dir: Vec<i64>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    dirty_revs: Vec<usize>,
    root: usize,
    // pivot scratch
    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: i64,
    next_arc: usize,
    block_size: usize,
    tolerance: f64,
}

const NONE: usize = usize::MAX;

impl NetworkSimplex {
    fn new(supply: &[i64], demand: &[i64], cost: &dyn Fn(usize, usize) -> f64) -> Self {
        let (m, n) = (supply.len(), demand.len());
        let node_num = m + n;
        let arc_num = m * n;
        let all = arc_num + node_num;
        let mut s = Self {
            node_num,
            arc_num,
            source: vec![0; all],
            target: vec![0; all],
            cost: vec![0.0; all],
            flow: vec![0; all],
            state: vec![STATE_LOWER; all],
            pi: vec![0.0; node_num + 1],
            parent: vec![NONE; node_num + 1],
            pred: vec![NONE; node_num + 1],
            pred_dir: vec![0; node_num + 1],
            thread: vec![0; node_num + 1],
            rev_thread: vec![0; node_num + 1],
            succ_num: vec![0; node_num + 1],
            last_succ: vec![0; node_num + 1],
            dirty_revs: Vec::new(),
            root: node_num,
            in_arc: 0,
            join: 0,
            u_in: 0,
            v_in: 0,
            u_out: 0,
            delta: 0,
            next_arc: 0,
            block_size: ((arc_num as f64).sqrt() as usize).max(10),
            tolerance: 0.0,
        };
        let mut max_cost = 0.0f64;
        for i in 0..m {
            for j in 0..n {
                let e = i * n + j;
                s.source[e] = i;
                s.target[e] = m + j;
                s.cost[e] = cost(i, j);
                max_cost = max_cost.max(s.cost[e].abs());
            }
        }
        let art_cost = (max_cost + 1.0) * (node_num as f64 + 1.0);
        s.tolerance = 64.0 * f64::EPSILON * art_cost;

        let root = s.root;
        s.parent[root] = NONE;
        s.pred[root] = NONE;
        s.thread[root] = 0;
        s.rev_thread[0] = root;
        s.succ_num[root] = node_num + 1;
        s.last_succ[root] = root - 1;
        for u in 0..node_num {
            let e = arc_num + u;
            s.parent[u] = root;
            s.pred[u] = e;
            s.thread[u] = u + 1;
            s.rev_thread[u + 1] = u;
            s.succ_num[u] = 1;
            s.last_succ[u] = u;
            s.state[e] = STATE_TREE;
            let sup = if u < m { supply[u] } else { -demand[u - m] };
            if sup >= 0 {
                s.pred_dir[u] = DIR_UP;
                s.pi[u] = 0.0;
                s.source[e] = u;
                s.target[e] = root;
                s.flow[e] = sup;
                s.cost[e] = 0.0;
            } else {
                s.pred_dir[u] = DIR_DOWN;
                s.pi[u] = art_cost;
                s.source[e] = root;
                s.target[e] = u;
                s.flow[e] = -sup;
                s.cost[e] = art_cost;
            }
        }
        s
    }

    fn reduced(&self, e: usize) -> f64 {
        self.state[e] as f64 * (self.cost[e] + self.pi[self.source[e]] - self.pi[self.target[e]])
    }

    fn find_entering_arc(&mut self) -> bool {
        let mut min = -self.tolerance;
        let mut found = false;
        let mut cnt = self.block_size;
        let order = (self.next_arc..self.arc_num).chain(0..self.next_arc);
        let mut stop = None;
        for e in order {
            let c = self.reduced(e);
            if c < min {
                min = c;
                self.in_arc = e;
                found = true;
            }
            cnt -= 1;
            if cnt == 0 {
                if found {
                    stop = Some(e + 1);
                    break;
                }
                cnt = self.block_size;
            }
        }
        if !found {
            return false;
        }
        self.next_arc = stop.unwrap_or(self.in_arc + 1) % self.arc_num.max(1);
        true
    }

    fn find_join_node(&mut self) {
        let mut u = self.source[self.in_arc];
        let mut v = self.target[self.in_arc];
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        self.join = u;
    }

    /// Returns false when the cycle is unbounded (cannot happen with
    /// nonnegative costs and a feasible problem).
    fn find_leaving_arc(&mut self) -> bool {
        let e_in = self.in_arc;
        let (first, second) = if self.state[e_in] == STATE_LOWER {
            (self.source[e_in], self.target[e_in])
        } else {
            (self.target[e_in], self.source[e_in])
        };
        self.delta = i64::MAX;
        let mut result = 0;
        let mut u = first;
        while u != self.join {
            // only arcs pointing up against the cycle direction can block
            if self.pred_dir[u] == DIR_UP {
                let d = self.flow[self.pred[u]];
                if d < self.delta {
                    self.delta = d;
                    self.u_out = u;
                    result = 1;
                }
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != self.join {
            if self.pred_dir[u] == DIR_DOWN {
                let d = self.flow[self.pred[u]];
                if d <= self.delta {
                    self.delta = d;
                    self.u_out = u;
                    result = 2;
                }
            }
            u = self.parent[u];
        }
        if result == 1 {
            self.u_in = first;
            self.v_in = second;
        } else {
            self.u_in = second;
            self.v_in = first;
        }
        result != 0
    }

    fn change_flow(&mut self) {
        let e_in = self.in_arc;
        if self.delta > 0 {
            let val = self.state[e_in] as i64 * self.delta;
            self.flow[e_in] += val;
            let mut u = self.source[e_in];
            while u != self.join {
                self.flow[self.pred[u]] -= self.pred_dir[u] * val;
                u = self.parent[u];
            }
            let mut u = self.target[e_in];
            while u != self.join {
                self.flow[self.pred[u]] += self.pred_dir[u] * val;
                u = self.parent[u];
            }
        }
        self.state[e_in] = STATE_TREE;
        let out = self.pred[self.u_out];
        self.state[out] = if self.flow[out] == 0 { STATE_LOWER } else { STATE_UPPER };
    }

    fn update_tree_structure(&mut self) {
        let (u_in, v_in, u_out) = (self.u_in, self.v_in, self.u_out);
        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        let v_out = self.parent[u_out];

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred[u_in] = self.in_arc;
            self.pred_dir[u_in] = if u_in == self.source[self.in_arc] { DIR_UP } else { DIR_DOWN };
            if self.thread[v_in] != u_out {
                let mut after = self.thread[old_last_succ];
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
                after = self.thread[v_in];
                self.thread[v_in] = u_out;
                self.rev_thread[u_out] = v_in;
                self.thread[old_last_succ] = after;
                self.rev_thread[after] = old_last_succ;
            }
        } else {
            let thread_continue = if old_rev_thread == v_in {
                self.thread[old_last_succ]
            } else {
                self.thread[v_in]
            };
            let mut stem = u_in;
            let mut par_stem = v_in;
            let mut last = self.last_succ[u_in];
            let mut after = self.thread[last];
            self.thread[v_in] = u_in;
            self.dirty_revs.clear();
            self.dirty_revs.push(v_in);
            while stem != u_out {
                let next_stem = self.parent[stem];
                self.thread[last] = next_stem;
                self.dirty_revs.push(last);

                let before = self.rev_thread[stem];
                self.thread[before] = after;
                self.rev_thread[after] = before;

                self.parent[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;

                last = if self.last_succ[stem] == self.last_succ[par_stem] {
                    self.rev_thread[par_stem]
                } else {
                    self.last_succ[stem]
                };
                after = self.thread[last];
            }
            self.parent[u_out] = par_stem;
            self.thread[last] = thread_continue;
            self.rev_thread[thread_continue] = last;
            self.last_succ[u_out] = last;

            if old_rev_thread != v_in {
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
            }
            for i in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[i];
                let t = self.thread[u];
                self.rev_thread[t] = u;
            }

            let mut tmp_sc = 0usize;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            while u != u_in {
                let p = self.parent[u];
                self.pred[u] = self.pred[p];
                self.pred_dir[u] = -self.pred_dir[p];
                tmp_sc = tmp_sc + self.succ_num[u] - self.succ_num[p];
                self.succ_num[u] = tmp_sc;
                self.last_succ[p] = tmp_ls;
                u = p;
            }
            self.pred[u_in] = self.in_arc;
            self.pred_dir[u_in] = if u_in == self.source[self.in_arc] { DIR_UP } else { DIR_DOWN };
            self.succ_num[u_in] = old_succ_num;
        }

        let up_limit_out = if self.last_succ[self.join] == v_in { self.join } else { NONE };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in;
        while u != NONE && self.last_succ[u] == v_in {
            self.last_succ[u] = last_succ_out;
            u = self.parent[u];
        }

        if self.join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = old_rev_thread;
                u = self.parent[u];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = last_succ_out;
                u = self.parent[u];
            }
        }

        let mut u = v_in;
        while u != self.join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u];
        }
        let mut u = v_out;
        while u != self.join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u];
        }
    }

    fn update_potential(&mut self) {
        let c = self.cost[self.in_arc];
        let sigma = self.pi[self.v_in] - self.pi[self.u_in] - self.pred_dir[self.u_in] as f64 * c;
        let end = self.thread[self.last_succ[self.u_in]];
        let mut u = self.u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }

    fn run(&mut self, max_pivots: usize) -> Result<usize> {
        let mut pivots = 0;
        if self.arc_num == 0 {
            return Ok(0);
        }
        while self.find_entering_arc() {
            self.find_join_node();
            if !self.find_leaving_arc() {
                return Err(Error::Solver("transport problem is unbounded".into()));
            }
            self.change_flow();
            self.update_tree_structure();
            self.update_potential();
            pivots += 1;
            if pivots > max_pivots {
                return Err(Error::Solver(format!(
                    "network simplex did not converge within {max_pivots} pivots"
                )));
            }
        }
        if (self.arc_num..self.arc_num + self.node_num).any(|e| self.flow[e] != 0) {
            return Err(Error::Solver("transport problem is infeasible".into()));
        }
        Ok(pivots)
    }
}

/// Exact balanced transport between integer `supply` and `demand`
/// (equal totals) with ground cost `cost(i, j) ≥ 0`.
pub fn solve_exact(supply: &[u64], demand: &[u64], cost: impl Fn(usize, usize) -> f64) -> Result<Transport> {
    let total: u64 = supply.iter().sum();
    if total != demand.iter().sum::<u64>() {
        return Err(Error::Domain("supply and demand totals differ".into()));
    }
    if total == 0 {
        return Err(Error::Domain("empty transport problem".into()));
    }
    if total > i64::MAX as u64 / 4 {
        return Err(Error::Domain("transport masses too large for exact integer flows".into()));
    }
    let sup: Vec<i64> = supply.iter().map(|&s| s as i64).collect();
    let dem: Vec<i64> = demand.iter().map(|&d| d as i64).collect();
    let (m, n) = (sup.len(), dem.len());
    for i in 0..m {
        for j in 0..n {
            let c = cost(i, j);
            if !(c.is_finite() && c >= 0.0) {
                return Err(Error::Domain(format!(
                    "ground cost ({i}, {j}) = {c} is not a finite non-negative number"
                )));
            }
        }
    }
    let mut ns = NetworkSimplex::new(&sup, &dem, &cost);
    let max_pivots = 200 * (m * n + m + n) + 10_000;
    let pivots = ns.run(max_pivots)?;
    let mut objective = 0.0;
    let mut flows = Vec::new();
    for e in 0..ns.arc_num {
        if ns.flow[e] != 0 {
            objective += ns.flow[e] as f64 * ns.cost[e];
            flows.push((e / n, e % n, ns.flow[e] as f64));
        }
    }
    Ok(Transport {
        cost: objective / total as f64,
        flows,
        pivots,
    })
}

/// Entropy-regularized transport between probability vectors `a`, `b`.
///
/// Runs log-domain Sinkhorn until both marginals are within `tol` (L1),
/// computing costs on the fly so memory stays linear in the supports.
/// Epsilon is annealed down from the largest cost, warm-starting the
/// potentials at each stage; `max_iter` bounds each stage.
pub fn solve_entropic(
    a: &[f64],
    b: &[f64],
    cost: impl Fn(usize, usize) -> f64,
    epsilon: f64,
    max_iter: usize,
    tol: f64,
) -> Result<Transport> {
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!("entropic epsilon must be positive, got {epsilon}")));
    }
    let (m, n) = (a.len(), b.len());
    let la: Vec<f64> = a.iter().map(|x| x.ln()).collect();
    let lb: Vec<f64> = b.iter().map(|x| x.ln()).collect();
    let mut f = vec![0.0; m];
    let mut g = vec![0.0; n];
    let lse = |vals: &mut dyn Iterator<Item = f64>| -> f64 {
        let v: Vec<f64> = vals.collect();
        let mx = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        mx + v.iter().map(|x| (x - mx).exp()).sum::<f64>().ln()
    };
    let max_cost = (0..m)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| cost(i, j))
        .fold(0.0, f64::max);
    let mut eps = max_cost.max(epsilon);
    loop {
        let last = eps <= epsilon;
        // intermediate stages only need a rough warm start
        let stage_tol = if last { tol } else { tol.max(1e-3) };
        let mut converged = false;
        for _ in 0..max_iter {
            for i in 0..m {
                f[i] = eps * la[i] - eps * lse(&mut (0..n).map(|j| (g[j] - cost(i, j)) / eps));
            }
            for j in 0..n {
                g[j] = eps * lb[j] - eps * lse(&mut (0..m).map(|i| (f[i] - cost(i, j)) / eps));
            }
            // after the g update column marginals are exact; check rows
            let err: f64 = (0..m)
                .map(|i| {
                    let r: f64 = (0..n).map(|j| ((f[i] + g[j] - cost(i, j)) / eps).exp()).sum();
                    (r - a[i]).abs()
                })
                .sum();
            if err < stage_tol {
                converged = true;
                break;
            }
        }
        if last {
            if !converged {
                return Err(Error::Solver(format!(
                    "Sinkhorn did not reach tolerance {tol} in {max_iter} iterations"
                )));
            }
            break;
        }
        eps = (eps * 0.5).max(epsilon);
    }
    let epsilon = eps;
    let mut objective = 0.0;
    let mut flows = Vec::new();
    for i in 0..m {
        for j in 0..n {
            let p = ((f[i] + g[j] - cost(i, j)) / epsilon).exp();
            if p > 0.0 {
                objective += p * cost(i, j);
                flows.push((i, j, p));
            }
        }
    }
    Ok(Transport {
        cost: objective,
        flows,
        pivots: 0,
    })
}
