//! Primal network simplex for the balanced transportation problem.
//!
//! Minimizes `sum_{ij} f_ij c(i,j)` subject to `sum_j f_ij = supply_i`,
//! `sum_i f_ij = demand_j`, `f >= 0`. The initial basis is the star of
//! artificial arcs through a root node (so the spanning tree starts shallow
//! and cycle walks stay short), entering arcs are found by block search
//! over reduced costs, and the leaving-arc rule breaks ties on the two
//! cycle halves asymmetrically so degenerate pivots do not cycle in
//! practice. Artificial arcs carry a cost exceeding every real arc cost,
//! which drives their flow to zero at optimality on balanced inputs.
//!
//! Costs are queried through [`CostOracle`] so large instances can compute
//! them on the fly instead of materializing an `m x n` matrix.

use crate::error::{CoreError, Result};

/// Arc cost lookup for source `i` and sink `j`.
pub trait CostOracle {
    fn cost(&self, i: usize, j: usize) -> f64;

    /// Contiguous cost row, when one is materialized. The pricing loop uses
    /// this to avoid per-arc index arithmetic.
    #[inline(always)]
    fn row(&self, _i: usize) -> Option<&[f64]> {
        None
    }
}

/// Materialized cost matrix, row-major.
pub struct DenseCost {
    pub n_cols: usize,
    pub values: Vec<f64>,
}

impl CostOracle for DenseCost {
    #[inline(always)]
    fn cost(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols + j]
    }

    #[inline(always)]
    fn row(&self, i: usize) -> Option<&[f64]> {
        Some(&self.values[i * self.n_cols..(i + 1) * self.n_cols])
    }
}

/// Snowflaked Euclidean cost `|x_i - y_j|^alpha` computed on demand.
pub struct SnowflakeCost<'a> {
    pub dim: usize,
    pub alpha: f64,
    pub source: &'a [f64],
    pub target: &'a [f64],
}

impl CostOracle for SnowflakeCost<'_> {
    #[inline(always)]
    fn cost(&self, i: usize, j: usize) -> f64 {
        let a = &self.source[i * self.dim..(i + 1) * self.dim];
        let b = &self.target[j * self.dim..(j + 1) * self.dim];
        let mut sq = 0.0;
        for k in 0..self.dim {
            let d = a[k] - b[k];
            sq += d * d;
        }
        if self.alpha == 1.0 {
            sq.sqrt()
        } else {
            sq.powf(0.5 * self.alpha)
        }
    }
}

const NONE: u32 = u32::MAX;

/// Solved transportation problem: optimal cost and the basic flows.
pub struct TransportSolution {
    pub cost: f64,
    /// `(source index, sink index, flow)` for every positive basic flow.
    pub flows: Vec<(usize, usize, f64)>,
    /// Simplex pivots performed (diagnostic).
    pub pivots: usize,
}

struct Simplex<'a, C: CostOracle> {
    m: usize,
    n: usize,
    root: usize,
    cost: &'a C,
    big: f64,
    parent: Vec<u32>,
    depth: Vec<u32>,
    pred_flow: Vec<f64>,
    pred_cost: Vec<f64>,
    pred_up: Vec<bool>,
    first_child: Vec<u32>,
    next_sib: Vec<u32>,
    prev_sib: Vec<u32>,
    pi: Vec<f64>,
}

impl<'a, C: CostOracle> Simplex<'a, C> {
    /// Cost of arc id: real arcs are `i * n + j`, then source artificials
    /// `i -> root`, then sink artificials `root -> j`.
    #[inline(always)]
    fn arc_cost(&self, id: usize) -> f64 {
        let real = self.m * self.n;
        if id < real {
            self.cost.cost(id / self.n, id % self.n)
        } else {
            self.big
        }
    }

    /// Endpoints of arc id in node numbering (sources, sinks, root).
    #[inline(always)]
    fn arc_ends(&self, id: usize) -> (u32, u32) {
        let real = self.m * self.n;
        if id < real {
            ((id / self.n) as u32, (self.m + id % self.n) as u32)
        } else if id < real + self.m {
            ((id - real) as u32, self.root as u32)
        } else {
            (self.root as u32, (self.m + (id - real - self.m)) as u32)
        }
    }

    fn detach(&mut self, x: u32) {
        let p = self.prev_sib[x as usize];
        let nx = self.next_sib[x as usize];
        if p != NONE {
            self.next_sib[p as usize] = nx;
        } else {
            self.first_child[self.parent[x as usize] as usize] = nx;
        }
        if nx != NONE {
            self.prev_sib[nx as usize] = p;
        }
        self.prev_sib[x as usize] = NONE;
        self.next_sib[x as usize] = NONE;
    }

    fn attach(&mut self, x: u32, new_parent: u32) {
        let head = self.first_child[new_parent as usize];
        self.next_sib[x as usize] = head;
        if head != NONE {
            self.prev_sib[head as usize] = x;
        }
        self.prev_sib[x as usize] = NONE;
        self.first_child[new_parent as usize] = x;
        self.parent[x as usize] = new_parent;
    }
}

/// Solve the balanced transportation problem between `supply` and `demand`.
///
/// Both vectors must be strictly positive with (approximately) equal totals;
/// the caller is responsible for normalization.
pub fn solve_transport<C: CostOracle>(
    supply: &[f64],
    demand: &[f64],
    cost: &C,
) -> Result<TransportSolution> {
    let m = supply.len();
    let n = demand.len();
    if m == 0 || n == 0 {
        return Err(CoreError::TransportInfeasible("empty marginal".into()));
    }
    let v = m + n + 1;
    let root = m + n;

    let mut cmax = 0.0f64;
    for i in 0..m {
        for j in 0..n {
            let c = cost.cost(i, j);
            if !c.is_finite() {
                return Err(CoreError::TransportInfeasible("non-finite cost".into()));
            }
            if c > cmax {
                cmax = c;
            }
        }
    }
    let eps = 1e-12 * (1.0 + cmax);
    let big = 1.0 + cmax;

    let mut s = Simplex {
        m,
        n,
        root,
        cost,
        big,
        parent: vec![NONE; v],
        depth: vec![0; v],
        pred_flow: vec![0.0; v],
        pred_cost: vec![0.0; v],
        pred_up: vec![false; v],
        first_child: vec![NONE; v],
        next_sib: vec![NONE; v],
        prev_sib: vec![NONE; v],
        pi: vec![0.0; v],
    };

    // Star tree: every source sends its supply to the root, the root sends
    // each sink its demand.
    for i in 0..m {
        s.attach(i as u32, root as u32);
        s.depth[i] = 1;
        s.pred_flow[i] = supply[i];
        s.pred_cost[i] = big;
        s.pred_up[i] = true;
        s.pi[i] = -big;
    }
    for j in 0..n {
        let node = (m + j) as u32;
        s.attach(node, root as u32);
        s.depth[m + j] = 1;
        s.pred_flow[m + j] = demand[j];
        s.pred_cost[m + j] = big;
        s.pred_up[m + j] = false;
        s.pi[m + j] = big;
    }

    let arc_total = m * n + m + n;
    let block = std::cmp::max(64, (arc_total as f64).sqrt() as usize);
    let mut next_arc = 0usize;
    let max_pivots = 2_000_000usize + 400 * v;

    let mut pivot = 0usize;
    loop {
        if pivot > max_pivots {
            return Err(CoreError::TransportInfeasible("pivot limit exceeded".into()));
        }
        pivot += 1;

        // Entering arc: best reduced cost in the first block that has one.
        // Out-of-tree arcs all sit at their lower bound (zero flow). Real
        // arcs are priced in row segments so the hot loop carries no index
        // arithmetic beyond an increment.
        let real_total = m * n;
        let mut best_arc = usize::MAX;
        let mut best_rc = -eps;
        let mut scanned = 0usize;
        let mut id = next_arc;
        let mut budget = block;
        loop {
            if id < real_total {
                let i = id / n;
                let j0 = id % n;
                let seg = (n - j0).min(budget).min(arc_total - scanned);
                let pi_i = s.pi[i];
                let pi_sinks = &s.pi[m..m + n];
                match cost.row(i) {
                    Some(row) => {
                        for (off, (&c, &ps)) in row[j0..j0 + seg]
                            .iter()
                            .zip(&pi_sinks[j0..j0 + seg])
                            .enumerate()
                        {
                            let rc = c + pi_i - ps;
                            if rc < best_rc {
                                best_rc = rc;
                                best_arc = id + off;
                            }
                        }
                    }
                    None => {
                        for off in 0..seg {
                            let j = j0 + off;
                            let rc = cost.cost(i, j) + pi_i - pi_sinks[j];
                            if rc < best_rc {
                                best_rc = rc;
                                best_arc = id + off;
                            }
                        }
                    }
                }
                id += seg;
                scanned += seg;
                budget = budget.saturating_sub(seg);
            } else {
                let seg = (arc_total - id).min(budget).min(arc_total - scanned);
                for off in 0..seg {
                    let aid = id + off;
                    let (a, b) = s.arc_ends(aid);
                    let rc = s.arc_cost(aid) + s.pi[a as usize] - s.pi[b as usize];
                    if rc < best_rc {
                        best_rc = rc;
                        best_arc = aid;
                    }
                }
                id += seg;
                scanned += seg;
                budget = budget.saturating_sub(seg);
            }
            if id == arc_total {
                id = 0;
            }
            if budget == 0 {
                if best_arc != usize::MAX {
                    break;
                }
                budget = block;
            }
            if scanned >= arc_total {
                break;
            }
        }
        next_arc = id;
        if best_arc == usize::MAX {
            break;
        }

        let (eu, ew) = s.arc_ends(best_arc);
        let rc_e = best_rc;
        let c_e = s.arc_cost(best_arc);

        // Apex of the cycle the entering arc closes.
        let mut x = eu;
        let mut y = ew;
        while s.depth[x as usize] > s.depth[y as usize] {
            x = s.parent[x as usize];
        }
        while s.depth[y as usize] > s.depth[x as usize] {
            y = s.parent[y as usize];
        }
        while x != y {
            x = s.parent[x as usize];
            y = s.parent[y as usize];
        }
        let apex = x;

        // Leaving arc: minimum flow among arcs the cycle traverses
        // backwards; ties prefer the ew side.
        let mut delta = f64::INFINITY;
        let mut leave = NONE;
        let mut leave_on_u_side = false;
        let mut x = eu;
        while x != apex {
            if s.pred_up[x as usize] && s.pred_flow[x as usize] < delta {
                delta = s.pred_flow[x as usize];
                leave = x;
                leave_on_u_side = true;
            }
            x = s.parent[x as usize];
        }
        let mut x = ew;
        while x != apex {
            if !s.pred_up[x as usize] && s.pred_flow[x as usize] <= delta {
                delta = s.pred_flow[x as usize];
                leave = x;
                leave_on_u_side = false;
            }
            x = s.parent[x as usize];
        }
        if leave == NONE {
            return Err(CoreError::TransportInfeasible(
                "unbounded pivot in balanced problem".into(),
            ));
        }

        if delta > 0.0 {
            let mut x = eu;
            while x != apex {
                if s.pred_up[x as usize] {
                    s.pred_flow[x as usize] -= delta;
                } else {
                    s.pred_flow[x as usize] += delta;
                }
                x = s.parent[x as usize];
            }
            let mut x = ew;
            while x != apex {
                if s.pred_up[x as usize] {
                    s.pred_flow[x as usize] += delta;
                } else {
                    s.pred_flow[x as usize] -= delta;
                }
                x = s.parent[x as usize];
            }
            s.pred_flow[leave as usize] = 0.0;
        }

        // Re-root the cut subtree at the entering arc's endpoint inside it,
        // then hang it off the other endpoint.
        let (q, r) = if leave_on_u_side { (eu, ew) } else { (ew, eu) };
        let mut chain = vec![q];
        let mut cur = q;
        while cur != leave {
            cur = s.parent[cur as usize];
            chain.push(cur);
        }
        let saved: Vec<(f64, bool, f64)> = chain
            .iter()
            .map(|&x| {
                (
                    s.pred_flow[x as usize],
                    s.pred_up[x as usize],
                    s.pred_cost[x as usize],
                )
            })
            .collect();
        for &x in &chain {
            s.detach(x);
        }
        s.attach(q, r);
        s.pred_cost[q as usize] = c_e;
        s.pred_flow[q as usize] = delta;
        s.pred_up[q as usize] = q == eu;
        for t in 1..chain.len() {
            let node = chain[t];
            let (f, up, c) = saved[t - 1];
            s.attach(node, chain[t - 1]);
            s.pred_flow[node as usize] = f;
            s.pred_up[node as usize] = !up;
            s.pred_cost[node as usize] = c;
        }

        // Shift potentials and recompute depths on the moved subtree.
        let d_pi = if q == eu { -rc_e } else { rc_e };
        let mut stack = vec![q];
        while let Some(x) = stack.pop() {
            s.pi[x as usize] += d_pi;
            s.depth[x as usize] = s.depth[s.parent[x as usize] as usize] + 1;
            let mut ch = s.first_child[x as usize];
            while ch != NONE {
                stack.push(ch);
                ch = s.next_sib[ch as usize];
            }
        }
    }

    // Extract: only real tree arcs may carry flow on a balanced instance.
    let mut total = 0.0;
    let mut flows = Vec::new();
    for x in 0..m + n {
        if s.parent[x] == NONE {
            continue;
        }
        let f = s.pred_flow[x];
        let p = s.parent[x] as usize;
        if p == root || x == root {
            if f > 1e-9 {
                return Err(CoreError::TransportInfeasible(
                    "artificial arc kept positive flow; marginals unbalanced".into(),
                ));
            }
            continue;
        }
        total += f * s.pred_cost[x];
        if f > 0.0 {
            let (si, sj) = if x >= m { (p, x - m) } else { (x, p - m) };
            flows.push((si, sj, f));
        }
    }
    flows.sort_unstable_by_key(|&(i, j, _)| (i, j));
    Ok(TransportSolution {
        cost: total,
        flows,
        pivots: pivot,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(n_cols: usize, values: Vec<f64>) -> DenseCost {
        DenseCost { n_cols, values }
    }

    #[test]
    fn single_arc() {
        let sol = solve_transport(&[1.0], &[1.0], &dense(1, vec![3.5])).unwrap();
        assert!((sol.cost - 3.5).abs() < 1e-15);
        assert_eq!(sol.flows, vec![(0, 0, 1.0)]);
    }

    #[test]
    fn two_by_two_prefers_cheap_matching() {
        // Identity matching costs 2, cross matching costs 2*sqrt(2).
        let c = dense(2, vec![1.0, 2f64.sqrt(), 2f64.sqrt(), 1.0]);
        let sol = solve_transport(&[0.5, 0.5], &[0.5, 0.5], &c).unwrap();
        assert!((sol.cost - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rectangular_with_uneven_weights() {
        let c = dense(3, vec![0.0, 1.0, 2.0, 2.0, 1.0, 0.0]);
        let sol = solve_transport(&[0.7, 0.3], &[0.3, 0.3, 0.4], &c).unwrap();
        // Source 0 serves sinks 0 and 1 (cost 0.3*0 + 0.3*1), source 1 serves
        // sink 2 (0.3*0), leaving 0.1 of source 0 to sink 2 at cost 2.
        assert!((sol.cost - 0.5).abs() < 1e-12);
        let row0: f64 = sol
            .flows
            .iter()
            .filter(|&&(i, _, _)| i == 0)
            .map(|&(_, _, f)| f)
            .sum();
        assert!((row0 - 0.7).abs() < 1e-12);
    }

    #[test]
    fn marginals_always_match() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let m = rng.gen_range(1..9);
            let n = rng.gen_range(1..9);
            let mut supply: Vec<f64> = (0..m).map(|_| rng.gen_range(0.05..1.0)).collect();
            let mut demand: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
            let sa: f64 = supply.iter().sum();
            let sb: f64 = demand.iter().sum();
            supply.iter_mut().for_each(|w| *w /= sa);
            demand.iter_mut().for_each(|w| *w /= sb);
            let costs: Vec<f64> = (0..m * n).map(|_| rng.gen_range(0.0..5.0)).collect();
            let sol = solve_transport(&supply, &demand, &dense(n, costs)).unwrap();
            let mut rows = vec![0.0; m];
            let mut cols = vec![0.0; n];
            for &(i, j, f) in &sol.flows {
                assert!(f > 0.0);
                rows[i] += f;
                cols[j] += f;
            }
            for i in 0..m {
                assert!((rows[i] - supply[i]).abs() < 1e-10);
            }
            for j in 0..n {
                assert!((cols[j] - demand[j]).abs() < 1e-10);
            }
        }
    }
}
