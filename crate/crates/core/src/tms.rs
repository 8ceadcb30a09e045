//! Finite topological-Markov-shift toolkit: strongly connected components
//! carrying two-sided paths, period and cyclic classes, entropy as the log
//! spectral radius, the entropy-maximizing Markov chain from the Perron
//! eigenvectors, and nested-subgraph entropy ladders.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TmsError {
    #[error("edge ({0}, {1}) out of range for {2} vertices")]
    EdgeOutOfRange(usize, usize, usize),
    #[error("vertex set is not a component of this graph")]
    NotAComponent,
    #[error("power iteration did not converge")]
    NonConvergence,
    #[error("graph carries no two-sided paths (no cycle-supported component)")]
    EmptyShift,
    #[error("ladder level {0} does not contain level {1}")]
    NotNested(usize, usize),
    #[error("entropy ladder decreases at level {0}: {1} < {2} (generator bug)")]
    MonotonicityViolation(usize, f64, f64),
    #[error("failed to parse edge list line {0}: {1}")]
    Parse(usize, String),
}

/// Finite directed graph standing in for a topological Markov shift.
/// Parallel duplicate edges are merged at construction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkovGraph {
    n: usize,
    adj: Vec<Vec<usize>>,
}

impl MarkovGraph {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self, TmsError> {
        let mut sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(TmsError::EdgeOutOfRange(u, v, n));
            }
            sets[u].insert(v);
        }
        Ok(MarkovGraph { n, adj: sets.into_iter().map(|s| s.into_iter().collect()).collect() })
    }

    /// Parse a `u v` per-line edge list; `#` starts a comment. The vertex
    /// count is 1 + the largest index mentioned.
    pub fn from_edge_list_str(text: &str) -> Result<Self, TmsError> {
        let mut edges = Vec::new();
        let mut max_v = 0usize;
        for (lineno, line) in text.lines().enumerate() {
            let stripped = line.split('#').next().unwrap_or("").trim();
            if stripped.is_empty() {
                continue;
            }
            let mut it = stripped.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<usize, TmsError> {
                tok.and_then(|t| t.parse().ok())
                    .ok_or_else(|| TmsError::Parse(lineno + 1, line.to_string()))
            };
            let u = parse(it.next())?;
            let v = parse(it.next())?;
            if it.next().is_some() {
                return Err(TmsError::Parse(lineno + 1, line.to_string()));
            }
            max_v = max_v.max(u).max(v);
            edges.push((u, v));
        }
        if edges.is_empty() {
            return Err(TmsError::EmptyShift);
        }
        MarkovGraph::new(max_v + 1, &edges)
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj.iter().enumerate().flat_map(|(u, vs)| vs.iter().map(move |v| (u, *v)))
    }

    pub fn out_neighbors(&self, u: usize) -> &[usize] {
        &self.adj[u]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&v).is_ok()
    }

    /// Strongly connected components that carry at least one edge (single
    /// vertices without a self-loop support no two-sided paths and are
    /// dropped). Components and their vertex lists are sorted.
    pub fn irreducible_components(&self) -> Vec<Vec<usize>> {
        let sccs = self.kosaraju();
        let mut out: Vec<Vec<usize>> = sccs
            .into_iter()
            .filter(|c| c.len() > 1 || self.has_edge(c[0], c[0]))
            .map(|mut c| {
                c.sort_unstable();
                c
            })
            .collect();
        out.sort();
        out
    }

    fn kosaraju(&self) -> Vec<Vec<usize>> {
        // forward pass: explicit-stack DFS, order by completion time
        let mut order = Vec::with_capacity(self.n);
        let mut seen = vec![false; self.n];
        for root in 0..self.n {
            if seen[root] {
                continue;
            }
            let mut stack = vec![(root, 0usize)];
            seen[root] = true;
            while let Some(&mut (v, ref mut idx)) = stack.last_mut() {
                if *idx < self.adj[v].len() {
                    let w = self.adj[v][*idx];
                    *idx += 1;
                    if !seen[w] {
                        seen[w] = true;
                        stack.push((w, 0));
                    }
                } else {
                    order.push(v);
                    stack.pop();
                }
            }
        }
        // transpose pass in reverse completion order
        let mut radj: Vec<Vec<usize>> = vec![Vec::new(); self.n];
        for (u, v) in self.edges() {
            radj[v].push(u);
        }
        let mut comp = vec![usize::MAX; self.n];
        let mut comps: Vec<Vec<usize>> = Vec::new();
        for &root in order.iter().rev() {
            if comp[root] != usize::MAX {
                continue;
            }
            let id = comps.len();
            let mut members = vec![root];
            comp[root] = id;
            let mut stack = vec![root];
            while let Some(v) = stack.pop() {
                for &w in &radj[v] {
                    if comp[w] == usize::MAX {
                        comp[w] = id;
                        members.push(w);
                        stack.push(w);
                    }
                }
            }
            comps.push(members);
        }
        comps
    }

    fn check_component(&self, comp: &[usize]) -> Result<(), TmsError> {
        let set: BTreeSet<usize> = comp.iter().cloned().collect();
        if set.is_empty() || set.len() != comp.len() || *set.iter().next_back().unwrap() >= self.n {
            return Err(TmsError::NotAComponent);
        }
        Ok(())
    }

    /// gcd of cycle lengths through the component, with the cyclic classes
    /// C_0 → C_1 → … → C_{p−1} (BFS layering modulo the gcd).
    pub fn period(&self, comp: &[usize]) -> Result<(usize, Vec<Vec<usize>>), TmsError> {
        self.check_component(comp)?;
        let inside: BTreeSet<usize> = comp.iter().cloned().collect();
        let root = comp[0];
        let mut level = vec![usize::MAX; self.n];
        level[root] = 0;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for &w in &self.adj[v] {
                if inside.contains(&w) && level[w] == usize::MAX {
                    level[w] = level[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        let mut g: i64 = 0;
        for &u in comp {
            for &w in &self.adj[u] {
                if inside.contains(&w) {
                    let diff = level[u] as i64 + 1 - level[w] as i64;
                    g = gcd(g, diff);
                }
            }
        }
        let p = g.unsigned_abs().max(1) as usize;
        let mut classes = vec![Vec::new(); p];
        for &u in comp {
            classes[level[u] % p].push(u);
        }
        for c in &mut classes {
            c.sort_unstable();
        }
        // the edge relation must permute the classes cyclically
        debug_assert!(comp.iter().all(|&u| {
            self.adj[u]
                .iter()
                .filter(|w| inside.contains(w))
                .all(|&w| (level[u] + 1) % p == level[w] % p)
        }));
        Ok((p, classes))
    }

    /// log of the spectral radius of the component's adjacency matrix,
    /// by power iteration on A + I (the +I shift kills the period-induced
    /// oscillation and moves the spectrum by exactly 1).
    pub fn gurevich_entropy(&self, comp: &[usize]) -> Result<f64, TmsError> {
        let (lam, _, _) = self.perron(comp)?;
        Ok(lam.ln())
    }

    /// (spectral radius of A, right Perron vector, left Perron vector),
    /// vectors indexed by position in `comp` and normalized to sum 1.
    fn perron(&self, comp: &[usize]) -> Result<(f64, Vec<f64>, Vec<f64>), TmsError> {
        self.check_component(comp)?;
        let k = comp.len();
        let index_of = |v: usize| comp.binary_search(&v).ok();
        // local adjacency
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (i, &u) in comp.iter().enumerate() {
            for &w in &self.adj[u] {
                if let Some(j) = index_of(w) {
                    rows[i].push(j);
                }
            }
        }
        // regular components carry their spectral radius exactly: all row
        // (resp. column) sums equal d forces λ = d with a uniform Perron
        // vector, so the full k-shift reports log k with no iteration error
        let out_regular = rows.windows(2).all(|w| w[0].len() == w[1].len());
        let mut col_sums = vec![0usize; k];
        for row in &rows {
            for &j in row {
                col_sums[j] += 1;
            }
        }
        let in_regular = col_sums.windows(2).all(|w| w[0] == w[1]);

        let iterate = |rows: &[Vec<usize>], transpose: bool| -> Result<(f64, Vec<f64>), TmsError> {
            let mut x = vec![1.0 / k as f64; k];
            let mut lam_prev = f64::NAN;
            for _ in 0..200_000 {
                let mut y = x.clone(); // the +I part
                for (i, row) in rows.iter().enumerate() {
                    for &j in row {
                        if transpose {
                            y[j] += x[i];
                        } else {
                            y[i] += x[j];
                        }
                    }
                }
                let dot_xy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
                let dot_xx: f64 = x.iter().map(|a| a * a).sum();
                let lam = dot_xy / dot_xx;
                let norm: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                let mut delta: f64 = 0.0;
                for (xi, yi) in x.iter_mut().zip(&y) {
                    let nv = yi / norm;
                    delta = delta.max((nv - *xi).abs());
                    *xi = nv;
                }
                if delta < 1e-15 && (lam - lam_prev).abs() < 1e-13 {
                    return Ok((lam - 1.0, x));
                }
                lam_prev = lam;
            }
            Err(TmsError::NonConvergence)
        };
        let (lam, right) = if out_regular {
            (rows[0].len() as f64, vec![1.0; k])
        } else {
            iterate(&rows, false)?
        };
        let left = if in_regular { vec![1.0; k] } else { iterate(&rows, true)?.1 };
        let norm = |mut v: Vec<f64>| {
            let s: f64 = v.iter().sum();
            v.iter_mut().for_each(|x| *x /= s);
            v
        };
        Ok((lam, norm(right), norm(left)))
    }

    /// Closed-path growth (1/n) log #{paths v→v of length n, v in comp}:
    /// converges to the entropy along multiples of the period. A
    /// cross-check for `gurevich_entropy`, not a replacement.
    pub fn loop_growth_estimate(&self, comp: &[usize], n: usize) -> Result<f64, TmsError> {
        self.check_component(comp)?;
        let k = comp.len();
        let index_of = |v: usize| comp.binary_search(&v).ok();
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (i, &u) in comp.iter().enumerate() {
            for &w in &self.adj[u] {
                if let Some(j) = index_of(w) {
                    rows[i].push(j);
                }
            }
        }
        // trace of A^n via k matrix-vector passes
        let mut trace = 0.0f64;
        for start in 0..k {
            let mut x = vec![0.0f64; k];
            x[start] = 1.0;
            for _ in 0..n {
                let mut y = vec![0.0f64; k];
                for (i, row) in rows.iter().enumerate() {
                    for &j in row {
                        y[i] += x[j];
                    }
                }
                x = y;
            }
            trace += x[start];
        }
        if trace <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(trace.ln() / n as f64)
    }

    /// Entropy of the graph: the largest component entropy.
    pub fn entropy(&self) -> Result<f64, TmsError> {
        let comps = self.irreducible_components();
        if comps.is_empty() {
            return Err(TmsError::EmptyShift);
        }
        let mut best = f64::NEG_INFINITY;
        for c in comps {
            best = best.max(self.gurevich_entropy(&c)?);
        }
        Ok(best)
    }

    /// The entropy-maximizing Markov measure on the component: transitions
    /// p(u→v) = A(u,v)·r(v)/(λ·r(u)), stationary vector π(u) ∝ l(u)·r(u).
    pub fn parry_mme(&self, comp: &[usize]) -> Result<ParryMeasure, TmsError> {
        let (lam, right, left) = self.perron(comp)?;
        let k = comp.len();
        let index_of = |v: usize| comp.binary_search(&v).ok();
        let mut transitions = vec![vec![0.0; k]; k];
        for (i, &u) in comp.iter().enumerate() {
            for &w in &self.adj[u] {
                if let Some(j) = index_of(w) {
                    transitions[i][j] = right[j] / (lam * right[i]);
                }
            }
        }
        let mut pi: Vec<f64> = (0..k).map(|i| left[i] * right[i]).collect();
        let total: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|x| *x /= total);
        let mut entropy = 0.0;
        for i in 0..k {
            for j in 0..k {
                let p = transitions[i][j];
                if p > 0.0 {
                    entropy -= pi[i] * p * p.ln();
                }
            }
        }
        Ok(ParryMeasure {
            vertices: comp.to_vec(),
            stationary: pi,
            transitions,
            entropy,
            spectral_radius: lam,
        })
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 { a.abs() } else { gcd(b, a % b) }
}

/// Stationary entropy-maximizing Markov chain on a component.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParryMeasure {
    pub vertices: Vec<usize>,
    pub stationary: Vec<f64>,
    /// Row-stochastic transition matrix in component-local indices.
    pub transitions: Vec<Vec<f64>>,
    /// Kolmogorov–Sinai entropy of the chain; equals log spectral_radius.
    pub entropy: f64,
    pub spectral_radius: f64,
}

impl ParryMeasure {
    /// sup-norm of πP − π.
    pub fn stationarity_residual(&self) -> f64 {
        let k = self.vertices.len();
        let mut residual: f64 = 0.0;
        for j in 0..k {
            let mut pj = 0.0;
            for i in 0..k {
                pj += self.stationary[i] * self.transitions[i][j];
            }
            residual = residual.max((pj - self.stationary[j]).abs());
        }
        residual
    }
}

/// Entropy per level of a nested family of finite subgraphs; errors if a
/// level does not contain the previous one or if the entropy decreases.
pub fn entropy_ladder(levels: &[MarkovGraph]) -> Result<Vec<f64>, TmsError> {
    let mut out = Vec::with_capacity(levels.len());
    for (k, g) in levels.iter().enumerate() {
        if k > 0 {
            let prev = &levels[k - 1];
            if g.vertex_count() < prev.vertex_count()
                || !prev.edges().all(|(u, v)| g.has_edge(u, v))
            {
                return Err(TmsError::NotNested(k, k - 1));
            }
        }
        let h = g.entropy()?;
        if let Some(&prev_h) = out.last() {
            if h < prev_h - 1e-12 {
                return Err(TmsError::MonotonicityViolation(k, h, prev_h));
            }
        }
        out.push(h);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_shift(k: usize) -> MarkovGraph {
        let mut edges = Vec::new();
        for u in 0..k {
            for v in 0..k {
                edges.push((u, v));
            }
        }
        MarkovGraph::new(k, &edges).unwrap()
    }

    #[test]
    fn full_two_shift_single_component() {
        let g = full_shift(2);
        let comps = g.irreducible_components();
        assert_eq!(comps, vec![vec![0, 1]]);
        let (p, classes) = g.period(&comps[0]).unwrap();
        assert_eq!(p, 1);
        assert_eq!(classes.len(), 1);
    }

    #[test]
    fn dag_has_no_components() {
        let g = MarkovGraph::new(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        assert!(g.irreducible_components().is_empty());
    }

    #[test]
    fn two_cycles_one_connector() {
        let g = MarkovGraph::new(6, &[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3), (2, 3)]).unwrap();
        let comps = g.irreducible_components();
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0], vec![0, 1, 2]);
        assert_eq!(comps[1], vec![3, 4, 5]);
    }

    #[test]
    fn three_cycle_period_and_entropy() {
        let g = MarkovGraph::new(3, &[(0, 1), (1, 2), (2, 0)]).unwrap();
        let comp = vec![0, 1, 2];
        let (p, classes) = g.period(&comp).unwrap();
        assert_eq!(p, 3);
        assert_eq!(classes, vec![vec![0], vec![1], vec![2]]);
        assert_eq!(g.gurevich_entropy(&comp).unwrap(), 0.0);
    }

    #[test]
    fn four_cycle_with_six_detour_has_period_two() {
        // cycle 0→1→2→3→0 of length 4 plus a detour 1→4→5→2 making a 6-cycle
        let g = MarkovGraph::new(
            6,
            &[(0, 1), (1, 2), (2, 3), (3, 0), (1, 4), (4, 5), (5, 2)],
        )
        .unwrap();
        let comps = g.irreducible_components();
        assert_eq!(comps.len(), 1);
        let (p, classes) = g.period(&comps[0]).unwrap();
        assert_eq!(p, 2);
        assert_eq!(classes.iter().map(|c| c.len()).sum::<usize>(), 6);
    }

    #[test]
    fn golden_mean_entropy() {
        let g = MarkovGraph::new(2, &[(0, 0), (0, 1), (1, 0)]).unwrap();
        let h = g.gurevich_entropy(&[0, 1]).unwrap();
        let phi = 0.5 * (1.0 + 5f64.sqrt());
        assert!((h - phi.ln()).abs() < 1e-10);
        // loop-count growth agrees at finite n up to O(1/n)
        let est = g.loop_growth_estimate(&[0, 1], 20).unwrap();
        assert!((est - phi.ln()).abs() < 0.1);
    }

    #[test]
    fn full_shift_entropy_exact() {
        for k in 1..=6 {
            let g = full_shift(k);
            let comp: Vec<usize> = (0..k).collect();
            assert_eq!(g.gurevich_entropy(&comp).unwrap(), (k as f64).ln());
        }
    }

    #[test]
    fn parry_full_two_shift_uniform() {
        let g = full_shift(2);
        let m = g.parry_mme(&[0, 1]).unwrap();
        for row in &m.transitions {
            for p in row {
                assert!((p - 0.5).abs() < 1e-12);
            }
        }
        assert!((m.entropy - 2f64.ln()).abs() < 1e-12);
        assert!(m.stationarity_residual() < 1e-12);
    }

    #[test]
    fn parry_golden_mean_transitions() {
        let g = MarkovGraph::new(2, &[(0, 0), (0, 1), (1, 0)]).unwrap();
        let m = g.parry_mme(&[0, 1]).unwrap();
        let phi = 0.5 * (1.0 + 5f64.sqrt());
        assert!((m.transitions[0][0] - 1.0 / phi).abs() < 1e-12);
        assert!((m.transitions[0][1] - 1.0 / (phi * phi)).abs() < 1e-12);
        assert!((m.entropy - phi.ln()).abs() < 1e-10);
    }

    #[test]
    fn ladder_of_full_shifts() {
        let levels: Vec<MarkovGraph> = (1..=6).map(full_shift).collect();
        let hs = entropy_ladder(&levels).unwrap();
        for (k, h) in hs.iter().enumerate() {
            assert_eq!(*h, ((k + 1) as f64).ln());
        }
        // singleton ladder
        assert_eq!(entropy_ladder(&levels[..1]).unwrap().len(), 1);
    }
}
