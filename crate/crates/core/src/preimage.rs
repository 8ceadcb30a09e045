//! Preimage-tree statistics: the backward-expansion functional
//! I(x, v, f^N) = Σ_{f^N(y)=x} log‖(df^N_y)⁻¹ v‖ / |det df^N_y|, its
//! sampled infimum over phase and direction grids, angle-tail and
//! hyperbolic-time Monte Carlo experiments, and exact s-moment decay checks.

use crate::cocycle::{unstable_direction, CocycleError};
use crate::linalg::Vec2;
use crate::maps::{sample_preorbit, MapError, TorusEndo, TorusPoint};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PreimageError {
    #[error("tree budget exceeded: deg^{n} = {leaves} leaves > {budget}")]
    BudgetExceeded { n: usize, leaves: u128, budget: u64 },
    #[error("map error: {0}")]
    Map(#[from] MapError),
    #[error("cocycle error: {0}")]
    Cocycle(#[from] CocycleError),
    #[error("degenerate angle tail: {0}")]
    DegenerateTail(&'static str),
    #[error("parameter out of range: {0}")]
    BadParameter(&'static str),
}

/// Default leaf budget for exact tree sums.
pub const DEFAULT_BUDGET: u64 = 1_000_000;

fn check_budget(map: &TorusEndo, n: usize, budget: u64) -> Result<(), PreimageError> {
    let mut leaves: u128 = 1;
    for _ in 0..n {
        leaves = leaves.saturating_mul(map.degree() as u128);
        if leaves > budget as u128 {
            return Err(PreimageError::BudgetExceeded { n, leaves, budget });
        }
    }
    Ok(())
}

/// Depth-first walk of the exact depth-n preimage tree. At each leaf y the
/// callback receives the pulled-back vector (df^n_y)⁻¹ v and the branch
/// weight 1/|det df^n_y|.
fn walk_tree<F: FnMut(TorusPoint, Vec2, f64)>(
    map: &TorusEndo,
    x: TorusPoint,
    v: Vec2,
    n: usize,
    leaf: &mut F,
) -> Result<(), PreimageError> {
    let det = map.det_jacobian_abs();
    let mut stack = vec![(x, v, 0usize, 1.0f64)];
    while let Some((p, vec, depth, wt)) = stack.pop() {
        if depth == n {
            leaf(p, vec, wt);
            continue;
        }
        for y in map.preimages(p)? {
            let j_inv = map
                .jacobian(y)
                .inverse()
                .expect("volume-preserving families have invertible jacobians");
            stack.push((y, j_inv.apply(vec), depth + 1, wt / det));
        }
    }
    Ok(())
}

/// Exact tree sum of I(x, v, f^N). The weights 1/|det df^N| over all deg^N
/// branches add up to 1 (Lebesgue transfer-operator identity), so this is
/// the μ⁻ₓ-average of log‖df̂^{-N} v‖ over the natural extension fiber.
pub fn backward_functional(
    map: &TorusEndo,
    x: TorusPoint,
    v: Vec2,
    n: usize,
    budget: u64,
) -> Result<f64, PreimageError> {
    check_budget(map, n, budget)?;
    let v = v.normalized();
    let mut total = 0.0;
    walk_tree(map, x, v, n, &mut |_, w, wt| total += wt * w.norm().ln())?;
    Ok(total)
}

/// Branch-weight bookkeeping used by the invariant tests: total weight and
/// leaf count of the depth-n tree.
pub fn tree_weight_sum(map: &TorusEndo, x: TorusPoint, n: usize, budget: u64) -> Result<(f64, u64), PreimageError> {
    check_budget(map, n, budget)?;
    let mut sum = 0.0;
    let mut leaves = 0u64;
    walk_tree(map, x, Vec2::new(1.0, 0.0), n, &mut |_, _, wt| {
        sum += wt;
        leaves += 1;
    })?;
    Ok((sum, leaves))
}

/// Leaves of the depth-n tree (the full preimage set at depth n).
pub fn tree_leaves(map: &TorusEndo, x: TorusPoint, n: usize, budget: u64) -> Result<Vec<(TorusPoint, f64)>, PreimageError> {
    check_budget(map, n, budget)?;
    let mut out = Vec::new();
    walk_tree(map, x, Vec2::new(1.0, 0.0), n, &mut |p, _, wt| out.push((p, wt)))?;
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BackwardInfEstimate {
    /// min over the sampled (x, v) of I(x, v, f^N)/N — a sampled lower
    /// bound estimate of C(f), not a certified infimum.
    pub value: f64,
    pub argmin_x: (f64, f64),
    pub argmin_angle: f64,
    pub n: usize,
    pub samples: usize,
}

/// Sampled inf of I(x, v, f^N)/N over a uniform grid of base points and a
/// uniform fan of directions. Positivity of the true infimum for some N is
/// the defining condition of the volume-preserving class studied here.
pub fn c_lower_estimate(
    map: &TorusEndo,
    grid: usize,
    fan: usize,
    n: usize,
    budget: u64,
) -> Result<BackwardInfEstimate, PreimageError> {
    if grid == 0 || fan == 0 {
        return Err(PreimageError::BadParameter("grid and fan must be nonempty"));
    }
    if n == 0 {
        return Ok(BackwardInfEstimate {
            value: 0.0,
            argmin_x: (0.0, 0.0),
            argmin_angle: 0.0,
            n,
            samples: grid * grid * fan,
        });
    }
    check_budget(map, n, budget)?;
    let mut best = f64::INFINITY;
    let mut arg = ((0.0, 0.0), 0.0);
    for i in 0..grid {
        for j in 0..grid {
            let x = TorusPoint::new(
                (i as f64 + 0.5) / grid as f64,
                (j as f64 + 0.5) / grid as f64,
            );
            for k in 0..fan {
                let angle = std::f64::consts::PI * k as f64 / fan as f64;
                let v = Vec2::from_angle(angle);
                let val = backward_functional(map, x, v, n, budget)? / n as f64;
                if val < best {
                    best = val;
                    arg = ((x.x(), x.y()), angle);
                }
            }
        }
    }
    Ok(BackwardInfEstimate { value: best, argmin_x: arg.0, argmin_angle: arg.1, n, samples: grid * grid * fan })
}

/// Work item for parallel drivers: one (x, v) sample of the grid.
pub fn c_lower_samples(grid: usize, fan: usize) -> Vec<(TorusPoint, f64)> {
    let mut out = Vec::with_capacity(grid * grid * fan);
    for i in 0..grid {
        for j in 0..grid {
            for k in 0..fan {
                out.push((
                    TorusPoint::new((i as f64 + 0.5) / grid as f64, (j as f64 + 0.5) / grid as f64),
                    std::f64::consts::PI * k as f64 / fan as f64,
                ));
            }
        }
    }
    out
}

/// Empirical tail of the angle between a fixed reference direction and the
/// pre-orbit-dependent unstable direction, with a power-law fit A·η^β on
/// the lower tail.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TailFit {
    pub eta_grid: Vec<f64>,
    pub empirical_cdf: Vec<f64>,
    pub beta_hat: f64,
    pub a_hat: f64,
    /// 95% bootstrap interval for beta_hat.
    pub ci: (f64, f64),
    pub samples: usize,
    pub tail_count: usize,
}

/// Monte Carlo over `m` sampled pre-orbits: empirical CDF of
/// ∠(E, Eᵘ_branch) on `eta_grid`, and a log-log least-squares fit of the
/// smallest 20% of the angles with a seeded bootstrap CI (200 resamples).
pub fn angle_tail_experiment(
    map: &TorusEndo,
    x: TorusPoint,
    e_dir: Vec2,
    m: usize,
    depth: usize,
    eta_grid: &[f64],
    seed: u64,
) -> Result<TailFit, PreimageError> {
    if eta_grid.is_empty() || m == 0 {
        return Err(PreimageError::BadParameter("need samples and a nonempty eta grid"));
    }
    let mut angles = Vec::with_capacity(m);
    for idx in 0..m {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(idx as u64 + 1)));
        let branch = sample_preorbit(map, x, depth, &mut rng)?;
        let eu = unstable_direction(map, &branch)?;
        angles.push(e_dir.line_angle(eu));
    }
    let max_eta = eta_grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let below = angles.iter().filter(|a| **a < max_eta).count();
    if below < 50 {
        return Err(PreimageError::DegenerateTail("fewer than 50 samples below the largest eta"));
    }

    let mut sorted = angles.clone();
    sorted.sort_by(f64::total_cmp);
    let cdf: Vec<f64> = eta_grid
        .iter()
        .map(|eta| sorted.partition_point(|a| a < eta) as f64 / m as f64)
        .collect();

    // lower-tail regression sample: smallest 20%
    let tail_count = (m / 5).max(2);
    let tail = &sorted[..tail_count];
    if tail[tail_count - 1] - tail[0] < 1e-12 || tail[0] <= 0.0 {
        return Err(PreimageError::DegenerateTail("lower-tail angles carry no spread"));
    }
    let fit = fit_tail(tail, m);
    // bootstrap over the full angle sample
    let mut boots = Vec::with_capacity(200);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb007);
    for _ in 0..200 {
        let mut resample: Vec<f64> = (0..m)
            .map(|_| angles[rand::Rng::gen_range(&mut rng, 0..m)])
            .collect();
        resample.sort_by(f64::total_cmp);
        let t = &resample[..tail_count];
        if t[tail_count - 1] - t[0] < 1e-12 || t[0] <= 0.0 {
            continue;
        }
        boots.push(fit_tail(t, m).0);
    }
    if boots.len() < 50 {
        return Err(PreimageError::DegenerateTail("bootstrap resamples degenerate"));
    }
    boots.sort_by(f64::total_cmp);
    let lo = boots[(boots.len() as f64 * 0.025) as usize];
    let hi = boots[((boots.len() as f64 * 0.975) as usize).min(boots.len() - 1)];

    Ok(TailFit {
        eta_grid: eta_grid.to_vec(),
        empirical_cdf: cdf,
        beta_hat: fit.0,
        a_hat: fit.1,
        ci: (lo, hi),
        samples: m,
        tail_count,
    })
}

/// Least squares of log CDF against log η over the order statistics of the
/// tail sample: CDF(a_(k)) = k/m. Returns (beta, A).
fn fit_tail(tail: &[f64], m: usize) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = tail
        .iter()
        .enumerate()
        .filter(|(_, a)| **a > 0.0)
        .map(|(k, a)| (a.ln(), (((k + 1) as f64) / m as f64).ln()))
        .collect();
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let beta = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let log_a = (sy - beta * sx) / n;
    (beta, log_a.exp())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentRow {
    pub n: usize,
    pub moment: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentCheck {
    pub s: f64,
    pub rows: Vec<MomentRow>,
    /// Decay rate from the log-linear fit moment ≈ C e^{−nχ}.
    pub chi_hat: f64,
    /// First index of `rows` from which the moments decay monotonically to
    /// the end, when any.
    pub monotone_from: Option<usize>,
}

/// Exact-tree s-moments ∫‖df̂^{-n} v‖^{-s} dμ⁻ₓ for each n in `n_list`,
/// with the fitted exponential decay rate.
pub fn moment_bound_check(
    map: &TorusEndo,
    x: TorusPoint,
    v: Vec2,
    s: f64,
    n_list: &[usize],
    budget: u64,
) -> Result<MomentCheck, PreimageError> {
    if !(s >= 0.0 && s <= 0.5) {
        return Err(PreimageError::BadParameter("s must lie in [0, 0.5]"));
    }
    let v = v.normalized();
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        check_budget(map, n, budget)?;
        let mut total = 0.0;
        walk_tree(map, x, v, n, &mut |_, w, wt| total += wt * w.norm().powf(-s))?;
        rows.push(MomentRow { n, moment: total });
    }
    // log-linear fit over (n, ln moment)
    let n = rows.len() as f64;
    let sx: f64 = rows.iter().map(|r| r.n as f64).sum();
    let sy: f64 = rows.iter().map(|r| r.moment.ln()).sum();
    let sxx: f64 = rows.iter().map(|r| (r.n * r.n) as f64).sum();
    let sxy: f64 = rows.iter().map(|r| r.n as f64 * r.moment.ln()).sum();
    let denom = n * sxx - sx * sx;
    let chi_hat = if denom.abs() > 0.0 { -(n * sxy - sx * sy) / denom } else { 0.0 };
    let monotone_from = (0..rows.len()).find(|&k| rows[k..].windows(2).all(|w| w[1].moment < w[0].moment));
    Ok(MomentCheck { s, rows, chi_hat, monotone_from })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HyperbolicTimeStats {
    pub chi_bar: f64,
    pub s: f64,
    pub depth: usize,
    pub samples: usize,
    /// counts[n] = number of pre-orbits whose first hyperbolic time is n;
    /// censored samples are reported at index depth+1.
    pub counts: Vec<usize>,
    pub censored: usize,
    /// (n, fraction of samples with first hyperbolic time > n).
    pub tail_freq: Vec<(usize, f64)>,
    /// Log-linear slope of the positive tail frequencies, when fittable.
    pub tail_slope: Option<f64>,
    /// Mean of the manifold-size proxy e^{−χ̄·n₀/s} over uncensored samples.
    /// An engineering surrogate for the unstable-manifold size statistics,
    /// not a certified bound.
    pub size_proxy_mean: f64,
}

/// Per sampled pre-orbit, the smallest n₀ ≤ depth with
/// ‖df̂^{-n} v‖^{-s} < e^{−n χ̄} for all n₀ ≤ n ≤ depth; censored samples
/// (no such n₀) are counted at depth+1.
pub fn hyperbolic_time_stats(
    map: &TorusEndo,
    x: TorusPoint,
    v: Vec2,
    chi_bar: f64,
    s: f64,
    m: usize,
    depth: usize,
    seed: u64,
) -> Result<HyperbolicTimeStats, PreimageError> {
    if !(s > 0.0) || !(chi_bar > 0.0) {
        return Err(PreimageError::BadParameter("chi_bar and s must be positive"));
    }
    let v = v.normalized();
    let mut counts = vec![0usize; depth + 2];
    let mut proxy_sum = 0.0;
    let mut uncensored = 0usize;
    for idx in 0..m {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0xd134_2543_de82_ef95u64.wrapping_mul(idx as u64 + 1)));
        let branch = sample_preorbit(map, x, depth, &mut rng)?;
        // pull v back along the branch, recording log norms
        let mut w = v;
        let mut lognorm = vec![0.0f64; depth + 1];
        for k in 1..=depth {
            let y = branch.points()[k];
            let j_inv = map.jacobian(y).inverse().expect("invertible jacobian");
            w = j_inv.apply(w);
            lognorm[k] = w.norm().ln();
        }
        // condition at n: −s·lognorm[n] < −n·chi_bar
        let mut n0 = depth + 1;
        for n in (1..=depth).rev() {
            if -s * lognorm[n] < -(n as f64) * chi_bar {
                n0 = n;
            } else {
                break;
            }
        }
        counts[n0] += 1;
        if n0 <= depth {
            uncensored += 1;
            proxy_sum += (-chi_bar * n0 as f64 / s).exp();
        }
    }
    let censored = counts[depth + 1];
    let mut tail_freq = Vec::with_capacity(depth + 1);
    let mut above = m;
    for n in 0..=depth {
        above -= counts[n];
        tail_freq.push((n, above as f64 / m as f64));
    }
    // fit slope on strictly positive tail frequencies with enough mass
    let pts: Vec<(f64, f64)> = tail_freq
        .iter()
        .filter(|(_, f)| *f * m as f64 >= 30.0 && *f > 0.0)
        .map(|(n, f)| (*n as f64, f.ln()))
        .collect();
    let tail_slope = if pts.len() >= 3 {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        Some((n * sxy - sx * sy) / (n * sxx - sx * sx))
    } else {
        None
    };
    Ok(HyperbolicTimeStats {
        chi_bar,
        s,
        depth,
        samples: m,
        counts,
        censored,
        tail_freq,
        tail_slope,
        size_proxy_mean: if uncensored > 0 { proxy_sum / uncensored as f64 } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::IntMat2;

    #[test]
    fn zero_depth_functional_vanishes() {
        let f = TorusEndo::linear(IntMat2::new(6, 1, 1, 1).unwrap());
        let v = Vec2::new(0.3, 0.7);
        let val = backward_functional(&f, TorusPoint::new(0.2, 0.9), v, 0, DEFAULT_BUDGET).unwrap();
        assert_eq!(val, 0.0);
    }

    #[test]
    fn budget_is_enforced() {
        let f = TorusEndo::linear(IntMat2::new(6, 1, 1, 1).unwrap());
        let r = backward_functional(&f, TorusPoint::new(0.2, 0.9), Vec2::new(1.0, 0.0), 12, 100);
        assert!(matches!(r, Err(PreimageError::BudgetExceeded { .. })));
    }

    #[test]
    fn zero_s_moment_is_one() {
        let f = TorusEndo::linear(IntMat2::new(6, 1, 1, 1).unwrap());
        let chk = moment_bound_check(
            &f,
            TorusPoint::new(0.4, 0.1),
            Vec2::new(0.6, 0.8),
            0.0,
            &[1, 2, 3],
            DEFAULT_BUDGET,
        )
        .unwrap();
        for row in chk.rows {
            assert!((row.moment - 1.0).abs() < 1e-12);
        }
    }
}
