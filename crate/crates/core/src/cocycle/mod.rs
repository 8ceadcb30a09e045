//! Derivative-cocycle statistics: reorthonormalized QR Lyapunov spectra,
//! Oseledets direction estimation from pre-orbits, Pesin-entropy estimates.

mod pliss;
mod potential;

pub use pliss::{pliss_times, z_chi_fraction, z_chi_test, PlissError, PlissResult};
pub use potential::{billiard_unstable_slope, geometric_potential};

use crate::billiard::{BilliardError, BilliardTable, CollisionState};
use crate::linalg::{qr2, Mat2, Vec2};
use crate::maps::{PreOrbit, TorusEndo, TorusPoint, VianaMap};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CocycleError {
    #[error("need at least {0} iterations")]
    TooFewIterations(usize),
    #[error("jacobian is singular along the orbit (|det| < 1e-14)")]
    SingularJacobian,
    #[error("billiard step failed: {0}")]
    Billiard(#[from] BilliardError),
    #[error("pre-orbit depth {0} too small (or contraction diagnostic above 1e-6)")]
    DepthTooSmall(usize),
    #[error("no singular-value gap (ratio {0:.3}): hyperbolic splitting not detected")]
    NoGap(f64),
    #[error("negative exponent CI contains zero: not hyperbolic at this resolution")]
    NotHyperbolic,
}

/// A one-step source of 2x2 derivative matrices along an orbit. The RNG is
/// threaded through for drivers that dither expanding arithmetic; exact maps
/// ignore it.
pub trait Cocycle {
    type State: Clone;
    fn step(&self, s: &Self::State, rng: &mut ChaCha8Rng) -> Result<(Self::State, Mat2), CocycleError>;
}

impl Cocycle for TorusEndo {
    type State = TorusPoint;
    fn step(&self, s: &TorusPoint, _rng: &mut ChaCha8Rng) -> Result<(TorusPoint, Mat2), CocycleError> {
        Ok((self.apply(*s), self.jacobian(*s)))
    }
}

/// Forward-orbit driver with seeded low-order dithering. Expanding integer
/// arithmetic on f64 collapses onto dyadic cycles (worst when the expansion
/// factor is a power of two), so orbit statistics perturb each image by a
/// random multiple of 2⁻⁵⁰. The map itself stays exact.
pub struct DitheredEndo<'a> {
    pub map: &'a TorusEndo,
}

const DITHER: f64 = 1.0 / (1u64 << 50) as f64;

impl Cocycle for DitheredEndo<'_> {
    type State = TorusPoint;
    fn step(&self, s: &TorusPoint, rng: &mut ChaCha8Rng) -> Result<(TorusPoint, Mat2), CocycleError> {
        let j = self.map.jacobian(*s);
        let img = self.map.apply(*s);
        let dx = rng.gen_range(0..1u64 << 20) as f64 * DITHER;
        let dy = rng.gen_range(0..1u64 << 20) as f64 * DITHER;
        Ok((TorusPoint::new(img.x() + dx, img.y() + dy), j))
    }
}

impl Cocycle for VianaMap {
    type State = (f64, f64);
    fn step(&self, s: &(f64, f64), rng: &mut ChaCha8Rng) -> Result<((f64, f64), Mat2), CocycleError> {
        let j = self.jacobian(*s);
        if j.det().abs() < 1e-14 {
            return Err(CocycleError::SingularJacobian);
        }
        let (theta, t) = self.apply(*s);
        let dth = rng.gen_range(0..1u64 << 20) as f64 * DITHER;
        Ok(((crate::maps::reduce_mod1(theta + dth), t), j))
    }
}

pub struct BilliardFlow<'a> {
    pub table: &'a BilliardTable,
}

impl Cocycle for BilliardFlow<'_> {
    type State = CollisionState;
    fn step(&self, s: &CollisionState, _rng: &mut ChaCha8Rng) -> Result<(CollisionState, Mat2), CocycleError> {
        let (next, tau) = self.table.collide(s)?;
        let m = self.table.derivative(s, &next, tau)?;
        Ok((next, m))
    }
}

/// Lyapunov spectrum estimate in nats per iterate, exponents sorted
/// descending, with batch-means confidence halfwidths (20 batches, 1.96σ).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub exponents: [f64; 2],
    pub n_iter: usize,
    pub ci_halfwidth: [f64; 2],
}

impl LyapunovEstimate {
    /// Sum of the exponents (= average log |det df| along the orbit).
    pub fn sum(&self) -> f64 {
        self.exponents[0] + self.exponents[1]
    }
}

const CI_BATCHES: usize = 20;

/// Reorthonormalized cocycle product: exponents are the averaged logs of the
/// QR diagonal. A warmup of n/10 steps aligns the frame before accumulation
/// starts, so constant cocycles are recovered to machine precision.
/// Deterministic given the seed.
pub fn lyapunov_qr<C: Cocycle>(
    cocycle: &C,
    start: C::State,
    n: usize,
    seed: u64,
) -> Result<LyapunovEstimate, CocycleError> {
    if n < 1000 {
        return Err(CocycleError::TooFewIterations(1000));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let angle = rng.gen_range(0.0..std::f64::consts::TAU);
    let mut q = Mat2::new(angle.cos(), -angle.sin(), angle.sin(), angle.cos());
    let mut state = start;

    let warmup = n / 10;
    for _ in 0..warmup {
        let (next, j) = cocycle.step(&state, &mut rng)?;
        let (qn, _, _, r22) = qr2(j.mul(q));
        if r22 == 0.0 {
            return Err(CocycleError::SingularJacobian);
        }
        q = qn;
        state = next;
    }

    let batch = n / CI_BATCHES;
    let n_used = batch * CI_BATCHES;
    let mut batch_means = [[0.0f64; CI_BATCHES]; 2];
    let (mut sum1, mut sum2) = (0.0f64, 0.0f64);
    for k in 0..n_used {
        let (next, j) = cocycle.step(&state, &mut rng)?;
        let (qn, r11, _, r22) = qr2(j.mul(q));
        if r22 == 0.0 {
            return Err(CocycleError::SingularJacobian);
        }
        let (l1, l2) = (r11.ln(), r22.ln());
        sum1 += l1;
        sum2 += l2;
        batch_means[0][k / batch] += l1 / batch as f64;
        batch_means[1][k / batch] += l2 / batch as f64;
        q = qn;
        state = next;
    }
    let mean1 = sum1 / n_used as f64;
    let mean2 = sum2 / n_used as f64;
    let ci = |means: &[f64; CI_BATCHES], mean: f64| {
        let var = means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (CI_BATCHES - 1) as f64;
        1.96 * (var / CI_BATCHES as f64).sqrt()
    };
    let (e1, e2) = (mean1.max(mean2), mean1.min(mean2));
    let (c1, c2) = if mean1 >= mean2 {
        (ci(&batch_means[0], mean1), ci(&batch_means[1], mean2))
    } else {
        (ci(&batch_means[1], mean2), ci(&batch_means[0], mean1))
    };
    Ok(LyapunovEstimate { exponents: [e1, e2], n_iter: n_used, ci_halfwidth: [c1, c2] })
}

use rand::SeedableRng;

/// Fixed generic vector used to seed direction estimates.
const GENERIC_DIR: Vec2 = Vec2::new(0.8, 0.6);

/// Unstable direction at the base of a pre-orbit: push a fixed generic
/// vector forward along the branch from x₋ₙ to x₀, normalizing each step.
/// Converges to the branch-dependent Oseledets direction exponentially in
/// the depth; the contraction diagnostic compares the result against the
/// depth-(n−1) sub-branch.
pub fn unstable_direction(map: &TorusEndo, preorbit: &PreOrbit) -> Result<Vec2, CocycleError> {
    let depth = preorbit.depth();
    if depth < 20 {
        return Err(CocycleError::DepthTooSmall(depth));
    }
    let full = push_forward(map, preorbit.points(), depth);
    let shallow = push_forward(map, preorbit.points(), depth - 1);
    if full.line_angle(shallow) > 1e-6 {
        return Err(CocycleError::DepthTooSmall(depth));
    }
    Ok(full)
}

/// Push the generic seed forward along points[start_depth] → points[0].
fn push_forward(map: &TorusEndo, points: &[TorusPoint], start_depth: usize) -> Vec2 {
    let mut v = GENERIC_DIR;
    for k in (1..=start_depth).rev() {
        v = map.jacobian(points[k]).apply(v).normalized();
    }
    v
}

/// Most-contracted input direction of df^n at x: the right singular vector
/// of the n-step product with the smaller singular value. Errors with
/// `NoGap` when the singular values are within a factor 10.
pub fn stable_direction(map: &TorusEndo, x: TorusPoint, n: usize) -> Result<Vec2, CocycleError> {
    let mut m = Mat2::identity();
    let mut p = x;
    for _ in 0..n {
        m = map.jacobian(p).mul(m);
        p = map.apply(p);
        // keep the product in floating range; direction is scale-invariant
        let s = m.max_abs();
        if s > 1e100 {
            m = m.scale(1.0 / s);
        }
    }
    let (s1, s2) = m.singular_values();
    if !(s1 / s2 >= 10.0) {
        return Err(CocycleError::NoGap(s1 / s2));
    }
    Ok(m.most_contracted_direction())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PesinEstimate {
    /// log deg + |λ⁻|, the entropy value of the smooth measure under the
    /// endomorphism Pesin formula.
    pub value: f64,
    pub ci_halfwidth: f64,
    pub lambda_minus: f64,
    pub lambda_minus_ci: f64,
    pub log_degree: f64,
}

/// Pesin-entropy estimate log deg(f) + |λ⁻| for a volume-preserving torus
/// endomorphism, from a dithered QR run. Errors when the λ⁻ confidence
/// interval contains zero.
pub fn pesin_entropy_estimate(
    map: &TorusEndo,
    start: TorusPoint,
    n: usize,
    seed: u64,
) -> Result<PesinEstimate, CocycleError> {
    let est = lyapunov_qr(&DitheredEndo { map }, start, n, seed)?;
    let lam_minus = est.exponents[1];
    let ci = est.ci_halfwidth[1];
    if lam_minus + ci >= 0.0 {
        return Err(CocycleError::NotHyperbolic);
    }
    let log_degree = (map.degree() as f64).ln();
    Ok(PesinEstimate {
        value: log_degree + lam_minus.abs(),
        ci_halfwidth: ci,
        lambda_minus: lam_minus,
        lambda_minus_ci: ci,
        log_degree,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::IntMat2;

    #[test]
    fn too_few_iterations_rejected() {
        let f = TorusEndo::linear(IntMat2::new(6, 1, 1, 1).unwrap());
        let r = lyapunov_qr(&f, TorusPoint::new(0.2, 0.3), 10, 1);
        assert!(matches!(r, Err(CocycleError::TooFewIterations(_))));
    }

    #[test]
    fn product_map_without_gap_reports_nogap() {
        let f = TorusEndo::product(2, 2).unwrap();
        let r = stable_direction(&f, TorusPoint::new(0.2, 0.3), 40);
        assert!(matches!(r, Err(CocycleError::NoGap(_))));
    }

    #[test]
    fn neutral_factor_is_not_hyperbolic() {
        let f = TorusEndo::product(1, 2).unwrap();
        let r = pesin_entropy_estimate(&f, TorusPoint::new(0.2, 0.3), 20_000, 5);
        assert!(matches!(r, Err(CocycleError::NotHyperbolic)));
    }
}
