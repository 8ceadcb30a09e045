//! Periodic orbits of dispersing billiards: symbolic itineraries with
//! lattice shifts, a Newton solver for the critical points of the cyclic
//! length functional, enumeration up to cyclic/reversal equivalence, the
//! periodic-orbit expansion report, and the zero-pressure consistency check.

use crate::billiard::{BilliardError, BilliardTable, CollisionState};
use crate::linalg::{qr2, solve_dense, Mat2, Vec2};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OrbitError {
    #[error("itinerary must visit at least two collisions")]
    TooShort,
    #[error("consecutive repetition of the same disc with zero shift")]
    ImmediateRepetition,
    #[error("lattice shift {0:?} exceeds the horizon bound {1}")]
    ShiftOutOfRange((i64, i64), i64),
    #[error("disc index {0} out of range")]
    BadDisc(usize),
    #[error("Newton did not converge after {0} damped steps (|grad| = {1:.3e})")]
    NoConvergence(usize, f64),
    #[error("singular Newton system")]
    SingularSystem,
    #[error("solved critical point is not a billiard orbit (reflection on the wrong side)")]
    InvalidReflection,
    #[error("chord {0} is occluded by disc {1}")]
    Occluded(usize, usize),
    #[error("cycle derivative is not hyperbolic (|trace| = {0:.3})")]
    NotHyperbolic(f64),
    #[error("billiard error: {0}")]
    Billiard(#[from] BilliardError),
}

/// Cyclic symbolic itinerary: step k holds the disc of the k-th collision
/// and the lattice shift of the segment from collision k to collision k+1
/// (indices mod p).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Itinerary {
    pub steps: Vec<(usize, (i64, i64))>,
}

impl Itinerary {
    pub fn new(steps: Vec<(usize, (i64, i64))>) -> Self {
        Itinerary { steps }
    }

    pub fn period(&self) -> usize {
        self.steps.len()
    }

    pub fn validate(&self, table: &BilliardTable) -> Result<(), OrbitError> {
        if self.steps.len() < 2 {
            return Err(OrbitError::TooShort);
        }
        let bound = table.tau_max().ceil() as i64 + 1;
        let p = self.steps.len();
        for (k, &(disc, shift)) in self.steps.iter().enumerate() {
            if disc >= table.discs().len() {
                return Err(OrbitError::BadDisc(disc));
            }
            if shift.0.abs() > bound || shift.1.abs() > bound {
                return Err(OrbitError::ShiftOutOfRange(shift, bound));
            }
            let next_disc = self.steps[(k + 1) % p].0;
            if next_disc == disc && shift == (0, 0) {
                return Err(OrbitError::ImmediateRepetition);
            }
        }
        Ok(())
    }

    pub fn rotated(&self, k: usize) -> Itinerary {
        let p = self.steps.len();
        Itinerary::new((0..p).map(|i| self.steps[(i + k) % p]).collect())
    }

    /// Time reversal: visit the discs in the opposite order with negated
    /// segment shifts.
    pub fn reversed(&self) -> Itinerary {
        let p = self.steps.len();
        let mut steps = Vec::with_capacity(p);
        for i in 0..p {
            let disc = self.steps[(p - i) % p].0;
            let shift = self.steps[(p - 1 - i) % p].1;
            steps.push((disc, (-shift.0, -shift.1)));
        }
        Itinerary::new(steps)
    }

    /// Lexicographic minimum over all rotations of the itinerary and of its
    /// reversal: the representative of the cyclic/reversal class.
    pub fn canonical(&self) -> Itinerary {
        let rev = self.reversed();
        let mut best: Option<Itinerary> = None;
        for k in 0..self.steps.len() {
            for cand in [self.rotated(k), rev.rotated(k)] {
                if best.as_ref().map_or(true, |b| cand < *b) {
                    best = Some(cand);
                }
            }
        }
        best.unwrap()
    }

    /// False when the itinerary is a repetition of a shorter cycle.
    pub fn is_primitive(&self) -> bool {
        let p = self.steps.len();
        for q in 1..p {
            if p % q == 0 && (0..p).all(|i| self.steps[i] == self.steps[(i + q) % p]) {
                return false;
            }
        }
        true
    }

    pub fn label(&self) -> String {
        self.steps
            .iter()
            .map(|(d, (sx, sy))| format!("{d}:{sx},{sy}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub itinerary: Itinerary,
    pub points: Vec<CollisionState>,
    pub flight_times: Vec<f64>,
    /// (1/p) log of the unstable eigenvalue of the cycle derivative.
    pub expansion_rate: f64,
    pub min_angle_gap: f64,
    /// Newton certificate: |∇L| at the solution.
    pub grad_norm: f64,
}

impl PeriodicOrbit {
    pub fn period(&self) -> usize {
        self.points.len()
    }

    pub fn is_non_grazing(&self, delta: f64) -> bool {
        self.min_angle_gap > delta
    }

    /// Resolution-1e-7 set key of the collision points, used to deduplicate
    /// orbits found through different itineraries. A set (not multiset)
    /// suffices: a phase point determines its whole orbit.
    pub fn point_key(&self) -> Vec<(usize, i64, i64)> {
        let mut key: Vec<(usize, i64, i64)> = self
            .points
            .iter()
            .map(|s| (s.disc, (s.r / 1e-7).round() as i64, (s.phi / 1e-7).round() as i64))
            .collect();
        key.sort_unstable();
        key.dedup();
        key
    }
}

/// Angle-gap threshold below which an orbit is reported as grazing.
pub const GRAZE_TOLERANCE: f64 = 1e-6;

struct Chain<'a> {
    table: &'a BilliardTable,
    discs: Vec<usize>,
    /// unfolded circle centers D_1..D_p plus the wrap copies D_0, D_{p+1}
    centers: Vec<Vec2>,
    total_shift: Vec2,
}

impl<'a> Chain<'a> {
    fn new(table: &'a BilliardTable, itin: &Itinerary) -> Self {
        let p = itin.period();
        let mut shift = Vec2::new(0.0, 0.0);
        let mut centers = Vec::with_capacity(p + 1);
        let mut discs = Vec::with_capacity(p);
        for &(d, (sx, sy)) in &itin.steps {
            discs.push(d);
            centers.push(table.discs()[d].center.add(shift));
            shift = shift.add(Vec2::new(sx as f64, sy as f64));
        }
        Chain { table, discs, centers, total_shift: shift }
    }

    fn radius(&self, i: usize) -> f64 {
        self.table.discs()[self.discs[i]].radius
    }

    /// Boundary point of circle i at angle theta_i (unfolded).
    fn point(&self, i: usize, theta: f64) -> Vec2 {
        self.centers[i].add(Vec2::from_angle(theta).scale(self.radius(i)))
    }

    /// Unfolded positions for angles theta[0..p], plus the wrapped copies.
    fn layout(&self, theta: &[f64]) -> Vec<Vec2> {
        let p = theta.len();
        let mut pts = Vec::with_capacity(p + 2);
        // predecessor of point 0: point p-1 shifted back by the total shift
        pts.push(self.point(p - 1, theta[p - 1]).sub(self.total_shift));
        for (i, &th) in theta.iter().enumerate() {
            pts.push(self.point(i, th));
        }
        pts.push(self.point(0, theta[0]).add(self.total_shift));
        pts
    }
}

/// Gradient of the cyclic length functional in the boundary angles,
/// g_i = R_i T_i · (u_{i−1} − u_i), where T_i is the (counterclockwise)
/// angular tangent and u the chord unit vectors. Zero exactly at specular
/// reflection.
fn length_gradient(chain: &Chain, theta: &[f64]) -> (Vec<f64>, f64) {
    let p = theta.len();
    let pts = chain.layout(theta);
    let mut grad = vec![0.0; p];
    let mut norm2 = 0.0;
    for i in 0..p {
        let prev = pts[i];
        let here = pts[i + 1];
        let next = pts[i + 2];
        let u_in = here.sub(prev).normalized();
        let u_out = next.sub(here).normalized();
        let tangent = Vec2::from_angle(theta[i]).perp().scale(chain.radius(i));
        let g = tangent.dot(u_in.sub(u_out));
        grad[i] = g;
        norm2 += g * g;
    }
    (grad, norm2.sqrt())
}

fn length_hessian(chain: &Chain, theta: &[f64]) -> Vec<Vec<f64>> {
    let p = theta.len();
    let pts = chain.layout(theta);
    let mut h = vec![vec![0.0; p]; p];
    for i in 0..p {
        let here = pts[i + 1];
        let prev = pts[i];
        let next = pts[i + 2];
        let l_in = here.sub(prev).norm();
        let l_out = next.sub(here).norm();
        let u_in = here.sub(prev).scale(1.0 / l_in);
        let u_out = next.sub(here).scale(1.0 / l_out);
        let t_i = Vec2::from_angle(theta[i]).perp().scale(chain.radius(i));
        let dt_i = Vec2::from_angle(theta[i]).scale(-chain.radius(i)); // dT/dθ
        let proj = |u: Vec2, a: Vec2, b: Vec2| -> f64 {
            // aᵀ (I - u uᵀ) b
            a.dot(b) - a.dot(u) * u.dot(b)
        };
        // diagonal
        h[i][i] += dt_i.dot(u_in.sub(u_out));
        h[i][i] += proj(u_in, t_i, t_i) / l_in + proj(u_out, t_i, t_i) / l_out;
        // off-diagonal: previous vertex (wraps)
        let ip = (i + p - 1) % p;
        let t_prev = Vec2::from_angle(theta[ip]).perp().scale(chain.radius(ip));
        h[i][ip] += -proj(u_in, t_i, t_prev) / l_in;
        // off-diagonal: next vertex
        let inx = (i + 1) % p;
        let t_next = Vec2::from_angle(theta[inx]).perp().scale(chain.radius(inx));
        h[i][inx] += -proj(u_out, t_i, t_next) / l_out;
    }
    h
}

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITERS: usize = 100;

/// Newton iteration on ∇L = 0 over the boundary angles, seeded at the
/// angle-bisector chords of the unfolded centers, with step halving when the
/// full step does not reduce |∇L|.
pub fn solve_orbit(table: &BilliardTable, itin: &Itinerary) -> Result<PeriodicOrbit, OrbitError> {
    itin.validate(table)?;
    let chain = Chain::new(table, itin);
    let p = itin.period();

    // seed: boundary point facing the bisector of the two neighbor centers
    let mut theta = Vec::with_capacity(p);
    for i in 0..p {
        let here = chain.centers[i];
        let prev = if i == 0 { chain.centers[p - 1].sub(chain.total_shift) } else { chain.centers[i - 1] };
        let next = if i + 1 == p { chain.centers[0].add(chain.total_shift) } else { chain.centers[i + 1] };
        let to_prev = prev.sub(here).normalized();
        let to_next = next.sub(here).normalized();
        let mut bis = to_prev.add(to_next);
        if bis.norm() < 1e-9 {
            bis = to_next;
        }
        theta.push(bis.y.atan2(bis.x));
    }

    let (mut grad, mut gnorm) = length_gradient(&chain, &theta);
    let mut iters = 0usize;
    while gnorm > NEWTON_TOL {
        if iters >= NEWTON_MAX_ITERS {
            return Err(OrbitError::NoConvergence(iters, gnorm));
        }
        iters += 1;
        let mut h = length_hessian(&chain, &theta);
        let mut rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
        let delta = solve_dense(&mut h, &mut rhs).ok_or(OrbitError::SingularSystem)?;
        let mut accepted = false;
        let mut alpha = 1.0;
        for _ in 0..40 {
            let trial: Vec<f64> = theta.iter().zip(&delta).map(|(t, d)| t + alpha * d).collect();
            let (g_new, gn_new) = length_gradient(&chain, &trial);
            if gn_new < gnorm {
                theta = trial;
                grad = g_new;
                gnorm = gn_new;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(OrbitError::NoConvergence(iters, gnorm));
        }
    }

    // report the certificate in arclength units (∂L/∂r = −(1/R) ∂L/∂θ)
    let grad_norm_r = grad
        .iter()
        .enumerate()
        .map(|(i, g)| (g / chain.radius(i)).powi(2))
        .sum::<f64>()
        .sqrt();
    finish_orbit(table, itin, &chain, &theta, grad_norm_r)
}

/// Validate the critical point as a billiard orbit and assemble the result.
fn finish_orbit(
    table: &BilliardTable,
    itin: &Itinerary,
    chain: &Chain,
    theta: &[f64],
    grad_norm: f64,
) -> Result<PeriodicOrbit, OrbitError> {
    let p = theta.len();
    let pts = chain.layout(theta);
    let mut states = Vec::with_capacity(p);
    let mut taus = Vec::with_capacity(p);
    let mut min_gap = f64::INFINITY;
    for i in 0..p {
        let here = pts[i + 1];
        let u_in = here.sub(pts[i]).normalized();
        let u_out = pts[i + 2].sub(here).normalized();
        let normal = Vec2::from_angle(theta[i]);
        // collision must arrive from the outside and leave to the outside
        if !(u_out.dot(normal) > 0.0 && u_in.dot(normal) < 0.0) {
            return Err(OrbitError::InvalidReflection);
        }
        let reflected = u_in.sub(normal.scale(2.0 * u_in.dot(normal)));
        if reflected.sub(u_out).norm() > 1e-9 {
            return Err(OrbitError::InvalidReflection);
        }
        let disc = chain.discs[i];
        // fold the unfolded boundary point onto the fundamental disc copy
        let local = table.discs()[disc].center.add(here.sub(chain.centers[i]));
        let state = table.state_from_hit(disc, local, u_out);
        min_gap = min_gap.min(state.angle_gap());
        taus.push(pts[i + 2].sub(here).norm());
        states.push(state);
    }

    // obstacle-free chords
    for i in 0..p {
        let a = pts[i + 1];
        let b = pts[i + 2];
        occlusion_check(table, chain, a, b, i)?;
    }

    // cycle derivative and its unstable eigenvalue; the determinant
    // telescopes to 1, with floating slack growing with the cosine ratios
    let mut m = Mat2::identity();
    for i in 0..p {
        let next = &states[(i + 1) % p];
        let step = table.derivative(&states[i], next, taus[i])?;
        m = step.mul(m);
    }
    debug_assert!((m.det().abs() - 1.0).abs() < 1e-6 * m.max_abs().max(1.0));
    let tr = m.trace().abs();
    if tr <= 2.0 {
        return Err(OrbitError::NotHyperbolic(tr));
    }
    let lambda_u = 0.5 * (tr + (tr * tr - 4.0).sqrt());
    Ok(PeriodicOrbit {
        itinerary: itin.clone(),
        points: states,
        flight_times: taus,
        expansion_rate: lambda_u.ln() / p as f64,
        min_angle_gap: min_gap,
        grad_norm,
    })
}

/// Reject the chord a→b when any scatterer copy other than its two endpoint
/// copies comes strictly closer than its radius.
fn occlusion_check(table: &BilliardTable, chain: &Chain, a: Vec2, b: Vec2, seg: usize) -> Result<(), OrbitError> {
    let p = chain.discs.len();
    let end_centers = [chain.centers[seg], if seg + 1 == p { chain.centers[0].add(chain.total_shift) } else { chain.centers[seg + 1] }];
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    let lo_x = a.x.min(b.x).floor() as i64 - 2;
    let hi_x = a.x.max(b.x).ceil() as i64 + 2;
    let lo_y = a.y.min(b.y).floor() as i64 - 2;
    let hi_y = a.y.max(b.y).ceil() as i64 + 2;
    for (di, d) in table.discs().iter().enumerate() {
        for sx in lo_x..=hi_x {
            for sy in lo_y..=hi_y {
                let c = d.center.add(Vec2::new(sx as f64, sy as f64));
                if end_centers.iter().any(|e| e.sub(c).norm() < 1e-9) {
                    continue;
                }
                let t = (c.sub(a).dot(ab) / len2).clamp(0.0, 1.0);
                let closest = a.add(ab.scale(t));
                if c.sub(closest).norm() < d.radius - 1e-12 {
                    return Err(OrbitError::Occluded(seg, di));
                }
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug)]
pub struct EnumOptions {
    /// Cap on the per-segment free path used to preselect transitions;
    /// segments of every short-period orbit on the shipped tables stay well
    /// below it. Raise it (up to tau_max) to search wider at a steep cost.
    pub chord_cap: f64,
}

impl Default for EnumOptions {
    fn default() -> Self {
        EnumOptions { chord_cap: 0.8 }
    }
}

#[derive(Debug, Default)]
pub struct OrbitSet {
    pub orbits: Vec<PeriodicOrbit>,
    pub attempted: usize,
    /// Itineraries whose solve failed, with the failure reason.
    pub failures: Vec<(Itinerary, String)>,
}

/// Enumerate all admissible itineraries up to period `max_period`, one
/// representative per cyclic/reversal class, solve each, and deduplicate the
/// solved orbits by their point multiset at 1e-7 resolution.
pub fn enumerate_orbits(table: &BilliardTable, max_period: usize, opts: EnumOptions) -> OrbitSet {
    let n = table.discs().len();
    // admissible transitions (disc i) -> (disc j, shift)
    let bound = (opts.chord_cap + 1.0).ceil() as i64;
    let mut trans: Vec<Vec<(usize, (i64, i64))>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            for sx in -bound..=bound {
                for sy in -bound..=bound {
                    if i == j && sx == 0 && sy == 0 {
                        continue;
                    }
                    let gap = table.discs()[j]
                        .center
                        .add(Vec2::new(sx as f64, sy as f64))
                        .sub(table.discs()[i].center)
                        .norm()
                        - table.discs()[i].radius
                        - table.discs()[j].radius;
                    if gap > 0.0 && gap <= opts.chord_cap {
                        trans[i].push((j, (sx, sy)));
                    }
                }
            }
        }
    }

    let mut set = OrbitSet::default();
    let mut seen = BTreeSet::new();
    let mut steps: Vec<(usize, (i64, i64))> = Vec::new();
    for p in 2..=max_period {
        for d0 in 0..n {
            steps.clear();
            dfs(table, &trans, d0, d0, p, &mut steps, &mut set, &mut seen);
        }
    }
    set
}

fn dfs(
    table: &BilliardTable,
    trans: &[Vec<(usize, (i64, i64))>],
    d0: usize,
    current: usize,
    remaining: usize,
    steps: &mut Vec<(usize, (i64, i64))>,
    out: &mut OrbitSet,
    seen: &mut BTreeSet<Vec<(usize, i64, i64)>>,
) {
    if remaining == 0 {
        if current != d0 {
            return;
        }
        let itin = Itinerary::new(steps.clone());
        if !itin.is_primitive() || itin.canonical() != itin {
            return; // repetitions and non-representatives are skipped
        }
        out.attempted += 1;
        match solve_orbit(table, &itin) {
            Ok(orbit) => {
                if seen.insert(orbit.point_key()) {
                    out.orbits.push(orbit);
                }
            }
            Err(e) => out.failures.push((itin, e.to_string())),
        }
        return;
    }
    for &(next, shift) in &trans[current] {
        // the shift belongs to the segment current -> next
        steps.push((current, shift));
        dfs(table, trans, d0, next, remaining - 1, steps, out, seen);
        steps.pop();
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrbitRow {
    pub itinerary: String,
    pub period: usize,
    pub expansion_rate: f64,
    pub min_angle_gap: f64,
    pub grad_norm: f64,
    pub non_grazing: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MmeReport {
    pub rows: Vec<OrbitRow>,
    pub no_data: bool,
    pub n_orbits: usize,
    pub mean_rate: f64,
    /// max − min of the per-period expansion rates over non-grazing orbits.
    /// Zero spread would indicate that the smooth measure is the unique
    /// adapted measure of maximal entropy, with the common value equal to
    /// the topological entropy.
    pub rate_spread: f64,
    pub min_rate: f64,
    pub max_rate: f64,
    pub log_lambda: f64,
    /// sup over p of (1/p) log #(orbits of period ≤ p): an orbit-growth
    /// lower-bound proxy, not the topological entropy.
    pub growth_proxy: f64,
}

pub fn mme_criterion_report(table: &BilliardTable, orbits: &[PeriodicOrbit]) -> Result<MmeReport, BilliardError> {
    let log_lambda = table.min_expansion_lambda()?.ln();
    let mut rows: Vec<OrbitRow> = orbits
        .iter()
        .map(|o| OrbitRow {
            itinerary: o.itinerary.label(),
            period: o.period(),
            expansion_rate: o.expansion_rate,
            min_angle_gap: o.min_angle_gap,
            grad_norm: o.grad_norm,
            non_grazing: o.is_non_grazing(GRAZE_TOLERANCE),
        })
        .collect();
    rows.sort_by(|a, b| (a.period, &a.itinerary).cmp(&(b.period, &b.itinerary)));
    let rates: Vec<f64> = rows.iter().filter(|r| r.non_grazing).map(|r| r.expansion_rate).collect();
    let no_data = rates.is_empty();
    let (mean, min, max) = if no_data {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        (
            mean,
            rates.iter().cloned().fold(f64::INFINITY, f64::min),
            rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        )
    };
    let max_p = rows.iter().map(|r| r.period).max().unwrap_or(0);
    let mut growth: f64 = 0.0;
    for p in 2..=max_p {
        let count = rows.iter().filter(|r| r.period <= p).count();
        if count > 0 {
            growth = growth.max((count as f64).ln() / p as f64);
        }
    }
    Ok(MmeReport {
        n_orbits: rows.len(),
        rows,
        no_data,
        mean_rate: mean,
        rate_spread: if no_data { f64::NAN } else { max - min },
        min_rate: min,
        max_rate: max,
        log_lambda,
        growth_proxy: growth,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PressureDirection {
    /// The honest estimator: expansion along the maintained unstable cone
    /// direction.
    Unstable,
    /// Test-of-test variant measuring the stable direction instead; the
    /// residual should land near 2λ⁺.
    StableMismatch,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PressureReport {
    pub residual: f64,
    pub lambda_plus_qr: f64,
    pub birkhoff_neg_phi: f64,
    pub steps: usize,
    pub skipped: usize,
}

/// Zero-pressure consistency: along one orbit, compare the Birkhoff mean of
/// −φ (log unstable expansion in the cos φ-weighted metric) with the top QR
/// exponent. Two estimators, one orbit, different algorithms; the Pesin
/// identity for the smooth measure makes both converge to λ⁺.
pub fn pressure_zero_check(
    table: &BilliardTable,
    start: CollisionState,
    n_steps: usize,
    direction: PressureDirection,
) -> Result<PressureReport, BilliardError> {
    match direction {
        PressureDirection::Unstable => pressure_unstable(table, start, n_steps),
        PressureDirection::StableMismatch => pressure_mismatched(table, start, n_steps),
    }
}

fn pressure_unstable(
    table: &BilliardTable,
    start: CollisionState,
    n_steps: usize,
) -> Result<PressureReport, BilliardError> {
    let mut state = start;
    let mut slope = table.discs()[state.disc].curvature();
    let mut q = Mat2::identity();
    // alignment warmup for both the cone slope and the QR frame
    for _ in 0..64 {
        let (next, tau) = table.collide(&state)?;
        let m = table.derivative(&state, &next, tau)?;
        slope = m.slope_image(slope);
        let (qn, _, _, _) = qr2(m.mul(q));
        q = qn;
        state = next;
    }
    let mut sum_phi = 0.0;
    let mut sum_log_r11 = 0.0;
    let mut used = 0usize;
    let mut skipped = 0usize;
    for _ in 0..n_steps {
        let (next, tau) = table.collide(&state)?;
        match table.derivative(&state, &next, tau) {
            Ok(m) => {
                sum_phi += table.p_expansion(&state, slope, tau).ln();
                slope = m.slope_image(slope);
                let (qn, r11, _, _) = qr2(m.mul(q));
                sum_log_r11 += r11.ln();
                q = qn;
                used += 1;
            }
            Err(BilliardError::NearGrazing(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
        state = next;
    }
    let lambda = sum_log_r11 / used as f64;
    let birkhoff = sum_phi / used as f64;
    Ok(PressureReport {
        residual: (birkhoff - lambda).abs(),
        lambda_plus_qr: lambda,
        birkhoff_neg_phi: birkhoff,
        steps: used,
        skipped,
    })
}

fn pressure_mismatched(
    table: &BilliardTable,
    start: CollisionState,
    n_steps: usize,
) -> Result<PressureReport, BilliardError> {
    let n = n_steps.min(200_000); // stores the matrices for the backward pass
    let mut state = start;
    let mut derivs = Vec::with_capacity(n);
    let mut flights = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n);
    for _ in 0..n {
        let (next, tau) = table.collide(&state)?;
        let m = table.derivative(&state, &next, tau)?;
        states.push(state);
        derivs.push(m);
        flights.push(tau);
        state = next;
    }
    // stable slope from the future: pull a generic slope backward
    let mut slopes = vec![0.0; n];
    let mut s = -table.k_min(); // any transverse seed works
    for k in (0..n).rev() {
        let inv = derivs[k].inverse().expect("billiard derivative is invertible");
        s = inv.slope_image(s);
        slopes[k] = s;
    }
    let mut q = Mat2::identity();
    let mut sum_log_r11 = 0.0;
    let mut sum_phi = 0.0;
    let skip = 64.min(n / 10);
    let mut used = 0usize;
    for k in 0..n {
        let (qn, r11, _, _) = qr2(derivs[k].mul(q));
        q = qn;
        if k >= skip {
            sum_log_r11 += r11.ln();
            sum_phi += table.p_expansion(&states[k], slopes[k], flights[k]).ln();
            used += 1;
        }
    }
    let lambda = sum_log_r11 / used as f64;
    let birkhoff = sum_phi / used as f64;
    Ok(PressureReport {
        residual: (birkhoff - lambda).abs(),
        lambda_plus_qr: lambda,
        birkhoff_neg_phi: birkhoff,
        steps: used,
        skipped: 0,
    })
}
