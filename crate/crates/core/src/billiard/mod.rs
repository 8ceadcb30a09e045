//! Finite-horizon dispersing billiards on the torus: disc scatterers,
//! collision solver by unfolding, one-step derivative in (r, φ) coordinates,
//! invariant cones and the minimum expansion factor.
//!
//! Conventions. Each disc boundary is parameterized clockwise by arclength r,
//! so the boundary point is c + R·(cos θ, sin θ) with θ = −r/R; the outward
//! normal n (into the table) is (cos θ, sin θ) and the tangent T = (sin θ,
//! −cos θ). φ ∈ [−π/2, π/2] is the angle from n to the post-collision
//! velocity v = cos φ · n + sin φ · T; |φ| = π/2 is a grazing collision.

mod derivative;
mod geometry;

pub use derivative::{ConeKind, HorizonReport};

use crate::linalg::Vec2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BilliardError {
    #[error("disc {0} has non-positive radius")]
    BadRadius(usize),
    #[error("disc center {0} must lie in [0,1)^2")]
    BadCenter(usize),
    #[error("discs {0} and {1} overlap (gap {2:.6}) across some lattice translate")]
    Overlap(usize, usize, f64),
    #[error("tau_max must be positive")]
    BadTauMax,
    #[error("a dispersing table needs at least two scatterers")]
    SingleScatterer,
    #[error("no collision within tau_max = {tau_max}: non-finite horizon or tau_max misconfigured")]
    HorizonExceeded { tau_max: f64 },
    #[error("grazing input state (|phi| = pi/2)")]
    GrazingInput,
    #[error("near-grazing image (cos phi' = {0:.3e}): derivative blows up")]
    NearGrazing(f64),
    #[error("parameter out of range: {0}")]
    BadParameter(&'static str),
}

/// Circular scatterer; curvature is 1/radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub center: Vec2,
    pub radius: f64,
}

impl Disc {
    pub fn curvature(&self) -> f64 {
        1.0 / self.radius
    }

    pub fn perimeter(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.radius
    }
}

/// Phase point (disc index, arclength r mod perimeter, reflection angle φ).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionState {
    pub disc: usize,
    pub r: f64,
    pub phi: f64,
}

impl CollisionState {
    /// Time-reversal involution (r, φ) ↦ (r, −φ).
    pub fn reversed(&self) -> CollisionState {
        CollisionState { disc: self.disc, r: self.r, phi: -self.phi }
    }

    /// π/2 − |φ|: the distance to the grazing set in the angle coordinate.
    pub fn angle_gap(&self) -> f64 {
        (std::f64::consts::FRAC_PI_2 - self.phi.abs()).max(0.0)
    }
}

/// Candidate scatterer copy used by the unfolding ray trace.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Candidate {
    pub disc: usize,
    pub center: Vec2,
    pub dist_from_cell: f64,
}

/// Immutable billiard table. Disjointness (including lattice translates) is
/// validated at construction; `tau_min` is the minimal boundary gap between
/// scatterer copies, a lower bound for every flight time.
#[derive(Clone, Debug)]
pub struct BilliardTable {
    discs: Vec<Disc>,
    tau_max: f64,
    tau_min: f64,
    k_min: f64,
    k_max: f64,
    pub(crate) candidates: Vec<Candidate>,
}

impl BilliardTable {
    pub fn new(discs: Vec<Disc>, tau_max: f64) -> Result<Self, BilliardError> {
        if !(tau_max > 0.0) {
            return Err(BilliardError::BadTauMax);
        }
        for (i, d) in discs.iter().enumerate() {
            if !(d.radius > 0.0) {
                return Err(BilliardError::BadRadius(i));
            }
            let c = d.center;
            if !(0.0..1.0).contains(&c.x) || !(0.0..1.0).contains(&c.y) {
                return Err(BilliardError::BadCenter(i));
            }
        }
        let mut tau_min = f64::INFINITY;
        for (i, di) in discs.iter().enumerate() {
            for (j, dj) in discs.iter().enumerate() {
                for sx in -1..=1i64 {
                    for sy in -1..=1i64 {
                        if i == j && sx == 0 && sy == 0 {
                            continue;
                        }
                        let shifted = dj.center.add(Vec2::new(sx as f64, sy as f64));
                        let gap = shifted.sub(di.center).norm() - di.radius - dj.radius;
                        if gap <= 0.0 && i <= j {
                            return Err(BilliardError::Overlap(i, j, gap));
                        }
                        tau_min = tau_min.min(gap);
                    }
                }
            }
        }
        let k_min = discs.iter().map(|d| d.curvature()).fold(f64::INFINITY, f64::min);
        let k_max = discs.iter().map(|d| d.curvature()).fold(0.0f64, f64::max);

        // unfolding candidates: every disc copy reachable from the unit cell
        let reach = tau_max + discs.iter().map(|d| d.radius).fold(0.0f64, f64::max) + 1.6;
        let m = reach.ceil() as i64 + 1;
        let cell = Vec2::new(0.5, 0.5);
        let mut candidates = Vec::new();
        for (idx, d) in discs.iter().enumerate() {
            for sx in -m..=m {
                for sy in -m..=m {
                    let center = d.center.add(Vec2::new(sx as f64, sy as f64));
                    let dist = center.sub(cell).norm();
                    if dist <= reach {
                        candidates.push(Candidate { disc: idx, center, dist_from_cell: dist });
                    }
                }
            }
        }
        candidates.sort_by(|a, b| a.dist_from_cell.total_cmp(&b.dist_from_cell));

        Ok(BilliardTable { discs, tau_max, tau_min, k_min, k_max, candidates })
    }

    pub fn discs(&self) -> &[Disc] {
        &self.discs
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }

    /// Minimal gap between scatterer copies: a lower bound for flight times,
    /// attained by the diametral chord of the closest pair when admissible.
    pub fn tau_min(&self) -> f64 {
        self.tau_min
    }

    pub fn k_min(&self) -> f64 {
        self.k_min
    }

    pub fn k_max(&self) -> f64 {
        self.k_max
    }

    /// Λ = 1 + 2·τ_min·K_min, the uniform lower bound for the one-step
    /// expansion of unstable-cone vectors in the cos φ-weighted metric.
    pub fn min_expansion_lambda(&self) -> Result<f64, BilliardError> {
        if self.discs.len() < 2 {
            return Err(BilliardError::SingleScatterer);
        }
        Ok(1.0 + 2.0 * self.tau_min * self.k_min)
    }

    pub fn boundary_angle(&self, s: &CollisionState) -> f64 {
        -s.r / self.discs[s.disc].radius
    }

    pub fn position(&self, s: &CollisionState) -> Vec2 {
        let d = &self.discs[s.disc];
        let th = self.boundary_angle(s);
        d.center.add(Vec2::new(th.cos(), th.sin()).scale(d.radius))
    }

    /// Outward normal (into the table).
    pub fn normal(&self, s: &CollisionState) -> Vec2 {
        let th = self.boundary_angle(s);
        Vec2::new(th.cos(), th.sin())
    }

    /// Clockwise unit tangent dq/dr.
    pub fn tangent(&self, s: &CollisionState) -> Vec2 {
        let th = self.boundary_angle(s);
        Vec2::new(th.sin(), -th.cos())
    }

    /// Post-collision velocity direction.
    pub fn velocity(&self, s: &CollisionState) -> Vec2 {
        let n = self.normal(s);
        let t = self.tangent(s);
        n.scale(s.phi.cos()).add(t.scale(s.phi.sin()))
    }

    /// State on disc `disc` whose boundary point is `point` (must lie on the
    /// circle) and whose outgoing velocity is `v`.
    pub fn state_from_hit(&self, disc: usize, point: Vec2, v: Vec2) -> CollisionState {
        let d = &self.discs[disc];
        let rel = point.sub(d.center);
        let th = rel.y.atan2(rel.x);
        let r = (-th * d.radius).rem_euclid(d.perimeter());
        let n = rel.normalized();
        let t = Vec2::new(th.sin(), -th.cos());
        let phi = v.dot(t).atan2(v.dot(n));
        CollisionState { disc, r, phi }
    }
}
