//! One-step derivative of the billiard map in (r, φ) coordinates, invariant
//! cones, the cos φ-weighted expansion, singularity diagnostics and the
//! heuristic finite-horizon certificate.

use super::{BilliardError, BilliardTable, CollisionState};
use crate::linalg::Mat2;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConeKind {
    Stable,
    Unstable,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HorizonReport {
    pub pass: bool,
    pub worst_free_path: f64,
    pub rays: usize,
    pub exceeded: usize,
}

impl BilliardTable {
    /// The 2x2 derivative of the step `state ↦ next` with flight time `tau`,
    /// in (dr, dφ) coordinates:
    ///
    ///   df = −(1/cos φ′) [[τK + cos φ,              τ        ],
    ///                     [τKK′ + K cos φ′ + K′ cos φ, τK′ + cos φ′]]
    ///
    /// where K, K′ are the curvatures at the two collisions. The leading
    /// sign is forced by the clockwise arclength charts (both boundaries
    /// parameterized in the same rotational sense face each other with
    /// opposite orientations). det df = cos φ / cos φ′ identically, which is
    /// the invariance of the smooth measure cos φ dr dφ.
    pub fn derivative(
        &self,
        state: &CollisionState,
        next: &CollisionState,
        tau: f64,
    ) -> Result<Mat2, BilliardError> {
        let cphi = state.phi.cos();
        let cphi1 = next.phi.cos();
        if cphi1 < 1e-12 {
            return Err(BilliardError::NearGrazing(cphi1));
        }
        let k = self.discs()[state.disc].curvature();
        let k1 = self.discs()[next.disc].curvature();
        let s = -1.0 / cphi1;
        Ok(Mat2::new(
            s * (tau * k + cphi),
            s * tau,
            s * (tau * k * k1 + k * cphi1 + k1 * cphi),
            s * (tau * k1 + cphi1),
        ))
    }

    /// Slope test against the invariant cones:
    /// unstable — K ≤ dφ/dr ≤ K + cos φ / τ(f⁻¹x) (pass the *previous*
    /// flight time); stable — −K − cos φ / τ(x) ≤ dφ/dr ≤ −K (pass the
    /// *next* flight time). Boundaries included.
    pub fn cone_membership(&self, state: &CollisionState, slope: f64, kind: ConeKind, tau: f64) -> bool {
        let k = self.discs()[state.disc].curvature();
        let spread = state.phi.cos() / tau;
        match kind {
            ConeKind::Unstable => {
                if slope.is_infinite() {
                    return false;
                }
                k <= slope && slope <= k + spread
            }
            ConeKind::Stable => {
                if slope.is_infinite() {
                    return false;
                }
                -k - spread <= slope && slope <= -k
            }
        }
    }

    /// Expansion factor of a tangent line of slope dφ/dr under one step, in
    /// the cos φ-weighted transverse metric p(dr, dφ) = cos φ |dr|:
    /// |τ(K + slope) + cos φ| / cos φ. For unstable-cone slopes this is
    /// ≥ 1 + 2τK/cos φ ≥ Λ; for stable-cone slopes it is a contraction.
    pub fn p_expansion(&self, state: &CollisionState, slope: f64, tau: f64) -> f64 {
        let k = self.discs()[state.disc].curvature();
        let cphi = state.phi.cos();
        (tau * (k + slope) + cphi).abs() / cphi
    }

    /// Diagnostic proxy for the distance to the singular set: the angle gap
    /// of the state itself and of its forward image, whichever is smaller.
    /// Not a metric-exact distance (the r component of the metric is
    /// ignored); the log-integrability behavior is what matters and the
    /// angle gap dominates it.
    pub fn singularity_distance(&self, s: &CollisionState) -> f64 {
        let own = s.angle_gap();
        if own <= 0.0 {
            return 0.0;
        }
        match self.collide(s) {
            Ok((next, _)) => own.min(next.angle_gap()),
            Err(_) => own,
        }
    }

    /// Heuristic finite-horizon certificate: casts a grid of boundary rays
    /// and reports the longest observed free path; fails if any ray exceeds
    /// tau_max. A passing report is evidence, not a proof.
    pub fn finite_horizon_check(&self, n_rays: usize) -> Result<HorizonReport, BilliardError> {
        if n_rays < 1000 {
            return Err(BilliardError::BadParameter("n_rays must be at least 1000"));
        }
        let per_disc = n_rays / self.discs().len();
        let n_r = (per_disc as f64).sqrt().ceil() as usize;
        let n_phi = n_r;
        let mut worst: f64 = 0.0;
        let mut exceeded = 0usize;
        let mut rays = 0usize;
        for (disc, d) in self.discs().iter().enumerate() {
            let perim = d.perimeter();
            for i in 0..n_r {
                let r = perim * (i as f64 + 0.5) / n_r as f64;
                for j in 0..n_phi {
                    let phi = (std::f64::consts::FRAC_PI_2 - 1e-3)
                        * (2.0 * (j as f64 + 0.5) / n_phi as f64 - 1.0);
                    rays += 1;
                    match self.collide(&CollisionState { disc, r, phi }) {
                        Ok((_, tau)) => worst = worst.max(tau),
                        Err(BilliardError::HorizonExceeded { .. }) => exceeded += 1,
                        Err(e) => return Err(e),
                    }
                }
            }
        }
        Ok(HorizonReport { pass: exceeded == 0, worst_free_path: worst, rays, exceeded })
    }
}
