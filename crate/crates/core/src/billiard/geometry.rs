//! Collision solving by unfolding: intersect the outgoing ray with every
//! scatterer copy within reach, earliest positive hit wins, elastic
//! reflection at the hit point.

use super::{BilliardError, BilliardTable, CollisionState};
use crate::linalg::Vec2;

/// Discriminant guard for the ray-circle quadratic: tangencies closer than
/// this are treated as misses (grazing lines carry no transverse collision).
const DISC_GUARD: f64 = 1e-14;
/// Minimal advance along the ray, excluding the departure point itself.
const T_MIN: f64 = 1e-12;

impl BilliardTable {
    /// One step of the billiard map. Returns the next collision and the
    /// flight time (= chord length at unit speed).
    pub fn collide(&self, s: &CollisionState) -> Result<(CollisionState, f64), BilliardError> {
        if s.angle_gap() <= 0.0 {
            return Err(BilliardError::GrazingInput);
        }
        let q = self.position(s);
        let v = self.velocity(s);

        let mut best_t = f64::INFINITY;
        let mut best: Option<(usize, Vec2)> = None;
        for cand in &self.candidates {
            // candidates are sorted by distance from the cell center; once
            // even the nearest boundary point cannot beat best_t, stop.
            let radius = self.discs()[cand.disc].radius;
            if cand.dist_from_cell - radius - 1.0 > best_t {
                break;
            }
            let oc = q.sub(cand.center);
            let b = oc.dot(v);
            let c = oc.dot(oc) - radius * radius;
            let disc = b * b - c;
            if disc <= DISC_GUARD {
                continue;
            }
            let t = -b - disc.sqrt();
            if t > T_MIN && t < best_t {
                best_t = t;
                best = Some((cand.disc, cand.center));
            }
        }

        match best {
            Some((disc, center)) if best_t <= self.tau_max() => {
                let hit = q.add(v.scale(best_t));
                let n = hit.sub(center).normalized();
                let reflected = v.sub(n.scale(2.0 * v.dot(n)));
                // fold the hit point back to the fundamental copy of the disc
                let local = self.discs()[disc].center.add(hit.sub(center));
                let next = self.state_from_hit(disc, local, reflected);
                Ok((next, best_t))
            }
            _ => Err(BilliardError::HorizonExceeded { tau_max: self.tau_max() }),
        }
    }

    /// One step of the inverse billiard map via the time-reversal involution
    /// f⁻¹ = R ∘ f ∘ R with R(r, φ) = (r, −φ). The returned flight time is
    /// the one traversed backwards.
    pub fn collide_backward(&self, s: &CollisionState) -> Result<(CollisionState, f64), BilliardError> {
        let (next, tau) = self.collide(&s.reversed())?;
        Ok((next.reversed(), tau))
    }
}
