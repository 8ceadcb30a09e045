//! Finite backward branches of the natural extension, sampled according to
//! the preimage-weighted disintegration of Lebesgue measure: each backward
//! step picks a preimage y with probability |det df_y|⁻¹ (these sum to 1
//! exactly for the volume-preserving families).

use super::{MapError, TorusEndo, TorusPoint};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A backward branch (x₀, x₋₁, …, x₋ₙ) with its branch weight
/// ∏ |det df|⁻¹ along the chosen preimages.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PreOrbit {
    points: Vec<TorusPoint>,
    weight: f64,
}

impl PreOrbit {
    pub fn trivial(x: TorusPoint) -> Self {
        PreOrbit { points: vec![x], weight: 1.0 }
    }

    /// Build a branch from explicit points (points[k] = x₋ₖ), validating the
    /// composition property and attaching the |det df|⁻¹ weights.
    pub fn from_points(map: &TorusEndo, points: Vec<TorusPoint>) -> Result<Self, MapError> {
        assert!(!points.is_empty());
        let weight = map.det_jacobian_abs().powi(-((points.len() - 1) as i32));
        let branch = PreOrbit { points, weight };
        if !branch.is_consistent(map, 1e-9) {
            return Err(MapError::InconsistentBranch);
        }
        Ok(branch)
    }

    pub fn base(&self) -> TorusPoint {
        self.points[0]
    }

    pub fn depth(&self) -> usize {
        self.points.len() - 1
    }

    /// points[k] = x₋ₖ.
    pub fn points(&self) -> &[TorusPoint] {
        &self.points
    }

    pub fn deepest(&self) -> TorusPoint {
        *self.points.last().unwrap()
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Extend on the shallow end: the pre-orbit of f(x₀) passing through
    /// this branch.
    pub fn shifted_forward(&self, map: &TorusEndo) -> PreOrbit {
        let mut points = Vec::with_capacity(self.points.len() + 1);
        points.push(map.apply(self.base()));
        points.extend_from_slice(&self.points);
        PreOrbit { points, weight: self.weight / map.det_jacobian_abs() }
    }

    /// Composition check: f(x₋ₖ₋₁) = x₋ₖ within `tol` for all k.
    pub fn is_consistent(&self, map: &TorusEndo, tol: f64) -> bool {
        self.points
            .windows(2)
            .all(|w| map.apply(w[1]).dist(&w[0]) <= tol)
    }
}

/// Backward random walk of length `depth` from `x`. The branch weight is
/// deg⁻ᵈᵉᵖᵗʰ exactly (constant Jacobian determinant), matching the marginal
/// law of the natural-extension disintegration over depth-n cylinders.
pub fn sample_preorbit(
    map: &TorusEndo,
    x: TorusPoint,
    depth: usize,
    rng: &mut ChaCha8Rng,
) -> Result<PreOrbit, MapError> {
    if !map.is_volume_preserving() {
        return Err(MapError::NotVolumePreserving);
    }
    let deg = map.degree();
    let mut points = Vec::with_capacity(depth + 1);
    points.push(x);
    let mut weight = 1.0;
    let mut current = x;
    for _ in 0..depth {
        let branches = map.preimages(current)?;
        debug_assert_eq!(branches.len(), deg);
        // uniform choice == |det df|^{-1}-weighted choice for constant det
        let pick = rng.gen_range(0..deg);
        current = branches[pick];
        weight /= map.det_jacobian_abs();
        points.push(current);
    }
    Ok(PreOrbit { points, weight })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{IntMat2, ShearFn};
    use rand::SeedableRng;

    fn sheared() -> TorusEndo {
        TorusEndo::sheared(
            IntMat2::new(6, 1, 1, 1).unwrap(),
            IntMat2::new(1, 0, 0, 1).unwrap(),
            6.0,
            ShearFn::sine(),
        )
        .unwrap()
    }

    #[test]
    fn depth_zero_is_trivial() {
        let f = sheared();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = sample_preorbit(&f, TorusPoint::new(0.3, 0.4), 0, &mut rng).unwrap();
        assert_eq!(p.depth(), 0);
        assert_eq!(p.weight(), 1.0);
        assert_eq!(p.base(), TorusPoint::new(0.3, 0.4));
    }

    #[test]
    fn depth_three_weight_exact() {
        let f = sheared();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = sample_preorbit(&f, TorusPoint::new(0.3, 0.4), 3, &mut rng).unwrap();
        assert_eq!(p.weight(), 1.0 / 125.0);
        assert!(p.is_consistent(&f, 1e-9));
    }

    #[test]
    fn depth_one_branch_frequencies_binomial() {
        let f = sheared();
        let x = TorusPoint::new(0.21, 0.77);
        let branches = f.preimages(x).unwrap();
        let mut counts = vec![0usize; branches.len()];
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..n {
            let p = sample_preorbit(&f, x, 1, &mut rng).unwrap();
            let hit = branches
                .iter()
                .position(|b| b.dist(&p.deepest()) < 1e-9)
                .expect("sampled preimage must be one of the enumerated branches");
            counts[hit] += 1;
        }
        let q = 1.0 / branches.len() as f64;
        let sigma = (q * (1.0 - q) / n as f64).sqrt();
        for c in counts {
            let freq = c as f64 / n as f64;
            assert!(
                (freq - q).abs() <= 3.0 * sigma,
                "branch frequency {freq} outside 3 sigma of {q}"
            );
        }
    }
}
