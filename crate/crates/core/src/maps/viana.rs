//! Viana skew products (θ, t) ↦ (dθ, a0 + α sin(2πθ) − t²) on S¹ × I0.

use super::{reduce_mod1, MapError};
use crate::linalg::Mat2;
use serde::{Deserialize, Serialize};

/// Quadratic-family fixed point t* = (−1 + √(1+4a)) / 2.
fn positive_fixed_point(a: f64) -> f64 {
    0.5 * (-1.0 + (1.0 + 4.0 * a).sqrt())
}

/// Solve for a0 ∈ (1, 2) such that the critical orbit of t ↦ a0 − t² is
/// preperiodic: the second image of 0 lands on −t*, hence the third image
/// is the fixed point t*. Bisection on g(a) = a − a² + t*(a).
pub fn preperiodic_a0() -> f64 {
    let g = |a: f64| a - a * a + positive_fixed_point(a);
    let (mut lo, mut hi) = (1.0f64, 2.0f64);
    debug_assert!(g(lo) > 0.0 && g(hi) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The Viana map family. The fiber interval I0 is a closed-form trapping
/// interval around the exactly invariant [a0−α−(a0+α)², a0+α], inflated so
/// that f(S¹×I0) lands in the interior with a positive margin; the margin is
/// verified on a boundary grid at construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VianaMap {
    a0: f64,
    d: u32,
    alpha: f64,
    i0: (f64, f64),
}

impl VianaMap {
    pub fn new(d: u32, alpha: f64) -> Result<Self, MapError> {
        Self::with_a0(preperiodic_a0(), d, alpha)
    }

    pub fn with_a0(a0: f64, d: u32, alpha: f64) -> Result<Self, MapError> {
        if !(1.0 < a0 && a0 < 2.0) {
            return Err(MapError::BadParameter("a0 must lie in (1, 2)"));
        }
        if d < 2 {
            return Err(MapError::BadParameter("d must be at least 2"));
        }
        if !(alpha > 0.0) {
            return Err(MapError::BadParameter("alpha must be positive"));
        }
        let upper = a0 + alpha;
        let lower = a0 - alpha - upper * upper;
        let d_top = alpha;
        let d_bot = 2.0 * upper * alpha + alpha * alpha + alpha;
        let i0 = (lower - d_bot, upper + d_top);
        if i0.0 <= -2.0 || i0.1 >= 2.0 {
            return Err(MapError::BadParameter("alpha too large: trapping interval leaves (-2, 2)"));
        }
        let map = VianaMap { a0, d, alpha, i0 };
        let margin = map.trapping_margin(1000);
        if margin <= 0.0 {
            return Err(MapError::NoTrappingInterval(margin));
        }
        Ok(map)
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn i0(&self) -> (f64, f64) {
        self.i0
    }

    pub fn degree(&self) -> usize {
        self.d as usize
    }

    /// Worst-case distance of images of a boundary grid of S¹×I0 (plus the
    /// interior extremes t = 0 and t = a0+α) to the boundary of I0.
    pub fn trapping_margin(&self, grid: usize) -> f64 {
        let (lo, hi) = self.i0;
        let mut margin = f64::INFINITY;
        let ts = [lo, hi, 0.0, self.a0 + self.alpha];
        for k in 0..grid {
            let theta = k as f64 / grid as f64;
            for &t in &ts {
                let (_, t1) = self.apply((theta, t));
                margin = margin.min(t1 - lo).min(hi - t1);
            }
        }
        margin
    }

    pub fn apply(&self, p: (f64, f64)) -> (f64, f64) {
        let (theta, t) = p;
        let theta1 = reduce_mod1(self.d as f64 * theta);
        let t1 = self.a0 + self.alpha * (2.0 * std::f64::consts::PI * theta).sin() - t * t;
        (theta1, t1)
    }

    /// d f at (θ, t) = [[d, 0], [2πα cos(2πθ), −2t]]; singular on the
    /// critical set S¹ × {0}.
    pub fn jacobian(&self, p: (f64, f64)) -> Mat2 {
        let (theta, t) = p;
        Mat2::new(
            self.d as f64,
            0.0,
            2.0 * std::f64::consts::PI * self.alpha * (2.0 * std::f64::consts::PI * theta).cos(),
            -2.0 * t,
        )
    }

    /// Branch inversion: all (θ, ±√(a0 + α sin(2πθ) − t′)) with dθ ≡ θ′,
    /// restricted to S¹×I0. Between 0 and 2d points; empty is allowed.
    pub fn preimages(&self, p: (f64, f64)) -> Vec<(f64, f64)> {
        let (theta1, t1) = p;
        let (lo, hi) = self.i0;
        let mut out = Vec::new();
        for j in 0..self.d {
            let theta = reduce_mod1((theta1 + j as f64) / self.d as f64);
            let radicand = self.a0 + self.alpha * (2.0 * std::f64::consts::PI * theta).sin() - t1;
            if radicand < 0.0 {
                continue;
            }
            let r = radicand.sqrt();
            if r == 0.0 {
                if lo <= 0.0 && 0.0 <= hi {
                    out.push((theta, 0.0));
                }
                continue;
            }
            for t in [r, -r] {
                if lo <= t && t <= hi {
                    out.push((theta, t));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn a0_makes_critical_orbit_preperiodic() {
        let a0 = preperiodic_a0();
        assert!(1.0 < a0 && a0 < 2.0);
        let q = |t: f64| a0 - t * t;
        let tstar = positive_fixed_point(a0);
        let o2 = q(q(0.0));
        assert!((o2 + tstar).abs() < 1e-12);
        assert!((q(o2) - tstar).abs() < 1e-12);
        assert!((q(tstar) - tstar).abs() < 1e-12);
    }

    #[test]
    fn trapping_interval_has_margin() {
        let f = VianaMap::new(16, 0.01).unwrap();
        let (lo, hi) = f.i0();
        assert!(-2.0 < lo && hi < 2.0);
        assert!(f.trapping_margin(1000) > 0.0);
    }

    #[test]
    fn jacobian_determinant_identity() {
        let f = VianaMap::new(16, 0.01).unwrap();
        for k in 0..100 {
            let p = (k as f64 * 0.017 % 1.0, -0.8 + 0.02 * k as f64 % 1.5);
            let j = f.jacobian(p);
            assert!((j.det() - (-2.0 * f.d() as f64 * p.1)).abs() < 1e-12);
        }
        // critical set
        assert_eq!(f.jacobian((0.3, 0.0)).det(), 0.0);
    }

    #[test]
    fn preimages_roundtrip_and_counts() {
        let f = VianaMap::new(16, 0.01).unwrap();
        // t' above the reachable range: no preimages
        assert!(f.preimages((0.2, f.a0() + f.alpha() + 0.1)).is_empty());
        // generic point: every preimage round-trips
        let p = (0.37, 0.5);
        let pres = f.preimages(p);
        assert!(!pres.is_empty());
        for y in &pres {
            let img = f.apply(*y);
            assert!((img.0 - p.0).abs().min(1.0 - (img.0 - p.0).abs()) < 1e-9);
            assert!((img.1 - p.1).abs() < 1e-9);
        }
        // both square-root branches alive at every angle branch: 2d preimages
        let full = f.preimages((0.37, 1.0));
        assert_eq!(full.len(), 2 * f.degree());
    }
}
