//! Exact torus endomorphism families: linear maps, sheared conjugates
//! E∘P∘h_t∘P⁻¹, and products of circle coverings. Forward map, derivative,
//! degree and full preimage enumeration.

mod lattice;
mod preorbit;
mod viana;

pub use lattice::{column_hnf, coset_representatives};
pub use preorbit::{sample_preorbit, PreOrbit};
pub use viana::VianaMap;

use crate::linalg::{Mat2, Vec2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("integer matrix must have nonzero determinant")]
    SingularMatrix,
    #[error("conjugating matrix must have determinant ±1, got {0}")]
    NotUnimodular(i64),
    #[error("circle factor multiplier must be nonzero")]
    ZeroFactor,
    #[error("coset enumeration produced {found} representatives, expected {expected}")]
    CosetEnumerationFailure { expected: usize, found: usize },
    #[error("map is not volume-preserving; the backward-walk law is undefined for it")]
    NotVolumePreserving,
    #[error("points do not form a backward branch: f(x_{{-k-1}}) != x_{{-k}} within tolerance")]
    InconsistentBranch,
    #[error("fiber interval is not forward-invariant with a positive margin (margin {0})")]
    NoTrappingInterval(f64),
    #[error("parameter out of range: {0}")]
    BadParameter(&'static str),
}

/// Floor-based reduction to [0, 1) with a 1e-12 snap to 0, so that values
/// like 0.999999999999942 coming out of an inverse branch land on 0 exactly.
pub fn reduce_mod1(v: f64) -> f64 {
    debug_assert!(v.is_finite());
    let r = v - v.floor();
    if r >= 1.0 - 1e-12 || r < 0.0 {
        0.0
    } else {
        r
    }
}

/// Point of the flat 2-torus, coordinates reduced to [0, 1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    x: f64,
    y: f64,
}

impl TorusPoint {
    pub fn new(x: f64, y: f64) -> Self {
        assert!(x.is_finite() && y.is_finite(), "torus coordinates must be finite");
        TorusPoint { x: reduce_mod1(x), y: reduce_mod1(y) }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn to_vec(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    /// Flat-torus distance (minimum image convention).
    pub fn dist(&self, o: &TorusPoint) -> f64 {
        let dx = (self.x - o.x).abs();
        let dy = (self.y - o.y).abs();
        let dx = dx.min(1.0 - dx);
        let dy = dy.min(1.0 - dy);
        dx.hypot(dy)
    }
}

/// 2x2 integer matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntMat2 {
    pub e11: i64,
    pub e12: i64,
    pub e21: i64,
    pub e22: i64,
}

impl IntMat2 {
    pub fn new(e11: i64, e12: i64, e21: i64, e22: i64) -> Result<Self, MapError> {
        let m = IntMat2 { e11, e12, e21, e22 };
        if m.det() == 0 {
            return Err(MapError::SingularMatrix);
        }
        Ok(m)
    }

    pub const fn det(&self) -> i64 {
        self.e11 * self.e22 - self.e12 * self.e21
    }

    pub fn gcd_entries(&self) -> i64 {
        fn gcd(a: i64, b: i64) -> i64 {
            if b == 0 { a.abs() } else { gcd(b, a % b) }
        }
        gcd(gcd(self.e11, self.e12), gcd(self.e21, self.e22))
    }

    pub fn to_mat2(&self) -> Mat2 {
        Mat2::new(self.e11 as f64, self.e12 as f64, self.e21 as f64, self.e22 as f64)
    }

    /// Exact integer inverse times determinant (the adjugate).
    pub fn adjugate(&self) -> IntMat2 {
        IntMat2 { e11: self.e22, e12: -self.e12, e21: -self.e21, e22: self.e11 }
    }

    /// Floating inverse; valid because det ≠ 0 by construction.
    pub fn inverse_mat2(&self) -> Mat2 {
        self.to_mat2().inverse().expect("nonzero integer determinant")
    }

    pub fn eigenvalues(&self) -> Eigenvalues {
        let tr = (self.e11 + self.e22) as f64;
        let det = self.det() as f64;
        let disc = tr * tr - 4.0 * det;
        if disc >= 0.0 {
            let s = disc.sqrt();
            Eigenvalues::Real(0.5 * (tr + s), 0.5 * (tr - s))
        } else {
            Eigenvalues::Complex { re: 0.5 * tr, im: 0.5 * (-disc).sqrt() }
        }
    }

    pub fn is_homothety(&self) -> bool {
        self.e12 == 0 && self.e21 == 0 && self.e11 == self.e22
    }

    pub fn has_unit_eigenvalue(&self) -> bool {
        // ±1 is an eigenvalue iff det(E ∓ I) = 0
        let d_plus = (self.e11 - 1) * (self.e22 - 1) - self.e12 * self.e21;
        let d_minus = (self.e11 + 1) * (self.e22 + 1) - self.e12 * self.e21;
        d_plus == 0 || d_minus == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Eigenvalues {
    Real(f64, f64),
    Complex { re: f64, im: f64 },
}

/// Periodic shear profile as a truncated Fourier series
/// s(x) = Σ_k sin_k · sin(2πkx) + cos_k · cos(2πkx), k = 1, 2, …
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShearFn {
    pub sin: Vec<f64>,
    pub cos: Vec<f64>,
}

impl ShearFn {
    /// The default shear s(x) = sin(2πx).
    pub fn sine() -> Self {
        ShearFn { sin: vec![1.0], cos: vec![] }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut v = 0.0;
        for (k, a) in self.sin.iter().enumerate() {
            v += a * (2.0 * std::f64::consts::PI * (k as f64 + 1.0) * x).sin();
        }
        for (k, b) in self.cos.iter().enumerate() {
            v += b * (2.0 * std::f64::consts::PI * (k as f64 + 1.0) * x).cos();
        }
        v
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let tau = 2.0 * std::f64::consts::PI;
        let mut v = 0.0;
        for (k, a) in self.sin.iter().enumerate() {
            let w = tau * (k as f64 + 1.0);
            v += a * w * (w * x).cos();
        }
        for (k, b) in self.cos.iter().enumerate() {
            let w = tau * (k as f64 + 1.0);
            v -= b * w * (w * x).sin();
        }
        v
    }
}

/// Torus endomorphism families with exact forward map and full preimage
/// enumeration. Degree equals |det E| for `Linear` and `Sheared` (the shear
/// and the unimodular conjugation are volume-preserving), and |m1·m2| for
/// `Product`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TorusEndo {
    Linear { e: IntMat2 },
    /// f_t = E ∘ P ∘ h_t ∘ P⁻¹ with h_t(x, y) = (x, y + t·s(x)), det P = ±1.
    Sheared { e: IntMat2, p: IntMat2, t: f64, shear: ShearFn },
    /// (x, y) ↦ (m1·x, m2·y): product of circle coverings.
    Product { m1: i64, m2: i64 },
}

impl TorusEndo {
    pub fn linear(e: IntMat2) -> Self {
        TorusEndo::Linear { e }
    }

    pub fn sheared(e: IntMat2, p: IntMat2, t: f64, shear: ShearFn) -> Result<Self, MapError> {
        if p.det().abs() != 1 {
            return Err(MapError::NotUnimodular(p.det()));
        }
        Ok(TorusEndo::Sheared { e, p, t, shear })
    }

    pub fn product(m1: i64, m2: i64) -> Result<Self, MapError> {
        if m1 == 0 || m2 == 0 {
            return Err(MapError::ZeroFactor);
        }
        Ok(TorusEndo::Product { m1, m2 })
    }

    pub fn degree(&self) -> usize {
        match self {
            TorusEndo::Linear { e } | TorusEndo::Sheared { e, .. } => e.det().unsigned_abs() as usize,
            TorusEndo::Product { m1, m2 } => (m1 * m2).unsigned_abs() as usize,
        }
    }

    /// |det df|, constant over the torus for all three families.
    pub fn det_jacobian_abs(&self) -> f64 {
        self.degree() as f64
    }

    /// All three families preserve Lebesgue measure (constant Jacobian
    /// determinant equal to the degree).
    pub fn is_volume_preserving(&self) -> bool {
        true
    }

    pub fn apply(&self, p: TorusPoint) -> TorusPoint {
        match self {
            TorusEndo::Linear { e } => {
                let x = e.e11 as f64 * p.x + e.e12 as f64 * p.y;
                let y = e.e21 as f64 * p.x + e.e22 as f64 * p.y;
                TorusPoint::new(x, y)
            }
            TorusEndo::Sheared { e, p: pm, t, shear } => {
                // evaluated in the stated factor order: P⁻¹, then h_t, then P, then E
                let pinv = pm.adjugate(); // det P = ±1, so adj = ±P⁻¹; sign fixed below
                let sgn = pm.det() as f64;
                let u = Vec2::new(
                    sgn * (pinv.e11 as f64 * p.x + pinv.e12 as f64 * p.y),
                    sgn * (pinv.e21 as f64 * p.x + pinv.e22 as f64 * p.y),
                );
                let ux = reduce_mod1(u.x);
                let sheared = Vec2::new(u.x, u.y + t * shear.eval(ux));
                let w = pm.to_mat2().apply(sheared);
                let out = e.to_mat2().apply(w);
                TorusPoint::new(out.x, out.y)
            }
            TorusEndo::Product { m1, m2 } => {
                TorusPoint::new(*m1 as f64 * p.x, *m2 as f64 * p.y)
            }
        }
    }

    pub fn jacobian(&self, p: TorusPoint) -> Mat2 {
        match self {
            TorusEndo::Linear { e } => e.to_mat2(),
            TorusEndo::Sheared { e, p: pm, t, shear } => {
                let pinv = pm.inverse_mat2();
                let u = pinv.apply(p.to_vec());
                let ux = reduce_mod1(u.x);
                let dh = Mat2::new(1.0, 0.0, t * shear.deriv(ux), 1.0);
                e.to_mat2().mul(pm.to_mat2()).mul(dh).mul(pinv)
            }
            TorusEndo::Product { m1, m2 } => Mat2::new(*m1 as f64, 0.0, 0.0, *m2 as f64),
        }
    }

    /// All `degree()` preimages of `p`, each mapping back to `p` within 1e-9.
    ///
    /// Linear: coset representatives of Z²/EZ² obtained from the Hermite
    /// normal form of E, pulled back through E⁻¹. Sheared: the E-branches
    /// are pushed through the exact inverse diffeomorphism P∘h_t⁻¹∘P⁻¹.
    pub fn preimages(&self, p: TorusPoint) -> Result<Vec<TorusPoint>, MapError> {
        let pts = match self {
            TorusEndo::Linear { e } => linear_preimages(e, p),
            TorusEndo::Sheared { e, p: pm, t, shear } => {
                let sgn = pm.det() as f64;
                let pinv_m = pm.adjugate();
                linear_preimages(e, p)
                    .into_iter()
                    .map(|w| {
                        let u = Vec2::new(
                            sgn * (pinv_m.e11 as f64 * w.x + pinv_m.e12 as f64 * w.y),
                            sgn * (pinv_m.e21 as f64 * w.x + pinv_m.e22 as f64 * w.y),
                        );
                        let ux = reduce_mod1(u.x);
                        let unsheared = Vec2::new(u.x, u.y - t * shear.eval(ux));
                        let y = pm.to_mat2().apply(unsheared);
                        TorusPoint::new(y.x, y.y)
                    })
                    .collect()
            }
            TorusEndo::Product { m1, m2 } => {
                let mut out = Vec::with_capacity(self.degree());
                for i in 0..m1.unsigned_abs() {
                    for j in 0..m2.unsigned_abs() {
                        let x = (p.x + i as f64) / *m1 as f64;
                        let y = (p.y + j as f64) / *m2 as f64;
                        out.push(TorusPoint::new(x, y));
                    }
                }
                out
            }
        };
        let expected = self.degree();
        if pts.len() != expected || has_duplicates(&pts) {
            return Err(MapError::CosetEnumerationFailure { expected, found: pts.len() });
        }
        Ok(pts)
    }
}

fn linear_preimages(e: &IntMat2, p: TorusPoint) -> Vec<TorusPoint> {
    let reps = coset_representatives(e);
    let inv = e.inverse_mat2();
    reps.into_iter()
        .map(|(i, j)| {
            let v = inv.apply(Vec2::new(p.x + i as f64, p.y + j as f64));
            TorusPoint::new(v.x, v.y)
        })
        .collect()
}

fn has_duplicates(pts: &[TorusPoint]) -> bool {
    for (i, a) in pts.iter().enumerate() {
        for b in pts.iter().skip(i + 1) {
            if a.dist(b) < 1e-9 {
                return true;
            }
        }
    }
    false
}

/// Per-condition report for the integer-matrix requirements of the sheared
/// volume-preserving family: E not a homothety, ±1 not an eigenvalue, and
/// |det E| / gcd(entries) > 4.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AcsMatrixReport {
    pub not_homothety: bool,
    pub no_unit_eigenvalue: bool,
    pub det_gcd_ratio: f64,
    pub det_gcd_exceeds_four: bool,
    pub eigenvalues: Eigenvalues,
    pub all_pass: bool,
}

pub fn validate_acs_matrix(e: &IntMat2) -> AcsMatrixReport {
    let not_homothety = !e.is_homothety();
    let no_unit_eigenvalue = !e.has_unit_eigenvalue();
    let ratio = e.det().abs() as f64 / e.gcd_entries() as f64;
    let det_gcd_exceeds_four = ratio > 4.0;
    AcsMatrixReport {
        not_homothety,
        no_unit_eigenvalue,
        det_gcd_ratio: ratio,
        det_gcd_exceeds_four,
        eigenvalues: e.eigenvalues(),
        all_pass: not_homothety && no_unit_eigenvalue && det_gcd_exceeds_four,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e61() -> IntMat2 {
        IntMat2::new(6, 1, 1, 1).unwrap()
    }

    #[test]
    fn linear_fixed_point() {
        let f = TorusEndo::linear(e61());
        let p = f.apply(TorusPoint::new(0.0, 0.0));
        assert_eq!((p.x(), p.y()), (0.0, 0.0));
    }

    #[test]
    fn linear_half_half() {
        // E (1/2, 1/2) = (3.5, 1.0) ≡ (0.5, 0.0)
        let f = TorusEndo::linear(e61());
        let p = f.apply(TorusPoint::new(0.5, 0.5));
        assert!((p.x() - 0.5).abs() < 1e-15);
        assert!(p.y().abs() < 1e-15);
    }

    #[test]
    fn sheared_at_t_zero_is_linear() {
        let p = IntMat2::new(1, 1, 0, 1).unwrap();
        let lin = TorusEndo::linear(e61());
        let sh = TorusEndo::sheared(e61(), p, 0.0, ShearFn::sine()).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                let q = TorusPoint::new(i as f64 / 10.0, j as f64 / 10.0);
                assert!(lin.apply(q).dist(&sh.apply(q)) < 1e-12);
            }
        }
    }

    #[test]
    fn sheared_jacobian_det_is_det_e() {
        let p = IntMat2::new(2, 1, 1, 1).unwrap();
        let f = TorusEndo::sheared(e61(), p, 6.0, ShearFn::sine()).unwrap();
        for k in 0..50 {
            let q = TorusPoint::new(0.37 * k as f64, 0.11 * k as f64);
            assert!((f.jacobian(q).det() - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_preimages_form_lattice() {
        let f = TorusEndo::linear(IntMat2::new(2, 0, 0, 3).unwrap());
        let mut got = f.preimages(TorusPoint::new(0.0, 0.0)).unwrap();
        got.sort_by(|a, b| (a.x(), a.y()).partial_cmp(&(b.x(), b.y())).unwrap());
        let mut expect = vec![];
        for i in 0..2 {
            for j in 0..3 {
                expect.push(TorusPoint::new(i as f64 / 2.0, j as f64 / 3.0));
            }
        }
        expect.sort_by(|a, b| (a.x(), a.y()).partial_cmp(&(b.x(), b.y())).unwrap());
        assert_eq!(got.len(), 6);
        for (g, e) in got.iter().zip(expect.iter()) {
            assert!(g.dist(e) < 1e-12);
        }
    }

    #[test]
    fn sheared_preimages_roundtrip_on_grid() {
        let p = IntMat2::new(1, 1, 0, 1).unwrap();
        let f = TorusEndo::sheared(e61(), p, 6.0, ShearFn::sine()).unwrap();
        for k in 0..50 {
            let q = TorusPoint::new((k as f64 * 0.613) % 1.0, (k as f64 * 0.279) % 1.0);
            let pres = f.preimages(q).unwrap();
            assert_eq!(pres.len(), 5);
            for y in pres {
                assert!(f.apply(y).dist(&q) < 1e-9);
            }
        }
    }

    #[test]
    fn transfer_operator_weights_sum_to_one() {
        let p = IntMat2::new(2, 1, 1, 1).unwrap();
        let f = TorusEndo::sheared(e61(), p, 4.0, ShearFn::sine()).unwrap();
        let q = TorusPoint::new(0.123, 0.789);
        let s: f64 = f
            .preimages(q)
            .unwrap()
            .iter()
            .map(|y| 1.0 / f.jacobian(*y).det().abs())
            .sum();
        assert!((s - 1.0).abs() < 1e-10);
    }

    #[test]
    fn acs_conditions_on_reference_matrix() {
        let r = validate_acs_matrix(&e61());
        assert!(r.all_pass);
        match r.eigenvalues {
            Eigenvalues::Real(l1, l2) => {
                let s = 29f64.sqrt();
                assert!((l1 - 0.5 * (7.0 + s)).abs() < 1e-12);
                assert!((l2 - 0.5 * (7.0 - s)).abs() < 1e-12);
            }
            _ => panic!("expected real eigenvalues"),
        }
    }

    #[test]
    fn homothety_fails() {
        let r = validate_acs_matrix(&IntMat2::new(2, 0, 0, 2).unwrap());
        assert!(!r.not_homothety);
        assert!(!r.all_pass);
    }

    #[test]
    fn small_det_gcd_ratio_fails() {
        let r = validate_acs_matrix(&IntMat2::new(2, 1, 1, 1).unwrap());
        assert!((r.det_gcd_ratio - 1.0).abs() < 1e-15);
        assert!(!r.det_gcd_exceeds_four);
    }
}
