//! Small fixed-size linear algebra: 2-vectors, 2x2 matrices, and a dense
//! Gaussian solver for the orbit-solver Newton systems.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        Vec2::new(self.x / n, self.y / n)
    }

    /// Rotation by +90 degrees.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn scale(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }

    pub fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }

    pub fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }

    /// Angle between the *lines* spanned by the two vectors, in [0, pi/2].
    /// atan2-based: accurate down to machine precision near 0, where the
    /// acos formulation has a ~1e-8 noise floor.
    pub fn line_angle(self, o: Vec2) -> f64 {
        let cross = self.x * o.y - self.y * o.x;
        let dot = self.dot(o);
        cross.abs().atan2(dot.abs())
    }

    pub fn from_angle(theta: f64) -> Vec2 {
        Vec2::new(theta.cos(), theta.sin())
    }
}

/// Row-major 2x2 real matrix [[a, b], [c, d]].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { a, b, c, d }
    }

    pub const fn identity() -> Self {
        Mat2::new(1.0, 0.0, 0.0, 1.0)
    }

    pub fn det(self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(self) -> f64 {
        self.a + self.d
    }

    pub fn inverse(self) -> Option<Mat2> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some(Mat2::new(self.d / det, -self.b / det, -self.c / det, self.a / det))
    }

    pub fn mul(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }

    pub fn apply(self, v: Vec2) -> Vec2 {
        Vec2::new(self.a * v.x + self.b * v.y, self.c * v.x + self.d * v.y)
    }

    pub fn transpose(self) -> Mat2 {
        Mat2::new(self.a, self.c, self.b, self.d)
    }

    pub fn scale(self, s: f64) -> Mat2 {
        Mat2::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }

    pub fn max_abs(self) -> f64 {
        self.a.abs().max(self.b.abs()).max(self.c.abs()).max(self.d.abs())
    }

    /// Singular values, largest first.
    pub fn singular_values(self) -> (f64, f64) {
        let m = self.transpose().mul(self);
        // m is symmetric [[p, q], [q, r]]
        let (p, q, r) = (m.a, m.b, m.d);
        let mean = 0.5 * (p + r);
        let delta = (0.25 * (p - r) * (p - r) + q * q).sqrt();
        let l1 = (mean + delta).max(0.0);
        let l2 = (mean - delta).max(0.0);
        (l1.sqrt(), l2.sqrt())
    }

    /// Right singular vector belonging to the *smaller* singular value:
    /// the most contracted input direction.
    pub fn most_contracted_direction(self) -> Vec2 {
        let m = self.transpose().mul(self);
        let (p, q, r) = (m.a, m.b, m.d);
        let mean = 0.5 * (p + r);
        let delta = (0.25 * (p - r) * (p - r) + q * q).sqrt();
        let lmin = mean - delta;
        // (M^T M - lmin I) v = 0; pick the numerically larger row.
        let r1 = Vec2::new(p - lmin, q);
        let r2 = Vec2::new(q, r - lmin);
        let row = if r1.norm() >= r2.norm() { r1 } else { r2 };
        if row.norm() == 0.0 {
            // isotropic matrix, any direction works
            return Vec2::new(1.0, 0.0);
        }
        Vec2::new(-row.y, row.x).normalized()
    }

    /// Image of a tangent-line slope under the matrix (projective action).
    /// Returns `f64::INFINITY` for a vertical image.
    pub fn slope_image(self, slope: f64) -> f64 {
        if slope.is_infinite() {
            if self.b == 0.0 {
                return f64::INFINITY;
            }
            return self.d / self.b;
        }
        let den = self.a + self.b * slope;
        let num = self.c + self.d * slope;
        if den == 0.0 {
            return f64::INFINITY;
        }
        num / den
    }
}

/// Gram-Schmidt QR of a 2x2 matrix: returns (Q, r11, r12, r22) with
/// Q orthonormal and R upper triangular, r11 > 0, r22 > 0.
pub fn qr2(m: Mat2) -> (Mat2, f64, f64, f64) {
    let b1 = Vec2::new(m.a, m.c);
    let b2 = Vec2::new(m.b, m.d);
    let r11 = b1.norm();
    let q1 = Vec2::new(b1.x / r11, b1.y / r11);
    let r12 = q1.dot(b2);
    let w = b2.sub(q1.scale(r12));
    let r22 = w.norm();
    let q2 = if r22 > 0.0 {
        Vec2::new(w.x / r22, w.y / r22)
    } else {
        q1.perp()
    };
    (Mat2::new(q1.x, q2.x, q1.y, q2.y), r11, r12, r22)
}

/// Solve `a x = b` in place by Gaussian elimination with partial pivoting.
/// Returns `None` when the pivot collapses (singular system).
pub fn solve_dense(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert!(a.len() == n && a.iter().all(|r| r.len() == n));
    for col in 0..n {
        let (piv, mx) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))?;
        if mx < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in (col + 1)..n {
            let f = a[r][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for c in (row + 1)..n {
            s -= a[row][c] * x[c];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qr_reconstructs() {
        let m = Mat2::new(1.0, 2.0, -3.0, 0.5);
        let (q, r11, r12, r22) = qr2(m);
        let r = Mat2::new(r11, r12, 0.0, r22);
        let back = q.mul(r);
        assert!((back.a - m.a).abs() < 1e-12);
        assert!((back.b - m.b).abs() < 1e-12);
        assert!((back.c - m.c).abs() < 1e-12);
        assert!((back.d - m.d).abs() < 1e-12);
        // Q orthonormal
        let qtq = q.transpose().mul(q);
        assert!((qtq.a - 1.0).abs() < 1e-12 && (qtq.d - 1.0).abs() < 1e-12);
        assert!(qtq.b.abs() < 1e-12 && qtq.c.abs() < 1e-12);
    }

    #[test]
    fn singular_values_of_diagonal() {
        let m = Mat2::new(3.0, 0.0, 0.0, -0.5);
        let (s1, s2) = m.singular_values();
        assert!((s1 - 3.0).abs() < 1e-12);
        assert!((s2 - 0.5).abs() < 1e-12);
        let v = m.most_contracted_direction();
        assert!(v.x.abs() < 1e-12 && (v.y.abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dense_solver_roundtrip() {
        let mut a = vec![
            vec![2.0, 1.0, 0.0],
            vec![1.0, 3.0, 1.0],
            vec![0.0, 1.0, 4.0],
        ];
        let x_true = [1.0, -2.0, 0.5];
        let mut b = vec![
            2.0 * 1.0 + 1.0 * -2.0,
            1.0 + 3.0 * -2.0 + 0.5,
            -2.0 + 4.0 * 0.5,
        ];
        let x = solve_dense(&mut a, &mut b).unwrap();
        for (xi, ti) in x.iter().zip(x_true.iter()) {
            assert!((xi - ti).abs() < 1e-12);
        }
    }
}
