//! Exact integer lattice arithmetic for preimage enumeration: column-style
//! Hermite normal form and coset representatives of Z²/EZ².

use super::IntMat2;

/// Column Hermite normal form: returns lower-triangular H = [[a, 0], [b, c]]
/// with a, c > 0 and HZ² = EZ². Computed by exact integer column operations
/// (a gcd sweep on the top row), so no floating-point lattice errors.
pub fn column_hnf(e: &IntMat2) -> IntMat2 {
    // columns of E
    let mut c1 = (e.e11, e.e21);
    let mut c2 = (e.e12, e.e22);
    // Euclidean algorithm on the top row entries.
    while c2.0 != 0 {
        let q = c1.0.div_euclid(c2.0);
        let r = (c1.0 - q * c2.0, c1.1 - q * c2.1);
        c1 = c2;
        c2 = r;
    }
    // top row is (g, 0); normalize signs of the diagonal
    if c1.0 < 0 {
        c1 = (-c1.0, -c1.1);
    }
    if c2.1 < 0 {
        c2 = (0, -c2.1);
    }
    IntMat2 { e11: c1.0, e12: 0, e21: c1.1, e22: c2.1 }
}

/// Representatives of the |det E| cosets of EZ² in Z², via the diagonal of
/// the column HNF: {(i, j) : 0 ≤ i < a, 0 ≤ j < c}.
pub fn coset_representatives(e: &IntMat2) -> Vec<(i64, i64)> {
    let h = column_hnf(e);
    debug_assert_eq!(h.det().abs(), e.det().abs());
    let (a, c) = (h.e11, h.e22);
    let mut reps = Vec::with_capacity((a * c) as usize);
    for i in 0..a {
        for j in 0..c {
            reps.push((i, j));
        }
    }
    reps
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hnf_preserves_determinant_and_shape() {
        for (m, det) in [
            (IntMat2::new(6, 1, 1, 1).unwrap(), 5),
            (IntMat2::new(2, 0, 0, 3).unwrap(), 6),
            (IntMat2::new(0, -1, 7, 3).unwrap(), 7),
            (IntMat2::new(-4, 2, 3, -5).unwrap(), 14),
        ] {
            let h = column_hnf(&m);
            assert_eq!(h.e12, 0);
            assert!(h.e11 > 0 && h.e22 > 0);
            assert_eq!(h.det(), det);
            assert_eq!(coset_representatives(&m).len(), det as usize);
        }
    }
}
