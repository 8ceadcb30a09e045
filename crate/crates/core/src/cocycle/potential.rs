//! Geometric potential of the billiard map: φ(x) = −log of the one-step
//! expansion along the unstable direction, measured in the cos φ-weighted
//! transverse metric. Pointwise φ(x) ≤ −log Λ.

use crate::billiard::{BilliardError, BilliardTable, CollisionState, ConeKind};

/// Unstable slope dφ/dr at `state`, obtained by pulling the state back
/// `depth` steps with the time-reversal involution and pushing the unstable
/// cone forward again. The cone contracts by at least Λ² per step, so the
/// default depth 20 is far beyond machine precision for any valid table.
pub fn billiard_unstable_slope(
    table: &BilliardTable,
    state: &CollisionState,
    depth: usize,
) -> Result<f64, BilliardError> {
    // pull back to x_{-depth}, storing the pseudo-orbit and its flights
    let mut states = Vec::with_capacity(depth + 1);
    let mut taus = Vec::with_capacity(depth);
    states.push(*state);
    let mut cur = *state;
    for _ in 0..depth {
        let (prev, tau) = table.collide_backward(&cur)?;
        states.push(prev);
        taus.push(tau);
        cur = prev;
    }
    // push a cone seed forward along the *stored* pseudo-orbit (re-solving
    // collisions from the deep past would shadow off the original orbit);
    // the slope at x_0 is the unstable direction up to O(Λ^{-2 depth})
    let mut slope = table.discs()[cur.disc].curvature(); // lower cone edge
    for k in (0..depth).rev() {
        let m = table.derivative(&states[k + 1], &states[k], taus[k])?;
        slope = m.slope_image(slope);
    }
    Ok(slope)
}

/// φ(x) = −log‖df_x|Eᵘ‖_p with Eᵘ from `billiard_unstable_slope`. The value
/// is ≤ −log Λ; near-grazing states propagate `NearGrazing`.
pub fn geometric_potential(
    table: &BilliardTable,
    state: &CollisionState,
    depth: usize,
) -> Result<f64, BilliardError> {
    if state.angle_gap() <= 1e-12 {
        return Err(BilliardError::NearGrazing(state.angle_gap()));
    }
    let slope = billiard_unstable_slope(table, state, depth)?;
    let (_, tau) = table.collide(state)?;
    // the widest admissible cone corresponds to the shortest previous flight
    debug_assert!(table.cone_membership(state, slope, ConeKind::Unstable, table.tau_min()));
    Ok(-table.p_expansion(state, slope, tau).ln())
}
