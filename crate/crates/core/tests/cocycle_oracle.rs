//! Oracle tests for the cocycle toolkit: eigenvalue closed forms for the
//! linear map, direction estimates, the exhaustive Pliss oracle, and the
//! geometric potential of the billiard.

use nuhlab_core::billiard::{BilliardTable, CollisionState, ConeKind, Disc};
use nuhlab_core::cocycle::{
    billiard_unstable_slope, geometric_potential, lyapunov_qr, pesin_entropy_estimate,
    pliss_times, stable_direction, unstable_direction, z_chi_fraction, BilliardFlow,
    DitheredEndo,
};
use nuhlab_core::maps::{sample_preorbit, IntMat2, ShearFn, TorusEndo, TorusPoint};
use nuhlab_core::Vec2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn e61() -> IntMat2 {
    IntMat2::new(6, 1, 1, 1).unwrap()
}

fn acs_map() -> TorusEndo {
    TorusEndo::sheared(e61(), IntMat2::new(1, 0, 0, 1).unwrap(), 6.0, ShearFn::sine()).unwrap()
}

/// Eigen data of [[6,1],[1,1]]: λ = (7 ± √29)/2, eigenvector (1, λ−6).
fn eigen61() -> (f64, f64, Vec2, Vec2) {
    let s = 29f64.sqrt();
    let lu = 0.5 * (7.0 + s);
    let ls = 0.5 * (7.0 - s);
    let vu = Vec2::new(1.0, lu - 6.0).normalized();
    let vs = Vec2::new(1.0, ls - 6.0).normalized();
    (lu, ls, vu, vs)
}

fn three_disc_table() -> BilliardTable {
    BilliardTable::new(
        vec![
            Disc { center: Vec2::new(0.0, 0.0), radius: 0.245 },
            Disc { center: Vec2::new(0.26, 0.4277), radius: 0.245 },
            Disc { center: Vec2::new(0.74, 0.5723), radius: 0.245 },
        ],
        4.0,
    )
    .unwrap()
}

#[test]
fn linear_qr_recovers_eigenvalues() {
    let f = TorusEndo::linear(e61());
    let (lu, ls, _, _) = eigen61();
    let est = lyapunov_qr(&f, TorusPoint::new(0.3, 0.7), 10_000, 42).unwrap();
    assert!((est.exponents[0] - lu.ln()).abs() < 1e-8);
    assert!((est.exponents[1] - ls.ln()).abs() < 1e-8);
    assert!((est.sum() - 5f64.ln()).abs() < 1e-8);
}

#[test]
fn qr_is_frame_invariant_within_ci() {
    let f = acs_map();
    let a = lyapunov_qr(&DitheredEndo { map: &f }, TorusPoint::new(0.3, 0.7), 50_000, 1).unwrap();
    let b = lyapunov_qr(&DitheredEndo { map: &f }, TorusPoint::new(0.3, 0.7), 50_000, 2).unwrap();
    for i in 0..2 {
        let tol = 2.0 * (a.ci_halfwidth[i] + b.ci_halfwidth[i]);
        assert!(
            (a.exponents[i] - b.exponents[i]).abs() <= tol,
            "exponent {i}: {} vs {} (tol {tol})",
            a.exponents[i],
            b.exponents[i]
        );
    }
}

#[test]
fn exponent_sum_matches_log_det_for_sheared() {
    let f = acs_map();
    let est = lyapunov_qr(&DitheredEndo { map: &f }, TorusPoint::new(0.12, 0.93), 20_000, 3).unwrap();
    assert!((est.sum() - 5f64.ln()).abs() < 1e-8);
}

#[test]
fn billiard_exponents_are_symmetric() {
    let table = three_disc_table();
    let flow = BilliardFlow { table: &table };
    let start = CollisionState { disc: 0, r: 0.4, phi: 0.15 };
    let est = lyapunov_qr(&flow, start, 100_000, 7).unwrap();
    assert!(est.exponents[0] > 0.0);
    // smooth invariant measure: λ⁺ + λ⁻ = 0 within the reported CI
    let tol = est.ci_halfwidth[0] + est.ci_halfwidth[1];
    assert!(est.sum().abs() <= tol.max(1e-3), "sum {}", est.sum());
}

#[test]
fn unstable_direction_of_linear_map_is_eigendirection() {
    let f = TorusEndo::linear(e61());
    let (_, _, vu, _) = eigen61();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let branch = sample_preorbit(&f, TorusPoint::new(0.37, 0.91), 40, &mut rng).unwrap();
    let dir = unstable_direction(&f, &branch).unwrap();
    assert!(dir.line_angle(vu) < 1e-8);
}

#[test]
fn unstable_direction_depends_on_the_branch_for_sheared() {
    let f = acs_map();
    let x = TorusPoint::new(0.4, 0.6);
    let mut rng1 = ChaCha8Rng::seed_from_u64(5);
    let mut rng2 = ChaCha8Rng::seed_from_u64(6);
    let b1 = sample_preorbit(&f, x, 30, &mut rng1).unwrap();
    let b2 = sample_preorbit(&f, x, 30, &mut rng2).unwrap();
    let d1 = unstable_direction(&f, &b1).unwrap();
    let d2 = unstable_direction(&f, &b2).unwrap();
    assert!(d1.line_angle(d2) > 1e-3, "angle {}", d1.line_angle(d2));
}

#[test]
fn unstable_direction_is_cauchy_in_depth() {
    let f = acs_map();
    let x = TorusPoint::new(0.4, 0.6);
    // nested branches: depth 80 extends its own depth-40 prefix
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let deep = sample_preorbit(&f, x, 80, &mut rng).unwrap();
    let half = nuhlab_core::maps::PreOrbit::from_points(&f, deep.points()[..41].to_vec()).unwrap();
    let d_deep = unstable_direction(&f, &deep).unwrap();
    let d_half = unstable_direction(&f, &half).unwrap();
    assert!(d_deep.line_angle(d_half) < 1e-8);
}

#[test]
fn unstable_direction_equivariance() {
    let f = acs_map();
    let x = TorusPoint::new(0.23, 0.81);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let branch = sample_preorbit(&f, x, 40, &mut rng).unwrap();
    let dir = unstable_direction(&f, &branch).unwrap();
    let pushed = f.jacobian(x).apply(dir).normalized();
    let shifted = branch.shifted_forward(&f);
    let dir_shifted = unstable_direction(&f, &shifted).unwrap();
    assert!(pushed.line_angle(dir_shifted) < 1e-8);
}

#[test]
fn stable_direction_of_linear_map() {
    let f = TorusEndo::linear(e61());
    let (_, _, _, vs) = eigen61();
    let dir = stable_direction(&f, TorusPoint::new(0.29, 0.53), 40).unwrap();
    assert!(dir.line_angle(vs) < 1e-8);
}

#[test]
fn billiard_stable_slope_lies_in_stable_cone() {
    let table = three_disc_table();
    // stable direction at x = reversal of the unstable direction at Rx
    let mut state = CollisionState { disc: 1, r: 0.3, phi: 0.25 };
    for _ in 0..200 {
        let slope_u_rev = billiard_unstable_slope(&table, &state.reversed(), 25).unwrap();
        let stable_slope = -slope_u_rev;
        let (_, tau_next) = table.collide(&state).unwrap();
        assert!(
            table.cone_membership(&state, stable_slope, ConeKind::Stable, tau_next),
            "slope {stable_slope} outside stable cone"
        );
        let (next, _) = table.collide(&state).unwrap();
        state = next;
    }
}

#[test]
fn geometric_potential_bounded_by_log_lambda() {
    let table = three_disc_table();
    let lambda = table.min_expansion_lambda().unwrap();
    let mut state = CollisionState { disc: 0, r: 0.9, phi: -0.2 };
    for _ in 0..2000 {
        let phi_pot = geometric_potential(&table, &state, 25).unwrap();
        assert!(phi_pot <= -lambda.ln() + 1e-12, "potential {phi_pot}");
        let (next, _) = table.collide(&state).unwrap();
        state = next;
    }
}

#[test]
fn near_grazing_potential_tracks_angle_gap() {
    let table = three_disc_table();
    // states with tiny own angle gap and a transverse image
    let mut ratios = Vec::new();
    for k in 1..=60 {
        let gap = 1e-7 * 1.6f64.powi(k / 4) * k as f64;
        let state = CollisionState { disc: 0, r: 2.0 + 0.01 * k as f64, phi: std::f64::consts::FRAC_PI_2 - gap };
        let Ok(phi_pot) = geometric_potential(&table, &state, 25) else { continue };
        ratios.push(phi_pot / gap.ln());
    }
    assert!(ratios.len() > 30);
    for r in ratios {
        assert!(r > 0.05 && r < 20.0, "ratio {r} out of band");
    }
}

#[test]
fn pesin_estimate_on_linear_map_matches_identity() {
    // log 5 + |log λ_s| = log λ_u
    let f = TorusEndo::linear(e61());
    let (lu, ls, _, _) = eigen61();
    let est = pesin_entropy_estimate(&f, TorusPoint::new(0.3, 0.7), 20_000, 9).unwrap();
    assert!((est.lambda_minus - ls.ln()).abs() < 1e-6);
    assert!((est.value - lu.ln()).abs() < 1e-6);
}

#[test]
fn pesin_estimate_on_acs_map_exceeds_log_degree() {
    let f = acs_map();
    let est = pesin_entropy_estimate(&f, TorusPoint::new(0.3, 0.7), 100_000, 10).unwrap();
    assert!(est.value - est.ci_halfwidth > 5f64.ln());
}

// --- Pliss oracle ---------------------------------------------------------

/// O(len²) literal check of the defining inequality.
fn pliss_oracle(seq: &[f64], alpha2: f64, epsilon: f64) -> Vec<usize> {
    let len = seq.len();
    let mut out = Vec::new();
    for n in 0..len {
        let mut ok = true;
        for m in (n + 1)..=len {
            let avg = seq[n..m].iter().sum::<f64>() / (m - n) as f64;
            if avg > alpha2 + epsilon {
                ok = false;
                break;
            }
        }
        if ok {
            out.push(n);
        }
    }
    out
}

#[test]
fn pliss_agrees_with_exhaustive_oracle_and_density_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    let mut hypothesis_cases = 0usize;
    for _case in 0..1000 {
        let len = 200;
        let alpha1 = -1.0;
        let alpha2: f64 = rng.gen_range(-0.3..0.5);
        let epsilon: f64 = rng.gen_range(0.05..0.5);
        // entries above alpha1; the case mean straddles alpha2 so both
        // hypothesis outcomes are exercised
        let offset: f64 = rng.gen_range(-0.5..0.15);
        let seq: Vec<f64> = (0..len)
            .map(|_| {
                let jitter: f64 = rng.gen_range(-0.3..0.3);
                (alpha2 + offset + jitter).max(alpha1 + 1e-6)
            })
            .collect();
        let got = pliss_times(&seq, alpha1, alpha2, epsilon).unwrap();
        let want = pliss_oracle(&seq, alpha2, epsilon);
        assert_eq!(got.times, want);
        if got.hypothesis_ok {
            hypothesis_cases += 1;
            assert!(
                got.density >= got.delta_bound - 1e-12,
                "density {} below bound {}",
                got.density,
                got.delta_bound
            );
        }
    }
    assert!(hypothesis_cases > 100, "only {hypothesis_cases} cases satisfied the hypothesis");
}

#[test]
fn z_chi_monte_carlo_fraction() {
    // random walks with drift −0.5: most satisfy the χ = 0.5 budget
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let seqs: Vec<Vec<f64>> = (0..2000)
        .map(|_| (0..50).map(|_| -0.5 + rng.gen_range(-0.05..0.05)).collect())
        .collect();
    let refs: Vec<&[f64]> = seqs.iter().map(|s| s.as_slice()).collect();
    let (frac, ci) = z_chi_fraction(refs.iter().cloned(), 0.5, 50);
    assert!(frac > 0.9);
    assert!(ci < 0.05);
}
