use std::sync::Arc;

use solistab::{Field, Grid};
use solistab::soliton::dc_zeta;
use solistab::SolitonFamily;

fn default_grid() -> Arc<Grid> {
    Grid::new(2048, 200.0).unwrap()
}

// Closed forms worked out by hand: ‖φ_c‖² = (2/3)c^{3/2} (p=2), (4/3)√c (p=3);
// ∫∂_cφ_c = 1/√c (p=2), 0 (p=3).
fn momentum(p: u32, c: f64) -> f64 {
    if p == 2 {
        2.0 / 3.0 * c.powf(1.5)
    } else {
        4.0 / 3.0 * c.sqrt()
    }
}

#[test]
fn parameters_and_peak() {
    for p in [2, 3] {
        for c in [0.5, 1.0, 2.0] {
            let fam = SolitonFamily::new(p, c).unwrap();
            let alpha = ((p as f64 + 1.0) * c / 6.0).powf(1.0 / (p as f64 - 1.0));
            let beta = (p as f64 - 1.0) / 2.0 * c.sqrt();
            assert!((fam.alpha() - alpha).abs() < 1e-14);
            assert!((fam.beta() - beta).abs() < 1e-14);
            assert_eq!(fam.value(0.0), fam.alpha());
            assert!(fam.value(30.0 / c.sqrt()) < 1e-10);
            assert!(fam.value(-30.0 / c.sqrt()) < 1e-10);
        }
    }
    assert!((SolitonFamily::new(2, 1.0).unwrap().value(0.0) - 0.5).abs() < 1e-15);
    assert!((SolitonFamily::new(3, 1.0).unwrap().value(0.0) - 0.816_496_580_927_726).abs() < 1e-12);
    assert!(SolitonFamily::new(4, 1.0).is_err());
    assert!(SolitonFamily::new(2, 0.0).is_err());
}

#[test]
fn profile_is_even_and_positive() {
    let g = default_grid();
    let phi = SolitonFamily::new(3, 1.3).unwrap().profile(&g, 0.0);
    let n = g.n();
    for j in 1..n / 2 {
        assert_eq!(phi.values()[n / 2 + j], phi.values()[n / 2 - j]);
    }
    assert!(phi.values().iter().all(|&v| v >= 0.0));
}

#[test]
fn ode_residuals() {
    let g = Grid::new(1024, 100.0).unwrap();
    for p in [2, 3] {
        let fam = SolitonFamily::new(p, 1.0).unwrap();
        assert!(fam.ode_residual(&g) < 1e-9);
    }
    let fam = SolitonFamily::new(2, 1.0).unwrap();
    assert!(fam.ode_residual_with_speed(&g, 2.0) >= 0.4);
}

#[test]
fn dc_profile_pairings() {
    let g = default_grid();
    let fam2 = SolitonFamily::new(2, 1.0).unwrap();
    let fam3 = SolitonFamily::new(3, 1.0).unwrap();
    let pair = |fam: &SolitonFamily| fam.profile(&g, 0.0).inner(&fam.dc_profile(&g, 0.0)).unwrap();
    assert!((pair(&fam2) - 0.5).abs() < 1e-10);
    assert!((pair(&fam3) - 1.0 / 3.0).abs() < 1e-10);
}

#[test]
fn dc_profile_matches_central_difference() {
    let g = default_grid();
    for p in [2, 3] {
        let fam = SolitonFamily::new(p, 1.2).unwrap();
        let exact = fam.dc_profile(&g, 0.0);
        let mut errs = vec![];
        for eps in [1e-2, 5e-3] {
            let hi = fam.with_speed(1.2 + eps).unwrap().profile(&g, 0.0);
            let lo = fam.with_speed(1.2 - eps).unwrap().profile(&g, 0.0);
            let fd = hi.sub(&lo).unwrap().scale(0.5 / eps);
            errs.push(fd.sub(&exact).unwrap().max_abs());
        }
        let ratio = errs[0] / errs[1];
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn scaling_consistency() {
    let g = default_grid();
    for p in [2u32, 3] {
        let c = 1.7;
        let fam = SolitonFamily::new(p, c).unwrap();
        let one = SolitonFamily::new(p, 1.0).unwrap();
        let direct = fam.profile(&g, 0.0);
        let scaled = Field::from_fn(&g, |y| c.powf(1.0 / (p as f64 - 1.0)) * one.value(c.sqrt() * y));
        assert!(direct.sub(&scaled).unwrap().max_abs() < 1e-10);
    }
}

#[test]
fn theta_constants() {
    let g = default_grid();
    for c in [0.5, 1.0, 2.0] {
        let b2 = SolitonFamily::new(2, c).unwrap().kernel_basis(&g, 0.0);
        assert!((b2.theta1 - 2.0 / c.sqrt()).abs() < 1e-8);
        assert!((b2.theta2 - 2.0 / (c * c)).abs() < 1e-7);
        assert!((b2.int_dc - 1.0 / c.sqrt()).abs() < 1e-9);
        let b3 = SolitonFamily::new(3, c).unwrap().kernel_basis(&g, 0.0);
        assert!((b3.theta1 - 3.0 * c.sqrt()).abs() < 1e-8);
        assert!(b3.theta2.abs() < 1e-12);
    }
}

#[test]
fn biorthogonality_and_zeta2() {
    let g = default_grid();
    for p in [2, 3] {
        for c in [0.5, 1.0, 2.0] {
            let fam = SolitonFamily::new(p, c).unwrap();
            let b = fam.kernel_basis(&g, 0.0);
            let m = b.biorthogonality(50.0).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    let target = if i == j { 1.0 } else { 0.0 };
                    assert!((m[i][j] - target).abs() < 1e-8, "p={p} c={c} m={m:?}");
                }
            }
            let phi = fam.profile(&g, 0.0);
            let diff = b.zeta2.sub(&phi.scale(b.theta1)).unwrap();
            assert!(diff.max_abs() < 1e-12);
        }
    }
}

#[test]
fn zeta1_matches_closed_form_antiderivative() {
    // ∫_{-∞}^y ∂_cφ for p=2: (1 + tanh(√c y/2))/(2√c) + (y/4)sech²(√c y/2);
    // for p=3: √(2/3) y sech(√c y) / (2√c).
    let g = default_grid();
    let c: f64 = 1.3;
    let sc = c.sqrt();
    let b2 = SolitonFamily::new(2, c).unwrap().kernel_basis(&g, 0.0);
    let anti2 = Field::from_fn(&g, |y| {
        let s = 1.0 / (sc * y / 2.0).cosh();
        (1.0 + (sc * y / 2.0).tanh()) / (2.0 * sc) + y / 4.0 * s * s
    });
    let phi2 = SolitonFamily::new(2, c).unwrap().profile(&g, 0.0);
    let z2 = anti2.scale(-b2.theta1).axpy(b2.theta2, &phi2).unwrap();
    assert!(b2.zeta1.sub(&z2).unwrap().max_abs() < 1e-10);
    let b3 = SolitonFamily::new(3, c).unwrap().kernel_basis(&g, 0.0);
    let anti3 = Field::from_fn(&g, |y| (2.0f64 / 3.0).sqrt() * y / (sc * y).cosh() / (2.0 * sc));
    let z3 = anti3.scale(-b3.theta1);
    assert!(b3.zeta1.sub(&z3).unwrap().max_abs() < 1e-10);
}

#[test]
fn zeta1_right_limit() {
    let g = default_grid();
    let b = SolitonFamily::new(2, 1.0).unwrap().kernel_basis(&g, 0.0);
    let j = g.n() / 2 + g.n() / 4;
    let limit = -b.theta1 * b.int_dc;
    assert!((b.zeta1.values()[j] - limit).abs() < 1e-10);
    // pairing with an e^{-ay}-decaying field converges as the window grows
    let f = Field::from_fn(&g, |y| (-0.5 * y.abs()).exp());
    let a = f.inner_windowed(&b.zeta1, 0.0, 40.0).unwrap();
    let bb = f.inner_windowed(&b.zeta1, 0.0, 50.0).unwrap();
    assert!((a - bb).abs() < 1e-7);
}

#[test]
fn generalized_kernel_relations() {
    let g = default_grid();
    for p in [2, 3] {
        let fam = SolitonFamily::new(p, 1.0).unwrap();
        let b = fam.kernel_basis(&g, 0.0);
        let r = fam.check_generalized_kernel(&b).unwrap();
        assert!(r.l_xi1 < 1e-8, "{r:?}");
        assert!(r.l_xi2_minus_xi1 < 1e-8, "{r:?}");
        assert!(r.ladj_zeta1_minus_zeta2 < 1e-8, "{r:?}");
        assert!(r.ladj_zeta2 < 1e-8, "{r:?}");
    }
}

#[test]
fn momentum_increases_with_speed() {
    let g = default_grid();
    for p in [2, 3] {
        let eps = 1e-4;
        for c in [0.5, 1.0, 2.0] {
            let hi = SolitonFamily::new(p, c + eps).unwrap().momentum_sq(&g);
            let lo = SolitonFamily::new(p, c - eps).unwrap().momentum_sq(&g);
            assert!(hi > lo);
            assert!((SolitonFamily::new(p, c).unwrap().momentum_sq(&g) - momentum(p, c)).abs() < 1e-10);
        }
    }
}

#[test]
fn dc_zeta_is_consistent() {
    let g = default_grid();
    let fam = SolitonFamily::new(3, 1.0).unwrap();
    let (_, dz2) = dc_zeta(&fam, &g, 0.0).unwrap();
    // ζ² = θ₁φ with θ₁ = 3√c, so ∂_cζ² = (3/(2√c))φ + 3√c ∂_cφ.
    let exact = fam.profile(&g, 0.0).scale(1.5).axpy(3.0, &fam.dc_profile(&g, 0.0)).unwrap();
    assert!(dz2.sub(&exact).unwrap().max_abs() < 1e-8);
}
