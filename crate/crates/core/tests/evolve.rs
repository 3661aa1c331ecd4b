use std::sync::Arc;
use std::time::Instant;

use solistab::evolve::{evolve, invariants, run_with, step, Evolver, Sponge};
use solistab::{EvolveConfig, Field, Grid, SolitonFamily};

fn grid() -> Arc<Grid> {
    Grid::new(2048, 200.0).unwrap()
}

#[test]
fn zero_stays_zero() {
    let g = grid();
    let cfg = EvolveConfig::new(1e-3, 1.0, 100);
    let u = step(&Field::zeros(&g), 2, &cfg).unwrap();
    assert_eq!(u.max_abs(), 0.0);
    assert_eq!(invariants(&u, 2), (0.0, 0.0));
}

#[test]
fn stiffness_guard_rejects_large_steps() {
    let g = Grid::new(4096, 200.0).unwrap();
    let cfg = EvolveConfig::new(1e-3, 1.0, 100);
    assert!(Evolver::new(&Field::zeros(&g), 3, &cfg).is_err());
    let cfg = EvolveConfig::new(1.5e-4, 1.0, 100);
    assert!(Evolver::new(&Field::zeros(&g), 3, &cfg).is_ok());
}

#[test]
fn soliton_invariants() {
    let g = grid();
    let phi = SolitonFamily::new(2, 1.0).unwrap().profile(&g, 0.0);
    let (m, e) = invariants(&phi, 2);
    assert!((m - 2.0 / 3.0).abs() < 1e-10);
    // E(φ_c) = -c^{5/2}/5 for p = 2; also compare with a grid of twice the density.
    assert!((e + 0.2).abs() < 1e-10);
    let fine = Grid::new(4096, 200.0).unwrap();
    let (_, e2) = invariants(&SolitonFamily::new(2, 1.0).unwrap().profile(&fine, 0.0), 2);
    assert!((e - e2).abs() < 1e-10);
    assert!(e < 0.0);
}

#[test]
fn traveling_wave() {
    let g = grid();
    let fam = SolitonFamily::new(2, 1.0).unwrap();
    let cfg = EvolveConfig::new(1e-3, 10.0, 1000);
    let t0 = Instant::now();
    let traj = evolve(&fam.profile(&g, 0.0), 2, &cfg).unwrap();
    let elapsed = t0.elapsed();
    let last = traj.states.last().unwrap();
    let err = last.sub(&fam.profile(&g, 10.0)).unwrap().norm(solistab::Norm::L2).unwrap();
    assert!(err < 1e-6, "err {err:e} in {elapsed:?}");
    assert!(traj.momentum_drift() < 1e-8);
    assert!(traj.energy_drift() < 1e-8);
    // peak moves at unit speed
    for (t, u) in traj.times.iter().zip(&traj.states).skip(1) {
        let (x, _) = u.peak();
        assert!((x / t - 1.0).abs() < 1e-4);
    }
}

#[test]
fn small_gaussian_conserves_momentum() {
    let g = grid();
    let u0 = Field::from_fn(&g, |x| 0.01 * (-x * x).exp());
    let cfg = EvolveConfig::new(1e-3, 10.0, 500);
    let traj = evolve(&u0, 2, &cfg).unwrap();
    assert!(traj.momentum_drift() < 1e-10);
    let half = EvolveConfig::new(5e-4, 10.0, 1000);
    let fine = evolve(&u0, 2, &half).unwrap();
    let d = traj.states.last().unwrap().sub(fine.states.last().unwrap()).unwrap();
    assert!(d.norm(solistab::Norm::L2).unwrap() < 1e-10);
}

#[test]
fn perturbed_soliton_energy_drift() {
    let g = grid();
    let fam = SolitonFamily::new(2, 1.0).unwrap();
    let u0 = fam.profile(&g, 0.0).add(&Field::from_fn(&g, |x| 1e-3 * (-x * x).exp())).unwrap();
    let traj = evolve(&u0, 2, &EvolveConfig::new(1e-3, 5.0, 500)).unwrap();
    assert!(traj.energy_drift() < 1e-8);
    assert!(traj.momentum_drift() < 1e-8);
}

#[test]
fn fourth_order_in_time() {
    let g = Grid::new(128, 40.0).unwrap();
    let u0 = SolitonFamily::new(2, 2.0).unwrap().profile(&g, 0.0)
        .add(&Field::from_fn(&g, |x| 0.1 * (-(x - 2.0) * (x - 2.0)).exp()))
        .unwrap();
    let run = |dt: f64| {
        let cfg = EvolveConfig::new(dt, 1.0, 1_000_000);
        evolve(&u0, 2, &cfg).unwrap().states.pop().unwrap()
    };
    let a = run(2.5e-3);
    let b = run(1.25e-3);
    let c = run(6.25e-4);
    let e1 = a.sub(&b).unwrap().norm(solistab::Norm::L2).unwrap();
    let e2 = b.sub(&c).unwrap().norm(solistab::Norm::L2).unwrap();
    let ratio = e1 / e2;
    assert!((14.0..18.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn translation_equivariance() {
    let g = Grid::new(512, 100.0).unwrap();
    let u0 = SolitonFamily::new(3, 1.0).unwrap().profile(&g, 0.0)
        .add(&Field::from_fn(&g, |x| 0.05 * (-x * x).exp()))
        .unwrap();
    let mut cfg = EvolveConfig::new(5e-3, 2.0, 1000);
    cfg.dealias = true;
    let s = 3.7;
    let a = evolve(&u0.translate(s), 3, &cfg).unwrap().states.pop().unwrap();
    let b = evolve(&u0, 3, &cfg).unwrap().states.pop().unwrap().translate(s);
    assert!(a.sub(&b).unwrap().max_abs() < 1e-10);
}

#[test]
fn profile_error_grows_at_most_linearly() {
    let g = Grid::new(512, 100.0).unwrap();
    let fam = SolitonFamily::new(2, 1.0).unwrap();
    let cfg = EvolveConfig::new(0.01, 8.0, 200);
    let mut errs = vec![];
    run_with(&fam.profile(&g, 0.0), 2, &cfg, |t, u| {
        errs.push((t, u.sub(&fam.profile(&g, t)).unwrap().norm(solistab::Norm::L2).unwrap()));
        Ok(())
    })
    .unwrap();
    let (t1, e1) = errs[2];
    let (t4, e4) = *errs.last().unwrap();
    assert!(e4 <= 1.5 * e1 * t4 / t1, "{errs:?}");
}

#[test]
fn moving_frame_keeps_soliton_centered() {
    let g = grid();
    let fam = SolitonFamily::new(2, 1.0).unwrap();
    let mut cfg = EvolveConfig::new(1e-3, 5.0, 5000);
    cfg.frame_speed = 1.0;
    cfg.sponge = Some(Sponge { strength: 1.0, width: 20.0 });
    let traj = evolve(&fam.profile(&g, 0.0), 2, &cfg).unwrap();
    let last = traj.states.last().unwrap();
    assert!(last.sub(&fam.profile(&g, 0.0)).unwrap().norm(solistab::Norm::L2).unwrap() < 1e-6);
    assert!((traj.frame_offset(1) - 5.0).abs() < 1e-12);
}

#[test]
fn sponge_absorbs_radiation() {
    let g = grid();
    let u0 = Field::from_fn(&g, |x| 0.01 * (-(x + 60.0) * (x + 60.0) / 16.0).exp() * (2.0 * x).cos());
    // group velocity -3k² = -12 carries the packet into the left sponge
    let mut cfg = EvolveConfig::new(1e-3, 20.0, 20000);
    cfg.sponge = Some(Sponge { strength: 1.0, width: 20.0 });
    let traj = evolve(&u0, 2, &cfg).unwrap();
    let (m0, _) = traj.invariants_series[0];
    let (m1, _) = *traj.invariants_series.last().unwrap();
    assert!(m1 < 0.02 * m0, "{m0} {m1}");
}

#[test]
fn blow_up_is_reported() {
    let g = Grid::new(64, 10.0).unwrap();
    let u0 = Field::from_fn(&g, |x| 2e6 * (-x * x).exp());
    let cfg = EvolveConfig::new(1e-6, 1e-5, 1);
    let err = evolve(&u0, 2, &cfg).unwrap_err();
    assert!(matches!(err, solistab::Error::BlowUp { .. }));
}
