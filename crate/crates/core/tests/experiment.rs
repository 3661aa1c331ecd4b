use solistab::experiment::{run_stability, run_sweep, Perturbation, StabilityConfig, SweepSummary};

fn short(p: u32, amp: f64) -> StabilityConfig {
    let mut c = StabilityConfig::new(p, amp);
    c.n = 1024;
    c.dt = 2e-3;
    c.t_end = 4.0;
    c.sample_every = 100;
    c
}

#[test]
fn unperturbed_run_keeps_the_speed() {
    let o = run_stability(&short(2, 0.0)).unwrap();
    let s = &o.summary;
    assert!((s.c_plus - 1.0).abs() < 1e-12, "{}", s.c_plus);
    assert!(s.m.total < 1e-7, "{:?}", s.m);
    assert_eq!(s.v0_l2, 0.0);
    assert_eq!(o.samples().len(), 21);
    assert_eq!(o.tail.len(), 21);
    assert_eq!(o.u_invariants.len(), 21);
}

#[test]
fn small_run_is_consistent() {
    let o = run_stability(&short(2, 1e-2)).unwrap();
    let s = &o.summary;
    assert!(s.max_fit_residual < 1e-10);
    assert!(s.max_orthogonality < 1e-8);
    assert!(s.c_plus_minus_c0 > 0.0 && s.c_plus_minus_c0 < 0.05);
    assert!(s.sup_orbit_c0 <= 2.0 * s.v0_l2);
    assert!(s.virial_excess.unwrap() <= 1e-6);
    assert_eq!(s.sup_gamma_minus_x, 0.0);
    let tr = o.v1_trajectory();
    assert_eq!(tr.times.len(), tr.states.len());
    assert_eq!(tr.frame_speed, 1.0);
}

#[test]
fn cubic_run_tracks_gamma() {
    let o = run_stability(&short(3, 1e-2)).unwrap();
    assert!(o.summary.sup_gamma_minus_x > 0.0 && o.summary.sup_gamma_minus_x < 1e-4);
    assert!(o.summary.m.mgamma > 0.0);
}

#[test]
fn sweep_keeps_amplitude_order_and_is_deterministic() {
    let amps = [4e-3, 2e-3];
    let a = run_sweep(&short(2, 0.0), &amps, 2).unwrap();
    let b = run_sweep(&short(2, 0.0), &amps, 1).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.samples(), y.samples());
    }
    let sw = SweepSummary::from_runs(&a);
    assert_eq!(sw.amplitudes, amps.to_vec());
    assert!(sw.v0_l2[0] > sw.v0_l2[1]);
    assert_eq!(sw.refined_ratios.len(), 1);
}

#[test]
fn perturbation_config_round_trip() {
    let p: Perturbation = serde_json::from_str(r#"{"kind": "gaussian", "amplitude": 0.01}"#).unwrap();
    assert_eq!(p, Perturbation::Gaussian { amplitude: 0.01, width: 1.0, offset: 0.0 });
    let q: Perturbation = serde_json::from_str(r#"{"kind": "profile-bump", "amplitude": 0.02}"#).unwrap();
    assert_eq!(q.with_amplitude(0.5), Perturbation::ProfileBump { amplitude: 0.5 });
    let text = serde_json::to_string(&short(3, 1e-3)).unwrap();
    let back: StabilityConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(back, short(3, 1e-3));
}
