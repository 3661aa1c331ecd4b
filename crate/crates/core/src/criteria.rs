//! The acceptance battery: thirteen numbered checks at fixed tolerances, sharing the two
//! stability sweeps.

use std::time::Instant;

use serde::Serialize;

use crate::diagnostics::{inequality_suite, virial_series, VirialConfig, XTilde};
use crate::error::Result;
use crate::evolve::{evolve, EvolveConfig, Sponge};
use crate::experiment::{run_sweep, StabilityConfig, StabilityOutcome, SweepSummary};
use crate::grid::{Field, Grid, Norm};
use crate::linop::{OperatorConfig, SmoothingMode, SpectrumReport, WeightedOperator};
use crate::modulation::{fit, split, FitOptions};
use crate::soliton::SolitonFamily;

pub const ALL: [u32; 13] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13];

pub const SWEEP_AMPLITUDES: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

#[derive(Debug, Clone, Serialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionOutcome {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub seconds: f64,
    pub budget_seconds: f64,
    pub metrics: Vec<Metric>,
}

impl CriterionOutcome {
    /// Names of the failing metrics, or of the time budget.
    pub fn failures(&self) -> Vec<String> {
        let mut out: Vec<String> = self.metrics.iter().filter(|m| !m.passed).map(|m| format!("{} = {:.6e}", m.name, m.value)).collect();
        if self.seconds > self.budget_seconds {
            out.push(format!("runtime {:.1} s > {} s", self.seconds, self.budget_seconds));
        }
        out
    }

    pub fn line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        let shown: Vec<String> = self.metrics.iter().map(|m| format!("{} = {:.4e}", m.name, m.value)).collect();
        let mut s = format!("{status} {:>2} {} ({:.1} s): {}", self.id, self.name, self.seconds, shown.join(", "));
        let f = self.failures();
        if !f.is_empty() {
            s.push_str(&format!(" [failed: {}]", f.join("; ")));
        }
        s
    }
}

struct Builder {
    metrics: Vec<Metric>,
}

impl Builder {
    fn new() -> Self {
        Builder { metrics: vec![] }
    }

    fn check(&mut self, name: impl Into<String>, value: f64, passed: bool) {
        self.metrics.push(Metric { name: name.into(), value, passed });
    }
}

/// Runs criteria on demand and caches the expensive shared pieces.
pub struct Suite {
    pub seed: u64,
    pub jobs: usize,
    p2: Option<Vec<StabilityOutcome>>,
    p3: Option<Vec<StabilityOutcome>>,
    spectrum_p2: Option<SpectrumReport>,
}

fn default_grid() -> std::sync::Arc<Grid<f64>> {
    Grid::new(2048, 200.0).expect("valid grid")
}

fn name(id: u32) -> &'static str {
    match id {
        1 => "soliton exactness",
        2 => "kernel algebra",
        3 => "traveling-wave propagation",
        4 => "weighted spectrum",
        5 => "semigroup decay",
        6 => "smoothing exponents",
        7 => "resolvent boundedness",
        8 => "modulation fit",
        9 => "orbital stability scaling (p = 2)",
        10 => "orbital stability scaling (p = 3)",
        11 => "virial ledger",
        12 => "weighted inequality suites",
        13 => "refined-speed quadratic drift",
        _ => "unknown",
    }
}

fn budget(id: u32) -> f64 {
    match id {
        1 => 1.0,
        2 => 5.0,
        3 | 6 => 120.0,
        4 => 240.0,
        5 | 12 => 60.0,
        7 => 300.0,
        8 => 600.0,
        9 => 3600.0,
        10 => 7200.0,
        11 => 1200.0,
        _ => 3600.0,
    }
}

impl Suite {
    pub fn new(seed: u64, jobs: usize) -> Self {
        Suite { seed, jobs, p2: None, p3: None, spectrum_p2: None }
    }

    pub fn run(&mut self, id: u32) -> Result<CriterionOutcome> {
        let start = Instant::now();
        let mut b = Builder::new();
        match id {
            1 => self.soliton(&mut b)?,
            2 => self.kernel(&mut b)?,
            3 => self.travelling(&mut b)?,
            4 => self.spectrum(&mut b)?,
            5 => self.semigroup(&mut b)?,
            6 => self.smoothing(&mut b)?,
            7 => self.resolvent(&mut b)?,
            8 => self.modulation(&mut b)?,
            9 => self.scaling(&mut b, 2)?,
            10 => self.scaling(&mut b, 3)?,
            11 => self.virial(&mut b)?,
            12 => self.inequalities(&mut b)?,
            13 => self.refined(&mut b)?,
            other => return Err(crate::Error::Config(format!("no criterion {other}"))),
        }
        let seconds = start.elapsed().as_secs_f64();
        let budget_seconds = budget(id);
        let passed = b.metrics.iter().all(|m| m.passed) && seconds <= budget_seconds;
        Ok(CriterionOutcome { id, name: name(id).into(), passed, seconds, budget_seconds, metrics: b.metrics })
    }

    pub fn sweep(&mut self, p: u32) -> Result<&[StabilityOutcome]> {
        let slot = if p == 2 { &mut self.p2 } else { &mut self.p3 };
        if slot.is_none() {
            *slot = Some(run_sweep(&StabilityConfig::new(p, 1.0), &SWEEP_AMPLITUDES, self.jobs)?);
        }
        Ok(slot.as_deref().expect("filled above"))
    }

    fn soliton(&mut self, b: &mut Builder) -> Result<()> {
        let g = default_grid();
        for p in [2, 3] {
            for c in [0.5, 1.0, 2.0] {
                let r = SolitonFamily::new(p, c)?.ode_residual(&g);
                b.check(format!("ode_residual(p={p},c={c})"), r, r < 1e-9);
            }
        }
        Ok(())
    }

    fn kernel(&mut self, b: &mut Builder) -> Result<()> {
        let g = default_grid();
        for p in [2, 3] {
            let fam = SolitonFamily::new(p, 1.0)?;
            let basis = fam.kernel_basis(&g, 0.0);
            let r = fam.check_generalized_kernel(&basis)?;
            let bio = basis.biorthogonality(g.length() / 4.0)?;
            let dev = (0..2)
                .flat_map(|i| (0..2).map(move |j| (i, j)))
                .map(|(i, j)| (bio[i][j] - if i == j { 1.0 } else { 0.0 }).abs())
                .fold(0.0, f64::max);
            b.check(format!("biorthogonality_dev(p={p})"), dev, dev < 1e-8);
            b.check(format!("L_xi1(p={p})"), r.l_xi1, r.l_xi1 < 1e-6);
            b.check(format!("L_xi2-xi1(p={p})"), r.l_xi2_minus_xi1, r.l_xi2_minus_xi1 < 1e-6);
        }
        Ok(())
    }

    fn travelling(&mut self, b: &mut Builder) -> Result<()> {
        let g = default_grid();
        let fam = SolitonFamily::new(2, 1.0)?;
        let cfg = EvolveConfig::new(1e-3, 10.0, 1000);
        let tr = evolve(&fam.profile(&g, 0.0), 2, &cfg)?;
        let last = tr.states.last().expect("samples");
        let err = last.sub(&fam.profile(&g, 10.0))?.norm(Norm::L2)?;
        b.check("l2_error(t=10)", err, err < 1e-6);
        let (dm, de) = (tr.momentum_drift(), tr.energy_drift());
        b.check("momentum_drift", dm, dm < 1e-8);
        b.check("energy_drift", de, de < 1e-8);
        Ok(())
    }

    fn p2_spectrum(&mut self) -> Result<SpectrumReport> {
        if self.spectrum_p2.is_none() {
            let o = WeightedOperator::new(SolitonFamily::new(2, 1.0)?, OperatorConfig::default())?;
            self.spectrum_p2 = Some(o.eigen()?);
        }
        Ok(self.spectrum_p2.clone().expect("filled above"))
    }

    fn spectrum(&mut self, b: &mut Builder) -> Result<()> {
        let r2 = self.p2_spectrum()?;
        let r3 = WeightedOperator::new(SolitonFamily::new(3, 1.0)?, OperatorConfig::default())?.eigen()?;
        for (p, r) in [(2, &r2), (3, &r3)] {
            let zeros = r.zero_cluster.len() as f64;
            b.check(format!("zero_eigenvalues(p={p})"), zeros, r.zero_cluster.len() == 2);
            let small = r.zero_cluster.iter().map(|l| l.norm()).fold(0.0, f64::max);
            b.check(format!("max|zero eigenvalue|(p={p})"), small, small < 1e-6);
            b.check(format!("gap(p={p})"), r.gap, r.gap >= r.essential_floor - 1e-3);
        }
        Ok(())
    }

    fn semigroup(&mut self, b: &mut Builder) -> Result<()> {
        let gap = self.p2_spectrum()?.gap;
        let o = WeightedOperator::new(SolitonFamily::new(2, 1.0)?, OperatorConfig::default())?;
        let fitd = o.decay_rate(&o.sample(|y| (-y * y).exp()), 30.0, true)?;
        let ratio = fitd.rate / gap;
        b.check("b_hat", fitd.rate, true);
        b.check("b_hat/gap", ratio, (0.9..=1.1).contains(&ratio));
        Ok(())
    }

    fn smoothing(&mut self, b: &mut Builder) -> Result<()> {
        let o = WeightedOperator::new(SolitonFamily::new(2, 1.0)?, OperatorConfig::default())?;
        let s0 = o.smoothing_exponent(0, SmoothingMode::L1Source)?.exponent;
        let s1 = o.smoothing_exponent(1, SmoothingMode::L1Source)?.exponent;
        let s2 = o.smoothing_exponent(1, SmoothingMode::L2Source)?.exponent;
        b.check("alpha(j=0,L1a)", s0, (s0 - 0.25).abs() <= 0.05);
        b.check("alpha(j=1,L1a)", s1, (s1 - 0.75).abs() <= 0.07);
        b.check("alpha(j=1,L2a)", s2, (s2 - 0.50).abs() <= 0.05);
        Ok(())
    }

    fn resolvent(&mut self, b: &mut Builder) -> Result<()> {
        let mut maxes = vec![];
        for m in [800, 1600] {
            let o = WeightedOperator::new(SolitonFamily::new(2, 1.0)?, OperatorConfig::default().with_m(m))?;
            let im = 0.5 * o.essential_floor() * 0.5;
            let sweep = o.resolvent_sweep(-20.0, 20.0, im, 9)?;
            b.check(format!("max_norm(m={m})"), sweep.max, sweep.max.is_finite());
            maxes.push(sweep.max);
        }
        let change = (maxes[1] - maxes[0]).abs() / maxes[0];
        b.check("relative_change", change, change < 0.1);
        Ok(())
    }

    fn modulation(&mut self, b: &mut Builder) -> Result<()> {
        let g = default_grid();
        let opts = FitOptions::default();
        let fam = SolitonFamily::new(2, 1.0)?;
        let bump = Field::from_fn(&g, |x| 2e-3 * (-(x - 0.7) * (x - 0.7)).exp() * (1.5 * x).cos());
        let w = fam.with_speed(1.1)?.profile(&g, 0.4).add(&bump)?;
        let base = fit(2, &w, (0.4, 1.1), &opts)?;
        let mut equi = 0.0f64;
        for s in [-3.0, 1.3, 7.25] {
            let r = fit(2, &w.translate(-s), (0.4 + s, 1.1), &opts)?;
            equi = equi.max((r.x - base.x - s).abs()).max((r.c - base.c).abs());
        }
        b.check("equivariance", equi, equi < 1e-9);
        let v1 = Field::from_fn(&g, |x| 1e-3 * (-(x + 2.0) * (x + 2.0) / 3.0).exp());
        let u = w.add(&v1)?;
        let fr = fit(2, &u.sub(&v1)?, (0.4, 1.1), &opts)?;
        let fam_t = fam.with_speed(fr.c)?;
        let sp = split(&fam_t, &u, &v1, fr.x)?;
        let back = fam_t.profile(&g, 0.0).add(&sp.v1)?.add(&sp.v2)?.sub(&u.translate(fr.x))?.max_abs();
        b.check("round_trip", back, back < 1e-9);
        let orth = self.sweep(2)?[0].summary.max_orthogonality;
        b.check("max_orthogonality_along_run", orth, orth < 1e-8);
        Ok(())
    }

    fn scaling(&mut self, b: &mut Builder, p: u32) -> Result<()> {
        let sw = SweepSummary::from_runs(self.sweep(p)?);
        // When every sup sits at t = 0 it equals ‖v₀‖ and the spread over a 4x amplitude range is
        // exactly 2; allow round-off only.
        b.check("orbit_spread", sw.orbit_spread, sw.orbit_spread <= 2.0 * (1.0 + 1e-12));
        b.check("c_shift_slope", sw.c_slope, (0.8..=1.2).contains(&sw.c_slope));
        for (a, d) in sw.amplitudes.iter().zip(&sw.v2_decay) {
            b.check(format!("v2(T)/max(A={a})"), *d, *d < 0.2);
        }
        if p == 2 {
            for (a, d) in sw.amplitudes.iter().zip(&sw.tail_decay) {
                b.check(format!("tail(T)/tail(0)(A={a})"), *d, *d < 0.2);
            }
        } else {
            for (k, r) in sw.gamma_ratios.iter().enumerate() {
                b.check(format!("gamma_ratio(halving {})", k + 1), *r, (6.0..=10.0).contains(r));
            }
        }
        Ok(())
    }

    fn virial(&mut self, b: &mut Builder) -> Result<()> {
        let g = default_grid();
        let v0 = Field::from_fn(&g, |x| 1e-2 * (-x * x).exp());
        for (label, speed) in [("lemma", 0.5), ("front", 0.75)] {
            let mut cfg = EvolveConfig::new(1e-3, 50.0, 100);
            cfg.frame_speed = speed;
            cfg.sponge = Some(Sponge { strength: 20.0, width: 30.0 });
            let tr = evolve(&v0, 2, &cfg)?;
            let mut vc = VirialConfig::new(0.5);
            vc.xtilde = XTilde::Linear { speed };
            let s = virial_series(&tr, &vc)?;
            let excess = s.max_excess().1 / s.i[0];
            b.check(format!("{label}: max(I+D+S-I0)/I0"), excess, excess <= 1e-6);
            if label == "front" {
                b.check("front: I(50)/I(0)", s.final_ratio(), s.final_ratio() < 0.05);
            }
        }
        Ok(())
    }

    fn inequalities(&mut self, b: &mut Builder) -> Result<()> {
        for r in inequality_suite(&default_grid(), self.seed, 100)? {
            b.check(format!("{} worst ratio", r.name), r.worst_ratio, r.passed);
        }
        Ok(())
    }

    fn refined(&mut self, b: &mut Builder) -> Result<()> {
        let sw = SweepSummary::from_runs(self.sweep(2)?);
        for (k, r) in sw.refined_ratios.iter().enumerate() {
            b.check(format!("refined_variation_ratio(halving {})", k + 1), *r, (3.0..=5.0).contains(r));
        }
        Ok(())
    }
}

