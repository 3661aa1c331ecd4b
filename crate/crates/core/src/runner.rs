//! Declarative experiments: a JSON configuration, its validation, execution and the emitted
//! artifacts (`track.csv`, `spectrum.csv`, `invariants.csv`, `summary.json`, `checks.json`).

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::criteria::{self, CriterionOutcome, Suite};
use crate::diagnostics::{self, CheckReport};
use crate::error::{Error, Result};
use crate::evolve::{self, EvolveConfig, Sponge};
use crate::experiment::{run_stability, run_sweep, Perturbation, StabilityConfig, StabilityOutcome, SweepSummary};
use crate::grid::{Grid, Norm};
use crate::linop::{OperatorConfig, SmoothingMode, WeightedOperator};
use crate::soliton::SolitonFamily;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    SolitonCheck,
    Spectrum,
    Semigroup,
    Smoothing,
    ResolventSweep,
    Evolve,
    #[default]
    Stability,
    Sweep,
    InequalitySuite,
    Check,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    pub length: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { n: 2048, length: 200.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveSection {
    pub dt: f64,
    pub t_end: f64,
    pub sample_every: usize,
    pub dealias: bool,
    /// Computational frame of stability runs; `None` means `c₀`. The `evolve` kind always runs
    /// in the lab frame.
    pub frame_speed: Option<f64>,
    /// Seam sponge of stability runs.
    pub sponge: Option<Sponge<f64>>,
}

impl Default for EvolveSection {
    fn default() -> Self {
        EvolveSection {
            dt: 1e-3,
            t_end: 80.0,
            sample_every: 100,
            dealias: false,
            frame_speed: None,
            sponge: Some(Sponge { strength: 20.0, width: 30.0 }),
        }
    }
}

/// Truncated-line operator used by the linear kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorSection {
    pub half_width: f64,
    pub m: usize,
    /// Horizon of the semigroup decay fit.
    pub decay_t_end: f64,
    /// Number of `Re λ` samples in `[-20, 20]`.
    pub resolvent_points: usize,
}

impl Default for OperatorSection {
    fn default() -> Self {
        OperatorSection { half_width: 40.0, m: 800, decay_t_end: 30.0, resolvent_points: 9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub p: u32,
    pub c0: f64,
    /// Weight rate; `None` picks 0.5 for the linear kinds and 0.25 for nonlinear runs.
    pub a: Option<f64>,
    pub grid: GridSection,
    pub evolve: EvolveSection,
    pub operator: OperatorSection,
    pub perturbation: Perturbation,
    pub sigma: f64,
    pub seed: u64,
    pub out: Option<String>,
    pub jobs: usize,
    /// Amplitudes of the `sweep` kind.
    pub amplitudes: Vec<f64>,
    /// Random fields per inequality.
    pub fields: usize,
    /// Criteria run by `check`; empty means all.
    pub criteria: Vec<u32>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kind: Kind::default(),
            p: 2,
            c0: 1.0,
            a: None,
            grid: GridSection::default(),
            evolve: EvolveSection::default(),
            operator: OperatorSection::default(),
            perturbation: Perturbation::default(),
            sigma: 0.5,
            seed: 0,
            out: None,
            jobs: 1,
            amplitudes: criteria::SWEEP_AMPLITUDES.to_vec(),
            fields: 100,
            criteria: vec![],
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn weight(&self) -> f64 {
        self.a.unwrap_or(match self.kind {
            Kind::Spectrum | Kind::Semigroup | Kind::Smoothing | Kind::ResolventSweep => 0.5,
            _ => 0.25,
        })
    }

    fn amplitude(&self) -> Option<f64> {
        match &self.perturbation {
            Perturbation::Gaussian { amplitude, .. } | Perturbation::ProfileBump { amplitude } => Some(*amplitude),
            Perturbation::File { .. } => None,
        }
    }

    pub fn stability_config(&self) -> StabilityConfig {
        StabilityConfig {
            p: self.p,
            c0: self.c0,
            a: self.weight(),
            n: self.grid.n,
            length: self.grid.length,
            dt: self.evolve.dt,
            t_end: self.evolve.t_end,
            sample_every: self.evolve.sample_every,
            dealias: self.evolve.dealias,
            perturbation: self.perturbation.clone(),
            frame_speed: self.evolve.frame_speed,
            sponge: self.evolve.sponge,
            sigma: self.sigma,
        }
    }

    pub fn operator_config(&self) -> OperatorConfig {
        OperatorConfig { a: self.weight(), half_width: self.operator.half_width, m: self.operator.m, ..OperatorConfig::default() }
    }
}

/// Every violated invariant of `cfg`, one message each; empty when the config is usable.
pub fn validate(cfg: &ExperimentConfig) -> Vec<String> {
    let mut out = vec![];
    if cfg.p != 2 && cfg.p != 3 {
        out.push(format!("p must be 2 or 3, got {}", cfg.p));
    }
    if !(cfg.c0 > 0.0 && cfg.c0.is_finite()) {
        out.push(format!("speed c0 must be positive, got {}", cfg.c0));
    }
    let a = cfg.weight();
    if !(a > 0.0) {
        out.push(format!("weight rate must be positive, got {a}"));
    }
    if cfg.c0 > 0.0 && !(a < cfg.c0.sqrt()) {
        out.push(format!("weight rate must satisfy a < √c (a = {a}, √c = {})", cfg.c0.sqrt()));
    }
    if !cfg.grid.n.is_power_of_two() || cfg.grid.n < 16 {
        out.push(format!("grid size n must be a power of two of at least 16, got {}", cfg.grid.n));
    }
    if !(cfg.grid.length > 0.0) {
        out.push(format!("domain length must be positive, got {}", cfg.grid.length));
    }
    if !(cfg.evolve.dt > 0.0) {
        out.push(format!("time step must be positive, got {}", cfg.evolve.dt));
    }
    if !(cfg.evolve.t_end > 0.0) {
        out.push(format!("final time must be positive, got {}", cfg.evolve.t_end));
    }
    if cfg.evolve.sample_every == 0 {
        out.push("sample_every must be at least 1".into());
    }
    match &cfg.perturbation {
        Perturbation::Gaussian { amplitude, width, .. } => {
            if !(*amplitude >= 0.0) {
                out.push(format!("perturbation amplitude must be nonnegative, got {amplitude}"));
            }
            if !(*width > 0.0) {
                out.push(format!("perturbation width must be positive, got {width}"));
            }
        }
        Perturbation::ProfileBump { amplitude } => {
            if !(*amplitude >= 0.0) {
                out.push(format!("perturbation amplitude must be nonnegative, got {amplitude}"));
            }
        }
        Perturbation::File { path } => {
            if !Path::new(path).is_file() {
                out.push(format!("perturbation file {path} does not exist"));
            }
        }
    }
    if !(cfg.sigma > 0.0 && cfg.sigma < cfg.c0) {
        out.push(format!("tail speed sigma must lie in (0, c0), got {}", cfg.sigma));
    }
    if cfg.operator.m < 16 || cfg.operator.m % 2 != 0 {
        out.push(format!("operator size m must be even and at least 16, got {}", cfg.operator.m));
    }
    if !(cfg.operator.half_width > 0.0) {
        out.push(format!("operator half-width must be positive, got {}", cfg.operator.half_width));
    }
    if cfg.kind == Kind::Sweep && (cfg.amplitudes.is_empty() || cfg.amplitudes.iter().any(|a| !(*a >= 0.0))) {
        out.push("sweep amplitudes must be a nonempty list of nonnegative numbers".into());
    }
    if cfg.kind == Kind::Check {
        for c in &cfg.criteria {
            if !criteria::ALL.contains(c) {
                out.push(format!("unknown criterion {c}"));
            }
        }
    }
    if cfg.jobs == 0 {
        out.push("jobs must be at least 1".into());
    }
    out
}

/// Provenance and headline numbers of one run, written as `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub version: String,
    pub wall_time_s: f64,
    pub artifacts: Vec<String>,
    /// Failed checks (`check` and `inequality-suite` kinds).
    pub failed_checks: usize,
    pub summary: Value,
}

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

struct Out {
    dir: PathBuf,
    artifacts: Vec<String>,
}

impl Out {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Out { dir: dir.to_path_buf(), artifacts: vec![] })
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Io(e.to_string()))?;
        w.write_record(header).map_err(|e| Error::Io(e.to_string()))?;
        for r in rows {
            w.write_record(&r).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
        self.artifacts.push(path.display().to_string());
        Ok(())
    }

    fn json(&mut self, name: &str, v: &impl Serialize) -> Result<()> {
        let path = self.dir.join(name);
        let text = serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()))?;
        fs::write(&path, text + "\n")?;
        self.artifacts.push(path.display().to_string());
        Ok(())
    }
}

fn f(x: f64) -> String {
    fmt_f64(x)
}

/// Executes `cfg` and writes its artifacts under `out_dir`; `log` receives one line per finished
/// criterion of the `check` kind. Fails with `Error::Config` listing every violation when the
/// config is invalid.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path, log: &mut dyn FnMut(&str)) -> Result<RunRecord> {
    let violations = validate(cfg);
    if !violations.is_empty() {
        return Err(Error::Config(violations.join("; ")));
    }
    let start = Instant::now();
    let mut out = Out::new(out_dir)?;
    let mut failed = 0;
    let summary = match cfg.kind {
        Kind::SolitonCheck => soliton_check(cfg, &mut out, &mut failed)?,
        Kind::Spectrum => spectrum(cfg, &mut out)?,
        Kind::Semigroup => semigroup(cfg, &mut out)?,
        Kind::Smoothing => smoothing(cfg, &mut out)?,
        Kind::ResolventSweep => resolvent(cfg, &mut out)?,
        Kind::Evolve => evolve_kind(cfg, &mut out)?,
        Kind::Stability => {
            let o = run_stability(&cfg.stability_config())?;
            write_stability(&o, &mut out)?;
            serde_json::to_value(&o.summary).expect("serializable")
        }
        Kind::Sweep => sweep(cfg, &mut out)?,
        Kind::InequalitySuite => {
            let g = Grid::new(cfg.grid.n, cfg.grid.length)?;
            let reps = diagnostics::inequality_suite(&g, cfg.seed, cfg.fields)?;
            failed = reps.iter().filter(|r| !r.passed).count();
            out.json("checks.json", &reps)?;
            json!({ "checks": reps.len(), "failed": failed, "seed": cfg.seed })
        }
        Kind::Check => check(cfg, &mut out, &mut failed, log)?,
    };
    let mut record = RunRecord {
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION").into(),
        wall_time_s: 0.0,
        artifacts: out.artifacts.clone(),
        failed_checks: failed,
        summary,
    };
    let summary_path = out.dir.join("summary.json");
    record.artifacts.push(summary_path.display().to_string());
    record.wall_time_s = start.elapsed().as_secs_f64();
    out.json("summary.json", &record)?;
    Ok(record)
}

fn soliton_check(cfg: &ExperimentConfig, out: &mut Out, failed: &mut usize) -> Result<Value> {
    let g = Grid::new(cfg.grid.n, cfg.grid.length)?;
    let fam = SolitonFamily::new(cfg.p, cfg.c0)?;
    let basis = fam.kernel_basis(&g, 0.0);
    let res = fam.check_generalized_kernel(&basis)?;
    let bio = basis.biorthogonality(g.length() / 4.0)?;
    let ode = fam.ode_residual(&g);
    let bio_dev = (bio[0][0] - 1.0).abs().max((bio[1][1] - 1.0).abs()).max(bio[0][1].abs()).max(bio[1][0].abs());
    let reps = vec![
        CheckReport { name: "ode-residual".into(), passed: ode < 1e-9, worst_ratio: ode / 1e-9, seed: cfg.seed },
        CheckReport { name: "biorthogonality".into(), passed: bio_dev < 1e-8, worst_ratio: bio_dev / 1e-8, seed: cfg.seed },
        CheckReport {
            name: "generalized-kernel".into(),
            passed: res.l_xi1.max(res.l_xi2_minus_xi1) < 1e-6,
            worst_ratio: res.l_xi1.max(res.l_xi2_minus_xi1) / 1e-6,
            seed: cfg.seed,
        },
    ];
    *failed = reps.iter().filter(|r| !r.passed).count();
    out.json("checks.json", &reps)?;
    Ok(json!({
        "alpha": fam.alpha(),
        "beta": fam.beta(),
        "theta1": fam.theta1(),
        "ode_residual": ode,
        "l_xi1": res.l_xi1,
        "l_xi2_minus_xi1": res.l_xi2_minus_xi1,
        "ladj_zeta1_minus_zeta2": res.ladj_zeta1_minus_zeta2,
        "ladj_zeta2": res.ladj_zeta2,
        "biorthogonality": bio,
    }))
}

fn operator(cfg: &ExperimentConfig) -> Result<WeightedOperator> {
    WeightedOperator::new(SolitonFamily::new(cfg.p, cfg.c0)?, cfg.operator_config())
}

fn spectrum(cfg: &ExperimentConfig, out: &mut Out) -> Result<Value> {
    let r = operator(cfg)?.eigen()?;
    out.csv(
        "spectrum.csv",
        &["re", "im", "modulus"],
        r.eigenvalues.iter().map(|l| vec![f(l.re), f(l.im), f(l.norm())]),
    )?;
    Ok(json!({
        "eigenvalues": r.eigenvalues.len(),
        "zero_cluster": r.zero_cluster.iter().map(|l| [l.re, l.im]).collect::<Vec<_>>(),
        "gap": r.gap,
        "essential_floor": r.essential_floor,
        "matches_prediction": r.matches_prediction(),
    }))
}

fn semigroup(cfg: &ExperimentConfig, out: &mut Out) -> Result<Value> {
    let o = operator(cfg)?;
    let gap = o.eigen()?.gap;
    let fit = o.decay_rate(&o.sample(|y| (-y * y).exp()), cfg.operator.decay_t_end, true)?;
    out.csv("track.csv", &["t", "norm_l2a"], fit.times.iter().zip(&fit.norms).map(|(t, n)| vec![f(*t), f(*n)]))?;
    Ok(json!({ "rate": fit.rate, "gap": gap, "rate_over_gap": fit.rate / gap, "fit_residual": fit.residual, "window": fit.window }))
}

fn smoothing(cfg: &ExperimentConfig, out: &mut Out) -> Result<Value> {
    let o = operator(cfg)?;
    let mut rows = vec![];
    let mut fits = vec![];
    for (j, mode, label) in [(0, SmoothingMode::L1Source, "l1a"), (1, SmoothingMode::L1Source, "l1a"), (1, SmoothingMode::L2Source, "l2a")] {
        let s = o.smoothing_exponent(j, mode)?;
        for (t, r) in s.times.iter().zip(&s.ratios) {
            rows.push(vec![j.to_string(), label.to_string(), f(*t), f(*r)]);
        }
        fits.push(json!({ "j": j, "mode": label, "exponent": s.exponent, "residual": s.residual, "local_slopes": s.local_slopes }));
    }
    out.csv("track.csv", &["j", "mode", "t", "ratio"], rows)?;
    Ok(json!({ "fits": fits }))
}

fn resolvent(cfg: &ExperimentConfig, out: &mut Out) -> Result<Value> {
    let o = operator(cfg)?;
    let im = 0.5 * o.essential_floor() * 0.5;
    let s = o.resolvent_sweep(-20.0, 20.0, im, cfg.operator.resolvent_points)?;
    out.csv("track.csv", &["re_lambda", "im_lambda", "norm"], s.samples.iter().map(|(re, n)| vec![f(*re), f(im), f(*n)]))?;
    Ok(json!({ "im_lambda": im, "max_norm": s.max, "m": cfg.operator.m }))
}

fn evolve_kind(cfg: &ExperimentConfig, out: &mut Out) -> Result<Value> {
    let g = Grid::new(cfg.grid.n, cfg.grid.length)?;
    let fam = SolitonFamily::new(cfg.p, cfg.c0)?;
    let v0 = cfg.perturbation.sample(&g, &fam)?;
    let u0 = fam.profile(&g, 0.0).add(&v0)?;
    let mut ec = EvolveConfig::new(cfg.evolve.dt, cfg.evolve.t_end, cfg.evolve.sample_every);
    ec.dealias = cfg.evolve.dealias;
    let tr = evolve::evolve(&u0, cfg.p, &ec)?;
    out.csv(
        "invariants.csv",
        &["t", "momentum", "energy", "max_abs"],
        tr.times.iter().zip(&tr.invariants_series).zip(&tr.states).map(|((t, (m, e)), u)| vec![f(*t), f(*m), f(*e), f(u.max_abs())]),
    )?;
    let t_end = *tr.times.last().expect("samples");
    let last = tr.states.last().expect("samples");
    let err = last.sub(&fam.profile(&g, cfg.c0 * t_end))?.norm(Norm::L2)?;
    Ok(json!({
        "t_end": t_end,
        "momentum_drift": tr.momentum_drift(),
        "energy_drift": tr.energy_drift(),
        "soliton_l2_error": err,
        "amplitude": cfg.amplitude(),
    }))
}

const TRACK_HEADER: [&str; 20] = [
    "t", "c", "x", "gamma", "refined_c", "xdot_minus_c", "cdot", "gamma_dot", "residual", "iters", "orth1", "orth2", "v1_l2",
    "v1_w1", "v2_l2a", "v2_h1a", "v_l2", "orbit_c0", "orbit_ct", "tail",
];

fn write_stability(o: &StabilityOutcome, out: &mut Out) -> Result<()> {
    let rows = o.samples().iter().zip(&o.tail).map(|(s, (_, tail))| {
        let mut r: Vec<String> = [s.t, s.c, s.x, s.gamma, s.refined_c, s.xdot_minus_c, s.cdot, s.gamma_dot, s.residual]
            .iter()
            .map(|v| f(*v))
            .collect();
        r.push(s.iters.to_string());
        r.extend([s.orth1, s.orth2, s.v1_l2, s.v1_w1, s.v2_l2a, s.v2_h1a, s.v_l2, s.orbit_c0, s.orbit_ct, *tail].iter().map(|v| f(*v)));
        r
    });
    out.csv("track.csv", &TRACK_HEADER, rows)?;
    out.csv(
        "invariants.csv",
        &["t", "momentum", "energy"],
        o.samples().iter().zip(&o.u_invariants).map(|(s, (m, e))| vec![f(s.t), f(*m), f(*e)]),
    )?;
    Ok(())
}

fn sweep(cfg: &ExperimentConfig, out: &mut Out) -> Result<Value> {
    let runs = run_sweep(&cfg.stability_config(), &cfg.amplitudes, cfg.jobs)?;
    for (k, o) in runs.iter().enumerate() {
        let mut sub = Out::new(&out.dir.join(format!("run-{k:02}")))?;
        write_stability(o, &mut sub)?;
        sub.json("summary.json", &o.summary)?;
        out.artifacts.extend(sub.artifacts);
    }
    let sw = SweepSummary::from_runs(&runs);
    out.csv(
        "track.csv",
        &["amplitude", "v0_l2", "c_plus_minus_c0", "orbit_ratio", "v2_decay", "tail_decay", "refined_variation", "sup_gamma_minus_x"],
        (0..runs.len()).map(|k| {
            vec![
                f(sw.amplitudes[k]),
                f(sw.v0_l2[k]),
                f(runs[k].summary.c_plus_minus_c0),
                f(sw.orbit_ratio[k]),
                f(sw.v2_decay[k]),
                f(sw.tail_decay[k]),
                f(sw.refined_variation[k]),
                f(sw.gamma_gap[k]),
            ]
        }),
    )?;
    Ok(serde_json::to_value(&sw).expect("serializable"))
}

fn check(cfg: &ExperimentConfig, out: &mut Out, failed: &mut usize, log: &mut dyn FnMut(&str)) -> Result<Value> {
    let ids: Vec<u32> = if cfg.criteria.is_empty() { criteria::ALL.to_vec() } else { cfg.criteria.clone() };
    let mut suite = Suite::new(cfg.seed, cfg.jobs);
    let mut results: Vec<CriterionOutcome> = vec![];
    for id in ids {
        let r = suite.run(id)?;
        log(&r.line());
        results.push(r);
    }
    *failed = results.iter().filter(|r| !r.passed).count();
    out.json("checks.json", &results)?;
    Ok(json!({
        "criteria": results.len(),
        "passed": results.len() - *failed,
        "failed": results.iter().filter(|r| !r.passed).map(|r| r.id).collect::<Vec<_>>(),
    }))
}
