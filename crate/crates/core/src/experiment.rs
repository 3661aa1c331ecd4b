//! Nonlinear stability runs: `u(0) = φ_{c₀} + v₀` and the free solution `ṽ₁(0) = v₀` marched
//! together and decomposed at every sample.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{invariants, EvolveConfig, Evolver, Sponge, Trajectory};
use crate::diagnostics::{virial_series, VirialConfig, XTilde};
use crate::grid::{Field, Grid, Norm};
use crate::linop::linear_fit;
use crate::modulation::{FitOptions, MQuantities, ModulationTrack, TrackOptions, TrackSample};
use crate::soliton::SolitonFamily;

/// Initial perturbation `v₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Perturbation {
    /// `amplitude · exp(-((x - offset)/width)²)`.
    Gaussian {
        amplitude: f64,
        #[serde(default = "unit")]
        width: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `amplitude · φ_{c₀}(x)`.
    ProfileBump { amplitude: f64 },
    /// Samples read from a one-column text file, one value per node.
    File { path: String },
}

fn unit() -> f64 {
    1.0
}

impl Default for Perturbation {
    fn default() -> Self {
        Perturbation::Gaussian { amplitude: 1e-2, width: 1.0, offset: 0.0 }
    }
}

impl Perturbation {
    pub fn sample(&self, grid: &Arc<Grid<f64>>, fam: &SolitonFamily<f64>) -> Result<Field<f64>> {
        match self {
            Perturbation::Gaussian { amplitude, width, offset } => {
                Ok(Field::from_fn(grid, |x| amplitude * (-((x - offset) / width).powi(2)).exp()))
            }
            Perturbation::ProfileBump { amplitude } => Ok(fam.profile(grid, 0.0).scale(*amplitude)),
            Perturbation::File { path } => {
                let text = std::fs::read_to_string(path)?;
                let vals = text
                    .split_whitespace()
                    .map(|s| s.parse::<f64>().map_err(|e| Error::Config(format!("{path}: {e}"))))
                    .collect::<Result<Vec<_>>>()?;
                Field::new(grid.clone(), vals)
            }
        }
    }

    pub fn with_amplitude(&self, a: f64) -> Self {
        match self {
            Perturbation::Gaussian { width, offset, .. } => {
                Perturbation::Gaussian { amplitude: a, width: *width, offset: *offset }
            }
            Perturbation::ProfileBump { .. } => Perturbation::ProfileBump { amplitude: a },
            other => other.clone(),
        }
    }
}

/// Everything needed to reproduce one stability run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    pub p: u32,
    pub c0: f64,
    /// Weight rate of the `L²_a` measurements.
    pub a: f64,
    pub n: usize,
    pub length: f64,
    pub dt: f64,
    pub t_end: f64,
    pub sample_every: usize,
    pub dealias: bool,
    pub perturbation: Perturbation,
    /// Speed of the computational frame; `None` means `c₀`.
    pub frame_speed: Option<f64>,
    pub sponge: Option<Sponge<f64>>,
    /// Lower edge `σ` of the tail region `x ≥ σt`.
    pub sigma: f64,
}

impl StabilityConfig {
    pub fn new(p: u32, amplitude: f64) -> Self {
        StabilityConfig {
            p,
            c0: 1.0,
            a: 0.25,
            n: 2048,
            length: 200.0,
            dt: 1e-3,
            t_end: 80.0,
            sample_every: 100,
            dealias: false,
            perturbation: Perturbation::Gaussian { amplitude, width: 1.0, offset: 0.0 },
            frame_speed: None,
            sponge: Some(Sponge { strength: 20.0, width: 30.0 }),
            sigma: 0.5,
        }
    }

    pub fn evolve_config(&self) -> EvolveConfig<f64> {
        EvolveConfig {
            dt: self.dt,
            t_end: self.t_end,
            dealias: self.dealias,
            sample_every: self.sample_every,
            integrator: Default::default(),
            frame_speed: self.frame_speed.unwrap_or(self.c0),
            sponge: self.sponge,
        }
    }
}

/// Marches `u` and `ṽ₁` in lockstep and calls `visit(t, u, ṽ₁, frame offset)` at every sample.
pub fn run_pair(
    u0: &Field<f64>,
    v0: &Field<f64>,
    p: u32,
    cfg: &EvolveConfig<f64>,
    mut visit: impl FnMut(f64, &Field<f64>, &Field<f64>, f64) -> Result<()>,
) -> Result<()> {
    let mut eu = Evolver::new(u0, p, cfg)?;
    let mut ev = Evolver::new(v0, p, cfg)?;
    let total = cfg.steps();
    visit(0.0, u0, v0, 0.0)?;
    while eu.steps_taken() < total {
        let k = cfg.sample_every.min(total - eu.steps_taken());
        eu.advance(k)?;
        ev.advance(k)?;
        let t = eu.time();
        visit(t, &eu.field(), &ev.field(), cfg.frame_speed * t)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilitySummary {
    pub p: u32,
    pub c0: f64,
    pub v0_l2: f64,
    pub v0_h1: f64,
    pub c_plus: f64,
    pub c_plus_minus_c0: f64,
    pub sup_orbit_c0: f64,
    pub sup_orbit_ct: f64,
    pub orbit_ratio: f64,
    pub v2_final: f64,
    pub v2_max: f64,
    pub tail_initial: f64,
    pub tail_final: f64,
    pub refined_variation: f64,
    pub sup_gamma_minus_x: f64,
    pub max_orthogonality: f64,
    pub max_fit_residual: f64,
    pub consistency_x: f64,
    pub consistency_c: f64,
    pub sup_dx_v1: f64,
    /// Worst `I + D + S - I(0)` relative to `I(0)` for `ṽ₁` with the weight riding on the fitted
    /// `x(t)`, `c₁ = c₀/2`; absent when the data are too large for the ledger.
    pub virial_excess: Option<f64>,
    pub m: MQuantities<f64>,
}

#[derive(Debug, Clone)]
pub struct StabilityOutcome {
    pub config: StabilityConfig,
    pub track: ModulationTrack<f64>,
    /// Free solution `ṽ₁` at every sample (computational frame).
    pub v1_states: Vec<Field<f64>>,
    /// `(t, ‖u - φ_{c₊}(· - x(t))‖_{L²(x ≥ σt)})`.
    pub tail: Vec<(f64, f64)>,
    /// `(momentum, energy)` of `u` at every sample.
    pub u_invariants: Vec<(f64, f64)>,
    pub summary: StabilitySummary,
}

impl StabilityOutcome {
    pub fn samples(&self) -> &[TrackSample<f64>] {
        &self.track.samples
    }

    /// The free solution `ṽ₁` as a trajectory, for the virial and H¹ diagnostics.
    pub fn v1_trajectory(&self) -> Trajectory<f64> {
        let cfg = self.config.evolve_config();
        Trajectory {
            times: self.track.samples.iter().map(|s| s.t).collect(),
            states: self.v1_states.clone(),
            invariants_series: self.v1_states.iter().map(|v| invariants(v, self.config.p)).collect(),
            frame_speed: cfg.frame_speed,
            sponge: cfg.sponge,
        }
    }
}

pub fn run_stability(cfg: &StabilityConfig) -> Result<StabilityOutcome> {
    let grid = Grid::new(cfg.n, cfg.length)?;
    let fam = SolitonFamily::new(cfg.p, cfg.c0)?;
    let v0 = cfg.perturbation.sample(&grid, &fam)?;
    let u0 = fam.profile(&grid, 0.0).add(&v0)?;
    let ecfg = cfg.evolve_config();
    let mut track = ModulationTrack::new(cfg.p, cfg.c0, &grid, TrackOptions { a: cfg.a, fit: FitOptions::default() })?;
    let mut u_states = vec![];
    let mut v1_states = vec![];
    let mut offsets = vec![];
    let mut u_invariants = vec![];
    let mut sup_dx = 0.0f64;
    run_pair(&u0, &v0, cfg.p, &ecfg, |t, u, v1, off| {
        track.observe(t, u, v1, off)?;
        sup_dx = sup_dx.max(v1.spectral_deriv(1)?.norm(Norm::L2)?);
        u_invariants.push(invariants(u, cfg.p));
        u_states.push(u.clone());
        v1_states.push(v1.clone());
        offsets.push(off);
        Ok(())
    })?;
    let last = *track.samples.last().expect("at least one sample");
    let c_plus = last.refined_c;
    let fam_plus = SolitonFamily::new(cfg.p, c_plus)?;
    let mut tail = Vec::with_capacity(u_states.len());
    for ((s, u), off) in track.samples.iter().zip(&u_states).zip(&offsets) {
        tail.push((s.t, crate::diagnostics::tail_norm(u, &fam_plus, s.x - off, cfg.sigma * s.t - off)?));
    }
    let samples = &track.samples;
    let v0_l2 = v0.norm(Norm::L2)?;
    let sup_orbit_c0 = samples.iter().map(|s| s.orbit_c0).fold(0.0, f64::max);
    let (cx, cc) = track.consistency_error();
    let virial_excess = {
        let traj = Trajectory {
            times: samples.iter().map(|s| s.t).collect(),
            states: v1_states.clone(),
            invariants_series: vec![],
            frame_speed: ecfg.frame_speed,
            sponge: ecfg.sponge,
        };
        let mut vc = VirialConfig::new(0.5 * cfg.c0);
        vc.xtilde = XTilde::Path { positions: samples.iter().map(|s| s.x).collect() };
        virial_series(&traj, &vc).ok().map(|s| if s.i[0] > 0.0 { s.max_excess().1 / s.i[0] } else { 0.0 })
    };
    let summary = StabilitySummary {
        p: cfg.p,
        c0: cfg.c0,
        v0_l2,
        v0_h1: v0.norm(Norm::H1)?,
        c_plus,
        c_plus_minus_c0: c_plus - cfg.c0,
        sup_orbit_c0,
        sup_orbit_ct: samples.iter().map(|s| s.orbit_ct).fold(0.0, f64::max),
        orbit_ratio: if v0_l2 > 0.0 { sup_orbit_c0 / v0_l2.sqrt() } else { 0.0 },
        v2_final: last.v2_l2a,
        v2_max: samples.iter().map(|s| s.v2_l2a).fold(0.0, f64::max),
        tail_initial: tail[0].1,
        tail_final: tail.last().expect("nonempty").1,
        refined_variation: track.refined_variation(),
        sup_gamma_minus_x: samples.iter().map(|s| (s.gamma - s.x).abs()).fold(0.0, f64::max),
        max_orthogonality: track.max_orthogonality(),
        max_fit_residual: samples.iter().map(|s| s.residual).fold(0.0, f64::max),
        consistency_x: cx,
        consistency_c: cc,
        sup_dx_v1: sup_dx,
        virial_excess,
        m: track.m_quantities(),
    };
    Ok(StabilityOutcome { config: cfg.clone(), track, v1_states, tail, u_invariants, summary })
}

/// Scaling of one amplitude sweep. Ratios compare consecutive amplitudes, larger over smaller.
#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub p: u32,
    pub amplitudes: Vec<f64>,
    pub v0_l2: Vec<f64>,
    pub c_shift: Vec<f64>,
    /// Log-log slope of `|c₊ - c₀|` against `‖v₀‖`.
    pub c_slope: f64,
    pub orbit_ratio: Vec<f64>,
    /// `max / min` of the orbit ratios.
    pub orbit_spread: f64,
    /// `‖v₂(T)‖_{L²_a} / max_t‖v₂‖_{L²_a}` per run.
    pub v2_decay: Vec<f64>,
    /// `tail(T) / tail(0)` per run.
    pub tail_decay: Vec<f64>,
    pub refined_variation: Vec<f64>,
    pub refined_ratios: Vec<f64>,
    pub gamma_gap: Vec<f64>,
    pub gamma_ratios: Vec<f64>,
    pub max_orthogonality: f64,
}

fn consecutive_ratios(v: &[f64]) -> Vec<f64> {
    v.windows(2).map(|w| w[0] / w[1]).collect()
}

impl SweepSummary {
    pub fn from_runs(runs: &[StabilityOutcome]) -> Self {
        let sm: Vec<&StabilitySummary> = runs.iter().map(|r| &r.summary).collect();
        let amplitudes = runs
            .iter()
            .map(|r| match &r.config.perturbation {
                Perturbation::Gaussian { amplitude, .. } | Perturbation::ProfileBump { amplitude } => *amplitude,
                Perturbation::File { .. } => f64::NAN,
            })
            .collect();
        let v0_l2: Vec<f64> = sm.iter().map(|s| s.v0_l2).collect();
        let c_shift: Vec<f64> = sm.iter().map(|s| s.c_plus_minus_c0.abs()).collect();
        let lx: Vec<f64> = v0_l2.iter().map(|v| v.ln()).collect();
        let ly: Vec<f64> = c_shift.iter().map(|v| v.ln()).collect();
        let c_slope = if runs.len() >= 2 { linear_fit(&lx, &ly).0 } else { f64::NAN };
        let orbit_ratio: Vec<f64> = sm.iter().map(|s| s.orbit_ratio).collect();
        let hi = orbit_ratio.iter().copied().fold(0.0, f64::max);
        let lo = orbit_ratio.iter().copied().fold(f64::INFINITY, f64::min);
        let refined_variation: Vec<f64> = sm.iter().map(|s| s.refined_variation).collect();
        let gamma_gap: Vec<f64> = sm.iter().map(|s| s.sup_gamma_minus_x).collect();
        SweepSummary {
            p: sm.first().map(|s| s.p).unwrap_or(0),
            amplitudes,
            v0_l2,
            c_slope,
            c_shift,
            orbit_spread: hi / lo,
            orbit_ratio,
            v2_decay: sm.iter().map(|s| s.v2_final / s.v2_max).collect(),
            tail_decay: sm.iter().map(|s| s.tail_final / s.tail_initial).collect(),
            refined_ratios: consecutive_ratios(&refined_variation),
            refined_variation,
            gamma_ratios: consecutive_ratios(&gamma_gap),
            gamma_gap,
            max_orthogonality: sm.iter().map(|s| s.max_orthogonality).fold(0.0, f64::max),
        }
    }
}

/// Runs `base` once per amplitude on a pool of `jobs` workers; results keep the amplitude order.
pub fn run_sweep(base: &StabilityConfig, amplitudes: &[f64], jobs: usize) -> Result<Vec<StabilityOutcome>> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Param(format!("worker pool: {e}")))?;
    pool.install(|| {
        amplitudes
            .par_iter()
            .map(|&a| {
                let mut cfg = base.clone();
                cfg.perturbation = cfg.perturbation.with_amplitude(a);
                run_stability(&cfg)
            })
            .collect()
    })
}
