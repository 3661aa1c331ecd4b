//! Pseudospectral integration of `∂_t u + ∂_x³u + 3∂_x(u^p) = 0`.

use std::sync::Arc;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::real::Real;

pub const BLOW_UP: f64 = 1e6;
/// Upper bound on `dt · kmax³`.
pub const STIFFNESS_GUARD: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    #[default]
    IfRk4,
}

/// Linear damping `σ(x) = strength · sin²(πz/2)` near the periodic seam, with `z` rising from 0 to
/// 1 across the outermost `width` of each half of the box. Absorbs outgoing radiation before it
/// re-enters through the seam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sponge<T> {
    pub strength: T,
    pub width: T,
}

impl<T: Real> Sponge<T> {
    pub fn profile(&self, grid: &Grid<T>) -> Vec<T> {
        let half = grid.length() / T::lit(2.0);
        (0..grid.n())
            .map(|j| {
                let z = ((grid.node(j).abs() - (half - self.width)) / self.width).max(T::zero()).min(T::one());
                let s = (T::FRAC_PI_2() * z).sin();
                self.strength * s * s
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + serde::de::DeserializeOwned")]
pub struct EvolveConfig<T> {
    pub dt: T,
    pub t_end: T,
    pub dealias: bool,
    pub sample_every: usize,
    #[serde(default)]
    pub integrator: Integrator,
    /// Speed of the computational frame; 0 is the lab frame.
    #[serde(default = "zero")]
    pub frame_speed: T,
    #[serde(default)]
    pub sponge: Option<Sponge<T>>,
}

fn zero<T: Real>() -> T {
    T::zero()
}

impl<T: Real> EvolveConfig<T> {
    pub fn new(dt: T, t_end: T, sample_every: usize) -> Self {
        EvolveConfig {
            dt,
            t_end,
            dealias: false,
            sample_every,
            integrator: Integrator::IfRk4,
            frame_speed: T::zero(),
            sponge: None,
        }
    }

    pub fn validate(&self, grid: &Grid<T>) -> Result<()> {
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(Error::Param(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.t_end >= T::zero()) {
            return Err(Error::Param(format!("t_end = {} must be nonnegative", self.t_end)));
        }
        if self.sample_every == 0 {
            return Err(Error::Param("sample_every must be at least 1".into()));
        }
        let k = grid.kmax().to_f64_lossy();
        let stiff = self.dt.to_f64_lossy() * k * k * k;
        if stiff > STIFFNESS_GUARD {
            return Err(Error::Param(format!(
                "dt * kmax^3 = {stiff:.3} exceeds {STIFFNESS_GUARD}; reduce dt or n"
            )));
        }
        if let Some(s) = &self.sponge {
            if !(s.width > T::zero()) || s.width > grid.length() / T::lit(4.0) || s.strength < T::zero() {
                return Err(Error::Param("sponge width must lie in (0, L/4] and strength be nonnegative".into()));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round().to_usize().unwrap_or(0)
    }
}

/// Marching state of one solution in Fourier space.
pub struct Evolver<T: Real> {
    grid: Arc<Grid<T>>,
    p: u32,
    dt: T,
    frame_speed: T,
    e_half: Vec<Complex<T>>,
    e_full: Vec<Complex<T>>,
    /// `-i k` on retained modes, zero on dealiased ones.
    dfac: Vec<Complex<T>>,
    sigma: Option<Vec<T>>,
    uhat: Vec<Complex<T>>,
    steps_taken: usize,
    scratch: Vec<Complex<T>>,
    bufs: [Vec<Complex<T>>; 6],
    tmp: Vec<Complex<T>>,
}

impl<T: Real> Evolver<T> {
    pub fn new(u0: &Field<T>, p: u32, cfg: &EvolveConfig<T>) -> Result<Self> {
        if p != 2 && p != 3 {
            return Err(Error::Unsupported(format!("p = {p}")));
        }
        let grid = u0.grid().clone();
        cfg.validate(&grid)?;
        let n = grid.n();
        let dt = cfg.dt;
        let half = dt / T::lit(2.0);
        let cut = grid.kmax() * T::lit(2.0) / T::lit(3.0);
        let nyq = grid.nyquist();
        let mut e_half = Vec::with_capacity(n);
        let mut e_full = Vec::with_capacity(n);
        let mut dfac = Vec::with_capacity(n);
        for j in 0..n {
            let k = grid.wavenumber(j);
            let om = k * k * k + cfg.frame_speed * k;
            e_half.push(Complex::from_polar(T::one(), om * half));
            e_full.push(Complex::from_polar(T::one(), om * dt));
            let keep = j != nyq && (!cfg.dealias || k.abs() < cut);
            dfac.push(if keep { Complex::new(T::zero(), -k) } else { Complex::new(T::zero(), T::zero()) });
        }
        let mut uhat = u0.spectrum();
        uhat[nyq] = Complex::new(T::zero(), T::zero());
        let sigma = cfg.sponge.map(|s| s.profile(&grid));
        let scratch = vec![Complex::new(T::zero(), T::zero()); grid.scratch_len()];
        let z = vec![Complex::new(T::zero(), T::zero()); n];
        Ok(Evolver {
            p,
            dt,
            frame_speed: cfg.frame_speed,
            e_half,
            e_full,
            dfac,
            sigma,
            uhat,
            steps_taken: 0,
            scratch,
            bufs: [z.clone(), z.clone(), z.clone(), z.clone(), z.clone(), z.clone()],
            tmp: z,
            grid,
        })
    }

    pub fn time(&self) -> T {
        T::from_usize(self.steps_taken).unwrap() * self.dt
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    pub fn frame_speed(&self) -> T {
        self.frame_speed
    }

    pub fn field(&self) -> Field<T> {
        Field::from_vec_unchecked(self.grid.clone(), self.grid.inverse_real(self.uhat.clone()))
    }

    /// Nonlinear and damping tendency of the state in `bufs[src]`, written to `bufs[dst]`.
    fn tendency(&mut self, src: usize, dst: usize) -> Result<()> {
        let n = self.grid.n();
        let inv_n = T::one() / T::from_usize(n).unwrap();
        let three = T::lit(3.0);
        let (a, b) = self.bufs.split_at_mut(dst.max(src));
        let (s, d) = if src < dst { (&a[src], &mut b[0]) } else { (&b[0], &mut a[dst]) };
        d.copy_from_slice(s);
        self.grid.inverse_in_place(d, &mut self.scratch);
        let mut umax = T::zero();
        for z in d.iter_mut() {
            let u = z.re * inv_n;
            umax = umax.max(u.abs());
            let damp = match &self.sigma {
                Some(_) => u,
                None => T::zero(),
            };
            *z = Complex::new(three * u.powi(self.p as i32), damp);
        }
        if !(umax.to_f64_lossy() <= BLOW_UP) {
            return Err(Error::BlowUp { t: self.time().to_f64_lossy(), max: umax.to_f64_lossy() });
        }
        if let Some(sig) = &self.sigma {
            for (z, &sg) in d.iter_mut().zip(sig) {
                z.im = z.im * sg;
            }
        }
        self.grid.forward_in_place(d, &mut self.scratch);
        match &self.sigma {
            None => {
                for (z, f) in d.iter_mut().zip(&self.dfac) {
                    *z = *z * *f;
                }
            }
            Some(_) => {
                // Real parts were 3u^p and imaginary parts σu: untangle the two transforms.
                let half = T::lit(0.5);
                let out = &mut self.tmp;
                for j in 0..n {
                    let jm = (n - j) % n;
                    let zj = d[j];
                    let zm = d[jm].conj();
                    let fw = (zj + zm) * half;
                    let fs = (zj - zm) * Complex::new(T::zero(), -half);
                    out[j] = fw * self.dfac[j] - fs;
                }
                d.copy_from_slice(out);
            }
        }
        Ok(())
    }

    /// One integrating-factor RK4 step.
    pub fn step(&mut self) -> Result<()> {
        let n = self.grid.n();
        let h = self.dt;
        let h2 = h / T::lit(2.0);
        let h6 = h / T::lit(6.0);
        // bufs: 0 stage input, 1 k1, 2 k2, 3 k3, 4 k4, 5 scratch stage input
        self.bufs[0].copy_from_slice(&self.uhat);
        self.tendency(0, 1)?;
        for j in 0..n {
            self.bufs[5][j] = self.e_half[j] * (self.uhat[j] + self.bufs[1][j] * h2);
        }
        self.tendency(5, 2)?;
        for j in 0..n {
            self.bufs[5][j] = self.e_half[j] * self.uhat[j] + self.bufs[2][j] * h2;
        }
        self.tendency(5, 3)?;
        for j in 0..n {
            self.bufs[5][j] = self.e_full[j] * self.uhat[j] + self.e_half[j] * self.bufs[3][j] * h;
        }
        self.tendency(5, 4)?;
        for j in 0..n {
            let [_, k1, k2, k3, k4, _] = &self.bufs;
            self.uhat[j] = self.e_full[j] * (self.uhat[j] + k1[j] * h6)
                + self.e_half[j] * (k2[j] + k3[j]) * (h6 * T::lit(2.0))
                + k4[j] * h6;
        }
        self.steps_taken += 1;
        Ok(())
    }

    pub fn advance(&mut self, steps: usize) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }
}

/// Samples of one run.
#[derive(Debug, Clone)]
pub struct Trajectory<T: Real> {
    pub times: Vec<T>,
    pub states: Vec<Field<T>>,
    /// `(momentum, energy)` per sample.
    pub invariants_series: Vec<(T, T)>,
    pub frame_speed: T,
    pub sponge: Option<Sponge<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn momentum_drift(&self) -> T {
        let m0 = self.invariants_series.first().map(|x| x.0).unwrap_or(T::zero());
        self.invariants_series
            .iter()
            .map(|x| if m0 > T::zero() { (x.0 - m0).abs() / m0 } else { (x.0 - m0).abs() })
            .fold(T::zero(), T::max)
    }

    pub fn energy_drift(&self) -> T {
        let e0 = self.invariants_series.first().map(|x| x.1).unwrap_or(T::zero());
        self.invariants_series
            .iter()
            .map(|x| if e0 != T::zero() { (x.1 - e0).abs() / e0.abs() } else { (x.1 - e0).abs() })
            .fold(T::zero(), T::max)
    }

    /// Lab-frame position of the computational origin at sample `i`.
    pub fn frame_offset(&self, i: usize) -> T {
        self.frame_speed * self.times[i]
    }
}

/// One step from a physical field.
pub fn step<T: Real>(u: &Field<T>, p: u32, cfg: &EvolveConfig<T>) -> Result<Field<T>> {
    let mut ev = Evolver::new(u, p, cfg)?;
    ev.step()?;
    Ok(ev.field())
}

/// Runs to `cfg.t_end`, sampling every `cfg.sample_every` steps and at the final step.
pub fn evolve<T: Real>(u0: &Field<T>, p: u32, cfg: &EvolveConfig<T>) -> Result<Trajectory<T>> {
    let mut traj = Trajectory { times: vec![], states: vec![], invariants_series: vec![], frame_speed: cfg.frame_speed, sponge: cfg.sponge };
    run_with(u0, p, cfg, |t, u| {
        traj.times.push(t);
        traj.invariants_series.push(invariants(u, p));
        traj.states.push(u.clone());
        Ok(())
    })?;
    Ok(traj)
}

/// Streams samples to `visit` without storing them.
pub fn run_with<T: Real>(
    u0: &Field<T>,
    p: u32,
    cfg: &EvolveConfig<T>,
    mut visit: impl FnMut(T, &Field<T>) -> Result<()>,
) -> Result<()> {
    let mut ev = Evolver::new(u0, p, cfg)?;
    let total = cfg.steps();
    visit(T::zero(), &ev.field())?;
    while ev.steps_taken() < total {
        let k = cfg.sample_every.min(total - ev.steps_taken());
        ev.advance(k)?;
        visit(ev.time(), &ev.field())?;
    }
    Ok(())
}

/// `(∫u², ∫ ½u_x² - 3/(p+1) u^{p+1})`.
pub fn invariants<T: Real>(u: &Field<T>, p: u32) -> (T, T) {
    let m = u.inner(u).expect("same grid");
    let ux = u.spectral_deriv(1).expect("order 1");
    let coef = T::lit(3.0) / T::from_u32(p + 1).unwrap();
    let dens: T = ux
        .values()
        .iter()
        .zip(u.values())
        .map(|(&d, &v)| T::lit(0.5) * d * d - coef * v.powi(p as i32 + 1))
        .sum();
    (m, dens * u.grid().h())
}
