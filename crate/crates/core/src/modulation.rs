//! Soliton-plus-remainder decomposition `u - ṽ₁ = φ_{c(t)}(· - x(t)) + v₂`, the modulation
//! system for `(x, c)`, the refined speed and the running M-quantities.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, Norm, WeightSpec};
use crate::real::Real;
use crate::soliton::{dc_zeta, KernelBasis, SolitonFamily};

/// Newton controls for [`fit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions<T> {
    /// Half-width of the pairing window; `None` means a quarter of the domain.
    pub window: Option<T>,
    pub tol: T,
    pub max_iter: usize,
    /// Finite-difference Jacobian refresh cadence.
    pub refresh_every: usize,
}

impl<T: Real> Default for FitOptions<T> {
    fn default() -> Self {
        FitOptions { window: None, tol: T::lit(1e-10), max_iter: 25, refresh_every: 5 }
    }
}

impl<T: Real> FitOptions<T> {
    pub fn window_for(&self, grid: &Grid<T>) -> T {
        self.window.unwrap_or(grid.length() / T::lit(4.0))
    }
}

#[derive(Debug, Clone)]
pub struct FitResult<T: Real> {
    pub x: T,
    pub c: T,
    /// `w(· + x) - φ_c` in the soliton frame.
    pub v2: Field<T>,
    /// `|G|` at the returned parameters.
    pub residual: T,
    pub iters: usize,
}

/// `G(x, c) = (⟨w(·+x) - φ_c, ζ¹_c⟩, ⟨w(·+x) - φ_c, ζ²_c⟩)`.
fn fit_map<T: Real>(p: u32, w: &Field<T>, x: T, c: T, window: T) -> Result<([T; 2], Field<T>)> {
    let fam = SolitonFamily::new(p, c)?;
    let g = w.grid();
    let basis = fam.kernel_basis(g, T::zero());
    let v2 = w.translate(x).sub(&basis.phi)?;
    let (a, b) = basis.pairings(&v2, window)?;
    Ok(([a, b], v2))
}

fn solve2<T: Real>(j: [[T; 2]; 2], r: [T; 2]) -> Option<[T; 2]> {
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    if det == T::zero() || !det.is_finite() {
        return None;
    }
    Some([(j[1][1] * r[0] - j[0][1] * r[1]) / det, (j[0][0] * r[1] - j[1][0] * r[0]) / det])
}

fn norm2<T: Real>(g: [T; 2]) -> T {
    (g[0] * g[0] + g[1] * g[1]).sqrt()
}

/// Solves `G(x, c) = 0` for the phase and speed of the soliton part of `w`.
///
/// Quasi-Newton: the Jacobian starts at its value `[[1, 0], [0, -1]]` at an exact soliton and is
/// replaced by a central-difference Jacobian every `refresh_every` iterations.
pub fn fit<T: Real>(p: u32, w: &Field<T>, guess: (T, T), opts: &FitOptions<T>) -> Result<FitResult<T>> {
    let window = opts.window_for(w.grid());
    let (mut x, mut c) = guess;
    let one = T::one();
    let mut jac = [[one, T::zero()], [T::zero(), -one]];
    let (mut g, mut v2) = fit_map(p, w, x, c, window)?;
    let mut res = norm2(g);
    let stop = opts.tol * T::lit(1e-3);
    let mut iters = 0;
    while iters < opts.max_iter && res > stop {
        if iters > 0 && opts.refresh_every > 0 && iters % opts.refresh_every == 0 {
            jac = fd_jacobian(p, w, x, c, window)?;
        }
        let d = solve2(jac, g).ok_or(Error::FitDiverged { iters, residual: res.to_f64_lossy() })?;
        let (xn, cn) = (x - d[0], c - d[1]);
        if !(cn > T::zero()) || !cn.is_finite() || !xn.is_finite() {
            return Err(Error::BadSpeed(cn.to_f64_lossy()));
        }
        let (gn, vn) = fit_map(p, w, xn, cn, window)?;
        let rn = norm2(gn);
        iters += 1;
        let stalled = rn >= T::lit(0.5) * res && rn < opts.tol;
        x = xn;
        c = cn;
        g = gn;
        v2 = vn;
        res = rn;
        if stalled {
            break;
        }
    }
    if !(res < opts.tol) {
        return Err(Error::FitDiverged { iters, residual: res.to_f64_lossy() });
    }
    Ok(FitResult { x, c, v2, residual: res, iters })
}

fn fd_jacobian<T: Real>(p: u32, w: &Field<T>, x: T, c: T, window: T) -> Result<[[T; 2]; 2]> {
    let hx = T::lit(1e-5);
    let hc = T::lit(1e-5) * c;
    let (gxp, _) = fit_map(p, w, x + hx, c, window)?;
    let (gxm, _) = fit_map(p, w, x - hx, c, window)?;
    let (gcp, _) = fit_map(p, w, x, c + hc, window)?;
    let (gcm, _) = fit_map(p, w, x, c - hc, window)?;
    let two = T::lit(2.0);
    Ok([
        [(gxp[0] - gxm[0]) / (two * hx), (gcp[0] - gcm[0]) / (two * hc)],
        [(gxp[1] - gxm[1]) / (two * hx), (gcp[1] - gcm[1]) / (two * hc)],
    ])
}

/// `v`, `v₁`, `v₂` in the soliton frame `y = x - x(t)`.
#[derive(Debug, Clone)]
pub struct Split<T: Real> {
    pub v: Field<T>,
    pub v1: Field<T>,
    pub v2: Field<T>,
}

pub fn split<T: Real>(fam: &SolitonFamily<T>, u: &Field<T>, v1_lab: &Field<T>, x: T) -> Result<Split<T>> {
    u.same_grid(v1_lab)?;
    let phi = fam.profile(u.grid(), T::zero());
    let v = u.translate(x).sub(&phi)?;
    let v1 = v1_lab.translate(x);
    let v2 = v.sub(&v1)?;
    Ok(Split { v, v1, v2 })
}

/// The nonlinear remainders of the `v₂` equation, with the extra splitting used for `p = 3`.
#[derive(Debug, Clone)]
pub struct NonlinearTerms<T: Real> {
    pub n: Field<T>,
    pub n1: Field<T>,
    pub n2: Field<T>,
    /// `(N₁₁, N₁₂, N₂₁, N₂₂)`, present for `p = 3`.
    pub cubic: Option<[Field<T>; 4]>,
}

/// `N₁ = f(φ+v₁) - f(φ) - f(v₁)` and `N₂ = f(φ+v) - f(φ+v₁) - f'(φ)v₂`, expanded by hand so that
/// no cancellation between O(1) terms occurs.
pub fn nonlinear_terms<T: Real>(fam: &SolitonFamily<T>, v1: &Field<T>, v2: &Field<T>) -> Result<NonlinearTerms<T>> {
    v1.same_grid(v2)?;
    let g = v1.grid();
    let phi = fam.profile(g, T::zero());
    let (f, a, b) = (phi.values(), v1.values(), v2.values());
    let n = g.n();
    let make = |vals: Vec<T>| Field::from_vec_unchecked(g.clone(), vals);
    if fam.p() == 2 {
        let six = T::lit(6.0);
        let three = T::lit(3.0);
        let n1: Vec<T> = (0..n).map(|j| six * f[j] * a[j]).collect();
        let n2: Vec<T> = (0..n).map(|j| six * a[j] * b[j] + three * b[j] * b[j]).collect();
        let tot = n1.iter().zip(&n2).map(|(&x, &y)| x + y).collect();
        return Ok(NonlinearTerms { n: make(tot), n1: make(n1), n2: make(n2), cubic: None });
    }
    let nine = T::lit(9.0);
    let three = T::lit(3.0);
    let two = T::lit(2.0);
    let n11: Vec<T> = (0..n).map(|j| nine * f[j] * f[j] * a[j]).collect();
    let n12: Vec<T> = (0..n).map(|j| nine * f[j] * a[j] * a[j]).collect();
    let n21: Vec<T> = (0..n).map(|j| nine * f[j] * b[j] * (two * a[j] + b[j])).collect();
    let n22: Vec<T> = (0..n)
        .map(|j| three * b[j] * (three * a[j] * a[j] + three * a[j] * b[j] + b[j] * b[j]))
        .collect();
    let n1: Vec<T> = (0..n).map(|j| n11[j] + n12[j]).collect();
    let n2: Vec<T> = (0..n).map(|j| n21[j] + n22[j]).collect();
    let tot = (0..n).map(|j| n1[j] + n2[j]).collect();
    Ok(NonlinearTerms {
        n: make(tot),
        n1: make(n1),
        n2: make(n2),
        cubic: Some([make(n11), make(n12), make(n21), make(n22)]),
    })
}

/// The 2×2 modulation system `A (c - ẋ, ċ)ᵀ = (⟨N, ∂_yζ¹⟩, ⟨N, ∂_yζ²⟩)ᵀ` at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationSystem<T> {
    pub a: [[T; 2]; 2],
    pub rhs: [T; 2],
    /// Right-hand side with `N` replaced by `N₁ + N₂₁` (p = 3 only).
    pub rhs_gamma: Option<[T; 2]>,
}

impl<T: Real> ModulationSystem<T> {
    pub fn assemble(
        fam: &SolitonFamily<T>,
        basis: &KernelBasis<T>,
        v1: &Field<T>,
        v2: &Field<T>,
        window: T,
    ) -> Result<Self> {
        let g = v1.grid();
        let (dcz1, dcz2) = dc_zeta(fam, g, basis.center)?;
        let dyz1 = basis.dy_zeta1();
        let dyz2 = basis.dy_zeta2();
        let c0 = basis.center;
        let pair = |f: &Field<T>, z: &Field<T>| f.inner_windowed(z, c0, window);
        let a = [
            [T::one() - pair(v2, &dyz1)?, -pair(v2, &dcz1)?],
            [-pair(v2, &dyz2)?, T::one() - pair(v2, &dcz2)?],
        ];
        let nt = nonlinear_terms(fam, v1, v2)?;
        let rhs = [pair(&nt.n, &dyz1)?, pair(&nt.n, &dyz2)?];
        let rhs_gamma = match &nt.cubic {
            Some(parts) => {
                let m = nt.n1.add(&parts[2])?;
                Some([pair(&m, &dyz1)?, pair(&m, &dyz2)?])
            }
            None => None,
        };
        Ok(ModulationSystem { a, rhs, rhs_gamma })
    }

    /// 2-norm condition number of `A`.
    pub fn condition(&self) -> T {
        let [[p, q], [r, s]] = self.a;
        let fro2 = p * p + q * q + r * r + s * s;
        let det = (p * s - q * r).abs();
        if det == T::zero() {
            return T::infinity();
        }
        let disc = (fro2 * fro2 - T::lit(4.0) * det * det).max(T::zero()).sqrt();
        let smax = ((fro2 + disc) / T::lit(2.0)).sqrt();
        let smin = det / smax;
        smax / smin
    }

    fn solve(&self, r: [T; 2]) -> Result<[T; 2]> {
        let cond = self.condition();
        if !(cond < T::lit(1e8)) {
            return Err(Error::SingularModulation(cond.to_f64_lossy()));
        }
        solve2(self.a, r).ok_or(Error::SingularModulation(f64::INFINITY))
    }

    /// `(ẋ - c, ċ)`.
    pub fn rates(&self) -> Result<(T, T)> {
        let s = self.solve(self.rhs)?;
        Ok((-s[0], s[1]))
    }

    /// `γ̇` from `c - γ̇ = (1, 0) A⁻¹ (⟨N₁ + N₂₁, ∂_yζ^i⟩)`.
    pub fn gamma_dot(&self, c: T) -> Result<T> {
        let r = self
            .rhs_gamma
            .ok_or_else(|| Error::Unsupported("the auxiliary phase gamma is defined for p = 3 only".into()))?;
        Ok(c - self.solve(r)?[0])
    }
}

/// `(ẋ - c, ċ)` from the modulation system.
pub fn modulation_rhs<T: Real>(
    fam: &SolitonFamily<T>,
    basis: &KernelBasis<T>,
    v1: &Field<T>,
    v2: &Field<T>,
    window: T,
) -> Result<(T, T)> {
    ModulationSystem::assemble(fam, basis, v1, v2, window)?.rates()
}

/// `γ̇` for `p = 3`.
pub fn gamma_step<T: Real>(
    fam: &SolitonFamily<T>,
    basis: &KernelBasis<T>,
    v1: &Field<T>,
    v2: &Field<T>,
    window: T,
) -> Result<T> {
    if fam.p() != 3 {
        return Err(Error::Unsupported("the auxiliary phase gamma is defined for p = 3 only".into()));
    }
    ModulationSystem::assemble(fam, basis, v1, v2, window)?.gamma_dot(fam.c())
}

/// `c + θ₁(c)⟨v₁, φ_c⟩`.
pub fn refined_speed<T: Real>(fam: &SolitonFamily<T>, v1: &Field<T>) -> Result<T> {
    let phi = fam.profile(v1.grid(), T::zero());
    Ok(fam.c() + fam.theta1() * v1.inner(&phi)?)
}

/// One tracked instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrackSample<T> {
    pub t: T,
    pub c: T,
    /// Lab-frame phase.
    pub x: T,
    /// Auxiliary phase (p = 3); equals `x` for p = 2.
    pub gamma: T,
    pub refined_c: T,
    pub xdot_minus_c: T,
    pub cdot: T,
    pub gamma_dot: T,
    pub residual: T,
    pub iters: usize,
    pub orth1: T,
    pub orth2: T,
    pub v1_l2: T,
    pub v1_w1: T,
    pub v2_l2a: T,
    pub v2_h1a: T,
    pub v_l2: T,
    /// `‖u - φ_{c₀}(· - x)‖_{L²}`.
    pub orbit_c0: T,
    /// `‖u - φ_{c(t)}(· - x)‖_{L²}`.
    pub orbit_ct: T,
}

/// Running sup / time-L² composites.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct MQuantities<T> {
    pub m1: T,
    pub m2: T,
    pub mv: T,
    pub mc: T,
    pub mx: T,
    pub mgamma: T,
    pub total: T,
}

/// Weight rate and pairing window shared by all samples of a track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackOptions<T> {
    pub a: T,
    pub fit: FitOptions<T>,
}

/// Sequential, warm-started modulation tracking.
#[derive(Debug, Clone)]
pub struct ModulationTrack<T: Real> {
    p: u32,
    c0: T,
    opts: TrackOptions<T>,
    grid: Arc<Grid<T>>,
    pub samples: Vec<TrackSample<T>>,
    pub m_series: Vec<MQuantities<T>>,
    /// Trapezoid accumulators `∫‖v₁‖²_{W₁}`, `∫‖v₂‖²_{L²_a or H¹_a}`, `∫(γ̇ - ẋ)`.
    acc: [T; 3],
    last_v2: Option<Field<T>>,
    x_start: T,
}

impl<T: Real> ModulationTrack<T> {
    pub fn new(p: u32, c0: T, grid: &Arc<Grid<T>>, opts: TrackOptions<T>) -> Result<Self> {
        SolitonFamily::new(p, c0)?;
        let w = opts.fit.window_for(grid);
        WeightSpec::one_sided(opts.a, T::zero(), w).check(grid)?;
        Ok(ModulationTrack {
            p,
            c0,
            opts,
            grid: grid.clone(),
            samples: vec![],
            m_series: vec![],
            acc: [T::zero(); 3],
            last_v2: None,
            x_start: T::zero(),
        })
    }

    /// Lab-frame phase used as the guess for the first sample.
    pub fn with_initial_phase(mut self, x: T) -> Self {
        self.x_start = x;
        self
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn c0(&self) -> T {
        self.c0
    }

    pub fn window(&self) -> T {
        self.opts.fit.window_for(&self.grid)
    }

    pub fn last_v2(&self) -> Option<&Field<T>> {
        self.last_v2.as_ref()
    }

    /// Fits the sample `u` (with the free solution `v1_comp`), both given in a computational
    /// frame whose origin sits at lab position `offset`.
    pub fn observe(&mut self, t: T, u: &Field<T>, v1_comp: &Field<T>, offset: T) -> Result<TrackSample<T>> {
        let len = self.grid.length();
        let guess = match self.samples.last() {
            Some(s) => (s.x - offset, s.c),
            None => (self.x_start - offset, self.c0),
        };
        let w = u.sub(v1_comp)?;
        let fr = fit(self.p, &w, guess, &self.opts.fit)?;
        // keep the branch closest to the warm start
        let mut xc = fr.x;
        while xc - guess.0 > len / T::lit(2.0) {
            xc = xc - len;
        }
        while guess.0 - xc > len / T::lit(2.0) {
            xc = xc + len;
        }
        let fam = SolitonFamily::new(self.p, fr.c)?;
        let sp = split(&fam, u, v1_comp, xc)?;
        let window = self.window();
        let basis = fam.kernel_basis(&self.grid, T::zero());
        let (o1, o2) = basis.pairings(&sp.v2, window)?;
        let sys = ModulationSystem::assemble(&fam, &basis, &sp.v1, &sp.v2, window)?;
        let (xdot_minus_c, cdot) = sys.rates()?;
        let gamma_dot = if self.p == 3 { sys.gamma_dot(fr.c)? } else { fr.c + xdot_minus_c };
        let one = WeightSpec::one_sided(self.opts.a, T::zero(), window);
        let two = WeightSpec::two_sided(self.opts.a, T::zero(), window);
        let v2_l2a = sp.v2.norm(Norm::L2a(one))?;
        let v2_h1a = sp.v2.norm(Norm::H1a(one))?;
        let v1_w1 = sp.v1.norm(Norm::W1(two))?;
        let phi0 = SolitonFamily::new(self.p, self.c0)?.profile(&self.grid, T::zero());
        let ut = u.translate(xc);
        let orbit_c0 = ut.sub(&phi0)?.norm(Norm::L2)?;
        let orbit_ct = sp.v.norm(Norm::L2)?;
        let x_lab = xc + offset;
        let xdot = fr.c + xdot_minus_c;
        let m2_rate = if self.p == 2 { v2_l2a } else { v2_h1a };
        let half = T::lit(0.5);
        if let (Some(prev), Some(_)) = (self.samples.last(), self.m_series.last()) {
            let dt = t - prev.t;
            let prev_m2 = if self.p == 2 { prev.v2_l2a } else { prev.v2_h1a };
            let prev_xdot = prev.c + prev.xdot_minus_c;
            self.acc[0] = self.acc[0] + half * dt * (prev.v1_w1 * prev.v1_w1 + v1_w1 * v1_w1);
            self.acc[1] = self.acc[1] + half * dt * (prev_m2 * prev_m2 + m2_rate * m2_rate);
            self.acc[2] = self.acc[2] + half * dt * ((prev.gamma_dot - prev_xdot) + (gamma_dot - xdot));
        }
        let gamma = if self.p == 3 { x_lab + self.acc[2] } else { x_lab };
        let sample = TrackSample {
            t,
            c: fr.c,
            x: x_lab,
            gamma,
            refined_c: refined_speed(&fam, &sp.v1)?,
            xdot_minus_c,
            cdot,
            gamma_dot,
            residual: fr.residual,
            iters: fr.iters,
            orth1: o1,
            orth2: o2,
            v1_l2: sp.v1.norm(Norm::L2)?,
            v1_w1,
            v2_l2a,
            v2_h1a,
            v_l2: orbit_ct,
            orbit_c0,
            orbit_ct,
        };
        let prev = self.m_series.last().copied().unwrap_or_default();
        let sup = |a: T, b: T| a.max(b);
        let mut m = MQuantities {
            m1: T::zero(),
            m2: T::zero(),
            mv: sup(prev.mv, sample.v_l2 * sample.v_l2),
            mc: sup(prev.mc, (sample.c - self.c0).abs()),
            mx: sup(prev.mx, sample.xdot_minus_c.abs()),
            mgamma: sup(prev.mgamma, (sample.gamma_dot - sample.c).abs()),
            total: T::zero(),
        };
        let sup_v1 = self.samples.iter().map(|s| s.v1_l2).fold(sample.v1_l2, T::max);
        let sup_v2 = self.samples.iter().map(|s| s.v2_l2a).fold(sample.v2_l2a, T::max);
        m.m1 = sup_v1 + self.acc[0].sqrt();
        m.m2 = sup_v2 + self.acc[1].sqrt();
        m.total = m.m1 + m.m2 + m.mv + m.mc + if self.p == 2 { m.mx } else { m.mgamma };
        self.samples.push(sample);
        self.m_series.push(m);
        self.last_v2 = Some(sp.v2);
        Ok(sample)
    }

    pub fn m_quantities(&self) -> MQuantities<T> {
        self.m_series.last().copied().unwrap_or_default()
    }

    /// Total variation of the refined speed over the track.
    pub fn refined_variation(&self) -> T {
        self.samples.windows(2).map(|w| (w[1].refined_c - w[0].refined_c).abs()).sum()
    }

    pub fn max_orthogonality(&self) -> T {
        self.samples.iter().map(|s| s.orth1.abs().max(s.orth2.abs())).fold(T::zero(), T::max)
    }

    /// RMS mismatch between centered differences of `(x, c)` and the modulation rates, relative
    /// to the RMS of the rates.
    pub fn consistency_error(&self) -> (T, T) {
        let s = &self.samples;
        if s.len() < 3 {
            return (T::zero(), T::zero());
        }
        let mut num = [T::zero(); 2];
        let mut den = [T::zero(); 2];
        for k in 1..s.len() - 1 {
            let dt = s[k + 1].t - s[k - 1].t;
            let xd = (s[k + 1].x - s[k - 1].x) / dt - s[k].c;
            let cd = (s[k + 1].c - s[k - 1].c) / dt;
            num[0] = num[0] + (xd - s[k].xdot_minus_c).powi(2);
            num[1] = num[1] + (cd - s[k].cdot).powi(2);
            den[0] = den[0] + s[k].xdot_minus_c.powi(2);
            den[1] = den[1] + s[k].cdot.powi(2);
        }
        let rel = |n: T, d: T| if d > T::zero() { (n / d).sqrt() } else { n.sqrt() };
        (rel(num[0], den[0]), rel(num[1], den[1]))
    }
}
