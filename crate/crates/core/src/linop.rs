//! The linearized operator `L_c = ∂_y(∂_y² - c + f'(φ_c))` conjugated by `e^{ay}`, as a dense
//! Fourier-collocation matrix on the periodic box `[-R, R)` with an absorbing layer near `±R`.
//!
//! States live in weighted coordinates `w = e^{ay} v`, so the `L²_a` norm of `v` is the plain
//! discrete `L²` norm of `w`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use ndarray::{Array1, Array2, ArrayView1, Axis};
use ndarray_linalg::{EigGeneralized, FactorizeInto, GeneralizedEigenvalue, Inverse, Norm as _, Solve, SVD};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::Sponge;
use crate::soliton::SolitonFamily;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorConfig {
    pub a: f64,
    pub half_width: f64,
    pub m: usize,
    /// Damping `σ(y)` added to the matrix near `±R`; `None` gives the bare periodic operator.
    pub sponge: Option<Sponge<f64>>,
    pub tol_zero: f64,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        OperatorConfig {
            a: 0.5,
            half_width: 40.0,
            m: 800,
            sponge: Some(Sponge { strength: 1.0, width: 8.0 }),
            tol_zero: 1e-6,
        }
    }
}

impl OperatorConfig {
    pub fn with_m(self, m: usize) -> Self {
        OperatorConfig { m, ..self }
    }

    pub fn with_a(self, a: f64) -> Self {
        OperatorConfig { a, ..self }
    }
}

/// Tolerance by which the gap may undershoot its predicted value.
pub const TOL_SPEC: f64 = 1e-3;
const EXPM_CACHE: usize = 16;

/// `e^{ay} L_c e^{-ay}` with its kernel basis in weighted coordinates.
pub struct WeightedOperator {
    fam: SolitonFamily<f64>,
    cfg: OperatorConfig,
    h: f64,
    y: Array1<f64>,
    /// `D - aI`.
    s: Array2<f64>,
    /// `(D - aI)² - c + diag f'(φ_c)`.
    b: Array2<f64>,
    sigma: Array1<f64>,
    matrix: Array2<f64>,
    /// Columns `e^{ay}ξ¹`, `e^{ay}ξ²`.
    x: Array2<f64>,
    /// Columns `h e^{-ay}ζ¹`, `h e^{-ay}ζ²`, so that `Zᵀw` is the pairing.
    z: Array2<f64>,
    q: Array2<f64>,
    expm_cache: Mutex<HashMap<u64, Arc<Array2<f64>>>>,
}

/// Fourier differentiation matrix on `m` equispaced nodes of a period-`length` box, with the
/// Nyquist mode dropped.
pub fn fourier_diff_matrix(m: usize, length: f64) -> Array2<f64> {
    let mut d = Array2::zeros((m, m));
    let pl = std::f64::consts::PI / length;
    let mf = m as f64;
    for j in 0..m {
        for k in 0..m {
            if j != k {
                let off = j as isize - k as isize;
                let sign = if off.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                d[[j, k]] = pl * sign / (std::f64::consts::PI * off as f64 / mf).tan();
            }
        }
    }
    d
}

impl WeightedOperator {
    pub fn new(fam: SolitonFamily<f64>, cfg: OperatorConfig) -> Result<Self> {
        Self::build(fam, cfg, true)
    }

    /// The same assembly with `f'(φ_c)` dropped: `(D - a)((D - a)² - c) + Σ`.
    pub fn free(fam: SolitonFamily<f64>, cfg: OperatorConfig) -> Result<Self> {
        Self::build(fam, cfg, false)
    }

    fn build(fam: SolitonFamily<f64>, cfg: OperatorConfig, potential: bool) -> Result<Self> {
        let c = fam.c();
        if !(cfg.a > 0.0 && cfg.a < c.sqrt()) {
            return Err(Error::Param(format!("weight rate must satisfy 0 < a < sqrt(c); got a = {}, c = {c}", cfg.a)));
        }
        if cfg.m < 16 || cfg.m % 2 != 0 {
            return Err(Error::Param(format!("collocation size m = {} must be even and at least 16", cfg.m)));
        }
        if !(cfg.half_width > 0.0) {
            return Err(Error::Param("half width R must be positive".into()));
        }
        if let Some(sp) = cfg.sponge {
            if !(sp.width > 0.0 && sp.width <= cfg.half_width / 2.0) || sp.strength < 0.0 {
                return Err(Error::Param("sponge width must lie in (0, R/2] and strength be nonnegative".into()));
            }
        }
        let m = cfg.m;
        let r = cfg.half_width;
        let a = cfg.a;
        let h = 2.0 * r / m as f64;
        let y = Array1::from_shape_fn(m, |j| -r + h * j as f64);
        let d = fourier_diff_matrix(m, 2.0 * r);
        let mut s = d;
        s.diag_mut().mapv_inplace(|v| v - a);
        let mut b = s.dot(&s);
        for j in 0..m {
            let v = if potential { fam.fprime(fam.value(y[j])) } else { 0.0 };
            b[[j, j]] += v - c;
        }
        let sigma = match cfg.sponge {
            Some(sp) => y.mapv(|yy| {
                let z = ((yy.abs() - (r - sp.width)) / sp.width).clamp(0.0, 1.0);
                sp.strength * (std::f64::consts::FRAC_PI_2 * z).sin().powi(2)
            }),
            None => Array1::zeros(m),
        };
        let mut matrix = s.dot(&b);
        for j in 0..m {
            matrix[[j, j]] += sigma[j];
        }

        let phi = y.mapv(|v| fam.value(v));
        let xi1 = y.mapv(|v| fam.deriv(v));
        let xi2 = y.mapv(|v| fam.dc_value(v));
        let theta1 = 1.0 / (h * phi.dot(&xi2));
        let int_dc = h * xi2.sum();
        let theta2 = theta1 * theta1 * int_dc * int_dc / 2.0;
        let zeta1 = y.mapv(|v| -theta1 * fam.dc_antiderivative(v) + theta2 * fam.value(v));
        let zeta2 = &phi * theta1;
        let ea = y.mapv(|v| (a * v).exp());
        // e^{ay}ξ is not periodic; rolling it off to zero before the seam keeps the
        // collocation derivative from seeing a jump there.
        let layer = cfg.sponge.map(|sp| sp.width).unwrap_or(cfg.half_width / 5.0);
        let cut = y.mapv(|v| seam_taper((v.abs() - (r - layer)) / layer));
        let mut x = Array2::zeros((m, 2));
        let mut z = Array2::zeros((m, 2));
        x.column_mut(0).assign(&(&xi1 * &ea * &cut));
        x.column_mut(1).assign(&(&xi2 * &ea * &cut));
        z.column_mut(0).assign(&(&zeta1 / &ea * h));
        z.column_mut(1).assign(&(&zeta2 / &ea * h));
        let mut q = -x.dot(&z.t());
        q.diag_mut().mapv_inplace(|v| v + 1.0);

        Ok(WeightedOperator { fam, cfg, h, y, s, b, sigma, matrix, x, z, q, expm_cache: Mutex::new(HashMap::new()) })
    }

    pub fn family(&self) -> &SolitonFamily<f64> {
        &self.fam
    }

    pub fn config(&self) -> &OperatorConfig {
        &self.cfg
    }

    pub fn a(&self) -> f64 {
        self.cfg.a
    }

    pub fn m(&self) -> usize {
        self.cfg.m
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &Array1<f64> {
        &self.y
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn q_matrix(&self) -> &Array2<f64> {
        &self.q
    }

    /// `D - aI`: the action of `∂_y` in weighted coordinates.
    pub fn deriv_matrix(&self) -> &Array2<f64> {
        &self.s
    }

    /// Weighted kernel vectors `e^{ay}ξ¹`, `e^{ay}ξ²` as columns.
    pub fn kernel_vectors(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn essential_floor(&self) -> f64 {
        essential_floor(self.fam.c(), self.cfg.a)
    }

    /// Physical samples `f(y_j)` on the collocation nodes.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Array1<f64> {
        self.y.mapv(f)
    }

    /// `w = e^{ay} v`.
    pub fn to_weighted(&self, v: &Array1<f64>) -> Array1<f64> {
        Array1::from_shape_fn(v.len(), |j| v[j] * (self.cfg.a * self.y[j]).exp())
    }

    pub fn from_weighted(&self, w: &Array1<f64>) -> Array1<f64> {
        Array1::from_shape_fn(w.len(), |j| w[j] * (-self.cfg.a * self.y[j]).exp())
    }

    /// `‖v‖_{L²_a}` of the state with weighted coordinates `w`.
    pub fn norm_l2a(&self, w: &Array1<f64>) -> f64 {
        w.norm_l2() * self.h.sqrt()
    }

    /// `(‖w‖² + ‖Dw‖² + ‖D²w‖²)^{1/2}`, the `H²_a` norm in weighted coordinates.
    pub fn norm_h2a(&self, w: &Array1<f64>) -> f64 {
        let a = self.cfg.a;
        let d1 = self.s.dot(w) + w * a;
        let d2 = self.s.dot(&d1) + &d1 * a;
        ((w.dot(w) + d1.dot(&d1) + d2.dot(&d2)) * self.h).sqrt()
    }

    /// `(⟨v,ζ¹⟩, ⟨v,ζ²⟩)` for the state with weighted coordinates `w`.
    pub fn pairings(&self, w: &Array1<f64>) -> [f64; 2] {
        let p = self.z.t().dot(w);
        [p[0], p[1]]
    }

    pub fn project_q(&self, w: &Array1<f64>) -> Array1<f64> {
        self.q.dot(w)
    }

    pub fn project_p(&self, w: &Array1<f64>) -> Array1<f64> {
        w - &self.q.dot(w)
    }

    /// Full spectrum through the pencil `(B + S⁻¹Σ, S⁻¹)`, whose eigenvalues are those of
    /// `SB + Σ` but which avoids forming the badly scaled product.
    pub fn eigen(&self) -> Result<SpectrumReport> {
        let c = self.fam.c();
        if self.cfg.m < 400 || self.cfg.half_width < 30.0 / c.sqrt() {
            return Err(Error::Param(format!(
                "spectrum needs m >= 400 and R >= 30/sqrt(c); got m = {}, R = {}",
                self.cfg.m, self.cfg.half_width
            )));
        }
        let eigenvalues = self.raw_eigenvalues()?;
        Ok(SpectrumReport::from_eigenvalues(eigenvalues, self.cfg.tol_zero, self.essential_floor()))
    }

    /// Eigenvalues without the resolution preconditions, sorted by modulus.
    pub fn raw_eigenvalues(&self) -> Result<Vec<Complex64>> {
        let sinv = self.s.inv().map_err(|e| Error::Linalg(e.to_string()))?;
        let mut lhs = self.b.clone();
        for k in 0..self.cfg.m {
            let sg = self.sigma[k];
            if sg != 0.0 {
                // (S⁻¹Σ)[:, k] = σ_k S⁻¹[:, k]
                lhs.column_mut(k).scaled_add(sg, &sinv.column(k));
            }
        }
        let (vals, _) = (lhs, sinv).eig_generalized(None).map_err(|e| Error::Eigen(e.to_string()))?;
        let mut out: Vec<Complex64> = vals
            .iter()
            .filter_map(|g| match g {
                GeneralizedEigenvalue::Finite(v, _) if v.re.is_finite() && v.im.is_finite() => Some(*v),
                _ => None,
            })
            .collect();
        if out.len() != self.cfg.m {
            return Err(Error::Eigen(format!("{} of {} eigenvalues are not finite", self.cfg.m - out.len(), self.cfg.m)));
        }
        out.sort_by(|p, q| p.norm().total_cmp(&q.norm()));
        Ok(out)
    }

    /// `exp(-t·matrix)` by scaling and squaring with a degree-13 Padé approximant; cached per `t`.
    pub fn expm(&self, t: f64) -> Result<Arc<Array2<f64>>> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::Param(format!("propagation time t = {t} must be nonnegative")));
        }
        let key = t.to_bits();
        if let Some(e) = self.expm_cache.lock().unwrap().get(&key) {
            return Ok(e.clone());
        }
        let e = Arc::new(expm(&(&self.matrix * -t))?);
        if e.iter().any(|v| !v.is_finite()) {
            return Err(Error::ExpOverflow(t));
        }
        let mut cache = self.expm_cache.lock().unwrap();
        if cache.len() >= EXPM_CACHE {
            cache.clear();
        }
        cache.insert(key, e.clone());
        Ok(e)
    }

    /// `w(t) = exp(-t·matrix) w0`.
    pub fn propagate(&self, w0: &Array1<f64>, t: f64) -> Result<Array1<f64>> {
        if t == 0.0 {
            return Ok(w0.clone());
        }
        Ok(self.expm(t)?.dot(w0))
    }

    /// `w(k·dt)` for `k = 0..=steps`, reusing one cached exponential.
    pub fn propagate_series(&self, w0: &Array1<f64>, dt: f64, steps: usize) -> Result<Vec<Array1<f64>>> {
        let e = self.expm(dt)?;
        let mut out = Vec::with_capacity(steps + 1);
        out.push(w0.clone());
        for k in 0..steps {
            let next = e.dot(&out[k]);
            out.push(next);
        }
        Ok(out)
    }

    /// Least-squares decay rate of `‖e^{-tL_c}Q_c f‖_{L²_a}` over `[T/2, T]`; `f` physical.
    pub fn decay_rate(&self, f: &Array1<f64>, t_end: f64, project: bool) -> Result<DecayFit> {
        const SAMPLES: usize = 60;
        let mut w0 = self.to_weighted(f);
        if project {
            w0 = self.project_q(&w0);
        }
        let dt = t_end / SAMPLES as f64;
        let series = self.propagate_series(&w0, dt, SAMPLES)?;
        let times: Vec<f64> = (0..=SAMPLES).map(|k| k as f64 * dt).collect();
        let norms: Vec<f64> = series.iter().map(|w| self.norm_l2a(w)).collect();
        let tail: Vec<usize> = (0..=SAMPLES).filter(|&k| times[k] >= t_end / 2.0).collect();
        for pair in tail.windows(2) {
            if norms[pair[1]] > norms[pair[0]] * (1.0 + 1e-3) {
                return Err(Error::NonMonotoneTail);
            }
        }
        let xs: Vec<f64> = tail.iter().map(|&k| times[k]).collect();
        let ys: Vec<f64> = tail.iter().map(|&k| norms[k].ln()).collect();
        let (slope, _, residual) = linear_fit(&xs, &ys);
        Ok(DecayFit { rate: -slope, residual, window: (t_end / 2.0, t_end), times, norms })
    }

    /// Fitted exponent `α̂` of `‖e^{-tL_c}Q_c∂_y^j f‖_{L²_a}` over `t ∈ [1e-3, 1e-1]`.
    ///
    /// `L1Source` uses a unit-mass spike at `y = 0` (a Kronecker delta of height `1/h`) and reports
    /// the ratio to its `L¹_a` norm. `L2Source` reports the induced operator norm on `L²_a`, the
    /// supremum of the ratio over all sources.
    pub fn smoothing_exponent(&self, j: u32, mode: SmoothingMode) -> Result<SmoothingFit> {
        if j > 1 {
            return Err(Error::Param(format!("smoothing order j = {j} must be 0 or 1")));
        }
        let ts: Vec<f64> = (0..9).map(|k| 10f64.powf(-3.0 + 0.25 * k as f64)).collect();
        let mut ratios = Vec::with_capacity(ts.len());
        match mode {
            SmoothingMode::L1Source => {
                let m = self.cfg.m;
                let mut f = Array1::zeros(m);
                f[m / 2] = 1.0 / self.h;
                let l1a = self.h * f.iter().zip(self.y.iter()).map(|(v, y): (&f64, &f64)| v.abs() * (self.cfg.a * y).exp()).sum::<f64>();
                let mut w = self.to_weighted(&f);
                if j == 1 {
                    w = self.s.dot(&w);
                }
                let w = self.project_q(&w);
                for &t in &ts {
                    ratios.push(self.norm_l2a(&self.propagate(&w, t)?) / l1a);
                }
            }
            SmoothingMode::L2Source => {
                let mut op = self.q.clone();
                if j == 1 {
                    op = op.dot(&self.s);
                }
                for &t in &ts {
                    ratios.push(spectral_norm(&self.expm(t)?.dot(&op))?);
                }
            }
        }
        let lx: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
        let ly: Vec<f64> = ratios.iter().map(|r| r.ln()).collect();
        let (slope, _, residual) = linear_fit(&lx, &ly);
        if residual > 0.5 {
            return Err(Error::PoorFit(residual));
        }
        let local_slopes = lx.windows(2).zip(ly.windows(2)).map(|(x, y)| -(y[1] - y[0]) / (x[1] - x[0])).collect();
        Ok(SmoothingFit { exponent: -slope, residual, times: ts, ratios, local_slopes })
    }

    /// Largest singular value of `(iλ + matrix)⁻¹ Q`, or of `(iλ + matrix)⁻¹` when
    /// `project` is false.
    pub fn resolvent_norm(&self, lambda: Complex64, project: bool) -> Result<f64> {
        let m = self.cfg.m;
        let il = Complex64::new(0.0, 1.0) * lambda;
        let mut a = self.matrix.mapv(|v| Complex64::new(v, 0.0));
        for j in 0..m {
            a[[j, j]] += il;
        }
        let lu = a.factorize_into().map_err(|e| Error::Linalg(e.to_string()))?;
        let qc = self.q.mapv(|v| Complex64::new(v, 0.0));
        // power iteration on (A⁻¹Q)^H (A⁻¹Q)
        let mut v = Array1::from_shape_fn(m, |j| Complex64::new(1.0 + 0.1 * ((j * 7919) % 13) as f64, 0.0));
        let nv = v.norm_l2();
        v.mapv_inplace(|z| z / nv);
        let mut sigma = 0.0;
        for _ in 0..500 {
            let qv = if project { qc.dot(&v) } else { v.clone() };
            let u = lu.solve(&qv).map_err(|e| Error::Linalg(e.to_string()))?;
            let mut back = lu.solve_h(&u).map_err(|e| Error::Linalg(e.to_string()))?;
            if project {
                back = qc.t().dot(&back);
            }
            let nb = back.norm_l2();
            if !nb.is_finite() {
                return Err(Error::NearSingular(f64::INFINITY));
            }
            let next = nb.sqrt();
            v = back.mapv(|z| z / nb);
            let done = (next - sigma).abs() <= 1e-10 * next;
            sigma = next;
            if done {
                break;
            }
        }
        if !project && sigma > 1e6 {
            return Err(Error::NearSingular(sigma));
        }
        Ok(sigma)
    }

    /// Sweep of `‖R(λ)Q_c‖` over `Re λ ∈ [re_min, re_max]` at fixed `Im λ`.
    pub fn resolvent_sweep(&self, re_min: f64, re_max: f64, im: f64, points: usize) -> Result<ResolventSweep> {
        let mut samples = Vec::with_capacity(points);
        for k in 0..points {
            let re = if points == 1 { re_min } else { re_min + (re_max - re_min) * k as f64 / (points - 1) as f64 };
            samples.push((re, self.resolvent_norm(Complex64::new(re, im), true)?));
        }
        let max = samples.iter().map(|s| s.1).fold(0.0, f64::max);
        Ok(ResolventSweep { im, samples, max })
    }

    /// `‖Ag‖_{L²(0,T;H²_a)} / ‖g‖_{L²(0,T;L²_a)}` with `Ag(t) = ∫₀ᵗ e^{-(t-s)L_c}Q_c g(s) ds`,
    /// where `g[k]` (weighted coordinates) is the forcing at `t = k·dt`.
    pub fn local_smoothing_gain(&self, g: &[Array1<f64>], dt: f64) -> Result<f64> {
        if g.is_empty() {
            return Ok(0.0);
        }
        let e = self.expm(dt)?;
        let qg: Vec<Array1<f64>> = g.iter().map(|gk| self.project_q(gk)).collect();
        let mut acc = Array1::zeros(self.cfg.m);
        let mut num = Vec::with_capacity(g.len());
        let mut den = Vec::with_capacity(g.len());
        num.push(0.0);
        den.push(self.norm_l2a(&g[0]).powi(2));
        for k in 1..g.len() {
            let pushed = e.dot(&(&acc + &(&qg[k - 1] * (dt / 2.0))));
            acc = pushed + &qg[k] * (dt / 2.0);
            num.push(self.norm_h2a(&acc).powi(2));
            den.push(self.norm_l2a(&g[k]).powi(2));
        }
        let den = trapezoid(&den, dt);
        if den == 0.0 {
            return Ok(0.0);
        }
        Ok((trapezoid(&num, dt) / den).sqrt())
    }

    /// `‖matrix·X₁‖/‖X₁‖` and `‖matrix·X₂ − X₁‖/‖X₁‖` for the weighted kernel vectors.
    pub fn kernel_residuals(&self) -> (f64, f64) {
        let x1 = self.x.column(0);
        let x2 = self.x.column(1);
        let n1 = x1.norm_l2();
        let r1 = self.matrix.dot(&x1).norm_l2() / n1;
        let r2 = (&self.matrix.dot(&x2) - &x1).norm_l2() / n1;
        (r1, r2)
    }

    /// `Zᵀ X`, which should be the identity.
    pub fn biorthogonality(&self) -> Array2<f64> {
        self.z.t().dot(&self.x)
    }
}

/// Smooth step from 1 (`z <= 0`) to 0 (`z >= 1`), flat to all orders at both ends.
fn seam_taper(z: f64) -> f64 {
    let psi = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    let z = z.clamp(0.0, 1.0);
    let (u, v) = (psi(1.0 - z), psi(z));
    u / (u + v)
}

/// `a(c - a²)`.
pub fn essential_floor(c: f64, a: f64) -> f64 {
    a * (c - a * a)
}

/// `λ(ξ) = i·p(ξ + ia) = a(c - a²) + 3aξ² - i(ξ³ + (c - 3a²)ξ)`.
pub fn essential_spectrum_curve(c: f64, a: f64, xi: f64) -> Complex64 {
    Complex64::new(a * (c - a * a) + 3.0 * a * xi * xi, -(xi * xi * xi + (c - 3.0 * a * a) * xi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmoothingMode {
    L1Source,
    L2Source,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<Complex64>,
    pub zero_cluster: Vec<Complex64>,
    /// Smallest real part outside the zero cluster.
    pub gap: f64,
    pub essential_floor: f64,
    pub tol_zero: f64,
}

impl SpectrumReport {
    pub fn from_eigenvalues(eigenvalues: Vec<Complex64>, tol_zero: f64, essential_floor: f64) -> Self {
        let zero_cluster: Vec<Complex64> = eigenvalues.iter().copied().filter(|l| l.norm() < tol_zero).collect();
        let gap = eigenvalues.iter().filter(|l| l.norm() >= tol_zero).map(|l| l.re).fold(f64::INFINITY, f64::min);
        SpectrumReport { eigenvalues, zero_cluster, gap, essential_floor, tol_zero }
    }

    /// The prediction: two zero eigenvalues and every other one at or right of the floor.
    pub fn matches_prediction(&self) -> bool {
        self.zero_cluster.len() == 2 && self.gap >= self.essential_floor - TOL_SPEC
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    pub rate: f64,
    pub residual: f64,
    pub window: (f64, f64),
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SmoothingFit {
    pub exponent: f64,
    pub residual: f64,
    pub times: Vec<f64>,
    pub ratios: Vec<f64>,
    /// `-Δlog(ratio)/Δlog(t)` between consecutive sample times.
    pub local_slopes: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolventSweep {
    pub im: f64,
    /// `(Re λ, ‖R(λ)Q_c‖)`.
    pub samples: Vec<(f64, f64)>,
    pub max: f64,
}

/// Slope, intercept and RMS residual of the least-squares line through `(x, y)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum();
    (slope, icpt, (rss / n).sqrt())
}

pub(crate) fn trapezoid(vals: &[f64], dt: f64) -> f64 {
    if vals.len() < 2 {
        return 0.0;
    }
    dt * (vals.iter().sum::<f64>() - 0.5 * (vals[0] + vals[vals.len() - 1]))
}

pub fn spectral_norm(a: &Array2<f64>) -> Result<f64> {
    let (_, s, _) = a.svd(false, false).map_err(|e| Error::Linalg(e.to_string()))?;
    Ok(s.iter().copied().fold(0.0, f64::max))
}

fn norm_1(a: &Array2<f64>) -> f64 {
    a.axis_iter(Axis(1)).map(|c: ArrayView1<f64>| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Matrix exponential, Padé-13 with scaling and squaring.
pub fn expm(a: &Array2<f64>) -> Result<Array2<f64>> {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA13: f64 = 5.371920351148152;
    let n = a.nrows();
    let nrm = norm_1(a);
    if !nrm.is_finite() {
        return Err(Error::ExpOverflow(nrm));
    }
    let sq = if nrm > THETA13 { (nrm / THETA13).log2().ceil() as i32 } else { 0 };
    let a = a * 2f64.powi(-sq);
    let ident = Array2::<f64>::eye(n);
    let a2 = a.dot(&a);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let inner_u = &a6 * B[13] + &a4 * B[11] + &a2 * B[9];
    let u = a.dot(&(a6.dot(&inner_u) + &a6 * B[7] + &a4 * B[5] + &a2 * B[3] + &ident * B[1]));
    let inner_v = &a6 * B[12] + &a4 * B[10] + &a2 * B[8];
    let v = a6.dot(&inner_v) + &a6 * B[6] + &a4 * B[4] + &a2 * B[2] + &ident * B[0];
    let den = (&v - &u).inv().map_err(|e| Error::Linalg(e.to_string()))?;
    let mut r = den.dot(&(&v + &u));
    for _ in 0..sq {
        r = r.dot(&r);
    }
    Ok(r)
}
