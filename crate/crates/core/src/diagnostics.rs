//! Virial functionals, weighted inequalities, the L² identity, quadratic-form positivity and
//! tail norms.

use std::sync::Arc;

use ndarray::{s, Array1, Array2};
use ndarray_linalg::{Eigh, SVD, UPLO};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::Trajectory;
use crate::grid::{Field, Grid, Norm, WeightSpec};
use crate::linop::fourier_diff_matrix;
use crate::soliton::SolitonFamily;

/// Largest admissible steepness of the virial weight.
pub const EPS_MAX: f64 = 0.1;

/// Largest `‖v₀‖_{L²}` accepted by [`virial_series`].
pub const VIRIAL_SMALLNESS: f64 = 0.1;

/// `χ_ε(x) = 1 + tanh(εx)`, written as `2/(1 + e^{-2εx})` so the left tail keeps precision.
pub fn chi(eps: f64, x: f64) -> f64 {
    2.0 / (1.0 + (-2.0 * eps * x).exp())
}

pub fn chi_d1(eps: f64, x: f64) -> f64 {
    let s = 1.0 / (eps * x).cosh();
    eps * s * s
}

pub fn chi_d3(eps: f64, x: f64) -> f64 {
    let z = eps * x;
    let s2 = 1.0 / z.cosh().powi(2);
    let t = z.tanh();
    -2.0 * eps.powi(3) * s2 * (s2 - 2.0 * t * t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiReport {
    pub eps: f64,
    pub samples: usize,
    /// `min χ′` over the sample.
    pub min_d1: f64,
    /// `max χ′ / (2εχ)`; below 1 when the first bound holds.
    pub ratio_d1: f64,
    /// `max |χ‴| / (4ε²χ′)`.
    pub ratio_d3: f64,
    pub limit_minus: f64,
    pub limit_plus: f64,
    pub d1_at_zero: f64,
    pub passed: bool,
}

/// Checks `0 < χ′ < 2εχ` and `|χ‴| ≤ 4ε²χ′` on `10⁴` points of `[-50, 50]`, and the limits at
/// `|x| = 50/ε`.
pub fn chi_properties(eps: f64) -> Result<ChiReport> {
    if !(eps > 0.0) {
        return Err(Error::Param(format!("steepness eps = {eps} must be positive")));
    }
    let samples = 10_000;
    let (mut min_d1, mut r1, mut r3) = (f64::INFINITY, 0.0f64, 0.0f64);
    for k in 0..samples {
        let x = -50.0 + 100.0 * k as f64 / (samples - 1) as f64;
        let d1 = chi_d1(eps, x);
        min_d1 = min_d1.min(d1);
        r1 = r1.max(d1 / (2.0 * eps * chi(eps, x)));
        r3 = r3.max(chi_d3(eps, x).abs() / (4.0 * eps * eps * d1));
    }
    let limit_minus = chi(eps, -50.0 / eps);
    let limit_plus = chi(eps, 50.0 / eps);
    let d1_at_zero = chi_d1(eps, 0.0);
    let passed = min_d1 > 0.0
        && r1 < 1.0
        && r3 <= 1.0
        && limit_minus.abs() < 1e-12
        && (limit_plus - 2.0).abs() < 1e-12
        && d1_at_zero == eps;
    Ok(ChiReport { eps, samples, min_d1, ratio_d1: r1, ratio_d3: r3, limit_minus, limit_plus, d1_at_zero, passed })
}

/// Reference path `x̃(t)` of the virial weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum XTilde {
    /// `x̃(t) = speed · t`.
    Linear { speed: f64 },
    /// Lab-frame positions at the trajectory samples, e.g. a fitted `x(t)` or `γ(t)`.
    Path { positions: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirialConfig {
    pub eps: f64,
    pub x0: f64,
    pub xtilde: XTilde,
    pub c1: f64,
}

impl VirialConfig {
    pub fn new(c1: f64) -> Self {
        VirialConfig { eps: 0.05, x0: 0.0, xtilde: XTilde::Linear { speed: c1 }, c1 }
    }

    /// `ν = ½ min{3, c₁}`.
    pub fn nu(&self) -> f64 {
        0.5 * self.c1.min(3.0)
    }

    pub fn validate(&self, times: &[f64]) -> Result<()> {
        if !(self.eps > 0.0 && self.eps <= EPS_MAX) {
            return Err(Error::Param(format!("eps = {} must lie in (0, {EPS_MAX}]", self.eps)));
        }
        if !(self.c1 > 0.0) {
            return Err(Error::Param(format!("c1 = {} must be positive", self.c1)));
        }
        match &self.xtilde {
            XTilde::Linear { speed } => {
                if !(*speed >= self.c1) {
                    return Err(Error::Param(format!("reference speed {speed} is below c1 = {}", self.c1)));
                }
            }
            XTilde::Path { positions } => {
                if positions.len() != times.len() {
                    return Err(Error::Param(format!(
                        "path has {} positions for {} samples",
                        positions.len(),
                        times.len()
                    )));
                }
                for k in 1..times.len() {
                    let slope = (positions[k] - positions[k - 1]) / (times[k] - times[k - 1]);
                    if !(slope >= self.c1) {
                        return Err(Error::Param(format!(
                            "reference path slope {slope} below c1 = {} near t = {}",
                            self.c1, times[k]
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn position(&self, k: usize, t: f64) -> f64 {
        match &self.xtilde {
            XTilde::Linear { speed } => speed * t,
            XTilde::Path { positions } => positions[k],
        }
    }
}

/// `I(t) = ∫χ_ε(x - x̃(t) - x₀)ṽ₁²`, the dissipation `D(t)` and the weighted mass `S(t)` removed
/// by the sponge, all at the trajectory samples.
#[derive(Debug, Clone, Serialize)]
pub struct VirialSeries {
    pub times: Vec<f64>,
    pub i: Vec<f64>,
    pub d: Vec<f64>,
    pub s: Vec<f64>,
    pub nu: f64,
    pub tol: f64,
}

impl VirialSeries {
    /// Largest `I(t) + D(t) + S(t) - I(0)` and the time it occurs.
    pub fn max_excess(&self) -> (f64, f64) {
        let i0 = self.i[0];
        let mut worst = (self.times[0], f64::NEG_INFINITY);
        for k in 0..self.times.len() {
            let e = self.i[k] + self.d[k] + self.s[k] - i0;
            if e > worst.1 {
                worst = (self.times[k], e);
            }
        }
        worst
    }

    /// Fails when the ledger is violated by more than `1e-6·I(0)`.
    pub fn verify(&self) -> Result<()> {
        let (t, e) = self.max_excess();
        if e > self.tol {
            return Err(Error::Virial { t, excess: e });
        }
        Ok(())
    }

    /// `I(t_end) / I(0)`.
    pub fn final_ratio(&self) -> f64 {
        let i0 = self.i[0];
        if i0 > 0.0 {
            self.i[self.i.len() - 1] / i0
        } else {
            0.0
        }
    }
}

/// Virial ledger of a free solution `ṽ₁`; the sponge loss term is zero without a sponge.
pub fn virial_series(traj: &Trajectory<f64>, cfg: &VirialConfig) -> Result<VirialSeries> {
    cfg.validate(&traj.times)?;
    let first = traj.states.first().ok_or_else(|| Error::Param("empty trajectory".into()))?;
    let v0 = first.norm(Norm::L2)?;
    if v0 > VIRIAL_SMALLNESS {
        return Err(Error::Param(format!("‖v₀‖ = {v0} exceeds the smallness bound {VIRIAL_SMALLNESS}")));
    }
    let g = first.grid().clone();
    let h = g.h();
    let nodes = g.nodes();
    let sigma = traj.sponge.map(|s| s.profile(&g));
    let nu = cfg.nu();
    let (mut i, mut dis, mut sp) = (vec![], vec![], vec![]);
    for (k, (&t, v)) in traj.times.iter().zip(&traj.states).enumerate() {
        let shift = traj.frame_offset(k) - cfg.position(k, t) - cfg.x0;
        let dv = v.spectral_deriv(1)?;
        let (mut ik, mut dk, mut sk) = (0.0, 0.0, 0.0);
        for j in 0..g.n() {
            let z = nodes[j] + shift;
            let u = v.values()[j];
            let w = chi(cfg.eps, z);
            ik += w * u * u;
            dk += chi_d1(cfg.eps, z) * (dv.values()[j].powi(2) + u * u);
            if let Some(sg) = &sigma {
                sk += 2.0 * w * sg[j] * u * u;
            }
        }
        i.push(h * ik);
        dis.push(nu * h * dk);
        sp.push(h * sk);
    }
    let d = trapezoid(&traj.times, &dis);
    let s = trapezoid(&traj.times, &sp);
    let tol = 1e-6 * i[0];
    Ok(VirialSeries { times: traj.times.clone(), i, d, s, nu, tol })
}

fn trapezoid(t: &[f64], f: &[f64]) -> Vec<f64> {
    let mut acc = vec![0.0; t.len()];
    for k in 1..t.len() {
        acc[k] = acc[k - 1] + 0.5 * (t[k] - t[k - 1]) * (f[k] + f[k - 1]);
    }
    acc
}

/// `(|∫χ′_ε(x+x₀)v^{p+1}|, (1+2ε)^{(p-1)/2}‖v‖^{p-1}∫χ′_ε(x+x₀)(v′² + v²))`.
pub fn weighted_gn_check(v: &Field<f64>, eps: f64, x0: f64, p: u32) -> Result<(f64, f64)> {
    if !(1..=3).contains(&p) {
        return Err(Error::Param(format!("p = {p} must be 1, 2 or 3")));
    }
    let g = v.grid();
    let dv = v.spectral_deriv(1)?;
    let (mut lhs, mut wsum) = (0.0, 0.0);
    for j in 0..g.n() {
        let w = chi_d1(eps, g.node(j) + x0);
        let u = v.values()[j];
        lhs += w * u.powi(p as i32 + 1);
        wsum += w * (dv.values()[j].powi(2) + u * u);
    }
    let pm1 = (p - 1) as f64;
    let rhs = (1.0 + 2.0 * eps).powf(pm1 / 2.0) * v.norm(Norm::L2)?.powf(pm1) * g.h() * wsum;
    Ok(((g.h() * lhs).abs(), rhs))
}

/// Two `(lhs, rhs)` pairs with the one-sided weight `e^{ax}` over `|x| ≤ L/4`:
/// `‖w²‖_{L∞_a} ≤ 2‖w‖^θ‖w′‖^{1-θ}‖w′‖^θ_{L²_a}‖w‖^{1-θ}_{L²_a}` and
/// `‖w‖²_{L∞_a} ≤ 2‖w‖_{L²_a}‖w‖_{H¹_a}`.
pub fn weighted_sobolev_check(w: &Field<f64>, a: f64, theta: f64) -> Result<[(f64, f64); 2]> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Param(format!("theta = {theta} must lie in [0, 1]")));
    }
    let g = w.grid();
    let spec = WeightSpec::one_sided(a, 0.0, g.length() / 4.0);
    let dw = w.spectral_deriv(1)?;
    let w2 = w.mul(w)?;
    let lhs1 = w2.norm(Norm::LinfA(spec))?;
    let rhs1 = 2.0
        * w.norm(Norm::L2)?.powf(theta)
        * dw.norm(Norm::L2)?.powf(1.0 - theta)
        * dw.norm(Norm::L2a(spec))?.powf(theta)
        * w.norm(Norm::L2a(spec))?.powf(1.0 - theta);
    let lhs2 = w.norm(Norm::LinfA(spec))?.powi(2);
    let rhs2 = 2.0 * w.norm(Norm::L2a(spec))? * w.norm(Norm::H1a(spec))?;
    Ok([(lhs1, rhs1), (lhs2, rhs2)])
}

/// Relative residuals of `‖u‖² = ‖φ‖² + 2⟨φ,v⟩ + ‖v‖²` and `⟨φ,v⟩ = ⟨φ,v₁⟩`, both divided by
/// `‖u‖²`. `u`, `v` and `v₁` are in the soliton-centred coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct L2Identity {
    pub mass: f64,
    pub orthogonality: f64,
}

pub fn l2_identity_check(u: &Field<f64>, fam_t: &SolitonFamily<f64>, v: &Field<f64>, v1: &Field<f64>) -> Result<L2Identity> {
    let phi = fam_t.profile(u.grid(), 0.0);
    let uu = u.inner(u)?;
    if uu == 0.0 {
        return Ok(L2Identity { mass: 0.0, orthogonality: 0.0 });
    }
    let pv = phi.inner(v)?;
    let mass = (uu - phi.inner(&phi)? - 2.0 * pv - v.inner(v)?).abs() / uu;
    let orthogonality = (pv - phi.inner(v1)?).abs() / uu;
    Ok(L2Identity { mass, orthogonality })
}

/// Lower bound `ν̂` of `⟨S″(φ_c)v, v⟩ / ‖v‖²_{H¹}` on `{⟨v,ζ¹⟩ = ⟨v,ζ²⟩ = 0}`, with
/// `S″(φ_c) = -∂² + c₀ - 9φ_c²`, from a dense Fourier discretization of `[-R, R)`.
#[derive(Debug, Clone)]
pub struct QuadraticForm {
    fam: SolitonFamily<f64>,
    c0: f64,
    nu_hat: f64,
    pub half_width: f64,
    pub m: usize,
}

impl QuadraticForm {
    pub fn new(fam: &SolitonFamily<f64>, c0: f64, half_width: f64, m: usize) -> Result<Self> {
        if fam.p() != 3 {
            return Err(Error::Unsupported("the quadratic-form bound is implemented for p = 3".into()));
        }
        if m < 16 || m % 2 != 0 {
            return Err(Error::Param(format!("m = {m} must be even and at least 16")));
        }
        let len = 2.0 * half_width;
        let h = len / m as f64;
        let y: Vec<f64> = (0..m).map(|j| -half_width + h * j as f64).collect();
        let d = fourier_diff_matrix(m, len);
        let dtd = d.t().dot(&d);
        let mut a = dtd.clone();
        let mut b = dtd;
        for j in 0..m {
            a[[j, j]] += c0 - 9.0 * fam.value(y[j]).powi(2);
            b[[j, j]] += 1.0;
        }
        let th = fam.theta1();
        let mut cons = Array2::zeros((m, 2));
        for j in 0..m {
            cons[[j, 0]] = -th * fam.dc_antiderivative(y[j]);
            cons[[j, 1]] = th * fam.value(y[j]);
        }
        let (u, _, _) = cons.svd(true, false).map_err(|e| Error::Linalg(e.to_string()))?;
        let u = u.ok_or_else(|| Error::Linalg("SVD returned no left vectors".into()))?;
        let null = u.slice(s![.., 2..]).to_owned();
        let ar = null.t().dot(&a).dot(&null);
        let br = null.t().dot(&b).dot(&null);
        let (vals, _): (Array1<f64>, _) = (sym(ar), sym(br)).eigh(UPLO::Lower).map_err(|e| Error::Eigen(e.to_string()))?;
        let nu_hat = vals.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(QuadraticForm { fam: *fam, c0, nu_hat, half_width, m })
    }

    pub fn nu_hat(&self) -> f64 {
        self.nu_hat
    }

    /// `(⟨S″(φ_c)v₂, v₂⟩, ν̂‖v₂‖²_{H¹})` on the field's own grid.
    pub fn check(&self, v2: &Field<f64>) -> Result<(f64, f64)> {
        let g = v2.grid();
        let basis = self.fam.kernel_basis(g, 0.0);
        let (p1, p2) = basis.pairings(v2, g.length() / 4.0)?;
        let scale = v2.norm(Norm::L2)?.max(f64::MIN_POSITIVE);
        let worst = p1.abs().max(p2.abs());
        if worst > 1e-6 * scale {
            return Err(Error::Orthogonality(worst));
        }
        let dv = v2.spectral_deriv(1)?;
        let phi = basis.phi.values();
        let mut pot = 0.0;
        for j in 0..g.n() {
            pot += 9.0 * phi[j] * phi[j] * v2.values()[j].powi(2);
        }
        let (vv, dd) = (v2.inner(v2)?, dv.inner(&dv)?);
        Ok((dd + self.c0 * vv - g.h() * pot, self.nu_hat * (vv + dd)))
    }
}

fn sym(m: Array2<f64>) -> Array2<f64> {
    (&m + &m.t()) * 0.5
}

/// `ν̂` from `R = 40`, `m = 800`.
pub fn quadratic_form_check(fam: &SolitonFamily<f64>, c0: f64, v2: &Field<f64>) -> Result<(f64, f64)> {
    QuadraticForm::new(fam, c0, 40.0, 800)?.check(v2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct H1Growth {
    pub sup_dx: f64,
    pub v0_dx: f64,
    pub v0_l2: f64,
    /// `sup_t‖∂ṽ₁‖ / (‖∂v₀‖ + ‖v₀‖³)`, zero for zero data.
    pub ratio: f64,
}

pub fn h1_growth_check(traj: &Trajectory<f64>, p: u32) -> Result<H1Growth> {
    if p != 3 {
        return Err(Error::Unsupported("the H¹ growth bound is stated for p = 3".into()));
    }
    let v0 = traj.states.first().ok_or_else(|| Error::Param("empty trajectory".into()))?;
    let v0_dx = v0.spectral_deriv(1)?.norm(Norm::L2)?;
    let v0_l2 = v0.norm(Norm::L2)?;
    let mut sup_dx = 0.0f64;
    for v in &traj.states {
        sup_dx = sup_dx.max(v.spectral_deriv(1)?.norm(Norm::L2)?);
    }
    let denom = v0_dx + v0_l2.powi(3);
    let ratio = if denom > 0.0 { sup_dx / denom } else { 0.0 };
    Ok(H1Growth { sup_dx, v0_dx, v0_l2, ratio })
}

/// `‖u - φ_{c₊}(· - x_t)‖_{L²(x ≥ lower)}`, all positions in the coordinates of `u`.
pub fn tail_norm(u: &Field<f64>, fam_plus: &SolitonFamily<f64>, x_t: f64, lower: f64) -> Result<f64> {
    let g = u.grid();
    let half = g.length() / 2.0;
    if !(lower < half) || lower < -half {
        return Err(Error::TailOutside(lower));
    }
    let phi = fam_plus.profile(g, x_t);
    let mut acc = 0.0;
    for j in 0..g.n() {
        if g.node(j) >= lower {
            let d = u.values()[j] - phi.values()[j];
            acc += d * d;
        }
    }
    Ok((acc * g.h()).sqrt())
}

/// Outcome of one randomized or deterministic check, as written to `checks.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    /// Largest `lhs / rhs` seen; below 1 when the inequality held everywhere.
    pub worst_ratio: f64,
    pub seed: u64,
}

/// Localized smooth field: one to four modulated Gaussians with random amplitude, centre, width
/// and wavenumber, all well inside `|x| ≤ 25`.
pub fn random_field(rng: &mut impl Rng, grid: &Arc<Grid<f64>>) -> Field<f64> {
    let bumps = rng.random_range(1..=4);
    let params: Vec<[f64; 5]> = (0..bumps)
        .map(|_| {
            let amp = 10f64.powf(rng.random_range(-2.0..0.5)) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            [amp, rng.random_range(-15.0..15.0), rng.random_range(0.5..4.0), rng.random_range(0.0..3.0), rng.random_range(0.0..6.3)]
        })
        .collect();
    Field::from_fn(grid, |x| {
        params
            .iter()
            .map(|&[a, x0, w, k, ph]| a * (-((x - x0) / w).powi(2)).exp() * (k * x + ph).cos())
            .sum()
    })
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if rhs > 0.0 {
        lhs / rhs
    } else if lhs > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// χ bounds, the weighted Gagliardo–Nirenberg inequality for p = 1, 2, 3 and both weighted
/// Sobolev bounds over the θ sweep, each on `fields` random fields drawn from `seed`.
pub fn inequality_suite(grid: &Arc<Grid<f64>>, seed: u64, fields: usize) -> Result<Vec<CheckReport>> {
    let mut out = vec![];
    let chi_rep = chi_properties(0.1)?;
    out.push(CheckReport {
        name: "chi-bounds".into(),
        passed: chi_rep.passed,
        worst_ratio: chi_rep.ratio_d1.max(chi_rep.ratio_d3),
        seed,
    });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<(Field<f64>, f64)> =
        (0..fields).map(|_| (random_field(&mut rng, grid), rng.random_range(-20.0..20.0))).collect();
    for p in 1..=3u32 {
        let mut worst = 0.0f64;
        for (v, x0) in &samples {
            let (l, r) = weighted_gn_check(v, 0.1, *x0, p)?;
            worst = worst.max(ratio(l, r));
        }
        out.push(CheckReport { name: format!("weighted-gn-p{p}"), passed: worst <= 1.0, worst_ratio: worst, seed });
    }
    let (mut w1, mut w2) = (0.0f64, 0.0f64);
    for (w, _) in &samples {
        for theta in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let [(l1, r1), (l2, r2)] = weighted_sobolev_check(w, 0.5, theta)?;
            w1 = w1.max(ratio(l1, r1));
            w2 = w2.max(ratio(l2, r2));
        }
    }
    out.push(CheckReport { name: "weighted-sobolev-interpolated".into(), passed: w1 <= 1.0, worst_ratio: w1, seed });
    out.push(CheckReport { name: "weighted-sobolev-h1a".into(), passed: w2 <= 1.0, worst_ratio: w2, seed });
    Ok(out)
}
