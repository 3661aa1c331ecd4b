//! Periodic grids, real grid functions and their spectral calculus.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::real::Real;

/// Uniform periodic grid on `[-L/2, L/2)` with cached FFT plans.
pub struct Grid<T: Real> {
    n: usize,
    length: T,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
}

impl<T: Real> fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("n", &self.n).field("length", &self.length).finish()
    }
}

impl<T: Real> PartialEq for Grid<T> {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.length == other.length
    }
}

impl<T: Real> Grid<T> {
    pub fn new(n: usize, length: T) -> Result<Arc<Self>> {
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::Grid(format!("n = {n} must be a power of two and at least 16")));
        }
        if !(length > T::zero()) || !length.is_finite() {
            return Err(Error::Grid(format!("length = {length} must be positive")));
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        Ok(Arc::new(Grid { n, length, fwd, inv }))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> T {
        self.length
    }

    pub fn h(&self) -> T {
        self.length / T::from_usize(self.n).unwrap()
    }

    pub fn node(&self, j: usize) -> T {
        -self.length / T::lit(2.0) + T::from_usize(j).unwrap() * self.h()
    }

    pub fn nodes(&self) -> Vec<T> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    /// Wavenumber of FFT bin `j` (standard ordering, Nyquist reported as negative).
    pub fn wavenumber(&self, j: usize) -> T {
        let m = if j < self.n / 2 { j as f64 } else { j as f64 - self.n as f64 };
        T::lit(2.0 * m) * T::PI() / self.length
    }

    pub fn wavenumbers(&self) -> Vec<T> {
        (0..self.n).map(|j| self.wavenumber(j)).collect()
    }

    pub fn kmax(&self) -> T {
        T::PI() * T::from_usize(self.n).unwrap() / self.length
    }

    pub fn nyquist(&self) -> usize {
        self.n / 2
    }

    /// Periodic offset `x - center` mapped into `[-L/2, L/2)`.
    pub fn wrap(&self, x: T) -> T {
        let l = self.length;
        let half = l / T::lit(2.0);
        let mut y = (x + half) % l;
        if y < T::zero() {
            y = y + l;
        }
        y - half
    }

    /// Unnormalized forward DFT of real samples.
    pub fn forward(&self, v: &[T]) -> Vec<Complex<T>> {
        let mut buf: Vec<Complex<T>> = v.iter().map(|&x| Complex::new(x, T::zero())).collect();
        self.fwd.process(&mut buf);
        buf
    }

    pub fn forward_in_place(&self, buf: &mut [Complex<T>], scratch: &mut [Complex<T>]) {
        self.fwd.process_with_scratch(buf, scratch);
    }

    pub fn inverse_in_place(&self, buf: &mut [Complex<T>], scratch: &mut [Complex<T>]) {
        self.inv.process_with_scratch(buf, scratch);
    }

    pub fn scratch_len(&self) -> usize {
        self.fwd.get_inplace_scratch_len().max(self.inv.get_inplace_scratch_len())
    }

    /// Inverse DFT including the `1/n` factor; the imaginary part is dropped.
    pub fn inverse_real(&self, mut spec: Vec<Complex<T>>) -> Vec<T> {
        self.inv.process(&mut spec);
        let s = T::one() / T::from_usize(self.n).unwrap();
        spec.into_iter().map(|z| z.re * s).collect()
    }

    /// Spectral multiplier of the `order`-th derivative; odd orders drop the Nyquist mode.
    pub fn deriv_symbol(&self, j: usize, order: usize) -> Complex<T> {
        if order % 2 == 1 && j == self.nyquist() {
            return Complex::new(T::zero(), T::zero());
        }
        let ik = Complex::new(T::zero(), self.wavenumber(j));
        let mut s = Complex::new(T::one(), T::zero());
        for _ in 0..order {
            s = s * ik;
        }
        s
    }
}

/// How a weighted norm measures distance from its center.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightKind {
    /// Multiplier `e^{a y}`.
    OneSided,
    /// Multiplier `e^{-a|y|}` (squared weight `e^{-2a|y|}`).
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSpec<T> {
    pub a: T,
    pub center: T,
    pub kind: WeightKind,
    pub window: T,
}

impl<T: Real> WeightSpec<T> {
    pub fn one_sided(a: T, center: T, window: T) -> Self {
        WeightSpec { a, center, kind: WeightKind::OneSided, window }
    }

    pub fn two_sided(a: T, center: T, window: T) -> Self {
        WeightSpec { a, center, kind: WeightKind::TwoSided, window }
    }

    pub fn check(&self, grid: &Grid<T>) -> Result<()> {
        let half = grid.length() / T::lit(2.0);
        if !(self.a > T::zero()) {
            return Err(Error::Param(format!("weight rate a = {} must be positive", self.a)));
        }
        if !(self.window > T::zero()) || self.window > half {
            return Err(Error::Window { window: self.window.to_f64_lossy(), half: half.to_f64_lossy() });
        }
        Ok(())
    }

    /// Pointwise multiplier on the grid; zero outside the window.
    pub fn multiplier(&self, grid: &Grid<T>) -> Vec<T> {
        (0..grid.n())
            .map(|j| {
                let y = grid.wrap(grid.node(j) - self.center);
                if y.abs() > self.window {
                    T::zero()
                } else {
                    match self.kind {
                        WeightKind::OneSided => (self.a * y).exp(),
                        WeightKind::TwoSided => (-self.a * y.abs()).exp(),
                    }
                }
            })
            .collect()
    }
}

/// Norms used throughout; weighted variants carry their weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Norm<T> {
    L2,
    H1,
    L1,
    Linf,
    L2a(WeightSpec<T>),
    H1a(WeightSpec<T>),
    L1a(WeightSpec<T>),
    LinfA(WeightSpec<T>),
    W(WeightSpec<T>),
    W1(WeightSpec<T>),
}

/// Real samples on a shared grid.
#[derive(Clone)]
pub struct Field<T: Real> {
    grid: Arc<Grid<T>>,
    values: Vec<T>,
}

impl<T: Real> fmt::Debug for Field<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field").field("grid", &self.grid).field("max_abs", &self.max_abs()).finish()
    }
}

impl<T: Real> Field<T> {
    pub fn new(grid: Arc<Grid<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::GridMismatch);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Param("field values must be finite".into()));
        }
        Ok(Field { grid, values })
    }

    pub(crate) fn from_vec_unchecked(grid: Arc<Grid<T>>, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), grid.n());
        Field { grid, values }
    }

    pub fn zeros(grid: &Arc<Grid<T>>) -> Self {
        Field { grid: grid.clone(), values: vec![T::zero(); grid.n()] }
    }

    pub fn from_fn(grid: &Arc<Grid<T>>, f: impl Fn(T) -> T) -> Self {
        let values = (0..grid.n()).map(|j| f(grid.node(j))).collect();
        Field { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn same_grid(&self, other: &Field<T>) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Field { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Field<T>, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Field { grid: self.grid.clone(), values })
    }

    pub fn add(&self, other: &Field<T>) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field<T>) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Field<T>) -> Result<Self> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: T, other: &Field<T>) -> Result<Self> {
        self.zip_map(other, |a, b| a + s * b)
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn spectrum(&self) -> Vec<Complex<T>> {
        self.grid.forward(&self.values)
    }

    /// Fourier-collocation derivative of order 1, 2 or 3.
    pub fn spectral_deriv(&self, order: usize) -> Result<Self> {
        if !(1..=3).contains(&order) {
            return Err(Error::DerivOrder(order));
        }
        Ok(self.apply_symbol(|j| self.grid.deriv_symbol(j, order)))
    }

    pub(crate) fn apply_symbol(&self, sym: impl Fn(usize) -> Complex<T>) -> Self {
        let mut s = self.spectrum();
        for (j, z) in s.iter_mut().enumerate() {
            *z = *z * sym(j);
        }
        Field { grid: self.grid.clone(), values: self.grid.inverse_real(s) }
    }

    /// `τ_s f(x) = f(x + s)` by Fourier phase shift.
    pub fn translate(&self, s: T) -> Self {
        if s == T::zero() {
            return self.clone();
        }
        let nyq = self.grid.nyquist();
        self.apply_symbol(|j| {
            let th = self.grid.wavenumber(j) * s;
            if j == nyq {
                Complex::new(th.cos(), T::zero())
            } else {
                Complex::new(th.cos(), th.sin())
            }
        })
    }

    /// Trigonometric interpolant evaluated at an arbitrary point.
    pub fn interpolate(&self, x: T) -> T {
        let spec = self.spectrum();
        eval_trig(&self.grid, &spec, x)
    }

    /// Peak location of the trigonometric interpolant, refined by Newton from the largest sample.
    pub fn peak(&self) -> (T, T) {
        let (jmax, _) = self
            .values
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |(bj, bv), (j, &v)| if v > bv { (j, v) } else { (bj, bv) });
        let spec = self.spectrum();
        let d1: Vec<_> = spec.iter().enumerate().map(|(j, z)| *z * self.grid.deriv_symbol(j, 1)).collect();
        let d2: Vec<_> = spec.iter().enumerate().map(|(j, z)| *z * self.grid.deriv_symbol(j, 2)).collect();
        let mut x = self.grid.node(jmax);
        for _ in 0..50 {
            let g = eval_trig(&self.grid, &d1, x);
            let gp = eval_trig(&self.grid, &d2, x);
            if gp == T::zero() {
                break;
            }
            let dx = g / gp;
            let dx = dx.max(-self.grid.h()).min(self.grid.h());
            x = x - dx;
            if dx.abs() < T::epsilon() * T::lit(16.0) {
                break;
            }
        }
        (x, eval_trig(&self.grid, &spec, x))
    }

    pub fn integral(&self) -> T {
        self.grid.h() * self.values.iter().copied().sum::<T>()
    }

    pub fn inner(&self, other: &Field<T>) -> Result<T> {
        self.same_grid(other)?;
        Ok(self.grid.h() * self.values.iter().zip(&other.values).map(|(&a, &b)| a * b).sum::<T>())
    }

    /// Rectangle-rule pairing restricted to `|wrap(x - center)| <= window`.
    pub fn inner_windowed(&self, other: &Field<T>, center: T, window: T) -> Result<T> {
        self.same_grid(other)?;
        let g = &self.grid;
        let mut acc = T::zero();
        for j in 0..g.n() {
            if g.wrap(g.node(j) - center).abs() <= window {
                acc = acc + self.values[j] * other.values[j];
            }
        }
        Ok(g.h() * acc)
    }

    /// Antiderivative starting from zero at the left domain edge.
    ///
    /// The mean part is integrated exactly and the periodic remainder spectrally, so the result
    /// is spectrally accurate whenever `f` is smooth and negligible near the edges.
    pub fn cumulative_integral(&self) -> Self {
        let g = &self.grid;
        let n = g.n();
        let mut s = self.spectrum();
        let mean = s[0].re / T::from_usize(n).unwrap();
        s[0] = Complex::new(T::zero(), T::zero());
        s[g.nyquist()] = Complex::new(T::zero(), T::zero());
        for (j, z) in s.iter_mut().enumerate().skip(1) {
            let k = g.wavenumber(j);
            if k != T::zero() {
                *z = *z / Complex::new(T::zero(), k);
            }
        }
        let anti = g.inverse_real(s);
        let left = g.node(0);
        let base = anti[0];
        let values = (0..n).map(|j| mean * (g.node(j) - left) + anti[j] - base).collect();
        Field { grid: g.clone(), values }
    }

    pub fn norm(&self, spec: Norm<T>) -> Result<T> {
        let h = self.grid.h();
        let l2 = |v: &[T], w: Option<&[T]>| -> T {
            let s: T = match w {
                None => v.iter().map(|&x| x * x).sum(),
                Some(w) => v.iter().zip(w).map(|(&x, &m)| (x * m) * (x * m)).sum(),
            };
            (h * s).sqrt()
        };
        let need_two_sided = |w: &WeightSpec<T>| -> Result<()> {
            if w.kind != WeightKind::TwoSided {
                return Err(Error::Param("W and W1 norms use the two-sided weight".into()));
            }
            Ok(())
        };
        Ok(match spec {
            Norm::L2 => l2(&self.values, None),
            Norm::L1 => h * self.values.iter().map(|x| x.abs()).sum::<T>(),
            Norm::Linf => self.max_abs(),
            Norm::H1 => {
                let d = self.spectral_deriv(1)?;
                let a = l2(&self.values, None);
                let b = l2(&d.values, None);
                (a * a + b * b).sqrt()
            }
            Norm::L2a(w) => {
                w.check(&self.grid)?;
                l2(&self.values, Some(&w.multiplier(&self.grid)))
            }
            Norm::L1a(w) => {
                w.check(&self.grid)?;
                let m = w.multiplier(&self.grid);
                h * self.values.iter().zip(&m).map(|(&x, &mm)| (x * mm).abs()).sum::<T>()
            }
            Norm::LinfA(w) => {
                w.check(&self.grid)?;
                let m = w.multiplier(&self.grid);
                self.values.iter().zip(&m).fold(T::zero(), |acc, (&x, &mm)| acc.max((x * mm).abs()))
            }
            Norm::H1a(w) | Norm::W1(w) => {
                if matches!(spec, Norm::W1(_)) {
                    need_two_sided(&w)?;
                }
                w.check(&self.grid)?;
                let m = w.multiplier(&self.grid);
                let d = self.spectral_deriv(1)?;
                let a = l2(&self.values, Some(&m));
                let b = l2(&d.values, Some(&m));
                (a * a + b * b).sqrt()
            }
            Norm::W(w) => {
                need_two_sided(&w)?;
                w.check(&self.grid)?;
                l2(&self.values, Some(&w.multiplier(&self.grid)))
            }
        })
    }
}

/// Evaluates the trigonometric interpolant with unnormalized coefficients `spec` at `x`.
pub(crate) fn eval_trig<T: Real>(grid: &Grid<T>, spec: &[Complex<T>], x: T) -> T {
    let n = grid.n();
    let nyq = grid.nyquist();
    let x0 = grid.node(0);
    let mut acc = T::zero();
    for (j, z) in spec.iter().enumerate() {
        let th = grid.wavenumber(j) * (x - x0);
        if j == nyq {
            acc = acc + z.re * th.cos();
        } else {
            acc = acc + z.re * th.cos() - z.im * th.sin();
        }
    }
    acc / T::from_usize(n).unwrap()
}
