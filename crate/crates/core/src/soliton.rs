//! Solitary waves of generalized KdV and the generalized kernel of their linearization.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::real::Real;

/// `φ_c(y) = α sech^{2/(p-1)}(β y)` with `α = ((p+1)c/6)^{1/(p-1)}`, `β = (p-1)√c/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolitonFamily<T> {
    p: u32,
    c: T,
    alpha: T,
    beta: T,
}

impl<T: Real> SolitonFamily<T> {
    pub fn new(p: u32, c: T) -> Result<Self> {
        if p != 2 && p != 3 {
            return Err(Error::Unsupported(format!("nonlinearity exponent p = {p}; only 2 and 3 are supported")));
        }
        if !(c > T::zero()) || !c.is_finite() {
            return Err(Error::BadSpeed(c.to_f64_lossy()));
        }
        let pm1 = T::from_u32(p - 1).unwrap();
        let alpha = (T::from_u32(p + 1).unwrap() * c / T::lit(6.0)).powf(T::one() / pm1);
        let beta = pm1 / T::lit(2.0) * c.sqrt();
        Ok(SolitonFamily { p, c, alpha, beta })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn c(&self) -> T {
        self.c
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn with_speed(&self, c: T) -> Result<Self> {
        Self::new(self.p, c)
    }

    fn sech_pow(&self, y: T) -> T {
        let s = T::one() / (self.beta * y).cosh();
        if self.p == 2 {
            s * s
        } else {
            s
        }
    }

    /// Exponent `2/(p-1)` of the sech envelope.
    fn q(&self) -> T {
        T::lit(2.0) / T::from_u32(self.p - 1).unwrap()
    }

    pub fn value(&self, y: T) -> T {
        self.alpha * self.sech_pow(y)
    }

    pub fn deriv(&self, y: T) -> T {
        -self.q() * self.beta * (self.beta * y).tanh() * self.value(y)
    }

    /// `∂_c φ_c(y)` from the scaling identity `φ_c(y) = c^{1/(p-1)} φ_1(√c y)`.
    pub fn dc_value(&self, y: T) -> T {
        let pm1 = T::from_u32(self.p - 1).unwrap();
        let one = SolitonFamily::new(self.p, T::one()).expect("unit speed is valid");
        let sc = self.c.sqrt();
        let z = sc * y;
        self.c.powf(T::one() / pm1 - T::one()) * (one.value(z) / pm1 + z / T::lit(2.0) * one.deriv(z))
    }

    /// `∫_{-∞}^y ∂_cφ_c` in closed form.
    pub fn dc_antiderivative(&self, y: T) -> T {
        let sc = self.c.sqrt();
        let two = T::lit(2.0);
        if self.p == 2 {
            let z = sc * y / two;
            let s = T::one() / z.cosh();
            (T::one() + z.tanh()) / (two * sc) + y / T::lit(4.0) * s * s
        } else {
            (two / T::lit(3.0)).sqrt() * y / (sc * y).cosh() / (two * sc)
        }
    }

    /// `1/⟨φ_c, ∂_cφ_c⟩` in closed form: `2/√c` for p = 2, `3√c` for p = 3.
    pub fn theta1(&self) -> T {
        if self.p == 2 {
            T::lit(2.0) / self.c.sqrt()
        } else {
            T::lit(3.0) * self.c.sqrt()
        }
    }

    pub fn f(&self, u: T) -> T {
        T::lit(3.0) * u.powi(self.p as i32)
    }

    pub fn fprime(&self, u: T) -> T {
        T::lit(3.0) * T::from_u32(self.p).unwrap() * u.powi(self.p as i32 - 1)
    }

    pub fn profile(&self, grid: &Arc<Grid<T>>, center: T) -> Field<T> {
        Field::from_fn(grid, |x| self.value(grid.wrap(x - center)))
    }

    pub fn dprofile(&self, grid: &Arc<Grid<T>>, center: T) -> Field<T> {
        Field::from_fn(grid, |x| self.deriv(grid.wrap(x - center)))
    }

    pub fn dc_profile(&self, grid: &Arc<Grid<T>>, center: T) -> Field<T> {
        Field::from_fn(grid, |x| self.dc_value(grid.wrap(x - center)))
    }

    /// Sup-norm of `φ'' - cφ + 3φ^p` with the second derivative taken spectrally.
    pub fn ode_residual(&self, grid: &Arc<Grid<T>>) -> T {
        self.ode_residual_with_speed(grid, self.c)
    }

    /// Residual of this profile against the profile equation at speed `c_test`.
    pub fn ode_residual_with_speed(&self, grid: &Arc<Grid<T>>, c_test: T) -> T {
        let phi = self.profile(grid, T::zero());
        let d2 = phi.spectral_deriv(2).expect("order 2 is valid");
        d2.values()
            .iter()
            .zip(phi.values())
            .map(|(&a, &u)| (a - c_test * u + self.f(u)).abs())
            .fold(T::zero(), T::max)
    }

    pub fn momentum_sq(&self, grid: &Arc<Grid<T>>) -> T {
        let phi = self.profile(grid, T::zero());
        phi.inner(&phi).expect("same grid")
    }

    /// `L_c w = ∂_y(w'' - c w + f'(φ_c) w)` evaluated spectrally, soliton at `center`.
    pub fn apply_lc(&self, w: &Field<T>, center: T) -> Result<Field<T>> {
        let inner = self.schrodinger(w, center)?;
        inner.spectral_deriv(1)
    }

    /// `L_c^* ζ = -(∂_y^2 - c + f'(φ_c)) ∂_y ζ`, taking `∂_y ζ` as input so that fields with a
    /// jump across the periodic seam (like `ζ¹`) can be handled through their smooth derivative.
    pub fn apply_lc_adjoint_from_derivative(&self, dzeta: &Field<T>, center: T) -> Result<Field<T>> {
        Ok(self.schrodinger(dzeta, center)?.scale(-T::one()))
    }

    fn schrodinger(&self, w: &Field<T>, center: T) -> Result<Field<T>> {
        let d2 = w.spectral_deriv(2)?;
        let g = w.grid();
        let vals = (0..g.n())
            .map(|j| {
                let y = g.wrap(g.node(j) - center);
                d2.values()[j] - self.c * w.values()[j] + self.fprime(self.value(y)) * w.values()[j]
            })
            .collect();
        Ok(Field::from_vec_unchecked(g.clone(), vals))
    }

    pub fn kernel_basis(&self, grid: &Arc<Grid<T>>, center: T) -> KernelBasis<T> {
        let phi = self.profile(grid, center);
        let xi1 = self.dprofile(grid, center);
        let xi2 = self.dc_profile(grid, center);
        let theta1 = T::one() / phi.inner(&xi2).expect("same grid");
        let anti = xi2.cumulative_integral();
        let int_dc = xi2.integral();
        let theta2 = theta1 * theta1 * int_dc * int_dc / T::lit(2.0);
        let zeta1 = anti.scale(-theta1).axpy(theta2, &phi).expect("same grid");
        let zeta2 = phi.scale(theta1);
        KernelBasis { p: self.p, c: self.c, center, phi, xi1, xi2, zeta1, zeta2, theta1, theta2, int_dc }
    }

    /// Sup-norm residuals of the four generalized-kernel relations; the adjoint ones are
    /// restricted to `|y - center| <= L/4`.
    pub fn check_generalized_kernel(&self, basis: &KernelBasis<T>) -> Result<KernelResiduals<T>> {
        let g = basis.phi.grid().clone();
        let c0 = basis.center;
        let r1 = self.apply_lc(&basis.xi1, c0)?;
        let r2 = self.apply_lc(&basis.xi2, c0)?.sub(&basis.xi1)?;
        let a1 = self.apply_lc_adjoint_from_derivative(&basis.dy_zeta1(), c0)?.sub(&basis.zeta2)?;
        let a2 = self.apply_lc_adjoint_from_derivative(&basis.dy_zeta2(), c0)?;
        let quarter = g.length() / T::lit(4.0);
        let windowed_sup = |f: &Field<T>| {
            (0..g.n())
                .filter(|&j| (g.node(j) - c0).abs() <= quarter)
                .map(|j| f.values()[j].abs())
                .fold(T::zero(), T::max)
        };
        Ok(KernelResiduals {
            l_xi1: r1.max_abs(),
            l_xi2_minus_xi1: r2.max_abs(),
            ladj_zeta1_minus_zeta2: windowed_sup(&a1),
            ladj_zeta2: windowed_sup(&a2),
        })
    }
}

/// `ξ¹ = ∂_yφ_c`, `ξ² = ∂_cφ_c` and the biorthogonal adjoint vectors `ζ¹`, `ζ²`.
#[derive(Debug, Clone)]
pub struct KernelBasis<T: Real> {
    pub p: u32,
    pub c: T,
    pub center: T,
    pub phi: Field<T>,
    pub xi1: Field<T>,
    pub xi2: Field<T>,
    pub zeta1: Field<T>,
    pub zeta2: Field<T>,
    pub theta1: T,
    pub theta2: T,
    /// `∫ ∂_cφ_c`.
    pub int_dc: T,
}

impl<T: Real> KernelBasis<T> {
    /// `∂_yζ¹ = -θ₁ξ² + θ₂ξ¹`.
    pub fn dy_zeta1(&self) -> Field<T> {
        self.xi2.scale(-self.theta1).axpy(self.theta2, &self.xi1).expect("same grid")
    }

    /// `∂_yζ² = θ₁ξ¹`.
    pub fn dy_zeta2(&self) -> Field<T> {
        self.xi1.scale(self.theta1)
    }

    /// `Q_c v = v - ⟨v,ζ¹⟩ξ¹ - ⟨v,ζ²⟩ξ²`, pairings windowed to `window` around the center.
    pub fn project_q(&self, v: &Field<T>, window: T) -> Result<Field<T>> {
        let (p1, p2) = self.pairings(v, window)?;
        v.axpy(-p1, &self.xi1)?.axpy(-p2, &self.xi2)
    }

    /// `(⟨v,ζ¹⟩, ⟨v,ζ²⟩)` over the window.
    pub fn pairings(&self, v: &Field<T>, window: T) -> Result<(T, T)> {
        Ok((v.inner_windowed(&self.zeta1, self.center, window)?, v.inner_windowed(&self.zeta2, self.center, window)?))
    }

    pub fn biorthogonality(&self, window: T) -> Result<[[T; 2]; 2]> {
        let xs = [&self.xi1, &self.xi2];
        let zs = [&self.zeta1, &self.zeta2];
        let mut m = [[T::zero(); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] = xs[i].inner_windowed(zs[j], self.center, window)?;
            }
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelResiduals<T> {
    pub l_xi1: T,
    pub l_xi2_minus_xi1: T,
    pub ladj_zeta1_minus_zeta2: T,
    pub ladj_zeta2: T,
}

/// Central differences in `c` of `(ζ¹, ζ²)`, used only inside the modulation matrix.
pub fn dc_zeta<T: Real>(fam: &SolitonFamily<T>, grid: &Arc<Grid<T>>, center: T) -> Result<(Field<T>, Field<T>)> {
    let eps = T::epsilon().cbrt() * fam.c();
    let hi = fam.with_speed(fam.c() + eps)?.kernel_basis(grid, center);
    let lo = fam.with_speed(fam.c() - eps)?.kernel_basis(grid, center);
    let s = T::one() / (T::lit(2.0) * eps);
    Ok((hi.zeta1.sub(&lo.zeta1)?.scale(s), hi.zeta2.sub(&lo.zeta2)?.scale(s)))
}
