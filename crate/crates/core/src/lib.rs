//! Numerical laboratory for the stability of solitary waves of generalized KdV
//! `∂_t u + ∂_x³u + 3∂_x(u^p) = 0`, `p ∈ {2, 3}`.

extern crate blas_src;

pub mod criteria;
pub mod diagnostics;
pub mod error;
pub mod evolve;
pub mod experiment;
pub mod grid;
pub mod linop;
pub mod modulation;
pub mod real;
pub mod runner;
pub mod soliton;

pub use error::{Error, Result};
pub use real::Real;

pub type Grid = grid::Grid<f64>;
pub type Field = grid::Field<f64>;
pub type WeightSpec = grid::WeightSpec<f64>;
pub type Norm = grid::Norm<f64>;
pub type SolitonFamily = soliton::SolitonFamily<f64>;
pub type KernelBasis = soliton::KernelBasis<f64>;
pub type EvolveConfig = evolve::EvolveConfig<f64>;
pub type Trajectory = evolve::Trajectory<f64>;

pub type GridF32 = grid::Grid<f32>;
pub type FieldF32 = grid::Field<f32>;

extern "C" {
    fn openblas_set_num_threads(n: std::os::raw::c_int);
}

/// Caps the threads used by the dense linear algebra backend.
pub fn set_algebra_threads(n: usize) {
    let n = n.clamp(1, std::os::raw::c_int::MAX as usize) as std::os::raw::c_int;
    // SAFETY: plain setter in the linked OpenBLAS; takes no pointers.
    unsafe { openblas_set_num_threads(n) }
}

/// Applies `SOLISTAB_THREADS` if it holds a positive integer; returns the value used.
pub fn algebra_threads_from_env() -> Option<usize> {
    let n = std::env::var("SOLISTAB_THREADS").ok()?.trim().parse::<usize>().ok().filter(|&n| n > 0)?;
    set_algebra_threads(n);
    Some(n)
}
