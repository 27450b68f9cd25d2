//! Retarded and advanced Green's functions by dense LU inversion.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::lattice::Hamiltonian;
use crate::matrix::{CMatrix, MatrixError};
use crate::selfenergy::{AndreevSelfEnergy, EvalPoint};

/// Bound on `max |(E - H - Sigma) G - 1|` for an accepted solve.
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GreensError {
    #[error("system matrix is singular at column {column} (condition number infinite)")]
    Singular { column: usize },
    #[error("inverse residual {residual:e} exceeds {tol:e} (1-norm condition number {condition:e})")]
    Residual {
        residual: f64,
        tol: f64,
        condition: f64,
    },
    #[error("lead self-energy has no broadening; refusing to invert on the real axis")]
    NoBroadening,
    #[error(
        "Andreev self-energy evaluated at (E = {have_energy}, flux = {have_flux}) \
         but requested (E = {want_energy}, flux = {want_flux})"
    )]
    Stale {
        have_energy: f64,
        have_flux: f64,
        want_energy: f64,
        want_flux: f64,
    },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    /// Leads only, no superconductor.
    Bare,
    /// Leads plus the Andreev self-energy.
    Full,
}

#[derive(Clone, Debug)]
pub struct GreensFunctions {
    pub g_retarded: CMatrix,
    pub g_advanced: CMatrix,
    /// `(G^A - G^R) / (2 pi i)`.
    pub spectral: CMatrix,
    pub point: EvalPoint,
    pub stage: Stage,
    /// Measured `max |(E - H - Sigma) G^R - 1|`.
    pub residual: f64,
}

impl GreensFunctions {
    pub fn dim(&self) -> usize {
        self.g_retarded.rows()
    }

    pub fn energy(&self) -> f64 {
        self.point.energy
    }

    pub fn flux(&self) -> f64 {
        self.point.flux
    }
}

/// `E - H - Sigma`.
pub fn system_matrix(
    energy: f64,
    h: &Hamiltonian,
    sigma: &CMatrix,
) -> Result<CMatrix, MatrixError> {
    let n = h.dim();
    let mut a = h.matrix().scale(Complex64::new(-1.0, 0.0)).sub(sigma)?;
    for i in 0..n {
        a[(i, i)] += energy;
    }
    Ok(a)
}

fn solve(
    energy: f64,
    h: &Hamiltonian,
    sigma: &CMatrix,
    stage: Stage,
) -> Result<GreensFunctions, GreensError> {
    let a = system_matrix(energy, h, sigma)?;
    let lu = a.lu().map_err(|e| match e {
        MatrixError::Singular { column } => GreensError::Singular { column },
        other => other.into(),
    })?;
    let g_r = lu.inverse();
    let residual = a.inverse_residual(&g_r)?;
    if !(residual <= RESIDUAL_TOL) {
        let condition = a.norm_one() * g_r.norm_one();
        return Err(GreensError::Residual {
            residual,
            tol: RESIDUAL_TOL,
            condition,
        });
    }
    let g_a = g_r.adjoint();
    let spectral = spectral_from(&g_r, &g_a);
    Ok(GreensFunctions {
        g_retarded: g_r,
        g_advanced: g_a,
        spectral,
        point: EvalPoint::new(energy, h.flux()),
        stage,
        residual,
    })
}

fn spectral_from(g_r: &CMatrix, g_a: &CMatrix) -> CMatrix {
    let scale = Complex64::new(0.0, 2.0 * PI).inv();
    let n = g_r.rows();
    CMatrix::from_fn(n, n, |i, j| (g_a[(i, j)] - g_r[(i, j)]) * scale)
}

/// `[E - H - Sigma_leads]^-1`, the interferometer without the superconductor.
pub fn bare_green(
    energy: f64,
    h: &Hamiltonian,
    sigma_leads: &CMatrix,
) -> Result<GreensFunctions, GreensError> {
    if sigma_leads.max_abs() == 0.0 {
        return Err(GreensError::NoBroadening);
    }
    solve(energy, h, sigma_leads, Stage::Bare)
}

/// `[E - H - Sigma_leads - Sigma_AR(E, flux)]^-1`.
///
/// `sigma_ar` must have been built at this same energy and flux.
pub fn full_green(
    energy: f64,
    h: &Hamiltonian,
    sigma_leads: &CMatrix,
    sigma_ar: &AndreevSelfEnergy,
) -> Result<GreensFunctions, GreensError> {
    let have = sigma_ar.point();
    if have.energy != energy || have.flux != h.flux() {
        return Err(GreensError::Stale {
            have_energy: have.energy,
            have_flux: have.flux,
            want_energy: energy,
            want_flux: h.flux(),
        });
    }
    if sigma_leads.max_abs() == 0.0 {
        return Err(GreensError::NoBroadening);
    }
    let mut sigma = sigma_leads.clone();
    for (&s, &v) in sigma_ar.sites().iter().zip(sigma_ar.values()) {
        sigma[(s, s)] += v;
    }
    solve(energy, h, &sigma, Stage::Full)
}

pub fn spectral_function(greens: &GreensFunctions) -> &CMatrix {
    &greens.spectral
}
