//! Transmission, Aharonov-Bohm contrast, local density of states, and the
//! transport-weighted dephasing rate.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::greens::{GreensFunctions, Stage};
use crate::selfenergy::{AndreevSelfEnergy, LeadBroadening};

/// Largest imaginary residue accepted on a trace that should be real.
pub const IMAG_TOL: f64 = 1e-10;
/// Transmissions below this are treated as zero in the contrast.
pub const CONTRAST_FLOOR: f64 = 1e-14;
/// Injection traces below this make the dephasing ratio meaningless.
pub const INJECTION_FLOOR: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObservableError {
    #[error("{what} has imaginary residue {im:e} (real part {re:e})")]
    ImaginaryResidue { what: &'static str, re: f64, im: f64 },
    #[error("contrast undefined: both transmissions below {CONTRAST_FLOOR:e} ({t_a:e}, {t_b:e})")]
    UndefinedContrast { t_a: f64, t_b: f64 },
    #[error("site {site} outside device of {dim} sites")]
    SiteOutOfRange { site: usize, dim: usize },
    #[error("dephasing needs the full Green's function")]
    WrongStage,
    #[error("Andreev self-energy and Green's function were evaluated at different points")]
    PointMismatch,
    #[error("injection trace {0:e} too small for a dephasing ratio")]
    InjectionStarved(f64),
    #[error("lead broadening is for {lead} sites, Green's function has {greens}")]
    DimensionMismatch { lead: usize, greens: usize },
}

fn check_dims(greens: &GreensFunctions, broadening: &LeadBroadening) -> Result<(), ObservableError> {
    if greens.dim() != broadening.dim() {
        return Err(ObservableError::DimensionMismatch {
            lead: broadening.dim(),
            greens: greens.dim(),
        });
    }
    Ok(())
}

/// `Tr[Gamma_I G^R Gamma_II G^A]`.
///
/// The advanced function is read from `greens.g_advanced` rather than
/// conjugated on the fly, so a broken `G^A = (G^R)^dagger` relation shows
/// up as an imaginary residue. Works for either stage.
pub fn transmission(
    greens: &GreensFunctions,
    broadening: &LeadBroadening,
) -> Result<f64, ObservableError> {
    check_dims(greens, broadening)?;
    let (gr, ga) = (&greens.g_retarded, &greens.g_advanced);
    let mut trace = Complex64::new(0.0, 0.0);
    for &i in broadening.lead_i_sites() {
        for &j in broadening.lead_ii_sites() {
            trace += gr[(i, j)] * ga[(j, i)];
        }
    }
    trace *= broadening.gamma_i() * broadening.gamma_ii();
    if trace.im.abs() > IMAG_TOL {
        return Err(ObservableError::ImaginaryResidue {
            what: "transmission",
            re: trace.re,
            im: trace.im,
        });
    }
    Ok(trace.re)
}

/// `2 |T_a - T_b| / (T_a + T_b)`.
pub fn contrast(t_a: f64, t_b: f64) -> Result<f64, ObservableError> {
    if t_a.abs() < CONTRAST_FLOOR && t_b.abs() < CONTRAST_FLOOR {
        return Err(ObservableError::UndefinedContrast { t_a, t_b });
    }
    Ok(2.0 * (t_a - t_b).abs() / (t_a + t_b))
}

/// Diagonal element of the spectral function at `site`.
pub fn ldos(greens: &GreensFunctions, site: usize) -> Result<f64, ObservableError> {
    if site >= greens.dim() {
        return Err(ObservableError::SiteOutOfRange {
            site,
            dim: greens.dim(),
        });
    }
    Ok(greens.spectral[(site, site)].re)
}

pub fn ldos_vector(greens: &GreensFunctions) -> Vec<f64> {
    greens.spectral.diagonal().iter().map(|z| z.re).collect()
}

/// Trace ratio `R = Tr[Sigma_AR G^R Gamma_I G^A] / Tr[G^R Gamma_I G^A]` and
/// the two real channels derived from it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dephasing {
    pub ratio: Complex64,
}

impl Dephasing {
    /// `Gamma_phi / hbar = -2 Im R` (units with hbar = 1).
    pub fn rate(&self) -> f64 {
        -2.0 * self.ratio.im
    }

    /// `-2 Re R`, the energy-shift channel of the self-energy.
    pub fn lamb_shift(&self) -> f64 {
        -2.0 * self.ratio.re
    }
}

pub fn dephasing_rate(
    greens: &GreensFunctions,
    broadening: &LeadBroadening,
    sigma_ar: &AndreevSelfEnergy,
) -> Result<Dephasing, ObservableError> {
    check_dims(greens, broadening)?;
    if greens.stage != Stage::Full {
        return Err(ObservableError::WrongStage);
    }
    if sigma_ar.point() != greens.point {
        return Err(ObservableError::PointMismatch);
    }
    let (gr, ga) = (&greens.g_retarded, &greens.g_advanced);
    let gamma = broadening.gamma_i();
    // (G^R Gamma_I G^A)_ii = gamma * sum_{j in I} G^R_ij G^A_ji
    let injected = |i: usize| -> Complex64 {
        broadening
            .lead_i_sites()
            .iter()
            .map(|&j| gr[(i, j)] * ga[(j, i)])
            .sum::<Complex64>()
            * gamma
    };
    let denominator: Complex64 = (0..greens.dim()).map(injected).sum();
    if denominator.im.abs() > IMAG_TOL * denominator.re.abs().max(1.0) {
        return Err(ObservableError::ImaginaryResidue {
            what: "injection trace",
            re: denominator.re,
            im: denominator.im,
        });
    }
    if denominator.re < INJECTION_FLOOR {
        return Err(ObservableError::InjectionStarved(denominator.re));
    }
    let numerator: Complex64 = sigma_ar
        .sites()
        .iter()
        .zip(sigma_ar.values())
        .map(|(&s, &sigma)| sigma * injected(s))
        .sum();
    Ok(Dephasing {
        ratio: numerator / denominator.re,
    })
}

/// Everything recorded at one sweep grid point.
///
/// `*_a` and `*_b` refer to the two flux values; `bare` omits the
/// superconductor and `full` includes it. LDOS and dephasing are taken from
/// the full Green's function at `flux_a`. Quantities that could not be
/// computed are NaN and `error` says why.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableRecord {
    pub energy: f64,
    pub flux_a: f64,
    pub flux_b: f64,
    pub t_ar: f64,
    pub mx: usize,
    pub my: usize,
    pub t_bare_a: f64,
    pub t_bare_b: f64,
    pub t_full_a: f64,
    pub t_full_b: f64,
    pub c_bare: f64,
    pub c_full: f64,
    pub dephasing: Complex64,
    pub rate: f64,
    pub ldos: Vec<f64>,
    pub error: Option<String>,
}

impl ObservableRecord {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    /// Value of a named column, using the CSV header names plus `site_K`
    /// for LDOS entries.
    pub fn column(&self, name: &str) -> Option<f64> {
        let v = match name {
            "energy" => self.energy,
            "flux_a" => self.flux_a,
            "flux_b" => self.flux_b,
            "t_ar" => self.t_ar,
            "mx" => self.mx as f64,
            "my" => self.my as f64,
            "T_bare_a" => self.t_bare_a,
            "T_bare_b" => self.t_bare_b,
            "T_full_a" => self.t_full_a,
            "T_full_b" => self.t_full_b,
            "C_bare" => self.c_bare,
            "C_full" => self.c_full,
            "dephasing_re" => self.dephasing.re,
            "dephasing_im" => self.dephasing.im,
            "rate" => self.rate,
            other => {
                let k: usize = other.strip_prefix("site_")?.parse().ok()?;
                *self.ldos.get(k)?
            }
        };
        Some(v)
    }
}
