//! Wide-band lead self-energy and the Andreev self-energy of the
//! superconducting contact.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::Geometry;
use crate::matrix::CMatrix;

/// Largest positive imaginary part tolerated on a retarded diagonal element.
pub const CAUSALITY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelfEnergyError {
    #[error("lead coupling {name} must be positive and finite, got {value}")]
    NonPositiveCoupling { name: &'static str, value: f64 },
    #[error("lead site {site} outside device of {dim} sites")]
    LeadSiteOutOfRange { site: usize, dim: usize },
    #[error("invalid Andreev parameter {name} = {value}")]
    InvalidAndreev { name: &'static str, value: f64 },
    #[error("bare Green's function supplied for {given} sites, contact has {expected}")]
    MissingDiagonal { expected: usize, given: usize },
    #[error("bare G_ii at site {site} has positive imaginary part {im:e}")]
    Causality { site: usize, im: f64 },
}

/// Energy and flux at which an energy-dependent quantity was evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub energy: f64,
    pub flux: f64,
}

impl EvalPoint {
    pub fn new(energy: f64, flux: f64) -> Self {
        Self { energy, flux }
    }
}

/// Diagonal broadening matrices of the source (I) and drain (II) leads.
#[derive(Clone, Debug, PartialEq)]
pub struct LeadBroadening {
    gamma_i: f64,
    gamma_ii: f64,
    lead_i: Vec<usize>,
    lead_ii: Vec<usize>,
    dim: usize,
}

pub fn build_lead_broadening(
    geometry: &Geometry,
    gamma_i: f64,
    gamma_ii: f64,
) -> Result<LeadBroadening, SelfEnergyError> {
    check_gamma(gamma_i, gamma_ii)?;
    Ok(LeadBroadening {
        gamma_i,
        gamma_ii,
        lead_i: geometry.lead_i_sites().to_vec(),
        lead_ii: geometry.lead_ii_sites().to_vec(),
        dim: geometry.n_total(),
    })
}

fn check_gamma(gamma_i: f64, gamma_ii: f64) -> Result<(), SelfEnergyError> {
    for (name, value) in [("gamma_i", gamma_i), ("gamma_ii", gamma_ii)] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(SelfEnergyError::NonPositiveCoupling { name, value });
        }
    }
    Ok(())
}

impl LeadBroadening {
    /// Broadening on explicit site lists of a `dim`-site device. Unlike
    /// [`build_lead_broadening`] the two leads may share sites.
    pub fn new(
        dim: usize,
        lead_i: Vec<usize>,
        lead_ii: Vec<usize>,
        gamma_i: f64,
        gamma_ii: f64,
    ) -> Result<Self, SelfEnergyError> {
        check_gamma(gamma_i, gamma_ii)?;
        if let Some(&site) = lead_i.iter().chain(&lead_ii).find(|&&s| s >= dim) {
            return Err(SelfEnergyError::LeadSiteOutOfRange { site, dim });
        }
        Ok(Self {
            gamma_i,
            gamma_ii,
            lead_i,
            lead_ii,
            dim,
        })
    }

    pub fn gamma_i(&self) -> f64 {
        self.gamma_i
    }

    pub fn gamma_ii(&self) -> f64 {
        self.gamma_ii
    }

    pub fn lead_i_sites(&self) -> &[usize] {
        &self.lead_i
    }

    pub fn lead_ii_sites(&self) -> &[usize] {
        &self.lead_ii
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank_i(&self) -> usize {
        self.lead_i.len()
    }

    pub fn rank_ii(&self) -> usize {
        self.lead_ii.len()
    }

    fn projector(&self, sites: &[usize], gamma: f64) -> Vec<f64> {
        let mut d = vec![0.0; self.dim];
        for &s in sites {
            d[s] = gamma;
        }
        d
    }

    /// Diagonal of the source broadening matrix.
    pub fn diag_i(&self) -> Vec<f64> {
        self.projector(&self.lead_i, self.gamma_i)
    }

    pub fn diag_ii(&self) -> Vec<f64> {
        self.projector(&self.lead_ii, self.gamma_ii)
    }

    pub fn matrix_i(&self) -> CMatrix {
        real_diag(&self.diag_i())
    }

    pub fn matrix_ii(&self) -> CMatrix {
        real_diag(&self.diag_ii())
    }
}

fn real_diag(d: &[f64]) -> CMatrix {
    let d: Vec<Complex64> = d.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    CMatrix::from_diagonal(&d)
}

/// `-i (Gamma_I + Gamma_II) / 2`.
pub fn lead_self_energy(broadening: &LeadBroadening) -> CMatrix {
    let d: Vec<Complex64> = broadening
        .diag_i()
        .iter()
        .zip(broadening.diag_ii())
        .map(|(a, b)| Complex64::new(0.0, -(a + b) / 2.0))
        .collect();
    CMatrix::from_diagonal(&d)
}

/// Tunnel coupling to the superconductor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AndreevCoupling {
    pub t_ar: f64,
    pub delta_abs: f64,
    pub g: f64,
}

impl Default for AndreevCoupling {
    fn default() -> Self {
        Self {
            t_ar: 0.2,
            delta_abs: 1.0,
            g: 1.0,
        }
    }
}

impl AndreevCoupling {
    pub fn new(t_ar: f64, delta_abs: f64, g: f64) -> Result<Self, SelfEnergyError> {
        let c = Self { t_ar, delta_abs, g };
        c.validate()?;
        Ok(c)
    }

    pub fn with_t_ar(self, t_ar: f64) -> Self {
        Self { t_ar, ..self }
    }

    pub fn validate(&self) -> Result<(), SelfEnergyError> {
        let bad = |name, value| Err(SelfEnergyError::InvalidAndreev { name, value });
        if !(self.t_ar >= 0.0 && self.t_ar.is_finite()) {
            return bad("t_ar", self.t_ar);
        }
        if !(self.delta_abs > 0.0 && self.delta_abs.is_finite()) {
            return bad("delta_abs", self.delta_abs);
        }
        if !(self.g > 0.0 && self.g.is_finite()) {
            return bad("g", self.g);
        }
        Ok(())
    }

    /// `(t_AR |Delta| / g)^2`.
    pub fn coefficient(&self) -> f64 {
        let a = self.t_ar * self.delta_abs / self.g;
        a * a
    }
}

/// Diagonal Andreev self-energy, nonzero only on the superconducting contact.
#[derive(Clone, Debug, PartialEq)]
pub struct AndreevSelfEnergy {
    sites: Vec<usize>,
    values: Vec<Complex64>,
    dim: usize,
    point: EvalPoint,
}

/// `Sigma_ii = (t_AR |Delta| / g)^2 * Gbare_ii` for every contact site `i`.
///
/// `bare_diag[k]` is the bare retarded diagonal element at
/// `geometry.sc_sites()[k]`, evaluated at `point`.
pub fn andreev_self_energy(
    coupling: &AndreevCoupling,
    bare_diag: &[Complex64],
    geometry: &Geometry,
    point: EvalPoint,
) -> Result<AndreevSelfEnergy, SelfEnergyError> {
    coupling.validate()?;
    let sites = geometry.sc_sites();
    if bare_diag.len() != sites.len() {
        return Err(SelfEnergyError::MissingDiagonal {
            expected: sites.len(),
            given: bare_diag.len(),
        });
    }
    if let Some((&site, g)) = sites
        .iter()
        .zip(bare_diag)
        .find(|(_, g)| g.im > CAUSALITY_TOL || !g.is_finite())
    {
        return Err(SelfEnergyError::Causality { site, im: g.im });
    }
    let c = coupling.coefficient();
    Ok(AndreevSelfEnergy {
        sites: sites.to_vec(),
        values: bare_diag.iter().map(|g| g * c).collect(),
        dim: geometry.n_total(),
        point,
    })
}

impl AndreevSelfEnergy {
    /// An identically zero self-energy, as for a decoupled superconductor.
    pub fn zero(geometry: &Geometry, point: EvalPoint) -> Self {
        Self {
            sites: geometry.sc_sites().to_vec(),
            values: vec![Complex64::new(0.0, 0.0); geometry.sc_sites().len()],
            dim: geometry.n_total(),
            point,
        }
    }

    pub fn point(&self) -> EvalPoint {
        self.point
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    /// Values aligned with [`Self::sites`].
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == Complex64::new(0.0, 0.0))
    }

    pub fn dense_diagonal(&self) -> Vec<Complex64> {
        let mut d = vec![Complex64::new(0.0, 0.0); self.dim];
        for (&s, &v) in self.sites.iter().zip(&self.values) {
            d[s] = v;
        }
        d
    }

    pub fn to_matrix(&self) -> CMatrix {
        CMatrix::from_diagonal(&self.dense_diagonal())
    }
}

/// Lead and Andreev self-energies at one evaluation point.
#[derive(Clone, Debug)]
pub struct SelfEnergySet {
    pub sigma_leads: CMatrix,
    pub sigma_ar: AndreevSelfEnergy,
}

impl SelfEnergySet {
    pub fn point(&self) -> EvalPoint {
        self.sigma_ar.point()
    }

    pub fn total(&self) -> CMatrix {
        let mut total = self.sigma_leads.clone();
        for (&s, &v) in self.sigma_ar.sites().iter().zip(self.sigma_ar.values()) {
            total[(s, s)] += v;
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn preset_broadening_trace_and_rank() {
        let g = Geometry::preset();
        let b = build_lead_broadening(&g, 0.2, 0.2).unwrap();
        assert_relative_eq!(b.matrix_i().trace().re, 4.0, epsilon = 1e-14);
        assert_relative_eq!(b.matrix_ii().trace().re, 4.0, epsilon = 1e-14);
        assert_eq!(b.diag_i().iter().filter(|&&x| x != 0.0).count(), 20);
        assert_eq!(b.diag_ii().iter().filter(|&&x| x != 0.0).count(), 20);
        assert_eq!(b.rank_i(), 20);
    }

    #[test]
    fn empty_lead_gives_zero_matrix() {
        let g = Geometry::new(5, vec![], vec![1], vec![], 0, 0, vec![]).unwrap();
        let b = build_lead_broadening(&g, 0.2, 0.2).unwrap();
        assert_eq!(b.matrix_i(), CMatrix::zeros(5, 5));
    }

    #[test]
    fn non_positive_gamma_rejected() {
        let g = Geometry::preset();
        assert!(build_lead_broadening(&g, 0.0, 0.2).is_err());
        assert!(build_lead_broadening(&g, 0.2, -1.0).is_err());
        assert!(build_lead_broadening(&g, f64::NAN, 0.2).is_err());
    }

    #[test]
    fn lead_self_energy_entries() {
        let g = Geometry::preset();
        let b = build_lead_broadening(&g, 0.2, 0.2).unwrap();
        let s = lead_self_energy(&b);
        for i in 0..100 {
            let on_lead = (0..20).contains(&i) || (50..70).contains(&i);
            let expect = if on_lead { c(0.0, -0.1) } else { c(0.0, 0.0) };
            assert_relative_eq!(s[(i, i)].re, expect.re);
            assert_relative_eq!(s[(i, i)].im, expect.im, epsilon = 1e-16);
        }
        // Hermitian part vanishes exactly
        let herm = s.add(&s.adjoint()).unwrap();
        assert_eq!(herm.max_abs(), 0.0);
        assert_relative_eq!(s.trace().im, -4.0, epsilon = 1e-14);
        assert_eq!(s.trace().re, 0.0);
    }

    #[test]
    fn andreev_coefficient_and_values() {
        let g = Geometry::preset();
        let coupling = AndreevCoupling::new(0.2, 1.0, 1.0).unwrap();
        assert_relative_eq!(coupling.coefficient(), 0.04, epsilon = 1e-16);
        let bare: Vec<Complex64> = (0..10).map(|k| c(0.1 * k as f64, -0.5)).collect();
        let p = EvalPoint::new(0.0, std::f64::consts::PI);
        let s = andreev_self_energy(&coupling, &bare, &g, p).unwrap();
        for (v, b) in s.values().iter().zip(&bare) {
            assert_eq!(*v, b * coupling.coefficient());
        }
        let m = s.to_matrix();
        for i in 0..100 {
            for j in 0..100 {
                if i != j || !(20..30).contains(&i) {
                    assert_eq!(m[(i, j)], c(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn zero_t_ar_gives_zero_matrix() {
        let g = Geometry::preset();
        let coupling = AndreevCoupling::new(0.0, 1.0, 1.0).unwrap();
        let bare = vec![c(0.3, -0.4); 10];
        let s = andreev_self_energy(&coupling, &bare, &g, EvalPoint::new(0.0, 0.0)).unwrap();
        assert!(s.is_zero());
        assert_eq!(s.to_matrix(), CMatrix::zeros(100, 100));
    }

    #[test]
    fn quadratic_scaling_is_exact() {
        let g = Geometry::preset();
        let bare: Vec<Complex64> = (0..10).map(|k| c(0.03 * k as f64 - 0.1, -0.2 - 0.01 * k as f64)).collect();
        let p = EvalPoint::new(0.1, 1.0);
        for t in [0.01, 0.2, 0.37, 2.5] {
            let one = andreev_self_energy(&AndreevCoupling::new(t, 1.0, 1.0).unwrap(), &bare, &g, p).unwrap();
            let two = andreev_self_energy(&AndreevCoupling::new(2.0 * t, 1.0, 1.0).unwrap(), &bare, &g, p).unwrap();
            for (a, b) in one.values().iter().zip(two.values()) {
                assert!((b - a * 4.0).norm() <= 1e-14 * b.norm().max(1.0));
            }
        }
    }

    #[test]
    fn argument_errors() {
        let g = Geometry::preset();
        let coupling = AndreevCoupling::default();
        let p = EvalPoint::new(0.0, 0.0);
        assert!(matches!(
            andreev_self_energy(&coupling, &[c(0.0, -1.0); 9], &g, p),
            Err(SelfEnergyError::MissingDiagonal { expected: 10, given: 9 })
        ));
        let mut bare = vec![c(0.0, -1.0); 10];
        bare[3] = c(0.0, 1e-3);
        assert!(matches!(
            andreev_self_energy(&coupling, &bare, &g, p),
            Err(SelfEnergyError::Causality { site: 23, .. })
        ));
        assert!(AndreevCoupling::new(-0.1, 1.0, 1.0).is_err());
        assert!(AndreevCoupling::new(0.1, 0.0, 1.0).is_err());
        assert!(AndreevCoupling::new(0.1, 1.0, 0.0).is_err());
    }

    #[test]
    fn total_self_energy_adds_contact_diagonal() {
        let g = Geometry::preset();
        let b = build_lead_broadening(&g, 0.2, 0.2).unwrap();
        let bare = vec![c(0.1, -0.3); 10];
        let p = EvalPoint::new(0.0, 0.0);
        let set = SelfEnergySet {
            sigma_leads: lead_self_energy(&b),
            sigma_ar: andreev_self_energy(&AndreevCoupling::default(), &bare, &g, p).unwrap(),
        };
        let total = set.total();
        assert_eq!(total[(25, 25)], bare[0] * AndreevCoupling::default().coefficient());
        assert_eq!(total[(5, 5)], c(0.0, -0.1));
        assert!(total.diagonal().iter().all(|z| z.im <= CAUSALITY_TOL));
    }
}
