//! One device, one energy: Hamiltonian, bare solve, Andreev self-energy,
//! full solve, observables.

use num_complex::Complex64;

use crate::greens::{bare_green, full_green, GreensFunctions};
use crate::lattice::{
    assemble_total_hamiltonian_in_gauge, Geometry, Hamiltonian, PeierlsGauge, TightBindingParams,
};
use crate::matrix::CMatrix;
use crate::observables::{
    contrast, dephasing_rate, ldos_vector, transmission, Dephasing, ObservableRecord,
};
use crate::selfenergy::{
    andreev_self_energy, build_lead_broadening, lead_self_energy, AndreevCoupling,
    AndreevSelfEnergy, LeadBroadening,
};
use crate::Error;

/// Fully specified device: layout, couplings, and superconducting contact.
#[derive(Clone, Debug)]
pub struct Device {
    geometry: Geometry,
    params: TightBindingParams,
    broadening: LeadBroadening,
    coupling: AndreevCoupling,
    gauge: PeierlsGauge,
}

/// Both Green's functions at one `(E, flux)` point.
#[derive(Clone, Debug)]
pub struct PointSolution {
    pub bare: GreensFunctions,
    pub sigma_ar: AndreevSelfEnergy,
    pub full: GreensFunctions,
}

impl Device {
    pub fn new(
        geometry: Geometry,
        params: TightBindingParams,
        gamma_i: f64,
        gamma_ii: f64,
        coupling: AndreevCoupling,
    ) -> Result<Self, Error> {
        params.validate()?;
        coupling.validate()?;
        let broadening = build_lead_broadening(&geometry, gamma_i, gamma_ii)?;
        Ok(Self {
            geometry,
            params,
            broadening,
            coupling,
            gauge: PeierlsGauge::Distributed,
        })
    }

    /// Ring-only device at the standard parameters with the given `t_AR`.
    pub fn preset(t_ar: f64) -> Result<Self, Error> {
        Self::new(
            Geometry::preset(),
            TightBindingParams::default(),
            0.2,
            0.2,
            AndreevCoupling::default().with_t_ar(t_ar),
        )
    }

    pub fn with_gauge(self, gauge: PeierlsGauge) -> Self {
        Self { gauge, ..self }
    }

    pub fn with_coupling(self, coupling: AndreevCoupling) -> Self {
        Self { coupling, ..self }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn params(&self) -> &TightBindingParams {
        &self.params
    }

    pub fn broadening(&self) -> &LeadBroadening {
        &self.broadening
    }

    pub fn coupling(&self) -> &AndreevCoupling {
        &self.coupling
    }

    pub fn dim(&self) -> usize {
        self.geometry.n_total()
    }

    pub fn hamiltonian(&self, flux: f64) -> Result<Hamiltonian, Error> {
        Ok(assemble_total_hamiltonian_in_gauge(
            &self.params.with_flux(flux),
            &self.geometry,
            self.gauge,
        )?)
    }

    pub fn sigma_leads(&self) -> CMatrix {
        lead_self_energy(&self.broadening)
    }

    pub fn bare(&self, energy: f64, flux: f64) -> Result<GreensFunctions, Error> {
        let h = self.hamiltonian(flux)?;
        Ok(bare_green(energy, &h, &self.sigma_leads())?)
    }

    /// Andreev self-energy built from a bare solution at the same point.
    pub fn andreev(&self, bare: &GreensFunctions) -> Result<AndreevSelfEnergy, Error> {
        let diag: Vec<Complex64> = self
            .geometry
            .sc_sites()
            .iter()
            .map(|&s| bare.g_retarded[(s, s)])
            .collect();
        Ok(andreev_self_energy(
            &self.coupling,
            &diag,
            &self.geometry,
            bare.point,
        )?)
    }

    pub fn solve(&self, energy: f64, flux: f64) -> Result<PointSolution, Error> {
        let h = self.hamiltonian(flux)?;
        let sigma_leads = self.sigma_leads();
        let bare = bare_green(energy, &h, &sigma_leads)?;
        let sigma_ar = self.andreev(&bare)?;
        let full = full_green(energy, &h, &sigma_leads, &sigma_ar)?;
        Ok(PointSolution {
            bare,
            sigma_ar,
            full,
        })
    }

    /// Transmission with the superconductor attached.
    pub fn transmission(&self, energy: f64, flux: f64) -> Result<f64, Error> {
        let sol = self.solve(energy, flux)?;
        Ok(transmission(&sol.full, &self.broadening)?)
    }

    pub fn dephasing(&self, energy: f64, flux: f64) -> Result<Dephasing, Error> {
        let sol = self.solve(energy, flux)?;
        Ok(dephasing_rate(&sol.full, &self.broadening, &sol.sigma_ar)?)
    }

    /// Contrast of the full transmission between two flux values.
    pub fn contrast(&self, energy: f64, flux_a: f64, flux_b: f64) -> Result<f64, Error> {
        let t_a = self.transmission(energy, flux_a)?;
        let t_b = self.transmission(energy, flux_b)?;
        Ok(contrast(t_a, t_b)?)
    }

    /// Computes every observable at one energy, annotating instead of
    /// failing when a piece cannot be evaluated.
    pub fn record(&self, energy: f64, flux_a: f64, flux_b: f64) -> ObservableRecord {
        let mut errors: Vec<String> = Vec::new();
        let mut note = |e: Error| errors.push(e.to_string());

        let sol_a = self.solve(energy, flux_a).map_err(&mut note).ok();
        let sol_b = self.solve(energy, flux_b).map_err(&mut note).ok();

        let mut trans = |sol: &Option<PointSolution>, full: bool| -> f64 {
            match sol {
                Some(s) => {
                    let g = if full { &s.full } else { &s.bare };
                    transmission(g, &self.broadening)
                        .map_err(|e| note(e.into()))
                        .unwrap_or(f64::NAN)
                }
                None => f64::NAN,
            }
        };
        let t_bare_a = trans(&sol_a, false);
        let t_bare_b = trans(&sol_b, false);
        let t_full_a = trans(&sol_a, true);
        let t_full_b = trans(&sol_b, true);

        let mut contrast_of = |a: f64, b: f64| -> f64 {
            if a.is_nan() || b.is_nan() {
                return f64::NAN;
            }
            contrast(a, b).map_err(|e| note(e.into())).unwrap_or(f64::NAN)
        };
        let c_bare = contrast_of(t_bare_a, t_bare_b);
        let c_full = contrast_of(t_full_a, t_full_b);

        let nan_ratio = Complex64::new(f64::NAN, f64::NAN);
        let (dephasing, ldos) = match &sol_a {
            Some(s) => {
                let d = dephasing_rate(&s.full, &self.broadening, &s.sigma_ar)
                    .map(|d| d.ratio)
                    .map_err(|e| note(e.into()))
                    .unwrap_or(nan_ratio);
                (d, ldos_vector(&s.full))
            }
            None => (nan_ratio, vec![f64::NAN; self.dim()]),
        };

        ObservableRecord {
            energy,
            flux_a,
            flux_b,
            t_ar: self.coupling.t_ar,
            mx: self.geometry.mx(),
            my: self.geometry.my(),
            t_bare_a,
            t_bare_b,
            t_full_a,
            t_full_b,
            c_bare,
            c_full,
            dephasing,
            rate: Dephasing { ratio: dephasing }.rate(),
            ldos,
            error: if errors.is_empty() {
                None
            } else {
                Some(errors.join("; "))
            },
        }
    }

    /// Diagonal element `G^R_ss` of the bare Green's function by a single
    /// LU solve, without forming the full inverse.
    pub fn bare_diagonal_element(
        &self,
        energy: f64,
        flux: f64,
        site: usize,
    ) -> Result<Complex64, Error> {
        let h = self.hamiltonian(flux)?;
        let a = crate::greens::system_matrix(energy, &h, &self.sigma_leads())?;
        let lu = a.lu()?;
        let mut e = vec![Complex64::new(0.0, 0.0); self.dim()];
        e[site] = Complex64::new(1.0, 0.0);
        Ok(lu.solve(&e)[site])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn record_is_complete_at_preset() {
        let d = Device::preset(0.2).unwrap();
        let r = d.record(0.0, PI, 0.0);
        assert!(r.is_ok(), "{:?}", r.error);
        assert_eq!(r.ldos.len(), 100);
        assert!(r.t_full_a > 0.0 && r.t_bare_a > 0.0);
        assert!(r.c_full < r.c_bare);
        assert!(r.rate > 0.0);
    }

    #[test]
    fn zero_coupling_record_matches_bare() {
        let d = Device::preset(0.0).unwrap();
        let r = d.record(0.37, PI, 0.0);
        assert_eq!(r.t_full_a, r.t_bare_a);
        assert_eq!(r.t_full_b, r.t_bare_b);
        assert_eq!(r.c_full, r.c_bare);
        assert_eq!(r.rate, 0.0);
    }

    #[test]
    fn diagonal_element_matches_full_inverse() {
        let d = Device::preset(0.0).unwrap();
        let g = d.bare(0.25, PI).unwrap();
        let z = d.bare_diagonal_element(0.25, PI, 42).unwrap();
        assert!((z - g.g_retarded[(42, 42)]).norm() < 1e-13);
    }

    #[test]
    fn strong_coupling_transmission_near_one() {
        let t = Device::preset(10.0).unwrap().transmission(0.0, PI).unwrap();
        assert!((t - 1.0).abs() <= 0.1, "T = {t}");
    }

    #[test]
    fn subgap_ldos_peaks_on_contact() {
        let d = Device::preset(2.5).unwrap();
        let r = d.record(0.0, PI, 0.0);
        let on_contact = d
            .geometry()
            .sc_sites()
            .iter()
            .map(|&s| r.ldos[s])
            .fold(f64::NEG_INFINITY, f64::max);
        let mut ring = r.ldos[..d.geometry().n_ring()].to_vec();
        ring.sort_by(f64::total_cmp);
        let median = ring[ring.len() / 2];
        assert!(on_contact > 5.0 * median, "max on contact {on_contact}, ring median {median}");
    }
}
