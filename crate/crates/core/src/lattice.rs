//! Device geometry and tight-binding Hamiltonians.
//!
//! The device is an `N`-site ring threaded by an Aharonov-Bohm flux,
//! optionally joined to a rectangular `Mx x My` normal-metal spacer whose
//! first column touches the ring. Ring sites occupy indices `0..N`; spacer
//! site `(n, m)` (column `n`, row `m`) sits at `N + n * My + m`.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::CMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("ring needs at least 3 sites, got {0}")]
    RingTooSmall(usize),
    #[error("{set}: site {site} outside valid range {lo}..{hi}")]
    SiteOutOfRange {
        set: &'static str,
        site: usize,
        lo: usize,
        hi: usize,
    },
    #[error("{set}: site {site} listed twice")]
    DuplicateSite { set: &'static str, site: usize },
    #[error("{a} and {b} share site {site}")]
    Overlap {
        a: &'static str,
        b: &'static str,
        site: usize,
    },
    #[error("spacer has {my} rows but {given} ring contact sites")]
    ContactCountMismatch { my: usize, given: usize },
    #[error("spacer with mx = {mx}, my = {my} has no sites")]
    EmptySpacer { mx: usize, my: usize },
    #[error("spacer index (n = {n}, m = {m}) outside {mx} x {my}")]
    SpacerIndex {
        n: usize,
        m: usize,
        mx: usize,
        my: usize,
    },
    #[error("parameter {name} is not finite ({value})")]
    NonFinite { name: &'static str, value: f64 },
    #[error("matrix is not Hermitian (defect {0:e})")]
    NotHermitian(f64),
}

/// Static layout of the device: ring, leads, superconducting contact, spacer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    n_ring: usize,
    lead_i_sites: Vec<usize>,
    lead_ii_sites: Vec<usize>,
    sc_sites: Vec<usize>,
    mx: usize,
    my: usize,
    ring_contact_sites: Vec<usize>,
}

impl Geometry {
    pub fn new(
        n_ring: usize,
        lead_i_sites: Vec<usize>,
        lead_ii_sites: Vec<usize>,
        sc_sites: Vec<usize>,
        mx: usize,
        my: usize,
        ring_contact_sites: Vec<usize>,
    ) -> Result<Self, LatticeError> {
        let g = Self {
            n_ring,
            lead_i_sites,
            lead_ii_sites,
            sc_sites,
            mx,
            my,
            ring_contact_sites,
        };
        g.validate()?;
        Ok(g)
    }

    /// Ring-only device with the standard layout: 100 sites, lead II on
    /// `0..20`, the superconductor on `20..30`, lead I on `50..70`.
    pub fn preset() -> Self {
        Self::standard(100, 0, 10).expect("preset geometry is valid")
    }

    /// Standard layout for a ring of `n_ring` sites with an `mx x my` spacer.
    ///
    /// Lead II covers ring sites `0..20` and lead I covers `N/2..N/2+20`.
    /// Without a spacer the superconductor touches ring sites `20..20+my`; with
    /// one it touches the whole last column and the spacer attaches to ring
    /// sites `20..20+my`.
    pub fn standard(n_ring: usize, mx: usize, my: usize) -> Result<Self, LatticeError> {
        let half = n_ring / 2;
        let lead_ii = (0..20.min(n_ring)).collect();
        let lead_i = (half..(half + 20).min(n_ring)).collect();
        let (sc, contacts) = if mx == 0 {
            ((20..20 + my).collect(), Vec::new())
        } else {
            (
                default_sc_sites(n_ring, mx, my),
                default_ring_contacts(my),
            )
        };
        Self::new(n_ring, lead_i, lead_ii, sc, mx, my, contacts)
    }

    fn validate(&self) -> Result<(), LatticeError> {
        let n = self.n_ring;
        if n < 3 {
            return Err(LatticeError::RingTooSmall(n));
        }
        check_set("lead_i_sites", &self.lead_i_sites, 0, n)?;
        check_set("lead_ii_sites", &self.lead_ii_sites, 0, n)?;
        check_disjoint(
            "lead_i_sites",
            &self.lead_i_sites,
            "lead_ii_sites",
            &self.lead_ii_sites,
        )?;
        if self.mx == 0 {
            check_set("sc_sites", &self.sc_sites, 0, n)?;
            check_disjoint("lead_i_sites", &self.lead_i_sites, "sc_sites", &self.sc_sites)?;
            check_disjoint(
                "lead_ii_sites",
                &self.lead_ii_sites,
                "sc_sites",
                &self.sc_sites,
            )?;
        } else {
            if self.my == 0 {
                return Err(LatticeError::EmptySpacer {
                    mx: self.mx,
                    my: self.my,
                });
            }
            check_set("sc_sites", &self.sc_sites, n, self.n_total())?;
            check_set("ring_contact_sites", &self.ring_contact_sites, 0, n)?;
            if self.ring_contact_sites.len() != self.my {
                return Err(LatticeError::ContactCountMismatch {
                    my: self.my,
                    given: self.ring_contact_sites.len(),
                });
            }
        }
        Ok(())
    }

    pub fn n_ring(&self) -> usize {
        self.n_ring
    }

    pub fn mx(&self) -> usize {
        self.mx
    }

    pub fn my(&self) -> usize {
        self.my
    }

    pub fn lead_i_sites(&self) -> &[usize] {
        &self.lead_i_sites
    }

    pub fn lead_ii_sites(&self) -> &[usize] {
        &self.lead_ii_sites
    }

    /// Sites receiving the Andreev self-energy.
    pub fn sc_sites(&self) -> &[usize] {
        &self.sc_sites
    }

    pub fn ring_contact_sites(&self) -> &[usize] {
        &self.ring_contact_sites
    }

    pub fn has_spacer(&self) -> bool {
        self.mx > 0
    }

    pub fn n_spacer(&self) -> usize {
        self.mx * self.my
    }

    /// Total number of device sites, ring plus spacer.
    pub fn n_total(&self) -> usize {
        self.n_ring + self.n_spacer()
    }

    /// Device index of spacer site `(n, m)`.
    pub fn site_index(&self, n: usize, m: usize) -> Result<usize, LatticeError> {
        site_index(n, m, self)
    }
}

fn check_set(set: &'static str, sites: &[usize], lo: usize, hi: usize) -> Result<(), LatticeError> {
    let mut seen = BTreeSet::new();
    for &site in sites {
        if site < lo || site >= hi {
            return Err(LatticeError::SiteOutOfRange { set, site, lo, hi });
        }
        if !seen.insert(site) {
            return Err(LatticeError::DuplicateSite { set, site });
        }
    }
    Ok(())
}

fn check_disjoint(
    a: &'static str,
    xs: &[usize],
    b: &'static str,
    ys: &[usize],
) -> Result<(), LatticeError> {
    let xs: BTreeSet<_> = xs.iter().collect();
    match ys.iter().find(|y| xs.contains(y)) {
        Some(&site) => Err(LatticeError::Overlap { a, b, site }),
        None => Ok(()),
    }
}

/// All rows of the spacer column farthest from the ring.
pub fn default_sc_sites(n_ring: usize, mx: usize, my: usize) -> Vec<usize> {
    if mx == 0 {
        return Vec::new();
    }
    (0..my).map(|m| n_ring + (mx - 1) * my + m).collect()
}

pub fn default_ring_contacts(my: usize) -> Vec<usize> {
    (20..20 + my).collect()
}

/// Device index of spacer site `(n, m)`: `N + n * My + m`.
pub fn site_index(n: usize, m: usize, geometry: &Geometry) -> Result<usize, LatticeError> {
    let (mx, my) = (geometry.mx, geometry.my);
    if n >= mx || m >= my {
        return Err(LatticeError::SpacerIndex { n, m, mx, my });
    }
    Ok(geometry.n_ring + n * my + m)
}

/// On-site energies, hoppings, and the Aharonov-Bohm phase.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TightBindingParams {
    pub eps_ring: f64,
    pub t_ring: f64,
    pub eps_spacer: f64,
    pub t_x: f64,
    pub t_y: f64,
    pub t_x_prime: f64,
    /// Peierls phase accumulated around the full ring, in radians.
    pub flux: f64,
}

impl Default for TightBindingParams {
    fn default() -> Self {
        Self {
            eps_ring: 0.0,
            t_ring: -1.0,
            eps_spacer: 0.0,
            t_x: -1.0,
            t_y: -1.0,
            t_x_prime: -1.0,
            flux: PI,
        }
    }
}

impl TightBindingParams {
    pub fn with_flux(self, flux: f64) -> Self {
        Self { flux, ..self }
    }

    pub fn validate(&self) -> Result<(), LatticeError> {
        let fields = [
            ("eps_ring", self.eps_ring),
            ("t_ring", self.t_ring),
            ("eps_spacer", self.eps_spacer),
            ("t_x", self.t_x),
            ("t_y", self.t_y),
            ("t_x_prime", self.t_x_prime),
            ("flux", self.flux),
        ];
        for (name, value) in fields {
            if !value.is_finite() {
                return Err(LatticeError::NonFinite { name, value });
            }
        }
        Ok(())
    }
}

/// How the flux phase is distributed over the ring bonds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PeierlsGauge {
    /// `e^{i phi / N}` on every bond.
    #[default]
    Distributed,
    /// The whole `e^{i phi}` on the bond closing the ring, `(N-1, 0)`.
    SingleBond,
}

/// Dense Hermitian Hamiltonian of the device at one flux value.
#[derive(Clone, Debug, PartialEq)]
pub struct Hamiltonian {
    matrix: CMatrix,
    flux: f64,
}

impl Hamiltonian {
    /// Wraps an arbitrary Hermitian matrix, e.g. a hand-built test device.
    pub fn from_matrix(matrix: CMatrix, flux: f64) -> Result<Self, LatticeError> {
        let defect = matrix.hermiticity_defect();
        if defect > 1e-12 {
            return Err(LatticeError::NotHermitian(defect));
        }
        Ok(Self { matrix, flux })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn flux(&self) -> f64 {
        self.flux
    }

    /// Number of nonzero off-diagonal pairs `(i < j)`.
    pub fn bond_count(&self) -> usize {
        let n = self.dim();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.matrix[(i, j)].norm() > 0.0)
            .count()
    }
}

/// Ring block, flux spread evenly over the bonds.
pub fn build_ring_hamiltonian(
    params: &TightBindingParams,
    geometry: &Geometry,
) -> Result<Hamiltonian, LatticeError> {
    build_ring_hamiltonian_in_gauge(params, geometry, PeierlsGauge::Distributed)
}

pub fn build_ring_hamiltonian_in_gauge(
    params: &TightBindingParams,
    geometry: &Geometry,
    gauge: PeierlsGauge,
) -> Result<Hamiltonian, LatticeError> {
    params.validate()?;
    let n = geometry.n_ring;
    if n < 3 {
        return Err(LatticeError::RingTooSmall(n));
    }
    let mut h = CMatrix::zeros(n, n);
    fill_ring(&mut h, params, n, gauge);
    Ok(Hamiltonian {
        matrix: h,
        flux: params.flux,
    })
}

fn fill_ring(h: &mut CMatrix, params: &TightBindingParams, n: usize, gauge: PeierlsGauge) {
    let distributed = Complex64::from_polar(params.t_ring, params.flux / n as f64);
    let closing = Complex64::from_polar(params.t_ring, params.flux);
    let plain = Complex64::new(params.t_ring, 0.0);
    for site in 0..n {
        let next = (site + 1) % n;
        let hop = match gauge {
            PeierlsGauge::Distributed => distributed,
            PeierlsGauge::SingleBond if next == 0 => closing,
            PeierlsGauge::SingleBond => plain,
        };
        h[(site, site)] = Complex64::new(params.eps_ring, 0.0);
        h[(site, next)] += hop;
        h[(next, site)] += hop.conj();
    }
}

/// Spacer block with open boundaries, indexed locally as `n * My + m`.
pub fn build_spacer_hamiltonian(
    params: &TightBindingParams,
    geometry: &Geometry,
) -> Result<Hamiltonian, LatticeError> {
    params.validate()?;
    let (mx, my) = (geometry.mx, geometry.my);
    if mx == 0 || my == 0 {
        return Err(LatticeError::EmptySpacer { mx, my });
    }
    let mut h = CMatrix::zeros(mx * my, mx * my);
    fill_spacer(&mut h, params, 0, mx, my, &vec![0.0; my.saturating_sub(1)]);
    Ok(Hamiltonian {
        matrix: h,
        flux: params.flux,
    })
}

/// `y_phases[m]` is the Peierls phase on every bond `(n, m) -> (n, m + 1)`.
fn fill_spacer(
    h: &mut CMatrix,
    params: &TightBindingParams,
    offset: usize,
    mx: usize,
    my: usize,
    y_phases: &[f64],
) {
    let local = |n: usize, m: usize| offset + n * my + m;
    let tx = Complex64::new(params.t_x, 0.0);
    for n in 0..mx {
        for m in 0..my {
            let j = local(n, m);
            h[(j, j)] = Complex64::new(params.eps_spacer, 0.0);
            if n + 1 < mx {
                let k = local(n + 1, m);
                h[(j, k)] = tx;
                h[(k, j)] = tx;
            }
            if m + 1 < my {
                let k = local(n, m + 1);
                let ty = Complex64::from_polar(params.t_y, y_phases[m]);
                h[(j, k)] = ty;
                h[(k, j)] = ty.conj();
            }
        }
    }
}

/// Phase accumulated by hopping along the shorter ring path from `from` to
/// `to` in the given gauge.
pub fn ring_path_phase(from: usize, to: usize, n: usize, flux: f64, gauge: PeierlsGauge) -> f64 {
    let fwd = (to + n - from) % n;
    let (steps, sign) = if fwd <= n - fwd {
        (fwd, 1.0)
    } else {
        (n - fwd, -1.0)
    };
    match gauge {
        PeierlsGauge::Distributed => sign * steps as f64 * flux / n as f64,
        PeierlsGauge::SingleBond => {
            let crosses = if sign > 0.0 {
                from + steps >= n
            } else {
                from < steps
            };
            if crosses {
                sign * flux
            } else {
                0.0
            }
        }
    }
}

/// Full device Hamiltonian `[ring, coupling; coupling^dagger, spacer]`.
pub fn assemble_total_hamiltonian(
    params: &TightBindingParams,
    geometry: &Geometry,
) -> Result<Hamiltonian, LatticeError> {
    assemble_total_hamiltonian_in_gauge(params, geometry, PeierlsGauge::Distributed)
}

pub fn assemble_total_hamiltonian_in_gauge(
    params: &TightBindingParams,
    geometry: &Geometry,
    gauge: PeierlsGauge,
) -> Result<Hamiltonian, LatticeError> {
    if !geometry.has_spacer() {
        return build_ring_hamiltonian_in_gauge(params, geometry, gauge);
    }
    params.validate()?;
    let n = geometry.n_ring;
    let total = geometry.n_total();
    let mut h = CMatrix::zeros(total, total);
    fill_ring(&mut h, params, n, gauge);
    // Each spacer row bond copies the phase of the ring path between the two
    // contacts it runs parallel to, so no spacer plaquette encloses flux.
    let y_phases: Vec<f64> = geometry
        .ring_contact_sites
        .windows(2)
        .map(|w| ring_path_phase(w[0], w[1], n, params.flux, gauge))
        .collect();
    fill_spacer(&mut h, params, n, geometry.mx, geometry.my, &y_phases);
    let t = Complex64::new(params.t_x_prime, 0.0);
    for (m, &r) in geometry.ring_contact_sites.iter().enumerate() {
        let j = site_index(0, m, geometry)?;
        h[(r, j)] = t;
        h[(j, r)] = t;
    }
    Ok(Hamiltonian {
        matrix: h,
        flux: params.flux,
    })
}
