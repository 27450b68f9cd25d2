//! Analytic oracles and property checks, also run by the `selftest`
//! subcommand.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::greens::{bare_green, RESIDUAL_TOL};
use crate::lattice::{
    assemble_total_hamiltonian, Geometry, Hamiltonian, PeierlsGauge, TightBindingParams,
};
use crate::matrix::CMatrix;
use crate::observables::transmission;
use crate::pipeline::Device;
use crate::selfenergy::{lead_self_energy, AndreevCoupling, LeadBroadening};
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
}

/// One measured deviation and the bound it must respect.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Measurement {
    pub label: String,
    pub value: f64,
    pub tolerance: f64,
}

impl Measurement {
    pub fn new(label: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            label: label.into(),
            value,
            tolerance,
        }
    }

    pub fn within(&self) -> bool {
        self.value.abs() <= self.tolerance
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub status: Status,
    pub measured: Vec<Measurement>,
    pub detail: String,
}

impl CheckReport {
    /// Passes iff there is at least one measurement and all are in bounds.
    pub fn new(name: impl Into<String>, measured: Vec<Measurement>, detail: impl Into<String>) -> Self {
        let ok = !measured.is_empty() && measured.iter().all(Measurement::within);
        Self {
            name: name.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            measured,
            detail: detail.into(),
        }
    }

    pub fn failed(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Self::new(name, Vec::new(), detail)
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    /// Largest deviation relative to its tolerance, for display.
    pub fn worst(&self) -> Option<&Measurement> {
        self.measured
            .iter()
            .max_by(|a, b| (a.value.abs() / a.tolerance).total_cmp(&(b.value.abs() / b.tolerance)))
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{tag}  {:<34}", self.name)?;
        if let Some(m) = self.worst() {
            write!(f, " {:>10.3e} <= {:<8.1e} ({})", m.value.abs(), m.tolerance, m.label)?;
        }
        if !self.detail.is_empty() {
            write!(f, "  {}", self.detail)?;
        }
        Ok(())
    }
}

fn report_or_fail(name: &str, r: Result<CheckReport, Error>) -> CheckReport {
    r.unwrap_or_else(|e| CheckReport::failed(name, e.to_string()))
}

/// Breit-Wigner transmission of a single level between two wide-band leads.
pub fn analytic_single_site(gamma_i: f64, gamma_ii: f64, eps0: f64, energy: f64) -> f64 {
    let half = 0.5 * (gamma_i + gamma_ii);
    gamma_i * gamma_ii / ((energy - eps0).powi(2) + half * half)
}

fn single_site(gamma_i: f64, gamma_ii: f64, eps0: f64) -> Result<(Hamiltonian, LeadBroadening), Error> {
    let h = Hamiltonian::from_matrix(CMatrix::from_diagonal(&[Complex64::new(eps0, 0.0)]), 0.0)?;
    let b = LeadBroadening::new(1, vec![0], vec![0], gamma_i, gamma_ii)?;
    Ok((h, b))
}

/// Transmission of a one-site device through the Green's function and
/// observable code paths.
pub fn single_site_transmission(
    gamma_i: f64,
    gamma_ii: f64,
    eps0: f64,
    energy: f64,
) -> Result<f64, Error> {
    let (h, b) = single_site(gamma_i, gamma_ii, eps0)?;
    let gf = bare_green(energy, &h, &lead_self_energy(&b))?;
    Ok(transmission(&gf, &b)?)
}

pub fn check_single_site(gamma_i: f64, gamma_ii: f64, eps0: f64, energies: &[f64]) -> CheckReport {
    let name = "single-site Breit-Wigner";
    let run = || -> Result<CheckReport, Error> {
        let mut worst = 0.0f64;
        for &e in energies {
            let t = single_site_transmission(gamma_i, gamma_ii, eps0, e)?;
            worst = worst.max((t - analytic_single_site(gamma_i, gamma_ii, eps0, e)).abs());
        }
        Ok(CheckReport::new(
            name,
            vec![Measurement::new("max |dT|", worst, 1e-12)],
            format!("{} energies", energies.len()),
        ))
    };
    report_or_fail(name, run())
}

/// Transmission with lead self-energies only, assembled directly from the
/// Hamiltonian and a diagonal broadening, without the self-energy module.
pub fn reference_transmission(
    params: &TightBindingParams,
    geometry: &Geometry,
    gamma_i: f64,
    gamma_ii: f64,
    energy: f64,
) -> Result<f64, Error> {
    let h = assemble_total_hamiltonian(params, geometry)?;
    let n = h.dim();
    let mut a = h.matrix().scale(Complex64::new(-1.0, 0.0));
    for i in 0..n {
        a[(i, i)] += energy;
    }
    for &i in geometry.lead_i_sites() {
        a[(i, i)] += Complex64::new(0.0, 0.5 * gamma_i);
    }
    for &i in geometry.lead_ii_sites() {
        a[(i, i)] += Complex64::new(0.0, 0.5 * gamma_ii);
    }
    let g = a.inverse()?;
    let mut t = Complex64::new(0.0, 0.0);
    for &i in geometry.lead_i_sites() {
        for &j in geometry.lead_ii_sites() {
            t += g[(i, j)] * g[(i, j)].conj();
        }
    }
    Ok(gamma_i * gamma_ii * t.re)
}

/// Distributed versus single-bond Peierls phase on a ring-only device.
pub fn check_gauge_invariance(device: &Device, energy: f64, flux: f64) -> CheckReport {
    let name = format!("gauge invariance (t_ar = {})", device.coupling().t_ar);
    let run = || -> Result<CheckReport, Error> {
        if device.geometry().has_spacer() {
            return Ok(CheckReport::failed(&name, "needs a ring-only geometry"));
        }
        let spread = device.clone().with_gauge(PeierlsGauge::Distributed);
        let bond = device.clone().with_gauge(PeierlsGauge::SingleBond);
        let dt = spread.transmission(energy, flux)? - bond.transmission(energy, flux)?;
        Ok(CheckReport::new(
            &name,
            vec![Measurement::new("|dT|", dt, 1e-10)],
            format!("E = {energy}, flux = {flux:.6}"),
        ))
    };
    report_or_fail(&name, run())
}

/// `T(flux) = T(-flux)` and `T(flux) = T(flux + 2 pi)`.
pub fn check_flux_symmetry(device: &Device, energy: f64, flux: f64) -> CheckReport {
    let name = format!(
        "flux symmetry (mx = {}, t_ar = {})",
        device.geometry().mx(),
        device.coupling().t_ar
    );
    let run = || -> Result<CheckReport, Error> {
        let t = device.transmission(energy, flux)?;
        let t_neg = device.transmission(energy, -flux)?;
        let t_wrap = device.transmission(energy, flux + 2.0 * PI)?;
        Ok(CheckReport::new(
            &name,
            vec![
                Measurement::new("|T(f) - T(-f)|", t - t_neg, 1e-9),
                Measurement::new("|T(f) - T(f + 2pi)|", t - t_wrap, 1e-9),
            ],
            format!("E = {energy}, flux = {flux:.6}"),
        ))
    };
    report_or_fail(&name, run())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub evaluations: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum QuadratureError {
    #[error("no convergence on [{a}, {b}] after {depth} bisections")]
    NoConvergence { a: f64, b: f64, depth: usize },
    #[error("integrand is not finite at E = {0}")]
    NonFinite(f64),
    #[error(transparent)]
    Eval(#[from] Error),
}

const MAX_DEPTH: usize = 40;

struct Simpson<'a> {
    f: &'a dyn Fn(f64) -> Result<f64, Error>,
    evals: usize,
}

impl Simpson<'_> {
    fn eval(&mut self, x: f64) -> Result<f64, QuadratureError> {
        self.evals += 1;
        let y = (self.f)(x)?;
        if !y.is_finite() {
            return Err(QuadratureError::NonFinite(x));
        }
        Ok(y)
    }

    #[allow(clippy::too_many_arguments)]
    fn refine(
        &mut self,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> Result<f64, QuadratureError> {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (self.eval(lm)?, self.eval(rm)?);
        let h6 = (b - a) / 12.0;
        let left = h6 * (fa + 4.0 * flm + fm);
        let right = h6 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        if depth == 0 {
            return Err(QuadratureError::NoConvergence { a, b, depth: MAX_DEPTH });
        }
        Ok(self.refine(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
            + self.refine(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
    }
}

/// Adaptive Simpson integration over consecutive panels. The absolute
/// tolerance is shared between panels in proportion to their width.
pub fn integrate(
    f: &dyn Fn(f64) -> Result<f64, Error>,
    breaks: &[f64],
    tol: f64,
) -> Result<Quadrature, QuadratureError> {
    let mut s = Simpson { f, evals: 0 };
    let span = breaks.last().unwrap_or(&0.0) - breaks.first().unwrap_or(&0.0);
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let m = 0.5 * (a + b);
        let (fa, fm, fb) = (s.eval(a)?, s.eval(m)?, s.eval(b)?);
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        total += s.refine(a, b, fa, fm, fb, whole, tol * (b - a) / span, MAX_DEPTH)?;
    }
    Ok(Quadrature {
        value: total,
        evaluations: s.evals,
    })
}

/// Panel edges on `[-bound, bound]`: fine inside the band, coarse outside.
pub fn sum_rule_breaks(bound: f64) -> Vec<f64> {
    let inner = bound.min(3.0);
    let mut v = Vec::new();
    let mut x = -bound;
    while x < -inner {
        v.push(x);
        x += 3.0;
    }
    let n_inner = (2.0 * inner / 0.1).round() as usize;
    for k in 0..n_inner {
        v.push(-inner + 2.0 * inner * k as f64 / n_inner as f64);
    }
    let mut tail: Vec<f64> = v.iter().filter(|&&x| x < -inner).map(|x| -x).collect();
    tail.reverse();
    v.push(inner);
    v.extend(tail);
    v
}

const SUM_RULE_TOL: f64 = 0.02;
const QUAD_TOL: f64 = 1e-6;

fn sum_rule_report(name: &str, density: &dyn Fn(f64) -> Result<f64, Error>, bound: f64) -> CheckReport {
    match integrate(density, &sum_rule_breaks(bound), QUAD_TOL) {
        Ok(q) => CheckReport::new(
            name,
            vec![Measurement::new("|integral - 1|", q.value - 1.0, SUM_RULE_TOL)],
            format!("integral {:.6} over |E| <= {bound}, {} evaluations", q.value, q.evaluations),
        ),
        Err(e) => CheckReport::failed(name, format!("quadrature failed: {e}")),
    }
}

/// Integral of the LDOS at `site` over `[-bound, bound]`. The self-energy
/// must be energy independent, so the device needs `t_ar = 0`.
pub fn check_sum_rule(device: &Device, site: usize, flux: f64, bound: f64) -> CheckReport {
    let name = format!("sum rule (site {site})");
    if device.coupling().t_ar != 0.0 {
        return CheckReport::failed(name, "needs t_ar = 0");
    }
    if site >= device.dim() {
        return CheckReport::failed(name, format!("site outside {} sites", device.dim()));
    }
    let rho = |e: f64| -> Result<f64, Error> {
        Ok(-device.bare_diagonal_element(e, flux, site)?.im / PI)
    };
    sum_rule_report(&name, &rho, bound)
}

/// Same integral for a single level with total broadening `gamma`.
pub fn check_single_site_sum_rule(gamma: f64, bound: f64) -> CheckReport {
    let name = format!("sum rule (single site, gamma = {gamma})");
    let setup = single_site(0.5 * gamma, 0.5 * gamma, 0.0);
    let (h, b) = match setup {
        Ok(x) => x,
        Err(e) => return CheckReport::failed(name, e.to_string()),
    };
    let sigma = lead_self_energy(&b);
    let rho = |e: f64| -> Result<f64, Error> {
        let gf = bare_green(e, &h, &sigma)?;
        Ok(gf.spectral[(0, 0)].re)
    };
    sum_rule_report(&name, &rho, bound)
}

/// Residual, adjoint relation, and LDOS positivity of one full solve.
pub fn check_solver_properties(device: &Device, energy: f64, flux: f64) -> CheckReport {
    let name = "solver properties";
    let run = || -> Result<CheckReport, Error> {
        let sol = device.solve(energy, flux)?;
        let mut m = Vec::new();
        for (stage, g) in [("bare", &sol.bare), ("full", &sol.full)] {
            m.push(Measurement::new(format!("{stage} residual"), g.residual, RESIDUAL_TOL));
            let adj = g.g_advanced.max_abs_diff(&g.g_retarded.adjoint())?;
            m.push(Measurement::new(format!("{stage} |G^A - G^R+|"), adj, 1e-13));
            let min_ldos = g
                .spectral
                .diagonal()
                .iter()
                .map(|z| z.re)
                .fold(f64::INFINITY, f64::min);
            m.push(Measurement::new(
                format!("{stage} negative LDOS"),
                (-min_ldos).max(0.0),
                1e-10,
            ));
        }
        Ok(CheckReport::new(name, m, format!("E = {energy}")))
    };
    report_or_fail(name, run())
}

/// At `t_ar = 0` the full pipeline must equal the lead-only reference.
pub fn check_zero_coupling(device: &Device, energies: &[f64], flux: f64) -> CheckReport {
    let name = "zero-coupling reduction";
    let run = || -> Result<CheckReport, Error> {
        let d = device
            .clone()
            .with_coupling(device.coupling().with_t_ar(0.0));
        let params = d.params().with_flux(flux);
        let (gi, gii) = (d.broadening().gamma_i(), d.broadening().gamma_ii());
        let mut worst = 0.0f64;
        for &e in energies {
            let t = d.transmission(e, flux)?;
            let t_ref = reference_transmission(&params, d.geometry(), gi, gii, e)?;
            worst = worst.max((t - t_ref).abs());
        }
        Ok(CheckReport::new(
            name,
            vec![Measurement::new("max |T - T_ref|", worst, 1e-12)],
            format!("{} energies", energies.len()),
        ))
    };
    report_or_fail(name, run())
}

/// Every check at the standard parameters, in declaration order.
pub fn selftest() -> Vec<CheckReport> {
    type Check = Box<dyn Fn() -> CheckReport + Send + Sync>;
    let preset = |t_ar: f64| Device::preset(t_ar).expect("preset device");
    let spacer = |mx: usize| {
        let g = Geometry::standard(100, mx, 10).expect("spacer geometry");
        Device::new(g, TightBindingParams::default(), 0.2, 0.2, AndreevCoupling::default())
            .expect("spacer device")
    };
    let checks: Vec<Check> = vec![
        Box::new(|| {
            let es: Vec<f64> = (0..50).map(|k| -1.0 + 2.0 * k as f64 / 49.0).collect();
            check_single_site(0.2, 0.2, 0.0, &es)
        }),
        Box::new(move || check_gauge_invariance(&preset(0.0), 0.0, PI)),
        Box::new(move || check_gauge_invariance(&preset(0.2), 0.0, PI)),
        Box::new(move || check_flux_symmetry(&preset(0.2), 0.0, PI / 3.0)),
        Box::new(move || check_flux_symmetry(&spacer(3), 0.0, PI / 3.0)),
        Box::new(|| check_single_site_sum_rule(0.4, 60.0)),
        Box::new(move || check_sum_rule(&preset(0.0), 0, PI, 60.0)),
        Box::new(move || check_sum_rule(&preset(0.0), 55, PI, 60.0)),
        Box::new(move || check_solver_properties(&preset(0.2), 0.0, PI)),
        Box::new(move || {
            let es: Vec<f64> = (0..21).map(|k| -3.0 + 0.3 * k as f64).collect();
            check_zero_coupling(&preset(0.2), &es, PI)
        }),
    ];
    checks.par_iter().map(|c| c()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn breit_wigner_examples() {
        assert_eq!(analytic_single_site(0.2, 0.2, 0.0, 0.0), 1.0);
        assert_relative_eq!(analytic_single_site(0.2, 0.2, 0.0, 0.2), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn report_status_follows_measurements() {
        let ok = CheckReport::new("a", vec![Measurement::new("x", -1e-11, 1e-10)], "");
        assert!(ok.passed());
        let bad = CheckReport::new(
            "b",
            vec![Measurement::new("x", 0.0, 1.0), Measurement::new("y", 2.0, 1.0)],
            "",
        );
        assert!(!bad.passed());
        assert!(!CheckReport::new("c", vec![Measurement::new("x", f64::NAN, 1.0)], "").passed());
        assert!(!CheckReport::failed("d", "why").passed());
    }

    #[test]
    fn simpson_is_exact_on_cubics() {
        let f = |x: f64| -> Result<f64, Error> { Ok(x * x * x - 2.0 * x + 1.0) };
        let q = integrate(&f, &[0.0, 1.0, 2.0], 1e-12).unwrap();
        assert_relative_eq!(q.value, 4.0 - 4.0 + 2.0, epsilon = 1e-13);
    }

    #[test]
    fn lorentzian_tail_matches_arctan() {
        // Integral of gamma / (2 pi) / (E^2 + gamma^2 / 4) over [-L, L]
        let gamma: f64 = 0.4;
        let exact = 2.0 / PI * (2.0 * 60.0 / gamma).atan();
        let r = check_single_site_sum_rule(gamma, 60.0);
        assert!(r.passed(), "{r}");
        let got = 1.0 + r.measured[0].value;
        assert!((got - exact).abs() < 1e-5, "{got} vs {exact}");
    }

    #[test]
    fn breaks_are_sorted_and_symmetric() {
        let b = sum_rule_breaks(60.0);
        assert!(b.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(b[0], -60.0);
        assert_eq!(*b.last().unwrap(), 60.0);
        for (x, y) in b.iter().zip(b.iter().rev()) {
            assert!((x + y).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_flux_gauge_is_trivial() {
        let r = check_gauge_invariance(&Device::preset(0.2).unwrap(), 0.3, 0.0);
        assert_eq!(r.measured[0].value, 0.0);
        let r = check_flux_symmetry(&Device::preset(0.2).unwrap(), 0.3, 0.0);
        assert_eq!(r.measured[0].value, 0.0);
    }

    #[test]
    fn reports_are_reproducible() {
        let d = Device::preset(0.2).unwrap();
        assert_eq!(
            check_flux_symmetry(&d, 0.1, 1.0),
            check_flux_symmetry(&d, 0.1, 1.0)
        );
    }

    #[test]
    fn sum_rule_requires_zero_coupling() {
        let r = check_sum_rule(&Device::preset(0.2).unwrap(), 0, PI, 60.0);
        assert!(!r.passed());
        assert!(r.detail.contains("t_ar = 0"));
    }
}
