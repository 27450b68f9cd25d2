//! Sweep configuration and the parallel grid runner.
//!
//! Grid order is `mx`, then `my`, then `t_ar`, then energy (innermost), and
//! records come back in exactly that order whatever the worker count.

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{default_ring_contacts, default_sc_sites, Geometry, TightBindingParams};
use crate::observables::ObservableRecord;
use crate::pipeline::Device;
use crate::selfenergy::AndreevCoupling;
use crate::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SweepError {
    #[error("invalid sweep configuration: {0}")]
    Invalid(String),
    #[error("ragged grouping: mx = {mx} has my values {found:?}, expected {expected:?}")]
    Ragged {
        mx: usize,
        found: Vec<usize>,
        expected: Vec<usize>,
    },
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    EnergyTriptych,
    ContrastVsTar,
    DephasingVsMx,
    SinglePoint,
}

impl Experiment {
    pub const ALL: [Experiment; 4] = [
        Experiment::EnergyTriptych,
        Experiment::ContrastVsTar,
        Experiment::DephasingVsMx,
        Experiment::SinglePoint,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::EnergyTriptych => "energy_triptych",
            Experiment::ContrastVsTar => "contrast_vs_tar",
            Experiment::DephasingVsMx => "dephasing_vs_mx",
            Experiment::SinglePoint => "single_point",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown experiment '{s}'"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(format!("unknown format '{s}' (expected csv or json)")),
        }
    }
}

/// Uniform grid `e_min + (e_max - e_min) k / (n - 1)`; a single point sits
/// at `e_min`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyGrid {
    pub e_min: f64,
    pub e_max: f64,
    pub n_points: usize,
}

impl EnergyGrid {
    pub fn single(energy: f64) -> Self {
        Self {
            e_min: energy,
            e_max: energy,
            n_points: 1,
        }
    }

    pub fn energy(&self, k: usize) -> f64 {
        if self.n_points == 1 {
            return self.e_min;
        }
        let frac = k as f64 / (self.n_points - 1) as f64;
        self.e_min + (self.e_max - self.e_min) * frac
    }

    pub fn energies(&self) -> Vec<f64> {
        (0..self.n_points).map(|k| self.energy(k)).collect()
    }
}

/// Site layout overrides. `None` means the standard layout for the
/// `(mx, my)` being run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GeometrySpec {
    pub n_ring: usize,
    pub lead_i_sites: Option<Vec<usize>>,
    pub lead_ii_sites: Option<Vec<usize>>,
    pub sc_sites: Option<Vec<usize>>,
    pub ring_contact_sites: Option<Vec<usize>>,
}

impl GeometrySpec {
    pub fn preset() -> Self {
        Self {
            n_ring: 100,
            ..Self::default()
        }
    }

    pub fn resolve(&self, mx: usize, my: usize) -> Result<Geometry, Error> {
        let n = self.n_ring;
        let lead_ii = self
            .lead_ii_sites
            .clone()
            .unwrap_or_else(|| (0..20).collect());
        let lead_i = self
            .lead_i_sites
            .clone()
            .unwrap_or_else(|| (n / 2..n / 2 + 20).collect());
        let sc = self.sc_sites.clone().unwrap_or_else(|| {
            if mx == 0 {
                (20..20 + my).collect()
            } else {
                default_sc_sites(n, mx, my)
            }
        });
        let contacts = if mx == 0 {
            Vec::new()
        } else {
            self.ring_contact_sites
                .clone()
                .unwrap_or_else(|| default_ring_contacts(my))
        };
        Ok(Geometry::new(n, lead_i, lead_ii, sc, mx, my, contacts)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputOptions {
    pub format: OutputFormat,
    pub out_dir: PathBuf,
    pub ldos: bool,
    pub plot: bool,
    pub strict: bool,
}

impl Default for OutputOptions {
    fn default() -> Self {
        Self {
            format: OutputFormat::Csv,
            out_dir: PathBuf::from("out"),
            ldos: false,
            plot: false,
            strict: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub experiment: Experiment,
    pub energy: EnergyGrid,
    pub flux_a: f64,
    pub flux_b: f64,
    pub t_ar_values: Vec<f64>,
    pub mx_values: Vec<usize>,
    pub my_values: Vec<usize>,
    pub geometry: GeometrySpec,
    /// `params.flux` is ignored; the flux pair above is used instead.
    pub params: TightBindingParams,
    pub gamma_i: f64,
    pub gamma_ii: f64,
    pub delta_abs: f64,
    pub g: f64,
    /// Fit window for the dephasing slope, inclusive.
    pub fit_mx_min: usize,
    pub fit_mx_max: usize,
    pub workers: usize,
    pub output: OutputOptions,
}

impl SweepConfig {
    pub fn preset(experiment: Experiment) -> Self {
        let base = Self {
            experiment,
            energy: EnergyGrid {
                e_min: -3.0,
                e_max: 3.0,
                n_points: 2001,
            },
            flux_a: PI,
            flux_b: 0.0,
            t_ar_values: vec![0.2],
            mx_values: vec![0],
            my_values: vec![10],
            geometry: GeometrySpec::preset(),
            params: TightBindingParams::default(),
            gamma_i: 0.2,
            gamma_ii: 0.2,
            delta_abs: 1.0,
            g: 1.0,
            fit_mx_min: 2,
            fit_mx_max: 20,
            workers: 1,
            output: OutputOptions::default(),
        };
        match experiment {
            Experiment::EnergyTriptych => base,
            Experiment::ContrastVsTar => Self {
                energy: EnergyGrid::single(0.0),
                t_ar_values: (0..=150).map(|i| i as f64 * 0.02).collect(),
                ..base
            },
            Experiment::DephasingVsMx => Self {
                energy: EnergyGrid::single(0.0),
                mx_values: (1..=20).collect(),
                my_values: vec![6, 14, 22, 30],
                ..base
            },
            Experiment::SinglePoint => Self {
                energy: EnergyGrid::single(0.0),
                ..base
            },
        }
    }

    pub fn coupling(&self, t_ar: f64) -> AndreevCoupling {
        AndreevCoupling {
            t_ar,
            delta_abs: self.delta_abs,
            g: self.g,
        }
    }

    pub fn device(&self, mx: usize, my: usize, t_ar: f64) -> Result<Device, Error> {
        let geometry = self.geometry.resolve(mx, my)?;
        Device::new(
            geometry,
            self.params.with_flux(self.flux_a),
            self.gamma_i,
            self.gamma_ii,
            self.coupling(t_ar),
        )
    }

    pub fn grid_len(&self) -> usize {
        self.mx_values.len() * self.my_values.len() * self.t_ar_values.len() * self.energy.n_points
    }

    /// Checks the sweep invariants and that every `(mx, my, t_ar)`
    /// combination yields a valid device.
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: String| -> Result<(), Error> { Err(SweepError::Invalid(m).into()) };
        let e = &self.energy;
        if e.n_points == 0 {
            return bad("n_points must be at least 1".into());
        }
        if !e.e_min.is_finite() || !e.e_max.is_finite() {
            return bad(format!("energy bounds must be finite ({}, {})", e.e_min, e.e_max));
        }
        if e.e_min > e.e_max {
            return bad(format!("e_min = {} exceeds e_max = {}", e.e_min, e.e_max));
        }
        if !self.flux_a.is_finite() || !self.flux_b.is_finite() {
            return bad("flux values must be finite".into());
        }
        if self.t_ar_values.is_empty() || self.mx_values.is_empty() || self.my_values.is_empty() {
            return bad("t_ar, mx and my lists must be non-empty".into());
        }
        if let Some(t) = self.t_ar_values.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
            return bad(format!("t_ar values must be finite and >= 0, got {t}"));
        }
        if self.experiment == Experiment::DephasingVsMx
            && (self.mx_values.contains(&0) || self.my_values.contains(&0))
        {
            return bad("dephasing sweep needs mx, my >= 1".into());
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if self.fit_mx_min > self.fit_mx_max {
            return bad(format!(
                "fit window [{}, {}] is empty",
                self.fit_mx_min, self.fit_mx_max
            ));
        }
        for &mx in &self.mx_values {
            for &my in &self.my_values {
                self.device(mx, my, self.t_ar_values[0])?;
            }
        }
        for &t in &self.t_ar_values {
            self.coupling(t).validate()?;
        }
        Ok(())
    }
}

/// Runs the configured grid and returns one record per grid point, in grid
/// order. Solver failures annotate records; configuration problems abort.
pub fn run_grid(config: &SweepConfig) -> Result<Vec<ObservableRecord>, Error> {
    config.validate()?;
    let mut devices = Vec::new();
    for &mx in &config.mx_values {
        for &my in &config.my_values {
            for &t_ar in &config.t_ar_values {
                devices.push(config.device(mx, my, t_ar)?);
            }
        }
    }
    let n_e = config.energy.n_points;
    let jobs: Vec<(usize, f64)> = (0..devices.len())
        .flat_map(|d| (0..n_e).map(move |k| (d, k)))
        .map(|(d, k)| (d, config.energy.energy(k)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| SweepError::Pool(e.to_string()))?;
    let records = pool.install(|| {
        jobs.par_iter()
            .map(|&(d, energy)| devices[d].record(energy, config.flux_a, config.flux_b))
            .collect::<Vec<_>>()
    });
    let failed = records.iter().filter(|r| !r.is_ok()).count();
    if failed > 0 {
        log::warn!("{failed} of {} grid points carry errors", records.len());
    }
    Ok(records)
}

fn with_experiment(config: &SweepConfig, experiment: Experiment) -> SweepConfig {
    SweepConfig {
        experiment,
        ..config.clone()
    }
}

pub fn run_energy_triptych(config: &SweepConfig) -> Result<Vec<ObservableRecord>, Error> {
    run_grid(&with_experiment(config, Experiment::EnergyTriptych))
}

pub fn run_contrast_vs_tar(config: &SweepConfig) -> Result<Vec<ObservableRecord>, Error> {
    run_grid(&with_experiment(config, Experiment::ContrastVsTar))
}

pub fn run_single_point(config: &SweepConfig) -> Result<Vec<ObservableRecord>, Error> {
    run_grid(&with_experiment(config, Experiment::SinglePoint))
}

/// One point of the `my`-averaged dephasing series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragedPoint {
    pub mx: usize,
    pub mean_rate: f64,
    /// Number of `my` values that contributed.
    pub n_used: usize,
    pub n_failed: usize,
}

/// Least-squares fit of `log(rate) = intercept + slope log(mx)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub mx_min: usize,
    pub mx_max: usize,
    pub n_used: usize,
    /// Points in the window dropped because they failed or were not positive.
    pub n_excluded: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DephasingSweep {
    pub records: Vec<ObservableRecord>,
    pub averaged: Vec<AveragedPoint>,
    pub fit: Option<SlopeFit>,
}

/// Arithmetic mean of the rate over `my` for each `mx`, in order of first
/// appearance. Every `mx` must carry the same set of `my` values. Failed or
/// non-finite points are left out of the mean and counted.
pub fn my_average(records: &[ObservableRecord]) -> Result<Vec<AveragedPoint>, SweepError> {
    let mut groups: Vec<(usize, Vec<&ObservableRecord>)> = Vec::new();
    for r in records {
        match groups.iter_mut().find(|(mx, _)| *mx == r.mx) {
            Some((_, g)) => g.push(r),
            None => groups.push((r.mx, vec![r])),
        }
    }
    let my_set = |g: &[&ObservableRecord]| -> Vec<usize> {
        let mut v: Vec<usize> = g.iter().map(|r| r.my).collect();
        v.sort_unstable();
        v
    };
    let Some((_, first)) = groups.first() else {
        return Ok(Vec::new());
    };
    let expected = my_set(first);
    let mut out = Vec::with_capacity(groups.len());
    for (mx, g) in &groups {
        let found = my_set(g);
        let has_dupes = found.windows(2).any(|w| w[0] == w[1]);
        if found != expected || has_dupes {
            return Err(SweepError::Ragged {
                mx: *mx,
                found,
                expected: expected.clone(),
            });
        }
        let good: Vec<f64> = g
            .iter()
            .filter(|r| r.is_ok() && r.rate.is_finite())
            .map(|r| r.rate)
            .collect();
        let mean_rate = if good.is_empty() {
            f64::NAN
        } else {
            good.iter().sum::<f64>() / good.len() as f64
        };
        out.push(AveragedPoint {
            mx: *mx,
            mean_rate,
            n_used: good.len(),
            n_failed: g.len() - good.len(),
        });
    }
    Ok(out)
}

/// Log-log least squares over `mx` in `[mx_min, mx_max]`. Returns `None`
/// when fewer than two usable points remain.
pub fn fit_log_log_slope(
    averaged: &[AveragedPoint],
    mx_min: usize,
    mx_max: usize,
) -> Option<SlopeFit> {
    let window: Vec<&AveragedPoint> = averaged
        .iter()
        .filter(|p| (mx_min..=mx_max).contains(&p.mx))
        .collect();
    let pts: Vec<(f64, f64)> = window
        .iter()
        .filter(|p| p.mean_rate.is_finite() && p.mean_rate > 0.0 && p.mx > 0)
        .map(|p| ((p.mx as f64).ln(), p.mean_rate.ln()))
        .collect();
    let n_excluded = window.len() - pts.len();
    if n_excluded > 0 {
        log::warn!("{n_excluded} points excluded from the slope fit");
    }
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some(SlopeFit {
        slope,
        intercept: my - slope * mx,
        mx_min,
        mx_max,
        n_used: pts.len(),
        n_excluded,
    })
}

pub fn run_dephasing_vs_mx(config: &SweepConfig) -> Result<DephasingSweep, Error> {
    let records = run_grid(&with_experiment(config, Experiment::DephasingVsMx))?;
    let averaged = my_average(&records)?;
    let fit = fit_log_log_slope(&averaged, config.fit_mx_min, config.fit_mx_max);
    Ok(DephasingSweep {
        records,
        averaged,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn rec(mx: usize, my: usize, rate: f64) -> ObservableRecord {
        ObservableRecord {
            energy: 0.0,
            flux_a: PI,
            flux_b: 0.0,
            t_ar: 0.2,
            mx,
            my,
            t_bare_a: 0.0,
            t_bare_b: 0.0,
            t_full_a: 0.0,
            t_full_b: 0.0,
            c_bare: 0.0,
            c_full: 0.0,
            dephasing: Complex64::new(0.0, -rate / 2.0),
            rate,
            ldos: Vec::new(),
            error: None,
        }
    }

    #[test]
    fn average_examples() {
        let avg = my_average(&[rec(1, 6, 1.0), rec(1, 14, 3.0)]).unwrap();
        assert_eq!(avg.len(), 1);
        assert_eq!(avg[0].mean_rate, 2.0);

        let single = my_average(&[rec(1, 6, 0.7), rec(2, 6, 0.3)]).unwrap();
        assert_eq!(single[0].mean_rate, 0.7);
        assert_eq!(single[1].mean_rate, 0.3);
    }

    #[test]
    fn ragged_groups_rejected() {
        let err = my_average(&[rec(1, 6, 1.0), rec(1, 14, 1.0), rec(2, 6, 1.0)]).unwrap_err();
        assert!(matches!(err, SweepError::Ragged { mx: 2, .. }));
    }

    #[test]
    fn failed_points_are_counted_not_averaged() {
        let mut bad = rec(1, 14, f64::NAN);
        bad.error = Some("x".into());
        let avg = my_average(&[rec(1, 6, 1.0), bad]).unwrap();
        assert_eq!(avg[0].mean_rate, 1.0);
        assert_eq!((avg[0].n_used, avg[0].n_failed), (1, 1));
    }

    #[test]
    fn power_law_slope_recovered() {
        let avg: Vec<_> = (1..=20)
            .map(|mx| AveragedPoint {
                mx,
                mean_rate: 3.0 / mx as f64,
                n_used: 1,
                n_failed: 0,
            })
            .collect();
        let fit = fit_log_log_slope(&avg, 2, 20).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-12);
        assert_eq!(fit.n_used, 19);
        assert_eq!(fit.n_excluded, 0);
    }

    #[test]
    fn grid_endpoints() {
        let g = SweepConfig::preset(Experiment::EnergyTriptych).energy;
        assert_eq!(g.energy(0), -3.0);
        assert_eq!(g.energy(2000), 3.0);
        assert_eq!(g.energy(1000), 0.0);
        assert_eq!(EnergyGrid::single(0.4).energies(), vec![0.4]);
    }

    #[test]
    fn presets_are_valid() {
        for e in Experiment::ALL {
            SweepConfig::preset(e).validate().unwrap();
        }
        let c = SweepConfig::preset(Experiment::ContrastVsTar);
        assert_eq!(c.t_ar_values.len(), 151);
        assert_eq!(c.t_ar_values[150], 3.0);
        assert_eq!(SweepConfig::preset(Experiment::DephasingVsMx).grid_len(), 80);
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = SweepConfig::preset(Experiment::SinglePoint);
        c.t_ar_values = vec![-0.1];
        assert!(c.validate().is_err());
        let mut c = SweepConfig::preset(Experiment::SinglePoint);
        c.energy = EnergyGrid {
            e_min: 1.0,
            e_max: 0.0,
            n_points: 3,
        };
        assert!(c.validate().is_err());
        let mut c = SweepConfig::preset(Experiment::SinglePoint);
        c.geometry.n_ring = 2;
        assert!(matches!(c.validate(), Err(Error::Lattice(_))));
    }

    #[test]
    fn single_mx_gives_single_average() {
        let mut c = SweepConfig::preset(Experiment::DephasingVsMx);
        c.mx_values = vec![3];
        c.my_values = vec![6, 14];
        let sweep = run_dephasing_vs_mx(&c).unwrap();
        assert_eq!(sweep.records.len(), 2);
        assert_eq!(sweep.averaged.len(), 1);
        assert!(sweep.fit.is_none());
    }
}
