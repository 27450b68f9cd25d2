//! Runs an experiment and writes its records, manifest and plots.

use std::path::{Path, PathBuf};

use crate::observables::ObservableRecord;
use crate::output::{write_averaged_csv, write_records, RunManifest};
use crate::plot::{render_line_plot, render_series, ColorRole, Guide, PlotSpec, Series, SeriesSpec};
use crate::sweeps::{run_dephasing_vs_mx, run_grid, DephasingSweep, Experiment, SweepConfig};
use crate::Error;

#[derive(Clone, Debug)]
pub enum RunResult {
    Records(Vec<ObservableRecord>),
    Dephasing(DephasingSweep),
}

impl RunResult {
    pub fn records(&self) -> &[ObservableRecord] {
        match self {
            RunResult::Records(r) => r,
            RunResult::Dephasing(d) => &d.records,
        }
    }
}

pub fn run(config: &SweepConfig) -> Result<RunResult, Error> {
    match config.experiment {
        Experiment::DephasingVsMx => Ok(RunResult::Dephasing(run_dephasing_vs_mx(config)?)),
        _ => Ok(RunResult::Records(run_grid(config)?)),
    }
}

fn ldos_plot(config: &SweepConfig) -> Result<Option<PlotSpec>, Error> {
    let (mx, my) = (config.mx_values[0], config.my_values[0]);
    let g = config.geometry.resolve(mx, my)?;
    let Some(&contact) = g.sc_sites().first() else {
        return Ok(None);
    };
    // a ring site halfway along the arm that carries neither lead nor contact
    let n = g.n_ring();
    let arm = (g.lead_i_sites().iter().max().copied().unwrap_or(0) + n) / 2;
    let mut spec = PlotSpec::new("Local density of states (coupled)", "E", "LDOS");
    spec.log_y = true;
    spec.series = vec![
        SeriesSpec::new("energy", &format!("site_{contact}"), &format!("contact site {contact}"), ColorRole::Coupled),
        SeriesSpec::new("energy", &format!("site_{arm}"), &format!("arm site {arm}"), ColorRole::Indexed(0)),
    ];
    Ok(Some(spec))
}

/// Plot files for an experiment, keyed by file name.
pub fn plot_specs(config: &SweepConfig) -> Result<Vec<(String, PlotSpec)>, Error> {
    let pair = |x: &str, a: &str, b: &str, title: &str, xl: &str, yl: &str| {
        let mut s = PlotSpec::new(title, xl, yl);
        s.series = vec![
            SeriesSpec::new(x, a, "without superconductor", ColorRole::Bare),
            SeriesSpec::new(x, b, "with superconductor", ColorRole::Coupled),
        ];
        s
    };
    let mut out = Vec::new();
    match config.experiment {
        Experiment::EnergyTriptych => {
            out.push(("transmission.svg".into(), pair("energy", "T_bare_a", "T_full_a", "Transmission at flux_a", "E", "T")));
            out.push(("contrast.svg".into(), pair("energy", "C_bare", "C_full", "Contrast", "E", "C")));
            if let Some(s) = ldos_plot(config)? {
                out.push(("ldos.svg".into(), s));
            }
        }
        Experiment::ContrastVsTar => {
            out.push(("contrast.svg".into(), pair("t_ar", "C_bare", "C_full", "Contrast", "t_AR", "C")));
            out.push(("transmission.svg".into(), pair("t_ar", "T_bare_a", "T_full_a", "Transmission at flux_a", "t_AR", "T")));
        }
        Experiment::DephasingVsMx => {
            let mut s = PlotSpec::new("Dephasing rate", "Mx", "rate");
            s.log_x = true;
            s.log_y = true;
            s.series = config
                .my_values
                .iter()
                .enumerate()
                .map(|(k, &my)| {
                    SeriesSpec::new("mx", "rate", &format!("My = {my}"), ColorRole::Indexed(k))
                        .filtered("my", my as f64)
                })
                .collect();
            out.push(("dephasing.svg".into(), s));
            let mut avg = PlotSpec::new("Dephasing rate, averaged over My", "Mx", "mean rate");
            avg.log_x = true;
            avg.log_y = true;
            avg.guide = Some(Guide {
                exponent: -1.0,
                label: "1/Mx".into(),
            });
            out.push(("dephasing_average.svg".into(), avg));
        }
        Experiment::SinglePoint => {}
    }
    Ok(out)
}

/// Writes records, manifest and (if enabled) plots into `out_dir`. Returns
/// the manifest, whose `outputs` lists every file written.
pub fn write_outputs(config: &SweepConfig, result: &RunResult, out_dir: &Path) -> Result<RunManifest, Error> {
    std::fs::create_dir_all(out_dir)?;
    let records = result.records();
    let mut manifest = RunManifest::new(config, records)?;
    let mut written: Vec<PathBuf> = Vec::new();

    let fmt = config.output.format;
    let path = out_dir.join(format!("records.{}", fmt.extension()));
    write_records(records, fmt, config.output.ldos, &path)?;
    written.push(path);

    if let RunResult::Dephasing(d) = result {
        let path = out_dir.join("dephasing_average.csv");
        write_averaged_csv(&d.averaged, &path)?;
        written.push(path);
        manifest.dephasing_fit = d.fit.clone();
    }

    if config.output.plot {
        for (name, spec) in plot_specs(config)? {
            let rendered = match (result, spec.series.is_empty()) {
                (RunResult::Dephasing(d), true) => {
                    let s = Series {
                        label: "average".into(),
                        role: ColorRole::Coupled,
                        points: d.averaged.iter().map(|p| (p.mx as f64, p.mean_rate)).collect(),
                    };
                    render_series(&[s], &spec)
                }
                _ => render_line_plot(records, &spec),
            };
            match rendered {
                Ok(r) => {
                    let path = out_dir.join(&name);
                    r.write(&path)?;
                    written.push(path);
                }
                Err(e) => log::warn!("skipping {name}: {e}"),
            }
        }
    }

    manifest.outputs = written.iter().map(|p| p.display().to_string()).collect();
    let path = out_dir.join("manifest.json");
    manifest.outputs.push(path.display().to_string());
    manifest.write(&path)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triptych_has_three_plots() {
        let c = SweepConfig::preset(Experiment::EnergyTriptych);
        let names: Vec<String> = plot_specs(&c).unwrap().into_iter().map(|p| p.0).collect();
        assert_eq!(names, ["transmission.svg", "contrast.svg", "ldos.svg"]);
    }

    #[test]
    fn small_run_writes_everything() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = SweepConfig::preset(Experiment::EnergyTriptych);
        c.energy.n_points = 11;
        c.output.plot = true;
        let r = run(&c).unwrap();
        let m = write_outputs(&c, &r, dir.path()).unwrap();
        assert_eq!(m.grid.n_records, 11);
        assert_eq!(m.outputs.len(), 5);
        for f in &m.outputs {
            assert!(Path::new(f).exists(), "{f}");
        }
    }
}
