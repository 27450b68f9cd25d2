//! Line-oriented `key = value` configuration with `[section]` headers.
//!
//! ```text
//! # comments run to end of line
//! [params]
//! t_ar = 0.2
//! [sweep]
//! t_ar_values = 0:0.02:3     # start:step:stop, inclusive
//! [geometry]
//! mx_values = 1..=20
//! ```
//!
//! Values are layered: experiment preset, then the file, then `--set`
//! overrides.

use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::sweeps::{EnergyGrid, Experiment, OutputFormat, SweepConfig};
use crate::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown section [{name}]")]
    UnknownSection { line: usize, name: String },
    #[error("{origin}: unknown key '{key}'")]
    UnknownKey { origin: String, key: String },
    #[error("{origin}: key '{key}' belongs in [{expected}], not [{found}]")]
    WrongSection {
        origin: String,
        key: String,
        expected: &'static str,
        found: String,
    },
    #[error("{origin}: bad value for '{key}': {message}")]
    BadValue {
        origin: String,
        key: String,
        message: String,
    },
    #[error("experiment '{file}' in the configuration conflicts with '{requested}'")]
    ExperimentConflict { file: String, requested: String },
}

/// One `key = value` line, or one `--set` override.
#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    /// `line N` or `--set`, for messages.
    pub origin: String,
    pub section: Option<String>,
    pub key: String,
    pub value: String,
}

const SECTIONS: [&str; 4] = ["geometry", "params", "sweep", "output"];

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Splits a configuration text into entries without interpreting values.
pub fn parse_document(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut section: Option<String> = None;
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let s = strip_comment(raw).trim();
        if s.is_empty() {
            continue;
        }
        if let Some(rest) = s.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("unterminated section header '{s}'"),
            })?;
            let name = name.trim();
            if !SECTIONS.contains(&name) {
                return Err(ConfigError::UnknownSection {
                    line,
                    name: name.to_string(),
                });
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = s.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            message: format!("expected 'key = value', got '{s}'"),
        })?;
        let key = key.trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(ConfigError::Syntax {
                line,
                message: format!("invalid key '{key}'"),
            });
        }
        out.push(Entry {
            origin: format!("line {line}"),
            section: section.clone(),
            key: key.to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(out)
}

/// Parses a `--set key=value` override. The key may be qualified as
/// `section.key`.
pub fn parse_override(s: &str) -> Result<Entry, ConfigError> {
    let bad = |message: String| ConfigError::BadValue {
        origin: "--set".into(),
        key: s.to_string(),
        message,
    };
    let (key, value) = s
        .split_once('=')
        .ok_or_else(|| bad("expected key=value".into()))?;
    let key = key.trim();
    let (section, key) = match key.split_once('.') {
        Some((sec, k)) => {
            if !SECTIONS.contains(&sec) {
                return Err(bad(format!("unknown section '{sec}'")));
            }
            (Some(sec.to_string()), k)
        }
        None => (None, key),
    };
    Ok(Entry {
        origin: "--set".into(),
        section,
        key: key.to_string(),
        value: value.trim().to_string(),
    })
}

fn parse_scalar<T: FromStr>(s: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    s.parse::<T>().map_err(|e| format!("'{s}': {e}"))
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = match s.trim() {
        "pi" => std::f64::consts::PI,
        "-pi" => -std::f64::consts::PI,
        "2pi" => 2.0 * std::f64::consts::PI,
        t => parse_scalar(t)?,
    };
    if !v.is_finite() {
        return Err(format!("'{s}' is not finite"));
    }
    Ok(v)
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("'{s}' is not a boolean")),
    }
}

/// Comma-separated reals; an item `a:step:b` expands to `a + k step` up to
/// and including `b`.
pub fn parse_f64_list(s: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|i| !i.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [x] => out.push(parse_f64(x)?),
            [a, step, b] => {
                let (a, step, b) = (parse_f64(a)?, parse_f64(step)?, parse_f64(b)?);
                if !(step > 0.0) || b < a {
                    return Err(format!("range '{item}' needs step > 0 and start <= stop"));
                }
                let n = ((b - a) / step + 1e-9).floor() as usize;
                out.extend((0..=n).map(|k| a + k as f64 * step));
            }
            _ => return Err(format!("cannot read '{item}' as a number or start:step:stop")),
        }
    }
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(out)
}

/// Comma-separated indices; items `a..b` and `a..=b` expand as in Rust.
pub fn parse_usize_list(s: &str) -> Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|i| !i.is_empty()) {
        if let Some((a, b)) = item.split_once("..=") {
            let (a, b): (usize, usize) = (parse_scalar(a.trim())?, parse_scalar(b.trim())?);
            out.extend(a..=b);
        } else if let Some((a, b)) = item.split_once("..") {
            let (a, b): (usize, usize) = (parse_scalar(a.trim())?, parse_scalar(b.trim())?);
            out.extend(a..b);
        } else {
            out.push(parse_scalar(item)?);
        }
    }
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(out)
}

/// Section each key belongs to.
fn home(key: &str) -> Option<&'static str> {
    Some(match key {
        "n_ring" | "lead_i_sites" | "lead_ii_sites" | "sc_sites" | "ring_contact_sites"
        | "mx" | "my" | "mx_values" | "my_values" => "geometry",
        "eps_ring" | "t_ring" | "eps_spacer" | "t_x" | "t_y" | "t_x_prime" | "flux" | "flux_a"
        | "flux_b" | "gamma" | "gamma_i" | "gamma_ii" | "t_ar" | "delta_abs" | "g" => "params",
        "experiment" | "energy" | "e_min" | "e_max" | "n_points" | "t_ar_values" | "workers"
        | "fit_mx_min" | "fit_mx_max" => "sweep",
        "format" | "out_dir" | "ldos" | "plot" | "strict" => "output",
        _ => return None,
    })
}

/// Every recognised key, for help text.
pub const KEYS: &[&str] = &[
    "n_ring", "lead_i_sites", "lead_ii_sites", "sc_sites", "ring_contact_sites", "mx", "my",
    "mx_values", "my_values", "eps_ring", "t_ring", "eps_spacer", "t_x", "t_y", "t_x_prime",
    "flux", "flux_a", "flux_b", "gamma", "gamma_i", "gamma_ii", "t_ar", "delta_abs", "g",
    "experiment", "energy", "e_min", "e_max", "n_points", "t_ar_values", "workers",
    "fit_mx_min", "fit_mx_max", "format", "out_dir", "ldos", "plot", "strict",
];

/// Applies one entry on top of `config`.
pub fn apply_entry(config: &mut SweepConfig, entry: &Entry) -> Result<(), ConfigError> {
    let key = entry.key.as_str();
    let Some(expected) = home(key) else {
        return Err(ConfigError::UnknownKey {
            origin: entry.origin.clone(),
            key: key.to_string(),
        });
    };
    if let Some(found) = &entry.section {
        if found != expected {
            return Err(ConfigError::WrongSection {
                origin: entry.origin.clone(),
                key: key.to_string(),
                expected,
                found: found.clone(),
            });
        }
    }
    let v = entry.value.as_str();
    let c = config;
    let r: Result<(), String> = (|| {
        match key {
            "n_ring" => c.geometry.n_ring = parse_scalar(v)?,
            "lead_i_sites" => c.geometry.lead_i_sites = Some(parse_usize_list(v)?),
            "lead_ii_sites" => c.geometry.lead_ii_sites = Some(parse_usize_list(v)?),
            "sc_sites" => c.geometry.sc_sites = Some(parse_usize_list(v)?),
            "ring_contact_sites" => c.geometry.ring_contact_sites = Some(parse_usize_list(v)?),
            "mx" => c.mx_values = vec![parse_scalar(v)?],
            "my" => c.my_values = vec![parse_scalar(v)?],
            "mx_values" => c.mx_values = parse_usize_list(v)?,
            "my_values" => c.my_values = parse_usize_list(v)?,
            "eps_ring" => c.params.eps_ring = parse_f64(v)?,
            "t_ring" => c.params.t_ring = parse_f64(v)?,
            "eps_spacer" => c.params.eps_spacer = parse_f64(v)?,
            "t_x" => c.params.t_x = parse_f64(v)?,
            "t_y" => c.params.t_y = parse_f64(v)?,
            "t_x_prime" => c.params.t_x_prime = parse_f64(v)?,
            "flux" | "flux_a" => {
                c.flux_a = parse_f64(v)?;
                c.params.flux = c.flux_a;
            }
            "flux_b" => c.flux_b = parse_f64(v)?,
            "gamma" => {
                c.gamma_i = parse_f64(v)?;
                c.gamma_ii = c.gamma_i;
            }
            "gamma_i" => c.gamma_i = parse_f64(v)?,
            "gamma_ii" => c.gamma_ii = parse_f64(v)?,
            "t_ar" => c.t_ar_values = vec![parse_f64(v)?],
            "t_ar_values" => c.t_ar_values = parse_f64_list(v)?,
            "delta_abs" => c.delta_abs = parse_f64(v)?,
            "g" => c.g = parse_f64(v)?,
            "experiment" => c.experiment = v.parse()?,
            "energy" => c.energy = EnergyGrid::single(parse_f64(v)?),
            "e_min" => c.energy.e_min = parse_f64(v)?,
            "e_max" => c.energy.e_max = parse_f64(v)?,
            "n_points" => c.energy.n_points = parse_scalar(v)?,
            "workers" => c.workers = parse_scalar(v)?,
            "fit_mx_min" => c.fit_mx_min = parse_scalar(v)?,
            "fit_mx_max" => c.fit_mx_max = parse_scalar(v)?,
            "format" => c.output.format = v.parse::<OutputFormat>()?,
            "out_dir" => c.output.out_dir = PathBuf::from(v),
            "ldos" => c.output.ldos = parse_bool(v)?,
            "plot" => c.output.plot = parse_bool(v)?,
            "strict" => c.output.strict = parse_bool(v)?,
            _ => unreachable!("key table and match arms disagree on '{key}'"),
        }
        Ok(())
    })();
    r.map_err(|message| ConfigError::BadValue {
        origin: entry.origin.clone(),
        key: key.to_string(),
        message,
    })
}

fn experiment_in(entries: &[Entry]) -> Result<Option<Experiment>, ConfigError> {
    let mut found = None;
    for e in entries.iter().filter(|e| e.key == "experiment") {
        found = Some(e.value.parse().map_err(|message| ConfigError::BadValue {
            origin: e.origin.clone(),
            key: e.key.clone(),
            message,
        })?);
    }
    Ok(found)
}

/// Resolves a configuration from three layers.
///
/// The experiment is `requested` if given, otherwise the one named in the
/// file, otherwise the energy triptych; its preset is the base layer. A file
/// that names a different experiment than `requested` is rejected.
pub fn resolve(
    requested: Option<Experiment>,
    text: &str,
    overrides: &[String],
) -> Result<SweepConfig, Error> {
    let file = parse_document(text)?;
    let sets = overrides
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>, _>>()?;
    let from_file = experiment_in(&file)?;
    if let (Some(r), Some(f)) = (requested, from_file) {
        if r != f {
            return Err(ConfigError::ExperimentConflict {
                file: f.to_string(),
                requested: r.to_string(),
            }
            .into());
        }
    }
    let experiment = requested
        .or(from_file)
        .unwrap_or(Experiment::EnergyTriptych);
    let mut config = SweepConfig::preset(experiment);
    for e in file.iter().chain(&sets) {
        if e.key == "experiment" {
            let asked: Experiment = e.value.parse().map_err(|message| ConfigError::BadValue {
                origin: e.origin.clone(),
                key: e.key.clone(),
                message,
            })?;
            if asked != experiment {
                return Err(ConfigError::ExperimentConflict {
                    file: asked.to_string(),
                    requested: experiment.to_string(),
                }
                .into());
            }
            continue;
        }
        apply_entry(&mut config, e)?;
    }
    config.validate()?;
    Ok(config)
}

/// Parses a configuration text on top of the presets.
pub fn parse_config(text: &str) -> Result<SweepConfig, Error> {
    resolve(None, text, &[])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn empty_file_is_the_preset() {
        let c = parse_config("").unwrap();
        assert_eq!(c, SweepConfig::preset(Experiment::EnergyTriptych));
        assert_eq!(c.geometry.resolve(0, 10).unwrap().sc_sites(), &(20..30).collect::<Vec<_>>()[..]);
        assert_eq!(c.flux_a, PI);
        assert_eq!(c.gamma_i, 0.2);
    }

    #[test]
    fn single_key_override() {
        let c = parse_config("[params]\nt_ar = 0.35\n").unwrap();
        let mut want = SweepConfig::preset(Experiment::EnergyTriptych);
        want.t_ar_values = vec![0.35];
        assert_eq!(c, want);
        // section headers are optional
        assert_eq!(parse_config("t_ar = 0.35").unwrap(), want);
    }

    #[test]
    fn small_ring_is_a_geometry_error() {
        let err = parse_config("[geometry]\nn_ring = 2\n").unwrap_err();
        assert!(matches!(err, Error::Lattice(crate::LatticeError::RingTooSmall(2))), "{err}");
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = parse_document("# header\n\n[params]\nt_ar 0.2\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::Syntax {
                line: 4,
                message: "expected 'key = value', got 't_ar 0.2'".into()
            }
        );
        assert!(matches!(
            parse_document("[nonsense]").unwrap_err(),
            ConfigError::UnknownSection { line: 1, .. }
        ));
        assert!(matches!(
            parse_document("[params").unwrap_err(),
            ConfigError::Syntax { line: 1, .. }
        ));
    }

    #[test]
    fn unknown_and_misplaced_keys() {
        let err = parse_config("[params]\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, Error::Config(ConfigError::UnknownKey { .. })));
        let err = parse_config("[output]\nt_ar = 1\n").unwrap_err();
        assert!(matches!(err, Error::Config(ConfigError::WrongSection { .. })));
    }

    #[test]
    fn bad_values_name_the_key() {
        let err = parse_config("[params]\nt_ar = abc\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2") && msg.contains("t_ar"), "{msg}");
    }

    #[test]
    fn list_syntaxes() {
        assert_eq!(parse_usize_list("1..4").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_usize_list("1..=3, 7").unwrap(), vec![1, 2, 3, 7]);
        assert_eq!(parse_f64_list("0, 0.5").unwrap(), vec![0.0, 0.5]);
        let r = parse_f64_list("0:0.02:3").unwrap();
        assert_eq!(r.len(), 151);
        assert_eq!(r[15], 15.0 * 0.02);
        assert!(parse_f64_list("1:0:2").is_err());
        assert!(parse_usize_list("").is_err());
    }

    #[test]
    fn three_layer_precedence() {
        let file = "[params]\nt_ar = 0.5\ngamma = 0.3\n";
        let sets = vec!["t_ar=0.7".to_string()];
        let c = resolve(Some(Experiment::SinglePoint), file, &sets).unwrap();
        assert_eq!(c.t_ar_values, vec![0.7]);
        assert_eq!(c.gamma_i, 0.3);
        assert_eq!(c.delta_abs, 1.0);
        assert_eq!(c.energy, EnergyGrid::single(0.0));
    }

    #[test]
    fn qualified_override() {
        let c = resolve(None, "", &["output.ldos=true".to_string()]).unwrap();
        assert!(c.output.ldos);
        assert!(resolve(None, "", &["params.ldos=true".to_string()]).is_err());
        assert!(resolve(None, "", &["ldos".to_string()]).is_err());
    }

    #[test]
    fn experiment_conflicts_rejected() {
        let text = "[sweep]\nexperiment = contrast_vs_tar\n";
        let c = parse_config(text).unwrap();
        assert_eq!(c.experiment, Experiment::ContrastVsTar);
        assert_eq!(c.t_ar_values.len(), 151);
        assert!(resolve(Some(Experiment::EnergyTriptych), text, &[]).is_err());
    }

    #[test]
    fn key_table_is_complete() {
        for k in KEYS {
            assert!(home(k).is_some(), "{k}");
        }
    }
}
