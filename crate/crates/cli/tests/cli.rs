use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_andreev-ring"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn field(stdout: &str, key: &str) -> f64 {
    let rest = &stdout[stdout.find(key).unwrap() + key.len()..];
    let rest = rest.trim_start_matches(['(', ' ']);
    let end = rest.find([',', ' ', ')', '\n']).unwrap_or(rest.len());
    rest[..end].parse().unwrap()
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["selftest"], dir.path());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 10);
}

#[test]
fn uncoupled_point_has_no_dephasing() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["point", "--set", "energy=0", "--set", "t_ar=0"], dir.path());
    assert!(o.status.success());
    let s = String::from_utf8_lossy(&o.stdout);
    assert_eq!(field(&s, "T_bare ="), field(&s, "T_full ="));
    assert_eq!(field(&s, "rate ="), 0.0);
    assert!(dir.path().join("records.csv").exists());
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn triptych_writes_three_plots() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(
        &["triptych", "--plot", "--set", "n_points=41", "--set", "t_ar=0.2", "--format", "json"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["records.json", "transmission.svg", "contrast.svg", "ldos.svg", "manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["point", "--set", "no_such_key=1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_config_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["point", "--config", "/nonexistent/run.conf"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn strict_mode_fails_on_annotated_points() {
    let dir = tempfile::tempdir().unwrap();
    // both band edges are outside the spectrum, where the contrast is undefined
    let lax = cli(&["triptych", "--set", "n_points=3"], dir.path());
    assert!(lax.status.success());
    let strict = cli(&["triptych", "--set", "n_points=3", "--strict"], dir.path());
    assert_eq!(strict.status.code(), Some(1));
}
