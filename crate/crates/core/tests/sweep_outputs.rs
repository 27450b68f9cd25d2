use std::f64::consts::PI;
use std::fs;

use andreev_ring::config::resolve;
use andreev_ring::observables::contrast;
use andreev_ring::output::{read_csv, write_json, write_records};
use andreev_ring::report::{run, write_outputs};
use andreev_ring::sweeps::{
    my_average, run_contrast_vs_tar, run_dephasing_vs_mx, run_grid, EnergyGrid, Experiment,
    OutputFormat, SweepConfig,
};
use andreev_ring::verify::reference_transmission;

fn short_triptych(n: usize) -> SweepConfig {
    let mut c = SweepConfig::preset(Experiment::EnergyTriptych);
    c.energy.n_points = n;
    c
}

#[test]
fn every_grid_point_yields_one_record_in_order() {
    let mut c = short_triptych(7);
    c.t_ar_values = vec![0.0, 0.3];
    c.mx_values = vec![1, 2];
    c.my_values = vec![6];
    let rs = run_grid(&c).unwrap();
    assert_eq!(rs.len(), c.grid_len());
    assert_eq!(rs.len(), 28);
    let mut k = 0;
    for &mx in &c.mx_values {
        for &t in &c.t_ar_values {
            for e in c.energy.energies() {
                assert_eq!((rs[k].mx, rs[k].t_ar, rs[k].energy), (mx, t, e));
                k += 1;
            }
        }
    }
}

#[test]
fn worker_count_does_not_change_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for workers in [1, 3, 8] {
        let mut c = short_triptych(61);
        c.workers = workers;
        c.output.plot = true;
        c.output.ldos = true;
        let out = dir.path().join(format!("w{workers}"));
        write_outputs(&c, &run(&c).unwrap(), &out).unwrap();
        let files: Vec<Vec<u8>> = ["records.csv", "transmission.svg", "contrast.svg", "ldos.svg"]
            .iter()
            .map(|f| fs::read(out.join(f)).unwrap())
            .collect();
        outputs.push(files);
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn zero_coupling_reproduces_reference() {
    let mut c = short_triptych(41);
    c.t_ar_values = vec![0.0];
    let rs = run_grid(&c).unwrap();
    let g = c.geometry.resolve(0, 10).unwrap();
    for r in &rs {
        let t_ref = reference_transmission(&c.params.with_flux(PI), &g, 0.2, 0.2, r.energy).unwrap();
        assert!((r.t_full_a - t_ref).abs() <= 1e-12);
        assert_eq!(r.t_full_a, r.t_bare_a);
        assert_eq!(r.t_full_b, r.t_bare_b);
    }
}

#[test]
fn csv_round_trip_recomputes_contrast() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let mut c = short_triptych(101);
    c.energy = EnergyGrid {
        e_min: -1.9,
        e_max: 1.9,
        n_points: 101,
    };
    let rs = run_grid(&c).unwrap();
    write_records(&rs, OutputFormat::Csv, false, &path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 102);
    let t = read_csv(text.as_bytes()).unwrap();
    let (ta, tb, cf) = (
        t.column("T_full_a").unwrap(),
        t.column("T_full_b").unwrap(),
        t.column("C_full").unwrap(),
    );
    for i in 0..ta.len() {
        assert!((contrast(ta[i], tb[i]).unwrap() - cf[i]).abs() <= 1e-15);
        assert_eq!(ta[i].to_bits(), rs[i].t_full_a.to_bits());
    }
}

#[test]
fn json_has_the_same_values() {
    let rs = run_grid(&short_triptych(9)).unwrap();
    let mut buf = Vec::new();
    write_json(&rs, false, &mut buf).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
    let arr = v.as_array().unwrap();
    assert_eq!(arr.len(), 9);
    for (o, r) in arr.iter().zip(&rs) {
        assert_eq!(o["energy"].as_f64(), Some(r.energy));
        assert_eq!(o["T_bare_b"].as_f64(), Some(r.t_bare_b));
        assert_eq!(o["rate"].as_f64(), Some(r.rate));
        assert_eq!(o["mx"].as_u64(), Some(r.mx as u64));
    }
}

#[test]
fn averaged_dephasing_matches_hand_mean() {
    let mut c = SweepConfig::preset(Experiment::DephasingVsMx);
    c.mx_values = vec![4, 5];
    let sweep = run_dephasing_vs_mx(&c).unwrap();
    let at5: Vec<f64> = sweep
        .records
        .iter()
        .filter(|r| r.mx == 5 && r.is_ok())
        .map(|r| r.rate)
        .collect();
    let mut sum = 0.0;
    for x in &at5 {
        sum += x;
    }
    let hand = sum / at5.len() as f64;
    let p = sweep.averaged.iter().find(|p| p.mx == 5).unwrap();
    assert!((p.mean_rate - hand).abs() <= 1e-14);
    assert_eq!(p.n_used + p.n_failed, 4);
    assert_eq!(my_average(&sweep.records).unwrap(), sweep.averaged);
}

#[test]
fn contrast_sweep_gives_one_record_per_coupling() {
    let mut c = SweepConfig::preset(Experiment::ContrastVsTar);
    c.t_ar_values = vec![0.0, 0.1, 0.2];
    let rs = run_contrast_vs_tar(&c).unwrap();
    assert_eq!(rs.len(), 3);
    assert!(rs[0].c_full > rs[1].c_full && rs[1].c_full > rs[2].c_full);
}

#[test]
fn three_layer_precedence_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.conf");
    fs::write(
        &file,
        "# layered\n[params]\nt_ar = 0.4\ndelta_abs = 2.0\n[sweep]\nn_points = 5\n",
    )
    .unwrap();
    let text = fs::read_to_string(&file).unwrap();
    let c = resolve(
        Some(Experiment::EnergyTriptych),
        &text,
        &["t_ar=0.1".into(), "e_max=1.5".into()],
    )
    .unwrap();
    assert_eq!(c.t_ar_values, vec![0.1]); // --set beats file
    assert_eq!(c.delta_abs, 2.0); // file beats preset
    assert_eq!(c.energy.n_points, 5);
    assert_eq!(c.energy.e_max, 1.5);
    assert_eq!(c.energy.e_min, -3.0); // preset survives
    assert_eq!(c.g, 1.0);
}

#[test]
fn manifest_echoes_resolved_values() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = short_triptych(3);
    c.energy.e_min = -1.0;
    c.energy.e_max = 1.0;
    let m = write_outputs(&c, &run(&c).unwrap(), dir.path()).unwrap();
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(v["config"]["gamma_i"], 0.2);
    assert_eq!(v["config"]["params"]["t_ring"], -1.0);
    assert_eq!(v["config"]["energy"]["n_points"], 3);
    assert_eq!(v["geometries"][0]["sc_sites"].as_array().unwrap().len(), 10);
    assert_eq!(v["grid"]["n_records"], 3);
    assert_eq!(v["error_count"], 0);
    assert_eq!(m.outputs.len(), 2);
}
