use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_translators"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited")
}

fn report(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn write_field(path: &Path, n: usize, f: impl Fn(f64, f64) -> f64) {
    let mut s = String::from("x,y,u\n");
    for j in 0..n {
        for i in 0..n {
            let x = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
            let y = -1.0 + 2.0 * j as f64 / (n - 1) as f64;
            s.push_str(&format!("{x},{y},{}\n", f(x, y)));
        }
    }
    fs::write(path, s).unwrap();
}

#[test]
fn exact_grim_reaper_has_n_squared_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["exact", "--surface", "grim-reaper", "--n", "64", "--out", "gr.csv"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv_rows(&dir.path().join("gr.csv"));
    assert_eq!(header, "x,y,u");
    assert_eq!(rows.len(), 64 * 64);
    for r in &rows {
        assert!((r[2] - r[1].sin().ln()).abs() < 1e-14);
    }
}

#[test]
fn exact_tilted_reaper_slope_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["exact", "--surface", "tilted-reaper", "--w", "2pi", "--sign", "-1", "--gradient", "--out", "tr.csv", "--format", "obj"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv_rows(&dir.path().join("tr.csv"));
    assert_eq!(header, "x,y,u,u_x,u_y");
    for r in &rows {
        assert!((r[3] + 3f64.sqrt()).abs() < 1e-12);
    }
    assert!(dir.path().join("tr.obj").exists());
}

#[test]
fn narrow_tilted_reaper_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["exact", "--surface", "tilted-reaper", "--w", "3", "--out", "t.csv"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("w >= π"));
    assert!(!dir.path().join("t.csv").exists());
}

#[test]
fn residual_refinement_passes_on_grim_reaper_samples() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &["exact", "--surface", "grim-reaper", "--n", "64", "--out", "gr.csv"])), 0);
    let o = run(dir.path(), &["diagnose", "--field", "gr.csv", "--check", "residual-refinement", "--out", "d.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&dir.path().join("d.json"));
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["checks"][0]["pass"], true);
    assert!(r["checks"][0]["ratio"].as_f64().unwrap() <= 0.30);
}

#[test]
fn morse_check_counts_one_saddle() {
    let dir = tempfile::tempdir().unwrap();
    write_field(&dir.path().join("saddle.csv"), 41, |x, y| x * x - y * y + 0.1 * x + 0.05 * y);
    let o = run(dir.path(), &["diagnose", "--field", "saddle.csv", "--check", "morse", "--level", "inf", "--out", "m.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let c = &report(&dir.path().join("m.json"))["checks"][0];
    assert_eq!(c["N"], 1);
    assert_eq!(c["pass"], true);
}

#[test]
fn failed_check_exits_4_and_keeps_report() {
    let dir = tempfile::tempdir().unwrap();
    write_field(&dir.path().join("bowl.csv"), 21, |x, y| x * x + y * y);
    let o = run(dir.path(), &["diagnose", "--field", "bowl.csv", "--check", "curvature-sign", "--out", "b.json"]);
    assert_eq!(code(&o), 4);
    assert_eq!(report(&dir.path().join("b.json"))["pass"], false);
}

#[test]
fn malformed_field_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("f.csv"), "x,z,u\n0,0,0\n").unwrap();
    let o = run(dir.path(), &["diagnose", "--field", "f.csv", "--check", "morse"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn scherkenoid_pipeline_reports_and_passes_gauss_image() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["scherkenoid", "--w", "2pi", "--trunc", "8", "--h", "20", "--out", "sk"];
    let o = run(dir.path(), &args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("sk");
    let r = report(&out.join("report.json"));
    let target = 2.0 * (PI / (2.0 * PI)).asin();
    assert!((r["total_curvature"].as_f64().unwrap() - target).abs() <= 0.15 * target);
    assert_eq!(r["curvature"]["negative_fraction"], 1.0);
    assert!(out.join("field.csv").exists() && out.join("mesh.obj").exists());

    let o = run(&out, &["diagnose", "--field", "field.csv", "--check", "gauss-image", "--w", "2pi"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    // identical configuration, identical bytes
    let again = run(dir.path(), &["scherkenoid", "--w", "2pi", "--trunc", "8", "--h", "20", "--out", "sk2"]);
    assert_eq!(code(&again), 0);
    for f in ["field.csv", "report.json", "mesh.obj"] {
        assert_eq!(fs::read(out.join(f)).unwrap(), fs::read(dir.path().join("sk2").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn helicoid_report_has_positive_axis() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["helicoid", "--w", "pi/2", "--trunc", "4", "--H", "16", "--out", "hl", "--format", "ply"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&dir.path().join("hl/report.json"));
    assert!(r["x_hat"].as_f64().unwrap() > 0.0);
    assert!(dir.path().join("hl/mesh.ply").exists());
}

#[test]
fn pitchfork_curvature_is_negative_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["pitchfork", "--w", "2pi", "--trunc", "4", "--H", "20", "--out", "pf"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&dir.path().join("pf/report.json"));
    assert_eq!(r["curvature"]["negative_fraction"], 1.0);
}

#[test]
fn scherk_report_brackets_length() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["scherk", "--alpha", "pi/2", "--w", "pi/2", "--out", "s"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&dir.path().join("s/report.json"));
    let l = r["L_estimate"].as_f64().unwrap();
    assert!(l > PI / 2.0 && l < 7.3188, "{l}");
    assert!(r["mismatch"].as_f64().unwrap() <= 0.05);
    for key in ["alpha", "w", "h_schedule", "L_per_h", "flux_lhs", "flux_rhs"] {
        assert!(!r[key].is_null(), "{key}");
    }
}

#[test]
fn width_sweep_is_increasing() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["scherk", "--w-list", "0.3pi,0.5pi,0.7pi", "--jobs", "3", "--out", "sw"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv_rows(&dir.path().join("sw/sweep.csv"));
    assert_eq!(header, "w,L_estimate");
    assert_eq!(rows.len(), 3);
    assert!(rows.windows(2).all(|p| p[1][1] > p[0][1]));
}

#[test]
fn config_file_values_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.toml"),
        "surface = \"tilted-reaper\"\nw = \"2pi\"\nn = 8\nout = \"from_config.csv\"\n",
    )
    .unwrap();
    let o = run(dir.path(), &["exact", "--config", "run.toml", "--n", "5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows) = csv_rows(&dir.path().join("from_config.csv"));
    assert_eq!(rows.len(), 25);
}

#[test]
fn usage_and_convergence_failures_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["scherk", "--w", "2", "--H", "3", "--out", "x"]);
    assert_eq!(code(&o), 2);
    let o = run(dir.path(), &["scherk", "--w", "pi/2", "--L", "3", "--h", "4", "--grid", "9x5", "--tol", "1e-30", "--out", "y"]);
    assert_eq!(code(&o), 3);
    assert_eq!(code(&run(dir.path(), &["frobnicate"])), 2);
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn mesh_command_assembles_four_images_per_block() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["scherk", "--w", "pi/2", "--L", "2.4", "--h", "6", "--grid", "17x9", "--out", "cell"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(
        dir.path(),
        &["mesh", "--field", "cell/field.csv", "--family", "scherk", "--copies", "2x3", "--out", "m.ply"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["copies"], 24);
    assert_eq!(summary["vertices"], 24 * 17 * 9);
    let mesh = translator_core::surface::read_ply(&dir.path().join("m.ply")).unwrap();
    assert_eq!(mesh.vertex_count(), 24 * 17 * 9);
}
