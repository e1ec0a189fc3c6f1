use std::path::Path;
use std::process::Command;

use pfrecon::io::{read_volume, write_volume};
use pfrecon::{ComplexVolume, Space};

fn pfrecon(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_pfrecon"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

const PHANTOM: &str = r#"{"grid":[64,64],"r0":20,"gamma":0.5}"#;
const SAMPLING: &str = r#"{"axes":[{"half_width":8,"acquired_side":"positive"},{"half_width":8,"acquired_side":"negative"}]}"#;

#[test]
fn phantom_truncate_recon_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "spec.json", PHANTOM);
    write(d, "sampling.json", SAMPLING);
    write(d, "cfg.json", &format!(r#"{{"sampling":{SAMPLING}}}"#));
    assert!(pfrecon(d, &["phantom-gen", "--spec", "spec.json", "--out", "ph", "--kspace"]).status.success());
    assert!(pfrecon(d, &["truncate", "--in", "ph_k.cplx", "--spec", "sampling.json", "--out", "kpk.cplx"]).status.success());
    let out = pfrecon(
        d,
        &["recon", "--in", "kpk.cplx", "--method", "homodyne2d", "--config", "cfg.json", "--out", "img.cplx", "--pgm", "img.pgm", "--reference", "ph_k.cplx"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let img = read_volume(d.join("img.cplx")).unwrap();
    assert_eq!(img.dims(), &[64, 64]);
    assert!(img.samples().iter().all(|z| z.im == 0.0));
    let pgm = std::fs::read(d.join("img.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n64 64\n255\n"));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.join("img.cplx.report.json")).unwrap()).unwrap();
    assert_eq!(report["method"], "homodyne2d");
    assert!(report["error"].as_f64().unwrap() > 0.0);
    assert_eq!(report["config"]["sampling"]["axes"][0]["half_width"], 8);
    let kpk_report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.join("kpk.cplx.report.json")).unwrap()).unwrap();
    assert!(kpk_report["kept_fraction"].as_f64().unwrap() < 1.0);
}

#[test]
fn validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "bad.json", r#"{"grid":[63,64],"r0":20}"#);
    assert_eq!(pfrecon(d, &["phantom-gen", "--spec", "bad.json", "--out", "x"]).status.code(), Some(2));
    write(d, "spec.json", PHANTOM);
    assert_eq!(pfrecon(d, &["phantom-gen", "--spec", "spec.json", "--out", "spec"]).status.code(), Some(2));
    assert!(pfrecon(d, &["phantom-gen", "--spec", "spec.json", "--out", "ph", "--kspace"]).status.success());
    write(d, "cfg.json", &format!(r#"{{"sampling":{SAMPLING}}}"#));
    let out = pfrecon(d, &["recon", "--in", "ph_k.cplx", "--method", "nope", "--config", "cfg.json", "--out", "o.cplx"]);
    assert_eq!(out.status.code(), Some(2));
    let out = pfrecon(d, &["recon", "--in", "ph.cplx", "--method", "zerofill", "--config", "cfg.json", "--out", "o.cplx"]);
    assert_eq!(out.status.code(), Some(2), "image-space input must be rejected");
    assert_eq!(pfrecon(d, &["sweep", "--mode", "nope", "--grid", "0.3", "--methods", "zerofill", "--out", "t.csv"]).status.code(), Some(2));
}

#[test]
fn numerical_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_volume(&ComplexVolume::zeros(&[8, 8], Space::Kspace).unwrap(), d.join("zero.cplx")).unwrap();
    write(d, "cfg.json", r#"{"sampling":{"axes":[{"half_width":2,"acquired_side":"positive"},{"half_width":0,"acquired_side":"full"}]}}"#);
    let out = pfrecon(
        d,
        &["recon", "--in", "zero.cplx", "--method", "zerofill", "--config", "cfg.json", "--out", "o.cplx", "--reference", "zero.cplx"],
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    write(d, "spec.json", PHANTOM);
    write(d, "grappa.json", r#"{"axes":[{"half_width":20,"acquired_side":"positive","undersample_factor":4,"acs_half_width":2},{"half_width":20,"acquired_side":"negative"}]}"#);
    let out = pfrecon(d, &["parallel-sim", "--phantom", "spec.json", "--coils", "4", "--spec", "grappa.json", "--method", "grappa", "--out", "p"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_input_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(pfrecon(dir.path(), &["phantom-gen", "--spec", "absent.json", "--out", "x"]).status.code(), Some(1));
}

#[test]
fn parallel_and_pcmra_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "spec.json", PHANTOM);
    write(d, "grappa.json", r#"{"axes":[{"half_width":12,"acquired_side":"positive","undersample_factor":2,"acs_half_width":12},{"half_width":12,"acquired_side":"negative"}]}"#);
    let out = pfrecon(d, &["parallel-sim", "--phantom", "spec.json", "--coils", "2", "--spec", "grappa.json", "--method", "grappa-extended", "--out", "p"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(d.join("p.pgm").exists());
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("p.report.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["config"]["grappa"]["r"], 2);
    assert!(report["report"]["details"]["acs_residual"].is_number());

    write(d, "flow.json", r#"{"grid":[32,64,16],"vessel_axis":1,"vessel_radius":4,"peak_velocity":4,"venc":10,"background_magnitude":0.3,"vessel_magnitude":1}"#);
    write(d, "s3.json", r#"{"axes":[{"half_width":4,"acquired_side":"positive"},{"half_width":8,"acquired_side":"negative"},{"half_width":2,"acquired_side":"positive"}]}"#);
    let out = pfrecon(d, &["pcmra-sim", "--phantom", "flow.json", "--spec", "s3.json", "--method", "homodyne3d", "--out", "f"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["f_vx.cplx", "f_vy.cplx", "f_vz.cplx", "f_speed.cplx", "f_mip.cplx"] {
        assert!(read_volume(d.join(name)).is_ok(), "{name}");
    }
    assert!(std::fs::read(d.join("f_mip.pgm")).unwrap().starts_with(b"P5\n64 32\n255\n"));
    let out = pfrecon(d, &["pcmra-sim", "--phantom", "flow.json", "--spec", "s3.json", "--method", "pocs", "--out", "g", "--flow-phase", "bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_writes_sorted_csv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "spec.json", r#"{"grid":[64,64],"r0":20}"#);
    let out = pfrecon(d, &["sweep", "--mode", "gamma", "--grid", "1,0,0.5", "--methods", "zerofill,homodyne2d", "--phantom", "spec.json", "--out", "g.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(d.join("g.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "gamma,method,mean_intensity,error");
    assert_eq!(lines.len(), 7);
    assert!(lines[1].starts_with("0,homodyne2d,"));
    assert!(lines[6].starts_with("1,zerofill,"));
    assert!(d.join("g.csv.report.json").exists());
}
