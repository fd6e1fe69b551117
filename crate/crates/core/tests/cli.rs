use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_strohkit")
}

fn scratch(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("strohkit-cli-{}-{tag}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(args: &[&str], config: Option<&Path>, out: &Path) -> i32 {
    let mut cmd = Command::new(bin());
    cmd.args(args).arg("--out").arg(out);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().unwrap().status.code().unwrap()
}

/// Data rows of a CSV written by the binary, header comment and column line dropped.
fn rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

#[test]
fn cubic_rayleigh_speed_has_quarter_turn_period() {
    let out = scratch("cubic");
    assert_eq!(run(&["rayleigh"], Some(&scenario("cubic_rayleigh.json")), &out), 0);
    let (h, r) = rows(&out.join("rayleigh.csv"));
    let (ct, cr) = (col(&h, "theta"), col(&h, "c_r"));
    assert_eq!(r.len(), 9);
    let v: Vec<(f64, f64)> = r.iter().map(|row| (row[ct].parse().unwrap(), row[cr].parse().unwrap())).collect();
    let status: Vec<&str> = r.iter().map(|row| row[col(&h, "status")].as_str()).collect();
    // near [010] of the rotated crystal the root sits within 0.1% of c∞
    assert_eq!(status[3], "NearSonicRoot");
    assert_eq!(status[3], status[7]);
    // 9 points over [0, π] inclusive: index k and k + 4 are a quarter turn apart
    for k in 0..5 {
        assert!((v[k + 4].0 - v[k].0 - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!((v[k + 4].1 / v[k].1 - 1.0).abs() < 1e-9, "{:?} vs {:?}", v[k], v[k + 4]);
    }
    // the rotation about the normal makes the speed direction dependent
    let spread = v.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max) - v.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    assert!(spread > 1e-3);
    let _ = std::fs::remove_dir_all(&out);
}

#[test]
fn exit_codes() {
    let out = scratch("codes");
    assert_eq!(run(&["impedance"], Some(&scenario("supersonic.json")), &out), 2);
    assert_eq!(run(&["trace"], None, &out), 1);
    assert_eq!(run(&["trace"], Some(&out.join("missing.json")), &out), 1);
    let bad = out.join("bad.json");
    std::fs::write(&bad, r#"{"run": {"speed": 0.5, "no_such_key": 1}}"#).unwrap();
    assert_eq!(run(&["impedance"], Some(&bad), &out), 1);
    let fault = out.join("fault.json");
    std::fs::write(&fault, r#"{"run": {"inject_fault": true}}"#).unwrap();
    assert_eq!(run(&["verify", "--seed", "3"], Some(&fault), &out), 3);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["failures"], 1);
    assert_eq!(run(&["verify", "--seed", "3"], None, &out), 0);
    let st = Command::new(bin()).arg("nonsense").output().unwrap();
    assert_eq!(st.status.code(), Some(1));
    let _ = std::fs::remove_dir_all(&out);
}

#[test]
fn graded_trace_keeps_kernel_residual_small() {
    let out = scratch("graded");
    assert_eq!(run(&["trace"], Some(&scenario("graded_sphere.json")), &out), 0);
    let (h, r) = rows(&out.join("rays.csv"));
    let k = col(&h, "kernel_residual");
    assert!(!r.is_empty());
    for row in &r {
        let v: f64 = row[k].parse().unwrap();
        assert!(v <= 1e-6, "kernel residual {v}");
    }
    let _ = std::fs::remove_dir_all(&out);
}

#[test]
fn plane_point_source_amplitude_decays_as_inverse_root_time() {
    let out = scratch("plane");
    assert_eq!(run(&["trace"], Some(&scenario("isotropic_plane.json")), &out), 0);
    let (h, r) = rows(&out.join("rays.csv"));
    let (cray, ct) = (col(&h, "ray"), col(&h, "t"));
    let w: Vec<usize> = ["w0_1_re", "w0_1_im", "w0_2_re", "w0_2_im", "w0_3_re", "w0_3_im"].iter().map(|n| col(&h, n)).collect();
    let mut per_ray: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    for row in &r {
        let t: f64 = row[ct].parse().unwrap();
        let amp = w.iter().map(|&i| row[i].parse::<f64>().unwrap().powi(2)).sum::<f64>().sqrt();
        if amp.is_finite() && t > 0.0 {
            per_ray.entry(row[cray].parse().unwrap()).or_default().push(amp * t.sqrt());
        }
    }
    assert_eq!(per_ray.len(), 12);
    for v in per_ray.values() {
        assert!(v.len() > 2);
        for a in v {
            assert!((a / v[0] - 1.0).abs() < 1e-6, "{a} vs {}", v[0]);
        }
    }
    let _ = std::fs::remove_dir_all(&out);
}
