use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use peregrine_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(pg_last_error_message()) }.to_string_lossy().into_owned()
}

fn bump(n: usize) -> *mut PgBathymetry {
    let mut bath = ptr::null_mut();
    assert_eq!(pg_bathymetry_new_gaussian(1, n, 20.0, 1.0, 0.5, 2.5, 1.0, &mut bath), PgStatus::Ok);
    assert!(!bath.is_null());
    bath
}

#[test]
fn bathymetry_handle_reports_depth() {
    let bath = bump(32);
    let mut points = 0usize;
    assert_eq!(pg_bathymetry_points(bath, &mut points), PgStatus::Ok);
    assert_eq!(points, 32);
    let mut h_min = 0.0;
    assert_eq!(pg_bathymetry_h_min(bath, &mut h_min), PgStatus::Ok);
    let mut depth = vec![0.0; 32];
    assert_eq!(pg_bathymetry_depth(bath, depth.as_mut_ptr(), 32), PgStatus::Ok);
    assert_eq!(depth.iter().cloned().fold(f64::INFINITY, f64::min), h_min);
    assert!((h_min - 0.5).abs() < 1e-2);
    pg_bathymetry_free(bath);
}

#[test]
fn invalid_arguments_map_to_status_codes() {
    let mut bath = ptr::null_mut();
    assert_eq!(
        pg_bathymetry_new_gaussian(1, 30, 20.0, 1.0, 0.5, 2.5, 1.0, &mut bath),
        PgStatus::InvalidGrid
    );
    assert!(bath.is_null());
    assert!(!last_error().is_empty());
    // bottom touching the surface
    assert_eq!(
        pg_bathymetry_new_gaussian(1, 32, 20.0, 1.0, 1.0, 2.5, 1.2, &mut bath),
        PgStatus::DryState
    );
    assert_eq!(pg_bathymetry_h_min(ptr::null(), ptr::null_mut()), PgStatus::NullPointer);

    let bath = bump(32);
    let zeta = [0.0; 16];
    let mut q = vec![0.0; 32];
    assert_eq!(
        pg_zeta_to_q(bath, 0.1, zeta.as_ptr(), 16, q.as_mut_ptr(), 32),
        PgStatus::LengthMismatch
    );
    assert!(last_error().contains("length"));
    let mut h = 0.0;
    assert_eq!(pg_bathymetry_h_min(bath, &mut h), PgStatus::Ok);
    assert!(last_error().is_empty());
    pg_bathymetry_free(bath);
    pg_bathymetry_free(ptr::null_mut());
}

#[test]
fn q_transform_round_trip() {
    let bath = bump(64);
    let zeta: Vec<f64> = (0..64).map(|i| 0.3 * (i as f64 * 0.2).sin()).collect();
    let mut q = vec![0.0; 64];
    let mut back = vec![0.0; 64];
    assert_eq!(pg_zeta_to_q(bath, 0.5, zeta.as_ptr(), 64, q.as_mut_ptr(), 64), PgStatus::Ok);
    assert_eq!(pg_q_to_zeta(bath, 0.5, q.as_ptr(), 64, back.as_mut_ptr(), 64), PgStatus::Ok);
    for (a, b) in zeta.iter().zip(&back) {
        assert!((a - b).abs() < 1e-14);
    }
    let dry = vec![-10.0; 64];
    assert_eq!(pg_zeta_to_q(bath, 0.5, dry.as_ptr(), 64, q.as_mut_ptr(), 64), PgStatus::DryState);
    pg_bathymetry_free(bath);
}

#[test]
fn operator_solve_inverts_apply() {
    let bath = bump(32);
    for kind in [PgOperatorKind::IPlusMuTb, PgOperatorKind::HbB, PgOperatorKind::HbA] {
        let mut op = ptr::null_mut();
        assert_eq!(pg_operator_new(bath, kind, 0.1, &mut op), PgStatus::Ok);
        let v: Vec<f64> = (0..32).map(|i| ((i * 7 % 11) as f64 - 5.0) / 5.0).collect();
        let mut w = vec![0.0; 32];
        let mut x = vec![0.0; 32];
        assert_eq!(pg_operator_apply(op, v.as_ptr(), 32, w.as_mut_ptr(), 32), PgStatus::Ok);
        assert_eq!(pg_operator_solve(op, w.as_ptr(), 32, x.as_mut_ptr(), 32), PgStatus::Ok);
        for (a, b) in v.iter().zip(&x) {
            assert!((a - b).abs() < 1e-9, "{kind:?}");
        }
        pg_operator_free(op);
    }
    pg_bathymetry_free(bath);
}

#[test]
fn energy_matches_flat_reduction() {
    let b = [0.0; 16];
    let mut bath = ptr::null_mut();
    assert_eq!(
        pg_bathymetry_new_samples(1, 16, 10.0, 1.0, 0.0, b.as_ptr(), 16, &mut bath),
        PgStatus::Ok
    );
    let zeta: Vec<f64> = (0..16).map(|i| (i as f64).cos()).collect();
    let v: Vec<f64> = (0..16).map(|i| (i as f64).sin()).collect();
    let mut e = 0.0;
    assert_eq!(pg_energy_bp(bath, 0.0, zeta.as_ptr(), 16, v.as_ptr(), 16, &mut e), PgStatus::Ok);
    let dx = 10.0 / 16.0;
    let expected: f64 = zeta.iter().chain(&v).map(|x| 0.5 * x * x * dx).sum();
    assert!((e - expected).abs() < 1e-12);
    pg_bathymetry_free(bath);
}

#[test]
fn run_config_reports_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let base = r#"
scenario = "operator-audit"
[model]
kind = "bp"
eps = 0.0
mu = 0.1
[bathymetry]
beta = 0.5
shape = "gaussian_bump"
width = 2.5
height = 1.0
[audit]
trials = 3
[[audit.grids]]
n = 16
length = 20.0
"#;
    let good = dir.path().join("good.toml");
    std::fs::write(&good, base).unwrap();
    let path = CString::new(good.to_str().unwrap()).unwrap();
    let out = CString::new(dir.path().join("out").to_str().unwrap()).unwrap();
    assert_eq!(pg_run_config(path.as_ptr(), out.as_ptr(), 1), PgStatus::Ok);
    assert!(dir.path().join("out/summary.json").exists());

    let strict = dir.path().join("strict.toml");
    std::fs::write(&strict, format!("{base}[thresholds]\nsymmetry = -1.0\n")).unwrap();
    let path = CString::new(strict.to_str().unwrap()).unwrap();
    assert_eq!(pg_run_config(path.as_ptr(), ptr::null(), 1), PgStatus::VerdictFailed);
    assert!(last_error().contains("symmetry"));

    let missing = CString::new(dir.path().join("none.toml").to_str().unwrap()).unwrap();
    assert_eq!(pg_run_config(missing.as_ptr(), ptr::null(), 1), PgStatus::Io);
    assert_eq!(pg_run_config(ptr::null(), ptr::null(), 1), PgStatus::NullPointer);
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(pg_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_interface_and_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/peregrine.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "pg_last_error_message",
        "pg_bathymetry_new_gaussian",
        "pg_bathymetry_new_samples",
        "pg_bathymetry_free",
        "pg_zeta_to_q",
        "pg_q_to_zeta",
        "pg_energy_bp",
        "pg_operator_new",
        "pg_operator_apply",
        "pg_operator_solve",
        "pg_operator_free",
        "pg_run_config",
        "PG_STATUS_OK",
        "typedef struct PgBathymetry PgBathymetry",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping the syntax check");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        r#"#include "peregrine.h"
int main(void) {
    PgBathymetry *b = NULL;
    PgStatus s = pg_bathymetry_new_gaussian(1, 32, 20.0, 1.0, 0.5, 2.5, 1.0, &b);
    double h = 0.0;
    if (s == PG_STATUS_OK) s = pg_bathymetry_h_min(b, &h);
    pg_bathymetry_free(b);
    return s == PG_STATUS_OK ? 0 : (int)s + (pg_last_error_message() != NULL);
}
"#,
    )
    .unwrap();
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success()))
        .ok_or(())
}
