use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use kklab_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    unsafe { kk_last_error_message(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn grid_and_operator_lifecycle() {
    let mut g: *mut KkGrid = ptr::null_mut();
    assert_eq!(unsafe { kk_grid_new(20.0, 2001, &mut g) }, KkStatus::Ok);
    assert_eq!(unsafe { kk_grid_n_points(g) }, 2001);
    assert!((unsafe { kk_grid_spacing(g) } - 0.02).abs() < 1e-15);
    let x = CString::new("x").unwrap();
    let mut op: *mut KkSymOp = ptr::null_mut();
    assert_eq!(unsafe { kk_op_new(g, KkOpKind::EvenDirac, x.as_ptr(), &mut op) }, KkStatus::Ok);
    assert_eq!(unsafe { kk_op_dim(op) }, 4002);
    let mut len = 0usize;
    assert_eq!(unsafe { kk_op_eigenvalues(op, ptr::null_mut(), 0, &mut len) }, KkStatus::BufferTooSmall);
    assert_eq!(len, 4002);
    let mut w = vec![0.0; len];
    assert_eq!(unsafe { kk_op_eigenvalues(op, w.as_mut_ptr(), w.len(), &mut len) }, KkStatus::Ok);
    let first = w.iter().copied().find(|&v| v > 1e-3).unwrap();
    assert!((first - 2f64.sqrt()).abs() < 1e-2);
    unsafe {
        kk_op_free(op);
        kk_grid_free(g);
        kk_op_free(ptr::null_mut());
        kk_grid_free(ptr::null_mut());
    }
}

#[test]
fn error_codes_and_messages() {
    let mut g: *mut KkGrid = ptr::null_mut();
    assert_eq!(unsafe { kk_grid_new(1.0, 4, &mut g) }, KkStatus::InvalidArgument);
    assert!(g.is_null());
    assert!(last_error().contains("odd"), "{}", last_error());
    assert_eq!(unsafe { kk_grid_new(1.0, 5, ptr::null_mut()) }, KkStatus::NullPointer);
    assert_eq!(unsafe { kk_grid_new(1.0, 5, &mut g) }, KkStatus::Ok);
    let bad = CString::new("x +").unwrap();
    let mut op: *mut KkSymOp = ptr::null_mut();
    assert_eq!(unsafe { kk_op_new(g, KkOpKind::FirstOrder, bad.as_ptr(), &mut op) }, KkStatus::Parse);
    assert!(last_error().contains("column"));
    assert_eq!(unsafe { kk_op_new(ptr::null(), KkOpKind::FirstOrder, bad.as_ptr(), &mut op) }, KkStatus::NullPointer);
    assert_eq!(unsafe { kk_op_dim(ptr::null()) }, 0);
    assert!(unsafe { kk_grid_spacing(ptr::null()) }.is_nan());
    unsafe { kk_grid_free(g) };
    // success clears the message
    let mut g2: *mut KkGrid = ptr::null_mut();
    assert_eq!(unsafe { kk_grid_new(1.0, 5, &mut g2) }, KkStatus::Ok);
    assert_eq!(last_error(), "");
    unsafe { kk_grid_free(g2) };
    let v = unsafe { CStr::from_ptr(kk_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn deficiency_and_battery() {
    let e = CString::new("i_d_dx + x").unwrap();
    let (mut p, mut m) = (9usize, 9usize);
    assert_eq!(unsafe { kk_deficiency_indices(e.as_ptr(), f64::NEG_INFINITY, f64::INFINITY, &mut p, &mut m) }, KkStatus::Ok);
    assert_eq!((p, m), (0, 0));
    assert_eq!(unsafe { kk_deficiency_indices(e.as_ptr(), 0.0, f64::INFINITY, &mut p, &mut m) }, KkStatus::Ok);
    assert_eq!((p, m), (0, 1));
    assert_eq!(unsafe { kk_deficiency_indices(e.as_ptr(), 1.0, 0.0, &mut p, &mut m) }, KkStatus::InvalidArgument);
    let mut ok = false;
    assert_eq!(unsafe { kk_finmod_battery(3, &mut ok) }, KkStatus::Ok);
    assert!(ok);
}

#[test]
fn scenario_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    std::fs::write(&cfg, "name = \"s\"\nchecks = [\"deficiency\"]\n[operator]\nexpr = \"i_d_dx\"\ninterval = [0.0, inf]\n").unwrap();
    let (c, o) = (CString::new(cfg.to_str().unwrap()).unwrap(), CString::new(dir.path().join("out").to_str().unwrap()).unwrap());
    let mut passed = true;
    assert_eq!(unsafe { kk_run_scenario(c.as_ptr(), o.as_ptr(), &mut passed) }, KkStatus::Ok);
    assert!(!passed);
    assert!(dir.path().join("out/report.json").exists());
    let missing = CString::new("/nonexistent.toml").unwrap();
    assert_eq!(unsafe { kk_run_scenario(missing.as_ptr(), ptr::null(), &mut passed) }, KkStatus::Io);
}

#[test]
fn header_declares_the_api_and_compiles() {
    let h = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/kklab.h");
    let text = std::fs::read_to_string(&h).unwrap();
    for sym in ["kk_grid_new", "kk_op_new", "kk_op_eigenvalues", "kk_deficiency_indices", "kk_last_error_message", "KK_STATUS_BUFFER_TOO_SMALL", "typedef struct KkGrid KkGrid"] {
        assert!(text.contains(sym), "header lacks {sym}");
    }
    if let Ok(o) = Command::new("cc").args(["-fsyntax-only", "-x", "c"]).arg(&h).output() {
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
}
