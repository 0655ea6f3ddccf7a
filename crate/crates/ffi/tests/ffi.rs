use std::ffi::{c_char, CStr};
use std::path::Path;
use std::process::Command;
use std::ptr;

use approx::assert_relative_eq;
use win_martingale_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as c_char; 256];
    let n = unsafe { wm_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let s = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_owned();
    assert_eq!(n, s.len());
    s
}

#[test]
fn closed_forms() {
    let mut v = 0.0;
    assert_eq!(unsafe { wm_optimal_value(0.5, &mut v) }, WmStatus::Ok);
    assert_relative_eq!(v, -0.375 + std::f64::consts::PI.ln(), max_relative = 1e-14);
    assert_eq!(last_error(), "");
    assert_relative_eq!(wm_v_tilde(0.0, 0.5), 0.3181472, epsilon = 1e-7);
    assert!(wm_v_bar(0.0, 0.0).is_infinite());
    assert!(wm_v_bar(0.0, 1.5).is_nan());

    let mut s = 0.0;
    assert_eq!(unsafe { wm_aldous_sigma(0.0, 0.5, &mut s) }, WmStatus::Ok);
    assert_relative_eq!(s, 1.0 / std::f64::consts::PI, max_relative = 1e-14);

    assert_eq!(unsafe { wm_optimal_value(1.5, &mut v) }, WmStatus::Domain);
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { wm_optimal_value(0.5, ptr::null_mut()) }, WmStatus::NullPointer);
    assert!(last_error().contains("out"));
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(wm_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn error_message_truncates() {
    let mut v = 0.0;
    assert_eq!(unsafe { wm_optimal_value(-1.0, &mut v) }, WmStatus::Domain);
    let full = unsafe { wm_last_error_message(ptr::null_mut(), 0) };
    let mut buf = [1 as c_char; 4];
    assert_eq!(unsafe { wm_last_error_message(buf.as_mut_ptr(), buf.len()) }, full);
    assert_eq!(buf[3], 0);
}

#[test]
fn ensemble_round_trip() {
    let mut e = ptr::null_mut();
    let st = unsafe { wm_simulate(c"aldous".as_ptr(), 0.5, 3, 64, 1e-6, WmGridMode::Geometric, 7, &mut e) };
    assert_eq!(st, WmStatus::Ok, "{}", last_error());
    let (np, nn) = unsafe { (wm_ensemble_n_paths(e), wm_ensemble_n_nodes(e)) };
    assert_eq!((np, nn), (3, 65));

    let mut times = vec![0.0; nn];
    assert_eq!(unsafe { wm_ensemble_times(e, times.as_mut_ptr(), nn) }, WmStatus::Ok);
    assert_eq!(times[0], 0.0);
    assert_relative_eq!(times[nn - 1], 1.0 - 1e-6, max_relative = 1e-12);

    let mut term = vec![9u8; np];
    assert_eq!(unsafe { wm_ensemble_terminal(e, term.as_mut_ptr(), np) }, WmStatus::Ok);
    let mut path = vec![0.0; nn];
    for p in 0..np {
        assert_eq!(unsafe { wm_ensemble_path(e, p, path.as_mut_ptr(), nn) }, WmStatus::Ok);
        assert_eq!(path[0], 0.5);
        assert!(path.iter().all(|x| (0.0..=1.0).contains(x)));
        assert!(term[p] <= 1);
    }

    assert_eq!(unsafe { wm_ensemble_path(e, np, path.as_mut_ptr(), nn) }, WmStatus::OutOfRange);
    assert_eq!(unsafe { wm_ensemble_path(e, 0, path.as_mut_ptr(), nn - 1) }, WmStatus::OutOfRange);
    assert_eq!(unsafe { wm_ensemble_times(ptr::null(), times.as_mut_ptr(), nn) }, WmStatus::NullPointer);
    unsafe { wm_ensemble_free(e) };
    unsafe { wm_ensemble_free(ptr::null_mut()) };
}

#[test]
fn simulate_rejects_unknown_spec() {
    let mut e = ptr::null_mut();
    let st = unsafe { wm_simulate(c"nope".as_ptr(), 0.5, 1, 8, 1e-6, WmGridMode::Uniform, 1, &mut e) };
    assert_eq!(st, WmStatus::UnknownSpec);
    assert!(e.is_null());
    let st = unsafe { wm_simulate(ptr::null(), 0.5, 1, 8, 1e-6, WmGridMode::Uniform, 1, &mut e) };
    assert_eq!(st, WmStatus::NullPointer);
}

#[test]
fn entropy_estimate_is_finite() {
    let mut est = WmEntropyEstimate::default();
    let st = unsafe {
        wm_entropy_estimate(
            c"aldous".as_ptr(),
            0.5,
            200,
            256,
            1e-6,
            WmGridMode::Geometric,
            3,
            WmSigmaSource::Analytic,
            &mut est,
        )
    };
    assert_eq!(st, WmStatus::Ok, "{}", last_error());
    assert_eq!(est.n_paths, 200);
    assert!(est.mean.is_finite() && est.std_error > 0.0);
    assert!(est.bracket_lo <= est.bracket_hi);
}

#[test]
fn discrete_solve_from_json() {
    // Two-point terminal law from a point mass: the coupling is forced.
    let json = r#"{"states":[0.0,0.5,1.0],"T":1,"mu":[0,1,0],"nu":[0.5,0,0.5],"ref_var":1.0}"#;
    let json = std::ffi::CString::new(json).unwrap();
    let mut c = ptr::null_mut();
    let st = unsafe { wm_discrete_solve_json(json.as_ptr(), 1000, 1e-10, &mut c) };
    assert_eq!(st, WmStatus::Ok, "{}", last_error());
    let n = unsafe { wm_coupling_n_states(c) };
    assert_eq!((n, unsafe { wm_coupling_n_steps(c) }), (3, 1));
    let mut k = vec![0.0; n * n];
    assert_eq!(unsafe { wm_coupling_kernel(c, 0, k.as_mut_ptr(), k.len()) }, WmStatus::Ok);
    assert_relative_eq!(k[3], 0.5, epsilon = 1e-9);
    assert_relative_eq!(k[5], 0.5, epsilon = 1e-9);
    assert_eq!(unsafe { wm_coupling_kernel(c, 1, k.as_mut_ptr(), k.len()) }, WmStatus::OutOfRange);
    let (mut tv, mut mart) = (1.0, 1.0);
    assert_eq!(unsafe { wm_coupling_residuals(c, &mut tv, &mut mart) }, WmStatus::Ok);
    assert!(tv < 1e-9 && mart < 1e-9);
    unsafe { wm_coupling_free(c) };

    let bad = std::ffi::CString::new(r#"{"states":[0.0,1.0],"T":1,"mu":[1,0],"nu":[0,1],"ref_var":1.0}"#).unwrap();
    let st = unsafe { wm_discrete_solve_json(bad.as_ptr(), 1000, 1e-10, &mut c) };
    assert_eq!(st, WmStatus::Infeasible, "{}", last_error());
}

#[test]
fn discrete_win_problem() {
    let mut c = ptr::null_mut();
    let st = unsafe { wm_discrete_solve_win(4, 0.5, 0.05, 100_000, 1e-7, &mut c) };
    assert_eq!(st, WmStatus::Ok, "{}", last_error());
    let n = unsafe { wm_coupling_n_states(c) };
    assert_eq!(n, 201);
    let mut states = vec![0.0; n];
    assert_eq!(unsafe { wm_coupling_states(c, states.as_mut_ptr(), n) }, WmStatus::Ok);
    assert_eq!((states[0], states[n - 1]), (-0.5, 1.5));
    let (mut kl, mut per_step) = (0.0, 0.0);
    assert_eq!(unsafe { wm_coupling_kl(c, &mut kl, &mut per_step) }, WmStatus::Ok);
    assert!(kl > 0.0 && per_step.is_finite());
    unsafe { wm_coupling_free(c) };
}

fn header() -> String {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/win_martingale.h");
    std::fs::read_to_string(p).expect("header generated by build script")
}

#[test]
fn header_declares_api() {
    let h = header();
    for sym in [
        "WmStatus wm_optimal_value(double x0, double *out);",
        "typedef struct WmEnsemble WmEnsemble;",
        "typedef struct WmCoupling WmCoupling;",
        "WM_STATUS_NULL_POINTER = 1",
        "void wm_ensemble_free(WmEnsemble *e);",
        "void wm_coupling_free(WmCoupling *c);",
        "size_t wm_last_error_message(char *buf, size_t len);",
        "wm_entropy_estimate(",
        "wm_discrete_solve_json(",
    ] {
        assert!(h.contains(sym), "header lacks `{sym}`");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = std::env::var("CC").or_else(|_| which("cc")) else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        "#include \"win_martingale.h\"\n\
         int main(void) { double v; WmEnsemble *e = NULL;\n\
         if (wm_optimal_value(0.5, &v) != WM_STATUS_OK) return 1;\n\
         wm_ensemble_free(e); return 0; }\n",
    )
    .unwrap();
    let inc = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(inc)
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which(name: &str) -> Result<String, ()> {
    let path = std::env::var_os("PATH").ok_or(())?;
    std::env::split_paths(&path)
        .map(|d| d.join(name))
        .find(|p| p.is_file())
        .map(|p| p.to_string_lossy().into_owned())
        .ok_or(())
}
