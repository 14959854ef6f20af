use std::path::PathBuf;
use std::process::{Command, Output};

fn scratch(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rwrs-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn rwrs(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rwrs"));
    cmd.args(args).env_remove("RWRS_THREADS");
    if let Some(t) = threads {
        cmd.env("RWRS_THREADS", t);
    }
    cmd.output().unwrap()
}

#[test]
fn pass_writes_csv_and_exits_zero() {
    let cfg = scratch("constants.cfg", "kind = constants\nbeta = 1.5\na1 = 1\nl_moment_n = 1024\nl_moment_reps = 500\ntolerance = 1e-6\n");
    let out = cfg.with_file_name("constants.csv");
    let o = rwrs(&["constants", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("regime,a,estimate_re,estimate_im,stat_err,trunc_err,predicted,ratio\n"));
    assert!(csv.contains("\nC1,"));
}

#[test]
fn failed_verdict_exits_two() {
    // ψ/γ at t = 0.5 is far from 1 in the β = 1 regime.
    let cfg = scratch("fail.cfg", "kind = psi-ratio\nbeta = 1\nt_grid = 0.5\nreps = 10\ntolerance = 1e-3\n");
    let o = rwrs(&["psi", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("verdict: FAIL"));
}

#[test]
fn errors_exit_one() {
    let cfg = scratch("transient.cfg", "kind = kernel-recurrent\nbeta = 0.5\na_grid = 50, 100\n");
    let o = rwrs(&["kernel", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("transient regime: use kernel-transient"));

    let cfg = scratch("unknown.cfg", "kind = constants\nbeta = 2\nwalk_kind = simple\n");
    let o = rwrs(&["constants", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown key `walk_kind`"));

    let cfg = scratch("mismatch.cfg", "kind = constants\nbeta = 2\n");
    let o = rwrs(&["kernel", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn output_ignores_thread_count_and_repeats_exactly() {
    let cfg = scratch(
        "kernel.cfg",
        "kind = kernel-transient\nbeta = 0.5\na_grid = 10, 20, 40, 80\nn_max = 256\nreps = 3000\nl_moment_n = 1024\nl_moment_reps = 500\nslope_tol = 10\nlevel_tol = 10\n",
    );
    let args = ["kernel", "--config", cfg.to_str().unwrap()];
    let a = rwrs(&args, Some("1"));
    let b = rwrs(&args, Some("4"));
    let c = rwrs(&[&args[..], &["--threads", "2"]].concat(), None);
    let d = rwrs(&args, Some("1"));
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
    assert_eq!(a.stdout, d.stdout);

    let csv = scratch("kernel.csv", std::str::from_utf8(&a.stdout).unwrap());
    let f = rwrs(&["fit", "--config", cfg.to_str().unwrap(), "--input", csv.to_str().unwrap()], None);
    assert_eq!(f.status.code(), Some(0));
    assert_eq!(f.stdout, a.stdout);
}
