use std::path::Path;
use std::process::{Command, Output};

fn qkdsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qkdsim"))
        .args(args)
        .env_remove("QKDSIM_DEFAULT_PROFILE")
        .output()
        .expect("binary runs")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

/// Header-free CSV as (column names, rows).
fn table(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let cols = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (cols, rows)
}

fn column(text: &str, name: &str) -> Vec<f64> {
    let (cols, rows) = table(text);
    let i = cols.iter().position(|c| c == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

#[test]
fn distance_sweep_has_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = qkdsim(&["custom", "--set", "axis=distance_km", "--set", "stop=300", "--set", "step=10", "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = read(&dir.path().join("custom.csv"));
    let (cols, rows) = table(&text);
    assert_eq!(rows.len(), 31);
    assert!(rows.iter().all(|r| r.len() == cols.len() && r.iter().all(|c| !c.is_empty())));
    assert_eq!(column(&text, "distance_km")[30], 300.0);
}

#[test]
fn pol_sweep_is_non_increasing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = qkdsim(&[
        "custom",
        "--set",
        "sweep.axis=pol_mismatch_deg",
        "--set",
        "sweep.stop=20",
        "--set",
        "sweep.step=1",
        "--set",
        "run.name=pol",
        "--out",
        out,
    ]);
    assert!(o.status.success());
    let r = column(&read(&dir.path().join("pol.csv")), "r_sec");
    assert_eq!(r.len(), 21);
    assert!(r[0] > 0.0);
    assert!(r.windows(2).all(|w| w[1] <= w[0]), "{r:?}");
    assert_eq!(*r.last().unwrap(), 0.0);
}

#[test]
fn output_reproduces_from_its_own_header() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = qkdsim(&["fig6", "--set", "distance_km=20", "--set", "step=2", "--out", a.to_str().unwrap()]);
    assert!(o.status.success());
    let first = a.join("fig6.csv");
    let o = qkdsim(&["fig6", "--profile", first.to_str().unwrap(), "--jobs", "1", "--out", b.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read(&first), read(&b.join("fig6.csv")));
    assert!(read(&first).contains("# distance_km = 20\n"));
}

#[test]
fn env_profile_is_used_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let profile = dir.path().join("p.txt");
    std::fs::write(&profile, "[protocol]\nmu_a = 0.2\nmu_b = 0.3\n[sweep]\naxis = distance_km\nstop = 20\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_qkdsim"))
        .args(["fig3", "--set", "mu_b=0.4", "--out", dir.path().to_str().unwrap()])
        .env("QKDSIM_DEFAULT_PROFILE", &profile)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = read(&dir.path().join("fig3.csv"));
    assert!(text.contains("# mu_a = 0.2\n# mu_b = 0.4\n"));
    assert_eq!(column(&text, "distance_km"), [0.0, 10.0, 20.0]);
}

#[test]
fn detuned_physical_visibility_stays_below_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let base = ["custom", "--set", "axis=delta_fwhm_ps", "--set", "stop=60", "--set", "step=5", "--out", out];
    let run = |name: &str, extra: &[&str]| {
        let mut args: Vec<&str> = base.to_vec();
        let name_arg = format!("name={name}");
        args.extend(["--set", &name_arg]);
        args.extend(extra);
        let o = qkdsim(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        read(&dir.path().join(format!("{name}.csv")))
    };
    let flat = run("flat", &[]);
    let detuned = run("detuned", &["--set", "delta_omega=0.02", "--set", "detuning_sign=physical"]);
    for mu in ["0.01", "0.1", "0.5"] {
        let col = format!("v_hom_mu{mu}");
        let (v0, v1) = (column(&flat, &col), column(&detuned, &col));
        assert_eq!(v0.len(), 13);
        assert!(v0.iter().zip(&v1).all(|(a, b)| b < a), "{mu}: {v0:?} vs {v1:?}");
        assert!(v0[0] <= 0.5);
    }
}

#[test]
fn fig8_curves_start_at_or_below_one_half() {
    let dir = tempfile::tempdir().unwrap();
    assert!(qkdsim(&["fig8", "--out", dir.path().to_str().unwrap()]).status.success());
    let text = read(&dir.path().join("fig8.csv"));
    for mu in ["0.01", "0.1", "0.5"] {
        let v = column(&text, &format!("v_hom_mu{mu}"));
        assert!(v[0] <= 0.5);
        assert!(v.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(qkdsim(&["fig9", "--out", out]).status.code(), Some(64));
    assert_eq!(qkdsim(&[]).status.code(), Some(64));
    assert_eq!(qkdsim(&["fig3", "--bogus"]).status.code(), Some(64));
    assert_eq!(qkdsim(&["fig3", "--set", "nope=1", "--out", out]).status.code(), Some(64));
    assert_eq!(qkdsim(&["fig3", "--set", "step=-1", "--out", out]).status.code(), Some(64));
    assert_eq!(qkdsim(&["fig3", "--jobs", "0", "--out", out]).status.code(), Some(64));
    assert_eq!(qkdsim(&["custom", "--set", "axis=none", "--out", out]).status.code(), Some(64));
    assert_eq!(qkdsim(&["--help"]).status.code(), Some(0));
    let file = dir.path().join("file");
    std::fs::write(&file, "").unwrap();
    assert_eq!(qkdsim(&["table3", "--out", file.to_str().unwrap()]).status.code(), Some(73));
}

#[test]
fn mc_validate_writes_ledger_and_reports_status() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = qkdsim(&["mc-validate", "--set", "rounds=200000", "--seed", "11", "--out", out]);
    let text = read(&dir.path().join("mc-validate.txt"));
    assert!(text.contains("# seed = 11\n"));
    let passed = text.contains("# overall = pass\n");
    assert_eq!(o.status.code(), Some(if passed { 0 } else { 2 }));
    assert_eq!(text.matches("relation_weighted_gain").count(), 7);

    // Same seed, same ledger, whatever the pool size.
    let again = dir.path().join("again");
    qkdsim(&["mc-validate", "--profile", &format!("{out}/mc-validate.txt"), "--jobs", "3", "--out", again.to_str().unwrap()]);
    assert_eq!(text, read(&again.join("mc-validate.txt")));
}

#[test]
fn failing_ledger_exits_with_two() {
    // Thirty rounds per point resolve nothing; with this seed one point sees
    // an event far rarer than its analytic rate, so its |z| exceeds 3.
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = qkdsim(&["mc-validate", "--set", "rounds=30", "--set", "mu_a=0.9", "--set", "mu_b=0.9", "--seed", "4", "--out", out]);
    let text = read(&dir.path().join("mc-validate.txt"));
    assert_eq!(o.status.code(), Some(2));
    assert!(text.contains("# overall = FAIL\n") && text.contains("  FAIL\n"), "{text}");
}
