use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn varreg(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_varreg")).args(args).arg("--out").arg(out).output().expect("spawn varreg")
}

fn report(dir: &Path) -> String {
    fs::read_to_string(dir.join("report.txt")).unwrap()
}

fn value(report: &str, key: &str) -> f64 {
    let prefix = format!("{key}=");
    report.lines().find_map(|l| l.strip_prefix(&prefix)).unwrap_or_else(|| panic!("no {key} in\n{report}")).parse().unwrap()
}

#[test]
fn laplace_solve_matches_harmonic_polynomial() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("s");
    let o = varreg(&["solve", "--lagrangian", "quadratic", "--bc", "x^2-y^2", "--res", "129", "--exact", "x^2-y^2"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("u.csv").exists());
    let r = report(&out);
    assert!(value(&r, "max_error_over_h2") <= 10.0);
}

#[test]
fn congestion_with_lipschitz_data_has_zero_energy() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("s");
    let o = varreg(&["solve", "--lagrangian", "congestion", "--bc", "x", "--res", "129"], &out);
    assert_eq!(o.status.code(), Some(0));
    assert!(value(&report(&out), "energy") <= 1e-8);
}

#[test]
fn usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    assert_eq!(varreg(&["solve", "--lagrangian", "p-laplace", "--p", "0.5", "--bc", "x"], &out).status.code(), Some(2));
    assert_eq!(varreg(&["solve", "--lagrangian", "quadratic", "--bc", "x", "--res", "64"], &out).status.code(), Some(2));
    assert_eq!(varreg(&["solve", "--lagrangian", "quadratic", "--bc", "x +"], &out).status.code(), Some(2));
    assert_eq!(varreg(&["probe", "--in", "nonexistent.csv"], &out).status.code(), Some(2));
    assert_eq!(varreg(&["degiorgi", "seq2", "--c", "0.9"], &out).status.code(), Some(2));
    assert_eq!(varreg(&["hedgehog", "nosuchfixture"], &out).status.code(), Some(2));
}

#[test]
fn malformed_field_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "not,a,field\n1,2\n").unwrap();
    let o = varreg(&["probe", "--in", bad.to_str().unwrap(), "--osc"], &tmp.path().join("p"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn non_convergence_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let o = varreg(
        &["solve", "--lagrangian", "minimal-surface", "--bc", "x^2-y^2", "--max-iters", "1", "--tol-residual", "1e-30"],
        &tmp.path().join("s"),
    );
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn probe_examples() {
    let tmp = tempfile::tempdir().unwrap();
    let s = tmp.path().join("s");
    assert!(varreg(&["solve", "--lagrangian", "quadratic", "--bc", "x^2-y^2"], &s).status.success());
    let u = s.join("u.csv");
    let u = u.to_str().unwrap();

    let p = tmp.path().join("p1");
    assert!(varreg(&["probe", "--in", u, "--osc", "--radii", "dyadic:5"], &p).status.success());
    let osc = fs::read_to_string(p.join("tables/osc.csv")).unwrap();
    assert_eq!(osc.lines().count(), 6);

    let p = tmp.path().join("p2");
    assert!(varreg(&["probe", "--in", u, "--cloud", "--r", "0.25", "--chop-line", "1,0,0.2"], &p).status.success());
    let r = report(&p);
    let class = r.lines().find_map(|l| l.strip_prefix("note=chop_line=")).unwrap();
    assert!(["below", "above", "crosses"].contains(&class));
    assert!(p.join("plots/cloud.svg").exists());
    assert!(p.join("tables/cloud.csv").exists());
}

#[test]
fn degiorgi_examples() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d1");
    assert!(varreg(&["degiorgi", "seq2", "--c", "0.1", "--a0", "1", "--k", "10000"], &d).status.success());
    assert!(report(&d).contains("verdict=bound-satisfied"));
    assert_eq!(fs::read_to_string(d.join("tables/trace.csv")).unwrap().lines().count(), 10_002);

    let d = tmp.path().join("d2");
    assert!(varreg(&["degiorgi", "seq1", "--C", "2", "--delta", "1", "--a0", "1"], &d).status.success());
    let r = report(&d);
    assert!(r.contains("verdict=diverges"));
    assert!((value(&r, "threshold") - 0.5).abs() < 1e-6);

    let d = tmp.path().join("d3");
    assert!(varreg(&["degiorgi", "sweep", "--C", "2,4", "--delta", "0.5,1"], &d).status.success());
    let csv = fs::read_to_string(d.join("tables/threshold.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn degiorgi_profile_on_scaled_field() {
    let tmp = tempfile::tempdir().unwrap();
    let s = tmp.path().join("s");
    assert!(varreg(&["solve", "--lagrangian", "quadratic", "--bc", "x", "--scale", "2"], &s).status.success());
    let d = tmp.path().join("d");
    let u = s.join("u.csv");
    let o = varreg(&["degiorgi", "profile", "--in", u.to_str().unwrap(), "--delta-frac", "0.3"], &d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.join("tables/v_profile.csv").exists());
    assert!(d.join("tables/w_profile.csv").exists());
}

#[test]
fn hedgehog_examples() {
    let tmp = tempfile::tempdir().unwrap();
    let h = tmp.path().join("h1");
    assert!(varreg(&["hedgehog", "fourd", "--samples", "2000", "--seed", "1"], &h).status.success());
    let r = report(&h);
    assert!(value(&r, "fraction") >= 0.99);
    assert!(h.join("plots/hedgehog.svg").exists());

    let h = tmp.path().join("h2");
    assert!(varreg(&["hedgehog", "radial", "--alpha", "0.5", "--k", "2", "--n", "2"], &h).status.success());
    assert_eq!(value(&report(&h), "mu"), 15.0);

    let h = tmp.path().join("h3");
    assert!(varreg(&["hedgehog", "radial", "--alpha", "1", "--k", "1", "--n", "2"], &h).status.success());
    assert_eq!(value(&report(&h), "mu"), 0.0);
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut found = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "csv") {
                found.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    found.sort();
    found
}

#[test]
fn same_seed_gives_identical_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 4] = [
        &["solve", "--lagrangian", "p-laplace", "--p", "3", "--bc", "x^2-y^2", "--seed", "5"],
        &["hedgehog", "fourd", "--samples", "1000", "--seed", "5"],
        &["degiorgi", "seq1", "--C", "3", "--delta", "0.5", "--a0", "0.01"],
        &["hedgehog", "zerohom", "--res", "33"],
    ];
    for (i, args) in runs.iter().enumerate() {
        let a = tmp.path().join(format!("{i}a"));
        let b = tmp.path().join(format!("{i}b"));
        assert!(varreg(args, &a).status.success());
        assert!(varreg(args, &b).status.success());
        let (ca, cb) = (csv_files(&a), csv_files(&b));
        assert!(!ca.is_empty());
        assert_eq!(ca, cb, "{args:?}");
    }
}

#[test]
fn writes_stay_inside_out_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("nested/out");
    assert!(varreg(&["degiorgi", "seq2", "--c", "0.25"], &out).status.success());
    let entries: Vec<_> = fs::read_dir(tmp.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(entries, vec![std::ffi::OsString::from("nested")]);
    assert!(out.join("report.txt").exists());
}
