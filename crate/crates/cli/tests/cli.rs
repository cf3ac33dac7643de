use std::path::Path;
use std::process::Command;

fn lstark(args: &[&str], out: &Path) -> (i32, String, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_lstark"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs");
    (
        o.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&o.stdout).into_owned(),
        String::from_utf8_lossy(&o.stderr).into_owned(),
    )
}

fn data_rows(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(str::to_string)
        .collect()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn bands_at_one_tenth_gives_ten_bands() {
    let d = tempfile::tempdir().unwrap();
    let (code, _, err) = lstark(&["bands", "--alpha", "1/10", "--J", "1", "--kappas", "256"], d.path());
    assert_eq!(code, 0, "{err}");
    let rows = data_rows(&d.path().join("bands.csv"));
    assert_eq!(rows.len(), 2560);
    let bands: std::collections::BTreeSet<&str> = rows.iter().map(|r| r.split(',').nth(1).unwrap()).collect();
    assert_eq!(bands.len(), 10);
    let m = manifest(d.path());
    assert_eq!(m["subcommand"], "bands");
    let listed: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|o| o["path"].as_str().unwrap()).collect();
    assert_eq!(listed, ["bands.csv", "bands.json"]);
}

#[test]
fn zero_flux_is_a_single_band() {
    let d = tempfile::tempdir().unwrap();
    let (code, out, _) = lstark(&["bands", "--alpha", "0/1"], d.path());
    assert_eq!(code, 0);
    assert!(out.contains("1 bands"));
}

#[test]
fn manifest_hashes_match_files() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(lstark(&["bands", "--kappas", "8"], d.path()).0, 0);
    let m = landau_stark::manifest::RunManifest::read(&d.path().join("manifest.json")).unwrap();
    assert!(m.verify(d.path()).unwrap().is_empty());
}

#[test]
fn classical_caption_line() {
    let d = tempfile::tempdir().unwrap();
    let (code, _, err) = lstark(
        &["classical", "--alpha", "1/10", "--F", "0.02", "--EK", "-2J+wc/2", "--tfinal", "400Tc"],
        d.path(),
    );
    assert_eq!(code, 0, "{err}");
    let text = std::fs::read_to_string(d.path().join("trajectory.csv")).unwrap();
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "t,t_over_Tc,x,y,px,py,E_K,regime_label");
    let rows = data_rows(&d.path().join("trajectory.csv"));
    assert_eq!(rows.len(), 20001);
    let last: Vec<&str> = rows.last().unwrap().split(',').collect();
    assert!((last[1].parse::<f64>().unwrap() - 400.0).abs() < 1e-9);
    assert!(rows.iter().any(|r| r.ends_with("edge_right")));
    let ek0: f64 = rows[0].split(',').nth(6).unwrap().parse().unwrap();
    assert!((ek0 - (-2.0 + 0.1 * std::f64::consts::PI)).abs() < 1e-12);
    let m = manifest(d.path());
    assert_eq!(m["config"]["F"], 0.02);
}

#[test]
fn usage_errors_exit_64() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(lstark(&["bands", "--bogus"], d.path()).0, 64);
    assert_eq!(lstark(&["nosuch"], d.path()).0, 64);
}

#[test]
fn configuration_errors_exit_2() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(lstark(&["lss", "--F", "0"], d.path()).0, 2);
    assert_eq!(lstark(&["classical", "--EK", "-2K"], d.path()).0, 2);
    assert_eq!(lstark(&["--recipe", "fig9", "bands"], d.path()).0, 2);
    assert_eq!(lstark(&["evolve", "--mode", "drift"], d.path()).0, 2);
}

#[test]
fn numerical_failures_exit_3() {
    let d = tempfile::tempdir().unwrap();
    // window too small for the ladder at this field
    let (code, _, err) = lstark(&["ladder", "--F", "0.02", "--y-min", "-50", "--y-max", "50"], d.path());
    assert_eq!(code, 3, "{err}");
}

#[test]
fn config_file_sets_defaults_and_flags_win() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.cfg");
    std::fs::write(&cfg, "# bands only\nalpha = \"1/5\"\nkappas = 16\n").unwrap();
    let c = cfg.to_str().unwrap();
    let (code, out, _) = lstark(&["--config", c, "bands"], d.path());
    assert_eq!(code, 0);
    assert!(out.contains("5 bands"));
    let (code, out, _) = lstark(&["bands", "--config", c, "--alpha", "1/3"], d.path());
    assert_eq!(code, 0);
    assert!(out.contains("3 bands"));
    std::fs::write(&cfg, "EK = -1\n").unwrap();
    assert_eq!(lstark(&["--config", c, "bands"], d.path()).0, 2);
}

#[test]
fn lattice_config_file_is_accepted() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("lattice.cfg");
    std::fs::write(&cfg, "alpha = \"1/10\"\nJ = 1\nF = 0.2\nLx = 10\nbc_x = dirichlet\n").unwrap();
    let (code, out, err) = lstark(&["--config", cfg.to_str().unwrap(), "lss"], d.path());
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("10 states"));
}

#[test]
fn recipe_supplies_caption_parameters() {
    let d = tempfile::tempdir().unwrap();
    let (code, _, err) = lstark(&["--recipe", "fig4", "levelflow", "--count", "4"], d.path());
    assert_eq!(code, 0, "{err}");
    assert_eq!(manifest(d.path())["config"]["Lx"], 10);
    assert_eq!(data_rows(&d.path().join("levelflow.csv")).len(), 40);
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(lstark(&["levelflow", "--count", "6", "--threads", "1"], a.path()).0, 0);
    assert_eq!(lstark(&["levelflow", "--count", "6", "--threads", "3"], b.path()).0, 0);
    assert_eq!(manifest(a.path())["outputs"], manifest(b.path())["outputs"]);
}

#[test]
fn thread_count_from_environment() {
    let d = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_lstark"))
        .args(["levelflow", "--count", "3", "--out"])
        .arg(d.path())
        .env("HS_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success());
}
