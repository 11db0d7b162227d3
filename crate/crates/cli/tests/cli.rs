use gammakit_cli::{list_experiments, run, ExperimentConfig, Overrides, Verdict};
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gammakit"))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn config(json: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(json).unwrap()
}

#[test]
fn catalog_has_twelve_anchored_experiments() {
    let cat = list_experiments();
    assert_eq!(cat.len(), 12);
    assert!(cat.iter().all(|e| !e.anchors.is_empty() && !e.description.is_empty()));
    let names: Vec<&str> = cat.iter().map(|e| e.name).collect();
    for n in [
        "gamma",
        "ibp-check",
        "poincare",
        "sudakov",
        "slepian",
        "concentration",
        "perturbation",
        "fbm-sde",
        "sk-free-energy",
        "sk-generic-bound",
        "sk-gamma-bound",
        "sk-convergence",
    ] {
        assert!(names.contains(&n), "{n}");
    }
    assert_eq!(list_experiments(), list_experiments());
}

#[test]
fn list_subcommand_is_stable() {
    let a = bin().args(["list", "--json"]).output().unwrap();
    let b = bin().args(["list", "--json"]).output().unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 12);
}

#[test]
fn ibp_on_first_chaos() {
    let c = config(
        r#"{"command":"ibp-check","seed":5,"mehler":{"quad_nodes":8,"mc_samples":8},
            "params":{"dim":1,"f":"w0","g":"w0","phi":["identity"],"n_outer":4000}}"#,
    );
    let r = run(&c, Overrides::default()).unwrap();
    assert_eq!(r.rows.len(), 1);
    let row = &r.rows[0];
    assert!((row.rhs - 1.0).abs() < 1e-12);
    assert!((row.lhs - 1.0).abs() < 4.0 * row.std_error);
    assert_eq!(row.verdict, Verdict::Pass);
    assert!(row.rule.contains("3 std errors"));
}

#[test]
fn two_spin_free_energy_closed_form() {
    let c = config(r#"{"command":"sk-free-energy","params":{"n":2,"beta":1.0,"couplings":[0.8]}}"#);
    let r = run(&c, Overrides::default()).unwrap();
    let closed = r.rows.iter().find(|r| r.name.contains("closed form")).unwrap();
    assert!((closed.lhs - 0.5 * 0.8f64.cosh().ln()).abs() < 1e-12);
    assert!(r.all_pass);
}

#[test]
fn errors_carry_config_paths() {
    let unknown = run(&config(r#"{"command":"nope"}"#), Overrides::default()).unwrap_err();
    assert!(format!("{unknown:#}").contains("`command`"));
    let bad_expr = run(
        &config(r#"{"command":"ibp-check","params":{"dim":1,"f":"w0 +","g":"w0","n_outer":10}}"#),
        Overrides::default(),
    )
    .unwrap_err();
    assert!(format!("{bad_expr:#}").contains("params.f"), "{bad_expr:#}");
    let out_of_range = run(
        &config(r#"{"command":"ibp-check","params":{"dim":1,"f":"w3","g":"w0","n_outer":10}}"#),
        Overrides::default(),
    )
    .unwrap_err();
    assert!(format!("{out_of_range:#}").contains("params.f"));
    let typo = run(
        &config(r#"{"command":"ibp-check","params":{"dim":1,"f":"w0","g":"w0","n_outr":10}}"#),
        Overrides::default(),
    )
    .unwrap_err();
    assert!(format!("{typo:#}").contains("params"), "{typo:#}");
    let dims = run(
        &config(r#"{"command":"concentration","params":{"dim":1,"field":["w0"],"c":[[1,0],[0,1]],"x":[1],"n_outer":10,"n_psd":1}}"#),
        Overrides::default(),
    )
    .unwrap_err();
    assert!(format!("{dims:#}").to_lowercase().contains("dimension"), "{dims:#}");
}

#[test]
fn exit_status_contract() {
    let dir = tempfile::tempdir().unwrap();
    let pass = dir.path().join("pass.json");
    std::fs::write(&pass, r#"{"command":"sk-free-energy","params":{"n":2,"beta":1.0,"couplings":[0.3]}}"#).unwrap();
    let st = bin().args(["run", "--config"]).arg(&pass).output().unwrap();
    assert_eq!(st.status.code(), Some(0));

    // the Γ ordering is reversed, so the smart-path condition rows fail
    let fail = dir.path().join("fail.json");
    std::fs::write(
        &fail,
        r#"{"command":"slepian","seed":1,"mehler":{"quad_nodes":8,"mc_samples":8},
            "params":{"dim":2,"f":["0.5*w0"],"g":["w1"],"function":{"kind":"quadratic","matrix":[[1]]},
                      "ts":[0.5],"n_outer":500,"n_direct":1000}}"#,
    )
    .unwrap();
    let st = bin().args(["run", "--config"]).arg(&fail).output().unwrap();
    assert_eq!(st.status.code(), Some(1));

    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, r#"{"command":"gamma","params":{"dim":1}}"#).unwrap();
    let st = bin().args(["run", "--config"]).arg(&broken).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&st.stderr).contains("params"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["ibp-check", "sk-generic-bound", "fbm-sde"] {
        let cfg = configs_dir().join(format!("{name}.json"));
        let mut outputs = Vec::new();
        for k in 0..2 {
            let out = dir.path().join(format!("{name}-{k}"));
            let st = bin()
                .args(["run", "--workers", "2", "--config"])
                .arg(&cfg)
                .arg("--out")
                .arg(&out)
                .output()
                .unwrap();
            assert!(st.status.code().is_some_and(|c| c <= 1), "{name}: {}", String::from_utf8_lossy(&st.stderr));
            let mut files: Vec<_> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
            files.sort();
            outputs.push(files.iter().map(|f| std::fs::read(f).unwrap()).collect::<Vec<_>>());
        }
        assert_eq!(outputs[0], outputs[1], "{name}");
    }
}

#[test]
fn seed_override_changes_monte_carlo_output() {
    let c = config(
        r#"{"command":"ibp-check","seed":1,"mehler":{"quad_nodes":8,"mc_samples":8},
            "params":{"dim":1,"f":"w0","g":"w0","phi":["identity"],"n_outer":200}}"#,
    );
    let a = run(&c, Overrides::default()).unwrap();
    let b = run(&c, Overrides { seed: Some(2), workers: None }).unwrap();
    assert_eq!(b.seed, 2);
    assert_ne!(a.rows[0].lhs, b.rows[0].lhs);
}

#[test]
fn worker_count_does_not_change_results() {
    let c = config(
        r#"{"command":"sk-generic-bound","seed":3,
            "params":{"families":[{"family":"clt-chaos2","m":2}],"ladder":[6],"beta":1.0,"n_media":40}}"#,
    );
    let a = run(&c, Overrides { seed: None, workers: Some(1) }).unwrap();
    let b = run(&c, Overrides { seed: None, workers: Some(3) }).unwrap();
    assert_eq!(a.rows, b.rows);
}

#[test]
fn shipped_configs_run_and_pass() {
    let mut seen = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        let c = ExperimentConfig::load(&path).unwrap();
        let r = run(&c, Overrides::default()).unwrap();
        assert!(!r.rows.is_empty(), "{}", path.display());
        assert!(r.all_pass, "{}: {:?}", path.display(), r.rows.iter().filter(|r| r.verdict == Verdict::Fail).collect::<Vec<_>>());
        seen += 1;
    }
    assert_eq!(seen, 12);
}

#[test]
fn csv_and_json_agree() {
    let c = config(r#"{"command":"sk-free-energy","params":{"n":3,"beta":0.5,"couplings":[0.1,-0.2,0.3]}}"#);
    let r = run(&c, Overrides::default()).unwrap();
    let csv = r.rows_csv().unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "name,lhs,rhs,std_error,verdict,rule");
    assert_eq!(lines.count(), r.rows.len());
    let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["rows"].as_array().unwrap().len(), r.rows.len());
}
