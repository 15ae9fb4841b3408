mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::{planted_spec, write_fixture, PLANTED_CONFIG};

fn piks(args: &[&str], config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_piks"))
        .args(args)
        .arg("--config")
        .arg(config)
        .output()
        .expect("spawn piks")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn every_subcommand_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_fixture(dir.path(), &planted_spec(), PLANTED_CONFIG);
    let out = dir.path().join("out");

    let o = piks(&["ingest-check"], &cfg);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("rows dropped  0"));
    assert!(stdout(&o).contains("Diagnosis: 60 values"));
    assert!(out.join("drops.log").is_file());

    let o = piks(&["rank-features"], &cfg);
    assert!(o.status.success());
    let ranking = std::fs::read_to_string(out.join("features.csv")).unwrap();
    assert!(ranking.starts_with("rank,feature,mutual_info,chi2"), "{ranking}");
    assert_eq!(ranking.lines().count(), 4);

    let o = piks(&["baseline"], &cfg);
    assert!(o.status.success());
    assert!(out.join("baseline_scores.csv").is_file());
    assert!(stdout(&o).contains("isolation_forest"));

    let o = piks(&["compare"], &cfg);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("piks: DX 3"), "{text}");
    assert!(text.contains("jaccard(piks, isolation_forest) = 1.000"), "{text}");
    assert!(out.join("comparison.csv").is_file());

    let o = piks(&["run", "--threads", "2", "--no-prune"], &cfg);
    assert!(o.status.success());
    assert!(stdout(&o).contains("0 pruned"), "{}", stdout(&o));
    assert!(out.join("report.json").is_file());
}

#[test]
fn exit_codes_separate_validation_from_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_fixture(dir.path(), &planted_spec(), PLANTED_CONFIG);

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, PLANTED_CONFIG.replace("[piks]", "[piks]\nfeatures = [\"Diagnosis\", \"Sex\"]")).unwrap();
    let o = piks(&["run"], &bad);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("piks.features[1]"));

    std::fs::write(
        dir.path().join("data.csv"),
        "Diagnosis,Race,Region,Discharge Year,Total Costs\nDX 1,R 1,REG 1,2009,$1.00\nDX 1,R 1\n",
    )
    .unwrap();
    let o = piks(&["ingest-check"], &cfg);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains(":3:"), "{}", String::from_utf8_lossy(&o.stderr));
}
