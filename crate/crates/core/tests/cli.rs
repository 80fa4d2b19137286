use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_credit-ri"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.conf");
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

const SYNTHETIC: &str = "synth.n = 1500\nsynth.k = 8\nsynth.good_rate = 0.85\nseed = 17\nout.dir = out\n";

#[test]
fn synthetic_run_writes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SYNTHETIC);
    let out = run(&["run", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out_dir = dir.path().join("out");
    for f in ["report.csv", "curves.csv", "selection.txt", "plot.svg"] {
        assert!(out_dir.join(f).is_file(), "{f} missing");
    }
    let models: Vec<_> = std::fs::read_dir(out_dir.join("models")).unwrap().collect();
    assert_eq!(models.len(), 5);

    let curves = std::fs::read_to_string(out_dir.join("curves.csv")).unwrap();
    assert!(curves.starts_with("technique,set,acceptance_rate,default_rate,std_error,accepted\n"));
    let selection = std::fs::read_to_string(out_dir.join("selection.txt")).unwrap();
    assert!(selection.starts_with("selected "));
    assert!(selection.contains("master_seed 17\n"));
}

#[test]
fn plot_is_well_formed_svg() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SYNTHETIC);
    assert!(run(&["run", "--config", &cfg]).status.success());
    let svg = std::fs::read_to_string(dir.path().join("out/plot.svg")).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    let class_count = |c: &str| doc.descendants().filter(|n| n.attribute("class") == Some(c)).count();
    assert_eq!(class_count("curve"), 2 * 5);
    assert_eq!(class_count("whisker"), 2 * 5 * 11);
    let legend = doc
        .descendants()
        .find(|n| n.attribute("class") == Some("legend"))
        .unwrap();
    let entries = legend.children().filter(|n| n.has_tag_name("text")).count();
    assert_eq!(entries, 5);
}

#[test]
fn rerun_is_byte_identical_and_seed_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SYNTHETIC);
    let report = dir.path().join("out/report.csv");
    assert!(run(&["run", "--config", &cfg]).status.success());
    let first = std::fs::read(&report).unwrap();
    assert!(run(&["run", "--config", &cfg]).status.success());
    assert_eq!(std::fs::read(&report).unwrap(), first);

    let other = dir.path().join("other");
    let other_s = other.display().to_string();
    assert!(run(&["run", "--config", &cfg, "--out", &other_s, "--seed", "18"])
        .status
        .success());
    assert_ne!(std::fs::read(other.join("report.csv")).unwrap(), first);
    let selection = std::fs::read_to_string(other.join("selection.txt")).unwrap();
    assert!(selection.contains("master_seed 18\n"));

    let same_seed = dir.path().join("same");
    let same_s = same_seed.display().to_string();
    assert!(run(&["run", "--config", &cfg, "--out", &same_s, "--seed", "17"])
        .status
        .success());
    assert_eq!(std::fs::read(same_seed.join("report.csv")).unwrap(), first);
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = tempfile::tempdir().unwrap();
    let missing = write_config(dir.path(), "data.path = nowhere.csv\nseed = 1\n");
    let out = run(&["run", "--config", &missing]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere.csv"));

    let bad = write_config(dir.path(), "synth.n = 100\nseed = 1\noperating.a = 1.5\n");
    let out = run(&["run", "--config", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("operating.a"));

    let out = run(&["run", "--config", &dir.path().join("absent.conf").display().to_string()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn csv_source_runs_with_restricted_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("income,region,outcome,decision\n");
    for i in 0..800 {
        let income = (i * 37 % 101) as f64 / 10.0;
        let region = ["north", "south", "east"][i % 3];
        let good = u8::from(income + (i % 7) as f64 > 4.0);
        let accepted = u8::from(i % 19 != 0);
        let y = if accepted == 1 { good.to_string() } else { String::new() };
        csv.push_str(&format!("{income},{region},{y},{accepted}\n"));
    }
    std::fs::write(dir.path().join("applicants.csv"), csv).unwrap();
    let cfg = write_config(
        dir.path(),
        "data.path = applicants.csv\ndata.decision = decision\ntechniques = extrapolation, augmentation, parcelling\nseed = 4\nplot = false\n",
    );
    let out = run(&["run", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let selection = std::fs::read_to_string(dir.path().join("out/selection.txt")).unwrap();
    assert!(selection.contains("evaluation accepted-only\n"));
    assert!(!dir.path().join("out/plot.svg").exists());
}
