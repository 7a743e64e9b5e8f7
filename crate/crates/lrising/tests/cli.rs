use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lrising::manifest::{ResultManifest, MANIFEST_FILE};

const SMALL: &str = r#"
[model]
size = 5
gamma = 10.8
fields = [0.24, 0.5]

[states]
count = 4

[dynamics]
t_max = 3.0
dt = 0.25
observables = ["sx2", "sz", "corr"]
average_times = [2.0]
shots = 200

[ensembles]
temperatures = [0.5, 1.0, 2.0]

[mc]
sizes = [8, 16]
temperatures = [0.6, 0.8, 1.0, 1.2, 1.4]
measurements = 2000
"#;

fn lrising(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lrising")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn run_in(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    lrising(&args)
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn files(dir: &Path) -> BTreeSet<String> {
    fn walk(root: &Path, d: &Path, acc: &mut BTreeSet<String>) {
        for e in std::fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, acc);
            } else {
                acc.insert(p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/"));
            }
        }
    }
    let mut acc = BTreeSet::new();
    walk(dir, dir, &mut acc);
    acc
}

fn config_error(text_: &str, needle: &str) {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), text_);
    let out = lrising(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", text(&out.stderr));
    assert!(text(&out.stderr).contains(needle), "expected `{needle}` in: {}", text(&out.stderr));
}

#[test]
fn unknown_key_is_a_config_error() {
    config_error("[model]\nsize = 5\ngamma = 1.0\nfields = [0.1]\nsizee = 3\n", "sizee");
}

#[test]
fn exact_cap_applies_with_ensembles() {
    config_error("[model]\nsize = 20\ngamma = 10.8\nfields = [0.3]\n[ensembles]\n", "14");
}

#[test]
fn ion_derived_needs_an_ionchain_block() {
    config_error("[model]\nsize = 13\ngamma = 10.8\nfields = [0.3]\nprovenance = \"ion-derived\"\n", "ionchain");
}

#[test]
fn bad_flags_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[model]\nsize = 5\ngamma = 10.8\nfields = [0.3]\n");
    let out = tmp.path().join("out");
    assert_eq!(lrising(&["couplings"]).status.code(), Some(2));
    assert_eq!(run_in(&cfg, &out, &["couplings", "--jobs", "0"]).status.code(), Some(2));
    assert_eq!(run_in(&cfg, &out, &["render", "--kind", "pie"]).status.code(), Some(2));
    assert_eq!(run_in(&cfg, &out, &["mc"]).status.code(), Some(2));
    assert_eq!(lrising(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn scan_config_plans_54_quenches() {
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/scan_l13.toml");
    let out = lrising(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", text(&out.stderr));
    assert!(text(&out.stdout).contains("quench tasks: 54 (6 fields x 9 states)"), "{}", text(&out.stdout));
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        let out = lrising(&["validate", "--config", p.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}: {}", p.display(), text(&out.stderr));
    }
}

#[test]
fn downstream_stages_report_missing_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("empty");
    for cmd in ["phase-diagram", "collapse", "render"] {
        let o = run_in(&cfg, &out, &[cmd]);
        assert_eq!(o.status.code(), Some(3), "{cmd}: {}", text(&o.stderr));
        assert!(text(&o.stderr).contains("missing input"), "{cmd}: {}", text(&o.stderr));
    }
}

#[test]
fn couplings_prints_the_matrix() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[model]\nsize = 5\ngamma = 10.8\nfields = [0.3]\n");
    let o = run_in(&cfg, &tmp.path().join("out"), &["couplings"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let s = text(&o.stdout);
    assert!(s.contains("J_ij / J:") && s.contains("distance profile"), "{s}");
}

fn strip_seconds(m: &mut ResultManifest) {
    for t in m.tasks.values_mut() {
        t.seconds = 0.0;
    }
}

#[test]
fn full_run_is_deterministic_cached_and_complete() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");

    let o = run_in(&cfg, &a, &["run"]);
    assert_eq!(o.status.code(), Some(0), "stderr: {}", text(&o.stderr));
    let o = run_in(&cfg, &b, &["run", "--jobs", "1"]);
    assert_eq!(o.status.code(), Some(0), "stderr: {}", text(&o.stderr));

    // identical outputs regardless of thread count
    let fa = files(&a);
    assert_eq!(fa, files(&b));
    for f in fa.iter().filter(|f| f.as_str() != MANIFEST_FILE) {
        assert!(std::fs::read(a.join(f)).unwrap() == std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let load = |d: &Path| -> ResultManifest {
        serde_json::from_str(&std::fs::read_to_string(d.join(MANIFEST_FILE)).unwrap()).unwrap()
    };
    let (mut ma, mut mb) = (load(&a), load(&b));
    strip_seconds(&mut ma);
    strip_seconds(&mut mb);
    assert_eq!(ma, mb);

    // every file is listed with its hash, and nothing listed is missing
    let listed: BTreeSet<String> = ma.all_outputs().into_iter().map(str::to_owned).collect();
    let on_disk: BTreeSet<String> = fa.iter().filter(|f| f.as_str() != MANIFEST_FILE).cloned().collect();
    assert_eq!(listed, on_disk);
    for t in ma.tasks.values() {
        for rec in &t.outputs {
            let bytes = std::fs::read(a.join(&rec.path)).unwrap();
            assert_eq!(lrising::manifest::sha256_hex(&bytes), rec.sha256, "{}", rec.path);
        }
    }

    // expected artifacts
    for f in [
        "couplings/couplings.csv",
        "ensemble/g0.24/ensemble.json",
        "mc/L8.csv",
        "mc/L16.csv",
        "phase/grid.json",
        "phase/critical_line.csv",
        "collapse/binder.csv",
        "figures/phase_diagram.svg",
        "figures/binder.svg",
    ] {
        assert!(fa.contains(f), "missing {f}");
    }
    for f in fa.iter().filter(|f| f.ends_with(".csv")) {
        let s = std::fs::read_to_string(a.join(f)).unwrap();
        assert!(s.starts_with("# schema-version: 1\n"), "{f}");
    }
    for f in fa.iter().filter(|f| f.ends_with(".svg")) {
        let s = std::fs::read_to_string(a.join(f)).unwrap();
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"), "{f}");
    }

    // a second run reuses everything; --force recomputes
    let o = run_in(&cfg, &a, &["quench"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(text(&o.stdout).contains("quench: 0 run, 8 cached"), "{}", text(&o.stdout));
    let o = run_in(&cfg, &a, &["quench", "--force"]);
    assert!(text(&o.stdout).contains("quench: 8 run, 0 cached"), "{}", text(&o.stdout));

    // a tampered output is recomputed
    let victim = a.join("mc/L8.csv");
    let good = std::fs::read(&victim).unwrap();
    std::fs::write(&victim, b"junk").unwrap();
    let o = run_in(&cfg, &a, &["mc"]);
    assert!(text(&o.stdout).contains("mc: 1 run, 1 cached"), "{}", text(&o.stdout));
    assert_eq!(std::fs::read(&victim).unwrap(), good);

    // a different seed changes Monte Carlo output
    let o = run_in(&cfg, &a, &["mc", "--seed", "99"]);
    assert_eq!(o.status.code(), Some(0));
    assert_ne!(std::fs::read(&victim).unwrap(), good);
}
