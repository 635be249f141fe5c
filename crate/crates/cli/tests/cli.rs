use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn canonical() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/canonical")
}

fn rosetta<S: AsRef<std::ffi::OsStr>>(args: &[S]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rosetta")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn validate_canonical_is_clean() {
    let tmp = tempfile::tempdir().unwrap();
    let o = rosetta(&["validate", "--registry", p(&canonical()), "--out", p(tmp.path())]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("0 errors, 0 warnings"), "{}", stdout(&o));
    let manifest = fs::read_to_string(tmp.path().join("manifest.json")).unwrap();
    assert!(manifest.contains("\"canonical/crosswalk.tsv\""));
    assert!(!manifest.contains("workers"));
}

#[test]
fn validate_reports_broken_registry() {
    let tmp = tempfile::tempdir().unwrap();
    let reg = tmp.path().join("reg");
    copy_dir(&canonical(), &reg);
    let cw = reg.join("crosswalk.tsv");
    let text = fs::read_to_string(&cw).unwrap();
    // invert the first answer map: codes now fall as choices rise
    let broken: String = text
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i == first_data_line(&text) {
                let mut f: Vec<String> = l.split('\t').map(String::from).collect();
                let entries: Vec<&str> = f[4].split(',').collect();
                let codes: Vec<&str> = entries.iter().map(|e| e.split_once(':').unwrap().1).rev().collect();
                f[4] = entries
                    .iter()
                    .zip(codes)
                    .map(|(e, c)| format!("{}:{c}", e.split_once(':').unwrap().0))
                    .collect::<Vec<_>>()
                    .join(",");
                f.join("\t") + "\n"
            } else {
                format!("{l}\n")
            }
        })
        .collect();
    fs::write(&cw, broken).unwrap();
    let o = rosetta(&["validate", "--registry", p(&reg)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("answer-monotone"), "{}", stdout(&o));
}

fn first_data_line(text: &str) -> usize {
    text.lines()
        .position(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .unwrap()
}

fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let path = entry.unwrap().path();
        let target = to.join(path.file_name().unwrap());
        if path.is_dir() {
            copy_dir(&path, &target);
        } else {
            fs::copy(&path, &target).unwrap();
        }
    }
}

#[test]
fn stats_writes_leaf_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let o = rosetta(&["stats", "--registry", p(&canonical()), "--out", p(tmp.path())]);
    assert_eq!(o.status.code(), Some(0));
    let leaf = fs::read_to_string(tmp.path().join("leaf_stats.csv")).unwrap();
    assert!(leaf.contains("Cognitive/Behavioral/Emotional,Adaptability,6,32,4\n"));
    assert!(leaf.contains("Cognitive/Behavioral/Social,Conduct,4,100,14\n"));
    for f in [
        "global_stats.csv",
        "overlap_matrix.csv",
        "overlap_long.csv",
        "manifest.json",
    ] {
        assert!(tmp.path().join(f).exists(), "{f}");
    }
}

#[test]
fn synth_is_reproducible_for_a_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let out = tmp.path().join(name);
        let o = rosetta(&[
            "synth",
            "--registry",
            p(&canonical()),
            "--out",
            p(&out),
            "--seed",
            seed,
            "--counts",
            "30,10,10",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        (
            fs::read(out.join("records.tsv")).unwrap(),
            fs::read(out.join("manifest.json")).unwrap(),
        )
    };
    let a = run("a", "7");
    let b = run("b", "7");
    let c = run("c", "8");
    assert_eq!(a, b);
    assert_ne!(a.0, c.0);
}

#[test]
fn render_fills_placeholders() {
    let o = rosetta(&[
        "render",
        "--registry",
        p(&canonical()),
        "--id",
        "R-adaptability-1",
        "--name",
        "Alex",
        "--gender",
        "female",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(
        text.contains("Alex") && text.contains(" her ") && !text.contains('['),
        "{text}"
    );
}

#[test]
fn exit_codes() {
    assert_eq!(rosetta(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(rosetta(&["stats", "--registry"]).status.code(), Some(2));
    let missing = rosetta(&["validate", "--registry", "/nonexistent/registry"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(!missing.stderr.is_empty());
    let help = rosetta(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    for cmd in ["validate", "stats", "fuse", "synth", "train", "eval", "cv", "render"] {
        assert!(stdout(&help).contains(cmd), "{cmd}");
    }
}
