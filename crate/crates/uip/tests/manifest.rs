use uip::manifest::{digest, Manifest};

fn populated() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(dir.path().join("a")).unwrap();
    std::fs::write(dir.path().join("a/x.csv"), "t\n1\n").unwrap();
    std::fs::write(dir.path().join("y.json"), "{}").unwrap();
    dir
}

#[test]
fn verify_accepts_untouched_directory() {
    let dir = populated();
    let m = Manifest::write(dir.path(), "synth", 7, vec![]).unwrap();
    assert_eq!(m.files.keys().collect::<Vec<_>>(), ["a/x.csv", "y.json"]);
    assert_eq!(Manifest::verify(dir.path(), "synth").unwrap(), m);
}

#[test]
fn edited_file_is_reported_stale() {
    let dir = populated();
    Manifest::write(dir.path(), "synth", 7, vec![]).unwrap();
    std::fs::write(dir.path().join("a/x.csv"), "t\n2\n").unwrap();
    let e = Manifest::verify(dir.path(), "synth").unwrap_err();
    assert_eq!(e.exit_code(), 3);
    assert!(e.to_string().contains("a/x.csv") && e.to_string().contains("stale"), "{e}");
}

#[test]
fn missing_file_is_named() {
    let dir = populated();
    Manifest::write(dir.path(), "synth", 7, vec![]).unwrap();
    std::fs::remove_file(dir.path().join("y.json")).unwrap();
    let e = Manifest::verify(dir.path(), "synth").unwrap_err();
    assert!(e.to_string().contains("missing file `y.json`"), "{e}");
}

#[test]
fn wrong_stage_is_rejected() {
    let dir = populated();
    Manifest::write(dir.path(), "filter", 7, vec![]).unwrap();
    assert!(Manifest::verify(dir.path(), "synth").is_err());
}

#[test]
fn digest_does_not_depend_on_location() {
    let a = populated();
    let b = populated();
    Manifest::write(a.path(), "synth", 7, vec![]).unwrap();
    Manifest::write(b.path(), "synth", 7, vec![]).unwrap();
    assert_eq!(digest(a.path()).unwrap(), digest(b.path()).unwrap());
}
