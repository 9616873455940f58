//! Batch commands: exit codes, outputs and flag/config precedence.

use std::fs;
use std::path::{Path, PathBuf};

use crossel_cli::run_from;
use serde_json::Value;
use tempfile::TempDir;

fn scene_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets/surface_studio.json")
}

fn run(args: &[&str]) -> i32 {
    run_from(std::iter::once("crossel").chain(args.iter().copied()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Two clusters under the surface, a scripted lasso and a 32^3 field.
fn pipeline(dir: &Path) -> (PathBuf, PathBuf) {
    let scene = scene_path();
    let g = dir.join("g");
    assert_eq!(
        run(&[
            "gen", "--kind", "clusters", "--k", "2", "--n", "1500", "--seed", "7", "--scene", s(&scene), "--trace-kind",
            "lasso_around_cluster", "-o", s(&g),
        ]),
        0
    );
    let field = dir.join("field.xrdf");
    assert_eq!(
        run(&["estimate", "--cloud", s(&g.join("cloud.csv")), "--scene", s(&scene), "--grid", "32", "-o", s(&field)]),
        0
    );
    (g, field)
}

fn select(dir: &Path, g: &Path, field: &Path, technique: &str, out: &str) -> i32 {
    run(&[
        "select",
        "--field",
        s(field),
        "--scene",
        s(&scene_path()),
        "--trace",
        s(&g.join("trace.json")),
        "--cloud",
        s(&g.join("cloud.csv")),
        "--technique",
        technique,
        "-o",
        s(&dir.join(out)),
    ])
}

#[test]
fn full_pipeline_selects_target_cluster() {
    let dir = TempDir::new().unwrap();
    let (g, field) = pipeline(dir.path());
    assert_eq!(select(dir.path(), &g, &field, "brush-lasso", "sel.json"), 0);
    let sel: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("sel.json")).unwrap()).unwrap();
    assert_eq!(sel["technique"], "brush-lasso");
    assert!(sel["rho0"].as_f64().unwrap() > 0.0);
    assert!(!sel["selected_points"].as_array().unwrap().is_empty());
    let obj = fs::read_to_string(dir.path().join("sel.obj")).unwrap();
    assert!(obj.lines().any(|l| l.starts_with("f ")));

    let metrics = dir.path().join("m.json");
    let code = run(&[
        "eval",
        "--selection",
        s(&dir.path().join("sel.json")),
        "--labels",
        s(&g.join("labels.csv")),
        "--label",
        "1",
        "-o",
        s(&metrics),
    ]);
    assert_eq!(code, 0);
    let m: Value = serde_json::from_str(&fs::read_to_string(metrics).unwrap()).unwrap();
    assert!(m["f1"].as_f64().unwrap() > 0.9, "{m}");
}

#[test]
fn eval_self_and_disjoint() {
    let dir = TempDir::new().unwrap();
    let labels = dir.path().join("labels.csv");
    fs::write(&labels, "label\n1\n1\n2\n0\n").unwrap();
    let write_sel = |name: &str, points: &[usize]| {
        let p = dir.path().join(name);
        let doc = serde_json::json!({
            "technique": "brush", "rho0": 1.0, "selected_points": points, "node_count": 1, "N_VCR": 1
        });
        fs::write(&p, doc.to_string()).unwrap();
        p
    };
    let eval = |sel: &Path, label: &str, out: &Path| {
        run(&["eval", "--selection", s(sel), "--labels", s(&labels), "--label", label, "-o", s(out)])
    };
    let f1 = |out: &Path| -> f64 {
        let m: Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
        m["f1"].as_f64().unwrap()
    };
    let out = dir.path().join("m.json");
    assert_eq!(eval(&write_sel("self.json", &[0, 1]), "1", &out), 0);
    assert_eq!(f1(&out), 1.0);
    assert_eq!(eval(&write_sel("disjoint.json", &[2, 3]), "1", &out), 0);
    assert_eq!(f1(&out), 0.0);
    // unknown label and out-of-range index are label mismatches
    assert_eq!(eval(&write_sel("self.json", &[0, 1]), "9", &out), 2);
    assert_eq!(eval(&write_sel("far.json", &[0, 17]), "1", &out), 2);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(run(&["gen", "--kind", "bogus", "-o", s(&d.join("x"))]), 2);
    assert_eq!(run(&["frobnicate"]), 2);
    assert_eq!(run(&["estimate", "--scene", s(&scene_path())]), 2);

    // duplicate pairs: zero nearest-neighbour distance, zero pilot bandwidth
    let dup = d.join("dup.csv");
    fs::write(&dup, "x,y,z\n0.1,-0.1,-0.05\n0.1,-0.1,-0.05\n-0.1,0.1,-0.15\n-0.1,0.1,-0.15\n").unwrap();
    assert_eq!(
        run(&["estimate", "--cloud", s(&dup), "--scene", s(&scene_path()), "--grid", "16", "-o", s(&d.join("f"))]),
        3
    );

    let (g, field) = pipeline(d);
    let missing = run(&[
        "select", "--field", s(&field), "--scene", s(&scene_path()), "--trace", s(&d.join("nope.json")), "--technique",
        "brush", "-o", s(&d.join("o.json")),
    ]);
    assert_eq!(missing, 2);

    // an air-only stroke gives a cloud lasso nothing to enclose
    let air = d.join("air.json");
    fs::write(&air, r#"{"samples":[{"p":[0.0,0.0,0.3],"t":0.0,"source":"hand"},{"p":[0.01,0.0,0.3],"t":0.1,"source":"hand"}]}"#)
        .unwrap();
    let empty = run(&[
        "select", "--field", s(&field), "--scene", s(&scene_path()), "--trace", s(&air), "--technique", "cloud-lasso",
        "-o", s(&d.join("o.json")),
    ]);
    assert_eq!(empty, 4);

    let blocked = d.join("file");
    fs::write(&blocked, "").unwrap();
    let unwritable = run(&[
        "select", "--field", s(&field), "--scene", s(&scene_path()), "--trace", s(&g.join("trace.json")), "--technique",
        "brush-lasso", "-o", s(&blocked.join("sel.json")),
    ]);
    assert_eq!(unwritable, 5);
}

#[test]
fn gen_is_reproducible() {
    let dir = TempDir::new().unwrap();
    for out in ["a", "b"] {
        let o = dir.path().join(out);
        assert_eq!(run(&["gen", "--kind", "filaments", "--k", "2", "--n", "400", "--seed", "3", "-o", s(&o)]), 0);
    }
    for f in ["cloud.csv", "labels.csv", "spines.json"] {
        assert_eq!(fs::read(dir.path().join("a").join(f)).unwrap(), fs::read(dir.path().join("b").join(f)).unwrap());
    }
    let c = dir.path().join("c");
    assert_eq!(run(&["gen", "--kind", "filaments", "--k", "2", "--n", "400", "--seed", "4", "-o", s(&c)]), 0);
    assert_ne!(fs::read(dir.path().join("a/cloud.csv")).unwrap(), fs::read(c.join("cloud.csv")).unwrap());
}

#[test]
fn flags_override_config() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"kind": "shell", "n": 300, "seed": 1, "output": "from_config"}"#).unwrap();
    assert_eq!(run(&["gen", "--config", s(&cfg)]), 0);
    let labels = fs::read_to_string(dir.path().join("from_config/labels.csv")).unwrap();
    assert_eq!(labels.lines().count(), 301);

    let out = dir.path().join("flag");
    assert_eq!(run(&["gen", "--config", s(&cfg), "--n", "120", "-o", s(&out)]), 0);
    assert_eq!(fs::read_to_string(out.join("labels.csv")).unwrap().lines().count(), 121);

    fs::write(&cfg, r#"{"nonsense": 1}"#).unwrap();
    assert_eq!(run(&["gen", "--config", s(&cfg)]), 2);
}
