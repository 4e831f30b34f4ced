mod support;

use std::time::Instant;
use support::*;

fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().expect("tempdir")
}

#[test]
fn slicing_a_cube_gives_five_layers() {
    let d = tmp();
    let cube = cube_stl(d.path());
    let r = loadpath(&["slice", cube.to_str().unwrap(), "--layer-height", "2"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let tp = json(&r.stdout);
    let mut layers: Vec<u64> = tp["segments"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["layer"].as_u64().unwrap())
        .collect();
    layers.dedup();
    assert_eq!(layers, vec![0, 1, 2, 3, 4]);
}

#[test]
fn stats_reproduces_the_long_print_figures() {
    let d = tmp();
    let cpl = write(d.path(), "tower.cpl", case4_cpl());
    let t0 = Instant::now();
    let r = loadpath(&["stats", cpl.to_str().unwrap()]);
    let dt = t0.elapsed();
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stderr.contains("mean segment 12.27 mm"), "{}", r.stderr);
    assert!(r.stderr.contains("mean speed 30.07 mm/s"), "{}", r.stderr);
    let s = json(&r.stdout);
    assert_eq!(s["move_count"], CASE4_MOVES);
    assert!((s["mean_segment"].as_f64().unwrap() - 12.27).abs() <= 0.01);
    assert!((s["mean_speed"].as_f64().unwrap() - 30.07).abs() <= 0.01);
    assert!(dt.as_secs_f64() < 1.0, "stats took {dt:?}");
}

#[test]
fn strict_analysis_of_a_leaning_tower_exits_3() {
    let d = tmp();
    let tp = write(d.path(), "tower.json", shifted_tower().to_json());
    let mat = fixture("material.json");
    let args = ["analyze", tp.to_str().unwrap(), "--material", mat.to_str().unwrap(), "--min-layer-time", "1"];
    let r = loadpath(&args);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(json(&r.stdout)["verdict"]["kind"] == "tipping", "{}", r.stderr);
    let mut strict = args.to_vec();
    strict.push("--strict");
    assert_eq!(loadpath(&strict).code, 3);
}

#[test]
fn plan_then_stats_keeps_extrude_length() {
    let d = tmp();
    let tp_path = d.path().join("vase.json");
    let vase = vase_stl(d.path());
    let sliced = loadpath(&["slice", vase.to_str().unwrap(), "--layer-height", "5", "--out", tp_path.to_str().unwrap()]);
    assert_eq!(sliced.code, 0, "{}", sliced.stderr);
    let tp = loadpath_core::geom::Toolpath::from_json(&std::fs::read_to_string(&tp_path).unwrap()).unwrap();
    let cpl = d.path().join("vase.cpl");
    let r = loadpath(&["plan", tp_path.to_str().unwrap(), "--max-segment", "7", "--out", cpl.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let s = json(&loadpath(&["stats", cpl.to_str().unwrap()]).stdout);
    assert!((s["extrude_length"].as_f64().unwrap() - tp.extrude_length()).abs() <= 1e-6 * tp.extrude_length().max(1.0));
}

#[test]
fn every_subcommand_is_reproducible() {
    let d = tmp();
    let p = |x: &std::path::Path| x.to_str().unwrap().to_string();
    let vase = vase_stl(d.path());
    let tower = write(d.path(), "tower.json", shifted_tower().to_json());
    let cpl = d.path().join("tower.cpl");
    assert_eq!(loadpath(&["plan".into(), p(&tower), "--out".into(), p(&cpl)]).code, 0);
    let mat = fixture("material.json");
    let runs: Vec<Vec<String>> = vec![
        vec!["slice".into(), p(&vase), "--layer-height".into(), "5".into(), "--shell".into(), "20".into(), "--infill-spacing".into(), "8".into()],
        vec!["slice".into(), p(&vase), "--layer-height".into(), "5".into(), "--spiral".into()],
        vec!["lsys".into(), p(&fixture("plant.lsys")), "--generations".into(), "1,2,3".into(), "--z-step".into(), "4".into()],
        vec!["weave".into(), p(&fixture("pentagram.json"))],
        vec!["plan".into(), p(&tower)],
        vec!["stats".into(), p(&cpl)],
        vec!["analyze".into(), p(&tower), "--material".into(), p(&mat)],
        vec!["simulate".into(), p(&cpl), "--faults".into(), "4".into(), "--seed".into(), "11".into()],
        vec!["simulate".into(), p(&cpl), "--pump-mode".into(), "legacy".into(), "--start-latency".into(), "0.3".into()],
        vec!["compensate".into(), p(&vase), "--material".into(), p(&mat), "--firing-temp".into(), "1000".into()],
    ];
    for args in runs {
        let a = loadpath(&args);
        let b = loadpath(&args);
        assert_eq!(a.code, 0, "{args:?}: {}", a.stderr);
        assert!(!a.stdout.is_empty(), "{args:?}");
        assert!(a.stdout == b.stdout, "{args:?} differs between runs");
    }
}

#[test]
fn random_faults_depend_on_the_seed() {
    let d = tmp();
    let cpl = write(d.path(), "p.cpl", case4_cpl());
    let c = cpl.to_str().unwrap();
    let a = loadpath(&["simulate", c, "--faults", "3", "--seed", "1"]);
    let b = loadpath(&["simulate", c, "--faults", "3", "--seed", "2"]);
    assert_eq!(a.code, 0, "{}", a.stderr);
    assert_ne!(a.stdout, b.stdout);
    assert_eq!(json(&a.stdout)["underextruded_spans"].as_array().unwrap().len(), 3);
}

#[test]
fn compensation_scales_the_mesh() {
    let d = tmp();
    let cube = cube_stl(d.path());
    let out = d.path().join("big.stl");
    let r = loadpath(&["compensate", cube.to_str().unwrap(), "--shrinkage", "0.2", "--out", out.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let bytes = std::fs::read(out).unwrap();
    let m = loadpath_core::geom::load_mesh(&bytes, loadpath_core::geom::MeshFormat::StlBinary).unwrap();
    assert!((m.bbox.size().x - 12.5).abs() < 1e-4);
    assert_eq!(loadpath(&["compensate", cube.to_str().unwrap(), "--shrinkage", "1.2"]).code, 2);
}

#[test]
fn usage_and_input_errors_have_distinct_codes() {
    let d = tmp();
    assert_eq!(loadpath::<&str>(&[]).code, 1);
    assert_eq!(loadpath(&["slice"]).code, 1);
    assert_eq!(loadpath(&["stats", "x.cpl", "--bogus"]).code, 1);
    assert_eq!(loadpath(&["frobnicate"]).code, 1);
    assert_eq!(loadpath(&["--help"]).code, 0);
    let bad = write(d.path(), "bad.cpl", "MOVE 1 2\n");
    let r = loadpath(&["stats", bad.to_str().unwrap()]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("arity mismatch at line 1"), "{}", r.stderr);
    let open = write(d.path(), "tri.stl", "solid t\nfacet normal 0 0 1\nouter loop\nvertex 0 0 0\nvertex 1 0 0\nvertex 0 1 0\nendloop\nendfacet\nendsolid t\n");
    let r = loadpath(&["slice", open.to_str().unwrap(), "--layer-height", "1"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("non-watertight mesh"), "{}", r.stderr);
}

#[test]
fn serve_streams_to_the_virtual_printer() {
    let d = tmp();
    let cpl = write(d.path(), "p.cpl", "EXT ON 2.000000\nMOVE 10.000000 0.000000 0.000000 30.000000 E\nMOVE 10.000000 10.000000 0.000000 30.000000 E\nEXT OFF\n");
    let r = loadpath(&["serve", cpl.to_str().unwrap(), "--listen", "127.0.0.1:0", "--autostart", "--window", "2"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stderr.contains("virtual printer executed 4 lines"), "{}", r.stderr);
    assert!(r.stderr.contains("session ended done"), "{}", r.stderr);
}
