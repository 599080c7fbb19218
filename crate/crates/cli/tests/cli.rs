use std::path::PathBuf;
use std::process::{Command, Output};

fn qsimcost(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsimcost"))
        .args(args)
        .env_remove("QSIMCOST_SEED")
        .output()
        .expect("binary runs")
}

fn scratch(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qsimcost-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn geometry_counts() {
    for (args, n) in [
        (vec!["geometry", "octahedron"], 6),
        (vec!["geometry", "snubcube"], 24),
        (vec!["geometry", "snubcube", "--unrotated"], 24),
        (vec!["geometry", "thomson", "--n", "5", "--restarts", "3"], 5),
    ] {
        let mut a = vec!["--json"];
        a.extend(args);
        let out = qsimcost(&a);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(json(&out)["vectors"].as_array().unwrap().len(), n);
    }
}

#[test]
fn malformed_input_exits_with_2() {
    let bad = scratch("bad.json", "{\"states\": [[0, 0, 1]], \"povms\": ");
    let out = qsimcost(&[
        "witness",
        "visibility",
        "--scenario",
        bad.to_str().unwrap(),
        "--dc",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let missing = qsimcost(&["simulate", "pm", "--state", "/nonexistent/state.json", "--povm", "z"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn same_seed_same_report() {
    let args = [
        "--json",
        "--seed",
        "0x1234",
        "simulate",
        "pm",
        "--state",
        "0.6,0,0.8",
        "--povm",
        "trine",
        "--rounds",
        "20000",
    ];
    let a = qsimcost(&args);
    let b = qsimcost(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = Command::new(env!("CARGO_BIN_EXE_qsimcost"))
        .args(&args[..1])
        .args(&args[3..])
        .env("QSIMCOST_SEED", "0x1234")
        .output()
        .unwrap();
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn interactive_variant_matches_two_bit() {
    let base = [
        "--json", "simulate", "pm", "--state", "x+", "--povm", "trine", "--rounds", "5000",
    ];
    let two = json(&qsimcost(&[&base[..], &["--variant", "two-bit"]].concat()));
    let inter = json(&qsimcost(&[&base[..], &["--variant", "interactive"]].concat()));
    let counts = |v: &serde_json::Value| {
        v["cells"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| c["count"].as_u64().unwrap())
            .collect::<Vec<_>>()
    };
    assert_eq!(counts(&two), counts(&inter));
}

#[test]
fn uniform_behavior_is_classical_at_any_visibility() {
    let p = scratch(
        "uniform.json",
        r#"{"IA": 2, "IB": 2, "OB": 2, "p": [[[0.5, 0.5], [0.5, 0.5]], [[0.5, 0.5], [0.5, 0.5]]]}"#,
    );
    let out = qsimcost(&[
        "--json",
        "witness",
        "visibility",
        "--behavior",
        p.to_str().unwrap(),
        "--dc",
        "1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["unbounded"], serde_json::Value::Bool(true));
}

#[test]
fn classical_behavior_cannot_be_certified() {
    // Orthogonal-basis states with a single deterministic response are classical for any d_C.
    let scenario = scratch(
        "classical.json",
        r#"{"label": "c", "states": [[0, 0, 1], [0, 0, -1]],
            "povms": [{"elements": [{"p": 0.5, "y": [0, 0, 1]}, {"p": 0.5, "y": [0, 0, -1]}]}]}"#,
    );
    let witness = scratch(
        "w.json",
        r#"{"dC": 2, "gamma": [[[1, -1]], [[-1, 1]]], "bound": 2, "convention": "bound"}"#,
    );
    let out = qsimcost(&[
        "certify",
        "--scenario",
        scenario.to_str().unwrap(),
        "--witness",
        witness.to_str().unwrap(),
        "--denominator",
        "1000",
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn guard_exit_code() {
    let out = qsimcost(&[
        "witness",
        "visibility",
        "--preset",
        "snubcube",
        "--dc",
        "3",
        "--side",
        "bob",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
