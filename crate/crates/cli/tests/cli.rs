use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn radiosync(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_radiosync"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn ceil_log2(n: u64) -> u64 {
    (0..).find(|&l| 1u64 << l >= n).unwrap()
}

/// Smallest k with k^2 m >= 8n.
fn k_of(n: u64, m: u64) -> u64 {
    (1..).find(|&k| k * k * m >= 8 * n).unwrap()
}

#[test]
fn synchronize_with_flatten_and_continuity_checks() {
    let out = radiosync(&[
        "--algorithm",
        "synchronize",
        "--n",
        "64",
        "--m",
        "8",
        "--wake",
        "uniform",
        "--check",
        "lemma3.4,lemma3.6",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = json(&out);
    assert_eq!(r["completed"], true);
    assert_eq!(r["k"], 8);
    assert_eq!(r["checks"].as_array().unwrap().len(), 2);
}

#[test]
fn dynamic_with_its_suite() {
    let out = radiosync(&[
        "--algorithm",
        "dynamic",
        "--n",
        "64",
        "--m",
        "8",
        "--wake",
        "random",
        "--seed",
        "7",
        "--check",
        "lemma3.8",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = json(&out);
    assert!(r["energy"]["max"].as_u64().unwrap() <= 4 * 8 + 2);
}

#[test]
fn zero_window_is_a_config_error() {
    let out = radiosync(&["--n", "0", "--m", "3"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("n must be ≥ 1"), "{}", stderr(&out));
}

#[test]
fn unknown_flags_and_checks_are_errors() {
    assert_eq!(code(&radiosync(&["--n", "8", "--m", "2", "--verbose"])), 2);
    let out = radiosync(&["--n", "8", "--m", "2", "--check", "lemma9.9"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("lemma9.9"));
    assert_eq!(code(&radiosync(&["--n", "8"])), 2);
}

#[test]
fn failed_check_exits_one_and_names_it() {
    let dir = TempDir::new().unwrap();
    let wakes = write(&dir, "w.txt", "0\n0\n");
    let out = radiosync(&[
        "--algorithm",
        "synchronize",
        "--n",
        "2",
        "--wake",
        &format!("explicit:{wakes}"),
        "--check",
        "lemma3.6",
    ]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("lemma3.6"), "{}", stderr(&out));
    assert_eq!(json(&out)["completed"], true);
}

#[test]
fn output_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let out = radiosync(&[
            "--algorithm",
            "synchronize",
            "--n",
            "200",
            "--m",
            "12",
            "--wake",
            "random",
            "--seed",
            "3",
            "--check",
            "monotone,lemma3.3",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        assert!(out.stdout.is_empty());
        fs::read(path).unwrap()
    };
    assert_eq!(run("a.json"), run("b.json"));
}

#[test]
fn trace_csv_lists_every_tick() {
    let dir = TempDir::new().unwrap();
    let trace = dir.path().join("t.csv");
    let out = radiosync(&[
        "--algorithm",
        "naive",
        "--n",
        "5",
        "--m",
        "2",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let end = json(&out)["end"].as_u64().unwrap();
    let mut rdr = csv::Reader::from_path(&trace).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["tick", "radio_on", "tau_1", "tau_2"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len() as u64, end);
    // Uniform wakes 0 and 5; both listen from their wake-up for 6 ticks.
    assert_eq!(&rows[0][1], "1");
    assert_eq!(&rows[5][1], "1 2");
    assert_eq!(&rows[5][2], &rows[5][3]);
}

fn sweep(algorithm: &str) -> Vec<csv::StringRecord> {
    let out = radiosync(&[
        "sweep",
        "--algorithm",
        algorithm,
        "--n",
        "64,256,1024",
        "--m",
        "4,16,64",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    assert_eq!(
        rdr.headers().unwrap(),
        vec!["n", "m", "k", "algorithm", "max_energy", "total_energy", "sync_tick"]
    );
    let rows: Vec<_> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 9);
    rows
}

fn field(r: &csv::StringRecord, i: usize) -> u64 {
    r[i].parse().unwrap()
}

#[test]
fn sweep_energy_stays_within_budgets() {
    for r in sweep("synchronize") {
        let (n, m, k) = (field(&r, 0), field(&r, 1), field(&r, 2));
        assert_eq!(k, k_of(n, m));
        assert!(field(&r, 4) <= (2 * k + 1) * (ceil_log2(n) + 1), "{r:?}");
    }
    for r in sweep("dynamic") {
        assert_eq!(&r[3], "dynamic");
        assert!(field(&r, 4) <= 4 * field(&r, 2) + 2, "{r:?}");
    }
    for r in sweep("naive") {
        assert_eq!(field(&r, 4), field(&r, 0) + 1);
    }
}

#[test]
fn probes_emit_json() {
    let out = radiosync(&["search", "--schedule", "11", "--schedule", "11", "--n", "9"]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["witness"]["certified"], true);

    let out = radiosync(&["search", "--schedule", "1111000", "--schedule", "1000100", "--n", "3"]);
    assert!(json(&out)["witness"].is_null());

    let out = radiosync(&["budget", "--n", "100", "--c-max", "20"]);
    let rows = json(&out);
    let defeated = |c: usize| {
        rows[c - 1]["results"]
            .as_array()
            .unwrap()
            .iter()
            .all(|r| !r["witness"].is_null())
    };
    assert!(defeated(3));
    assert!(!defeated(20));

    let out = radiosync(&["multi-hop", "--topology", "two-clique", "--m", "8", "--n", "64"]);
    let r = json(&out);
    assert_eq!(r["energy"]["sum"], 8 * 2 * 8);
    let edges = r["edges"].as_array().unwrap();
    assert_eq!(edges.len(), 13);
    assert!(edges.iter().all(|e| !e["first"].is_null()));

    let out = radiosync(&["overlap", "--k-max", "12"]);
    for row in json(&out).as_array().unwrap() {
        assert_eq!(row["first_disjoint"], row["len"]);
    }
}

#[test]
fn topology_files() {
    let dir = TempDir::new().unwrap();
    let edges = write(&dir, "e.txt", "# path\n1 2\n2 3\n");
    let out = radiosync(&[
        "--algorithm",
        "pairwise",
        "--n",
        "9",
        "--m",
        "3",
        "--topology",
        &format!("edges:{edges}"),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(json(&out)["energy"]["sum"], 3 * 2 * 3);

    let disk = write(&dir, "d.txt", "radius 5\n0 0\n3 4\n100 100\n");
    let out = radiosync(&[
        "--algorithm",
        "pairwise",
        "--n",
        "9",
        "--m",
        "3",
        "--topology",
        &format!("unit-disk:{disk}"),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let out = radiosync(&[
        "--algorithm",
        "synchronize",
        "--n",
        "9",
        "--m",
        "3",
        "--topology",
        &format!("edges:{edges}"),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("complete"));

    let bad = write(&dir, "bad.txt", "1 x\n");
    assert_eq!(
        code(&radiosync(&[
            "--algorithm",
            "naive",
            "--n",
            "9",
            "--m",
            "3",
            "--topology",
            &format!("edges:{bad}")
        ])),
        2
    );
    assert_eq!(
        code(&radiosync(&[
            "--n",
            "9",
            "--m",
            "3",
            "--topology",
            "edges:/nonexistent"
        ])),
        2
    );
}

#[test]
fn explicit_wakes_set_m() {
    let dir = TempDir::new().unwrap();
    let wakes = write(&dir, "w.txt", "4\n9\n7\n");
    let out = radiosync(&[
        "--algorithm",
        "naive",
        "--n",
        "10",
        "--wake",
        &format!("explicit:{wakes}"),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(json(&out)["wakes"], serde_json::json!([0, 5, 3]));
    assert_eq!(
        code(&radiosync(&[
            "--n",
            "10",
            "--m",
            "4",
            "--wake",
            &format!("explicit:{wakes}")
        ])),
        2
    );
    assert_eq!(
        code(&radiosync(&["--n", "4", "--wake", &format!("explicit:{wakes}")])),
        2
    );
}

#[test]
fn fractional_runs() {
    let dir = TempDir::new().unwrap();
    let wakes = write(&dir, "w.txt", "0\n1/3\n5/2\n7\n");
    let out = radiosync(&[
        "--fractional",
        "--algorithm",
        "synchronize",
        "--n",
        "8",
        "--wake",
        &format!("explicit:{wakes}"),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = json(&out);
    assert_eq!(r["completed"], true);
    assert!(r["displayed_spread"].as_i64().unwrap() <= 1);
    let offsets = r["exact_offsets"].as_array().unwrap();
    assert!(offsets.iter().all(|o| o == &offsets[0]));

    let out = radiosync(&[
        "--fractional",
        "--algorithm",
        "naive",
        "--n",
        "50",
        "--m",
        "9",
        "--wake",
        "random",
        "--seed",
        "4",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let out = radiosync(&[
        "--fractional",
        "--algorithm",
        "dynamic",
        "--n",
        "8",
        "--wake",
        &format!("explicit:{wakes}"),
    ]);
    assert_eq!(code(&out), 2);
    let bad = write(&dir, "bad.txt", "1/0\n");
    assert_eq!(
        code(&radiosync(&[
            "--fractional",
            "--n",
            "8",
            "--wake",
            &format!("explicit:{bad}")
        ])),
        2
    );
    assert_eq!(code(&radiosync(&["--max-den", "3", "--n", "8", "--m", "2"])), 2);
}

#[test]
fn help_documents_every_flag() {
    let out = radiosync(&["--help"]);
    let help = String::from_utf8(out.stdout).unwrap();
    for flag in [
        "--algorithm",
        "--n",
        "--m",
        "--wake",
        "--seed",
        "--topology",
        "--k",
        "--fractional",
        "--check",
        "--trace",
        "--out",
    ] {
        assert!(help.contains(flag), "{flag}");
    }
    assert!(Path::new(env!("CARGO_BIN_EXE_radiosync")).exists());
}
