use serde_json::Value;

use radiosync_web::{overlap_scan_json, search_json, simulate_json};

#[test]
fn simulate_reports_a_synchronized_run() {
    let v: Value = serde_json::from_str(&simulate_json("dynamic", 64, 8, "random", 7).unwrap()).unwrap();
    assert_eq!(v["k"], 8);
    assert!(v["sync_tick"].is_u64());
    let on = v["on_ticks"].as_array().unwrap();
    assert_eq!(on.len(), 8);
    let energy = v["energy"].as_array().unwrap();
    assert!(on
        .iter()
        .zip(energy)
        .all(|(o, e)| o.as_array().unwrap().len() as u64 == e.as_u64().unwrap()));
}

#[test]
fn simulate_rejects_bad_input() {
    assert!(simulate_json("ring", 8, 2, "uniform", 0).is_err());
    assert!(simulate_json("naive", 0, 2, "uniform", 0)
        .unwrap_err()
        .contains("n must be"));
    assert!(simulate_json("naive", 8, 2, "sparse", 0).is_err());
}

#[test]
fn overlap_scan_ends_at_policy_length() {
    let v: Value = serde_json::from_str(&overlap_scan_json(3).unwrap()).unwrap();
    let first = v["first_common"].as_array().unwrap();
    assert_eq!(first.len(), 13);
    assert!(first[..12].iter().all(|x| !x.is_null()));
    assert!(first[12].is_null());
}

#[test]
fn search_finds_the_two_tick_witness() {
    let v: Value = serde_json::from_str(&search_json("11,11", 9).unwrap()).unwrap();
    assert_eq!(v["witness"]["offsets"], serde_json::json!([0, 2]));
    assert!(search_json("11", 9).is_err());
    assert!(search_json("1x1,11", 9).is_err());
}
