use medgossip_web::{coverage_curve_json, simulate_round_json, sweep_json};
use serde_json::Value;

fn parse(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn clean_round_is_accepted_in_two_delays() {
    let v = parse(&simulate_round_json("seed = 1\ndelay_fixed_ms = 5", "").unwrap());
    assert_eq!(v["decision"], "Accepted");
    assert_eq!(v["latency_ms"], 10);
    assert_eq!(v["coverage"], 1.0);
    let trace = v["trace"].as_array().unwrap();
    assert_eq!(trace.first().unwrap()["type"], "propose");
    assert!(trace.iter().any(|t| t["type"] == "decision"));
}

#[test]
fn attacked_round_is_rejected() {
    for attack in [
        "INVALID_SIGNATURE",
        "EXPIRED_TIMESTAMP",
        "MALFORMED_CONTENT",
    ] {
        let v = parse(&simulate_round_json("seed = 2", attack).unwrap());
        assert_eq!(v["decision"], "Rejected", "{attack}");
    }
}

#[test]
fn bad_inputs_are_reported() {
    assert!(simulate_round_json("n = 4", "")
        .unwrap_err()
        .contains("seed"));
    assert!(simulate_round_json("seed = 1\nn = 4\nf = 2", "")
        .unwrap_err()
        .contains("3f + 1"));
    assert!(simulate_round_json("seed = 1", "BOGUS").is_err());
    assert!(coverage_curve_json(10, 2, 0, 10, 1).is_err());
    assert!(sweep_json(3, 2, 2, 3, 2, 1).is_err());
}

#[test]
fn coverage_curve_tracks_the_tree_bound() {
    let v = parse(&coverage_curve_json(31, 2, 6, 20, 3).unwrap());
    let points = v.as_array().unwrap();
    assert_eq!(points.len(), 6);
    for p in points {
        let (expected, measured) = (
            p["expected"].as_f64().unwrap(),
            p["measured"].as_f64().unwrap(),
        );
        assert!(measured <= expected + 1e-12, "{p}");
    }
    assert_eq!(points[0]["expected"].as_f64().unwrap(), 1.0 / 31.0);
    assert_eq!(points[2]["expected"].as_f64().unwrap(), 7.0 / 31.0);
}

#[test]
fn sweep_rows_follow_three_f_plus_one() {
    let v = parse(&sweep_json(1, 4, 2, 30, 2, 5).unwrap());
    let rows = v.as_array().unwrap();
    let ns: Vec<u64> = rows.iter().map(|r| r["n"].as_u64().unwrap()).collect();
    let th: Vec<u64> = rows
        .iter()
        .map(|r| r["threshold"].as_u64().unwrap())
        .collect();
    assert_eq!(ns, vec![4, 7, 10, 13]);
    assert_eq!(th, vec![3, 5, 7, 9]);
}
