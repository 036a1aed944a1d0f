use nilflow_demo::{heisenberg_flow_json, ricci_diagonal_json, unitriangular_soliton_json, MAX_N};
use serde_json::Value;

fn parse(s: Result<String, String>) -> Value {
    serde_json::from_str(&s.unwrap()).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn ricci_matches_hand_computation() {
    let v = parse(ricci_diagonal_json("heisenberg", 1, &[1.0, 2.0, 3.0]));
    assert_eq!(floats(&v["ricci"]), vec![-0.75, -1.5, 2.25]);
    assert!((v["scalar"].as_f64().unwrap() + 0.75).abs() < 1e-14);
    let v = parse(ricci_diagonal_json("unitriangular", 3, &[1.0, 1.0, 1.0]));
    assert_eq!(v["labels"], serde_json::json!(["12", "23", "13"]));
    assert_eq!(floats(&v["ricci"]), vec![-0.5, -0.5, 0.5]);
}

#[test]
fn heisenberg_flow_tracks_profile() {
    let v = parse(heisenberg_flow_json(1, &[1.0, 2.0, 0.5], 1e6, 10));
    let times = floats(&v["times"]);
    assert_eq!(times.first(), Some(&0.0));
    assert_eq!(times.last(), Some(&1e6));
    assert_eq!(v["states"].as_array().unwrap().len(), times.len());
    assert!(floats(&v["final_deviation"]).iter().all(|d| *d < 1e-3));
    // t = 0 has no profile value
    assert!(v["predicted"][0].as_array().unwrap().is_empty());
}

#[test]
fn soliton_certificate_is_valid() {
    for n in [2, 3, 4, 6] {
        let v = parse(unitriangular_soliton_json(n, 2.0, 0.5, true));
        assert!(v["flow_residual"].as_f64().unwrap() < 1e-10, "n={n}");
        assert_eq!(v["certificate"]["valid"], true, "n={n}");
        let c = v["certificate"]["c"].as_f64().unwrap();
        // n = 2 is the one-dimensional abelian algebra
        assert!(if n == 2 { c.abs() < 1e-12 } else { c < 0.0 }, "n={n} c={c}");
    }
    let v = parse(unitriangular_soliton_json(5, 1.0, 1.0, false));
    assert!(v["certificate"].is_null());
}

#[test]
fn bad_inputs_are_reported() {
    assert!(ricci_diagonal_json("heisenberg", 1, &[1.0, -2.0, 3.0]).unwrap_err().contains("positive definite"));
    assert!(ricci_diagonal_json("heisenberg", 2, &[1.0, 1.0]).is_err());
    assert!(ricci_diagonal_json("orthogonal", 2, &[1.0; 3]).is_err());
    assert!(heisenberg_flow_json(MAX_N + 1, &[1.0; 19], 1.0, 5).is_err());
    assert!(heisenberg_flow_json(1, &[1.0; 3], -1.0, 5).is_err());
    assert!(unitriangular_soliton_json(1, 1.0, 0.0, true).is_err());
    assert!(unitriangular_soliton_json(4, 1.0, 0.0, true).is_err());
}
