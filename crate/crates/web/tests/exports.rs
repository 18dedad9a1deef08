use weaklab_web::{constants_json, directional_json, tail_json};

const LINEAR: &str = r#"{"kind": "linear", "slope": [1.0]}"#;
const UNIT: &str = r#"{"kind": "box", "lo": [0.0], "hi": [1.0]}"#;

fn parse(text: &str) -> serde_json::Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn constants_round_trip() {
    let v = parse(&constants_json(2, 2.0).unwrap());
    assert_eq!(v["K_qN"], 0.5);
    assert!((v["I_q"].as_f64().unwrap() - std::f64::consts::PI).abs() < 1e-12);
}

#[test]
fn tail_profile_of_linear_field() {
    let v = parse(&tail_json(LINEAR, UNIT, 2.0, 2.0, 10.0, 1000.0, 200_000.0, 1).unwrap());
    let xs = v["x"].as_array().unwrap();
    let ys = v["y"].as_array().unwrap();
    assert_eq!(xs.len(), ys.len());
    let last = ys.last().unwrap().as_f64().unwrap();
    assert!((last - 2.0).abs() < 0.1, "{last}");
    assert!(v["summary"]["converged"].as_bool().unwrap());
}

#[test]
fn directional_profile_of_linear_field() {
    let v = parse(&directional_json(LINEAR, UNIT, 2.0, 2.0, 0.1, 0.001, 50_000.0, 1).unwrap());
    for (x, y) in v["x"].as_array().unwrap().iter().zip(v["y"].as_array().unwrap()) {
        let exact = 2.0 * (1.0 - x.as_f64().unwrap());
        assert!((y.as_f64().unwrap() - exact).abs() < 1e-3 * exact);
    }
}

#[test]
fn bad_inputs_are_reported() {
    assert!(tail_json("{", UNIT, 2.0, 2.0, 10.0, 100.0, 1e5, 0)
        .unwrap_err()
        .starts_with("field"));
    let square = r#"{"kind": "box", "lo": [0.0, 0.0], "hi": [1.0, 1.0]}"#;
    assert!(tail_json(LINEAR, square, 2.0, 2.0, 10.0, 100.0, 1e5, 0).is_err());
    assert!(tail_json(LINEAR, UNIT, 2.0, 2.0, 10.0, 100.0, 1e9, 0).is_err());
}
