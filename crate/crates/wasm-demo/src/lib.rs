//! Browser bindings: heatmaps of synthetic pairs, a quantum-layer probe and
//! accuracy-series metrics. Results cross the boundary as JSON strings.

use qlayers::data::{build_heatmap, synth_generate, Label, GRID};
use qlayers::diagnostics::{AccuracySeries, MetricReport};
use qlayers::encodings::{build_two_local, named_feature_map, FeatureMapName};
use qlayers::qnn::QuantumLayer;
use qlayers::qsim::run_circuit;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

pub fn feature_maps_json() -> String {
    let maps: Vec<_> = FeatureMapName::ALL
        .iter()
        .map(|m| json!({ "name": m.as_str(), "title": m.title() }))
        .collect();
    serde_json::Value::Array(maps).to_string()
}

/// Synthetic pair of the given class plus its 8×8 heatmap.
pub fn synth_heatmap_json(label: &str, n_points: usize, seed: u64) -> Result<String, String> {
    let label: Label = label.parse().map_err(|e: qlayers::Error| e.to_string())?;
    let pair = synth_generate(n_points, label, seed).map_err(|e| e.to_string())?;
    let map = build_heatmap(&pair, GRID).map_err(|e| e.to_string())?;
    Ok(json!({
        "x": pair.x,
        "y": pair.y,
        "bins": map.bins,
        "grid": map.grid,
        "label": label.to_string(),
    })
    .to_string())
}

/// Output, gradients and state probabilities of one quantum layer.
pub fn qnn_probe_json(
    feature_map: &str,
    n_qubits: usize,
    depth: usize,
    x: &[f64],
    theta: &[f64],
) -> Result<String, String> {
    let err = |e: qlayers::Error| e.to_string();
    let fmap = named_feature_map(feature_map, n_qubits).map_err(err)?;
    let ansatz = build_two_local(n_qubits, depth).map_err(err)?;
    let layer = QuantumLayer::with_parity(fmap, ansatz, theta.to_vec()).map_err(err)?;
    let eval = layer.forward_with_grads(x).map_err(err)?;
    let encoded = layer.feature_state(x).map_err(err)?;
    let full = run_circuit(layer.circuit(), x, theta).map_err(err)?;
    Ok(json!({
        "value": eval.value,
        "grad_theta": eval.grad_theta,
        "grad_input": eval.grad_input,
        "feature_probabilities": encoded.probabilities(),
        "output_probabilities": full.probabilities(),
        "n_gates": layer.circuit().gates().len(),
    })
    .to_string())
}

pub fn series_metrics_json(train: &[f64], val: &[f64], k: usize, threshold: f64) -> Result<String, String> {
    let series = AccuracySeries::from_curves(train, val).map_err(|e| e.to_string())?;
    let report = MetricReport::compute(&series, k, threshold).map_err(|e| e.to_string())?;
    serde_json::to_string(&report).map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = featureMaps)]
pub fn feature_maps() -> String {
    feature_maps_json()
}

#[wasm_bindgen(js_name = synthHeatmap)]
pub fn synth_heatmap(label: &str, n_points: usize, seed: u32) -> Result<String, JsValue> {
    js(synth_heatmap_json(label, n_points, seed as u64))
}

#[wasm_bindgen(js_name = qnnProbe)]
pub fn qnn_probe(feature_map: &str, n_qubits: usize, depth: usize, x: &[f64], theta: &[f64]) -> Result<String, JsValue> {
    js(qnn_probe_json(feature_map, n_qubits, depth, x, theta))
}

#[wasm_bindgen(js_name = seriesMetrics)]
pub fn series_metrics(train: &[f64], val: &[f64], k: usize, threshold: f64) -> Result<String, JsValue> {
    js(series_metrics_json(train, val, k, threshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn nine_maps_listed() {
        let v: Value = serde_json::from_str(&feature_maps_json()).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 9);
    }

    #[test]
    fn heatmap_payload() {
        let v: Value = serde_json::from_str(&synth_heatmap_json("negative", 200, 4).unwrap()).unwrap();
        let grid = v["grid"].as_array().unwrap();
        assert_eq!(grid.len(), 64);
        let max = grid.iter().map(|g| g.as_f64().unwrap()).fold(0.0, f64::max);
        assert_eq!(max, 1.0);
        assert!(synth_heatmap_json("sideways", 200, 4).is_err());
    }

    #[test]
    fn probe_payload() {
        let theta = vec![0.1; 12];
        let s = qnn_probe_json("pauli_xyz_1_rep", 3, 2, &[0.2, -0.4, 1.0], &theta).unwrap();
        let v: Value = serde_json::from_str(&s).unwrap();
        assert!(v["value"].as_f64().unwrap().abs() <= 1.0);
        assert_eq!(v["grad_theta"].as_array().unwrap().len(), 12);
        let p: f64 = v["output_probabilities"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).sum();
        assert!((p - 1.0).abs() < 1e-12);
        assert!(qnn_probe_json("pauli_xyz_1_rep", 3, 2, &[0.2], &theta).is_err());
        assert!(qnn_probe_json("zz_reps_7", 3, 2, &[0.2, 0.1, 0.0], &theta).is_err());
    }

    #[test]
    fn metrics_payload() {
        let s = series_metrics_json(&[0.5, 0.9121], &[0.4, 0.8955], 2, 0.9).unwrap();
        let v: Value = serde_json::from_str(&s).unwrap();
        assert!((v["final_gap"].as_f64().unwrap() - 0.0166).abs() < 1e-12);
        assert!(v["epoch_at_threshold"].is_null());
    }
}
