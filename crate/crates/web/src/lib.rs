//! Browser bindings for the what-if page in `www/`.
//!
//! [`Explorer`] holds one loaded model. Its plain Rust methods return JSON
//! strings and are what the tests exercise; the `#[wasm_bindgen]` wrappers
//! only convert errors for JavaScript.

use chrono::NaiveDate;
use crashrisk::advisor::{heatmap, rank_slots, summarize_with_totals, LevelTotals, SlotModel, SlotQuery};
use crashrisk::artifact::{load_model, to_bytes, GlmArtifact, ModelArtifact};
use crashrisk::features::{FeatureSchema, PrecipMode};
use crashrisk::ingest::DateRange;
use crashrisk::pipeline::{run_glm, GlmRun};
use crashrisk::synth::{synth_dataset, Profile};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[wasm_bindgen]
pub struct Explorer {
    artifact: ModelArtifact,
    sha256: String,
}

#[derive(Serialize)]
struct Coefficients<'a> {
    family: &'static str,
    alpha: f64,
    rows: Vec<crashrisk::advisor::CoefficientRow>,
    fingerprint: &'a str,
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

impl Explorer {
    /// Parses a saved artifact (the `model.json` written by `crashrisk fit`).
    pub fn from_text(text: &str) -> Result<Explorer, String> {
        let loaded = load_model(text.as_bytes()).map_err(err)?;
        Ok(Explorer {
            artifact: loaded.artifact,
            sha256: loaded.sha256,
        })
    }

    /// Fits a negative binomial model to one synthetic year.
    pub fn synthetic(seed: u64, alpha: f64, precip_effect: f64) -> Result<Explorer, String> {
        let range = DateRange::new(
            NaiveDate::from_ymd_opt(2019, 1, 1).expect("valid date"),
            NaiveDate::from_ymd_opt(2019, 12, 31).expect("valid date"),
        )
        .map_err(err)?;
        let profile = Profile {
            alpha,
            precip: precip_effect,
            ..Profile::calibrated()
        };
        profile.validate().map_err(err)?;
        let (_, grid) = synth_dataset(&range, &profile, seed).map_err(err)?;
        let run = GlmRun {
            seed,
            ..GlmRun::default()
        };
        let artifact = ModelArtifact::Glm(run_glm(&grid, &run).map_err(err)?.artifact);
        let (_, sha256) = to_bytes(&artifact).map_err(err)?;
        Ok(Explorer { artifact, sha256 })
    }

    fn model(&self) -> &dyn SlotModel {
        match &self.artifact {
            ModelArtifact::Glm(a) => &a.model,
            ModelArtifact::Forest(a) => &a.model,
        }
    }

    fn glm(&self) -> Result<&GlmArtifact, String> {
        match &self.artifact {
            ModelArtifact::Glm(a) => Ok(a),
            ModelArtifact::Forest(_) => Err("a random forest has no coefficient table".into()),
        }
    }

    pub fn fingerprint_str(&self) -> &str {
        &self.sha256
    }

    /// 7×24 expected counts for one month, as JSON.
    pub fn heatmap_json(&self, month: u8, precip: f64) -> Result<String, String> {
        let map = heatmap(self.model(), month, precip).map_err(err)?;
        serde_json::to_string(&map).map_err(err)
    }

    /// Ranks `{"slots":[{"weekday","hour","month"}],"precip"}`, safest first.
    pub fn rank_json(&self, query: &str) -> Result<String, String> {
        let query: SlotQuery = serde_json::from_str(query).map_err(err)?;
        let ranked = rank_slots(self.model(), &query).map_err(err)?;
        serde_json::to_string(&ranked).map_err(err)
    }

    /// Coefficient table with percent changes, as JSON.
    pub fn coefficients_json(&self) -> Result<String, String> {
        let a = self.glm()?;
        let totals = a.diagnostics.level_totals.clone().unwrap_or(LevelTotals {
            hour: vec![0; 24],
            weekday: vec![0; 7],
            month: vec![0; 12],
            precip: 0,
            total: 0,
        });
        let rows = summarize_with_totals(&a.model, &totals).map_err(err)?;
        serde_json::to_string(&Coefficients {
            family: a.model.family.label(),
            alpha: a.model.alpha,
            rows,
            fingerprint: &self.sha256,
        })
        .map_err(err)
    }

    pub fn schema(&self) -> Option<&FeatureSchema> {
        self.model().schema().ok()
    }
}

#[wasm_bindgen]
impl Explorer {
    #[wasm_bindgen(js_name = fromArtifact)]
    pub fn js_from_artifact(text: &str) -> Result<Explorer, JsError> {
        Explorer::from_text(text).map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(js_name = synthetic)]
    pub fn js_synthetic(seed: u32, alpha: f64, precip_effect: f64) -> Result<Explorer, JsError> {
        Explorer::synthetic(u64::from(seed), alpha, precip_effect).map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(getter)]
    pub fn fingerprint(&self) -> String {
        self.sha256.clone()
    }

    /// "indicator" (precip is 0 or 1) or "inches".
    #[wasm_bindgen(getter, js_name = precipMode)]
    pub fn precip_mode(&self) -> String {
        match self.schema().map(|s| s.precip_mode) {
            Some(PrecipMode::Inches) => "inches".into(),
            _ => "indicator".into(),
        }
    }

    #[wasm_bindgen(js_name = heatmap)]
    pub fn js_heatmap(&self, month: u8, precip: f64) -> Result<String, JsError> {
        self.heatmap_json(month, precip).map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(js_name = rank)]
    pub fn js_rank(&self, query: &str) -> Result<String, JsError> {
        self.rank_json(query).map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(js_name = coefficients)]
    pub fn js_coefficients(&self) -> Result<String, JsError> {
        self.coefficients_json().map_err(|e| JsError::new(&e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn demo() -> Explorer {
        Explorer::synthetic(4, 0.01, 0.027).unwrap()
    }

    #[test]
    fn heatmap_has_168_positive_cells() {
        let v: Value = serde_json::from_str(&demo().heatmap_json(6, 1.0).unwrap()).unwrap();
        let cells = v["cells"].as_array().unwrap();
        assert_eq!(cells.len(), 7);
        for row in cells {
            let row = row.as_array().unwrap();
            assert_eq!(row.len(), 24);
            assert!(row.iter().all(|c| c.as_f64().unwrap() > 0.0));
        }
    }

    #[test]
    fn bad_inputs_are_errors() {
        let e = demo();
        assert!(e.heatmap_json(13, 0.0).is_err());
        assert!(e.heatmap_json(3, 0.5).is_err());
        assert!(e.rank_json("{").is_err());
        assert!(e.rank_json(r#"{"slots":[],"precip":0}"#).is_err());
        assert!(Explorer::from_text("not an artifact").is_err());
        assert!(Explorer::synthetic(1, -1.0, 0.0).is_err());
    }

    #[test]
    fn rank_and_coefficients() {
        let e = demo();
        let ranked: Value = serde_json::from_str(
            &e.rank_json(r#"{"slots":[{"weekday":"FR","hour":2,"month":10},{"weekday":"TU","hour":11,"month":2}],"precip":0}"#)
                .unwrap(),
        )
        .unwrap();
        assert_eq!(ranked[0]["slot"]["weekday"], "TU");
        assert_eq!(ranked[0]["relative_risk"], 1.0);
        let coef: Value = serde_json::from_str(&e.coefficients_json().unwrap()).unwrap();
        assert_eq!(coef["rows"].as_array().unwrap().len(), 45);
        assert_eq!(coef["fingerprint"], e.fingerprint_str());
    }

    #[test]
    fn artifact_text_round_trip() {
        let e = demo();
        let (bytes, sha) = to_bytes(&e.artifact).unwrap();
        let again = Explorer::from_text(std::str::from_utf8(&bytes).unwrap()).unwrap();
        assert_eq!(again.fingerprint_str(), sha);
        assert_eq!(again.heatmap_json(2, 0.0).unwrap(), e.heatmap_json(2, 0.0).unwrap());
    }
}
