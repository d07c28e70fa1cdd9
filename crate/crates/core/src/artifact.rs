//! Versioned, checksummed model files.
//!
//! An artifact is two JSON lines: a header `{format, version, kind, sha256}`
//! followed by the payload whose SHA-256 the header records. GLM reals are
//! written as shortest round-trip decimal strings.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::advisor::LevelTotals;
use crate::features::{DesignMatrix, FeatureSchema};
use crate::forest::{ForestModel, SweepRow};
use crate::glm::{DispersionReport, Family, FitOptions, FittedGlm};
use crate::ingest::{write_grid_csv, HourlyObservation};
use crate::{Error, Result};

pub const FORMAT: &str = "crashrisk-model";
pub const VERSION_MAJOR: u32 = 1;
pub const VERSION_MINOR: u32 = 0;

/// Everything known about a GLM fit beyond the coefficients.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GlmDiagnostics {
    pub dispersion: Option<DispersionReport>,
    pub level_totals: Option<LevelTotals>,
    pub test_rmse: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
    /// Poisson log-likelihood on the same data, when a Poisson fit preceded.
    pub poisson_log_likelihood: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlmArtifact {
    pub model: FittedGlm,
    pub diagnostics: GlmDiagnostics,
    pub fit_options: FitOptions,
    pub data_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestDiagnostics {
    pub sweep: Vec<SweepRow>,
    pub n_train: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestArtifact {
    pub model: ForestModel,
    pub diagnostics: ForestDiagnostics,
    pub data_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelArtifact {
    Glm(GlmArtifact),
    Forest(ForestArtifact),
}

impl ModelArtifact {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelArtifact::Glm(_) => "glm",
            ModelArtifact::Forest(_) => "forest",
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: String,
    kind: String,
    sha256: String,
}

mod decimal {
    use serde::{Deserialize, Deserializer, Serializer};

    fn parse<E: serde::de::Error>(s: &str) -> Result<f64, E> {
        s.parse()
            .map_err(|_| E::custom(format!("invalid decimal `{s}`")))
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        parse(&String::deserialize(d)?)
    }

    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(v.iter().map(f64::to_string))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Vec::<String>::deserialize(d)?
                .iter()
                .map(|s| parse::<D::Error>(s))
                .collect()
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct GlmFitMeta {
    #[serde(with = "decimal")]
    log_likelihood: f64,
    n_obs: usize,
    converged: bool,
    iterations: usize,
    rank: usize,
    warnings: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GlmWire {
    family: Family,
    schema: Option<FeatureSchema>,
    column_names: Vec<String>,
    #[serde(with = "decimal::vec")]
    beta: Vec<f64>,
    #[serde(with = "decimal")]
    alpha: f64,
    #[serde(with = "decimal::vec")]
    cov_beta: Vec<f64>,
    fit: GlmFitMeta,
    diagnostics: GlmDiagnostics,
    fit_options: FitOptions,
    data_fingerprint: String,
}

impl From<&GlmArtifact> for GlmWire {
    fn from(a: &GlmArtifact) -> Self {
        let m = &a.model;
        GlmWire {
            family: m.family,
            schema: m.schema.clone(),
            column_names: m.column_names.clone(),
            beta: m.beta.clone(),
            alpha: m.alpha,
            cov_beta: m.cov_beta.clone(),
            fit: GlmFitMeta {
                log_likelihood: m.log_likelihood,
                n_obs: m.n_obs,
                converged: m.converged,
                iterations: m.iterations,
                rank: m.rank,
                warnings: m.warnings.clone(),
            },
            diagnostics: a.diagnostics.clone(),
            fit_options: a.fit_options.clone(),
            data_fingerprint: a.data_fingerprint.clone(),
        }
    }
}

impl TryFrom<GlmWire> for GlmArtifact {
    type Error = Error;

    fn try_from(w: GlmWire) -> Result<Self> {
        let p = w.column_names.len();
        if w.beta.len() != p || w.cov_beta.len() != p * p {
            return Err(Error::Artifact(format!(
                "inconsistent dimensions: {p} columns, {} coefficients, {} covariance entries",
                w.beta.len(),
                w.cov_beta.len()
            )));
        }
        if let Some(schema) = &w.schema {
            if schema.column_names() != w.column_names {
                return Err(Error::SchemaMismatch(
                    "artifact columns do not match its schema".into(),
                ));
            }
        }
        Ok(GlmArtifact {
            model: FittedGlm {
                family: w.family,
                schema: w.schema,
                column_names: w.column_names,
                beta: w.beta,
                alpha: w.alpha,
                cov_beta: w.cov_beta,
                log_likelihood: w.fit.log_likelihood,
                n_obs: w.fit.n_obs,
                converged: w.fit.converged,
                iterations: w.fit.iterations,
                rank: w.fit.rank,
                warnings: w.fit.warnings,
            },
            diagnostics: w.diagnostics,
            fit_options: w.fit_options,
            data_fingerprint: w.data_fingerprint,
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// SHA-256 of the grid's canonical CSV form.
pub fn fingerprint_grid(grid: &[HourlyObservation]) -> Result<String> {
    let mut buf = Vec::new();
    write_grid_csv(grid, &mut buf)?;
    Ok(sha256_hex(&buf))
}

/// SHA-256 over the design's shape, values and response.
pub fn fingerprint_design(design: &DesignMatrix) -> String {
    let mut h = Sha256::new();
    h.update((design.rows as u64).to_le_bytes());
    h.update((design.cols as u64).to_le_bytes());
    for name in &design.column_names {
        h.update(name.as_bytes());
        h.update([0]);
    }
    for v in &design.values {
        h.update(v.to_le_bytes());
    }
    for y in &design.response {
        h.update(y.to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Serialized artifact bytes and the payload checksum.
pub fn to_bytes(artifact: &ModelArtifact) -> Result<(Vec<u8>, String)> {
    let payload = match artifact {
        ModelArtifact::Glm(a) => serde_json::to_vec(&GlmWire::from(a))?,
        ModelArtifact::Forest(a) => serde_json::to_vec(a)?,
    };
    let sha256 = sha256_hex(&payload);
    let header = Header {
        format: FORMAT.into(),
        version: format!("{VERSION_MAJOR}.{VERSION_MINOR}"),
        kind: artifact.kind().into(),
        sha256: sha256.clone(),
    };
    let mut out = serde_json::to_vec(&header)?;
    out.push(b'\n');
    out.extend_from_slice(&payload);
    out.push(b'\n');
    Ok((out, sha256))
}

/// Writes the artifact; returns its checksum, which doubles as the model
/// fingerprint.
pub fn save_model<W: Write>(artifact: &ModelArtifact, mut sink: W) -> Result<String> {
    let (bytes, sha) = to_bytes(artifact)?;
    sink.write_all(&bytes)?;
    sink.flush()?;
    Ok(sha)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedArtifact {
    pub artifact: ModelArtifact,
    pub sha256: String,
}

fn parse_version(v: &str) -> Result<(u32, u32)> {
    let bad = || Error::Artifact(format!("malformed version `{v}`"));
    let (major, minor) = v.split_once('.').ok_or_else(bad)?;
    Ok((major.parse().map_err(|_| bad())?, minor.parse().map_err(|_| bad())?))
}

/// Reads a whole artifact, verifying format, version and checksum before
/// decoding the payload.
pub fn load_model<R: Read>(mut source: R) -> Result<LoadedArtifact> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| Error::Artifact(format!("unreadable artifact: {e}")))?;
    let Some((header_line, rest)) = text.split_once('\n') else {
        return Err(Error::Checksum("artifact truncated inside its header".into()));
    };
    let header: Header = serde_json::from_str(header_line)
        .map_err(|e| Error::Artifact(format!("bad artifact header: {e}")))?;
    if header.format != FORMAT {
        return Err(Error::Artifact(format!("not a {FORMAT} file (format `{}`)", header.format)));
    }
    let (major, _) = parse_version(&header.version)?;
    if major != VERSION_MAJOR {
        return Err(Error::Version {
            found: header.version,
            supported: format!("{VERSION_MAJOR}.x"),
        });
    }
    let payload = rest.strip_suffix('\n').unwrap_or(rest);
    let actual = sha256_hex(payload.as_bytes());
    if actual != header.sha256 {
        return Err(Error::Checksum(format!(
            "payload checksum {actual} does not match header {}",
            header.sha256
        )));
    }
    let artifact = match header.kind.as_str() {
        "glm" => ModelArtifact::Glm(serde_json::from_str::<GlmWire>(payload)?.try_into()?),
        "forest" => ModelArtifact::Forest(serde_json::from_str(payload)?),
        other => return Err(Error::Artifact(format!("unknown artifact kind `{other}`"))),
    };
    Ok(LoadedArtifact {
        artifact,
        sha256: actual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{fit_forest, predict_forest, ForestParams};
    use crate::glm::predict_mean;
    use crate::rng;
    use rand::Rng;

    fn glm_artifact() -> GlmArtifact {
        let schema = FeatureSchema::reference_cell();
        let names = schema.column_names();
        let p = names.len();
        let mut r = rng::substream(1, "artifact-test", 0);
        let beta: Vec<f64> = (0..p).map(|_| r.random_range(-1.0..1.0)).collect();
        let cov_beta: Vec<f64> = (0..p * p).map(|_| r.random::<f64>() * 1e-3).collect();
        GlmArtifact {
            model: FittedGlm {
                family: Family::NegBinomial2,
                schema: Some(schema),
                column_names: names,
                beta,
                alpha: 0.123_456_789_012_345_67,
                cov_beta,
                log_likelihood: -12345.678_901_234_5,
                n_obs: 1000,
                converged: true,
                iterations: 7,
                rank: p,
                warnings: vec!["w".into()],
            },
            diagnostics: GlmDiagnostics {
                test_rmse: Some(4.1),
                ..Default::default()
            },
            fit_options: FitOptions::default(),
            data_fingerprint: "abc".into(),
        }
    }

    fn forest_artifact() -> ForestArtifact {
        let mut r = rng::substream(2, "artifact-test", 0);
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|_| (0..3).map(|_| r.random_range(0.0..1.0)).collect())
            .collect();
        let y: Vec<u64> = rows.iter().map(|x| (10.0 * x[0]) as u64).collect();
        let design = DesignMatrix::from_rows(&rows, y).unwrap();
        let params = ForestParams {
            n_estimators: 5,
            ..Default::default()
        };
        ForestArtifact {
            model: fit_forest(&design, &params, 9).unwrap(),
            diagnostics: ForestDiagnostics {
                sweep: vec![],
                n_train: 60,
                n_test: 0,
            },
            data_fingerprint: fingerprint_design(&design),
        }
    }

    fn round_trip(a: &ModelArtifact) -> ModelArtifact {
        let (bytes, sha) = to_bytes(a).unwrap();
        let loaded = load_model(bytes.as_slice()).unwrap();
        assert_eq!(loaded.sha256, sha);
        loaded.artifact
    }

    #[test]
    fn glm_round_trip_is_exact_and_predicts_bitwise() {
        let original = glm_artifact();
        let ModelArtifact::Glm(back) = round_trip(&ModelArtifact::Glm(original.clone())) else {
            panic!("kind changed");
        };
        assert_eq!(back, original);
        let mut r = rng::substream(3, "probe", 0);
        for _ in 0..100 {
            let x: Vec<f64> = (0..original.model.beta.len()).map(|_| r.random_range(-1.0..1.0)).collect();
            assert_eq!(
                predict_mean(&back.model, &x).unwrap().to_bits(),
                predict_mean(&original.model, &x).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn forest_round_trip_predicts_bitwise() {
        let original = forest_artifact();
        let ModelArtifact::Forest(back) = round_trip(&ModelArtifact::Forest(original.clone())) else {
            panic!("kind changed");
        };
        assert_eq!(back, original);
        let mut r = rng::substream(4, "probe", 0);
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| r.random_range(-0.5..1.5)).collect();
            assert_eq!(
                predict_forest(&back.model, &x).unwrap().to_bits(),
                predict_forest(&original.model, &x).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn truncation_is_a_checksum_error() {
        let (bytes, _) = to_bytes(&ModelArtifact::Glm(glm_artifact())).unwrap();
        for cut in [bytes.len() - 10, bytes.len() / 2, 20] {
            let err = load_model(&bytes[..cut]).unwrap_err();
            assert!(matches!(err, Error::Checksum(_)), "cut {cut}: {err}");
        }
    }

    #[test]
    fn tampering_is_a_checksum_error() {
        let (bytes, _) = to_bytes(&ModelArtifact::Glm(glm_artifact())).unwrap();
        let text = String::from_utf8(bytes).unwrap().replacen("\"negbin2\"", "\"poisson\"", 1);
        assert!(matches!(load_model(text.as_bytes()), Err(Error::Checksum(_))));
    }

    #[test]
    fn newer_major_version_is_rejected() {
        let (bytes, _) = to_bytes(&ModelArtifact::Glm(glm_artifact())).unwrap();
        let text = String::from_utf8(bytes).unwrap().replacen("\"1.0\"", "\"2.0\"", 1);
        match load_model(text.as_bytes()) {
            Err(Error::Version { found, .. }) => assert_eq!(found, "2.0"),
            other => panic!("expected version error, got {other:?}"),
        }
        let text = String::from_utf8(to_bytes(&ModelArtifact::Glm(glm_artifact())).unwrap().0)
            .unwrap()
            .replacen("\"1.0\"", "\"1.7\"", 1);
        assert!(load_model(text.as_bytes()).is_ok());
    }

    #[test]
    fn serialization_is_deterministic() {
        let a = ModelArtifact::Forest(forest_artifact());
        assert_eq!(to_bytes(&a).unwrap(), to_bytes(&a).unwrap());
    }

    #[test]
    fn reals_are_decimal_strings() {
        let a = glm_artifact();
        let (bytes, _) = to_bytes(&ModelArtifact::Glm(a.clone())).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.contains(&format!("\"alpha\":\"{}\"", a.model.alpha)));
        assert!(text.contains(&format!("\"beta\":[\"{}\"", a.model.beta[0])));
    }
}
