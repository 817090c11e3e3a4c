//! Model files accepted by the command line.
//!
//! Two shapes are recognised. A parameter file gives the weights directly:
//!
//! ```json
//! {"network": {...}, "alpha": [...], "nu": [...], "b": [...], "rho": [...]}
//! ```
//!
//! A scenario file (anything with a `theta` key) is a serialized
//! [`ScenarioConfig`] and derives `alpha`, `nu` from `theta` and `delta`.

use std::fmt;
use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use crate::error::Error;
use crate::network::{AgentParams, Network};
use crate::scenarios::ScenarioConfig;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    network: Network,
    alpha: Vec<f64>,
    nu: Vec<f64>,
    b: Vec<f64>,
    rho: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub net: Network,
    pub params: AgentParams,
    /// Present when the file was a scenario.
    pub scenario: Option<ScenarioConfig>,
}

/// Why a model file could not be loaded.
#[derive(Debug)]
pub enum LoadError {
    Io(String),
    Syntax { line: usize, column: usize, msg: String },
    /// `pointer` is an RFC 6901 JSON pointer into the document.
    Schema { pointer: String, msg: String },
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadError::Io(msg) => f.write_str(msg),
            LoadError::Syntax { line, column, msg } => {
                write!(f, "invalid JSON at line {line}, column {column}: {msg}")
            }
            LoadError::Schema { pointer, msg } => {
                let at = if pointer.is_empty() { "/" } else { pointer };
                write!(f, "schema error at {at}: {msg}")
            }
        }
    }
}

fn escape(token: &str) -> String {
    token.replace('~', "~0").replace('/', "~1")
}

fn pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    path.iter()
        .filter_map(|seg| match seg {
            Segment::Seq { index } => Some(format!("/{index}")),
            Segment::Map { key } => Some(format!("/{}", escape(key))),
            Segment::Enum { variant } => Some(format!("/{}", escape(variant))),
            Segment::Unknown => None,
        })
        .collect()
}

fn typed<T: for<'de> Deserialize<'de>>(doc: Value) -> Result<T, LoadError> {
    serde_path_to_error::deserialize(doc).map_err(|e| LoadError::Schema {
        pointer: pointer(e.path()),
        msg: e.inner().to_string(),
    })
}

/// Point value-level parameter errors at the offending entry.
fn semantic(err: Error) -> LoadError {
    let pointer = match &err {
        Error::InvalidParameter { name, index, .. } => format!("/{name}/{index}"),
        Error::NonPositiveTheta { index, .. } => format!("/theta/{index}"),
        Error::NonPositiveDelta(_) => "/delta".into(),
        Error::DimensionMismatch { .. } | Error::NonSquare { .. } => String::new(),
        Error::NegativeWeight { row, col, .. } | Error::NonFiniteWeight { row, col } => {
            format!("/network/weights/{row}/{col}")
        }
        Error::NonzeroDiagonal { index, .. } => format!("/network/weights/{index}/{index}"),
        Error::ZeroOutDegreeRow { row } | Error::RowSumMismatch { row, .. } => {
            format!("/network/weights/{row}")
        }
        _ => String::new(),
    };
    LoadError::Schema {
        pointer,
        msg: err.to_string(),
    }
}

impl Model {
    pub fn from_str(text: &str) -> Result<Model, LoadError> {
        let doc: Value = serde_json::from_str(text).map_err(|e| LoadError::Syntax {
            line: e.line(),
            column: e.column(),
            msg: e.to_string(),
        })?;
        if doc.get("theta").is_some() {
            let scenario: ScenarioConfig = typed(doc)?;
            let params = scenario.params().map_err(semantic)?;
            params.check_dim(&scenario.network).map_err(semantic)?;
            Ok(Model {
                net: scenario.network.clone(),
                params,
                scenario: Some(scenario),
            })
        } else {
            let raw: ParamsFile = typed(doc)?;
            let params = AgentParams::new(raw.alpha, raw.nu, raw.b, raw.rho).map_err(semantic)?;
            params.check_dim(&raw.network).map_err(semantic)?;
            Ok(Model {
                net: raw.network,
                params,
                scenario: None,
            })
        }
    }

    pub fn load(path: &Path) -> Result<Model, LoadError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LoadError::Io(format!("cannot read {}: {e}", path.display())))?;
        Model::from_str(&text)
    }

    /// Same model with every sensitivity set to `b`.
    pub fn with_uniform_b(mut self, b: f64) -> Result<Model, LoadError> {
        self.params = self.params.with_uniform_b(b).map_err(semantic)?;
        if let Some(s) = self.scenario.take() {
            self.scenario = Some(s.with_uniform_b(b));
        }
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAIR: &str = r#"{
        "network": {"n": 2, "weights": [[0, 1], [1, 0]], "normalized": true},
        "alpha": [0.5, 0.5], "nu": [0.5, 0.5], "b": [1, 1], "rho": [0.7, 0.7]
    }"#;

    #[test]
    fn loads_parameter_file() {
        let m = Model::from_str(PAIR).unwrap();
        assert_eq!(m.params.n(), 2);
        assert!(m.scenario.is_none());
    }

    #[test]
    fn syntax_error_has_location() {
        let err = Model::from_str(&PAIR[..40]).unwrap_err();
        assert!(matches!(err, LoadError::Syntax { line: 2, .. }), "{err}");
    }

    #[test]
    fn schema_error_has_pointer() {
        let bad = PAIR.replace("\"rho\": [0.7, 0.7]", "\"rho\": [0.7, \"x\"]");
        match Model::from_str(&bad).unwrap_err() {
            LoadError::Schema { pointer, .. } => assert_eq!(pointer, "/rho/1"),
            other => panic!("{other}"),
        }
        let bad = PAIR.replace("\"alpha\": [0.5, 0.5]", "\"alpha\": [0.5, -0.5]");
        match Model::from_str(&bad).unwrap_err() {
            LoadError::Schema { pointer, .. } => assert_eq!(pointer, "/alpha/1"),
            other => panic!("{other}"),
        }
        let bad = PAIR.replace("\"b\"", "\"beta\"");
        assert!(matches!(Model::from_str(&bad), Err(LoadError::Schema { .. })));
    }

    #[test]
    fn pointer_escapes_tokens() {
        assert_eq!(escape("a/b~c"), "a~1b~0c");
    }
}
