//! Input document schema, JSON rendering with fixed precision, and the
//! stochastic projection.

use serde::Deserialize;
use serde_json::Value;
use unisto_core::{
    Measurement, MeasurementKind, MeasurementTarget, OrthogonalityId, SquaredModuliMatrix, Tagged,
};

/// A command input: a squared-moduli matrix, an ensemble of complex
/// matrices, four phase tangents, measurements, and option overrides —
/// each section optional, commands pick what they need.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct InputDocument {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    /// Row-major 3x3 or 4x4 grid of squared moduli.
    #[serde(default)]
    pub matrix: Option<Vec<Vec<f64>>>,
    /// Complex matrices as grids of `[re, im]` pairs, for statistics.
    #[serde(default)]
    pub unitaries: Option<Vec<Vec<Vec<[f64; 2]>>>>,
    /// Convex weights matching `unitaries` (uniform when absent).
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    /// The four measurable phase tangents `(t22, t23, t32, t33)`.
    #[serde(default)]
    pub tangents: Option<[f64; 4]>,
    #[serde(default)]
    pub measurements: Option<Vec<MeasurementDoc>>,
    #[serde(default)]
    pub options: Option<OptionsDoc>,
}

fn default_schema_version() -> u32 {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct MeasurementDoc {
    /// `modulus`, `squared-modulus`, `triangle-side`, or
    /// `triangle-angle-cosine`.
    pub kind: String,
    pub target: TargetDoc,
    pub value: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum TargetDoc {
    Position { row: usize, col: usize },
    Triangle { relation: String, index: usize },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct OptionsDoc {
    pub tolerance: Option<f64>,
    pub seed: Option<u64>,
    pub restarts: Option<usize>,
    pub max_iterations: Option<usize>,
    /// `unitarity-condition`, `triangles`, or `merged`.
    pub mode: Option<String>,
    pub penalty_weight: Option<f64>,
    pub hinge_weight: Option<f64>,
}

/// An input or usage problem (exit code 3).
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for InputError {}

pub fn parse_document(text: &str) -> Result<InputDocument, InputError> {
    let doc: InputDocument =
        serde_json::from_str(text).map_err(|e| InputError(format!("invalid JSON input: {e}")))?;
    if doc.schema_version != 1 {
        return Err(InputError(format!(
            "unsupported schemaVersion {}",
            doc.schema_version
        )));
    }
    if doc.matrix.is_none()
        && doc.unitaries.is_none()
        && doc.tangents.is_none()
        && doc.measurements.is_none()
    {
        return Err(InputError(String::from(
            "input must carry at least one of matrix, unitaries, tangents, measurements",
        )));
    }
    Ok(doc)
}

/// Extracts and validates the squared-moduli matrix from the document.
pub fn matrix_from(doc: &InputDocument, tol: f64) -> Result<SquaredModuliMatrix, InputError> {
    let rows = doc
        .matrix
        .as_ref()
        .ok_or_else(|| InputError(String::from("this command requires a matrix")))?;
    let n = rows.len();
    if !(2..=4).contains(&n) || rows.iter().any(|r| r.len() != n) {
        return Err(InputError(format!(
            "matrix must be square of size 2..=4, got {n} rows"
        )));
    }
    let entries: Vec<f64> = rows.iter().flatten().copied().collect();
    if entries.iter().any(|v| !v.is_finite()) {
        return Err(InputError(String::from("matrix entries must be finite")));
    }
    SquaredModuliMatrix::new(n, entries, tol)
        .map_err(|e| InputError(format!("invalid squared-moduli matrix: {e:?}")))
}

pub fn orthogonality_id(name: &str) -> Result<OrthogonalityId, InputError> {
    match name {
        "C12" => Ok(OrthogonalityId::C12),
        "C13" => Ok(OrthogonalityId::C13),
        "C23" => Ok(OrthogonalityId::C23),
        "R12" => Ok(OrthogonalityId::R12),
        "R13" => Ok(OrthogonalityId::R13),
        "R23" => Ok(OrthogonalityId::R23),
        other => Err(InputError(format!(
            "unknown orthogonality relation {other:?} (C12, C13, C23, R12, R13, R23)"
        ))),
    }
}

pub fn measurements_from(doc: &InputDocument) -> Result<Vec<Measurement>, InputError> {
    let docs = doc
        .measurements
        .as_ref()
        .ok_or_else(|| InputError(String::from("this command requires measurements")))?;
    if docs.is_empty() {
        return Err(InputError(String::from("measurements must be nonempty")));
    }
    docs.iter()
        .map(|m| {
            let kind = match m.kind.as_str() {
                "modulus" => MeasurementKind::Modulus,
                "squared-modulus" => MeasurementKind::SquaredModulus,
                "triangle-side" => MeasurementKind::TriangleSide,
                "triangle-angle-cosine" => MeasurementKind::TriangleAngleCosine,
                other => return Err(InputError(format!("unknown measurement kind {other:?}"))),
            };
            let target = match &m.target {
                TargetDoc::Position { row, col } => MeasurementTarget::Position {
                    row: *row,
                    col: *col,
                },
                TargetDoc::Triangle { relation, index } => MeasurementTarget::Triangle {
                    id: orthogonality_id(relation)?,
                    index: *index,
                },
            };
            let out = Measurement {
                kind,
                target,
                value: m.value,
                sigma: m.sigma,
            };
            out.validate()
                .map_err(|e| InputError(format!("invalid measurement: {e}")))?;
            Ok(out)
        })
        .collect()
}

/// Alternating row/column normalization (100 sweeps) projecting a
/// near-stochastic matrix onto the Birkhoff polytope; zero lines are
/// left untouched.
pub fn sinkhorn_project(m: &SquaredModuliMatrix, sweeps: usize) -> SquaredModuliMatrix {
    let n = m.dim();
    let mut entries: Vec<f64> = m.entries().to_vec();
    for _ in 0..sweeps {
        for i in 0..n {
            let s: f64 = entries[i * n..(i + 1) * n].iter().sum();
            if s > 0.0 {
                for v in &mut entries[i * n..(i + 1) * n] {
                    *v /= s;
                }
            }
        }
        for j in 0..n {
            let s: f64 = (0..n).map(|i| entries[i * n + j]).sum();
            if s > 0.0 {
                for i in 0..n {
                    entries[i * n + j] /= s;
                }
            }
        }
    }
    SquaredModuliMatrix::new(n, entries, 1e-9).expect("projection keeps entries in range")
}

/// Renders a JSON value with every float printed to 17 significant
/// digits, so identical invocations yield byte-identical reports.
pub fn render_json(value: &Value) -> String {
    let mut out = String::new();
    render_into(value, &mut out);
    out.push('\n');
    out
}

fn render_into(value: &Value, out: &mut String) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else if let Some(f) = n.as_f64() {
                out.push_str(&format!("{f:.16e}"));
            } else {
                out.push_str("null");
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            out.push('[');
            for (k, item) in items.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                render_into(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            out.push('{');
            for (k, (key, item)) in map.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(key.clone()).to_string());
                out.push(':');
                render_into(item, out);
            }
            out.push('}');
        }
    }
}

/// Floats go through this before entering a report so that NaN and
/// infinity degrade to `null` instead of invalid JSON.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

/// A tagged (real/imaginary/degenerate) value as a report object.
pub fn tagged_json(t: &Tagged) -> Value {
    match t {
        Tagged::Real(v) => serde_json::json!({"tag": "real", "value": num(*v)}),
        Tagged::Imaginary(v) => serde_json::json!({"tag": "imaginary", "value": num(*v)}),
        Tagged::Degenerate => serde_json::json!({"tag": "degenerate", "value": Value::Null}),
    }
}
