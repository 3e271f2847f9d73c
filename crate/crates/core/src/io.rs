//! Metric files.
//!
//! A metric file is a JSON document describing one metric on one chart,
//! optionally together with a candidate projective partner, a candidate
//! metrisability solution and a scalar field for the third-order checks:
//!
//! ```json
//! {
//!   "dim": 3,
//!   "coords": ["t", "x", "y"],
//!   "box": [[0.3, 1.2], [-1.0, 1.0], [-1.0, 1.0]],
//!   "params": { "C": 1.0 },
//!   "g": [["1", "0", "0"],
//!         ["0", "(2+sin(t))^2", "0"],
//!         ["0", "0", "(2+sin(t))^2"]],
//!   "partner_g": null,
//!   "sigma": null,
//!   "f_scalar": null
//! }
//! ```
//!
//! Component entries are strings in the expression mini-language (see
//! [`crate::parse`]). `sigma` holds the mixed components a^i_j of a
//! metrisability solution. Unknown keys are rejected, and every schema
//! violation is reported with a JSON pointer to the offending slot.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;
use serde::Deserialize;

use crate::chart::{Chart, MetricSpec};
use crate::expr::Expr;
use crate::metrisability::Solution;
use crate::parse::parse_expr;
use crate::tensor::SymbolicGeometry;
use crate::{Error, Result};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MetricFile {
    dim: usize,
    coords: Vec<String>,
    #[serde(rename = "box")]
    bounds: Vec<[f64; 2]>,
    #[serde(default)]
    params: BTreeMap<String, f64>,
    g: Vec<Vec<String>>,
    #[serde(default)]
    partner_g: Option<Vec<Vec<String>>>,
    #[serde(default)]
    sigma: Option<Vec<Vec<String>>>,
    #[serde(default)]
    f_scalar: Option<String>,
}

/// Everything a metric file can carry, parsed and validated.
pub struct MetricInput {
    pub metric: MetricSpec,
    pub partner: Option<MetricSpec>,
    /// Mixed components a^i_j of a candidate metrisability solution.
    pub sigma: Option<Array2<Expr>>,
    pub f_scalar: Option<Expr>,
}

impl MetricInput {
    /// The sigma matrix bound to a geometry, when the file supplied one.
    pub fn solution(&self, geom: Arc<SymbolicGeometry>) -> Option<Solution> {
        self.sigma
            .as_ref()
            .map(|m| Solution::from_mixed(geom, m.clone()))
    }
}

fn schema(pointer: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema {
        pointer: pointer.into(),
        message: message.into(),
    }
}

fn parse_component(pointer: &str, src: &str) -> Result<Expr> {
    parse_expr(src).map_err(|e| schema(pointer, format!("bad expression `{src}`: {e}")))
}

fn parse_matrix(key: &str, dim: usize, rows: &[Vec<String>]) -> Result<Array2<Expr>> {
    if rows.len() != dim {
        return Err(schema(
            format!("/{key}"),
            format!("expected {dim} rows, found {}", rows.len()),
        ));
    }
    let mut out = Array2::from_elem([dim, dim], Expr::constant(0.0));
    for (i, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return Err(schema(
                format!("/{key}/{i}"),
                format!("expected {dim} entries, found {}", row.len()),
            ));
        }
        for (j, src) in row.iter().enumerate() {
            out[[i, j]] = parse_component(&format!("/{key}/{i}/{j}"), src)?;
        }
    }
    Ok(out)
}

/// Parses a metric file from its JSON source text.
pub fn parse_metric_json(src: &str) -> Result<MetricInput> {
    let file: MetricFile =
        serde_json::from_str(src).map_err(|e| schema("/", e.to_string()))?;
    if file.coords.len() != file.dim {
        return Err(schema(
            "/coords",
            format!("{} names for dimension {}", file.coords.len(), file.dim),
        ));
    }
    if file.bounds.len() != file.dim {
        return Err(schema(
            "/box",
            format!("{} intervals for dimension {}", file.bounds.len(), file.dim),
        ));
    }
    let params: Vec<(String, f64)> = file.params.into_iter().collect();
    let g = parse_matrix("g", file.dim, &file.g)?;
    let chart = Chart::new(file.coords.clone(), file.bounds.clone())?;
    let metric = MetricSpec::new(chart, g, params.clone())?;

    let partner = match &file.partner_g {
        Some(rows) => {
            let pg = parse_matrix("partner_g", file.dim, rows)?;
            let chart = Chart::new(file.coords.clone(), file.bounds.clone())?;
            Some(MetricSpec::new(chart, pg, params.clone())?)
        }
        None => None,
    };
    let sigma = match &file.sigma {
        Some(rows) => Some(parse_matrix("sigma", file.dim, rows)?),
        None => None,
    };
    let f_scalar = match &file.f_scalar {
        Some(src) => Some(parse_component("/f_scalar", src)?),
        None => None,
    };
    Ok(MetricInput {
        metric,
        partner,
        sigma,
        f_scalar,
    })
}

/// Loads and parses a metric file from disk.
pub fn load_metric_file(path: &Path) -> Result<MetricInput> {
    let src = fs::read_to_string(path).map_err(|e| {
        schema("/", format!("cannot read {}: {e}", path.display()))
    })?;
    parse_metric_json(&src)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn expect_err(src: &str) -> Error {
        match parse_metric_json(src) {
            Ok(_) => panic!("expected a schema error"),
            Err(e) => e,
        }
    }

    fn warped_file() -> String {
        r#"{
            "dim": 3,
            "coords": ["t", "x", "y"],
            "box": [[0.3, 1.2], [-1.0, 1.0], [-1.0, 1.0]],
            "g": [["1", "0", "0"],
                  ["0", "(2+sin(t))^2", "0"],
                  ["0", "0", "(2+sin(t))^2"]]
        }"#
        .to_string()
    }

    #[test]
    fn well_formed_file_parses() {
        let input = parse_metric_json(&warped_file()).unwrap();
        assert_eq!(input.metric.dim(), 3);
        assert!(input.partner.is_none());
        let val = input
            .metric
            .eval(&input.metric.g[[1, 1]], &[0.5, 0.0, 0.0])
            .unwrap();
        let f = 2.0 + 0.5f64.sin();
        assert!((val - f * f).abs() < 1e-12);
    }

    #[test]
    fn unknown_key_is_rejected_by_name() {
        let src = warped_file().replace("\"dim\": 3,", "\"dim\": 3, \"warp\": \"sin(t)\",");
        let err = expect_err(&src);
        match err {
            Error::Schema { message, .. } => assert!(message.contains("warp"), "{message}"),
            other => panic!("expected schema error, got {other}"),
        }
    }

    #[test]
    fn asymmetric_metric_is_rejected_with_pointer() {
        let src = warped_file().replace(
            "[\"0\", \"(2+sin(t))^2\", \"0\"]",
            "[\"0.1\", \"(2+sin(t))^2\", \"0\"]",
        );
        let err = expect_err(&src);
        match err {
            Error::Schema { pointer, .. } => assert_eq!(pointer, "/g/0/1"),
            other => panic!("expected schema error, got {other}"),
        }
    }

    #[test]
    fn bad_expression_reports_its_slot() {
        let src = warped_file().replace("\"(2+sin(t))^2\", \"0\"]\n", "");
        // Break one entry instead: replace a zero with a dangling operator.
        let src = src.replace("[\"1\", \"0\", \"0\"]", "[\"1\", \"0\", \"2+*3\"]");
        let err = expect_err(&src);
        match err {
            Error::Schema { pointer, message } => {
                assert_eq!(pointer, "/g/0/2");
                assert!(message.contains("2+*3"), "{message}");
            }
            other => panic!("expected schema error, got {other}"),
        }
    }

    #[test]
    fn shape_mismatch_reports_the_row() {
        let src = warped_file().replace("[\"1\", \"0\", \"0\"]", "[\"1\", \"0\"]");
        let err = expect_err(&src);
        match err {
            Error::Schema { pointer, .. } => assert_eq!(pointer, "/g/0"),
            other => panic!("expected schema error, got {other}"),
        }
    }

    #[test]
    fn optional_attachments_come_through() {
        let src = warped_file().replace(
            "\"dim\": 3,",
            r#""dim": 3,
               "partner_g": [["1/(1+(2+sin(t))^2)^2", "0", "0"],
                             ["0", "(2+sin(t))^2/(1+(2+sin(t))^2)", "0"],
                             ["0", "0", "(2+sin(t))^2/(1+(2+sin(t))^2)"]],
               "f_scalar": "cos(t)",
            "#,
        );
        let input = parse_metric_json(&src).unwrap();
        assert!(input.partner.is_some());
        let f = input.f_scalar.unwrap();
        let v = input.metric.eval(&f, &[0.4, 0.0, 0.0]).unwrap();
        assert!((v - 0.4f64.cos()).abs() < 1e-12);
    }
}
