//! JSON helpers: every float is written with 17 significant digits so that
//! parsing it back yields the identical `f64`.

use std::str::FromStr;

use std::path::Path;

use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Number, Value};

use crate::error::{Error, Result};
use crate::model::{ExpSumModel, Term};
use crate::recovery::{Mode, PolishReport, RecoveryResult};

/// Decimal text with 17 significant digits, `None` for non-finite input.
pub fn sig17(x: f64) -> Option<String> {
    x.is_finite().then(|| format!("{x:.16e}"))
}

/// JSON number with 17 significant digits; non-finite values become `null`.
pub fn number17(x: f64) -> Value {
    match sig17(x) {
        Some(s) => Value::Number(Number::from_str(&s).expect("formatted float is valid JSON")),
        None => Value::Null,
    }
}

pub fn f64_17<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    match sig17(*x) {
        Some(text) => {
            let n = Number::from_str(&text).map_err(serde::ser::Error::custom)?;
            s.serialize_some(&n)
        }
        None => s.serialize_none(),
    }
}

pub fn opt_f64_17<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => f64_17(v, s),
        None => s.serialize_none(),
    }
}

pub fn vec_f64_17<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for x in xs {
        seq.serialize_element(&number17(*x))?;
    }
    seq.end()
}

/// Reads a number, mapping `null` to NaN.
pub fn f64_or_nan<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

fn json_err(path: &str, e: serde_json::Error) -> Error {
    Error::Parse {
        path: path.to_string(),
        line: e.line(),
        message: e.to_string(),
    }
}

/// Parses a model document `{"terms":[{"c":…,"alpha":…}],"constant":…}`.
/// Result documents carry the same two fields, so they load as models too.
pub fn model_from_str(text: &str, path: &str) -> Result<ExpSumModel> {
    #[derive(Deserialize)]
    struct Raw {
        terms: Vec<Term>,
        #[serde(default)]
        constant: Option<f64>,
    }
    let raw: Raw = serde_json::from_str(text).map_err(|e| json_err(path, e))?;
    ExpSumModel::new(raw.terms, raw.constant).map_err(|e| Error::Parse {
        path: path.to_string(),
        line: 0,
        message: e.to_string(),
    })
}

pub fn read_model(path: &Path) -> Result<ExpSumModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    model_from_str(&text, &path.display().to_string())
}

pub fn model_to_string(model: &ExpSumModel) -> String {
    serde_json::to_string_pretty(model).expect("model serializes")
}

/// Serialized form of a recovery result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub mode: Mode,
    /// Sorted by rate.
    pub terms: Vec<Term>,
    #[serde(serialize_with = "opt_f64_17")]
    pub constant: Option<f64>,
    #[serde(default, serialize_with = "opt_f64_17")]
    pub shift: Option<f64>,
    #[serde(default, serialize_with = "opt_f64_17")]
    pub constant_before_unshift: Option<f64>,
    pub algebraic_terms: Vec<Term>,
    #[serde(serialize_with = "vec_f64_17")]
    pub x_vector: Vec<f64>,
    /// `a₀..a_{m−1}` of the monic polynomial `α^m + Σ a_j α^j`.
    #[serde(serialize_with = "vec_f64_17")]
    pub frobenius_low_coeffs: Vec<f64>,
    #[serde(serialize_with = "f64_17", deserialize_with = "f64_or_nan")]
    pub cond_estimate: f64,
    #[serde(serialize_with = "f64_17", deserialize_with = "f64_or_nan")]
    pub collocation_residual: f64,
    #[serde(serialize_with = "f64_17", deserialize_with = "f64_or_nan")]
    pub reconstruction_residual: f64,
    pub selection: Vec<usize>,
    pub polish: PolishDocument,
    pub warnings: Vec<String>,
    #[serde(serialize_with = "f64_17", deserialize_with = "f64_or_nan")]
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolishDocument {
    pub applied: bool,
    pub iterations: usize,
    #[serde(serialize_with = "f64_17", deserialize_with = "f64_or_nan")]
    pub initial_cost: f64,
    #[serde(serialize_with = "f64_17", deserialize_with = "f64_or_nan")]
    pub final_cost: f64,
    #[serde(serialize_with = "f64_17", deserialize_with = "f64_or_nan")]
    pub max_relative_change: f64,
}

impl From<&PolishReport> for PolishDocument {
    fn from(p: &PolishReport) -> Self {
        Self {
            applied: p.applied,
            iterations: p.iterations,
            initial_cost: p.initial_cost,
            final_cost: p.final_cost,
            max_relative_change: p.max_relative_change,
        }
    }
}

impl ResultDocument {
    pub fn from_result(result: &RecoveryResult, wall_time_s: f64) -> Self {
        Self {
            mode: result.mode_used,
            terms: result.model.sorted_by_rate().terms().to_vec(),
            constant: result.model.constant(),
            shift: result.shift,
            constant_before_unshift: result.constant_before_unshift,
            algebraic_terms: result.algebraic_model.sorted_by_rate().terms().to_vec(),
            x_vector: result.x_vector.clone(),
            frobenius_low_coeffs: result.frobenius.low_coeffs().to_vec(),
            cond_estimate: result.cond_estimate,
            collocation_residual: result.collocation_residual,
            reconstruction_residual: result.reconstruction_residual,
            selection: result.selection.clone(),
            polish: (&result.polish).into(),
            warnings: result.warnings.clone(),
            wall_time_s,
        }
    }

    pub fn model(&self) -> Result<ExpSumModel> {
        ExpSumModel::new(self.terms.clone(), self.constant)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }

    pub fn from_json(text: &str, path: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| json_err(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(sig17(0.1).unwrap(), "1.0000000000000001e-1");
        assert_eq!(number17(f64::NAN), Value::Null);
    }

    proptest! {
        #[test]
        fn round_trips_exactly(bits in any::<u64>()) {
            let x = f64::from_bits(bits);
            prop_assume!(x.is_finite());
            let text = serde_json::to_string(&number17(x)).unwrap();
            let back: f64 = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }

        #[test]
        fn model_round_trips_exactly(c in -1e3f64..1e3, a in -5f64..5.0, k in proptest::option::of(-10f64..10.0)) {
            prop_assume!(a != 0.0);
            let model = ExpSumModel::new(vec![Term::new(c, a)], k).unwrap();
            let back = model_from_str(&model_to_string(&model), "mem").unwrap();
            prop_assert_eq!(back, model);
        }
    }

    #[test]
    fn result_document_round_trip() {
        use crate::recovery::{recover, records_from_model, RecoveryOptions, RecoveryProblem};
        let truth = ExpSumModel::from_parts(&[1.0, 2.0], &[-1.0, 0.5], None).unwrap();
        let recs = records_from_model(&truth, &[0.0, 0.5, 1.0, 1.5, 2.0], 2).unwrap();
        let res = recover(&RecoveryProblem::strict(2, recs).unwrap(), &RecoveryOptions::default()).unwrap();
        let doc = ResultDocument::from_result(&res, 0.25);
        let back = ResultDocument::from_json(&doc.to_json(), "mem").unwrap();
        assert_eq!(back, doc);
        assert_eq!(model_from_str(&doc.to_json(), "mem").unwrap(), res.model);
    }

    #[test]
    fn rejects_invalid_model() {
        assert!(model_from_str(r#"{"terms":[]}"#, "m").is_err());
        assert!(model_from_str(r#"{"terms":[{"c":1,"alpha":0}]}"#, "m").is_err());
        assert!(model_from_str("{", "m").is_err());
    }
}
