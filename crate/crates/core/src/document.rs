//! JSON model documents.
//!
//! ```json
//! {
//!   "dimension": 2,
//!   "exponent": {"matrix": [[0.7, 0.1], [0.0, 0.3]]},
//!   "parameterization": {"spectral": {"A1": [[1, 0], [0, 1]], "A2": [[0, 0], [0, 0]]}}
//! }
//! ```
//!
//! The exponent may instead be `{"jordan": {"P": …, "P_im": …, "blocks":
//! [{"re": 0.5, "im": 0.0, "size": 2}]}}`, and the parameterization
//! `{"time": {"M_plus": …, "M_minus": …}}` or `{"bm": {"M": …, "N": …}}`.
//! Matrices are row-major nested arrays.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::covariance::{QuadratureConfig, TailMode};
use crate::error::{Error, Result};
use crate::linalg::{imag_part, real_part, CMat, RMat};
use crate::matfun::JordanBlockSpec;
use crate::model::{BrownianCaseParam, ExponentSpec, OfbmModel, Parameterization, SpectralParam, TimeParam};
use crate::simulate::FrequencyGridSpec;

pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub dimension: usize,
    pub exponent: ExponentDoc,
    pub parameterization: ParamDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<QuadratureOverrides>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency: Option<FrequencyGridSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ExponentDoc {
    Matrix(Rows),
    Jordan(JordanDoc),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JordanDoc {
    #[serde(rename = "P")]
    pub p: Rows,
    #[serde(rename = "P_im", default, skip_serializing_if = "Option::is_none")]
    pub p_im: Option<Rows>,
    pub blocks: Vec<BlockDoc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockDoc {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ParamDoc {
    Spectral {
        #[serde(rename = "A1")]
        a1: Rows,
        #[serde(rename = "A2", default, skip_serializing_if = "Option::is_none")]
        a2: Option<Rows>,
    },
    Time {
        #[serde(rename = "M_plus")]
        m_plus: Rows,
        #[serde(rename = "M_minus")]
        m_minus: Rows,
    },
    Bm {
        #[serde(rename = "M")]
        m: Rows,
        #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
        n: Option<Rows>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureOverrides {
    pub abs_tol: Option<f64>,
    pub rel_tol: Option<f64>,
    pub periods: Option<usize>,
    pub max_panels: Option<usize>,
    /// `"asymptotic"` or `"extended"`.
    pub tail: Option<String>,
}

impl QuadratureOverrides {
    pub fn apply(&self, mut cfg: QuadratureConfig) -> Result<QuadratureConfig> {
        if let Some(v) = self.abs_tol {
            cfg.abs_tol = v;
        }
        if let Some(v) = self.rel_tol {
            cfg.rel_tol = v;
        }
        if let Some(v) = self.periods {
            cfg.periods = v;
        }
        if let Some(v) = self.max_panels {
            cfg.max_panels = v;
        }
        if let Some(t) = &self.tail {
            cfg.tail = match t.as_str() {
                "asymptotic" => TailMode::AsymptoticCorrection,
                "extended" => TailMode::ExtendedTruncation,
                other => return Err(invalid("quadrature.tail", format!("unknown tail mode {other:?}"))),
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn invalid(path: &str, message: impl Into<String>) -> Error {
    Error::Validation { path: path.to_string(), message: message.into() }
}

fn matrix(rows: &Rows, n: usize, path: &str) -> Result<RMat> {
    if rows.len() != n {
        return Err(invalid(path, format!("expected {n} rows, found {}", rows.len())));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(invalid(&format!("{path}[{i}]"), format!("expected {n} columns, found {}", r.len())));
        }
        if let Some(j) = r.iter().position(|v| !v.is_finite()) {
            return Err(invalid(&format!("{path}[{i}][{j}]"), "non-finite entry"));
        }
    }
    Ok(RMat::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn rows_of(m: &RMat) -> Rows {
    (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect()
}

impl ModelDocument {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents always serialize")
    }

    pub fn exponent_spec(&self) -> Result<ExponentSpec> {
        let n = self.dimension;
        if n == 0 {
            return Err(invalid("dimension", "must be positive"));
        }
        let spec = match &self.exponent {
            ExponentDoc::Matrix(rows) => ExponentSpec::from_matrix(matrix(rows, n, "exponent.matrix")?),
            ExponentDoc::Jordan(j) => {
                let re = matrix(&j.p, n, "exponent.jordan.P")?;
                let im = match &j.p_im {
                    Some(rows) => matrix(rows, n, "exponent.jordan.P_im")?,
                    None => RMat::zeros(n, n),
                };
                let total: usize = j.blocks.iter().map(|b| b.size).sum();
                if total != n || j.blocks.iter().any(|b| b.size == 0) {
                    return Err(invalid("exponent.jordan.blocks", format!("block sizes sum to {total}, expected {n}")));
                }
                let p = CMat::from_fn(n, n, |r, c| Complex64::new(re[(r, c)], im[(r, c)]));
                let blocks = j.blocks.iter().map(|b| JordanBlockSpec::new(Complex64::new(b.re, b.im), b.size)).collect();
                ExponentSpec::from_jordan(p, blocks)
            }
        };
        spec.map_err(|e| match e {
            Error::RootOutOfRange { .. } | Error::InvalidJordan(_) | Error::NonDiagonalizable { .. } => {
                invalid("exponent", e.to_string())
            }
            other => other,
        })
    }

    pub fn parameterization(&self) -> Result<Parameterization> {
        let n = self.dimension;
        let zero = RMat::zeros(n, n);
        Ok(match &self.parameterization {
            ParamDoc::Spectral { a1, a2 } => Parameterization::Spectral(SpectralParam::new(
                matrix(a1, n, "parameterization.spectral.A1")?,
                match a2 {
                    Some(r) => matrix(r, n, "parameterization.spectral.A2")?,
                    None => zero,
                },
            )),
            ParamDoc::Time { m_plus, m_minus } => Parameterization::Time(TimeParam {
                m_plus: matrix(m_plus, n, "parameterization.time.M_plus")?,
                m_minus: matrix(m_minus, n, "parameterization.time.M_minus")?,
            }),
            ParamDoc::Bm { m, n: nn } => Parameterization::Brownian(BrownianCaseParam {
                m: matrix(m, n, "parameterization.bm.M")?,
                n: match nn {
                    Some(r) => matrix(r, n, "parameterization.bm.N")?,
                    None => zero,
                },
            }),
        })
    }

    pub fn model(&self) -> Result<OfbmModel> {
        let e = self.exponent_spec()?;
        let p = self.parameterization()?;
        OfbmModel::new(e, p).map_err(|err| match err {
            Error::WrongExponent => invalid("parameterization.bm", "needs exponent I/2"),
            Error::HalfRoot => invalid("parameterization.time", "undefined when a root has real part 1/2"),
            Error::Dimension(m) => invalid("parameterization", m),
            other => other,
        })
    }

    pub fn quadrature_config(&self) -> Result<QuadratureConfig> {
        match &self.quadrature {
            Some(o) => o.apply(QuadratureConfig::default()),
            None => Ok(QuadratureConfig::default()),
        }
    }

    /// Same exponent with another parameterization.
    pub fn with_param(&self, param: &Parameterization) -> Self {
        let parameterization = match param {
            Parameterization::Spectral(a) => ParamDoc::Spectral { a1: rows_of(&a.a1), a2: Some(rows_of(&a.a2)) },
            Parameterization::Time(m) => ParamDoc::Time { m_plus: rows_of(&m.m_plus), m_minus: rows_of(&m.m_minus) },
            Parameterization::Brownian(b) => ParamDoc::Bm { m: rows_of(&b.m), n: Some(rows_of(&b.n)) },
        };
        Self { parameterization, ..self.clone() }
    }
}

/// Document for an exponent given by its real matrix or Jordan data.
pub fn exponent_doc(e: &ExponentSpec) -> ExponentDoc {
    let dec = e.decomposition();
    if dec.is_diagonalizable() && dec.blocks().iter().all(|b| b.size == 1) {
        ExponentDoc::Matrix(rows_of(e.h()))
    } else {
        let p = dec.p();
        let im = imag_part(p);
        ExponentDoc::Jordan(JordanDoc {
            p: rows_of(&real_part(p)),
            p_im: if im.iter().all(|v| *v == 0.0) { None } else { Some(rows_of(&im)) },
            blocks: dec
                .blocks()
                .iter()
                .map(|b| BlockDoc { re: b.eigenvalue.re, im: b.eigenvalue.im, size: b.size })
                .collect(),
        })
    }
}

/// Built-in model documents, embedded at build time.
pub const FIXTURES: &[(&str, &str)] = &[
    ("remark_3_2", include_str!("../fixtures/remark_3_2.json")),
    ("remark_4_2", include_str!("../fixtures/remark_4_2.json")),
    ("example_3_5", include_str!("../fixtures/example_3_5.json")),
    ("example_6_4", include_str!("../fixtures/example_6_4.json")),
    ("example_6_5", include_str!("../fixtures/example_6_5.json")),
    ("example_7_3", include_str!("../fixtures/example_7_3.json")),
    ("fbm_h03", include_str!("../fixtures/fbm_h03.json")),
    ("fbm_h05", include_str!("../fixtures/fbm_h05.json")),
    ("fbm_h07", include_str!("../fixtures/fbm_h07.json")),
    ("obm", include_str!("../fixtures/obm.json")),
    ("diag_lrd", include_str!("../fixtures/diag_lrd.json")),
    ("complex_time", include_str!("../fixtures/complex_time.json")),
];

pub fn fixture(name: &str) -> Result<OfbmModel> {
    let (_, text) = FIXTURES
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::InvalidInput(format!("unknown fixture {name}")))?;
    ModelDocument::parse(text)?.model()
}

pub fn all_fixtures() -> Result<Vec<(&'static str, OfbmModel)>> {
    FIXTURES.iter().map(|(n, t)| Ok((*n, ModelDocument::parse(t)?.model()?))).collect()
}
