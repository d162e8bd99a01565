//! File formats: JSON systems and transforms, numeric CSV tables.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback_group::{SampledTransform, TransformKind};
use crate::linalg::{CMat, C64};
use crate::param_core::{ParamArc, ParamGrid, PolyMatrix, PolyScalar, SystemPair};

/// `[re, im]`.
pub type Entry = [f64; 2];

/// Polynomial entries as ascending `[re, im]` coefficient lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemJson {
    pub n: usize,
    pub m: usize,
    pub theta_lo: f64,
    pub theta_hi: f64,
    #[serde(rename = "A")]
    pub a: Vec<Vec<Vec<Entry>>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<Vec<Entry>>>,
}

fn poly_from_entries(coeffs: &[Entry]) -> PolyScalar {
    PolyScalar::new(coeffs.iter().map(|c| C64::new(c[0], c[1])).collect())
}

fn poly_matrix_from_json(rows: &[Vec<Vec<Entry>>], nrows: usize, ncols: usize, name: &str) -> Result<PolyMatrix> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Dimension(format!("{name} must be {nrows}x{ncols}")));
    }
    let entries = rows.iter().flat_map(|r| r.iter().map(|c| poly_from_entries(c))).collect();
    PolyMatrix::from_rows(nrows, ncols, entries)
}

fn poly_matrix_to_json(p: &PolyMatrix) -> Vec<Vec<Vec<Entry>>> {
    (0..p.nrows())
        .map(|i| {
            (0..p.ncols())
                .map(|j| p.get(i, j).coeffs().iter().map(|c| [c.re, c.im]).collect())
                .collect()
        })
        .collect()
}

impl SystemJson {
    pub fn to_system(&self) -> Result<SystemPair> {
        let arc = ParamArc::new(self.theta_lo, self.theta_hi)?;
        let a = poly_matrix_from_json(&self.a, self.n, self.n, "A")?;
        let b = poly_matrix_from_json(&self.b, self.n, self.m, "B")?;
        SystemPair::new(a, b, arc)
    }

    pub fn from_system(sys: &SystemPair) -> Self {
        Self {
            n: sys.n(),
            m: sys.m(),
            theta_lo: sys.arc().lo(),
            theta_hi: sys.arc().hi(),
            a: poly_matrix_to_json(sys.a()),
            b: poly_matrix_to_json(sys.b()),
        }
    }
}

pub fn parse_system(text: &str) -> Result<SystemPair> {
    let json: SystemJson =
        serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("system JSON: {e}")))?;
    json.to_system()
}

pub fn read_system(path: &Path) -> Result<SystemPair> {
    parse_system(&read_text(path)?)
}

pub fn system_to_json(sys: &SystemPair) -> String {
    to_json(&SystemJson::from_system(sys))
}

pub fn matrix_to_json(m: &CMat) -> Vec<Vec<Entry>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn matrix_from_json(rows: &[Vec<Entry>]) -> Result<CMat> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Dimension("ragged matrix".into()));
    }
    Ok(CMat::from_fn(nrows, ncols, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
}

/// Sampled transform: grid plus per-point `T`, `F`, `S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformJson {
    pub kind: TransformKind,
    pub n: usize,
    pub m: usize,
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub grid: Vec<f64>,
    #[serde(rename = "T")]
    pub t: Vec<Vec<Vec<Entry>>>,
    #[serde(rename = "F")]
    pub f: Vec<Vec<Vec<Entry>>>,
    #[serde(rename = "S")]
    pub s: Vec<Vec<Vec<Entry>>>,
}

impl TransformJson {
    pub fn from_transform(t: &SampledTransform) -> Self {
        let per = |get: fn(&SampledTransform, usize) -> &CMat| (0..t.len()).map(|k| matrix_to_json(get(t, k))).collect();
        Self {
            kind: t.kind(),
            n: t.n(),
            m: t.m(),
            theta_lo: t.grid().arc().lo(),
            theta_hi: t.grid().arc().hi(),
            grid: t.grid().points().to_vec(),
            t: per(SampledTransform::t),
            f: per(SampledTransform::f),
            s: per(SampledTransform::s),
        }
    }

    pub fn to_transform(&self) -> Result<SampledTransform> {
        let grid = ParamGrid::from_points(ParamArc::new(self.theta_lo, self.theta_hi)?, self.grid.clone())?;
        let mats = |v: &[Vec<Vec<Entry>>]| v.iter().map(|m| matrix_from_json(m)).collect::<Result<Vec<_>>>();
        SampledTransform::new(grid, mats(&self.t)?, mats(&self.f)?, mats(&self.s)?, self.kind)
    }
}

pub fn transform_to_json(t: &SampledTransform) -> String {
    to_json(&TransformJson::from_transform(t))
}

pub fn parse_transform(text: &str) -> Result<SampledTransform> {
    let json: TransformJson =
        serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("transform JSON: {e}")))?;
    json.to_transform()
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Machine-readable failure: kind, message and witness parameter.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub error: &'static str,
    pub message: String,
    pub theta: Option<f64>,
}

impl From<&Error> for ErrorReport {
    fn from(e: &Error) -> Self {
        let kind = match e {
            Error::Domain { .. } => "domain",
            Error::Range { .. } => "range",
            Error::Dimension(_) => "dimension",
            Error::Structural(_) => "structural",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Singular { .. } => "singular",
            Error::IllConditioned { .. } => "ill_conditioned",
            Error::NonConstantIndices { .. } => "non_constant_indices",
            Error::Precondition { .. } => "precondition",
        };
        Self {
            error: kind,
            message: e.to_string(),
            theta: e.witness(),
        }
    }
}

/// Full-precision scientific notation (17 significant digits).
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Header plus rows of preformatted cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8 cells")
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)
                .map_err(|e| Error::InvalidArgument(format!("cannot create {}: {e}", dir.display())))?;
        }
    }
    fs::write(path, text).map_err(|e| Error::InvalidArgument(format!("cannot write {}: {e}", path.display())))
}
