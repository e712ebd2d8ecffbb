//! JSON documents read and written by the `covext` binary.

use covext::cee::{Method, SolverOptions};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Solver settings that may ride along in a problem file.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_tol: Option<f64>,
}

impl FileOptions {
    /// `self` where set, `base` otherwise.
    pub fn or(self, base: FileOptions) -> FileOptions {
        FileOptions {
            tol: self.tol.or(base.tol),
            max_iter: self.max_iter.or(base.max_iter),
            method: self.method.or(base.method),
            rank_tol: self.rank_tol.or(base.rank_tol),
        }
    }

    pub fn solver(&self) -> SolverOptions {
        let d = SolverOptions::default();
        SolverOptions {
            tol: self.tol.unwrap_or(d.tol),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            method: self.method.map_or(d.method, Method::from),
            rank_tol: self.rank_tol.unwrap_or(d.rank_tol),
            ..d
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    FixedPoint,
    Newton,
}

impl From<MethodName> for Method {
    fn from(m: MethodName) -> Method {
        match m {
            MethodName::FixedPoint => Method::FixedPoint,
            MethodName::Newton => Method::Newton,
        }
    }
}

impl From<Method> for MethodName {
    fn from(m: Method) -> MethodName {
        match m {
            Method::FixedPoint => MethodName::FixedPoint,
            Method::Newton => MethodName::Newton,
        }
    }
}

/// Diagnostics attached by `estimate`; ignored by the solvers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateDiagnostics {
    /// Unnormalized estimates `c_0..c_n`.
    pub raw: Vec<f64>,
    pub c0: f64,
    /// Smallest eigenvalue of the normalized Toeplitz matrix.
    pub lambda_min: f64,
    pub positive: bool,
    pub estimator: String,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProblemFile {
    Covariance {
        /// `c_0..c_n`; normalized by `c_0` on load.
        c: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        options: Option<FileOptions>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        diagnostics: Option<EstimateDiagnostics>,
    },
    Interpolation {
        nodes: Vec<[f64; 2]>,
        values: Vec<[f64; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        options: Option<FileOptions>,
    },
}

impl ProblemFile {
    /// Parses and checks array lengths and finiteness.
    pub fn parse(bytes: &[u8]) -> Result<ProblemFile, CliError> {
        let p: ProblemFile = serde_json::from_slice(bytes).map_err(|e| CliError::BadData(format!("problem file: {e}")))?;
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<(), CliError> {
        let n = self.order();
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match self {
            ProblemFile::Covariance { c, .. } => {
                if c.len() < 2 {
                    return bad("`c` needs at least two entries (c_0 and c_1)");
                }
                if !finite(c) {
                    return bad("`c` has a non-finite entry");
                }
            }
            ProblemFile::Interpolation { nodes, values, .. } => {
                if nodes.len() < 2 {
                    return bad("need at least two interpolation points");
                }
                if nodes.len() != values.len() {
                    return bad(format!("{} nodes but {} values", nodes.len(), values.len()));
                }
                if !nodes.iter().chain(values).all(|z| finite(z)) {
                    return bad("non-finite node or value");
                }
            }
        }
        if let Some(s) = self.sigma_field() {
            if s.len() != n {
                return bad(format!("`sigma` has {} entries, expected {n}", s.len()));
            }
            if !finite(s) {
                return bad("`sigma` has a non-finite entry");
            }
        }
        Ok(())
    }

    /// The degree `n`.
    pub fn order(&self) -> usize {
        match self {
            ProblemFile::Covariance { c, .. } => c.len().saturating_sub(1),
            ProblemFile::Interpolation { nodes, .. } => nodes.len().saturating_sub(1),
        }
    }

    fn sigma_field(&self) -> Option<&Vec<f64>> {
        match self {
            ProblemFile::Covariance { sigma, .. } | ProblemFile::Interpolation { sigma, .. } => sigma.as_ref(),
        }
    }

    /// `σ_1..σ_n`, zeros when absent.
    pub fn sigma(&self) -> Vec<f64> {
        self.sigma_field().cloned().unwrap_or_else(|| vec![0.0; self.order()])
    }

    pub fn options(&self) -> FileOptions {
        match self {
            ProblemFile::Covariance { options, .. } | ProblemFile::Interpolation { options, .. } => {
                options.unwrap_or_default()
            }
        }
    }

    pub fn kind(&self) -> Kind {
        match self {
            ProblemFile::Covariance { .. } => Kind::Covariance,
            ProblemFile::Interpolation { .. } => Kind::Interpolation,
        }
    }
}

fn bad<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::BadData(msg.into()))
}

pub fn complex(p: [f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Covariance,
    Interpolation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    /// SHA-256 of the problem file bytes.
    pub input_sha256: String,
    pub command: String,
    pub method: MethodName,
    pub fell_back: bool,
    pub iterations: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub rank_tol: f64,
    /// Grid size for the positive-realness check.
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paper_factor: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalize: Option<bool>,
    pub version: String,
}

/// `f = scale · b/(2a)`, `Φ = rho² |σ|² / |a|²`. Polynomials are monic and
/// stored without the leading 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionFile {
    pub kind: Kind,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub sigma: Vec<f64>,
    pub rho: f64,
    pub scale: f64,
    /// Solution of the normalized problem, row by row.
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    pub rank: usize,
    pub residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance_match: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interp_residual: Option<f64>,
    pub positive_real_min: f64,
    pub provenance: Provenance,
}

impl SolutionFile {
    pub fn parse(bytes: &[u8]) -> Result<SolutionFile, CliError> {
        let s: SolutionFile =
            serde_json::from_slice(bytes).map_err(|e| CliError::BadData(format!("solution file: {e}")))?;
        let n = s.a.len();
        if s.b.len() != n || s.sigma.len() != n || s.p.len() != n || s.p.iter().any(|r| r.len() != n) {
            return bad(format!("solution arrays are not all of order {n}"));
        }
        if !(s.scale > 0.0) || !(s.rho > 0.0) {
            return bad("`scale` and `rho` must be positive");
        }
        Ok(s)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data serializes");
    s.push('\n');
    s
}
