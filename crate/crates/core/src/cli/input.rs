//! Instance, representative and chart files (JSON or TOML).

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cproj_geometry::{CProjectiveData, LineBundleData, OneForm};
use crate::error::{Error, Result};
use crate::polynomial_algebra::{parse_rational, RationalField};
use crate::quaternionic_holonomy::{MatrixField, QuaternionicChart};

fn default_radius() -> f64 {
    0.8
}

fn default_grid() -> usize {
    3
}

/// `{ n, gamma: { "k,i,j": literal }, theta: [literal], domain_radius, grid }`
/// with 1-based indices; omitted entries are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub n: usize,
    #[serde(default)]
    pub gamma: BTreeMap<String, String>,
    #[serde(default)]
    pub theta: Vec<String>,
    #[serde(default = "default_radius")]
    pub domain_radius: f64,
    /// Sample points per complex axis for pointwise checks.
    #[serde(default = "default_grid")]
    pub grid: usize,
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub file: InstanceFile,
    pub data: CProjectiveData,
    pub bundle: LineBundleData,
    /// SHA-256 of the canonical JSON form.
    pub hash: String,
}

fn line_column(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |p| p + 1) + 1;
    (line, column)
}

/// Reads JSON or TOML by extension.
pub fn read_structured<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let src = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(&src).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    } else {
        toml::from_str(&src).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_column(&src, s.start));
            Error::Parse {
                line,
                column,
                message: e.message().to_string(),
            }
        })
    }
}

fn literal(src: &str, n: usize, context: &str) -> Result<RationalField> {
    parse_rational(src, n).map_err(|e| match e {
        Error::Parse { line, column, message } => Error::Parse {
            line,
            column,
            message: format!("{context}: {message}"),
        },
        other => other,
    })
}

fn indices(key: &str, n: usize, arity: usize) -> Result<Vec<usize>> {
    let parts: Vec<&str> = key.split(',').map(str::trim).collect();
    let bad = || Error::InvalidInput(format!("bad index key \"{key}\""));
    if parts.len() != arity {
        return Err(bad());
    }
    parts
        .iter()
        .map(|p| match p.parse::<usize>() {
            Ok(k) if (1..=n).contains(&k) => Ok(k - 1),
            _ => Err(bad()),
        })
        .collect()
}

impl InstanceFile {
    pub fn build(&self) -> Result<Instance> {
        let n = self.n;
        if n < 2 {
            return Err(Error::InvalidInput(format!("n must be at least 2, got {n}")));
        }
        if !(self.domain_radius > 0.0) || self.grid == 0 {
            return Err(Error::InvalidInput("domain_radius and grid must be positive".into()));
        }
        let mut entries = BTreeMap::new();
        for (key, src) in &self.gamma {
            let ix = indices(key, n, 3)?;
            entries.insert((ix[0], ix[1], ix[2]), literal(src, n, &format!("gamma \"{key}\""))?);
        }
        let data = CProjectiveData::from_entries(n, entries)?;
        let bundle = if self.theta.is_empty() {
            LineBundleData::trivial(n)
        } else {
            if self.theta.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: self.theta.len(),
                });
            }
            let theta = self
                .theta
                .iter()
                .enumerate()
                .map(|(i, s)| literal(s, n, &format!("theta[{}]", i + 1)))
                .collect::<Result<Vec<_>>>()?;
            LineBundleData::new(theta)?
        };
        let canonical = serde_json::to_vec(self).map_err(|e| Error::InvalidInput(e.to_string()))?;
        Ok(Instance {
            file: self.clone(),
            data,
            bundle,
            hash: hex::encode(Sha256::digest(&canonical)),
        })
    }
}

pub fn load_instance(path: &Path) -> Result<Instance> {
    read_structured::<InstanceFile>(path)?.build()
}

/// Holomorphic components `γ_i` of a one-form changing the representative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepFile {
    pub gamma: Vec<String>,
}

pub fn load_rep(path: &Path, n: usize) -> Result<OneForm> {
    let file: RepFile = read_structured(path)?;
    if file.gamma.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: file.gamma.len(),
        });
    }
    let comps = file
        .gamma
        .iter()
        .enumerate()
        .map(|(i, s)| literal(s, n, &format!("gamma[{}]", i + 1)))
        .collect::<Result<Vec<_>>>()?;
    Ok(OneForm::from_holomorphic(comps))
}

/// Quaternionic chart over real coordinates `z1..z{dim}`: three row-major
/// frame matrices, Christoffel entries `"a,b,c"` (mirrored in `b, c`), and
/// optionally the structure the connection should preserve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartFile {
    pub dim: usize,
    pub frame: [Vec<String>; 3],
    #[serde(default)]
    pub christoffels: BTreeMap<String, String>,
    #[serde(default)]
    pub preserved: Option<Vec<String>>,
}

fn matrix_field(dim: usize, entries: &[String], name: &str) -> Result<MatrixField> {
    if entries.len() != dim * dim {
        return Err(Error::Dimension {
            expected: dim * dim,
            got: entries.len(),
        });
    }
    let fields = entries
        .iter()
        .enumerate()
        .map(|(k, s)| literal(s, dim, &format!("{name}[{},{}]", k / dim + 1, k % dim + 1)))
        .collect::<Result<Vec<_>>>()?;
    MatrixField::new(dim, fields)
}

impl ChartFile {
    pub fn build(&self) -> Result<(QuaternionicChart, Option<MatrixField>)> {
        let m = self.dim;
        let names = ["I1", "I2", "I3"];
        let frame = [
            matrix_field(m, &self.frame[0], names[0])?,
            matrix_field(m, &self.frame[1], names[1])?,
            matrix_field(m, &self.frame[2], names[2])?,
        ];
        let mut gamma = vec![RationalField::zero(m); m * m * m];
        let mut set = vec![false; m * m * m];
        for (key, src) in &self.christoffels {
            let ix = indices(key, m, 3)?;
            let f = literal(src, m, &format!("christoffels \"{key}\""))?;
            for (b, c) in [(ix[1], ix[2]), (ix[2], ix[1])] {
                let k = (ix[0] * m + b) * m + c;
                if set[k] && gamma[k] != f {
                    return Err(Error::InvalidInput(format!("conflicting Christoffel entries for \"{key}\"")));
                }
                gamma[k] = f.clone();
                set[k] = true;
            }
        }
        let preserved = match &self.preserved {
            Some(p) => Some(matrix_field(m, p, "preserved")?),
            None => None,
        };
        Ok((QuaternionicChart::new(frame, gamma)?, preserved))
    }
}

pub fn load_chart(path: &Path) -> Result<(QuaternionicChart, Option<MatrixField>)> {
    read_structured::<ChartFile>(path)?.build()
}

