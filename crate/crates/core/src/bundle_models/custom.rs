//! Bundles read from a JSON file with polynomial coefficient tables.
//!
//! ```json
//! {
//!   "format": "wanelab-bundle/1",
//!   "name": "tilted",
//!   "group": "torus:1",
//!   "base_dim": 2,
//!   "domain": { "lo": [-1, -1], "hi": [1, 1] },
//!   "christoffel": [ { "i": 0, "j": 0, "k": 1, "poly": [ { "coef": 0.5, "powers": [0, 1] } ] } ],
//!   "curvature":   [ { "a": 0, "i": 0, "j": 1, "poly": [ { "coef": 2.0, "powers": [0, 0] } ] } ],
//!   "connection":  [ { "a": 0, "i": 1, "poly": [ { "coef": 4.0, "powers": [1, 0] } ] } ]
//! }
//! ```
//!
//! Indices are zero-based. Christoffel entries are listed for `j < k` and
//! curvature entries for `i < j`; the skew partners are filled in. The
//! coordinate frame is taken as the orthonormal frame. `connection` is
//! optional and gives `A(∂_i)` component `a`; it is required for horizontal
//! lifts, Maurer-Cartan checks and for nonabelian groups.

use serde::{Deserialize, Serialize};

use super::{BundleModel, ChartBox, ChartData, Christoffel, Curvature};
use crate::error::{Result, WaneError};
use crate::lie_models::{make_builtin_group, GroupKind};
use crate::linalg::Mat;

pub const BUNDLE_FILE_FORMAT: &str = "wanelab-bundle/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Monomial {
    coef: f64,
    powers: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Polynomial(Vec<Monomial>);

impl Polynomial {
    fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .map(|t| {
                t.coef
                    * t.powers
                        .iter()
                        .zip(x)
                        .map(|(&p, v)| v.powi(p as i32))
                        .product::<f64>()
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ChristoffelEntry {
    i: usize,
    j: usize,
    k: usize,
    poly: Polynomial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CurvatureEntry {
    a: usize,
    i: usize,
    j: usize,
    poly: Polynomial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ConnectionEntry {
    a: usize,
    i: usize,
    poly: Polynomial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BundleFile {
    format: String,
    name: String,
    group: String,
    base_dim: usize,
    domain: ChartBox,
    #[serde(default)]
    christoffel: Vec<ChristoffelEntry>,
    #[serde(default)]
    curvature: Vec<CurvatureEntry>,
    connection: Option<Vec<ConnectionEntry>>,
}

#[derive(Debug, Clone, PartialEq)]
pub(super) struct CustomBundle {
    file: BundleFile,
    m: usize,
}

impl CustomBundle {
    pub(super) fn christoffel(&self, x: &[f64]) -> Christoffel {
        let mut g = Christoffel::zeros(self.file.base_dim);
        for e in &self.file.christoffel {
            let v = e.poly.eval(x);
            g.set(e.i, e.j, e.k, v);
            g.set(e.i, e.k, e.j, -v);
        }
        g
    }

    pub(super) fn curvature(&self, x: &[f64]) -> Curvature {
        let mut om = Curvature::zeros(self.m, self.file.base_dim);
        for e in &self.file.curvature {
            om.set_pair(e.a, e.i, e.j, e.poly.eval(x));
        }
        om
    }

    pub(super) fn connection(&self, x: &[f64]) -> Option<Mat> {
        let entries = self.file.connection.as_ref()?;
        let mut a = Mat::zeros(self.m, self.file.base_dim);
        for e in entries {
            a[(e.a, e.i)] += e.poly.eval(x);
        }
        Some(a)
    }

    pub(super) fn describe(&self) -> String {
        serde_json::to_string(&self.file).expect("bundle file serialises")
    }
}

fn bad(msg: impl Into<String>) -> WaneError {
    WaneError::BundleFile(msg.into())
}

/// Parses and validates a `wanelab-bundle/1` document.
pub fn parse_bundle_file(text: &str) -> Result<BundleModel> {
    let file: BundleFile = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    if file.format != BUNDLE_FILE_FORMAT {
        return Err(bad(format!(
            "format must be `{BUNDLE_FILE_FORMAT}`, found `{}`",
            file.format
        )));
    }
    let kind: GroupKind = file.group.parse()?;
    let group = make_builtin_group(kind);
    let (n, m) = (file.base_dim, group.dim_m);
    if n == 0 || file.domain.lo.len() != n || file.domain.hi.len() != n {
        return Err(bad("domain bounds must have base_dim entries"));
    }
    if file.domain.lo.iter().zip(&file.domain.hi).any(|(a, b)| a >= b) {
        return Err(bad("domain lower bounds must be below upper bounds"));
    }
    let check_poly = |p: &Polynomial, what: &str| -> Result<()> {
        if p.0.iter().any(|t| t.powers.len() != n || !t.coef.is_finite()) {
            return Err(bad(format!("{what}: every monomial needs {n} finite powers")));
        }
        Ok(())
    };
    let mut seen = std::collections::HashSet::new();
    for e in &file.christoffel {
        if e.i >= n || e.j >= e.k || e.k >= n {
            return Err(bad(format!("christoffel index ({},{},{}) needs j < k < {n}", e.i, e.j, e.k)));
        }
        if !seen.insert(("g", e.i, e.j, e.k)) {
            return Err(bad(format!("duplicate christoffel entry ({},{},{})", e.i, e.j, e.k)));
        }
        check_poly(&e.poly, "christoffel")?;
    }
    for e in &file.curvature {
        if e.a >= m || e.i >= e.j || e.j >= n {
            return Err(bad(format!("curvature index ({},{},{}) needs a < {m}, i < j < {n}", e.a, e.i, e.j)));
        }
        if !seen.insert(("o", e.a, e.i, e.j)) {
            return Err(bad(format!("duplicate curvature entry ({},{},{})", e.a, e.i, e.j)));
        }
        check_poly(&e.poly, "curvature")?;
    }
    match &file.connection {
        Some(entries) => {
            for e in entries {
                if e.a >= m || e.i >= n {
                    return Err(bad(format!("connection index ({},{}) out of range", e.a, e.i)));
                }
                check_poly(&e.poly, "connection")?;
            }
        }
        None if !group.is_abelian() => {
            return Err(bad("nonabelian groups need a connection table"));
        }
        None => {}
    }
    let name = format!("file:{}", file.name);
    Ok(BundleModel {
        name,
        base_dim_n: n,
        group,
        chart_domain: file.domain.clone(),
        data: ChartData::Custom(CustomBundle { file, m }),
    })
}
