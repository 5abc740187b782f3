use serde::{Deserialize, Serialize};

use crate::error::{Result, WaneError};
use crate::linalg::{Mat, Vector};

/// Slack allowed in the triangle inequality.
pub const TRIANGLE_SLACK: f64 = 1e-9;

/// A finite metric space with a distinguished basepoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteMetricSpace {
    pub labels: Vec<String>,
    pub dist: Mat,
    pub basepoint: usize,
}

impl FiniteMetricSpace {
    pub fn new(labels: Vec<String>, dist: Mat, basepoint: usize) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(WaneError::InvalidInput("metric space is empty".into()));
        }
        if dist.shape() != (n, n) {
            return Err(WaneError::InvalidInput(format!(
                "{n} labels but a {}×{} distance matrix",
                dist.nrows(),
                dist.ncols()
            )));
        }
        if basepoint >= n {
            return Err(WaneError::InvalidInput(format!("basepoint {basepoint} out of range")));
        }
        for i in 0..n {
            if dist[(i, i)] != 0.0 {
                return Err(WaneError::InvalidInput(format!("d({i},{i}) is not zero")));
            }
            for j in 0..n {
                let d = dist[(i, j)];
                if !(d >= 0.0 && d.is_finite()) {
                    return Err(WaneError::InvalidInput(format!("d({i},{j}) = {d} is not a distance")));
                }
                if d != dist[(j, i)] {
                    return Err(WaneError::InvalidInput(format!("d({i},{j}) ≠ d({j},{i})")));
                }
            }
        }
        if let Some((i, j, k)) = triangle_violation(&dist) {
            return Err(WaneError::InvalidInput(format!(
                "triangle inequality fails on ({i},{j},{k})"
            )));
        }
        Ok(FiniteMetricSpace { labels, dist, basepoint })
    }

    /// Euclidean distances between `points`, labelled by index; basepoint 0.
    pub fn from_points(points: &[Vector]) -> Result<Self> {
        let n = points.len();
        let dist = Mat::from_fn(n, n, |i, j| (&points[i] - &points[j]).norm());
        FiniteMetricSpace::new(index_labels(n), symmetrise(dist), 0)
    }

    /// Largest metric below a symmetric dissimilarity: shortest paths through
    /// the sample points.
    pub fn from_dissimilarity(labels: Vec<String>, d: Mat, basepoint: usize) -> Result<Self> {
        FiniteMetricSpace::new(labels, metric_closure(&symmetrise(d)), basepoint)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[(i, j)]
    }

    pub fn diameter(&self) -> f64 {
        self.dist.max()
    }

    /// Header row of labels, then one row of distances per point.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| WaneError::InvalidInput(e.to_string());
        w.write_record(&self.labels).map_err(io)?;
        for i in 0..self.len() {
            w.write_record(self.dist.row(i).iter().map(|x| format!("{x:?}"))).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| WaneError::InvalidInput(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Reads the CSV layout of [`to_csv`](Self::to_csv); the basepoint is 0.
    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |e: csv::Error| WaneError::InvalidInput(format!("metric csv: {e}"));
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let labels: Vec<String> = r.headers().map_err(bad)?.iter().map(str::to_owned).collect();
        let n = labels.len();
        let mut values = Vec::with_capacity(n * n);
        for rec in r.records() {
            let rec = rec.map_err(bad)?;
            for field in rec.iter() {
                values.push(field.trim().parse::<f64>().map_err(|e| {
                    WaneError::InvalidInput(format!("metric csv: `{field}`: {e}"))
                })?);
            }
        }
        if values.len() != n * n {
            return Err(WaneError::InvalidInput(format!(
                "metric csv: expected {n}×{n} values, found {}",
                values.len()
            )));
        }
        FiniteMetricSpace::new(labels, Mat::from_row_slice(n, n, &values), 0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("metric spaces serialise")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: FiniteMetricSpace =
            serde_json::from_str(text).map_err(|e| WaneError::InvalidInput(format!("metric json: {e}")))?;
        FiniteMetricSpace::new(raw.labels, raw.dist, raw.basepoint)
    }
}

pub(crate) fn index_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

fn symmetrise(d: Mat) -> Mat {
    let n = d.nrows();
    Mat::from_fn(n, n, |i, j| if i == j { 0.0 } else { d[(i, j)].min(d[(j, i)]) })
}

/// Floyd-Warshall shortest paths.
pub fn metric_closure(d: &Mat) -> Mat {
    let n = d.nrows();
    let mut out = d.clone();
    for k in 0..n {
        for i in 0..n {
            let dik = out[(i, k)];
            for j in 0..n {
                let via = dik + out[(k, j)];
                if via < out[(i, j)] {
                    out[(i, j)] = via;
                }
            }
        }
    }
    out
}

fn triangle_violation(d: &Mat) -> Option<(usize, usize, usize)> {
    let n = d.nrows();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if d[(i, k)] > d[(i, j)] + d[(j, k)] + TRIANGLE_SLACK {
                    return Some((i, j, k));
                }
            }
        }
    }
    None
}
