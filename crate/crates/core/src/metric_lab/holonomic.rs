use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WaneError};
use crate::lie_models::GroupElementSample;
use crate::linalg::{operator_norm, ortho_residual, Mat, Vector};
use crate::orbit::{distance_to_set, orbit};

/// Tolerance for matching an entry with the inverse of another.
pub const INVERSE_MATCH_TOL: f64 = 1e-6;

/// Sampled holonomy at one point, each element tagged with the length of a
/// loop producing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolonomyDictionary {
    pub entries: Vec<GroupElementSample>,
    pub acting_dim: usize,
}

impl HolonomyDictionary {
    /// Adds the identity and the inverse of every sample.
    pub fn from_samples(samples: Vec<GroupElementSample>, acting_dim: usize) -> Result<Self> {
        if samples.iter().any(|s| s.matrix.shape() != (acting_dim, acting_dim)) {
            return Err(WaneError::InvalidInput(format!("samples must be {acting_dim}×{acting_dim}")));
        }
        let mut entries = vec![GroupElementSample::identity(acting_dim)];
        for s in samples {
            let inv = s.inverse();
            entries.push(s);
            entries.push(inv);
        }
        Ok(HolonomyDictionary { entries, acting_dim })
    }

    /// Every word of length at most `depth` in `gens` and their inverses, with
    /// `L = scale · (word length)`; this `L` is a group norm on the ball.
    pub fn word_length(gens: &[Mat], scale: f64, depth: usize) -> Result<Self> {
        let k = gens.first().map_or(0, |g| g.nrows());
        if k == 0 {
            return Err(WaneError::InvalidInput("no generators".into()));
        }
        let key = |m: &Mat| -> Vec<i64> { m.iter().map(|x| (x * 1e8).round() as i64).collect() };
        let mut letters: Vec<Mat> = gens.to_vec();
        letters.extend(gens.iter().map(|g| g.transpose()));
        let id = Mat::identity(k, k);
        let mut seen = HashSet::from([key(&id)]);
        let mut entries = vec![GroupElementSample::identity(k)];
        let mut frontier = vec![id];
        for len in 1..=depth {
            let mut next = Vec::new();
            for w in &frontier {
                for l in &letters {
                    let x = l * w;
                    if seen.insert(key(&x)) {
                        entries.push(GroupElementSample::new(x.clone(), scale * len as f64)?);
                        next.push(x);
                    }
                }
            }
            frontier = next;
        }
        Ok(HolonomyDictionary { entries, acting_dim: k })
    }

    /// Adds every product of two entries, with lengths added: the transport
    /// of a concatenated loop. Near-duplicates keep the shorter length.
    pub fn with_products(&self) -> Self {
        let key = |m: &Mat| -> Vec<i64> { m.iter().map(|x| (x * 1e9).round() as i64).collect() };
        let mut best: std::collections::HashMap<Vec<i64>, usize> = std::collections::HashMap::new();
        let mut entries: Vec<GroupElementSample> = Vec::new();
        let mut push = |m: Mat, l: f64, entries: &mut Vec<GroupElementSample>| {
            let k = key(&m);
            match best.get(&k) {
                Some(&i) if entries[i].source_length <= l => {}
                Some(&i) => entries[i].source_length = l,
                None => {
                    best.insert(k, entries.len());
                    entries.push(GroupElementSample { matrix: m, source_length: l });
                }
            }
        };
        for e in &self.entries {
            push(e.matrix.clone(), e.source_length, &mut entries);
        }
        for a in &self.entries {
            for b in &self.entries {
                push(&a.matrix * &b.matrix, a.source_length + b.source_length, &mut entries);
            }
        }
        HolonomyDictionary { entries, acting_dim: self.acting_dim }
    }

    /// Checks the identity entry and closure under inverses.
    pub fn validate(&self) -> Result<()> {
        let id = Mat::identity(self.acting_dim, self.acting_dim);
        if !self.entries.iter().any(|e| e.source_length == 0.0 && (&e.matrix - &id).amax() < INVERSE_MATCH_TOL) {
            return Err(WaneError::InvalidInput("dictionary lacks the identity".into()));
        }
        for e in &self.entries {
            if ortho_residual(&e.matrix) > 1e-8 {
                return Err(WaneError::InvalidInput("dictionary entry is not orthogonal".into()));
            }
            let inv = e.matrix.transpose();
            let matched = self.entries.iter().any(|f| {
                (&f.matrix - &inv).amax() < INVERSE_MATCH_TOL && (f.source_length - e.source_length).abs() < 1e-12
            });
            if !matched {
                return Err(WaneError::InvalidInput("dictionary is not closed under inverses".into()));
            }
        }
        Ok(())
    }

    /// Count of triples `(a, v, w)` from `probes` violating
    /// `‖v − w‖² − ‖av − w‖² ≤ L(a)²` (beyond `slack`).
    pub fn inequality_violations(&self, probes: &[Vector], slack: f64) -> usize {
        let mut count = 0;
        for e in &self.entries {
            for v in probes {
                let av = &e.matrix * v;
                for w in probes {
                    let lhs = (v - w).norm_squared() - (&av - w).norm_squared();
                    if lhs > e.source_length.powi(2) + slack {
                        count += 1;
                    }
                }
            }
        }
        count
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthEstimate {
    Value(f64),
    /// No dictionary entry lies within the tolerance.
    Unreached,
}

pub fn length_norm_estimate(hd: &HolonomyDictionary, a: &Mat, tol: f64) -> LengthEstimate {
    hd.entries
        .iter()
        .filter(|e| operator_norm(&(&e.matrix - a)) <= tol)
        .map(|e| e.source_length)
        .min_by(f64::total_cmp)
        .map_or(LengthEstimate::Unreached, LengthEstimate::Value)
}

/// `min_a √(L(a)² + ‖u − a·v‖²)` over the dictionary and the identity.
pub fn holonomic_distance(hd: &HolonomyDictionary, u: &Vector, v: &Vector) -> f64 {
    let k = u.len();
    let mut best = (u - v).norm_squared();
    for e in &hd.entries {
        let mut sq = e.source_length * e.source_length;
        if sq >= best {
            continue;
        }
        let a = e.matrix.as_slice();
        for i in 0..k {
            let av: f64 = (0..k).map(|j| a[i + j * k] * v[j]).sum();
            sq += (u[i] - av) * (u[i] - av);
        }
        best = best.min(sq);
    }
    best.sqrt()
}

/// The quotient `ℝ^k/G` with `G` generated by `generators`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitFiberModel {
    pub k: usize,
    pub generators: Vec<Mat>,
    pub word_depth: usize,
    /// Grid side used to deduplicate orbit points.
    pub dedupe: f64,
}

impl LimitFiberModel {
    pub fn new(k: usize, generators: Vec<Mat>, word_depth: usize) -> Result<Self> {
        if word_depth == 0 {
            return Err(WaneError::InvalidInput("word depth must be at least 1".into()));
        }
        for g in &generators {
            if g.shape() != (k, k) || ortho_residual(g) > 1e-8 {
                return Err(WaneError::InvalidInput(format!("generators must be orthogonal {k}×{k}")));
            }
        }
        Ok(LimitFiberModel { k, generators, word_depth, dedupe: 0.01 })
    }

    pub fn trivial(k: usize) -> Self {
        LimitFiberModel { k, generators: Vec::new(), word_depth: 1, dedupe: 0.01 }
    }

    /// Words in the generators and their inverses.
    pub fn letters(&self) -> Vec<Mat> {
        let mut l = self.generators.clone();
        l.extend(self.generators.iter().map(|g| g.transpose()));
        l
    }

    pub fn orbit(&self, v: &Vector) -> Vec<Vector> {
        orbit(&self.letters(), v, self.word_depth, self.dedupe, 200_000)
    }
}

/// `min ‖u − a·v‖` over words of length at most `word_depth`.
pub fn limit_fiber_distance(model: &LimitFiberModel, u: &Vector, v: &Vector) -> f64 {
    if model.generators.is_empty() {
        return (u - v).norm();
    }
    distance_to_set(&model.orbit(v), u)
}
