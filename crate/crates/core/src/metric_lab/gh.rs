//! Upper bounds on the Gromov-Hausdorff distance from explicit correspondences.

use serde::{Deserialize, Serialize};

use super::FiniteMetricSpace;
use crate::error::{Result, WaneError};

/// Spaces with at most this many point pairs are searched exhaustively.
pub const EXACT_PAIR_LIMIT: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GhStatus {
    /// The minimum distortion over all correspondences.
    Exact,
    /// A local optimum of the correspondence search.
    Heuristic,
    /// The search ran out of budget; the bound is the best one found.
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GhOptions {
    /// Maximum number of improving moves in the heuristic search.
    pub budget: usize,
    /// Force the basepoints to correspond.
    pub pointed: bool,
    /// Starting correspondence for the heuristic search.
    pub initial: Option<Vec<(usize, usize)>>,
}

impl Default for GhOptions {
    fn default() -> Self {
        GhOptions { budget: 500, pointed: true, initial: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GhBound {
    /// Half the distortion of `correspondence`.
    pub bound: f64,
    pub status: GhStatus,
    pub correspondence: Vec<(usize, usize)>,
}

/// `max |d_X(x, x') − d_Y(y, y')|` over pairs of the correspondence.
pub fn distortion(x: &FiniteMetricSpace, y: &FiniteMetricSpace, corr: &[(usize, usize)]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, &(a, b)) in corr.iter().enumerate() {
        for &(a2, b2) in &corr[i + 1..] {
            worst = worst.max((x.d(a, a2) - y.d(b, b2)).abs());
        }
    }
    worst
}

/// Checks that every point of both spaces appears in `corr`.
pub fn is_correspondence(x: &FiniteMetricSpace, y: &FiniteMetricSpace, corr: &[(usize, usize)]) -> bool {
    let mut sx = vec![false; x.len()];
    let mut sy = vec![false; y.len()];
    for &(a, b) in corr {
        if a >= x.len() || b >= y.len() {
            return false;
        }
        sx[a] = true;
        sy[b] = true;
    }
    sx.into_iter().all(|s| s) && sy.into_iter().all(|s| s)
}

pub fn gh_upper_bound(x: &FiniteMetricSpace, y: &FiniteMetricSpace, opts: &GhOptions) -> Result<GhBound> {
    if x.is_empty() || y.is_empty() {
        return Err(WaneError::InvalidInput("both spaces must be nonempty".into()));
    }
    if x.len() * y.len() <= EXACT_PAIR_LIMIT {
        Ok(exact(x, y, opts.pointed))
    } else {
        heuristic(x, y, opts)
    }
}

struct Exact<'a> {
    x: &'a FiniteMetricSpace,
    y: &'a FiniteMetricSpace,
    pairs: Vec<(usize, usize)>,
}

impl Exact<'_> {
    fn compatible(&self, p: usize, q: usize, t: f64) -> bool {
        let ((a, b), (a2, b2)) = (self.pairs[p], self.pairs[q]);
        (self.x.d(a, a2) - self.y.d(b, b2)).abs() <= t
    }

    /// Extends `chosen` to a correspondence of distortion ≤ `t`, if possible.
    fn extend(&self, chosen: &mut Vec<usize>, t: f64) -> bool {
        let covered_x = |c: &[usize], a: usize| c.iter().any(|&p| self.pairs[p].0 == a);
        let covered_y = |c: &[usize], b: usize| c.iter().any(|&p| self.pairs[p].1 == b);
        let target: Option<Box<dyn Fn(&(usize, usize)) -> bool>> =
            if let Some(a) = (0..self.x.len()).find(|&a| !covered_x(chosen, a)) {
                Some(Box::new(move |p: &(usize, usize)| p.0 == a))
            } else {
                (0..self.y.len())
                    .find(|&b| !covered_y(chosen, b))
                    .map(|b| Box::new(move |p: &(usize, usize)| p.1 == b) as Box<dyn Fn(&(usize, usize)) -> bool>)
            };
        let Some(target) = target else { return true };
        for p in 0..self.pairs.len() {
            if target(&self.pairs[p]) && chosen.iter().all(|&q| self.compatible(p, q, t)) {
                chosen.push(p);
                if self.extend(chosen, t) {
                    return true;
                }
                chosen.pop();
            }
        }
        false
    }
}

fn exact(x: &FiniteMetricSpace, y: &FiniteMetricSpace, pointed: bool) -> GhBound {
    let pairs: Vec<(usize, usize)> =
        (0..x.len()).flat_map(|a| (0..y.len()).map(move |b| (a, b))).collect();
    let search = Exact { x, y, pairs };
    let mut levels: Vec<f64> = vec![0.0];
    for &(a, b) in &search.pairs {
        for &(a2, b2) in &search.pairs {
            levels.push((x.d(a, a2) - y.d(b, b2)).abs());
        }
    }
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let start = if pointed {
        vec![x.basepoint * y.len() + y.basepoint]
    } else {
        Vec::new()
    };
    let solve = |t: f64| -> Option<Vec<usize>> {
        let mut chosen = start.clone();
        search.extend(&mut chosen, t).then_some(chosen)
    };
    // The largest level always admits the full product correspondence.
    let (mut lo, mut hi) = (0, levels.len() - 1);
    let mut best = solve(levels[hi]).expect("the largest level is feasible");
    while lo < hi {
        let mid = (lo + hi) / 2;
        match solve(levels[mid]) {
            Some(c) => {
                best = c;
                hi = mid;
            }
            None => lo = mid + 1,
        }
    }
    let correspondence: Vec<(usize, usize)> = best.into_iter().map(|p| search.pairs[p]).collect();
    GhBound { bound: 0.5 * distortion(x, y, &correspondence), status: GhStatus::Exact, correspondence }
}

/// A correspondence stored as `f: X → Y` together with `g: Y → X`.
struct Maps {
    f: Vec<usize>,
    g: Vec<usize>,
}

impl Maps {
    fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self.f.iter().enumerate().map(|(a, &b)| (a, b)).collect();
        out.extend(self.g.iter().enumerate().map(|(b, &a)| (a, b)));
        out.sort_unstable();
        out.dedup();
        out
    }
}

fn heuristic(x: &FiniteMetricSpace, y: &FiniteMetricSpace, opts: &GhOptions) -> Result<GhBound> {
    let (x0, y0) = (x.basepoint, y.basepoint);
    let nearest_y = |a: usize| {
        (0..y.len())
            .min_by(|&b, &c| (x.d(x0, a) - y.d(y0, b)).abs().total_cmp(&(x.d(x0, a) - y.d(y0, c)).abs()))
            .unwrap()
    };
    let nearest_x = |b: usize| {
        (0..x.len())
            .min_by(|&a, &c| (x.d(x0, a) - y.d(y0, b)).abs().total_cmp(&(x.d(x0, c) - y.d(y0, b)).abs()))
            .unwrap()
    };
    let mut maps = Maps { f: (0..x.len()).map(nearest_y).collect(), g: (0..y.len()).map(nearest_x).collect() };
    if let Some(init) = &opts.initial {
        if !is_correspondence(x, y, init) {
            return Err(WaneError::InvalidInput("initial pairs do not form a correspondence".into()));
        }
        for &(a, b) in init {
            maps.f[a] = b;
            maps.g[b] = a;
        }
    }
    if opts.pointed {
        maps.f[x0] = y0;
        maps.g[y0] = x0;
    }
    // Entries 0..|X| are f-pairs and |X|.. are g-pairs.
    let nx = x.len();
    let entry = |m: &Maps, e: usize| if e < nx { (e, m.f[e]) } else { (m.g[e - nx], e - nx) };
    let dis = |p: (usize, usize), q: (usize, usize)| (x.d(p.0, q.0) - y.d(p.1, q.1)).abs();
    let total = nx + y.len();
    let global = |m: &Maps, skip: Option<usize>| -> (f64, usize) {
        let mut worst = (0.0, 0);
        for e in 0..total {
            if Some(e) == skip {
                continue;
            }
            for e2 in e + 1..total {
                if Some(e2) == skip {
                    continue;
                }
                let v = dis(entry(m, e), entry(m, e2));
                if v > worst.0 {
                    worst = (v, e);
                }
            }
        }
        worst
    };
    let mut status = GhStatus::Heuristic;
    let mut moves = 0;
    loop {
        let (current, _) = global(&maps, None);
        let mut improved = false;
        // Entries touching the worst value.
        let worst_entries: Vec<usize> = (0..total)
            .filter(|&e| (0..total).any(|e2| e2 != e && dis(entry(&maps, e), entry(&maps, e2)) >= current))
            .collect();
        for e in worst_entries {
            if opts.pointed && (e == x0 || e == nx + y0) {
                continue;
            }
            let (rest, _) = global(&maps, Some(e));
            let options = if e < nx { y.len() } else { nx };
            let mut best: Option<(f64, usize)> = None;
            for alt in 0..options {
                let pair = if e < nx { (e, alt) } else { (alt, e - nx) };
                let ecc = (0..total)
                    .filter(|&e2| e2 != e)
                    .map(|e2| dis(pair, entry(&maps, e2)))
                    .fold(0.0, f64::max);
                let value = rest.max(ecc);
                if value < current - 1e-15 && best.is_none_or(|(v, _)| value < v) {
                    best = Some((value, alt));
                }
            }
            if let Some((_, alt)) = best {
                if e < nx {
                    maps.f[e] = alt;
                } else {
                    maps.g[e - nx] = alt;
                }
                improved = true;
                break;
            }
        }
        if !improved {
            break;
        }
        moves += 1;
        if moves >= opts.budget {
            status = GhStatus::BudgetExhausted;
            break;
        }
    }
    let correspondence = maps.pairs();
    Ok(GhBound { bound: 0.5 * distortion(x, y, &correspondence), status, correspondence })
}
