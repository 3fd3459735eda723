//! Root systems and their Weyl groups on a Euclidean model of the Cartan
//! subalgebra.
//!
//! Roots are stored as covectors so that `α(x) = ⟨α, x⟩` is the spectral
//! parameter of `ad x` on the root space. The built-in catalog pins `A1` to
//! `α(x) = x`; every other built-in has its longest roots at unit length. A
//! global scale can be applied afterwards with [`RootSystem::scaled`].

use std::collections::{HashSet, VecDeque};
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when matching reflected roots and orbit points.
const MATCH_TOL: f64 = 1e-9;
/// Enumeration cap; a root set whose reflections generate more elements is
/// treated as infinite.
const MAX_GROUP_ORDER: usize = 20_000;

/// Names accepted by [`load_root_system`].
pub const BUILT_INS: [&str; 5] = ["A1", "A2", "B2", "G2", "A3"];

/// A point of the Cartan subalgebra in orthonormal coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CartanPoint(pub Vec<f64>);

impl CartanPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        CartanPoint(coords)
    }

    pub fn norm(&self) -> f64 {
        dot(&self.0, &self.0).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for CartanPoint {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for CartanPoint {
    fn from(v: Vec<f64>) -> Self {
        CartanPoint(v)
    }
}

/// Where a root system comes from: a catalog name or an explicit root list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RootSource {
    Named(String),
    Custom { custom: Vec<Vec<f64>> },
}

#[derive(Debug, Clone)]
pub struct RootSystem {
    name: String,
    rank: usize,
    scale: f64,
    positive_roots: Vec<Vec<f64>>,
    simple_roots: Vec<Vec<f64>>,
    /// Row-major `rank × rank` orthogonal matrices, identity first.
    group: Vec<Vec<f64>>,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `s_α(x) = x − 2 ⟨α,x⟩/⟨α,α⟩ α`.
pub fn reflect(root: &[f64], x: &[f64]) -> CartanPoint {
    let c = 2.0 * dot(root, x) / dot(root, root);
    CartanPoint(x.iter().zip(root).map(|(xi, ai)| xi - c * ai).collect())
}

fn reflection_matrix(root: &[f64]) -> Vec<f64> {
    let n = root.len();
    let nn = dot(root, root);
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let id = if i == j { 1.0 } else { 0.0 };
            m[i * n + j] = id - 2.0 * root[i] * root[j] / nn;
        }
    }
    m
}

fn mat_mul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

fn mat_vec(m: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n).map(|i| dot(&m[i * n..(i + 1) * n], x)).collect()
}

fn quantize(v: &[f64], unit: f64) -> Vec<i64> {
    v.iter().map(|x| (x / unit).round() as i64).collect()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

/// Rank of the span of `vectors` by Gaussian elimination with pivoting.
fn span_rank(vectors: &[Vec<f64>], n: usize) -> usize {
    let mut rows: Vec<Vec<f64>> = vectors.to_vec();
    let mut rank = 0;
    for col in 0..n {
        let pivot = (rank..rows.len()).max_by(|&a, &b| {
            rows[a][col].abs().partial_cmp(&rows[b][col].abs()).unwrap()
        });
        let Some(p) = pivot else { break };
        if rows[p][col].abs() < 1e-10 {
            continue;
        }
        rows.swap(rank, p);
        for r in 0..rows.len() {
            if r != rank {
                let f = rows[r][col] / rows[rank][col];
                for c in col..n {
                    rows[r][c] -= f * rows[rank][c];
                }
            }
        }
        rank += 1;
    }
    rank
}

impl RootSystem {
    /// Validate a list of roots (one representative per ±pair, signs free)
    /// and derive the positive system, simple roots and group.
    pub fn from_roots(name: &str, roots: Vec<Vec<f64>>) -> Result<Self> {
        let invalid = |m: String| Error::InvalidRootSystem(m);
        if roots.is_empty() {
            return Err(invalid("empty root list".into()));
        }
        let n = roots[0].len();
        if n == 0 {
            return Err(invalid("roots must have at least one coordinate".into()));
        }
        for r in &roots {
            if r.len() != n {
                return Err(invalid("roots have inconsistent dimensions".into()));
            }
            if !r.iter().all(|v| v.is_finite()) || dot(r, r).sqrt() < 1e-12 {
                return Err(invalid(format!("root {r:?} is zero or not finite")));
            }
        }
        let unit = roots.iter().map(|r| dot(r, r).sqrt()).fold(0.0, f64::max);
        let tol = MATCH_TOL * unit;

        // Reducedness: no two roots parallel.
        for (i, a) in roots.iter().enumerate() {
            for b in roots.iter().skip(i + 1) {
                let c = dot(a, b);
                let par = c * c - dot(a, a) * dot(b, b);
                if par.abs() <= 1e-9 * dot(a, a) * dot(b, b) {
                    return Err(invalid(format!("roots {a:?} and {b:?} are parallel")));
                }
            }
        }
        if span_rank(&roots, n) != n {
            return Err(invalid(format!("roots do not span {n}-space")));
        }

        // Orient every root against a generic vector; prefer the sum of the
        // roots as given so that a supplied positive system is preserved.
        let mut v: Vec<f64> = (0..n)
            .map(|i| roots.iter().map(|r| r[i]).sum::<f64>())
            .collect();
        let generic = |v: &[f64]| roots.iter().all(|r| dot(r, v).abs() > 1e-6 * unit);
        let mut attempt = 0;
        while !generic(&v) {
            attempt += 1;
            if attempt > 64 {
                return Err(invalid("could not find a regular direction".into()));
            }
            for (i, vi) in v.iter_mut().enumerate() {
                *vi += (((i + 2) * 7919 * attempt) as f64).sqrt().fract() * unit;
            }
        }
        let positive: Vec<Vec<f64>> = roots
            .iter()
            .map(|r| {
                if dot(r, &v) > 0.0 {
                    r.clone()
                } else {
                    r.iter().map(|x| -x).collect()
                }
            })
            .collect();

        let in_pm = |x: &[f64]| -> Option<(usize, bool)> {
            for (i, r) in positive.iter().enumerate() {
                if close(r, x, tol) {
                    return Some((i, true));
                }
                if r.iter().zip(x).all(|(a, b)| (a + b).abs() <= tol) {
                    return Some((i, false));
                }
            }
            None
        };
        for a in &positive {
            for b in &positive {
                let img = reflect(a, b);
                if in_pm(&img).is_none() {
                    return Err(invalid(format!(
                        "not reflection-closed: reflecting {b:?} in {a:?} gives {:?}",
                        img.0
                    )));
                }
            }
        }

        // α is simple iff s_α permutes the other positive roots.
        let simple: Vec<Vec<f64>> = positive
            .iter()
            .enumerate()
            .filter(|(i, a)| {
                positive.iter().enumerate().all(|(j, b)| {
                    j == *i || matches!(in_pm(&reflect(a, b)), Some((_, true)))
                })
            })
            .map(|(_, a)| a.clone())
            .collect();
        if simple.len() != n {
            return Err(invalid(format!(
                "found {} simple roots in rank {n}",
                simple.len()
            )));
        }

        let group = enumerate_group(&simple, n)?;
        Ok(RootSystem {
            name: name.to_string(),
            rank: n,
            scale: 1.0,
            positive_roots: positive,
            simple_roots: simple,
            group,
        })
    }

    /// Multiply every root by `scale` (the invariant inner product is not
    /// canonical outside `A1`).
    pub fn scaled(mut self, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidRootSystem(format!("root scale {scale} must be positive")));
        }
        for r in self.positive_roots.iter_mut().chain(self.simple_roots.iter_mut()) {
            for v in r.iter_mut() {
                *v *= scale;
            }
        }
        self.scale *= scale;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn positive_roots(&self) -> &[Vec<f64>] {
        &self.positive_roots
    }

    /// Simple roots; their reflections generate the Weyl group.
    pub fn generators(&self) -> &[Vec<f64>] {
        &self.simple_roots
    }

    pub fn order(&self) -> usize {
        self.group.len()
    }

    /// Group elements as row-major orthogonal matrices (identity first).
    pub fn group_elements(&self) -> &[Vec<f64>] {
        &self.group
    }

    pub fn apply(&self, element: usize, x: &[f64]) -> CartanPoint {
        CartanPoint(mat_vec(&self.group[element], x))
    }

    /// `α(x)` for each positive root, in catalog order.
    pub fn root_values(&self, x: &[f64]) -> Vec<f64> {
        self.positive_roots.iter().map(|a| dot(a, x)).collect()
    }

    /// Distance from `x` to the nearest reflection hyperplane.
    pub fn wall_distance(&self, x: &[f64]) -> f64 {
        self.positive_roots
            .iter()
            .map(|a| dot(a, x).abs() / dot(a, a).sqrt())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn in_chamber(&self, x: &[f64]) -> bool {
        self.simple_roots.iter().all(|a| dot(a, x) >= 0.0)
    }

    /// Unit vectors spanning the edges of the dominant chamber, i.e. lines
    /// fixed by all but one simple reflection.
    pub fn chamber_rays(&self) -> Vec<CartanPoint> {
        let n = self.rank;
        let a = nalgebra::DMatrix::from_fn(n, n, |i, j| self.simple_roots[i][j]);
        let inv = a
            .try_inverse()
            .expect("simple roots of a validated system are independent");
        (0..n)
            .map(|j| {
                let col: Vec<f64> = (0..n).map(|i| inv[(i, j)]).collect();
                let norm = dot(&col, &col).sqrt();
                CartanPoint(col.iter().map(|v| v / norm).collect())
            })
            .collect()
    }
}

fn enumerate_group(generators: &[Vec<f64>], n: usize) -> Result<Vec<Vec<f64>>> {
    let gens: Vec<Vec<f64>> = generators.iter().map(|g| reflection_matrix(g)).collect();
    let mut identity = vec![0.0; n * n];
    for i in 0..n {
        identity[i * n + i] = 1.0;
    }
    let mut seen = HashSet::new();
    seen.insert(quantize(&identity, 1e-7));
    let mut elements = vec![identity.clone()];
    let mut queue = VecDeque::from([identity]);
    while let Some(g) = queue.pop_front() {
        for s in &gens {
            let h = mat_mul(s, &g, n);
            if seen.insert(quantize(&h, 1e-7)) {
                if elements.len() >= MAX_GROUP_ORDER {
                    return Err(Error::InvalidRootSystem(
                        "reflections generate an infinite group".into(),
                    ));
                }
                elements.push(h.clone());
                queue.push_back(h);
            }
        }
    }
    Ok(elements)
}

fn catalog(name: &str) -> Option<Vec<Vec<f64>>> {
    let s3 = 3f64.sqrt();
    let r2 = std::f64::consts::FRAC_1_SQRT_2;
    let roots = match name {
        "A1" => vec![vec![1.0]],
        "A2" => vec![vec![1.0, 0.0], vec![-0.5, s3 / 2.0], vec![0.5, s3 / 2.0]],
        "B2" => vec![
            vec![0.0, r2],
            vec![r2, -r2],
            vec![r2, 0.0],
            vec![r2, r2],
        ],
        "G2" => {
            let a1 = [1.0 / s3, 0.0];
            let a2 = [-s3 / 2.0, 0.5];
            [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (2.0, 1.0), (3.0, 1.0), (3.0, 2.0)]
                .iter()
                .map(|(p, q)| vec![p * a1[0] + q * a2[0], p * a1[1] + q * a2[1]])
                .collect()
        }
        // D3 presentation so that W acts by signed coordinate permutations.
        "A3" => {
            let mut v = Vec::new();
            for i in 0..3 {
                for j in (i + 1)..3 {
                    for sign in [-1.0, 1.0] {
                        let mut r = vec![0.0; 3];
                        r[i] = r2;
                        r[j] = sign * r2;
                        v.push(r);
                    }
                }
            }
            v
        }
        _ => return None,
    };
    Some(roots)
}

/// Catalog group order, used to validate enumeration.
pub fn catalog_order(name: &str) -> Option<usize> {
    match name {
        "A1" => Some(2),
        "A2" => Some(6),
        "B2" => Some(8),
        "G2" => Some(12),
        "A3" => Some(24),
        _ => None,
    }
}

/// Load a built-in system by name or validate a custom positive-root list.
pub fn load_root_system(source: &RootSource) -> Result<RootSystem> {
    match source {
        RootSource::Named(name) => {
            let roots = catalog(name).ok_or_else(|| Error::UnknownGroup(name.clone()))?;
            let rs = RootSystem::from_roots(name, roots)?;
            debug_assert_eq!(Some(rs.order()), catalog_order(name));
            Ok(rs)
        }
        RootSource::Custom { custom } => RootSystem::from_roots("custom", custom.clone()),
    }
}

pub fn load_named(name: &str) -> Result<RootSystem> {
    load_root_system(&RootSource::Named(name.to_string()))
}

/// Distinct images of `x` under the Weyl group, in enumeration order.
pub fn weyl_orbit(rs: &RootSystem, x: &[f64]) -> Vec<CartanPoint> {
    let tol = MATCH_TOL * (1.0 + dot(x, x).sqrt());
    let mut out: Vec<CartanPoint> = Vec::new();
    for g in 0..rs.order() {
        let y = rs.apply(g, x);
        if !out.iter().any(|p| close(p, &y, tol)) {
            out.push(y);
        }
    }
    out
}

/// Representative of the orbit of `x` in the closed dominant chamber, reached
/// by reflecting in simple roots with negative value.
pub fn project_to_chamber(rs: &RootSystem, x: &[f64]) -> Result<CartanPoint> {
    let cap = rs.order() * rs.rank();
    let mut y = CartanPoint(x.to_vec());
    for _ in 0..=cap {
        match rs.simple_roots.iter().find(|a| dot(a, &y) < 0.0) {
            None => return Ok(y),
            Some(a) => y = reflect(a, &y),
        }
    }
    Err(Error::InvalidRootSystem(format!(
        "chamber projection did not terminate within {cap} reflections"
    )))
}
