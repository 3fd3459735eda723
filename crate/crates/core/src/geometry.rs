//! Spectral assembly of the invariant metric from a potential on the Cartan
//! subalgebra, and the checks run against it: Ricci defect, positivity,
//! closedness of the moment-map form, completeness trend and properness.
//!
//! On the root space of a positive root `α`, with `x_α = α(x)` and
//! `a_α = α(∇K)`:
//!
//! ```text
//! l_α = sinh x_α / x_α     d_α = (a_α / x_α) cosh x_α     φ_α = l_α / d_α
//! ```
//!
//! so `a_α φ_α = tanh x_α`. The horizontal root-space eigenvalue is
//! `h_α = φ_α d_α² (1 − a_α² φ_α²) = a_α tanh x_α / x_α²` and the vertical one
//! is `1/φ_α`; both Cartan blocks equal `D²K`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ot::ConvexPotential;
use crate::quad::adaptive_simpson;
use crate::rootsys::{dot, weyl_orbit, RootSystem};

/// Below this `|α(x)|` the ratio `α(∇K)/α(x)` is replaced by the directional
/// second derivative `αᵀ D²K α / |α|²` and `sinh`, `tanh` quotients by series.
pub const WALL_SERIES: f64 = 1e-4;

/// Default distance from the walls for sampled geometry.
pub const DEFAULT_WALL_EPS: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct RootData {
    /// `α(x)`
    pub x_alpha: f64,
    /// `α(∇K)`
    pub a: f64,
    /// `a/α(x)`, or the directional second derivative at a wall.
    pub ratio: f64,
    pub l: f64,
    pub d: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMetric {
    pub x: Vec<f64>,
    pub grad: Vec<f64>,
    pub hess: DMatrix<f64>,
    pub roots: Vec<RootData>,
}

/// `sinh z / z`
fn sinhc(z: f64) -> f64 {
    if z.abs() < WALL_SERIES {
        1.0 + z * z / 6.0
    } else {
        z.sinh() / z
    }
}

/// `tanh z / z`
fn tanhc(z: f64) -> f64 {
    if z.abs() < WALL_SERIES {
        1.0 - z * z / 3.0
    } else {
        z.tanh() / z
    }
}

pub fn spectral_data(
    rs: &RootSystem,
    x: &[f64],
    grad: &[f64],
    hess: &DMatrix<f64>,
    overflow_radius: f64,
) -> Result<SpectralMetric> {
    let n = rs.rank();
    if x.len() != n || grad.len() != n || hess.nrows() != n || hess.ncols() != n {
        return Err(Error::Domain(format!("spectral data needs rank-{n} inputs")));
    }
    let hess = (hess + hess.transpose()) * 0.5;
    let mut roots = Vec::with_capacity(rs.positive_roots().len());
    for alpha in rs.positive_roots() {
        let xa = dot(alpha, x);
        if !(xa.abs() <= overflow_radius) {
            return Err(Error::Domain(format!(
                "|α(x)| = {} exceeds overflow radius {overflow_radius}",
                xa.abs()
            )));
        }
        let a = dot(alpha, grad);
        let ratio = if xa.abs() < WALL_SERIES {
            let v = DVector::from_column_slice(alpha);
            (v.transpose() * &hess * &v)[(0, 0)] / dot(alpha, alpha)
        } else {
            a / xa
        };
        let l = sinhc(xa);
        let d = ratio * xa.cosh();
        roots.push(RootData {
            x_alpha: xa,
            a,
            ratio,
            l,
            d,
            phi: l / d,
        });
    }
    Ok(SpectralMetric {
        x: x.to_vec(),
        grad: grad.to_vec(),
        hess,
        roots,
    })
}

/// `e^{−u} det(D²K) ∏_{α>0} (α(∇K)/sinh α(x))²`
pub fn ricci_defect(sm: &SpectralMetric, u_value: f64) -> Result<f64> {
    let det = sm.hess.determinant();
    if !(det > 0.0) {
        return Err(Error::Verification(format!(
            "det D²K = {det} is not positive; the fitted potential is not convex here"
        )));
    }
    let prod: f64 = sm
        .roots
        .iter()
        .map(|r| {
            let q = r.ratio / r.l;
            q * q
        })
        .product();
    Ok((-u_value).exp() * det * prod)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityVerdict {
    pub hess_positive: bool,
    pub phi_positive: bool,
    pub horizontal_positive: bool,
    /// Convexity (first two conditions) forces the third.
    pub implication_holds: bool,
    pub failures: Vec<String>,
}

impl PositivityVerdict {
    pub fn passed(&self) -> bool {
        self.hess_positive && self.phi_positive && self.horizontal_positive
    }
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// `Φ ≻ 0` (`D²K ≻ 0` and `φ_α > 0`) and `Φ + Φ(ad μ Φ)² ≻ 0`
/// (`φ_α (1 − a_α² φ_α²) > 0`, with `1 − a_α² φ_α² = sech² α(x)`).
pub fn positivity_check(sm: &SpectralMetric) -> PositivityVerdict {
    let hess_positive = min_eigenvalue(&sm.hess) > 0.0;
    let phi_positive = sm.roots.iter().all(|r| r.phi > 0.0);
    let horizontal_positive = sm.roots.iter().all(|r| {
        let c = r.x_alpha.cosh();
        r.phi / (c * c) > 0.0
    }) && hess_positive;
    let mut failures = Vec::new();
    if !hess_positive || !phi_positive {
        failures.push("Φ not positive".to_string());
    }
    if !horizontal_positive {
        failures.push("Φ + Φ(ad μ Φ)² not positive".to_string());
    }
    PositivityVerdict {
        hess_positive,
        phi_positive,
        horizontal_positive,
        implication_holds: !(hess_positive && phi_positive) || horizontal_positive,
        failures,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub horizontal: Vec<f64>,
    pub cartan: DMatrix<f64>,
    pub vertical: Vec<f64>,
    pub vertical_cartan: DMatrix<f64>,
    pub positivity: PositivityVerdict,
    pub ricci_defect: f64,
    /// Largest disagreement between the three-term and closed forms of
    /// `h_α`, relative to the leading term `φ_α d_α²`.
    pub horizontal_cross_check: f64,
}

pub fn metric_eigenvalues(sm: &SpectralMetric, u_value: f64) -> Result<MetricReport> {
    let positivity = positivity_check(sm);
    if !positivity.passed() {
        return Err(Error::Verification(format!(
            "positivity failed at x = {:?}: {}",
            sm.x,
            positivity.failures.join(", ")
        )));
    }
    let mut horizontal = Vec::with_capacity(sm.roots.len());
    let mut cross = 0.0f64;
    for r in &sm.roots {
        let closed = r.ratio * tanhc(r.x_alpha);
        // a_α φ_α with a_α = α(x)·ratio, consistent with the wall fallback.
        let a_phi_d = r.x_alpha * r.ratio * r.phi * r.d;
        let term1 = r.phi * r.d * r.d;
        let term2 = r.phi * a_phi_d * a_phi_d;
        let three = term1 - term2;
        // The subtraction cancels for large α(x), so the comparison is
        // relative to the leading term.
        cross = cross.max((three - closed).abs() / term1);
        horizontal.push(closed);
    }
    let vertical = sm.roots.iter().map(|r| 1.0 / r.phi).collect();
    Ok(MetricReport {
        horizontal,
        cartan: sm.hess.clone(),
        vertical,
        vertical_cartan: sm.hess.clone(),
        positivity,
        ricci_defect: ricci_defect(sm, u_value)?,
        horizontal_cross_check: cross,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthVerdict {
    Diverging,
    BoundedLength,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    /// `(T, L(T))` at geometrically spaced `T`.
    pub lengths: Vec<(f64, f64)>,
    /// Log-log slope of `L` over the upper half of the samples.
    pub length_exponent: f64,
    /// Slope of `ln λ_min` against `t` on `[T_max/2, T_max]`.
    pub hessian_growth_rate: f64,
    pub verdict: LengthVerdict,
}

/// Exponents at or below this count as a length that levels off.
pub const DIVERGENCE_THRESHOLD: f64 = 0.05;

/// Length `L(T) = ∫_0^T sqrt(λ_min(t)) dt` of a chamber ray, with `λ_min`
/// the smallest Hessian eigenvalue along it.
pub fn completeness_trend(
    lambda_min: &dyn Fn(f64) -> Result<f64>,
    t_max: f64,
) -> Result<GrowthReport> {
    if !(t_max > 0.0) {
        return Err(Error::Domain(format!("T_max = {t_max} must be positive")));
    }
    const LEVELS: usize = 12;
    let ts: Vec<f64> = (0..LEVELS)
        .map(|i| t_max * 0.5f64.powi((LEVELS - 1 - i) as i32))
        .collect();
    let mut failure = None;
    let integrand = |t: f64| match lambda_min(t) {
        Ok(v) => v.max(0.0).sqrt(),
        Err(_) => f64::NAN,
    };
    let mut lengths = Vec::with_capacity(LEVELS);
    let mut acc = 0.0;
    let mut prev = 0.0;
    for &t in &ts {
        acc += adaptive_simpson(&integrand, prev, t, 1e-12 * (1.0 + acc));
        if !acc.is_finite() {
            failure = Some(t);
            break;
        }
        lengths.push((t, acc));
        prev = t;
    }
    if let Some(t) = failure {
        lambda_min(t)?;
        return Err(Error::Domain(format!("profile evaluation failed below t = {t}")));
    }
    let upper = &lengths[LEVELS / 2..];
    let length_exponent = slope(
        &upper.iter().map(|p| p.0.ln()).collect::<Vec<_>>(),
        &upper.iter().map(|p| p.1.ln()).collect::<Vec<_>>(),
    );
    let samples = 33;
    let (mut tt, mut ll) = (Vec::new(), Vec::new());
    for i in 0..samples {
        let t = t_max * (0.5 + 0.5 * i as f64 / (samples - 1) as f64);
        let v = lambda_min(t)?;
        if v > 0.0 {
            tt.push(t);
            ll.push(v.ln());
        }
    }
    let hessian_growth_rate = if tt.len() >= 2 { slope(&tt, &ll) } else { f64::NAN };
    let verdict = if length_exponent > DIVERGENCE_THRESHOLD {
        LengthVerdict::Diverging
    } else {
        LengthVerdict::BoundedLength
    };
    Ok(GrowthReport {
        lengths,
        length_exponent,
        hessian_growth_rate,
        verdict,
    })
}

/// Least-squares slope of `y` against `x`.
fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// `max |∂_i μ_j − ∂_j μ_i|` over `points`, by central differences with step
/// `spacing`.
pub fn closedness_check(
    mu: &dyn Fn(&[f64]) -> Vec<f64>,
    points: &[Vec<f64>],
    spacing: f64,
    max_spacing: f64,
) -> Result<f64> {
    if !(spacing > 0.0) || spacing > max_spacing {
        return Err(Error::Domain(format!(
            "difference spacing {spacing} outside (0, {max_spacing}]"
        )));
    }
    let mut worst = 0.0f64;
    for p in points {
        let n = p.len();
        let mut jac = vec![vec![0.0; n]; n];
        for i in 0..n {
            let mut a = p.clone();
            let mut b = p.clone();
            a[i] += spacing;
            b[i] -= spacing;
            let (ma, mb) = (mu(&a), mu(&b));
            for j in 0..n {
                jac[j][i] = (ma[j] - mb[j]) / (2.0 * spacing);
            }
        }
        for i in 0..n {
            for j in 0..i {
                worst = worst.max((jac[i][j] - jac[j][i]).abs());
            }
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropernessReport {
    /// `φ(R u) − φ(0)` per ray direction `u`.
    pub growth: Vec<f64>,
    pub min_growth: f64,
    pub proper: bool,
}

/// Unit directions along the chamber edges, the chamber barycenter, and all
/// their Weyl images.
pub fn sample_rays(rs: &RootSystem) -> Vec<Vec<f64>> {
    let edges = rs.chamber_rays();
    let mut base: Vec<Vec<f64>> = edges
        .iter()
        .map(|r| r.iter().map(|v| v / r.norm()).collect())
        .collect();
    let mut bary = vec![0.0; rs.rank()];
    for e in &base {
        for (b, v) in bary.iter_mut().zip(e) {
            *b += v;
        }
    }
    let norm = dot(&bary, &bary).sqrt();
    base.push(bary.iter().map(|v| v / norm).collect());
    let mut rays: Vec<Vec<f64>> = Vec::new();
    for b in &base {
        for img in weyl_orbit(rs, b) {
            if !rays
                .iter()
                .any(|r| r.iter().zip(img.iter()).all(|(p, q)| (p - q).abs() < 1e-12))
            {
                rays.push(img.0);
            }
        }
    }
    rays
}

/// Properness along rays: `φ(t u) − φ(0)` must be positive and increasing in
/// `t` on `(0, radius]`.
pub fn properness_check(
    phi: &dyn Fn(&[f64]) -> f64,
    rays: &[Vec<f64>],
    radius: f64,
) -> PropernessReport {
    let origin = vec![0.0; rays.first().map_or(0, Vec::len)];
    let base = phi(&origin);
    let steps = 8;
    let mut growth = Vec::with_capacity(rays.len());
    let mut proper = true;
    for u in rays {
        let mut last = 0.0;
        for s in 1..=steps {
            let t = radius * s as f64 / steps as f64;
            let x: Vec<f64> = u.iter().map(|v| v * t).collect();
            let g = phi(&x) - base;
            if !(g > last) {
                proper = false;
            }
            last = g;
        }
        growth.push(last);
    }
    let min_growth = growth.iter().copied().fold(f64::INFINITY, f64::min);
    PropernessReport {
        growth,
        min_growth,
        proper: proper && !rays.is_empty(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalFit {
    pub grad: Vec<f64>,
    pub hess: DMatrix<f64>,
    /// RMS misfit of the quadratic on the stencil.
    pub residual: f64,
    /// Distinct affine pieces seen on the stencil.
    pub pieces: usize,
    pub insufficient_resolution: bool,
    /// `|grad − active slope|` is within the spread of slopes on the stencil.
    pub slope_agreement: bool,
}

fn stencil_per_axis(rank: usize) -> usize {
    match rank {
        1 => 81,
        2 => 17,
        _ => 9,
    }
}

/// Least-squares quadratic fit of the envelope on a regular stencil in the
/// ball of radius `stencil_radius` around `x`.
pub fn fit_local_quadratic(
    potential: &ConvexPotential,
    x: &[f64],
    stencil_radius: f64,
) -> Result<LocalFit> {
    let n = potential.rank;
    if x.len() != n || !(stencil_radius > 0.0) {
        return Err(Error::DegenerateFit(format!(
            "bad stencil: rank {n}, point {x:?}, radius {stencil_radius}"
        )));
    }
    let offsets = crate::ot::sequence::ball_samples(n, stencil_radius, stencil_per_axis(n));
    let terms = (n + 1) * (n + 2) / 2;
    if offsets.len() < terms {
        return Err(Error::DegenerateFit(format!(
            "{} stencil points for {terms} coefficients",
            offsets.len()
        )));
    }
    let mut design = DMatrix::<f64>::zeros(offsets.len(), terms);
    let mut rhs = DVector::<f64>::zeros(offsets.len());
    let mut seen: Vec<usize> = Vec::new();
    let center_value = potential.eval(x);
    for (row, off) in offsets.iter().enumerate() {
        let p: Vec<f64> = x.iter().zip(off).map(|(a, b)| a + b).collect();
        let j = potential.active(&p);
        if !seen.contains(&j) {
            seen.push(j);
        }
        rhs[row] = potential.eval(&p) - center_value;
        // Scaled monomials keep the design well conditioned.
        let z: Vec<f64> = off.iter().map(|v| v / stencil_radius).collect();
        let mut col = 0;
        design[(row, col)] = 1.0;
        col += 1;
        for zi in &z {
            design[(row, col)] = *zi;
            col += 1;
        }
        for i in 0..n {
            for k in i..n {
                design[(row, col)] = if i == k { 0.5 * z[i] * z[i] } else { z[i] * z[k] };
                col += 1;
            }
        }
    }
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-12 * smax) {
        return Err(Error::DegenerateFit(format!(
            "rank-deficient stencil (singular values {smin:e}..{smax:e})"
        )));
    }
    let coef = svd
        .solve(&rhs, 1e-12 * smax)
        .map_err(|e| Error::DegenerateFit(e.to_string()))?;
    let misfit = &design * &coef - &rhs;
    let residual = (misfit.norm_squared() / offsets.len() as f64).sqrt();
    let grad: Vec<f64> = (0..n).map(|i| coef[1 + i] / stencil_radius).collect();
    let mut hess = DMatrix::<f64>::zeros(n, n);
    let mut col = 1 + n;
    let r2 = stencil_radius * stencil_radius;
    for i in 0..n {
        for k in i..n {
            hess[(i, k)] = coef[col] / r2;
            hess[(k, i)] = coef[col] / r2;
            col += 1;
        }
    }
    let pieces = seen.len();
    let insufficient_resolution = pieces == 1;
    if insufficient_resolution {
        hess.fill(0.0);
    }
    let active = potential.slope(potential.active(x));
    let mut spread = 0.0f64;
    for &a in &seen {
        for &b in &seen {
            let (sa, sb) = (potential.slope(a), potential.slope(b));
            spread = spread.max(sa.iter().zip(sb).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt());
        }
    }
    let dev = grad
        .iter()
        .zip(active)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt();
    Ok(LocalFit {
        grad,
        hess,
        residual,
        pieces,
        insufficient_resolution,
        slope_agreement: dev <= spread + 1e-12 * (1.0 + dev),
    })
}

/// A stencil radius of about six typical cell diameters for a potential
/// solved on `B_k`.
pub fn default_stencil_radius(potential: &ConvexPotential, k: f64) -> f64 {
    let cells = potential.len().max(1) as f64;
    6.0 * 2.0 * k / cells.powf(1.0 / potential.rank as f64)
}
