//! Source and target densities of the Weyl-invariant Monge-Ampère problem
//! and their masses on balls.
//!
//! The equation `(∏_α α(∇K)) det D²K = e^u ∏_α sinh α(x)` over all roots is
//! written in transport form `f(∇K) det D²K = g(x)` with
//! `g(x) = e^{u(x)} ∏_{α>0} sinh² α(x)` and `f(y) = ∏_{α>0} α(y)²`; each
//! `±α` pair contributes a square. Both densities carry an additive
//! regularization `ε` (the `1/k` of the exhaustion by balls).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quad::pairwise_sum;
use crate::rootsys::{dot, RootSystem};
use crate::uexpr::UExpr;

/// `sinh` overflows double range near 710; squares must stay finite.
pub const DEFAULT_OVERFLOW_RADIUS: f64 = 350.0;
/// Upper bound on the number of quadrature cells (after refinement).
pub const MAX_QUADRATURE_CELLS: usize = 1 << 28;

#[derive(Debug, Clone)]
pub struct DensitySpec {
    pub rs: RootSystem,
    pub u: UExpr,
    pub regularization: f64,
    pub overflow_radius: f64,
}

impl DensitySpec {
    /// Ricci-flat, unregularized data for `rs`.
    pub fn new(rs: RootSystem) -> Self {
        DensitySpec {
            rs,
            u: UExpr::zero(),
            regularization: 0.0,
            overflow_radius: DEFAULT_OVERFLOW_RADIUS,
        }
    }

    pub fn with_u(mut self, u: UExpr) -> Self {
        self.u = u;
        self
    }

    pub fn with_regularization(mut self, eps: f64) -> Self {
        self.regularization = eps;
        self
    }

    pub fn with_overflow_radius(mut self, r: f64) -> Self {
        self.overflow_radius = r;
        self
    }

    pub fn rank(&self) -> usize {
        self.rs.rank()
    }

    /// `∏_{α>0} α(x)²`
    pub fn root_product_squared(&self, x: &[f64]) -> f64 {
        self.rs
            .positive_roots()
            .iter()
            .map(|a| {
                let v = dot(a, x);
                v * v
            })
            .product()
    }

    pub fn u_value(&self, x: &[f64]) -> f64 {
        if self.u.is_zero() {
            return 0.0;
        }
        self.u.eval(dot(x, x), self.root_product_squared(x))
    }
}

/// `g(x) = e^{u(x)} ∏_{α>0} sinh² α(x) + ε`.
pub fn source_density(spec: &DensitySpec, x: &[f64]) -> Result<f64> {
    let mut prod = 1.0;
    for a in spec.rs.positive_roots() {
        let v = dot(a, x);
        if !(v.abs() <= spec.overflow_radius) {
            return Err(Error::Domain(format!(
                "|α(x)| = {} exceeds overflow radius {}",
                v.abs(),
                spec.overflow_radius
            )));
        }
        let s = v.sinh();
        prod *= s * s;
    }
    let u = spec.u_value(x);
    if u > 700.0 || !u.is_finite() {
        return Err(Error::Domain(format!("e^u overflows for u = {u}")));
    }
    let value = u.exp() * prod + spec.regularization;
    if !value.is_finite() {
        return Err(Error::Domain("source density is not finite".into()));
    }
    Ok(value)
}

/// `f(y) = ∏_{α>0} α(y)² + ε`.
pub fn target_density(spec: &DensitySpec, y: &[f64]) -> f64 {
    spec.root_product_squared(y) + spec.regularization
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityKind {
    Source,
    Target,
}

impl DensityKind {
    pub fn eval(self, spec: &DensitySpec, x: &[f64]) -> Result<f64> {
        match self {
            DensityKind::Source => source_density(spec, x),
            DensityKind::Target => Ok(target_density(spec, x)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassReport {
    pub radius: f64,
    pub mass: f64,
    pub quadrature_cells: usize,
    pub estimated_error: f64,
}

fn check_resolution(resolution: usize, rank: usize) -> Result<()> {
    let cells = (resolution as f64).powi(rank as i32);
    if resolution < 16 || cells > MAX_QUADRATURE_CELLS as f64 {
        return Err(Error::ResolutionOverflow { resolution, rank });
    }
    Ok(())
}

/// Cell-centered midpoint sum over the `resolution^n` grid on `[-R, R]^n`,
/// keeping cells whose center lies in the closed ball. Returns the mass and
/// the number of cells kept.
pub fn midpoint_ball_mass(
    spec: &DensitySpec,
    kind: DensityKind,
    radius: f64,
    resolution: usize,
) -> Result<(f64, usize)> {
    let n = spec.rank();
    let h = 2.0 * radius / resolution as f64;
    let vol = h.powi(n as i32);
    let center = |i: usize| -radius + (i as f64 + 0.5) * h;
    let r2 = radius * radius;
    let inner = resolution.pow(n as u32 - 1);
    // One slab per first-axis index; slab sums are reduced pairwise in order.
    let slabs: Vec<Result<(f64, usize)>> = (0..resolution)
        .into_par_iter()
        .map(|i0| {
            let mut x = vec![0.0; n];
            x[0] = center(i0);
            let mut vals = Vec::with_capacity(inner);
            for flat in 0..inner {
                let mut rem = flat;
                for d in 1..n {
                    x[d] = center(rem % resolution);
                    rem /= resolution;
                }
                if dot(&x, &x) <= r2 {
                    vals.push(kind.eval(spec, &x)?);
                }
            }
            Ok((pairwise_sum(&vals), vals.len()))
        })
        .collect();
    let mut sums = Vec::with_capacity(resolution);
    let mut cells = 0;
    for s in slabs {
        let (v, c) = s?;
        sums.push(v);
        cells += c;
    }
    Ok((pairwise_sum(&sums) * vol, cells))
}

/// Mass of `kind` on the ball of radius `radius`, with a one-step
/// refinement difference as the error estimate.
pub fn ball_mass(
    spec: &DensitySpec,
    kind: DensityKind,
    radius: f64,
    resolution: usize,
) -> Result<MassReport> {
    if !(radius > 0.0) {
        return Err(Error::Domain(format!("radius {radius} must be positive")));
    }
    check_resolution(resolution, spec.rank())?;
    check_resolution(2 * resolution, spec.rank())?;
    let (mass, cells) = midpoint_ball_mass(spec, kind, radius, resolution)?;
    let (fine, _) = midpoint_ball_mass(spec, kind, radius, 2 * resolution)?;
    Ok(MassReport {
        radius,
        mass,
        quadrature_cells: cells,
        estimated_error: (fine - mass).abs(),
    })
}

/// Radius `R` with `∫_{B_R} f = ∫_{B_k} g`, both sides evaluated by the
/// midpoint rule at `resolution`. Grid cells scale with the radius, so the
/// target mass is continuous and increasing in `R`.
pub fn balance_radius(spec: &DensitySpec, k: f64, resolution: usize) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::Domain(format!("k = {k} must be positive")));
    }
    check_resolution(resolution, spec.rank())?;
    let (source, _) = midpoint_ball_mass(spec, DensityKind::Source, k, resolution)?;
    if source == 0.0 {
        return Ok(0.0);
    }
    let target = |r: f64| -> Result<f64> {
        Ok(midpoint_ball_mass(spec, DensityKind::Target, r, resolution)?.0)
    };
    let mut lo = 0.0;
    let mut hi = k.max(1e-3);
    let mut doublings = 0;
    while target(hi)? < source {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 80 {
            return Err(Error::Bracket(format!(
                "target mass stays below {source} up to radius {hi}"
            )));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let m = target(mid)?;
        if ((m - source) / source).abs() <= 1e-11 || hi - lo <= 1e-15 * hi {
            return Ok(mid);
        }
        if m < source {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rootsys::{load_named, reflect};

    fn spec(name: &str) -> DensitySpec {
        DensitySpec::new(load_named(name).unwrap())
    }

    #[test]
    fn a1_pointwise_values() {
        let s = spec("A1");
        assert!((source_density(&s, &[1.0]).unwrap() - 1.381_097_845_541_815_7).abs() < 1e-13);
        assert_eq!(source_density(&s, &[0.0]).unwrap(), 0.0);
        assert_eq!(target_density(&s, &[2.0]), 4.0);
        assert_eq!(target_density(&s, &[0.0]), 0.0);
    }

    #[test]
    fn regularization_is_additive() {
        let s = spec("A2").with_regularization(0.25);
        assert_eq!(target_density(&s, &[0.0, 0.0]), 0.25);
        assert_eq!(source_density(&s, &[0.0, 0.0]).unwrap(), 0.25);
    }

    #[test]
    fn overflow_guard() {
        let s = spec("A1");
        assert!(matches!(source_density(&s, &[351.0]), Err(Error::Domain(_))));
        assert!(source_density(&s, &[349.0]).unwrap().is_finite());
        let hot = spec("A1").with_u(UExpr::parse("1000").unwrap());
        assert!(source_density(&hot, &[1.0]).is_err());
    }

    #[test]
    fn reflection_invariance_a2() {
        let s = spec("A2").with_u(UExpr::parse("0.1*r2 + p").unwrap());
        let x = [0.37, -0.81];
        for a in s.rs.positive_roots() {
            let y = reflect(a, &x);
            let (g0, g1) = (source_density(&s, &x).unwrap(), source_density(&s, &y).unwrap());
            assert!((g0 - g1).abs() <= 1e-12 * g0);
            let (f0, f1) = (target_density(&s, &x), target_density(&s, &y));
            assert!((f0 - f1).abs() <= 1e-12 * f0);
        }
    }

    #[test]
    fn a1_source_mass_unit_ball() {
        // ∫₋₁¹ sinh² = sinh(2)/2 − 1
        let exact = 2f64.sinh() / 2.0 - 1.0;
        let rep = ball_mass(&spec("A1"), DensityKind::Source, 1.0, 1 << 14).unwrap();
        assert!((rep.mass - 0.813_430_203_923_509_4).abs() < 1e-8);
        assert!((rep.mass - exact).abs() <= 4.0 * rep.estimated_error + 1e-15);
        assert_eq!(rep.quadrature_cells, 1 << 14);
    }

    #[test]
    fn a1_target_mass_is_cubic() {
        for r in [0.5, 1.0, 2.5] {
            let rep = ball_mass(&spec("A1"), DensityKind::Target, r, 4096).unwrap();
            let exact = 2.0 * r * r * r / 3.0;
            assert!((rep.mass - exact).abs() / exact < 1e-6, "{r}");
        }
    }

    #[test]
    fn ball_mass_errors() {
        let s = spec("A1");
        assert!(matches!(
            ball_mass(&s, DensityKind::Source, 1.0, 8),
            Err(Error::ResolutionOverflow { .. })
        ));
        assert!(matches!(
            ball_mass(&spec("A3"), DensityKind::Source, 1.0, 1 << 10),
            Err(Error::ResolutionOverflow { .. })
        ));
        assert!(ball_mass(&s, DensityKind::Source, -1.0, 64).is_err());
    }

    #[test]
    fn ball_mass_monotone_in_radius() {
        let s = spec("A2").with_regularization(1e-3);
        let mut last = 0.0;
        for r in [0.5, 1.0, 1.5, 2.0] {
            let m = ball_mass(&s, DensityKind::Source, r, 128).unwrap().mass;
            assert!(m > last);
            last = m;
        }
    }

    #[test]
    fn a1_balance_radius_matches_closed_form() {
        // 2R³/3 = sinh(2)/2 − 1, i.e. R = K'(1) of the SU(2) profile.
        let r = balance_radius(&spec("A1"), 1.0, 1 << 16).unwrap();
        assert!((r - 1.068_572_150_229_380_8).abs() < 1e-7, "{r}");
    }

    #[test]
    fn balance_radius_vanishes_with_k() {
        let r = balance_radius(&spec("A1"), 1e-3, 256).unwrap();
        assert!(r < 2e-3);
    }

    #[test]
    fn a2_balance_radius_matches_masses() {
        let s = spec("A2").with_regularization(1e-3);
        let r = balance_radius(&s, 2.0, 256).unwrap();
        let src = ball_mass(&s, DensityKind::Source, 2.0, 256).unwrap().mass;
        let tgt = ball_mass(&s, DensityKind::Target, r, 256).unwrap().mass;
        assert!(((src - tgt) / src).abs() <= 1e-8);
    }

    #[test]
    fn balance_radius_increasing_in_k() {
        let s = spec("A1").with_regularization(0.1);
        let rs: Vec<f64> = [0.5, 1.0, 2.0, 3.0]
            .iter()
            .map(|&k| balance_radius(&s, k, 2048).unwrap())
            .collect();
        assert!(rs.windows(2).all(|w| w[1] > w[0]));
    }
}
