use crate::densities::DensitySpec;
use crate::error::{Error, Result};
use crate::quad::adaptive_simpson;

/// `∫_0^x sinh²(s t) dt = (sinh 2sx − 2sx) / (4s)`, with the Taylor series
/// for small `sx`.
fn sinh2_integral(s: f64, x: f64) -> f64 {
    let z = 2.0 * s * x;
    let num = if z.abs() < 0.05 {
        // z³/6 + z⁵/120 + z⁷/5040 + z⁹/362880
        let z2 = z * z;
        z * z2 * (1.0 / 6.0 + z2 * (1.0 / 120.0 + z2 * (1.0 / 5040.0 + z2 / 362_880.0)))
    } else {
        z.sinh() - z
    };
    num / (4.0 * s)
}

/// Gradient of the rank-1 solution, `K'(x)`, from the mass balance
/// `∫_0^{K'} f = ∫_0^x g`, i.e. `s² K'³/3 + ε K' = ∫_0^x (e^u sinh²(s t) + ε) dt`
/// for the root `α(x) = s x`. For `u ≡ 0`, `ε = 0`, `s = 1` this is
/// `K'³ = (3/4)(sinh 2x − 2x)`.
pub fn rank1_closed_form(spec: &DensitySpec, x: f64) -> Result<f64> {
    if spec.rank() != 1 {
        return Err(Error::Domain(format!(
            "closed form needs rank 1, got {}",
            spec.rank()
        )));
    }
    let s = spec.rs.positive_roots()[0][0].abs();
    if !((s * x).abs() <= spec.overflow_radius) {
        return Err(Error::Domain(format!(
            "|α(x)| = {} exceeds overflow radius {}",
            (s * x).abs(),
            spec.overflow_radius
        )));
    }
    let eps = spec.regularization;
    let ax = x.abs();
    let rhs = if spec.u.is_zero() {
        sinh2_integral(s, ax) + eps * ax
    } else {
        let g = |t: f64| {
            let v = (s * t).sinh();
            spec.u_value(&[t]).exp() * v * v + eps
        };
        adaptive_simpson(&g, 0.0, ax, 1e-14 * (1.0 + ax))
    };
    if !rhs.is_finite() {
        return Err(Error::Domain(format!("source mass overflows at x = {x}")));
    }
    let y = solve_cubic(s * s / 3.0, eps, rhs);
    Ok(y.copysign(x))
}

/// Positive root of `a y³ + b y = c` with `a, b ≥ 0`, `c ≥ 0`.
fn solve_cubic(a: f64, b: f64, c: f64) -> f64 {
    if c == 0.0 {
        return 0.0;
    }
    let mut y = if a > 0.0 { (c / a).cbrt() } else { c / b };
    if b > 0.0 {
        y = y.min(c / b);
    }
    for _ in 0..100 {
        let f = a * y * y * y + b * y - c;
        let df = 3.0 * a * y * y + b;
        let next = y - f / df;
        if (next - y).abs() <= 1e-16 * next.abs() {
            return next;
        }
        y = next;
    }
    y
}
