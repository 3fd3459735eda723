//! Closed-form solutions used as ground truth: the Ricci-flat SU(2) metric,
//! the Heisenberg family and the flat canonical example.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::densities::DEFAULT_OVERFLOW_RADIUS;
use crate::error::{Error, Result};
use crate::geometry::{spectral_data, SpectralMetric};
use crate::quad::adaptive_simpson;
use crate::rootsys::RootSystem;

/// Radial SU(2) profile, `K'³ = (3/4)(sinh 2t − 2t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Su2Profile {
    pub t: f64,
    /// `(sinh 2t − 2t) / (4t³)`
    pub u_val: f64,
    /// `(3u)^{1/3}`
    pub f_val: f64,
    /// `K'(t) = t f(t)`
    pub kp: f64,
    /// `K''(t) = sinh² t / K'(t)²`
    pub kpp: f64,
}

fn check_t(t: f64) -> Result<()> {
    if !(0.0..=DEFAULT_OVERFLOW_RADIUS).contains(&t) {
        return Err(Error::Domain(format!(
            "t = {t} outside [0, {DEFAULT_OVERFLOW_RADIUS}]"
        )));
    }
    Ok(())
}

/// `(sinh 2t − 2t) / (4t³)`, by its Taylor series for small `t`.
fn su2_u(t: f64) -> f64 {
    if t < 0.05 {
        let t2 = t * t;
        1.0 / 3.0 + t2 * (1.0 / 15.0 + t2 * (2.0 / 315.0 + t2 * (1.0 / 2835.0)))
    } else {
        ((2.0 * t).sinh() - 2.0 * t) / (4.0 * t * t * t)
    }
}

/// `sinh t / t`
fn sinhc(t: f64) -> f64 {
    if t.abs() < 1e-4 {
        1.0 + t * t / 6.0
    } else {
        t.sinh() / t
    }
}

pub fn su2_profile(t: f64) -> Result<Su2Profile> {
    check_t(t)?;
    let u_val = su2_u(t);
    let f_val = (3.0 * u_val).cbrt();
    let l = sinhc(t);
    Ok(Su2Profile {
        t,
        u_val,
        f_val,
        kp: t * f_val,
        kpp: l * l / (f_val * f_val),
    })
}

/// `(sinh 2t − 2t)^{1/3}`
pub fn su2_potential_derivative(r: f64) -> Result<f64> {
    check_t(r)?;
    Ok((4.0 * r * r * r * su2_u(r)).cbrt())
}

/// `∫_0^R (sinh 2t − 2t)^{1/3} dt`; this differs from the ODE-normalized
/// `∫ K'` by the homothety factor `(4/3)^{1/3}`.
pub fn su2_potential(r: f64) -> Result<f64> {
    check_t(r)?;
    let f = |t: f64| (4.0 * t * t * t * su2_u(t)).cbrt();
    Ok(adaptive_simpson(&f, 0.0, r, 1e-13 * (1.0 + r)))
}

/// `(λ₀, λ₊, λ₋) = (f + t f', f e^t, f e^{−t})`.
pub fn su2_eigenvalues(t: f64) -> Result<(f64, f64, f64)> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("t = {t} must be positive")));
    }
    let p = su2_profile(t)?;
    Ok((p.kpp, p.f_val * t.exp(), p.f_val * (-t).exp()))
}

/// Profile `f(t)` of the Heisenberg example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum HeisenbergProfile {
    Constant { value: f64 },
    /// `c (1 − t²)ⁿ`
    RicciFlat,
    /// `Σ c_i tⁱ`
    Polynomial { coefficients: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeisenbergModel {
    pub n: usize,
    pub profile: HeisenbergProfile,
    pub c: f64,
}

impl HeisenbergModel {
    pub fn f(&self, t: f64) -> f64 {
        match &self.profile {
            HeisenbergProfile::Constant { value } => *value,
            HeisenbergProfile::RicciFlat => self.c * (1.0 - t * t).powi(self.n as i32),
            HeisenbergProfile::Polynomial { coefficients } => {
                coefficients.iter().rev().fold(0.0, |acc, c| acc * t + c)
            }
        }
    }
}

/// A polynomial `1 + Σ_{i≥1} c_i tⁱ` with `Σ|c_i| ≤ 1/2`, positive on
/// `(−1, 1)`, with coefficients drawn from `seed`.
pub fn random_positive_polynomial(seed: u64, degree: usize) -> HeisenbergProfile {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..degree).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let total: f64 = raw.iter().map(|v: &f64| v.abs()).sum::<f64>().max(1e-300);
    let mut coefficients = vec![1.0];
    coefficients.extend(raw.iter().map(|v| 0.5 * v / total));
    HeisenbergProfile::Polynomial { coefficients }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeisenbergDet {
    pub numeric: Complex<f64>,
    pub formula: f64,
    pub difference: f64,
}

/// `det(Φ⁻¹ + i ad μ)` on the Heisenberg algebra of dimension `2n+1` in the
/// basis `p₁, q₁, …, pₙ, qₙ, z` with `[p_i, q_i] = z`, at `μ = t z*`, against
/// `(1 − t²)ⁿ / f(t)`.
pub fn heisenberg_det(model: &HeisenbergModel, t: f64) -> Result<HeisenbergDet> {
    if !(t.abs() < 1.0) {
        return Err(Error::Domain(format!("|t| = {} must be below 1", t.abs())));
    }
    if model.n == 0 {
        return Err(Error::Domain("n must be positive".into()));
    }
    let f = model.f(t);
    if !(f > 0.0) {
        return Err(Error::Domain(format!("profile f({t}) = {f} is not positive")));
    }
    let dim = 2 * model.n + 1;
    let mut m = DMatrix::<Complex<f64>>::zeros(dim, dim);
    for i in 0..2 * model.n {
        m[(i, i)] = Complex::new(1.0, 0.0);
    }
    m[(dim - 1, dim - 1)] = Complex::new(1.0 / f, 0.0);
    // ad μ: p_i ↦ t q_i, q_i ↦ −t p_i, z ↦ 0 (columns are images).
    for i in 0..model.n {
        let (p, q) = (2 * i, 2 * i + 1);
        m[(q, p)] += Complex::new(0.0, t);
        m[(p, q)] += Complex::new(0.0, -t);
    }
    let numeric = m.determinant();
    let formula = (1.0 - t * t).powi(model.n as i32) / f;
    Ok(HeisenbergDet {
        numeric,
        formula,
        difference: (numeric - Complex::new(formula, 0.0)).norm(),
    })
}

/// `K = |x|²/2`: gradient `x`, identity Hessian.
pub fn canonical_example(rs: &RootSystem, x: &[f64]) -> Result<SpectralMetric> {
    let n = rs.rank();
    spectral_data(rs, x, x, &DMatrix::identity(n, n), DEFAULT_OVERFLOW_RADIUS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{metric_eigenvalues, ricci_defect};
    use crate::rootsys::load_named;

    // Reference values computed with 50-digit arithmetic.
    const U1: f64 = 0.406_715_101_961_754_69;
    const KP1: f64 = 1.068_572_150_229_380_8;
    const KPP1: f64 = 1.209_530_280_835_715_4;

    #[test]
    fn profile_at_one() {
        let p = su2_profile(1.0).unwrap();
        assert!((p.u_val - U1).abs() < 1e-15);
        assert!((p.f_val - KP1).abs() < 1e-15);
        assert!((p.kp - KP1).abs() < 1e-15);
        assert!((p.kpp - KPP1).abs() < 1e-14);
    }

    #[test]
    fn profile_limits_and_identity() {
        let p = su2_profile(0.0).unwrap();
        assert_eq!((p.u_val, p.f_val, p.kp, p.kpp), (1.0 / 3.0, 1.0, 0.0, 1.0));
        for i in 1..=30 {
            let t = 0.1 * i as f64;
            let p = su2_profile(t).unwrap();
            let rhs = 0.75 * ((2.0 * t).sinh() - 2.0 * t);
            assert!((p.kp.powi(3) - rhs).abs() < 1e-12 * rhs);
        }
        // Series and direct branches meet.
        let below = su2_u(0.05 - 1e-12);
        let above = su2_u(0.05);
        assert!((below - above).abs() < 1e-13);
        assert!(su2_profile(-1.0).is_err() && su2_profile(351.0).is_err());
    }

    #[test]
    fn kpp_is_derivative_of_kp() {
        for t in [0.2, 1.0, 2.5] {
            let h = 1e-5;
            let fd = (su2_profile(t + h).unwrap().kp - su2_profile(t - h).unwrap().kp) / (2.0 * h);
            assert!((fd - su2_profile(t).unwrap().kpp).abs() < 1e-8);
        }
    }

    #[test]
    fn potential_values() {
        assert_eq!(su2_potential(0.0).unwrap(), 0.0);
        for (r, want) in [
            (0.5, 0.138_732_264_168_586_76),
            (1.0, 0.569_014_738_354_471_6),
            (2.0, 2.517_229_770_717_105),
        ] {
            assert!((su2_potential(r).unwrap() - want).abs() < 1e-12, "{r}");
        }
        let d = su2_potential_derivative(1.0).unwrap();
        assert!((d - 1.176_115_833_417_438_4).abs() < 1e-15);
        let h = 1e-4;
        let fd = (su2_potential(1.0 + h).unwrap() - su2_potential(1.0 - h).unwrap()) / (2.0 * h);
        assert!((fd - d).abs() < 1e-8);
    }

    #[test]
    fn eigenvalue_identity() {
        let (l0, lp, lm) = su2_eigenvalues(1.0).unwrap();
        let s = 1.0f64.sinh();
        assert!((l0 * lp * lm - s * s).abs() < 1e-12);
        assert!((lp / lm - 2.0f64.exp()).abs() < 1e-12);
        assert!((lp - KP1 * 1.0f64.exp()).abs() < 1e-14);
        assert!(su2_eigenvalues(0.0).is_err());
    }

    #[test]
    fn su2_defect_is_one() {
        let rs = load_named("A1").unwrap();
        for t in [0.1, 0.5, 1.0, 3.0] {
            let p = su2_profile(t).unwrap();
            let sm = spectral_data(&rs, &[t], &[p.kp], &DMatrix::from_element(1, 1, p.kpp), 350.0)
                .unwrap();
            assert!((ricci_defect(&sm, 0.0).unwrap() - 1.0).abs() < 1e-12);
        }
        let p = su2_profile(1.0).unwrap();
        let sm = spectral_data(&rs, &[1.0], &[p.kp], &DMatrix::from_element(1, 1, p.kpp), 350.0)
            .unwrap();
        let d = sm.roots[0].d;
        assert!((d - 1.648_892_991_921_843).abs() < 1e-14);
        let rep = metric_eigenvalues(&sm, 0.0).unwrap();
        assert!((rep.horizontal[0] - 0.813_818_304_831_782).abs() < 1e-14);
    }

    #[test]
    fn heisenberg_examples() {
        let flat = HeisenbergModel {
            n: 1,
            profile: HeisenbergProfile::Constant { value: 1.0 },
            c: 1.0,
        };
        let d = heisenberg_det(&flat, 0.5).unwrap();
        assert!((d.formula - 0.75).abs() < 1e-15);
        assert!(d.difference < 1e-12);
        let rf = HeisenbergModel {
            n: 1,
            profile: HeisenbergProfile::RicciFlat,
            c: 1.0,
        };
        for t in [-0.9, 0.0, 0.3, 0.99] {
            let d = heisenberg_det(&rf, t).unwrap();
            assert!((d.numeric.re - 1.0).abs() < 1e-12 && d.numeric.im.abs() < 1e-12);
        }
        assert!(heisenberg_det(&rf, 1.0).is_err());
        assert_eq!(heisenberg_det(&flat, 0.0).unwrap().numeric, Complex::new(1.0, 0.0));
    }

    #[test]
    fn random_polynomial_is_positive() {
        let model = HeisenbergModel {
            n: 2,
            profile: random_positive_polynomial(11, 5),
            c: 1.0,
        };
        for i in 0..=200 {
            let t = -0.999 + i as f64 * 0.00999;
            assert!(model.f(t) >= 0.5);
        }
    }

    #[test]
    fn canonical_block_is_identity() {
        let rs = load_named("A2").unwrap();
        let sm = canonical_example(&rs, &[0.4, 0.3]).unwrap();
        assert_eq!(sm.hess, DMatrix::identity(2, 2));
        let sm1 = canonical_example(&load_named("A1").unwrap(), &[1.0]).unwrap();
        assert!((sm1.roots[0].phi - 0.761_594_155_955_764_9).abs() < 1e-15);
        assert!((ricci_defect(&sm1, 0.0).unwrap() - 0.724_061_660_966_310_5).abs() < 1e-14);
    }
}
