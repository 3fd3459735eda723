use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::artifact::{write_atomic, ArtifactStep, RunArtifact, ARTIFACT_VERSION};
use super::config::{Backend, SolveConfig};
use crate::densities::DensitySpec;
use crate::error::{Error, Result};
use crate::geometry::{
    closedness_check, default_stencil_radius, fit_local_quadratic, metric_eigenvalues,
    positivity_check, properness_check, ricci_defect, sample_rays, spectral_data,
};
use crate::oracles::{
    canonical_example, heisenberg_det, random_positive_polynomial, su2_eigenvalues, su2_potential,
    su2_profile, HeisenbergModel, HeisenbergProfile,
};
use crate::ot::{cell_residuals, solve_sequence, ConvexPotential, SourceGrid};
use crate::rootsys::{dot, load_named, project_to_chamber, RootSource, RootSystem};

/// Fixed 17-significant-digit rendering used in every CSV.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    write_atomic(path, &bytes)
}

// ------------------------------------------------------------------ solve

pub fn run_solve(config: &SolveConfig) -> Result<RunArtifact> {
    config.validate()?;
    let steps = match config.backend {
        Backend::Su2Oracle => Vec::new(),
        Backend::Transport => {
            let spec = config.density_spec()?;
            solve_sequence(&spec, &config.k_list, &config.m_schedule, &config.sequence_options())?
                .into_iter()
                .map(|s| ArtifactStep {
                    k: s.k,
                    regularization: s.regularization,
                    radius: s.radius,
                    dual_weights: s.potential.dual_weights,
                    offset: s.potential.offset,
                    cloud: s.cloud,
                    diagnostics: s.diagnostics,
                    sup_difference: s.sup_difference,
                    lipschitz: s.lipschitz,
                })
                .collect()
        }
    };
    Ok(RunArtifact {
        version: ARTIFACT_VERSION.to_string(),
        config: config.clone(),
        steps,
    })
}

/// Load the config, solve, write the artifact; returns it for reporting.
pub fn cmd_solve(config_path: &Path, out: &Path) -> Result<RunArtifact> {
    let config = SolveConfig::load(config_path)?;
    let artifact = run_solve(&config)?;
    write_atomic(out, artifact.to_json()?.as_bytes())?;
    Ok(artifact)
}

pub fn summary_table(artifact: &RunArtifact) -> String {
    let mut s = format!(
        "{:>8} {:>14} {:>12} {:>6} {:>12} {:>12}\n",
        "k", "R_k", "residual", "iters", "sup_diff", "lipschitz"
    );
    for st in &artifact.steps {
        s += &format!(
            "{:>8.4} {:>14.10} {:>12.3e} {:>6} {:>12} {:>12.6}\n",
            st.k,
            st.radius,
            st.diagnostics.max_rel_cell_residual,
            st.diagnostics.iterations,
            st.sup_difference.map_or("-".to_string(), |v| format!("{v:.3e}")),
            st.lipschitz
        );
    }
    if artifact.steps.is_empty() {
        s += "(analytic SU(2) backend: no transport steps)\n";
    }
    s
}

// ----------------------------------------------------------------- verify

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifySummary {
    pub samples: usize,
    pub median_defect: f64,
    /// `max |defect/median − 1|`
    pub max_defect_deviation: f64,
    pub max_invariance_residual: f64,
    pub positivity_failures: usize,
    pub max_horizontal_cross_check: f64,
    pub closedness_residual: f64,
    pub proper: bool,
    /// Largest change of any stored diagnostic on recomputation.
    pub diagnostics_recheck: f64,
}

struct PointEval {
    x: Vec<f64>,
    grad: Vec<f64>,
    defect: f64,
    horizontal: Vec<f64>,
    vertical: Vec<f64>,
    positive: bool,
    implication: bool,
    cross_check: f64,
    invariance: f64,
    fit_residual: f64,
    slope_agreement: bool,
}

fn invariance_residual(rs: &RootSystem, phi: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> f64 {
    let base = phi(x);
    (0..rs.order())
        .map(|g| (phi(&rs.apply(g, x)) - base).abs())
        .fold(0.0, f64::max)
}

/// Chamber points with `|x| ∈ [lo, hi]` at distance ≥ `wall` from the walls:
/// an even radial sweep in rank 1, seeded samples otherwise.
fn sample_points(rs: &RootSystem, n: usize, lo: f64, hi: f64, wall: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::Domain("at least one sample is required".into()));
    }
    if !(hi > lo && lo >= wall) {
        return Err(Error::Domain(format!(
            "empty sampling shell [{lo}, {hi}] inside the solved ball"
        )));
    }
    let rank = rs.rank();
    if rank == 1 {
        let s = rs.positive_roots()[0][0].signum();
        return Ok((0..n)
            .map(|i| {
                let t = if n == 1 { 0.5 } else { i as f64 / (n - 1) as f64 };
                vec![s * (lo + (hi - lo) * t)]
            })
            .collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut tries = 0usize;
    while out.len() < n {
        tries += 1;
        if tries > 1000 * n + 100_000 {
            return Err(Error::Domain("could not place samples away from the walls".into()));
        }
        let x: Vec<f64> = (0..rank).map(|_| hi * (2.0 * rng.gen::<f64>() - 1.0)).collect();
        let r = dot(&x, &x).sqrt();
        if r < lo || r > hi {
            continue;
        }
        let c = project_to_chamber(rs, &x)?.0;
        if rs.wall_distance(&c) >= wall {
            out.push(c);
        }
    }
    Ok(out)
}

fn evaluate_point(
    rs: &RootSystem,
    spec: &DensitySpec,
    x: &[f64],
    grad: Vec<f64>,
    hess: DMatrix<f64>,
    phi: &dyn Fn(&[f64]) -> f64,
    fit_residual: f64,
    slope_agreement: bool,
) -> Result<PointEval> {
    let sm = spectral_data(rs, x, &grad, &hess, spec.overflow_radius)?;
    let verdict = positivity_check(&sm);
    let u = spec.u_value(x);
    let (defect, horizontal, vertical, cross) = match metric_eigenvalues(&sm, u) {
        Ok(rep) => (rep.ricci_defect, rep.horizontal, rep.vertical, rep.horizontal_cross_check),
        Err(Error::Verification(_)) => {
            let nan = vec![f64::NAN; sm.roots.len()];
            (ricci_defect(&sm, u).unwrap_or(f64::NAN), nan.clone(), nan, f64::NAN)
        }
        Err(e) => return Err(e),
    };
    Ok(PointEval {
        x: x.to_vec(),
        grad,
        defect,
        horizontal,
        vertical,
        positive: verdict.passed(),
        implication: verdict.implication_holds,
        cross_check: cross,
        invariance: invariance_residual(rs, phi, x),
        fit_residual,
        slope_agreement,
    })
}

fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Recompute every stored diagnostic that depends only on the artifact and
/// return the largest discrepancy.
fn recheck_diagnostics(config: &SolveConfig, steps: &[ArtifactStep]) -> Result<f64> {
    let base = config.density_spec()?;
    let mut worst = 0.0f64;
    for st in steps {
        let spec = base.clone().with_regularization(st.regularization);
        let grid = SourceGrid::new(&spec, st.k, config.grid_resolution)?;
        let res = cell_residuals(&st.cloud, &grid, &st.dual_weights);
        let max = res.iter().copied().fold(0.0, f64::max);
        worst = worst.max((max - st.diagnostics.max_rel_cell_residual).abs());
        let pot = st.potential();
        worst = worst.max(pot.eval(&vec![0.0; pot.rank]).abs());
    }
    Ok(worst)
}

/// Verification tolerance for recomputed diagnostics.
pub const RECHECK_TOL: f64 = 1e-10;

pub fn run_verify(artifact: &RunArtifact, samples: usize) -> Result<(Vec<String>, Vec<Vec<String>>, VerifySummary)> {
    let config = &artifact.config;
    let rs = config.root_system()?;
    let spec = config.density_spec()?;
    let k = *config.k_list.last().unwrap();
    let mut evals = Vec::with_capacity(samples);
    let closedness;
    let proper;
    let recheck;
    match config.backend {
        Backend::Su2Oracle => {
            recheck = 0.0;
            let potential = |x: &[f64]| -> f64 {
                0.75f64.cbrt() * su2_potential(x[0].abs().min(spec.overflow_radius)).unwrap_or(f64::NAN)
            };
            let hi = (0.9 * k).min(spec.overflow_radius);
            let pts = sample_points(&rs, samples, config.eps_wall.max(0.1 * k), hi, config.eps_wall, config.seed)?;
            for x in &pts {
                let p = su2_profile(x[0].abs())?;
                let grad = vec![p.kp.copysign(x[0])];
                let hess = DMatrix::from_element(1, 1, p.kpp);
                evals.push(evaluate_point(&rs, &spec, x, grad, hess, &potential, 0.0, true)?);
            }
            closedness = 0.0;
            proper = properness_check(&potential, &sample_rays(&rs), hi).proper;
        }
        Backend::Transport => {
            let step = artifact
                .steps
                .last()
                .ok_or_else(|| Error::Config("transport artifact has no steps".into()))?;
            if step.dual_weights.len() != step.cloud.len() {
                return Err(Error::Config("dual weights and cloud sizes differ".into()));
            }
            recheck = recheck_diagnostics(config, &artifact.steps)?;
            if recheck > RECHECK_TOL {
                return Err(Error::Verification(format!(
                    "stored diagnostics do not reproduce (discrepancy {recheck:e})"
                )));
            }
            let pot: ConvexPotential = step.potential();
            let stencil = default_stencil_radius(&pot, k);
            let hi = (0.8 * k).min(k - 1.05 * stencil);
            let pts = sample_points(&rs, samples, 0.2 * k, hi, config.eps_wall, config.seed)?;
            let phi = |x: &[f64]| pot.eval(x);
            for x in &pts {
                let fit = fit_local_quadratic(&pot, x, stencil)?;
                evals.push(evaluate_point(
                    &rs,
                    &spec,
                    x,
                    fit.grad.clone(),
                    fit.hess.clone(),
                    &phi,
                    fit.residual,
                    fit.slope_agreement,
                )?);
            }
            let mu = |x: &[f64]| {
                fit_local_quadratic(&pot, x, stencil)
                    .map(|f| f.grad)
                    .unwrap_or_else(|_| vec![f64::NAN; x.len()])
            };
            closedness = if rs.rank() > 1 {
                closedness_check(&mu, &pts, (0.5 * stencil).min(0.1 * k), 0.1 * k)?
            } else {
                0.0
            };
            proper = properness_check(&phi, &sample_rays(&rs), k).proper;
        }
    }

    let n = rs.rank();
    let roots = rs.positive_roots().len();
    let defects: Vec<f64> = evals.iter().map(|e| e.defect).collect();
    let med = median(&defects);
    let mut header: Vec<String> = vec!["index".into()];
    header.extend((0..n).map(|i| format!("x{}", i + 1)));
    header.extend((0..n).map(|i| format!("grad{}", i + 1)));
    header.extend(["defect".into(), "defect_normalized".into()]);
    header.extend((0..roots).map(|i| format!("h{}", i + 1)));
    header.extend((0..roots).map(|i| format!("v{}", i + 1)));
    header.extend(
        [
            "positive",
            "implication_holds",
            "horizontal_cross_check",
            "invariance_residual",
            "fit_residual",
            "slope_agreement",
        ]
        .map(String::from),
    );
    let rows: Vec<Vec<String>> = evals
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let mut r = vec![i.to_string()];
            r.extend(e.x.iter().map(|v| fmt_f64(*v)));
            r.extend(e.grad.iter().map(|v| fmt_f64(*v)));
            r.push(fmt_f64(e.defect));
            r.push(fmt_f64(e.defect / med));
            r.extend(e.horizontal.iter().map(|v| fmt_f64(*v)));
            r.extend(e.vertical.iter().map(|v| fmt_f64(*v)));
            r.push(e.positive.to_string());
            r.push(e.implication.to_string());
            r.push(fmt_f64(e.cross_check));
            r.push(fmt_f64(e.invariance));
            r.push(fmt_f64(e.fit_residual));
            r.push(e.slope_agreement.to_string());
            r
        })
        .collect();
    let summary = VerifySummary {
        samples: evals.len(),
        median_defect: med,
        max_defect_deviation: defects
            .iter()
            .map(|d| (d / med - 1.0).abs())
            .fold(0.0, |a: f64, b| if b.is_nan() { f64::INFINITY } else { a.max(b) }),
        max_invariance_residual: evals.iter().map(|e| e.invariance).fold(0.0, f64::max),
        positivity_failures: evals.iter().filter(|e| !e.positive).count(),
        max_horizontal_cross_check: evals
            .iter()
            .map(|e| e.cross_check)
            .filter(|v| v.is_finite())
            .fold(0.0, f64::max),
        closedness_residual: closedness,
        proper,
        diagnostics_recheck: recheck,
    };
    Ok((header, rows, summary))
}

/// Path of the JSON summary written next to a verification CSV.
pub fn summary_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".summary.json");
    PathBuf::from(s)
}

pub fn cmd_verify(artifact_path: &Path, samples: usize, out: &Path) -> Result<VerifySummary> {
    let artifact = RunArtifact::load(artifact_path)?;
    let (header, rows, summary) = run_verify(&artifact, samples)?;
    write_csv(out, &header, &rows)?;
    write_atomic(
        &summary_path(out),
        (serde_json::to_string_pretty(&summary)? + "\n").as_bytes(),
    )?;
    Ok(summary)
}

// ----------------------------------------------------------------- oracle

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRequest {
    pub name: String,
    pub tmax: f64,
    pub samples: usize,
    pub n: usize,
    pub f: String,
    pub group: String,
    pub seed: u64,
}

impl Default for OracleRequest {
    fn default() -> Self {
        OracleRequest {
            name: "su2".into(),
            tmax: 3.0,
            samples: 50,
            n: 1,
            f: "ricci-flat".into(),
            group: "A1".into(),
            seed: 0,
        }
    }
}

pub fn run_oracle(req: &OracleRequest) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    if req.samples == 0 {
        return Err(Error::Config("samples must be positive".into()));
    }
    let cols = |names: &[&str]| names.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    match req.name.as_str() {
        "su2" => {
            if !(req.tmax > 0.0) {
                return Err(Error::Config(format!("tmax {} must be positive", req.tmax)));
            }
            let rs = load_named("A1")?;
            let header = cols(&[
                "t", "u", "f", "Kp", "Kpp", "lambda0", "lambda_plus", "lambda_minus", "defect",
                "identity_residual",
            ]);
            let mut rows = Vec::with_capacity(req.samples);
            for i in 0..req.samples {
                let t = req.tmax * (i + 1) as f64 / req.samples as f64;
                let p = su2_profile(t)?;
                let (l0, lp, lm) = su2_eigenvalues(t)?;
                let sm = spectral_data(&rs, &[t], &[p.kp], &DMatrix::from_element(1, 1, p.kpp), 350.0)?;
                let defect = ricci_defect(&sm, 0.0)?;
                let rhs = 0.75 * ((2.0 * t).sinh() - 2.0 * t);
                let identity = (p.kp.powi(3) - rhs) / rhs;
                rows.push(
                    [t, p.u_val, p.f_val, p.kp, p.kpp, l0, lp, lm, defect, identity]
                        .iter()
                        .map(|v| fmt_f64(*v))
                        .collect(),
                );
            }
            Ok((header, rows))
        }
        "heisenberg" => {
            let profile = match req.f.as_str() {
                "constant" => HeisenbergProfile::Constant { value: 1.0 },
                "ricci-flat" => HeisenbergProfile::RicciFlat,
                "polynomial" => random_positive_polynomial(req.seed, 4),
                other => {
                    return Err(Error::Config(format!(
                        "unknown profile `{other}` (constant, ricci-flat, polynomial)"
                    )))
                }
            };
            if req.n == 0 {
                return Err(Error::Config("n must be positive".into()));
            }
            let model = HeisenbergModel {
                n: req.n,
                profile,
                c: 1.0,
            };
            let header = cols(&["t", "f", "numeric_re", "numeric_im", "formula", "difference"]);
            let mut rows = Vec::with_capacity(req.samples);
            for i in 0..req.samples {
                let t = if req.samples == 1 {
                    0.0
                } else {
                    -0.98 + 1.96 * i as f64 / (req.samples - 1) as f64
                };
                let d = heisenberg_det(&model, t)?;
                rows.push(
                    [t, model.f(t), d.numeric.re, d.numeric.im, d.formula, d.difference]
                        .iter()
                        .map(|v| fmt_f64(*v))
                        .collect(),
                );
            }
            Ok((header, rows))
        }
        "canonical" => {
            let rs = crate::rootsys::load_root_system(&RootSource::Named(req.group.clone()))?;
            let n = rs.rank();
            let roots = rs.positive_roots().len();
            let hi = if req.tmax > 0.0 { req.tmax } else { 2.0 };
            let pts = sample_points(&rs, req.samples, 0.05 * hi, hi, crate::geometry::DEFAULT_WALL_EPS, req.seed)
                .map_err(|e| Error::Config(e.to_string()))?;
            let mut header: Vec<String> = (0..n).map(|i| format!("x{}", i + 1)).collect();
            header.push("defect".into());
            header.extend((0..roots).map(|i| format!("phi{}", i + 1)));
            header.extend((0..roots).map(|i| format!("h{}", i + 1)));
            for i in 0..n {
                for j in 0..n {
                    header.push(format!("cartan{}{}", i + 1, j + 1));
                }
            }
            let mut rows = Vec::with_capacity(pts.len());
            for x in &pts {
                let sm = canonical_example(&rs, x)?;
                let rep = metric_eigenvalues(&sm, 0.0)?;
                let mut r: Vec<String> = x.iter().map(|v| fmt_f64(*v)).collect();
                r.push(fmt_f64(rep.ricci_defect));
                r.extend(sm.roots.iter().map(|q| fmt_f64(q.phi)));
                r.extend(rep.horizontal.iter().map(|v| fmt_f64(*v)));
                for i in 0..n {
                    for j in 0..n {
                        r.push(fmt_f64(rep.cartan[(i, j)]));
                    }
                }
                rows.push(r);
            }
            Ok((header, rows))
        }
        other => Err(Error::Config(format!(
            "unknown oracle `{other}` (su2, heisenberg, canonical)"
        ))),
    }
}

pub fn cmd_oracle(req: &OracleRequest, out: &Path) -> Result<usize> {
    let (header, rows) = run_oracle(req)?;
    write_csv(out, &header, &rows)?;
    Ok(rows.len())
}
