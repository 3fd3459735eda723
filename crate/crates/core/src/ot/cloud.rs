use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::densities::{target_density, DensitySpec};
use crate::error::{Error, Result};
use crate::quad::{gauss_legendre, pairwise_sum};
use crate::rootsys::{dot, project_to_chamber, weyl_orbit};

/// Discrete target measure: points in `B_R` with positive masses, closed
/// under the Weyl group with equal masses along each orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetCloud {
    pub rank: usize,
    /// Flat coordinates, `rank` entries per point.
    pub coords: Vec<f64>,
    pub masses: Vec<f64>,
    /// Orbit index of every point; orbits are numbered from zero.
    pub orbit_of: Vec<usize>,
}

impl TargetCloud {
    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.coords[j * self.rank..(j + 1) * self.rank]
    }

    pub fn orbit_count(&self) -> usize {
        self.orbit_of.iter().copied().max().map_or(0, |m| m + 1)
    }

    /// Member lists of each orbit.
    pub fn orbits(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.orbit_count()];
        for (j, &o) in self.orbit_of.iter().enumerate() {
            out[o].push(j);
        }
        out
    }

    pub fn total_mass(&self) -> f64 {
        pairwise_sum(&self.masses)
    }

    pub fn max_norm(&self) -> f64 {
        (0..self.len())
            .map(|j| dot(self.point(j), self.point(j)).sqrt())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct CloudOptions {
    pub seed: u64,
    /// Rank-1 stratum jitter as a fraction of the stratum width; 0 places
    /// points at stratum centers.
    pub jitter: f64,
    /// Total mass the cloud is rescaled to.
    pub source_mass: f64,
    /// Per-axis resolution of the mass-lumping grid (rank ≥ 2); `None` picks
    /// one with a few hundred lumping cells per point.
    pub lumping_resolution: Option<usize>,
}

/// Sample `m` target points in `B_radius` stratified over the dominant
/// chamber and replicated along Weyl orbits; masses are the target-density
/// integrals of the points' Voronoi cells, rescaled to `opts.source_mass`.
pub fn sample_target_cloud(
    spec: &DensitySpec,
    radius: f64,
    m: usize,
    opts: &CloudOptions,
) -> Result<TargetCloud> {
    let order = spec.rs.order();
    if m < order {
        return Err(Error::Domain(format!(
            "m = {m} cannot cover a Weyl orbit of size {order}"
        )));
    }
    if !(radius > 0.0) {
        return Err(Error::Domain(format!("cloud radius {radius} must be positive")));
    }
    if !(opts.source_mass > 0.0) {
        return Err(Error::Domain("source mass must be positive".into()));
    }
    let mut cloud = if spec.rank() == 1 {
        rank1_cloud(spec, radius, m / 2, opts)?
    } else {
        chamber_cloud(spec, radius, m / order, opts)?
    };
    let scale = opts.source_mass / cloud.total_mass();
    for v in cloud.masses.iter_mut() {
        *v *= scale;
    }
    Ok(cloud)
}

fn rank1_cloud(spec: &DensitySpec, radius: f64, p: usize, opts: &CloudOptions) -> Result<TargetCloud> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let width = radius / p as f64;
    let jitter = opts.jitter.clamp(0.0, 1.0);
    let ys: Vec<f64> = (0..p)
        .map(|i| {
            let shift = if jitter > 0.0 { jitter * (rng.gen::<f64>() - 0.5) } else { 0.0 };
            (i as f64 + 0.5 + shift) * width
        })
        .collect();
    let mut coords = Vec::with_capacity(2 * p);
    let mut masses = Vec::with_capacity(2 * p);
    let mut orbit_of = Vec::with_capacity(2 * p);
    for i in 0..p {
        let lo = if i == 0 { 0.0 } else { 0.5 * (ys[i - 1] + ys[i]) };
        let hi = if i + 1 == p { radius } else { 0.5 * (ys[i] + ys[i + 1]) };
        let mass = gauss_legendre(|y| target_density(spec, &[y]), lo, hi);
        for sign in [1.0, -1.0] {
            coords.push(sign * ys[i]);
            masses.push(mass);
            orbit_of.push(i);
        }
    }
    Ok(TargetCloud {
        rank: 1,
        coords,
        masses,
        orbit_of,
    })
}

fn uniform_in_ball(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..n).map(|_| radius * (2.0 * rng.gen::<f64>() - 1.0)).collect();
        if dot(&x, &x) <= radius * radius {
            return x;
        }
    }
}

fn nearest(centers: &[Vec<f64>], x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, center) in centers.iter().enumerate() {
        let d: f64 = center.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

/// Chamber points from Lloyd iterations on a seeded uniform sample of the
/// chamber sector; then orbit replication and grid mass lumping.
fn chamber_cloud(spec: &DensitySpec, radius: f64, p: usize, opts: &CloudOptions) -> Result<TargetCloud> {
    let rs = &spec.rs;
    let n = rs.rank();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let samples: Vec<Vec<f64>> = (0..64 * p)
        .map(|_| project_to_chamber(rs, &uniform_in_ball(&mut rng, n, radius)).map(|c| c.0))
        .collect::<Result<_>>()?;
    let mut centers: Vec<Vec<f64>> = samples[..p].to_vec();
    for _ in 0..30 {
        let owner: Vec<usize> = samples.par_iter().map(|s| nearest(&centers, s)).collect();
        let mut sums = vec![vec![0.0; n]; p];
        let mut counts = vec![0usize; p];
        for (s, &o) in samples.iter().zip(&owner) {
            counts[o] += 1;
            for d in 0..n {
                sums[o][d] += s[d];
            }
        }
        for c in 0..p {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|v| v / counts[c] as f64).collect();
            }
        }
    }
    centers.sort_by(|a, b| {
        dot(a, a)
            .partial_cmp(&dot(b, b))
            .unwrap()
            .then_with(|| a.partial_cmp(b).unwrap())
    });

    // Lump the target density on a fine grid over B_R: every lumping cell
    // goes to the nearest cloud point, which lies in the same chamber as the
    // cell center, so folding the center and searching the chamber
    // representatives suffices.
    let lump = opts.lumping_resolution.unwrap_or_else(|| {
        let ball_fraction = match n {
            2 => std::f64::consts::PI / 4.0,
            _ => std::f64::consts::PI / 6.0,
        };
        let cells = 400.0 * (p * rs.order()) as f64 / ball_fraction;
        (cells.powf(1.0 / n as f64).ceil() as usize).clamp(64, 2048)
    });
    let h = 2.0 * radius / lump as f64;
    let vol = h.powi(n as i32);
    let inner = lump.pow(n as u32 - 1);
    let slabs: Vec<Result<Vec<f64>>> = (0..lump)
        .into_par_iter()
        .map(|i0| {
            let mut acc = vec![0.0; p];
            let mut x = vec![0.0; n];
            x[0] = -radius + (i0 as f64 + 0.5) * h;
            for flat in 0..inner {
                let mut rem = flat;
                for xd in x.iter_mut().skip(1) {
                    *xd = -radius + ((rem % lump) as f64 + 0.5) * h;
                    rem /= lump;
                }
                if dot(&x, &x) <= radius * radius {
                    let folded = project_to_chamber(rs, &x)?;
                    acc[nearest(&centers, &folded)] += target_density(spec, &x);
                }
            }
            Ok(acc)
        })
        .collect();
    let mut per_orbit = vec![Vec::with_capacity(lump); p];
    for s in slabs {
        for (c, v) in s?.into_iter().enumerate() {
            per_orbit[c].push(v);
        }
    }

    let mut coords = Vec::new();
    let mut masses = Vec::new();
    let mut orbit_of = Vec::new();
    for (c, center) in centers.iter().enumerate() {
        let orbit_mass = pairwise_sum(&per_orbit[c]) * vol;
        if !(orbit_mass > 0.0) {
            return Err(Error::Domain(format!(
                "lumping grid {lump} too coarse: chamber point {c} received no mass"
            )));
        }
        let orbit = weyl_orbit(rs, center);
        let each = orbit_mass / orbit.len() as f64;
        for y in orbit {
            coords.extend_from_slice(&y);
            masses.push(each);
            orbit_of.push(c);
        }
    }
    Ok(TargetCloud {
        rank: n,
        coords,
        masses,
        orbit_of,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rootsys::load_named;

    fn opts(mass: f64) -> CloudOptions {
        CloudOptions {
            seed: 7,
            jitter: 0.0,
            source_mass: mass,
            lumping_resolution: None,
        }
    }

    #[test]
    fn a1_two_points() {
        let spec = DensitySpec::new(load_named("A1").unwrap());
        let c = sample_target_cloud(&spec, 1.0, 2, &opts(0.8)).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.point(0)[0], -c.point(1)[0]);
        assert_eq!(c.masses[0], c.masses[1]);
        assert!((c.total_mass() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn rejects_too_few_points() {
        let spec = DensitySpec::new(load_named("A2").unwrap());
        assert!(sample_target_cloud(&spec, 1.0, 5, &opts(1.0)).is_err());
    }

    #[test]
    fn a1_masses_follow_target_density() {
        // Centered strata: cell i covers [i, i+1]·R/p, so its mass is the
        // exact integral of y² there (before rescaling).
        let spec = DensitySpec::new(load_named("A1").unwrap());
        let r = 1.5;
        let c = sample_target_cloud(&spec, r, 20, &opts(2.0 * r * r * r / 3.0)).unwrap();
        for j in 0..c.len() {
            let i = c.orbit_of[j] as f64;
            let (lo, hi) = (i * r / 10.0, (i + 1.0) * r / 10.0);
            let exact = (hi.powi(3) - lo.powi(3)) / 3.0;
            assert!((c.masses[j] - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn a2_orbits_complete_with_equal_masses() {
        let spec = DensitySpec::new(load_named("A2").unwrap());
        let c = sample_target_cloud(&spec, 1.2, 600, &opts(3.0)).unwrap();
        assert_eq!(c.len(), 600);
        // Oracle: scan every group image of every point for a match.
        for j in 0..c.len() {
            for g in 0..spec.rs.order() {
                let img = spec.rs.apply(g, c.point(j));
                let hit = (0..c.len()).find(|&i| {
                    c.point(i).iter().zip(img.iter()).all(|(a, b)| (a - b).abs() < 1e-9)
                });
                let i = hit.expect("orbit image missing");
                assert_eq!(c.masses[i], c.masses[j]);
                assert_eq!(c.orbit_of[i], c.orbit_of[j]);
            }
        }
        assert!(((c.total_mass() - 3.0) / 3.0).abs() < 1e-12);
        assert!(c.max_norm() <= 1.2);
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = DensitySpec::new(load_named("B2").unwrap());
        let a = sample_target_cloud(&spec, 1.0, 80, &opts(1.0)).unwrap();
        let b = sample_target_cloud(&spec, 1.0, 80, &opts(1.0)).unwrap();
        assert_eq!(a, b);
    }
}
