//! Laguerre (power) cells of a weighted point cloud intersected with the
//! piecewise-constant source grid.
//!
//! Cell `j` is `{x : ⟨x,y_j⟩ − ψ_j ≥ ⟨x,y_i⟩ − ψ_i for all i}`, equivalently
//! the set where `½|x−y_j|² − w_j` is minimal with `w_j = ½|y_j|² − ψ_j`.
//! Masses are exact for the grid measure: intervals in rank 1, clipped
//! polygons in rank 2, and polygons on the cell-centered slices of each grid
//! layer in rank 3 (the last axis is lumped to the slice).
//!
//! Besides masses the routines return the per-cell transport integrals
//! `∫_cell ½|x−y_j|² dρ` and the derivatives `∂mass_j/∂ψ_i`, which are
//! facet integrals of the density divided by `|y_i − y_j|`.

use rayon::prelude::*;

use super::grid::SourceGrid;

/// Optional restriction of the source measure to grid cells whose centers
/// satisfy a predicate.
pub type Region<'a> = Option<&'a (dyn Fn(&[f64]) -> bool + Sync)>;

#[derive(Debug, Clone, Default)]
pub struct CellAssignment {
    pub masses: Vec<f64>,
    /// `∫_{cell j} ½|x − y_j|² dρ(x)`
    pub costs: Vec<f64>,
    /// Sparse rows of `∂mass_j/∂ψ_i` for `i ≠ j`; the diagonal is minus the
    /// row sum.
    pub hessian: Vec<Vec<(usize, f64)>>,
}

impl CellAssignment {
    pub fn empty_cells(&self) -> usize {
        self.masses.iter().filter(|&&m| m <= 0.0).count()
    }
}

/// Assign the grid measure to the Laguerre cells of `coords` (flat, `rank`
/// per point) with dual weights `psi`.
pub fn laguerre_masses(
    grid: &SourceGrid,
    coords: &[f64],
    psi: &[f64],
    region: Region<'_>,
    with_hessian: bool,
) -> CellAssignment {
    match grid.rank() {
        1 => rank1(grid, coords, psi, region, with_hessian),
        2 | 3 => sliced(grid, coords, psi, region, with_hessian),
        r => panic!("unsupported rank {r}"),
    }
}

// ---------------------------------------------------------------- rank 1

fn rank1(
    grid: &SourceGrid,
    ys: &[f64],
    psi: &[f64],
    region: Region<'_>,
    with_hessian: bool,
) -> CellAssignment {
    let m = ys.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| ys[a].partial_cmp(&ys[b]).unwrap());
    // Upper envelope of lines x ↦ y_j x − ψ_j, slopes increasing.
    let cross = |a: usize, b: usize| (psi[b] - psi[a]) / (ys[b] - ys[a]);
    let mut hull: Vec<usize> = Vec::with_capacity(m);
    for &j in &order {
        if let Some(&last) = hull.last() {
            if ys[last] == ys[j] {
                if psi[j] < psi[last] {
                    hull.pop();
                } else {
                    continue;
                }
            }
        }
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            if cross(a, j) <= cross(a, b) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(j);
    }
    let k = grid.radius();
    let dens = grid.densities();
    let mut out = CellAssignment {
        masses: vec![0.0; m],
        costs: vec![0.0; m],
        hessian: vec![Vec::new(); m],
    };
    for (t, &j) in hull.iter().enumerate() {
        let lo = if t == 0 { -k } else { cross(hull[t - 1], j).max(-k) };
        let hi = if t + 1 == hull.len() { k } else { cross(j, hull[t + 1]).min(k) };
        if hi <= lo {
            continue;
        }
        let y = ys[j];
        let (mut mass, mut cost) = (0.0, 0.0);
        for c in grid.index_of(lo)..=grid.index_of(hi) {
            let rho = dens[c];
            if rho == 0.0 {
                continue;
            }
            if let Some(f) = region {
                if !f(&[grid.center_coord(c)]) {
                    continue;
                }
            }
            let a = lo.max(grid.edge(c));
            let b = hi.min(grid.edge(c + 1));
            if b > a {
                mass += rho * (b - a);
                cost += rho * ((b - y).powi(3) - (a - y).powi(3)) / 6.0;
            }
        }
        out.masses[j] = mass;
        out.costs[j] = cost;
    }
    if with_hessian {
        for w in hull.windows(2) {
            let (a, b) = (w[0], w[1]);
            let x = cross(a, b);
            if x <= -k || x >= k {
                continue;
            }
            let rho = dens[grid.index_of(x)];
            if rho > 0.0 {
                let v = rho / (ys[b] - ys[a]).abs();
                out.hessian[a].push((b, v));
                out.hessian[b].push((a, v));
            }
        }
    }
    out
}

// ------------------------------------------------------- ranks 2 and 3

#[derive(Clone, Copy, Debug)]
struct V2 {
    x: f64,
    y: f64,
}

/// Convex polygon, counter-clockwise; `labels[i]` names the constraint that
/// produced the edge from vertex `i` to vertex `i+1` (`usize::MAX` = box).
#[derive(Clone, Debug, Default)]
struct Poly {
    v: Vec<V2>,
    labels: Vec<usize>,
}

const BOX: usize = usize::MAX;

impl Poly {
    fn rect(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Poly {
            v: vec![
                V2 { x: x0, y: y0 },
                V2 { x: x1, y: y0 },
                V2 { x: x1, y: y1 },
                V2 { x: x0, y: y1 },
            ],
            labels: vec![BOX; 4],
        }
    }

    /// Keep `{p : a·p ≤ b}`.
    fn clip(&self, ax: f64, ay: f64, b: f64, label: usize) -> Poly {
        let n = self.v.len();
        let side: Vec<f64> = self.v.iter().map(|p| ax * p.x + ay * p.y - b).collect();
        if side.iter().all(|&s| s <= 0.0) {
            return self.clone();
        }
        let mut out = Poly {
            v: Vec::with_capacity(n + 1),
            labels: Vec::with_capacity(n + 1),
        };
        if side.iter().all(|&s| s > 0.0) {
            return out;
        }
        for i in 0..n {
            let j = (i + 1) % n;
            let (p, q) = (self.v[i], self.v[j]);
            let (sp, sq) = (side[i], side[j]);
            let lab = self.labels[i];
            if sp <= 0.0 {
                out.v.push(p);
                if sq > 0.0 {
                    out.labels.push(lab);
                    let t = sp / (sp - sq);
                    out.v.push(V2 {
                        x: p.x + t * (q.x - p.x),
                        y: p.y + t * (q.y - p.y),
                    });
                    out.labels.push(label);
                } else {
                    out.labels.push(lab);
                }
            } else if sq <= 0.0 {
                let t = sp / (sp - sq);
                out.v.push(V2 {
                    x: p.x + t * (q.x - p.x),
                    y: p.y + t * (q.y - p.y),
                });
                out.labels.push(lab);
            }
        }
        if out.v.len() < 3 {
            out.v.clear();
            out.labels.clear();
        }
        out
    }

    fn is_empty(&self) -> bool {
        self.v.len() < 3
    }

    fn bbox(&self) -> (f64, f64, f64, f64) {
        let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in &self.v {
            b.0 = b.0.min(p.x);
            b.1 = b.1.max(p.x);
            b.2 = b.2.min(p.y);
            b.3 = b.3.max(p.y);
        }
        b
    }

    fn contains(&self, q: V2) -> bool {
        let n = self.v.len();
        (0..n).all(|i| {
            let p = self.v[i];
            let r = self.v[(i + 1) % n];
            (r.x - p.x) * (q.y - p.y) - (r.y - p.y) * (q.x - p.x) >= 0.0
        })
    }

    /// Area, first moments and `∫|p|²` with coordinates taken relative to
    /// `o`.
    fn moments(&self, o: V2) -> (f64, f64, f64, f64) {
        let n = self.v.len();
        let (mut a, mut sx, mut sy, mut i2) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            let p = self.v[i];
            let q = self.v[(i + 1) % n];
            let (px, py, qx, qy) = (p.x - o.x, p.y - o.y, q.x - o.x, q.y - o.y);
            let c = px * qy - qx * py;
            a += c;
            sx += (px + qx) * c;
            sy += (py + qy) * c;
            i2 += (px * px + px * qx + qx * qx + py * py + py * qy + qy * qy) * c;
        }
        (a / 2.0, sx / 6.0, sy / 6.0, i2 / 12.0)
    }
}

struct Slice<'a> {
    /// Offset into the density array of this layer.
    density: &'a [f64],
    /// Last coordinate of the slice (rank 3) and its thickness.
    z: Option<(usize, f64)>,
    weight: f64,
}

fn sliced(
    grid: &SourceGrid,
    coords: &[f64],
    psi: &[f64],
    region: Region<'_>,
    with_hessian: bool,
) -> CellAssignment {
    let n = grid.rank();
    let m = psi.len();
    let res = grid.resolution();
    let layer = res * res;
    let slices: Vec<Slice<'_>> = if n == 2 {
        vec![Slice {
            density: grid.densities(),
            z: None,
            weight: 1.0,
        }]
    } else {
        (0..res)
            .map(|iz| Slice {
                density: &grid.densities()[iz * layer..(iz + 1) * layer],
                z: Some((iz, grid.center_coord(iz))),
                weight: grid.spacing(),
            })
            .filter(|s| s.density.iter().any(|&d| d > 0.0))
            .collect()
    };
    let k = grid.radius();
    let h = grid.spacing();
    let per_point: Vec<(f64, f64, Vec<(usize, f64)>)> = (0..m)
        .into_par_iter()
        .map(|j| {
            let yj = &coords[j * n..(j + 1) * n];
            let mut mass = 0.0;
            let mut cost = 0.0;
            let mut hess: Vec<(usize, f64)> = Vec::new();
            for s in &slices {
                let (zc, zval) = match s.z {
                    Some((_, z)) => (z - yj[2], z),
                    None => (0.0, 0.0),
                };
                let mut poly = Poly::rect(-k, k, -k, k);
                for i in 0..m {
                    if i == j {
                        continue;
                    }
                    let yi = &coords[i * n..(i + 1) * n];
                    let (ax, ay) = (yi[0] - yj[0], yi[1] - yj[1]);
                    let mut b = psi[i] - psi[j];
                    if n == 3 {
                        b -= zval * (yi[2] - yj[2]);
                    }
                    if ax == 0.0 && ay == 0.0 {
                        if b < 0.0 {
                            poly = Poly::default();
                            break;
                        }
                        continue;
                    }
                    poly = poly.clip(ax, ay, b, i);
                    if poly.is_empty() {
                        break;
                    }
                }
                if poly.is_empty() {
                    continue;
                }
                let (pm, pc) = polygon_mass(grid, s, &poly, yj, zc, region);
                mass += s.weight * pm;
                cost += s.weight * pc;
                if with_hessian {
                    let nv = poly.v.len();
                    for e in 0..nv {
                        let i = poly.labels[e];
                        if i == BOX {
                            continue;
                        }
                        let yi = &coords[i * n..(i + 1) * n];
                        let len2 = ((yi[0] - yj[0]).powi(2) + (yi[1] - yj[1]).powi(2)).sqrt();
                        let flux = edge_integral(grid, s, poly.v[e], poly.v[(e + 1) % nv]);
                        if flux > 0.0 {
                            hess.push((i, s.weight * flux / len2));
                        }
                    }
                }
            }
            let _ = h;
            // Merge repeated neighbours (one entry per slice).
            hess.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(hess.len());
            for (i, v) in hess {
                match merged.last_mut() {
                    Some(last) if last.0 == i => last.1 += v,
                    _ => merged.push((i, v)),
                }
            }
            (mass, cost, merged)
        })
        .collect();
    let mut out = CellAssignment {
        masses: Vec::with_capacity(m),
        costs: Vec::with_capacity(m),
        hessian: Vec::with_capacity(m),
    };
    for (mass, cost, hess) in per_point {
        out.masses.push(mass);
        out.costs.push(cost);
        out.hessian.push(hess);
    }
    if with_hessian {
        symmetrize(&mut out.hessian);
    }
    out
}

/// Average `H_ij` and `H_ji`; the two sides integrate the same facet with
/// independently rounded endpoints.
fn symmetrize(rows: &mut [Vec<(usize, f64)>]) {
    let snapshot: Vec<Vec<(usize, f64)>> = rows.to_vec();
    let lookup = |r: &Vec<(usize, f64)>, i: usize| {
        r.binary_search_by_key(&i, |e| e.0).ok().map(|p| r[p].1)
    };
    for (j, row) in rows.iter_mut().enumerate() {
        for e in row.iter_mut() {
            let other = lookup(&snapshot[e.0], j).unwrap_or(0.0);
            e.1 = 0.5 * (e.1 + other);
        }
    }
    // Entries present on one side only.
    for (j, row) in snapshot.iter().enumerate() {
        for &(i, v) in row {
            if lookup(&snapshot[i], j).is_none() {
                rows[i].push((j, 0.5 * v));
                rows[i].sort_by_key(|e| e.0);
            }
        }
    }
}

/// Mass and `∫½|x−y|²` of the grid measure of one slice restricted to
/// `poly`. `dz` is the out-of-plane offset of the slice from `y`.
fn polygon_mass(
    grid: &SourceGrid,
    slice: &Slice<'_>,
    poly: &Poly,
    y: &[f64],
    dz: f64,
    region: Region<'_>,
) -> (f64, f64) {
    let res = grid.resolution();
    let h = grid.spacing();
    let (x0, x1, y0, y1) = poly.bbox();
    let (i0, i1) = (grid.index_of(x0), grid.index_of(x1));
    let (j0, j1) = (grid.index_of(y0), grid.index_of(y1));
    let mut mass = 0.0;
    let mut cost = 0.0;
    let mut center = [0.0; 3];
    for jy in j0..=j1 {
        for ix in i0..=i1 {
            let rho = slice.density[ix + res * jy];
            if rho == 0.0 {
                continue;
            }
            let c = V2 {
                x: grid.center_coord(ix),
                y: grid.center_coord(jy),
            };
            if let Some(f) = region {
                center[0] = c.x;
                center[1] = c.y;
                let dim = if let Some((iz, _)) = slice.z {
                    center[2] = grid.center_coord(iz);
                    3
                } else {
                    2
                };
                if !f(&center[..dim]) {
                    continue;
                }
            }
            let (ex0, ex1) = (grid.edge(ix), grid.edge(ix + 1));
            let (ey0, ey1) = (grid.edge(jy), grid.edge(jy + 1));
            let corners = [
                V2 { x: ex0, y: ey0 },
                V2 { x: ex1, y: ey0 },
                V2 { x: ex1, y: ey1 },
                V2 { x: ex0, y: ey1 },
            ];
            let (area, sx, sy, i2) = if corners.iter().all(|&q| poly.contains(q)) {
                (h * h, 0.0, 0.0, h * h * h * h / 6.0)
            } else {
                let piece = poly
                    .clip(1.0, 0.0, ex1, BOX)
                    .clip(-1.0, 0.0, -ex0, BOX)
                    .clip(0.0, 1.0, ey1, BOX)
                    .clip(0.0, -1.0, -ey0, BOX);
                if piece.is_empty() {
                    continue;
                }
                piece.moments(c)
            };
            if area <= 0.0 {
                continue;
            }
            // ½|x − y|² with x = c + p: ½(|p|² + 2 p·(c−y) + |c−y|²) + ½dz²
            let (dx, dy) = (c.x - y[0], c.y - y[1]);
            let quad = 0.5 * (i2 + 2.0 * (sx * dx + sy * dy) + (dx * dx + dy * dy + dz * dz) * area);
            mass += rho * area;
            cost += rho * quad;
        }
    }
    (mass, cost)
}

/// `∫ ρ ds` along the segment `p → q` in one slice.
fn edge_integral(grid: &SourceGrid, slice: &Slice<'_>, p: V2, q: V2) -> f64 {
    let res = grid.resolution();
    let len = ((q.x - p.x).powi(2) + (q.y - p.y).powi(2)).sqrt();
    if len == 0.0 {
        return 0.0;
    }
    let mut ts = vec![0.0, 1.0];
    for (a, b) in [(p.x, q.x), (p.y, q.y)] {
        if a == b {
            continue;
        }
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let first = grid.index_of(lo) + 1;
        let last = grid.index_of(hi);
        for line in first..=last {
            let t = (grid.edge(line) - a) / (b - a);
            if t > 0.0 && t < 1.0 {
                ts.push(t);
            }
        }
    }
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut total = 0.0;
    for w in ts.windows(2) {
        let tm = 0.5 * (w[0] + w[1]);
        let mx = p.x + tm * (q.x - p.x);
        let my = p.y + tm * (q.y - p.y);
        if let (Some(ix), Some(iy)) = (grid.index_checked(mx), grid.index_checked(my)) {
            total += slice.density[ix + res * iy] * (w[1] - w[0]);
        }
    }
    total * len
}
