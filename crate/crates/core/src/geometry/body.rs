//! Convex bodies with volume, surface area and inradius.

use std::f64::consts::PI;

use super::Section;
use crate::error::{LabError, Result};
use crate::grid::{CellMask, Grid, Point};
use crate::quadrature::integrate;

/// A bounded convex body in the plane or in space.
#[derive(Debug, Clone)]
pub enum ConvexBody {
    Ball { dim: usize, radius: f64 },
    Ellipsoid { dim: usize, semi_axes: [f64; 3] },
    Polytope(Polytope),
    /// Grid mask with measured volume, isocontour area and a certified inscribed radius.
    Mask { dim: usize, volume: f64, area: f64, inradius: f64 },
}

impl ConvexBody {
    /// Body carried by an unclipped section.
    pub fn from_section(section: &Section) -> Result<Self> {
        let area = super::section_boundary_area(section)?;
        Ok(Self::Mask {
            dim: section.grid().dim(),
            volume: section.volume(),
            area,
            inradius: mask_inradius(section.grid(), section.mask()),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Ball { dim, .. } | Self::Ellipsoid { dim, .. } | Self::Mask { dim, .. } => *dim,
            Self::Polytope(p) => p.dim,
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Self::Ball { dim, radius } => unit_ball_volume(*dim) * radius.powi(*dim as i32),
            Self::Ellipsoid { dim, semi_axes } => unit_ball_volume(*dim) * semi_axes[..*dim].iter().product::<f64>(),
            Self::Polytope(p) => p.volume,
            Self::Mask { volume, .. } => *volume,
        }
    }

    pub fn surface_area(&self) -> Result<f64> {
        match self {
            Self::Ball { dim, radius } => Ok(*dim as f64 * unit_ball_volume(*dim) * radius.powi(*dim as i32 - 1)),
            Self::Ellipsoid { dim, semi_axes } => ellipsoid_area(*dim, semi_axes),
            Self::Polytope(p) => Ok(p.area),
            Self::Mask { area, .. } => Ok(*area),
        }
    }

    pub fn inradius(&self) -> f64 {
        match self {
            Self::Ball { radius, .. } => *radius,
            Self::Ellipsoid { dim, semi_axes } => semi_axes[..*dim].iter().copied().fold(f64::INFINITY, f64::min),
            Self::Polytope(p) => p.inradius,
            Self::Mask { inradius, .. } => *inradius,
        }
    }
}

/// `|∂X| r / (n |X|)`; at most one for every convex body with inradius `r`.
pub fn area_lemma_ratio(body: &ConvexBody) -> Result<f64> {
    let vol = body.volume();
    let r = body.inradius();
    if !(vol > 0.0) {
        return Err(LabError::Degenerate(format!("body volume {vol}")));
    }
    if !(r > 0.0) {
        return Err(LabError::Degenerate(format!("body inradius {r}")));
    }
    Ok(body.surface_area()? * r / (body.dim() as f64 * vol))
}

fn unit_ball_volume(dim: usize) -> f64 {
    match dim {
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => unreachable!("dimension checked by constructors"),
    }
}

fn ellipsoid_area(dim: usize, ax: &[f64; 3]) -> Result<f64> {
    let tol = 1e-12;
    if dim == 2 {
        let (a, b) = (ax[0], ax[1]);
        let f = |t: f64| (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt();
        return Ok(integrate(f, 0.0, 2.0 * PI, tol, tol, 500)?.value);
    }
    let (a, b, c) = (ax[0], ax[1], ax[2]);
    let inner = |th: f64| -> f64 {
        let (st, ct) = (th.sin(), th.cos());
        let f = |ph: f64| {
            let (sp, cp) = (ph.sin(), ph.cos());
            st * (b * b * c * c * st * st * cp * cp + a * a * c * c * st * st * sp * sp + a * a * b * b * ct * ct).sqrt()
        };
        integrate(f, 0.0, 2.0 * PI, tol, tol, 500).map(|r| r.value).unwrap_or(f64::NAN)
    };
    let v = integrate(inner, 0.0, PI, tol, tol, 500)?.value;
    if !v.is_finite() {
        return Err(LabError::Quadrature("ellipsoid surface integrand".into()));
    }
    Ok(v)
}

/// Facet of a polytope: outward unit normal, offset `normal·x ≤ offset`, and facet measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Facet {
    pub normal: Point,
    pub offset: f64,
    pub measure: f64,
}

/// Convex hull of a finite point set.
#[derive(Debug, Clone)]
pub struct Polytope {
    dim: usize,
    vertices: Vec<Point>,
    facets: Vec<Facet>,
    volume: f64,
    area: f64,
    inradius: f64,
}

impl Polytope {
    pub fn hull(dim: usize, points: &[Point]) -> Result<Self> {
        let (vertices, facets) = match dim {
            2 => hull2(points)?,
            3 => hull3(points)?,
            _ => return Err(LabError::Invalid(format!("polytope dimension {dim}"))),
        };
        let area: f64 = facets.iter().map(|f| f.measure).sum();
        // divergence theorem about the vertex centroid
        let c = centroid(dim, &vertices);
        let volume: f64 = facets
            .iter()
            .map(|f| f.measure * (f.offset - dot(&f.normal, &c)) / dim as f64)
            .sum();
        if !(volume > 0.0) {
            return Err(LabError::Degenerate("hull has no interior".into()));
        }
        let inradius = chebyshev_radius(dim, &facets, &c)?;
        Ok(Self {
            dim,
            vertices,
            facets,
            volume,
            area,
            inradius,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }
    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }
    pub fn volume(&self) -> f64 {
        self.volume
    }
    pub fn area(&self) -> f64 {
        self.area
    }
    pub fn inradius(&self) -> f64 {
        self.inradius
    }
}

fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: &Point, b: &Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn centroid(dim: usize, pts: &[Point]) -> Point {
    let mut c = [0.0; 3];
    for p in pts {
        for d in 0..dim {
            c[d] += p[d] / pts.len() as f64;
        }
    }
    c
}

fn hull2(points: &[Point]) -> Result<(Vec<Point>, Vec<Facet>)> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return Err(LabError::Degenerate("fewer than three distinct points".into()));
    }
    let turn = |o: &Point, a: &Point, b: &Point| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for p in iter {
            while hull.len() >= start + 2 && turn(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(*p);
        }
        hull.pop();
    }
    if hull.len() < 3 {
        return Err(LabError::Degenerate("collinear points".into()));
    }
    let facets = (0..hull.len())
        .map(|i| {
            let a = hull[i];
            let b = hull[(i + 1) % hull.len()];
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let len = (dx * dx + dy * dy).sqrt();
            let normal = [dy / len, -dx / len, 0.0];
            Facet {
                normal,
                offset: dot(&normal, &a),
                measure: len,
            }
        })
        .collect();
    Ok((hull, facets))
}

fn hull3(points: &[Point]) -> Result<(Vec<Point>, Vec<Facet>)> {
    let pts = points;
    if pts.len() < 4 {
        return Err(LabError::Degenerate("fewer than four points".into()));
    }
    let scale = pts.iter().flat_map(|p| p.iter()).fold(0.0_f64, |m, x| m.max(x.abs())).max(1e-300);
    let eps = 1e-12 * scale;
    // initial tetrahedron
    let i0 = 0;
    let i1 = (1..pts.len())
        .max_by(|&a, &b| norm(&sub(&pts[a], &pts[i0])).total_cmp(&norm(&sub(&pts[b], &pts[i0]))))
        .expect("points");
    let e = sub(&pts[i1], &pts[i0]);
    let i2 = (0..pts.len())
        .max_by(|&a, &b| {
            norm(&cross(&e, &sub(&pts[a], &pts[i0]))).total_cmp(&norm(&cross(&e, &sub(&pts[b], &pts[i0]))))
        })
        .expect("points");
    let nrm = cross(&e, &sub(&pts[i2], &pts[i0]));
    let i3 = (0..pts.len())
        .max_by(|&a, &b| {
            dot(&nrm, &sub(&pts[a], &pts[i0])).abs().total_cmp(&dot(&nrm, &sub(&pts[b], &pts[i0])).abs())
        })
        .expect("points");
    if dot(&nrm, &sub(&pts[i3], &pts[i0])).abs() <= eps * scale * scale {
        return Err(LabError::Degenerate("coplanar points".into()));
    }
    let mut faces: Vec<[usize; 3]> = vec![[i0, i1, i2], [i0, i1, i3], [i0, i2, i3], [i1, i2, i3]];
    let inner = centroid(3, &[pts[i0], pts[i1], pts[i2], pts[i3]]);
    for f in faces.iter_mut() {
        let n = face_normal(pts, f);
        if dot(&n, &sub(&pts[f[0]], &inner)) < 0.0 {
            f.swap(1, 2);
        }
    }
    for (pi, p) in pts.iter().enumerate() {
        if [i0, i1, i2, i3].contains(&pi) {
            continue;
        }
        let visible: Vec<bool> = faces
            .iter()
            .map(|f| {
                let n = face_normal(pts, f);
                dot(&n, &sub(p, &pts[f[0]])) > eps * norm(&n)
            })
            .collect();
        if !visible.iter().any(|&v| v) {
            continue;
        }
        let mut edges = std::collections::HashSet::new();
        for (f, &v) in faces.iter().zip(&visible) {
            if v {
                for k in 0..3 {
                    edges.insert((f[k], f[(k + 1) % 3]));
                }
            }
        }
        let mut next: Vec<[usize; 3]> = faces
            .iter()
            .zip(&visible)
            .filter(|(_, &v)| !v)
            .map(|(f, _)| *f)
            .collect();
        let mut horizon: Vec<(usize, usize)> = edges.iter().copied().filter(|&(a, b)| !edges.contains(&(b, a))).collect();
        horizon.sort_unstable();
        for (a, b) in horizon {
            next.push([a, b, pi]);
        }
        faces = next;
    }
    let mut used: Vec<usize> = faces.iter().flat_map(|f| f.iter().copied()).collect();
    used.sort_unstable();
    used.dedup();
    let vertices = used.iter().map(|&i| pts[i]).collect();
    let facets = faces
        .iter()
        .map(|f| {
            let n = face_normal(pts, f);
            let len = norm(&n);
            let normal = [n[0] / len, n[1] / len, n[2] / len];
            Facet {
                normal,
                offset: dot(&normal, &pts[f[0]]),
                measure: 0.5 * len,
            }
        })
        .collect();
    Ok((vertices, facets))
}

fn norm(v: &Point) -> f64 {
    dot(v, v).sqrt()
}

fn face_normal(pts: &[Point], f: &[usize; 3]) -> Point {
    cross(&sub(&pts[f[1]], &pts[f[0]]), &sub(&pts[f[2]], &pts[f[0]]))
}

/// Largest `r` with `B(x, r)` inside `{normal_i·y ≤ offset_i}`, by a dense simplex
/// in coordinates centered at an interior point `c`.
fn chebyshev_radius(dim: usize, facets: &[Facet], c: &Point) -> Result<f64> {
    // variables: x⁺ (dim), x⁻ (dim), r; slack per facet
    let m = facets.len();
    let nv = 2 * dim + 1;
    let cols = nv + m + 1;
    let mut t = vec![vec![0.0; cols]; m + 1];
    for (i, f) in facets.iter().enumerate() {
        for d in 0..dim {
            t[i][d] = f.normal[d];
            t[i][dim + d] = -f.normal[d];
        }
        t[i][2 * dim] = 1.0;
        t[i][nv + i] = 1.0;
        let b = f.offset - dot(&f.normal, c);
        if b <= 0.0 {
            return Err(LabError::Degenerate("interior point not strictly inside".into()));
        }
        t[i][cols - 1] = b;
    }
    // objective row: maximize r  ->  reduced costs
    t[m][2 * dim] = -1.0;
    let mut basis: Vec<usize> = (0..m).map(|i| nv + i).collect();
    for _ in 0..10_000 {
        // Bland's rule: first improving column
        let Some(col) = (0..cols - 1).find(|&j| t[m][j] < -1e-14) else {
            return Ok(t[m][cols - 1]);
        };
        let mut pivot: Option<(usize, f64)> = None;
        for i in 0..m {
            if t[i][col] > 1e-14 {
                let ratio = t[i][cols - 1] / t[i][col];
                let better = match pivot {
                    None => true,
                    Some((r, best)) => ratio < best - 1e-15 || (ratio <= best + 1e-15 && basis[i] < basis[r]),
                };
                if better {
                    pivot = Some((i, ratio));
                }
            }
        }
        let Some((row, _)) = pivot else {
            return Err(LabError::Degenerate("unbounded inscribed ball".into()));
        };
        let p = t[row][col];
        for v in t[row].iter_mut() {
            *v /= p;
        }
        let prow = t[row].clone();
        for (i, r) in t.iter_mut().enumerate() {
            if i != row && r[col] != 0.0 {
                let k = r[col];
                for (a, b) in r.iter_mut().zip(&prow) {
                    *a -= k * b;
                }
            }
        }
        basis[row] = col;
    }
    Err(LabError::Degenerate("inscribed-ball program did not terminate".into()))
}

/// Radius of the largest ball around `z` inside the closed masked cells (and the grid box).
pub fn mask_inradius_at(grid: &Grid, mask: &CellMask, z: &Point) -> f64 {
    let shell = shell_cells(grid, mask);
    radius_against(grid, &shell, z)
}

/// Largest certified inscribed radius over a subsample of interior nodes.
pub fn mask_inradius(grid: &Grid, mask: &CellMask) -> f64 {
    let shell = shell_cells(grid, mask);
    let full = 1usize << grid.dim();
    let interior: Vec<usize> = (0..grid.num_nodes())
        .filter(|&i| {
            let cells = grid.node_cells(i);
            cells.len() == full && cells.iter().all(|&c| mask.contains(c))
        })
        .collect();
    let stride = interior.len().div_ceil(400).max(1);
    interior
        .iter()
        .step_by(stride)
        .map(|&i| radius_against(grid, &shell, &grid.node_coord(i)))
        .fold(0.0, f64::max)
}

fn radius_against(grid: &Grid, shell: &[usize], z: &Point) -> f64 {
    let n = grid.dim();
    let h = grid.spacing();
    let mut r = (0..n)
        .map(|d| (z[d] - grid.lo()).min(grid.hi() - z[d]))
        .fold(f64::INFINITY, f64::min);
    for &c in shell {
        let m = grid.cell_multi(c);
        let mut d2 = 0.0;
        for d in 0..n {
            let lo = grid.lo() + m[d] as f64 * h;
            let gap = (lo - z[d]).max(z[d] - lo - h).max(0.0);
            d2 += gap * gap;
        }
        r = r.min(d2.sqrt());
    }
    r.max(0.0)
}

/// Unmasked cells sharing at least a vertex with a masked cell.
fn shell_cells(grid: &Grid, mask: &CellMask) -> Vec<usize> {
    let mut out = vec![false; grid.num_cells()];
    let n = grid.dim();
    let mc = grid.cells_per_axis() as i64;
    for c in mask.indices() {
        let m = grid.cell_multi(c);
        let span: i64 = 3i64.pow(n as u32);
        for code in 0..span {
            let mut k = [0usize; 3];
            let mut rest = code;
            let mut ok = true;
            for d in 0..n {
                let off = rest % 3 - 1;
                rest /= 3;
                let v = m[d] as i64 + off;
                if v < 0 || v >= mc {
                    ok = false;
                    break;
                }
                k[d] = v as usize;
            }
            if ok {
                let nb = grid.cell_index(k);
                if !mask.contains(nb) {
                    out[nb] = true;
                }
            }
        }
    }
    out.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn balls_are_equality_cases() {
        for dim in [2, 3] {
            let r = area_lemma_ratio(&ConvexBody::Ball { dim, radius: 0.7 }).unwrap();
            assert!((r - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_square() {
        let pts = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.5, 0.5, 0.0]];
        let p = Polytope::hull(2, &pts).unwrap();
        assert_eq!(p.vertices().len(), 4);
        assert!((p.area() - 4.0).abs() < 1e-14);
        assert!((p.volume() - 1.0).abs() < 1e-14);
        assert!((p.inradius() - 0.5).abs() < 1e-12);
        let r = area_lemma_ratio(&ConvexBody::Polytope(p)).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_cube() {
        let mut pts = Vec::new();
        for i in 0..8 {
            pts.push([(i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64]);
        }
        pts.push([0.3, 0.6, 0.2]);
        let p = Polytope::hull(3, &pts).unwrap();
        assert_eq!(p.vertices().len(), 8);
        assert!((p.volume() - 1.0).abs() < 1e-12);
        assert!((p.area() - 6.0).abs() < 1e-12);
        assert!((p.inradius() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ellipse_and_ellipsoid() {
        let e = ConvexBody::Ellipsoid {
            dim: 2,
            semi_axes: [1.0, 1.0, 0.0],
        };
        assert!((e.surface_area().unwrap() - 2.0 * PI).abs() < 1e-10);
        let e = ConvexBody::Ellipsoid {
            dim: 3,
            semi_axes: [2.0, 1.0, 0.5],
        };
        assert!(area_lemma_ratio(&e).unwrap() <= 1.0);
        let s = ConvexBody::Ellipsoid {
            dim: 3,
            semi_axes: [1.0, 1.0, 1.0],
        };
        assert!((s.surface_area().unwrap() - 4.0 * PI).abs() < 1e-9);
    }

    // brute-force Chebyshev center over all (n+1)-facet subsets
    fn brute_inradius(p: &Polytope) -> f64 {
        let f = p.facets();
        let mut best: f64 = 0.0;
        let m = f.len();
        for a in 0..m {
            for b in a + 1..m {
                for c in b + 1..m {
                    for d in c + 1..m {
                        let rows = [f[a], f[b], f[c], f[d]];
                        let mut mat = nalgebra::Matrix4::zeros();
                        let mut rhs = nalgebra::Vector4::zeros();
                        for (i, r) in rows.iter().enumerate() {
                            mat[(i, 0)] = r.normal[0];
                            mat[(i, 1)] = r.normal[1];
                            mat[(i, 2)] = r.normal[2];
                            mat[(i, 3)] = 1.0;
                            rhs[i] = r.offset;
                        }
                        if let Some(sol) = mat.lu().solve(&rhs) {
                            let x = [sol[0], sol[1], sol[2]];
                            let r = sol[3];
                            if r > best && f.iter().all(|g| dot(&g.normal, &x) + r <= g.offset + 1e-10) {
                                best = r;
                            }
                        }
                    }
                }
            }
        }
        best
    }

    #[test]
    fn simplex_inradius_matches_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let pts: Vec<Point> = (0..9).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
            let p = Polytope::hull(3, &pts).unwrap();
            assert!((p.inradius() - brute_inradius(&p)).abs() < 1e-9);
        }
    }

    #[test]
    fn hull_contains_all_points() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Point> = (0..60).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
        let p = Polytope::hull(3, &pts).unwrap();
        for q in &pts {
            for f in p.facets() {
                assert!(dot(&f.normal, q) <= f.offset + 1e-12);
            }
        }
        // Euler characteristic of a triangulated sphere
        let v = p.vertices().len() as i64;
        let f = p.facets().len() as i64;
        assert_eq!(v - 3 * f / 2 + f, 2);
    }

    #[test]
    fn degenerate_bodies() {
        let pts = [[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        assert!(Polytope::hull(2, &pts).is_err());
        let m = ConvexBody::Mask {
            dim: 2,
            volume: 0.0,
            area: 1.0,
            inradius: 0.1,
        };
        assert!(area_lemma_ratio(&m).is_err());
    }

    #[test]
    fn mask_radius_of_square_block() {
        let g = Grid::new(2, 0.0, 1.0, 17).unwrap();
        let mask = CellMask(
            (0..g.num_cells())
                .map(|c| {
                    let p = g.cell_center(c);
                    (0.25..0.75).contains(&p[0]) && (0.25..0.75).contains(&p[1])
                })
                .collect(),
        );
        assert!((mask_inradius(&g, &mask) - 0.25).abs() < 1e-12);
    }
}
