//! Analytic convex potentials, their cofactor fields and determinant certificates.

use std::collections::BTreeMap;

use crate::error::{LabError, Result};
use crate::grid::{Grid, Point};
use crate::linalg::{self, Mat};

/// Half-width of the admissible box `[-L, L]^n` shared by all registered potentials.
pub const ADMISSIBLE_HALF_WIDTH: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
enum Family {
    /// `1/2 x^T diag(a) x`
    Quadratic { diag: [f64; 3] },
    /// `1/2 |x|^2 + (delta / k^2) prod_i sin(k x_i)`
    Trig { delta: f64, k: f64 },
}

/// Values of `u`, `Du` and `D^2 u` at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub u: f64,
    pub du: [f64; 3],
    pub d2u: Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPotential {
    name: String,
    dim: usize,
    family: Family,
}

impl ConvexPotential {
    /// `u = 1/2 |x|^2`.
    pub fn isotropic(dim: usize) -> Result<Self> {
        let mut p = Self::quadratic(&vec![1.0; dim])?;
        p.name = "isotropic".into();
        Ok(p)
    }

    /// `u = 1/2 x^T diag(a) x` with positive entries.
    pub fn quadratic(diag: &[f64]) -> Result<Self> {
        let dim = diag.len();
        if dim != 2 && dim != 3 {
            return Err(LabError::Invalid(format!("quadratic of dimension {dim}")));
        }
        if diag.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
            return Err(LabError::Invalid(format!("quadratic coefficients {diag:?} not positive")));
        }
        let mut d = [0.0; 3];
        d[..dim].copy_from_slice(diag);
        let label: Vec<String> = diag.iter().map(|a| format!("{a}")).collect();
        Ok(Self {
            name: format!("quadratic({})", label.join(",")),
            dim,
            family: Family::Quadratic { diag: d },
        })
    }

    /// `u = 1/2 |x|^2 + (delta/k^2) prod sin(k x_i)`.
    ///
    /// `delta` is capped so the Hessian's smallest eigenvalue stays at least `1/2`:
    /// `delta <= 1/2` in the plane and `delta <= 1/6` in space.
    pub fn trig(dim: usize, delta: f64, k: f64) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(LabError::Invalid(format!("trig potential of dimension {dim}")));
        }
        let cap = if dim == 2 { 0.5 } else { 1.0 / 6.0 };
        if !(delta >= 0.0 && delta <= cap) || !(k > 0.0) {
            return Err(LabError::Invalid(format!(
                "trig potential needs 0 <= delta <= {cap:.4} and k > 0 (got delta={delta}, k={k})"
            )));
        }
        Ok(Self {
            name: format!("trig(delta={delta},k={k})"),
            dim,
            family: Family::Trig { delta, k },
        })
    }

    /// Resolve a registry identifier with a parameter map.
    ///
    /// Identifiers: `isotropic`, `quadratic` (keys `a`, `b`, `c`), `trig` (keys `delta`, `k`).
    pub fn from_id(id: &str, dim: usize, params: &BTreeMap<String, f64>) -> Result<Self> {
        let get = |key: &str, default: f64| params.get(key).copied().unwrap_or(default);
        match id {
            "isotropic" => Self::isotropic(dim),
            "quadratic" => {
                let mut d = vec![get("a", 1.0), get("b", 1.0)];
                if dim == 3 {
                    d.push(get("c", 1.0));
                }
                Self::quadratic(&d)
            }
            "trig" => Self::trig(dim, get("delta", 0.1), get("k", 4.0)),
            other => Err(LabError::Config(format!(
                "unknown potential `{other}` (known: isotropic, quadratic, trig)"
            ))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self.family, Family::Quadratic { .. })
    }

    /// Parameter vector (diagonal entries, or `[delta, k]`).
    pub fn params(&self) -> Vec<f64> {
        match &self.family {
            Family::Quadratic { diag } => diag[..self.dim].to_vec(),
            Family::Trig { delta, k } => vec![*delta, *k],
        }
    }

    pub fn in_domain(&self, x: &Point) -> bool {
        (0..self.dim).all(|d| x[d].is_finite() && x[d].abs() <= ADMISSIBLE_HALF_WIDTH)
    }

    pub fn evaluate(&self, x: &Point) -> Result<Evaluation> {
        if !self.in_domain(x) {
            return Err(LabError::Domain {
                potential: self.name.clone(),
                point: x[..self.dim].to_vec(),
            });
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &Point) -> Evaluation {
        let n = self.dim;
        match &self.family {
            Family::Quadratic { diag } => {
                let mut u = 0.0;
                let mut du = [0.0; 3];
                for i in 0..n {
                    u += 0.5 * diag[i] * x[i] * x[i];
                    du[i] = diag[i] * x[i];
                }
                Evaluation {
                    u,
                    du,
                    d2u: linalg::diag(&diag[..n]),
                }
            }
            Family::Trig { delta, k } => {
                let mut s = [1.0; 3];
                let mut c = [0.0; 3];
                for i in 0..n {
                    s[i] = (k * x[i]).sin();
                    c[i] = (k * x[i]).cos();
                }
                let prod_except = |skip: &[usize]| -> f64 {
                    (0..n).filter(|i| !skip.contains(i)).map(|i| s[i]).product()
                };
                let p: f64 = (0..n).map(|i| s[i]).product();
                let mut u = delta / (k * k) * p;
                let mut du = [0.0; 3];
                let mut d2u = [[0.0; 3]; 3];
                for i in 0..n {
                    u += 0.5 * x[i] * x[i];
                    du[i] = x[i] + delta / k * c[i] * prod_except(&[i]);
                    d2u[i][i] = 1.0 - delta * p;
                    for j in 0..n {
                        if j != i {
                            d2u[i][j] = delta * c[i] * c[j] * prod_except(&[i, j]);
                        }
                    }
                }
                Evaluation { u, du, d2u }
            }
        }
    }

    /// Height of `y` above the tangent plane at `x`: `u(y) - u(x) - Du(x)·(y - x)`.
    pub fn gap(&self, at_x: &Evaluation, x: &Point, y: &Point) -> f64 {
        let uy = self.eval_unchecked(y).u;
        let mut g = uy - at_x.u;
        for d in 0..self.dim {
            g -= at_x.du[d] * (y[d] - x[d]);
        }
        g
    }

    /// Cofactor matrix `det(D^2 u) (D^2 u)^{-1}` at `x`.
    pub fn cofactor_at(&self, x: &Point) -> Mat {
        linalg::adjugate(self.dim, &self.eval_unchecked(x).d2u)
    }
}

/// Grid-sampled bounds on `det D^2 u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialCertificate {
    pub lambda_hat: f64,
    pub big_lambda_hat: f64,
    pub spacing: f64,
    /// Minimum Hessian eigenvalue over the sampled nodes.
    pub convexity_margin: f64,
    /// Maximum Hessian eigenvalue over the sampled nodes.
    pub max_eigenvalue: f64,
}

/// Sample `det D^2 u` over every grid node; rejects the first non-convex node.
pub fn certify_bounds(potential: &ConvexPotential, grid: &Grid) -> Result<PotentialCertificate> {
    check_dims(potential, grid)?;
    let n = potential.dim();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut margin = f64::INFINITY;
    let mut top = f64::NEG_INFINITY;
    for node in 0..grid.num_nodes() {
        let x = grid.node_coord(node);
        let e = potential.evaluate(&x)?;
        let eig = linalg::sym_eigenvalues(n, &e.d2u);
        if eig[0] <= 0.0 {
            return Err(LabError::Convexity { node, min_eig: eig[0] });
        }
        let d = linalg::det(n, &e.d2u);
        lo = lo.min(d);
        hi = hi.max(d);
        margin = margin.min(eig[0]);
        top = top.max(eig[n - 1]);
    }
    Ok(PotentialCertificate {
        lambda_hat: lo,
        big_lambda_hat: hi,
        spacing: grid.spacing(),
        convexity_margin: margin,
        max_eigenvalue: top,
    })
}

fn check_dims(potential: &ConvexPotential, grid: &Grid) -> Result<()> {
    if potential.dim() != grid.dim() {
        return Err(LabError::Invalid(format!(
            "potential dimension {} does not match grid dimension {}",
            potential.dim(),
            grid.dim()
        )));
    }
    Ok(())
}

/// Symmetric coefficient matrices `U`, one per grid cell.
#[derive(Debug, Clone)]
pub struct CofactorField {
    grid: Grid,
    values: Vec<Mat>,
}

impl CofactorField {
    pub fn constant(grid: &Grid, m: Mat) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![m; grid.num_cells()],
        }
    }

    /// Field given by `f` at cell centers.
    pub fn from_fn(grid: &Grid, f: impl Fn(&Point) -> Mat) -> Self {
        Self {
            grid: grid.clone(),
            values: (0..grid.num_cells()).map(|c| f(&grid.cell_center(c))).collect(),
        }
    }

    pub fn identity(grid: &Grid) -> Self {
        Self::constant(grid, linalg::identity(grid.dim()))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn at(&self, cell: usize) -> &Mat {
        &self.values[cell]
    }

    pub fn values(&self) -> &[Mat] {
        &self.values
    }

    /// Scale every matrix by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let n = self.grid.dim();
        let values = self
            .values
            .iter()
            .map(|m| {
                let mut s = *m;
                for row in s.iter_mut().take(n) {
                    for v in row.iter_mut().take(n) {
                        *v *= c;
                    }
                }
                s
            })
            .collect();
        Self {
            grid: self.grid.clone(),
            values,
        }
    }

    /// Max over interior cells and rows of the centered-difference `|sum_j D_j U^{ij}|`.
    pub fn divergence_residual(&self) -> f64 {
        let g = &self.grid;
        let n = g.dim();
        let mc = g.cells_per_axis();
        let h = g.spacing();
        let mut worst: f64 = 0.0;
        for cell in 0..g.num_cells() {
            let m = g.cell_multi(cell);
            if (0..n).any(|d| m[d] == 0 || m[d] + 1 == mc) {
                continue;
            }
            for i in 0..n {
                let mut r = 0.0;
                for j in 0..n {
                    let mut up = m;
                    let mut dn = m;
                    up[j] += 1;
                    dn[j] -= 1;
                    let a = self.values[g.cell_index(up)][i][j];
                    let b = self.values[g.cell_index(dn)][i][j];
                    r += (a - b) / (2.0 * h);
                }
                worst = worst.max(r.abs());
            }
        }
        worst
    }
}

/// Cofactor field evaluated analytically at cell centers.
pub fn cofactor_field(potential: &ConvexPotential, grid: &Grid) -> Result<CofactorField> {
    check_dims(potential, grid)?;
    let n = grid.dim();
    let mut values = Vec::with_capacity(grid.num_cells());
    for cell in 0..grid.num_cells() {
        let x = grid.cell_center(cell);
        let e = potential.evaluate(&x)?;
        let min_eig = linalg::min_eigenvalue(n, &e.d2u);
        if min_eig <= 0.0 {
            return Err(LabError::Convexity { node: cell, min_eig });
        }
        values.push(linalg::adjugate(n, &e.d2u));
    }
    Ok(CofactorField {
        grid: grid.clone(),
        values,
    })
}

/// Max over grid nodes of `|U D^2u - det(D^2u) I|_inf`.
pub fn cofactor_identity_error(potential: &ConvexPotential, grid: &Grid) -> f64 {
    let n = potential.dim();
    let id = linalg::identity(n);
    let mut worst: f64 = 0.0;
    for node in 0..grid.num_nodes() {
        let e = potential.eval_unchecked(&grid.node_coord(node));
        let u = linalg::adjugate(n, &e.d2u);
        let p = linalg::mul(n, &u, &e.d2u);
        let d = linalg::det(n, &e.d2u);
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((p[i][j] - d * id[i][j]).abs());
            }
        }
    }
    worst
}

/// The fixed registry used by the verification suites.
pub fn registry(dim: usize) -> Vec<ConvexPotential> {
    let mut out = vec![ConvexPotential::isotropic(dim).expect("registry")];
    if dim == 2 {
        out.push(ConvexPotential::quadratic(&[2.0, 0.5]).expect("registry"));
        out.push(ConvexPotential::trig(2, 0.1, 4.0).expect("registry"));
    } else {
        out.push(ConvexPotential::quadratic(&[1.5, 1.0, 1.0 / 1.5]).expect("registry"));
        out.push(ConvexPotential::trig(3, 0.1, 2.0).expect("registry"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Central differences of `u` with step `e`, fourth order.
    fn fd_hessian(p: &ConvexPotential, x: &Point, e: f64) -> Mat {
        let n = p.dim();
        let u = |y: &Point| p.evaluate(y).unwrap().u;
        let mut h = [[0.0; 3]; 3];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for (si, sj, w) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                    let mut y = *x;
                    y[i] += si * e;
                    y[j] += sj * e;
                    acc += w * u(&y);
                }
                h[i][j] = acc / (4.0 * e * e);
            }
        }
        h
    }

    #[test]
    fn quadratic_evaluations() {
        let p = ConvexPotential::isotropic(2).unwrap();
        let e = p.evaluate(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(e.u, 0.5);
        assert_eq!(&e.du[..2], &[1.0, 0.0]);
        assert_eq!(e.d2u, linalg::identity(2));

        let q = ConvexPotential::quadratic(&[2.0, 3.0]).unwrap();
        let e = q.evaluate(&[1.0, 1.0, 0.0]).unwrap();
        assert_eq!(e.u, 2.5);
        assert_eq!(&e.du[..2], &[2.0, 3.0]);
        assert_eq!(e.d2u, linalg::diag(&[2.0, 3.0]));
    }

    #[test]
    fn trig_hessian_at_origin() {
        let p = ConvexPotential::trig(2, 0.1, 4.0).unwrap();
        let e = p.evaluate(&[0.0; 3]).unwrap();
        assert_eq!(&e.du[..2], &[0.0, 0.0]);
        // hand-differentiated: u_11 = 1 - delta sin sin = 1, u_12 = delta cos cos = delta
        let want = [[1.0, 0.1, 0.0], [0.1, 1.0, 0.0], [0.0; 3]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((e.d2u[i][j] - want[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn trig_hessian_matches_finite_differences() {
        for p in [ConvexPotential::trig(2, 0.3, 4.0).unwrap(), ConvexPotential::trig(3, 0.15, 2.0).unwrap()] {
            for x in [[0.3, -0.2, 0.1], [-0.7, 0.45, 0.6], [1.1, 0.05, -0.9]] {
                let e = p.evaluate(&x).unwrap();
                let fd = fd_hessian(&p, &x, 1e-4);
                for i in 0..p.dim() {
                    for j in 0..p.dim() {
                        assert!((e.d2u[i][j] - fd[i][j]).abs() < 1e-6, "{i}{j}");
                    }
                }
            }
        }
    }

    #[test]
    fn domain_error() {
        let p = ConvexPotential::isotropic(2).unwrap();
        assert!(matches!(p.evaluate(&[3.0, 0.0, 0.0]), Err(LabError::Domain { .. })));
    }

    #[test]
    fn trig_delta_cap() {
        assert!(ConvexPotential::trig(2, 0.6, 4.0).is_err());
        assert!(ConvexPotential::trig(3, 0.2, 4.0).is_err());
    }

    #[test]
    fn two_by_two_cofactor_swaps() {
        let g = Grid::new(2, -1.0, 1.0, 9).unwrap();
        let p = ConvexPotential::quadratic(&[2.0, 5.0]).unwrap();
        let u = cofactor_field(&p, &g).unwrap();
        assert_eq!(*u.at(7), linalg::diag(&[5.0, 2.0]));
        assert_eq!(u.divergence_residual(), 0.0);
        let g3 = Grid::new(3, -1.0, 1.0, 9).unwrap();
        let u3 = cofactor_field(&ConvexPotential::isotropic(3).unwrap(), &g3).unwrap();
        assert_eq!(*u3.at(11), linalg::identity(3));
    }

    #[test]
    fn certificates() {
        let g = Grid::new(2, -1.0, 1.0, 17).unwrap();
        let c = certify_bounds(&ConvexPotential::quadratic(&[2.0, 3.0]).unwrap(), &g).unwrap();
        assert_eq!((c.lambda_hat, c.big_lambda_hat), (6.0, 6.0));
        let g3 = Grid::new(3, -1.0, 1.0, 9).unwrap();
        let c = certify_bounds(&ConvexPotential::isotropic(3).unwrap(), &g3).unwrap();
        assert_eq!((c.lambda_hat, c.big_lambda_hat), (1.0, 1.0));
    }

    #[test]
    fn trig_certificate_straddles_one() {
        let g = Grid::new(2, -1.0, 1.0, 65).unwrap();
        let p = ConvexPotential::trig(2, 0.1, 4.0).unwrap();
        let c = certify_bounds(&p, &g).unwrap();
        // det = (1 - d s1 s2)^2 - d^2 c1^2 c2^2; brute-force min/max over the same nodes
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for node in 0..g.num_nodes() {
            let x = g.node_coord(node);
            let (s1, s2) = ((4.0 * x[0]).sin(), (4.0 * x[1]).sin());
            let (c1, c2) = ((4.0 * x[0]).cos(), (4.0 * x[1]).cos());
            let d = (1.0 - 0.1 * s1 * s2).powi(2) - 0.01 * (c1 * c2).powi(2);
            lo = lo.min(d);
            hi = hi.max(d);
        }
        assert!((c.lambda_hat - lo).abs() < 1e-12 && (c.big_lambda_hat - hi).abs() < 1e-12);
        assert!(c.lambda_hat < 1.0 && c.big_lambda_hat > 1.0);
        assert!(c.convexity_margin >= 0.5);
    }

    #[test]
    fn registered_residuals_vanish() {
        // the product perturbations have separable cofactor entries, so the
        // centered stencil cancels exactly and only roundoff remains
        for dim in [2, 3] {
            for p in registry(dim) {
                let g = Grid::new(dim, -1.0, 1.0, 17).unwrap();
                let r = cofactor_field(&p, &g).unwrap().divergence_residual();
                assert!(r < 1e-11, "{} {r}", p.name());
            }
        }
    }

    #[test]
    fn divergence_residual_second_order() {
        // cofactor of |x|^2/2 + e x^4 y^2; stencil error is 8 e x h^2 in the first row
        let e = 0.05;
        let cof = |p: &Point| {
            let (x, y) = (p[0], p[1]);
            let mut m = [[0.0; 3]; 3];
            m[0][0] = 1.0 + 2.0 * e * x.powi(4);
            m[1][1] = 1.0 + 12.0 * e * x * x * y * y;
            m[0][1] = -8.0 * e * x.powi(3) * y;
            m[1][0] = m[0][1];
            m
        };
        let g = Grid::new(2, -1.0, 1.0, 33).unwrap();
        let r1 = CofactorField::from_fn(&g, cof).divergence_residual();
        let r2 = CofactorField::from_fn(&g.refined(), cof).divergence_residual();
        let ratio = r1 / r2;
        assert!((ratio - 4.0).abs() < 0.3, "ratio {ratio}");
        let h = g.spacing();
        assert!(r1 <= 8.0 * e * h * h + 1e-12);
    }
}
