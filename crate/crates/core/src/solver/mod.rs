//! Bilinear/trilinear finite elements for `-D_j(U^{ij} D_i v) = μ` on cell regions.

pub mod sparse;

use crate::element::Q1Element;
use crate::error::{LabError, Result};
use crate::field::GridFunction;
use crate::geometry::Section;
use crate::grid::{CellMask, Grid};
use crate::measures::GridMeasure;
use crate::norms::energy;
use crate::potentials::CofactorField;

pub use sparse::{pcg, CgOutcome, CsrMatrix};

/// Default relative residual for conjugate gradients.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Boundary-value problem on a union of grid cells.
///
/// Nodes whose incident cells all lie in the region are unknowns; the other
/// corners of region cells carry the boundary data.
#[derive(Debug, Clone)]
pub struct DirichletProblem {
    region: CellMask,
    coeff: CofactorField,
    load: GridMeasure,
    boundary: GridFunction,
}

impl DirichletProblem {
    pub fn new(region: CellMask, coeff: CofactorField, load: GridMeasure, boundary: GridFunction) -> Result<Self> {
        let grid = coeff.grid();
        if region.len() != grid.num_cells() || load.grid().num_cells() != grid.num_cells() {
            return Err(LabError::Invalid("problem data live on different grids".into()));
        }
        if boundary.grid().num_nodes() != grid.num_nodes() {
            return Err(LabError::Invalid("boundary data live on a different grid".into()));
        }
        if region.count() == 0 {
            return Err(LabError::Invalid("empty region".into()));
        }
        let components = region.components(grid);
        if components != 1 {
            return Err(LabError::Disconnected { components });
        }
        Ok(Self {
            region,
            coeff,
            load,
            boundary: boundary.to_nodal(),
        })
    }

    pub fn grid(&self) -> &Grid {
        self.coeff.grid()
    }
    pub fn region(&self) -> &CellMask {
        &self.region
    }
    pub fn coeff(&self) -> &CofactorField {
        &self.coeff
    }
    pub fn load(&self) -> &GridMeasure {
        &self.load
    }
    pub fn boundary(&self) -> &GridFunction {
        &self.boundary
    }
}

/// Assembled system over the free nodes.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Node id of each unknown.
    pub free: Vec<usize>,
    /// Corners of region cells that are not unknowns.
    pub fixed: Vec<usize>,
}

pub fn free_nodes(grid: &Grid, region: &CellMask) -> Vec<usize> {
    let full = 1usize << grid.dim();
    (0..grid.num_nodes())
        .filter(|&i| {
            let cells = grid.node_cells(i);
            cells.len() == full && cells.iter().all(|&c| region.contains(c))
        })
        .collect()
}

pub fn assemble(problem: &DirichletProblem) -> Result<LinearSystem> {
    let grid = problem.grid();
    let free = free_nodes(grid, &problem.region);
    if free.is_empty() {
        return Err(LabError::Resolution { height: 0.0 });
    }
    let mut index = vec![usize::MAX; grid.num_nodes()];
    for (k, &i) in free.iter().enumerate() {
        index[i] = k;
    }
    let mut in_region = vec![false; grid.num_nodes()];
    let elem = Q1Element::new(grid.dim());
    let h = grid.spacing();
    let g = problem.boundary.values();
    let load = problem.load.nodal_load();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(3usize.pow(grid.dim() as u32)); free.len()];
    let mut rhs: Vec<f64> = free.iter().map(|&i| load[i]).collect();
    for cell in problem.region.indices() {
        let (corners, k) = grid.cell_corners(cell);
        let ke = elem.stiffness(problem.coeff.at(cell), h);
        for a in 0..k {
            in_region[corners[a]] = true;
            let ra = index[corners[a]];
            if ra == usize::MAX {
                continue;
            }
            for b in 0..k {
                let rb = index[corners[b]];
                if rb == usize::MAX {
                    rhs[ra] -= ke[a][b] * g[corners[b]];
                } else {
                    rows[ra].push((rb, ke[a][b]));
                }
            }
        }
    }
    let fixed = (0..grid.num_nodes())
        .filter(|&i| in_region[i] && index[i] == usize::MAX)
        .collect();
    Ok(LinearSystem {
        matrix: CsrMatrix::from_rows(rows),
        rhs,
        free,
        fixed,
    })
}

/// Outcome of a solve.
#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Nodal solution; boundary data off the unknowns.
    pub solution: GridFunction,
    pub iterations: usize,
    pub residual: f64,
    /// `∫_region U Dv·Dv`.
    pub energy: f64,
    pub converged: bool,
    pub unknowns: usize,
}

/// Iteration cap `50 · sqrt(unknowns)`.
pub fn iteration_cap(unknowns: usize) -> usize {
    (50.0 * (unknowns as f64).sqrt()).ceil() as usize
}

pub fn solve_dirichlet(problem: &DirichletProblem, tol: f64) -> Result<SolveResult> {
    let sys = assemble(problem)?;
    let out = pcg(&sys.matrix, &sys.rhs, None, tol, iteration_cap(sys.free.len()))?;
    let mut values = problem.boundary.values().to_vec();
    for (k, &i) in sys.free.iter().enumerate() {
        values[i] = out.x[k];
    }
    let solution = GridFunction::nodal(problem.grid(), values)?.with_region(problem.region.clone());
    let e = energy(&solution, &problem.coeff, &problem.region);
    Ok(SolveResult {
        solution,
        iterations: out.iterations,
        residual: out.residual,
        energy: e,
        converged: true,
        unknowns: sys.free.len(),
    })
}

/// Homogeneous solve with the Dirichlet energy of the data for comparison.
#[derive(Debug, Clone)]
pub struct HomogeneousSolve {
    pub result: SolveResult,
    /// `∫ U Dg·Dg` of the boundary data `g` over the section.
    pub data_energy: f64,
}

/// Solve `-D_j(U^{ij} D_i w) = 0` in a section with `w = boundary` on its boundary nodes.
pub fn solve_homogeneous(section: &Section, coeff: &CofactorField, boundary: &GridFunction) -> Result<HomogeneousSolve> {
    if section.is_clipped() {
        return Err(LabError::Clipped { height: section.height() });
    }
    let problem = DirichletProblem::new(
        section.mask().clone(),
        coeff.clone(),
        GridMeasure::zero(coeff.grid()),
        boundary.clone(),
    )?;
    let result = solve_dirichlet(&problem, DEFAULT_TOL)?;
    let data_energy = energy(&problem.boundary, coeff, section.mask());
    Ok(HomogeneousSolve { result, data_energy })
}

/// Replace `v` inside the annulus by the solution of `-D_j(U^{ij} D_i w) = -μ₋`
/// with `w = v` off the annulus unknowns.
pub fn poisson_modify(
    v: &GridFunction,
    annulus: &CellMask,
    mu_minus: &GridMeasure,
    coeff: &CofactorField,
) -> Result<GridFunction> {
    if !mu_minus.is_nonnegative() {
        return Err(LabError::Invalid("μ₋ must be a nonnegative measure".into()));
    }
    let problem = DirichletProblem::new(annulus.clone(), coeff.clone(), mu_minus.scaled(-1.0), v.to_nodal())?;
    let solved = solve_dirichlet(&problem, DEFAULT_TOL)?;
    Ok(solved.solution.with_region(v.region().clone()))
}

/// `∫ (v - w) dμ` against the assembled load, over the unknowns of `problem`.
pub fn load_pairing(problem: &DirichletProblem, f: &GridFunction) -> Result<f64> {
    let load = problem.load.nodal_load();
    let free = free_nodes(problem.grid(), &problem.region);
    let fv = f.to_nodal();
    Ok(free.iter().map(|&i| fv.values()[i] * load[i]).sum())
}
