use lma_core::field::{FaceField, GridFunction};
use lma_core::geometry::{GapField, ball_mask};
use lma_core::grid::{dist, Grid, Point};
use lma_core::measures::GridMeasure;
use lma_core::norms::{energy_seminorm, lorentz_norm, lp_norm, quasi_triangle_constant, check_lorentz_properties, LorentzParams};
use lma_core::potential_theory::{km_iteration, potential_estimate_report, riesz_potential};
use lma_core::potentials::{certify_bounds, cofactor_field, cofactor_identity_error, ConvexPotential};
use lma_core::regularity::{campanato_profile, oscillation_profile};
use lma_core::solver::{assemble, solve_dirichlet, solve_homogeneous, DirichletProblem, DEFAULT_TOL};
use proptest::prelude::*;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 24,
        ..ProptestConfig::default()
    }
}

fn potential(kind: u8, a: f64, b: f64, dim: usize) -> ConvexPotential {
    match kind % 3 {
        0 => ConvexPotential::isotropic(dim),
        1 => ConvexPotential::quadratic(&[a, b, 1.0 / (a * b)][..dim]),
        _ => ConvexPotential::trig(dim, 0.16 * (a - 0.7) / 0.8, 1.0 + 4.0 * (b - 0.7) / 0.8),
    }
    .unwrap()
}

fn cells(grid: &Grid, vals: &[f64]) -> GridFunction {
    let n = grid.num_cells();
    GridFunction::cellwise(grid, (0..n).map(|i| vals[i % vals.len()]).collect()).unwrap()
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn cofactor_identity_holds(kind in 0u8..3, a in 0.7f64..1.5, b in 0.7f64..1.5, dim in 2usize..4) {
        let u = potential(kind, a, b, dim);
        let grid = Grid::new(dim, -1.0, 1.0, if dim == 2 { 17 } else { 9 }).unwrap();
        prop_assert!(cofactor_identity_error(&u, &grid) <= 1e-10);
    }

    #[test]
    fn certificate_widens_under_refinement(kind in 0u8..3, a in 0.7f64..1.5, b in 0.7f64..1.5) {
        let u = potential(kind, a, b, 2);
        let coarse = Grid::new(2, -1.0, 1.0, 9).unwrap();
        let c1 = certify_bounds(&u, &coarse).unwrap();
        let c2 = certify_bounds(&u, &coarse.refined()).unwrap();
        prop_assert!(c2.lambda_hat <= c1.lambda_hat + 1e-12);
        prop_assert!(c2.big_lambda_hat >= c1.big_lambda_hat - 1e-12);
    }

    #[test]
    fn isotropic_sections_are_balls(h in 0.02f64..0.3, cx in -0.2f64..0.2, cy in -0.2f64..0.2) {
        let grid = Grid::new(2, -1.0, 1.0, 65).unwrap();
        let u = ConvexPotential::isotropic(2).unwrap();
        let x: Point = grid.node_coord(grid.nearest_node(&[cx, cy, 0.0]));
        let mask = GapField::new(&u, &grid, &x).unwrap().mask(h);
        let r = (2.0 * h).sqrt();
        let ball = ball_mask(&grid, &x, r);
        let sym = mask.minus(&ball).count() + ball.minus(&mask).count();
        let boundary = (0..grid.num_cells())
            .filter(|&c| {
                let (corners, k) = grid.cell_corners(c);
                let d: Vec<f64> = corners[..k].iter().map(|&i| dist(2, &grid.node_coord(i), &x)).collect();
                d.iter().any(|&t| t < r) && d.iter().any(|&t| t >= r)
            })
            .count();
        prop_assert!(sym <= boundary);
    }

    #[test]
    fn jordan_parts_are_singular(vals in prop::collection::vec(-3.0f64..3.0, 16), w in -2.0f64..2.0) {
        let grid = Grid::new(2, -1.0, 1.0, 9).unwrap();
        let a = GridMeasure::from_density(&cells(&grid, &vals)).unwrap();
        let node = grid.nearest_node(&[0.0; 3]);
        let m = a.add(&GridMeasure::atom(&grid, node, w)).unwrap().scaled(-0.5);
        for (p, q) in m.pos().iter().zip(m.neg()) {
            prop_assert!(*p >= 0.0 && *q >= 0.0 && p * q == 0.0);
        }
        prop_assert!(m.positive_part().is_nonnegative() && m.negative_part().is_nonnegative());
    }

    #[test]
    fn divergence_measures_obey_gauss_green(i0 in 0usize..6, j0 in 0usize..6, wi in 1usize..6, wj in 1usize..6, s in 0.5f64..2.0) {
        let grid = Grid::new(2, -1.0, 1.0, 13).unwrap();
        let field = FaceField::from_fn(&grid, |x| [s * x[0] * x[0] + x[1], (s * x[1]).sin() + 2.0 * x[0] * x[1], 0.0]);
        let mu = GridMeasure::from_divergence(&field, false).unwrap();
        let (lo, hi) = ([i0, j0, 0], [i0 + wi - 1, j0 + wj - 1, 0]);
        let mut mass = 0.0;
        for c in 0..grid.num_cells() {
            let m = grid.cell_multi(c);
            if (lo[0]..=hi[0]).contains(&m[0]) && (lo[1]..=hi[1]).contains(&m[1]) {
                mass += mu.pos()[c] - mu.neg()[c];
            }
        }
        let flux = field.box_flux(lo, hi);
        prop_assert!((mass - flux).abs() <= 1e-12 * (1.0 + flux.abs()));
    }

    #[test]
    fn section_mass_is_monotone(vals in prop::collection::vec(0.0f64..3.0, 12), h1 in 0.01f64..0.2, dh in 0.0f64..0.2) {
        let grid = Grid::new(2, -1.0, 1.0, 17).unwrap();
        let mu = GridMeasure::from_density(&cells(&grid, &vals)).unwrap();
        let u = ConvexPotential::quadratic(&[1.3, 0.8]).unwrap();
        let gap = GapField::new(&u, &grid, &[0.125, 0.0, 0.0]).unwrap();
        let a = mu.mass_on(&gap.mask(h1));
        let b = mu.mass_on(&gap.mask(h1 + dh));
        prop_assert!(a.0 <= b.0 && a.1 <= b.1);
    }

    #[test]
    fn lorentz_norm_properties(vals in prop::collection::vec(-5.0f64..5.0, 1..40), c in -4.0f64..4.0, p in 1.0f64..8.0, q in 0.5f64..8.0) {
        let grid = Grid::new(2, 0.0, 1.0, 9).unwrap();
        let f = cells(&grid, &vals);
        let params = LorentzParams::new(p, q).unwrap();
        let n = lorentz_norm(&f, &params);
        let scaled = lorentz_norm(&f.map(|x| c * x), &params);
        prop_assert!((scaled - c.abs() * n).abs() <= 1e-12 * (1.0 + scaled));
        let strong = lp_norm(&f, p);
        prop_assert!((lorentz_norm(&f, &LorentzParams::strong(p).unwrap()) - strong).abs() <= 1e-10 * (1.0 + strong));
        prop_assert!(lorentz_norm(&f, &LorentzParams::weak(p).unwrap()) <= strong * (1.0 + 1e-12));
        let g = f.map(|x| (x * 1.7).cos());
        let r = check_lorentz_properties(&f.map(f64::abs), &g.map(f64::abs), &params, None).unwrap();
        prop_assert!(r.quasi_triangle_ratio <= quasi_triangle_constant(&params) * (1.0 + 1e-12));
    }

    #[test]
    fn energy_seminorm_detects_nonconstants(a in -2.0f64..2.0, b in 0.1f64..2.0) {
        let grid = Grid::new(2, -1.0, 1.0, 9).unwrap();
        let coeff = cofactor_field(&ConvexPotential::trig(2, 0.2, 3.0).unwrap(), &grid).unwrap();
        let v = GridFunction::from_nodes_fn(&grid, |x| a + b * x[0] * x[1] + b * x[1]);
        prop_assert!(energy_seminorm(&v, &coeff, &grid.domain_mask()) > 0.0);
        let c = GridFunction::from_nodes_fn(&grid, |_| a);
        prop_assert!(energy_seminorm(&c, &coeff, &grid.domain_mask()) < 1e-6);
    }

    #[test]
    fn stiffness_is_spd(kind in 0u8..3, a in 0.7f64..1.5, b in 0.7f64..1.5, x in prop::collection::vec(-1.0f64..1.0, 49)) {
        let grid = Grid::new(2, -1.0, 1.0, 9).unwrap();
        let u = potential(kind, a, b, 2);
        let problem = DirichletProblem::new(
            grid.domain_mask(),
            cofactor_field(&u, &grid).unwrap(),
            GridMeasure::zero(&grid),
            GridFunction::from_nodes_fn(&grid, |_| 0.0),
        ).unwrap();
        let sys = assemble(&problem).unwrap();
        prop_assert!(sys.matrix.asymmetry() <= 1e-12);
        if x.iter().any(|t| *t != 0.0) {
            prop_assert!(sys.matrix.quadratic_form(&x[..sys.matrix.dim()]) > 0.0);
        }
    }

    #[test]
    fn maximum_principle_isotropic(seed in 0u64..1000, h in 0.1f64..0.4) {
        let grid = Grid::new(2, -1.0, 1.0, 33).unwrap();
        let u = ConvexPotential::isotropic(2).unwrap();
        let section = GapField::new(&u, &grid, &[0.0; 3]).unwrap().section(h).unwrap();
        let s = seed as f64;
        let g = GridFunction::from_nodes_fn(&grid, |x| (3.0 * x[0] + s).sin() + (2.0 * x[1] - s).cos());
        let w = solve_homogeneous(&section, &cofactor_field(&u, &grid).unwrap(), &g).unwrap().result.solution;
        let nodes = section.node_mask();
        let interior = section.interior_nodes();
        let boundary: Vec<f64> = (0..grid.num_nodes()).filter(|&i| nodes[i] && !interior.contains(&i)).map(|i| w.values()[i]).collect();
        let hi = boundary.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = boundary.iter().copied().fold(f64::INFINITY, f64::min);
        for &i in &interior {
            prop_assert!(w.values()[i] <= hi + 1e-8 && w.values()[i] >= lo - 1e-8);
        }
    }

    #[test]
    fn riesz_is_additive_and_monotone(v1 in prop::collection::vec(0.0f64..2.0, 10), v2 in prop::collection::vec(0.0f64..2.0, 7), h0 in 0.05f64..0.2) {
        let grid = Grid::new(2, -1.0, 1.0, 33).unwrap();
        let u = ConvexPotential::trig(2, 0.1, 4.0).unwrap();
        let x0 = [0.0; 3];
        let m1 = GridMeasure::from_density(&cells(&grid, &v1)).unwrap();
        let node = grid.nearest_node(&[0.1, 0.0, 0.0]);
        let m2 = GridMeasure::from_density(&cells(&grid, &v2)).unwrap().add(&GridMeasure::atom(&grid, node, 0.3)).unwrap();
        let i1 = riesz_potential(&m1, &u, &x0, h0).unwrap().value;
        let i2 = riesz_potential(&m2, &u, &x0, h0).unwrap().value;
        let i12 = riesz_potential(&m1.add(&m2).unwrap(), &u, &x0, h0).unwrap().value;
        prop_assert!((i12 - i1 - i2).abs() <= 1e-12 * (1.0 + i12));
        prop_assert!(i1 <= i12 && i2 <= i12);
    }

    #[test]
    fn decay_fits_ignore_constants(c in -5.0f64..5.0, s in 0.5f64..2.0) {
        let grid = Grid::new(2, -1.0, 1.0, 65).unwrap();
        let u = ConvexPotential::isotropic(2).unwrap();
        let v = GridFunction::from_nodes_fn(&grid, |x| (s * x[0]).sin() + x[1] * x[1].abs().sqrt());
        let w = v.map(|t| t + c);
        let heights = [0.2, 0.1, 0.05, 0.025, 0.0125];
        let x0 = [0.0; 3];
        let (a, b) = (oscillation_profile(&v, &u, &x0, &heights).unwrap(), oscillation_profile(&w, &u, &x0, &heights).unwrap());
        prop_assert!((a.slope - b.slope).abs() <= 1e-8);
        let (ca, cb) = (campanato_profile(&v, &u, &x0, &heights).unwrap(), campanato_profile(&w, &u, &x0, &heights).unwrap());
        prop_assert!((ca.slope - cb.slope).abs() <= 1e-8);
        for pair in a.ladder.windows(2) {
            prop_assert!(pair[1].1 <= pair[0].1);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn km_levels_are_monotone(seed in 0u64..500, h0 in 0.08f64..0.15) {
        let grid = Grid::new(3, -1.0, 1.0, 17).unwrap();
        let u = ConvexPotential::isotropic(3).unwrap();
        let s = seed as f64;
        let v = GridFunction::from_nodes_fn(&grid, |x| 1.0 + (2.0 * x[0] + s).sin() * (x[1] - s).cos() - x[2]);
        let v2 = GridFunction::from_nodes_fn(&grid, |x| 0.8 + (x[2] + s).cos());
        let vmax = v.zip_with(&v2, f64::max).unwrap();
        let t = km_iteration(&v, &u, &[0.0; 3], h0, 0.1, None).unwrap();
        let t2 = km_iteration(&vmax, &u, &[0.0; 3], h0, 0.1, None).unwrap();
        for pair in t.levels.windows(2) {
            prop_assert!(pair[1] >= pair[0]);
        }
        for (a, b) in t.levels.iter().zip(&t2.levels) {
            prop_assert!(*b >= *a - 1e-12);
        }
    }

    #[test]
    fn potential_estimate_is_homogeneous(scale in 0.1f64..10.0) {
        let grid = Grid::new(3, -1.0, 1.0, 17).unwrap();
        let u = ConvexPotential::isotropic(3).unwrap();
        let mu = GridMeasure::from_density(&GridFunction::from_cells_fn(&grid, |x| 1.0 + 0.5 * x[0])).unwrap();
        let problem = DirichletProblem::new(grid.domain_mask(), cofactor_field(&u, &grid).unwrap(), mu.clone(), GridFunction::from_nodes_fn(&grid, |_| 0.0)).unwrap();
        let v = solve_dirichlet(&problem, DEFAULT_TOL).unwrap().solution;
        let a = potential_estimate_report(&v, &mu, &u, &[0.0; 3], 0.15, 2.0).unwrap();
        let b = potential_estimate_report(&v.map(|t| scale * t), &mu.scaled(scale), &u, &[0.0; 3], 0.15, 2.0).unwrap();
        prop_assert!((a.plus.min_constant - b.plus.min_constant).abs() <= 1e-10 * a.plus.min_constant);
    }
}
