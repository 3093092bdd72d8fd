//! Piecewise-linear isocontour measures: marching squares in the plane,
//! marching tetrahedra (six-tetrahedron Kuhn split of each cube) in space.

use crate::grid::{Grid, Point};

/// Length (n = 2) or area (n = 3) of `{g = level}` for the piecewise-linear
/// interpolant of nodal values `g`, summed over `cells`.
pub fn isocontour_measure(grid: &Grid, g: &[f64], level: f64, cells: impl Iterator<Item = usize>) -> f64 {
    let mut total = 0.0;
    for cell in cells {
        let (corners, k) = grid.cell_corners(cell);
        let mut vals = [0.0; 8];
        let mut pts = [[0.0; 3]; 8];
        let mut inside = 0;
        for i in 0..k {
            vals[i] = g[corners[i]] - level;
            pts[i] = grid.node_coord(corners[i]);
            if vals[i] < 0.0 {
                inside += 1;
            }
        }
        if inside == 0 || inside == k {
            continue;
        }
        total += if grid.dim() == 2 {
            square_length(&vals, &pts)
        } else {
            cube_area(&vals, &pts)
        };
    }
    total
}

fn crossing(pa: &Point, pb: &Point, va: f64, vb: f64) -> Point {
    let t = va / (va - vb);
    [
        pa[0] + t * (pb[0] - pa[0]),
        pa[1] + t * (pb[1] - pa[1]),
        pa[2] + t * (pb[2] - pa[2]),
    ]
}

fn norm(v: &Point) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
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

fn seg(a: &Point, b: &Point) -> f64 {
    norm(&sub(a, b))
}

fn tri(a: &Point, b: &Point, c: &Point) -> f64 {
    0.5 * norm(&cross(&sub(b, a), &sub(c, a)))
}

// corner order: 0 (0,0), 1 (1,0), 2 (0,1), 3 (1,1)
fn square_length(v: &[f64; 8], p: &[Point; 8]) -> f64 {
    const EDGES: [(usize, usize); 4] = [(0, 1), (1, 3), (3, 2), (2, 0)];
    let mut hits: Vec<(usize, Point)> = Vec::with_capacity(4);
    for (e, &(a, b)) in EDGES.iter().enumerate() {
        if (v[a] < 0.0) != (v[b] < 0.0) {
            hits.push((e, crossing(&p[a], &p[b], v[a], v[b])));
        }
    }
    match hits.len() {
        2 => seg(&hits[0].1, &hits[1].1),
        4 => {
            // saddle: resolve with the cell-center average
            let center_in = (v[0] + v[1] + v[2] + v[3]) / 4.0 < 0.0;
            let pt = |e: usize| hits.iter().find(|h| h.0 == e).expect("saddle edge").1;
            if center_in == (v[0] < 0.0) {
                // corners 0 and 3 joined: cut off corners 1 and 2
                seg(&pt(0), &pt(1)) + seg(&pt(2), &pt(3))
            } else {
                seg(&pt(3), &pt(0)) + seg(&pt(1), &pt(2))
            }
        }
        _ => 0.0,
    }
}

const KUHN: [[usize; 4]; 6] = [
    [0, 1, 3, 7],
    [0, 1, 5, 7],
    [0, 2, 3, 7],
    [0, 2, 6, 7],
    [0, 4, 5, 7],
    [0, 4, 6, 7],
];

fn cube_area(v: &[f64; 8], p: &[Point; 8]) -> f64 {
    KUHN.iter().map(|t| tet_area(t, v, p)).sum()
}

fn tet_area(t: &[usize; 4], v: &[f64; 8], p: &[Point; 8]) -> f64 {
    let (ins, outs): (Vec<usize>, Vec<usize>) = t.iter().partition(|&&i| v[i] < 0.0);
    let x = |a: usize, b: usize| crossing(&p[a], &p[b], v[a], v[b]);
    match (ins.len(), outs.len()) {
        (1, 3) => tri(&x(ins[0], outs[0]), &x(ins[0], outs[1]), &x(ins[0], outs[2])),
        (3, 1) => tri(&x(outs[0], ins[0]), &x(outs[0], ins[1]), &x(outs[0], ins[2])),
        (2, 2) => {
            let q0 = x(ins[0], outs[0]);
            let q1 = x(ins[0], outs[1]);
            let q2 = x(ins[1], outs[1]);
            let q3 = x(ins[1], outs[0]);
            tri(&q0, &q1, &q2) + tri(&q0, &q2, &q3)
        }
        _ => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn radial(grid: &Grid) -> Vec<f64> {
        (0..grid.num_nodes())
            .map(|i| {
                let p = grid.node_coord(i);
                p[0] * p[0] + p[1] * p[1] + p[2] * p[2]
            })
            .collect()
    }

    #[test]
    fn circle_perimeter() {
        let g = Grid::new(2, -1.5, 1.5, 129).unwrap();
        let len = isocontour_measure(&g, &radial(&g), 1.0, 0..g.num_cells());
        assert!((len - 2.0 * PI).abs() < 0.002 * 2.0 * PI, "{len}");
    }

    #[test]
    fn sphere_area() {
        let g = Grid::new(3, -1.5, 1.5, 49).unwrap();
        let a = isocontour_measure(&g, &radial(&g), 1.0, 0..g.num_cells());
        assert!((a - 4.0 * PI).abs() < 0.01 * 4.0 * PI, "{a}");
    }

    #[test]
    fn plane_cut_is_exact() {
        let g = Grid::new(3, 0.0, 1.0, 9).unwrap();
        let vals: Vec<f64> = (0..g.num_nodes()).map(|i| g.node_coord(i)[0]).collect();
        let a = isocontour_measure(&g, &vals, 0.3, 0..g.num_cells());
        assert!((a - 1.0).abs() < 1e-12);
    }
}
