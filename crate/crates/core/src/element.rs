//! Bilinear / trilinear reference element on the unit cell.

use crate::linalg::Mat;

const GAUSS: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];

/// Reference integrals `R[i][j][a][b] = ∫_{[0,1]^n} ∂_i φ_a ∂_j φ_b`, exact by 2-point Gauss.
#[derive(Debug, Clone)]
pub struct Q1Element {
    dim: usize,
    corners: usize,
    reference: Vec<f64>,
}

impl Q1Element {
    pub fn new(dim: usize) -> Self {
        let corners = 1usize << dim;
        let npts = corners;
        let weight = 1.0 / npts as f64;
        let mut reference = vec![0.0; dim * dim * corners * corners];
        for gp in 0..npts {
            let mut xi = [0.0; 3];
            for (d, x) in xi.iter_mut().enumerate().take(dim) {
                *x = GAUSS[(gp >> d) & 1];
            }
            let grads: Vec<[f64; 3]> = (0..corners).map(|a| shape_grad(dim, a, &xi)).collect();
            for i in 0..dim {
                for j in 0..dim {
                    for a in 0..corners {
                        for b in 0..corners {
                            reference[idx(dim, corners, i, j, a, b)] += weight * grads[a][i] * grads[b][j];
                        }
                    }
                }
            }
        }
        Self {
            dim,
            corners,
            reference,
        }
    }

    pub fn corners(&self) -> usize {
        self.corners
    }

    /// Local stiffness `K_ab = ∫_cell U ∇φ_b · ∇φ_a` for a cell of width `h`.
    pub fn stiffness(&self, u: &Mat, h: f64) -> [[f64; 8]; 8] {
        let (n, c) = (self.dim, self.corners);
        let scale = h.powi(n as i32 - 2);
        let mut k = [[0.0; 8]; 8];
        for i in 0..n {
            for j in 0..n {
                let uij = u[i][j];
                if uij == 0.0 {
                    continue;
                }
                for (a, row) in k.iter_mut().enumerate().take(c) {
                    for (b, v) in row.iter_mut().enumerate().take(c) {
                        *v += scale * uij * self.reference[idx(n, c, i, j, a, b)];
                    }
                }
            }
        }
        k
    }

    /// `∫_cell U Dv·Dw` for corner values `v`, `w`.
    pub fn bilinear(&self, u: &Mat, h: f64, v: &[f64], w: &[f64]) -> f64 {
        let k = self.stiffness(u, h);
        let mut s = 0.0;
        for a in 0..self.corners {
            for b in 0..self.corners {
                s += v[a] * k[a][b] * w[b];
            }
        }
        s
    }
}

fn idx(n: usize, c: usize, i: usize, j: usize, a: usize, b: usize) -> usize {
    ((i * n + j) * c + a) * c + b
}

fn shape_grad(dim: usize, a: usize, xi: &[f64; 3]) -> [f64; 3] {
    let mut g = [0.0; 3];
    for (d, gd) in g.iter_mut().enumerate().take(dim) {
        let mut v = if (a >> d) & 1 == 1 { 1.0 } else { -1.0 };
        for e in 0..dim {
            if e != d {
                v *= if (a >> e) & 1 == 1 { xi[e] } else { 1.0 - xi[e] };
            }
        }
        *gd = v;
    }
    g
}
