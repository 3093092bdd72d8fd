//! Small dense matrix helpers for `n x n` blocks with `n <= 3`.

pub type Mat = [[f64; 3]; 3];

pub fn identity(n: usize) -> Mat {
    let mut m = [[0.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate().take(n) {
        row[i] = 1.0;
    }
    m
}

pub fn diag(values: &[f64]) -> Mat {
    let mut m = [[0.0; 3]; 3];
    for (i, v) in values.iter().enumerate() {
        m[i][i] = *v;
    }
    m
}

pub fn det(n: usize, m: &Mat) -> f64 {
    match n {
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        3 => {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
        _ => unreachable!("dimension {n}"),
    }
}

/// Adjugate (transposed cofactor matrix): `adj(M) M = det(M) I`.
pub fn adjugate(n: usize, m: &Mat) -> Mat {
    let mut a = [[0.0; 3]; 3];
    match n {
        2 => {
            a[0][0] = m[1][1];
            a[1][1] = m[0][0];
            a[0][1] = -m[0][1];
            a[1][0] = -m[1][0];
        }
        3 => {
            for i in 0..3 {
                for j in 0..3 {
                    let (r0, r1) = others(j);
                    let (c0, c1) = others(i);
                    let minor = m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
                    a[i][j] = if (i + j) % 2 == 0 { minor } else { -minor };
                }
            }
        }
        _ => unreachable!("dimension {n}"),
    }
    a
}

fn others(k: usize) -> (usize, usize) {
    match k {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

pub fn mul(n: usize, a: &Mat, b: &Mat) -> Mat {
    let mut c = [[0.0; 3]; 3];
    for i in 0..n {
        for j in 0..n {
            c[i][j] = (0..n).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

pub fn mat_vec(n: usize, a: &Mat, x: &[f64; 3]) -> [f64; 3] {
    let mut y = [0.0; 3];
    for i in 0..n {
        y[i] = (0..n).map(|k| a[i][k] * x[k]).sum();
    }
    y
}

/// Quadratic form `x^T A y`.
pub fn form(n: usize, a: &Mat, x: &[f64; 3], y: &[f64; 3]) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += a[i][j] * x[i] * y[j];
        }
    }
    s
}

pub fn max_abs(n: usize, m: &Mat) -> f64 {
    let mut s: f64 = 0.0;
    for row in m.iter().take(n) {
        for v in row.iter().take(n) {
            s = s.max(v.abs());
        }
    }
    s
}

pub fn asymmetry(n: usize, m: &Mat) -> f64 {
    let mut s: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            s = s.max((m[i][j] - m[j][i]).abs());
        }
    }
    s
}

/// Ascending eigenvalues of a symmetric block.
pub fn sym_eigenvalues(n: usize, m: &Mat) -> [f64; 3] {
    let mut out = [0.0; 3];
    match n {
        2 => {
            let mat = nalgebra::Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1]);
            let mut e: Vec<f64> = mat.symmetric_eigenvalues().iter().copied().collect();
            e.sort_by(f64::total_cmp);
            out[..2].copy_from_slice(&e);
        }
        3 => {
            let mat = nalgebra::Matrix3::from_fn(|i, j| m[i][j]);
            let mut e: Vec<f64> = mat.symmetric_eigenvalues().iter().copied().collect();
            e.sort_by(f64::total_cmp);
            out.copy_from_slice(&e);
        }
        _ => unreachable!("dimension {n}"),
    }
    out
}

pub fn min_eigenvalue(n: usize, m: &Mat) -> f64 {
    sym_eigenvalues(n, m)[0]
}

pub fn max_eigenvalue(n: usize, m: &Mat) -> f64 {
    sym_eigenvalues(n, m)[n - 1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjugate_identity_3d() {
        let m = [[2.0, 0.3, -0.1], [0.3, 1.5, 0.2], [-0.1, 0.2, 1.1]];
        let a = adjugate(3, &m);
        let p = mul(3, &a, &m);
        let d = det(3, &m);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { d } else { 0.0 };
                assert!((p[i][j] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn eigenvalues_sorted() {
        let e = sym_eigenvalues(2, &[[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0; 3]]);
        assert!((e[0] - 1.0).abs() < 1e-12 && (e[1] - 3.0).abs() < 1e-12);
    }
}
