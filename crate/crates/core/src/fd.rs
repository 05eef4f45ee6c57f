//! Finite-difference weights on arbitrary nodes and time derivatives of grid
//! fields.

use crate::error::{KfpError, Result};
use crate::grid::GridField;

/// Fornberg's recursion: weights `w[m][j]` such that
/// `f^{(m)}(z) ≈ Σ_j w[m][j] f(x_j)` for `m ≤ max_deriv`.
pub fn fornberg(z: f64, x: &[f64], max_deriv: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; max_deriv + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    for i in 1..n {
        let mn = i.min(max_deriv);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Stencil `(first node, weights)` for the first derivative at node `i` of
/// an equispaced grid of `n` nodes with spacing `h`, using `width` nodes
/// centered where possible and shifted inward at the ends.
pub fn first_derivative_stencil(i: usize, n: usize, h: f64, width: usize) -> (usize, Vec<f64>) {
    let w = width.min(n);
    let start = i.saturating_sub(w / 2).min(n - w);
    let nodes: Vec<f64> = (0..w).map(|j| (start + j) as f64 * h).collect();
    let c = fornberg(i as f64 * h, &nodes, 1);
    (start, c[1].clone())
}

/// `∂_t u` with a `width`-point stencil (order `width - 1` at the ends,
/// `width - 1` or better in the interior).
pub fn time_derivative(u: &GridField, width: usize) -> Result<GridField> {
    let nt = u.spec.nt;
    if nt < 3 || width < 3 {
        return Err(KfpError::Grid(format!(
            "time derivative needs at least 3 nodes and stencil width 3 (nodes {nt}, width {width})"
        )));
    }
    let h = u.spec.dt();
    let slab = u.spec.slab_len();
    let mut out = GridField::zeros(u.spec.clone());
    for i in 0..nt {
        let (start, w) = first_derivative_stencil(i, nt, h, width);
        let dst = &mut out.values[i * slab..(i + 1) * slab];
        for (j, wj) in w.iter().enumerate() {
            let src = &u.values[(start + j) * slab..(start + j + 1) * slab];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += wj * s;
            }
        }
    }
    Ok(out)
}
