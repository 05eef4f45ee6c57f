//! Gauss–Legendre rules and a few composite helpers.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes by Newton iteration on `P_n` from the Chebyshev-like initial guess.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be >= 1");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d.is_finite() { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Integrate `f` over `[a, b]` with one panel.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let h = 0.5 * (b - a);
        let c = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(c + h * x))
            .sum::<f64>()
            * h
    }

    /// Composite rule with `panels` equal panels on `[a, b]`.
    pub fn composite<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, panels: usize, mut f: F) -> f64 {
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|p| {
                let lo = a + h * p as f64;
                self.integrate(lo, lo + h, &mut f)
            })
            .sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let (p, pm1) = if n == 0 { (1.0, 0.0) } else { (p1, p0) };
    let d = n as f64 * (x * p - pm1) / (x * x - 1.0);
    (p, d)
}

/// Integral over `[a, b]` split at geometric (dyadic) panels accumulating
/// toward `a`, for integrands with an integrable singularity at `a`.
/// `levels` dyadic shells, each integrated with `rule`, plus the innermost
/// cell `[a, a + (b - a) 2^{-levels}]` with the same rule.
pub fn graded_toward_left<F: FnMut(f64) -> f64>(
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    levels: usize,
    mut f: F,
) -> f64 {
    let len = b - a;
    let mut total = 0.0;
    let mut hi = len;
    for _ in 0..levels {
        let lo = 0.5 * hi;
        total += rule.integrate(a + lo, a + hi, &mut f);
        hi = lo;
    }
    total + rule.integrate(a, a + hi, &mut f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_polynomials() {
        for n in 1..=12 {
            let gl = GaussLegendre::new(n);
            let s: f64 = gl.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13);
            for deg in 0..(2 * n) {
                let num = gl.integrate(0.0, 1.0, |x| x.powi(deg as i32));
                assert!((num - 1.0 / (deg as f64 + 1.0)).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn graded_handles_sqrt_singularity() {
        let gl = GaussLegendre::new(8);
        let v = graded_toward_left(&gl, 0.0, 1.0, 60, |x| x.powf(-0.5));
        assert!((v - 2.0).abs() < 1e-9, "{v}");
    }
}
