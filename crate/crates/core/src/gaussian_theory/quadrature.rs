//! Gauss–Hermite and Gauss–Legendre rules, and adaptive Simpson.

use std::f64::consts::PI;

/// Nodes and weights for `E[g(N)]`, `N ~ N(0, 1)`: `Σ w_i g(x_i)`.
///
/// Nodes are sorted and exactly symmetric about 0; sums run over mirrored
/// pairs so that odd integrands cancel exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Positive nodes with their weights, outermost (smallest weight) first.
    pub fn positive_half(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let n = self.nodes.len();
        (n.div_ceil(2)..n)
            .rev()
            .filter(move |&i| self.nodes[i] > 0.0)
            .map(move |i| (self.nodes[i], self.weights[i]))
    }

    /// Weight of the node at 0 (odd orders only).
    pub fn center_weight(&self) -> Option<f64> {
        let n = self.nodes.len();
        (n % 2 == 1).then(|| self.weights[n / 2])
    }

    /// `Σ w_i g(x_i)`, summed over mirrored pairs.
    pub fn expect<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        let mut total = 0.0;
        for (x, w) in self.positive_half() {
            total += w * (g(x) + g(-x));
        }
        if let Some(w0) = self.center_weight() {
            total += w0 * g(0.0);
        }
        total
    }
}

/// Gauss–Hermite rule for the standard normal weight.
///
/// Roots of the physicists' polynomial are found by Newton iteration on the
/// orthonormal three-term recurrence (which stays in range for large orders),
/// then rescaled by `sqrt(2)` and normalized to unit total weight.
pub fn gauss_hermite(order: usize) -> QuadratureRule {
    assert!(order >= 1, "quadrature order must be positive");
    let n = order;
    let pim4 = PI.powf(-0.25);
    let mut t = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let mut z = 0.0_f64;
    for i in 0..m {
        z = match i {
            0 => {
                let s = (2 * n + 1) as f64;
                s.sqrt() - 1.85575 * s.powf(-0.16667)
            }
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * t[0],
            3 => 1.91 * z - 0.91 * t[1],
            _ => 2.0 * z - t[i - 2],
        };
        for _ in 0..100 {
            let (p1, p2) = orthonormal_hermite(n, z, pim4);
            let step = p1 / ((2.0 * n as f64).sqrt() * p2);
            z -= step;
            if step.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        let (_, p2) = orthonormal_hermite(n, z, pim4);
        let pp = (2.0 * n as f64).sqrt() * p2;
        t[i] = z;
        t[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        t[m - 1] = 0.0;
    }
    let total: f64 = w.iter().sum();
    let mut nodes: Vec<f64> = t.iter().map(|x| x * std::f64::consts::SQRT_2).collect();
    let mut weights: Vec<f64> = w.iter().map(|x| x / total).collect();
    nodes.reverse();
    weights.reverse();
    QuadratureRule { nodes, weights }
}

/// Orthonormal Hermite values `(p_n(z), p_{n-1}(z))` for the weight `exp(-z^2)`.
fn orthonormal_hermite(n: usize, z: f64, p0: f64) -> (f64, f64) {
    let mut p1 = p0;
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
    }
    (p1, p2)
}

/// Gauss–Legendre rule on `[a, b]`: `(nodes, weights)`.
pub fn gauss_legendre(order: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "quadrature order must be positive");
    let n = order;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp;
        loop {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let step = p1 / pp;
            z -= step;
            if step.abs() <= 1e-15 {
                break;
            }
        }
        x[i] = mid - half * z;
        x[n - 1 - i] = mid + half * z;
        w[i] = 2.0 * half / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Adaptive Simpson quadrature of `g` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<G: Fn(f64) -> f64>(g: &G, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = g(a);
    let fb = g(b);
    let m = 0.5 * (a + b);
    let fm = g(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(g, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<G: Fn(f64) -> f64>(
    g: &G,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = g(lm);
    let frm = g(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(g, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(g, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn double_factorial_odd(m: u32) -> f64 {
        (1..=m).step_by(2).map(|k| k as f64).product()
    }

    #[test]
    fn hermite_rule_reproduces_normal_moments() {
        for order in [5, 16, 64, 128] {
            let rule = gauss_hermite(order);
            assert_eq!(rule.order(), order);
            let max_deg = (2 * order - 1).min(20);
            for d in 0..=max_deg as u32 {
                let got = rule.expect(|x| x.powi(d as i32));
                let want = if d % 2 == 1 { 0.0 } else { double_factorial_odd(d.saturating_sub(1)) };
                let err = if want == 0.0 { got.abs() } else { ((got - want) / want).abs() };
                assert!(err <= 1e-13, "order {order} degree {d}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn hermite_nodes_sorted_and_symmetric() {
        let rule = gauss_hermite(33);
        assert!(rule.nodes().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(rule.nodes()[16], 0.0);
        for i in 0..33 {
            assert!((rule.nodes()[i] + rule.nodes()[32 - i]).abs() < 1e-13);
        }
    }

    #[test]
    fn legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(10, 0.0, 1.0);
        for d in 0..20 {
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(d)).sum();
            assert!((got - 1.0 / (d as f64 + 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn simpson_matches_closed_forms() {
        let v = adaptive_simpson(&|x: f64| x.exp(), 0.0, 1.0, 1e-12);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-11);
        let v = adaptive_simpson(&|x: f64| x.sqrt(), 0.0, 1.0, 1e-10);
        assert!((v - 2.0 / 3.0).abs() < 1e-9);
    }
}
