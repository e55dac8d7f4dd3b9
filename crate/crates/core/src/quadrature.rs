//! Small quadrature helpers shared by the solvers.

/// Gauss-Legendre nodes on `[0, 1]` (8 points) and matching weights.
pub const GL8_NODES: [f64; 8] = [
    0.019_855_071_751_231_856,
    0.101_666_761_293_186_63,
    0.237_233_795_041_835_5,
    0.408_282_678_752_175_1,
    0.591_717_321_247_825,
    0.762_766_204_958_164_5,
    0.898_333_238_706_813_4,
    0.980_144_928_248_768_2,
];

pub const GL8_WEIGHTS: [f64; 8] = [
    0.050_614_268_145_188_13,
    0.111_190_517_226_687_24,
    0.156_853_322_938_943_64,
    0.181_341_891_689_181,
    0.181_341_891_689_181,
    0.156_853_322_938_943_64,
    0.111_190_517_226_687_24,
    0.050_614_268_145_188_13,
];

/// Integrates `f` over `[a, b]` with the 8-point Gauss-Legendre rule.
pub fn gauss_legendre<F: Fn(f64) -> f64>(a: f64, b: f64, f: F) -> f64 {
    let len = b - a;
    GL8_NODES
        .iter()
        .zip(GL8_WEIGHTS.iter())
        .map(|(t, w)| w * f(a + t * len))
        .sum::<f64>()
        * len
}

/// Cumulative composite trapezoid of equally spaced samples, starting at 0.
pub fn cumulative_trapezoid(values: &[f64], spacing: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in values.windows(2) {
        acc += 0.5 * (w[0] + w[1]) * spacing;
        out.push(acc);
    }
    out
}

/// Composite trapezoid weights for `n_nodes` equally spaced nodes.
pub fn trapezoid_weights(n_nodes: usize, spacing: f64) -> Vec<f64> {
    let mut w = vec![spacing; n_nodes];
    if n_nodes > 0 {
        w[0] *= 0.5;
        w[n_nodes - 1] *= 0.5;
    }
    w
}

/// Linear interpolation of `(xs, ys)` at `x`; `xs` must be non-decreasing.
/// Constant extrapolation outside the sampled range.
pub fn interp_linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let hi = xs.partition_point(|&v| v <= x).min(n - 1);
    let lo = hi - 1;
    let dx = xs[hi] - xs[lo];
    if dx <= 0.0 {
        return ys[hi];
    }
    let t = (x - xs[lo]) / dx;
    ys[lo] + t * (ys[hi] - ys[lo])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_degree_fifteen() {
        let v = gauss_legendre(0.0, 2.0, |x| x.powi(15));
        assert!((v - 2f64.powi(16) / 16.0).abs() < 1e-9);
        assert!((GL8_WEIGHTS.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cumulative_trapezoid_of_linear_is_exact() {
        let n = 10;
        let h = 1.0 / n as f64;
        let vals: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
        let c = cumulative_trapezoid(&vals, h);
        for (i, v) in c.iter().enumerate() {
            let x = i as f64 * h;
            assert!((v - x * x / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn interp_handles_ends_and_interior() {
        let xs = [0.0, 1.0, 2.0];
        let ys = [0.0, 10.0, 30.0];
        assert_eq!(interp_linear(&xs, &ys, -1.0), 0.0);
        assert_eq!(interp_linear(&xs, &ys, 3.0), 30.0);
        assert!((interp_linear(&xs, &ys, 1.5) - 20.0).abs() < 1e-12);
        assert!((interp_linear(&xs, &ys, 1.0) - 10.0).abs() < 1e-12);
    }
}
