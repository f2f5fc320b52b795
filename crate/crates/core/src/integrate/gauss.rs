//! One-dimensional Gauss rules.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

#[derive(Debug, Clone)]
pub struct GaussRule {
    /// Nodes on [-1, 1], ascending.
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Nodes and weights mapped to [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(self.weights.iter())
            .map(move |(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn compute_gauss_legendre(n: usize) -> GaussRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
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
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    GaussRule { nodes, weights }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Cached n-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> Arc<GaussRule> {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("gauss cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| Arc::new(compute_gauss_legendre(n)))
        .clone()
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One Gauss-Kronrod 7/15 panel: (kronrod value, |kronrod - gauss|, kronrod of |f|).
fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    let mut abs = WGK[7] * fc.abs();
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        k += WGK[j] * (f1 + f2);
        abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            g += WG[j / 2] * (f1 + f2);
        }
    }
    (k * h, ((k - g) * h).abs(), abs * h)
}

#[derive(Debug, Clone, Copy)]
pub struct AdaptiveResult {
    pub value: f64,
    pub error: f64,
    pub abs_value: f64,
    pub evaluations: u64,
    pub converged: bool,
}

/// Globally adaptive Gauss-Kronrod 7/15 quadrature on [a, b] with the given
/// initial breakpoints. Stops when the summed error is below
/// `max(abs_tol, rel_tol * integral of |f|)`.
pub fn adaptive_gk15(
    mut f: impl FnMut(f64) -> f64,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> AdaptiveResult {
    let mut panels: Vec<(f64, f64, f64, f64, f64)> = Vec::new();
    let mut evaluations = 0u64;
    for w in breaks.windows(2) {
        let (v, e, a) = gk15(&mut f, w[0], w[1]);
        evaluations += 15;
        panels.push((w[0], w[1], v, e, a));
    }
    loop {
        let value: f64 = panels.iter().map(|p| p.2).sum();
        let error: f64 = panels.iter().map(|p| p.3).sum();
        let abs_value: f64 = panels.iter().map(|p| p.4).sum();
        let target = abs_tol.max(rel_tol * abs_value);
        if error <= target || panels.len() >= max_panels {
            return AdaptiveResult {
                value,
                error,
                abs_value,
                evaluations,
                converged: error <= target,
            };
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("at least one panel");
        let (a, b, ..) = panels.swap_remove(idx);
        let m = 0.5 * (a + b);
        if !(m > a && m < b) {
            return AdaptiveResult {
                value,
                error,
                abs_value,
                evaluations,
                converged: false,
            };
        }
        let (v1, e1, a1) = gk15(&mut f, a, m);
        let (v2, e2, a2) = gk15(&mut f, m, b);
        evaluations += 30;
        panels.push((a, m, v1, e1, a1));
        panels.push((m, b, v2, e2, a2));
    }
}
