//! Sinh-spaced wavenumber grids and principal-value integration.
//!
//! Nodes follow `p_n = d·sinh(Δ(n − n₀)) + k₀`, dense around the pulse carrier
//! `k₀` and geometrically coarser away from it. Quadrature weights are the
//! trapezoidal rule in the grid index `n`, i.e. `w_n = (dp/dn)·Δn`, which keeps
//! the rule spectrally accurate for integrands that decay towards the ends.
//! Gregory corrections on the three outermost nodes make it fourth order for
//! integrands that do not.
//!
//! Principal values use pole subtraction,
//!
//! ```text
//! PV∫ₐᵇ f(k)/(k−p) dk = ∫ₐᵇ [f(k) − f(p)]/(k−p) dk + f(p) ln|(b−p)/(p−a)|,
//! ```
//!
//! and the Sokhotski–Plemelj term `1/(ν + i0) = P(1/ν) − iπδ(ν)` is returned
//! separately.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::tolerances::{SINH_DELTA, SINH_D_OVER_K0, SINH_KMAX_OVER_K0};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SinhGrid {
    pub k0: f64,
    pub d: f64,
    pub delta: f64,
    pub n0: i64,
    /// Continuous index of each node (integers except possibly at clipped ends).
    pub index: Vec<f64>,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SinhGrid {
    /// Nodes at the uniformly spaced indices `s_j = s0 + j·hs`, `j < count`.
    fn from_index(k0: f64, d: f64, delta: f64, n0: i64, s0: f64, hs: f64, count: usize) -> Self {
        let index: Vec<f64> = (0..count).map(|j| s0 + j as f64 * hs).collect();
        let nodes: Vec<f64> = index.iter().map(|&s| d * (delta * (s - n0 as f64)).sinh() + k0).collect();
        let jac = |s: f64| d * delta * (delta * (s - n0 as f64)).cosh();
        let weights = index.iter().enumerate().map(|(j, &s)| hs * gregory(j, count) * jac(s)).collect();
        Self { k0, d, delta, n0, index, nodes, weights }
    }

    /// Grid spanning exactly `[a, b]` around `center`, with the same node map
    /// and an index step of at most one.
    pub fn on_interval(center: f64, d: f64, delta: f64, a: f64, b: f64) -> Result<Self> {
        if !(d > 0.0 && delta > 0.0 && b > a) {
            return Err(Error::Config(format!("invalid interval grid d={d} Δ={delta} [{a}, {b}]")));
        }
        let sa = ((a - center) / d).asinh() / delta;
        let sb = ((b - center) / d).asinh() / delta;
        let steps = ((sb - sa).ceil() as usize).max(MIN_NODES);
        let mut g = Self::from_index(center, d, delta, 0, sa, (sb - sa) / steps as f64, steps + 1);
        g.nodes[0] = a;
        g.nodes[steps] = b;
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn lower(&self) -> f64 {
        self.nodes[0]
    }

    pub fn upper(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn integrate<F: Fn(f64) -> Complex64>(&self, f: F) -> Complex64 {
        self.nodes.iter().zip(&self.weights).map(|(&k, &w)| f(k) * w).sum()
    }

    pub fn integrate_real<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&k, &w)| f(k) * w).sum()
    }

    /// Same construction with `d` and `Δ` halved.
    pub fn refined(&self) -> Result<Self> {
        build_sinh_grid(self.k0, 0.5 * self.d, 0.5 * self.delta, self.upper())
    }
}

const MIN_NODES: usize = 8;

/// Trapezoid weights with fourth-order Gregory end corrections.
fn gregory(j: usize, count: usize) -> f64 {
    const END: [f64; 3] = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];
    let from_end = j.min(count - 1 - j);
    if from_end < 3 {
        END[from_end]
    } else {
        1.0
    }
}

/// Grid parameters as they appear in configuration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub d_over_k0: f64,
    pub delta: f64,
    pub kmax_over_k0: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { d_over_k0: SINH_D_OVER_K0, delta: SINH_DELTA, kmax_over_k0: SINH_KMAX_OVER_K0 }
    }
}

impl GridSpec {
    pub fn build(&self, k0: f64) -> Result<SinhGrid> {
        build_sinh_grid(k0, self.d_over_k0 * k0, self.delta, self.kmax_over_k0 * k0)
    }
}

/// Grid on `[p₀, p_N]` with `p₋₁ < 0 ≤ p₀` and `p_N ≥ k_max`.
pub fn build_sinh_grid(k0: f64, d: f64, delta: f64, k_max: f64) -> Result<SinhGrid> {
    if !(k0 > 0.0 && d > 0.0 && delta > 0.0 && k_max > k0) {
        return Err(Error::Config(format!("invalid sinh grid k0={k0} d={d} Δ={delta} k_max={k_max}")));
    }
    let n0 = ((k0 / d).asinh() / delta).floor() as i64;
    let upper = ((k_max - k0) / d).asinh() / delta;
    let n_max = n0 + upper.ceil() as i64;
    let count = (n_max as usize + 1).max(MIN_NODES + 1);
    Ok(SinhGrid::from_index(k0, d, delta, n0, 0.0, 1.0, count))
}

/// `f(k)/(k − pole)` with the pole factor removed.
pub struct PvIntegrand<F: Fn(f64) -> Complex64> {
    pub regular_part: F,
    pub pole: f64,
}

impl<F: Fn(f64) -> Complex64> PvIntegrand<F> {
    /// Coefficient of `−iπδ(k − pole)`.
    pub fn delta_coefficient(&self) -> Complex64 {
        (self.regular_part)(self.pole)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PvResult {
    pub principal: Complex64,
    /// `−iπ f(pole)`
    pub delta_term: Complex64,
}

impl PvResult {
    /// `∫ f(k)/(k − pole + i0) dk`.
    pub fn total(&self) -> Complex64 {
        self.principal + self.delta_term
    }
}

fn local_spacing(grid: &SinhGrid, x: f64) -> f64 {
    let i = grid.nodes.partition_point(|&p| p < x).clamp(1, grid.len() - 1);
    grid.nodes[i] - grid.nodes[i - 1]
}

pub fn pv_integrate<F: Fn(f64) -> Complex64>(f: &PvIntegrand<F>, grid: &SinhGrid) -> Result<PvResult> {
    let n = grid.len();
    let p = f.pole;
    if n < 4 || !(p > grid.nodes[1] && p < grid.nodes[n - 2]) {
        return Err(Error::Accuracy(format!(
            "pole {p} is not at least one node inside [{}, {}]",
            grid.lower(),
            grid.upper()
        )));
    }
    let fp = (f.regular_part)(p);
    let h = local_spacing(grid, p);
    let mut sum = Complex64::new(0.0, 0.0);
    for (&k, &w) in grid.nodes.iter().zip(&grid.weights) {
        let dk = k - p;
        let q = if dk.abs() < 1e-9 * h {
            let e = 1e-3 * h;
            ((f.regular_part)(p + e) - (f.regular_part)(p - e)) / (2.0 * e)
        } else {
            ((f.regular_part)(k) - fp) / dk
        };
        sum += q * w;
    }
    let log = ((grid.upper() - p) / (p - grid.lower())).ln();
    Ok(PvResult { principal: sum + fp * log, delta_term: Complex64::new(0.0, -std::f64::consts::PI) * fp })
}

/// `∫ g(k)/(k − p_i + i0) dk` for tabulated `g` with the pole on node `i`.
///
/// The domain is `[lower, p_N]` with `lower ≤ p₀`; on the sliver `[lower, p₀]`
/// the integrand is held at `g(p₀)`, which is exact enough when the spectrum
/// has no weight there.
pub(crate) fn pv_on_node(grid: &SinhGrid, g: &[Complex64], i: usize, lower: f64) -> Result<Complex64> {
    let nodes = &grid.nodes;
    let n = nodes.len();
    let p = nodes[i];
    let (p0, pn) = (nodes[0], nodes[n - 1]);
    let gi = g[i];
    let zero = Complex64::new(0.0, 0.0);
    if gi != zero && (i + 1 == n || (i == 0 && lower >= p0)) {
        return Err(Error::Accuracy(format!("pole on boundary node {i} with nonzero integrand")));
    }
    let dg = if i + 1 == n {
        zero
    } else if i == 0 {
        (g[1] - gi) / (nodes[1] - p)
    } else {
        let (lo, hi) = if i >= 2 && i + 2 < n { (i - 2, i + 2) } else { (i - 1, i + 1) };
        lagrange_derivative(&nodes[lo..=hi], &g[lo..=hi], i - lo)
    };
    let mut sum = zero;
    for j in 0..n {
        let q = if j == i { dg } else { (g[j] - gi) / (nodes[j] - p) };
        sum += q * grid.weights[j];
    }
    if i == 0 {
        if gi != zero {
            sum += gi * ((pn - p) / (p - lower)).ln();
        }
    } else {
        if gi != zero {
            sum += gi * ((pn - p) / (p - p0)).ln();
        }
        if lower < p0 && g[0] != zero {
            sum += g[0] * ((p - p0) / (p - lower)).ln();
        }
    }
    Ok(sum - Complex64::new(0.0, std::f64::consts::PI) * gi)
}

/// Derivative at `xs[m]` of the polynomial through `(xs, ys)`.
fn lagrange_derivative(xs: &[f64], ys: &[Complex64], m: usize) -> Complex64 {
    let xm = xs[m];
    let mut out = Complex64::new(0.0, 0.0);
    for j in 0..xs.len() {
        let w = if j == m {
            (0..xs.len()).filter(|&k| k != m).map(|k| 1.0 / (xm - xs[k])).sum::<f64>()
        } else {
            let mut w = 1.0 / (xs[j] - xm);
            for k in (0..xs.len()).filter(|&k| k != j && k != m) {
                w *= (xm - xs[k]) / (xs[j] - xs[k]);
            }
            w
        };
        out += ys[j] * w;
    }
    out
}

/// Tensor-product quadrature `∫∫ K(p′, p) dp′ dp`.
pub fn double_integral<K: Fn(f64, f64) -> Complex64 + Sync>(kernel: K, grid: &SinhGrid) -> Complex64 {
    let rows: Vec<Complex64> = grid
        .nodes
        .par_iter()
        .zip(grid.weights.par_iter())
        .map(|(&pp, &wp)| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (&p, &w) in grid.nodes.iter().zip(&grid.weights) {
                acc += kernel(pp, p) * w;
            }
            acc * wp
        })
        .collect();
    rows.into_iter().sum()
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Composite Gauss–Legendre rule over the given panel edges.
pub fn gl_panels(edges: &[f64], order: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(order);
    let mut nodes = Vec::with_capacity((edges.len() - 1) * order);
    let mut weights = Vec::with_capacity(nodes.capacity());
    for e in edges.windows(2) {
        let (mid, half) = (0.5 * (e[0] + e[1]), 0.5 * (e[1] - e[0]));
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(mid + half * xi);
            weights.push(half * wi);
        }
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn default_grid_invariants() {
        let g = GridSpec::default().build(1.0).unwrap();
        let p_minus = g.d * (g.delta * (-1.0 - g.n0 as f64)).sinh() + g.k0;
        assert!(p_minus < 0.0 && g.nodes[0] >= 0.0);
        assert!(g.nodes.windows(2).all(|w| w[1] > w[0]));
        assert!(g.upper() >= 1.1e3);
        let nearest = g.nodes.iter().map(|p| (p - 1.0).abs()).fold(f64::INFINITY, f64::min);
        assert!(nearest <= g.d);
        assert!(g.len() > 500 && g.len() < 650, "{}", g.len());
    }

    #[test]
    fn spacing_grows_away_from_center() {
        let g = GridSpec::default().build(1.0).unwrap();
        assert!(local_spacing(&g, 1.0 + 10.0 * g.d) > local_spacing(&g, 1.0 + 0.5 * g.d));
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(build_sinh_grid(1.0, 0.0, 0.1, 10.0).is_err());
        assert!(build_sinh_grid(1.0, 0.1, 0.1, 0.5).is_err());
        assert!(build_sinh_grid(-1.0, 0.1, 0.1, 10.0).is_err());
    }

    #[test]
    fn pv_odd_symmetry() {
        let g = SinhGrid::on_interval(0.0, 1e-3, 0.05, -1.0, 1.0).unwrap();
        let r = pv_integrate(&PvIntegrand { regular_part: |_| c(1.0), pole: 0.0 }, &g).unwrap();
        assert!(r.principal.norm() < 1e-12);
    }

    #[test]
    fn pv_log_case() {
        let g = SinhGrid::on_interval(1.0, 1e-3, 0.04, 0.0, 3.0).unwrap();
        let r = pv_integrate(&PvIntegrand { regular_part: |_| c(1.0), pole: 1.0 }, &g).unwrap();
        assert!((r.principal.re - 2f64.ln()).abs() < 1e-8);
        assert_relative_eq!(r.delta_term.im, -std::f64::consts::PI, max_relative = 1e-15);
    }

    #[test]
    fn pv_gaussian_symmetric() {
        let g = SinhGrid::on_interval(1.0, 2.5e-3, 0.038, -9.0, 11.0).unwrap();
        let f = |k: f64| c((-(k - 1.0) * (k - 1.0)).exp());
        let r = pv_integrate(&PvIntegrand { regular_part: f, pole: 1.0 }, &g).unwrap();
        assert!(r.principal.norm() < 1e-10, "{}", r.principal);
    }

    #[test]
    fn pv_off_node_pole_matches_dawson() {
        // PV∫ e^{−(k−1)²}/(k − p) dk = −2√π D(p − 1), D the Dawson function (scipy.special.dawsn)
        let g = SinhGrid::on_interval(1.0, 2.5e-3, 0.038, -9.0, 11.0).unwrap();
        let p = 1.234_567;
        let f = |k: f64| c((-(k - 1.0) * (k - 1.0)).exp());
        let r = pv_integrate(&PvIntegrand { regular_part: f, pole: p }, &g).unwrap();
        assert!((r.principal.re - (-0.8016782031480228)).abs() < 1e-8, "{}", r.principal.re);
    }

    #[test]
    fn pole_near_boundary_rejected() {
        let g = SinhGrid::on_interval(1.0, 1e-2, 0.1, 0.0, 3.0).unwrap();
        let r = pv_integrate(&PvIntegrand { regular_part: |_| c(1.0), pole: 1e-6 }, &g);
        assert!(matches!(r, Err(Error::Accuracy(_))));
    }

    #[test]
    fn pv_refinement_convergence() {
        let g = SinhGrid::on_interval(1.0, 2.5e-3, 0.038, 0.0, 6.0).unwrap();
        let h = SinhGrid::on_interval(1.0, 1.25e-3, 0.019, 0.0, 6.0).unwrap();
        let cases: [(fn(f64) -> Complex64, f64); 3] = [
            (|_| c(1.0), 1.0),
            (|k| c((-(k - 1.0) * (k - 1.0)).exp()), 1.234_567),
            (|k| Complex64::new((-(k - 1.0).powi(2) * 4.0).exp() * (1.0 + k), k.cos()), 1.3),
        ];
        for (f, p) in cases {
            let a = pv_integrate(&PvIntegrand { regular_part: f, pole: p }, &g).unwrap().principal;
            let b = pv_integrate(&PvIntegrand { regular_part: f, pole: p }, &h).unwrap().principal;
            // the last case does not decay at the ends, where the rule is fourth order
            let tol = if p == 1.3 { 1e-5 } else { 1e-6 };
            assert!((a - b).norm() / b.norm() < tol, "{p}: {}", (a - b).norm() / b.norm());
        }
    }

    /// ∫ f(k)/(k − p + iη) dk by direct graded Gauss–Legendre quadrature.
    fn eta_integral<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64, p: f64, eta: f64) -> Complex64 {
        let mut edges = vec![a];
        let mut offs: Vec<f64> = (-12..40).map(|m| eta * 10f64.powf(m as f64 / 4.0)).collect();
        offs.retain(|&o| p - o > a && p + o < b);
        for o in offs.iter().rev() {
            edges.push(p - o);
        }
        edges.push(p);
        for o in &offs {
            edges.push(p + o);
        }
        edges.push(b);
        let (x, w) = gl_panels(&edges, 24);
        x.iter().zip(&w).map(|(&k, &wk)| f(k) * wk / Complex64::new(k - p, eta)).sum()
    }

    #[test]
    fn sokhotski_plemelj_needs_pi() {
        let f = |k: f64| Complex64::new((-(k - 1.0).powi(2) * 8.0).exp() * (1.0 + k), 0.3 * k);
        let (a, b, p) = (0.0, 3.0, 0.9);
        let g = SinhGrid::on_interval(1.0, 1e-3, 0.03, a, b).unwrap();
        let pv = pv_integrate(&PvIntegrand { regular_part: f, pole: p }, &g).unwrap();
        let i3 = eta_integral(&f, a, b, p, 1e-3);
        let i4 = eta_integral(&f, a, b, p, 1e-4);
        let i5 = eta_integral(&f, a, b, p, 1e-5);
        let limit = (10.0 * i5 - i4) / 9.0;
        assert!((limit - pv.total()).norm() / pv.total().norm() < 1e-4, "{limit} {}", pv.total());
        assert!((i3 - i4).norm() > (i4 - i5).norm());
        // the delta term without π would miss the limit by far
        let no_pi = pv.principal - Complex64::new(0.0, 1.0) * f(p);
        assert!((limit - no_pi).norm() / limit.norm() > 0.1);
    }

    #[test]
    fn double_integral_separable() {
        let g = SinhGrid::on_interval(1.0, 1e-2, 0.05, 0.0, 4.0).unwrap();
        let gp = |x: f64| Complex64::new((-x).exp(), x);
        let hp = |x: f64| Complex64::new(x.sin(), 1.0);
        let both = double_integral(|a, b| gp(a) * hp(b), &g);
        let prod = g.integrate(gp) * g.integrate(hp);
        assert!((both - prod).norm() / prod.norm() < 1e-10);
        let area = double_integral(|_, _| c(1.0), &g);
        // fourth order at the ends: the error scales like Δ⁴
        assert_relative_eq!(area.re, 16.0, max_relative = 1e-6);
    }

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        let (x, w) = gauss_legendre(7);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert_relative_eq!(s, 2.0 / 13.0, max_relative = 1e-13);
        assert_relative_eq!(w.iter().sum::<f64>(), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn node_table_matches_callable_route() {
        let g = GridSpec::default().build(1.0).unwrap();
        let f = |k: f64| Complex64::new((-(k - 1.0).powi(2) * 400.0).exp(), 0.0) * Complex64::from_polar(1.0, -3.0 * k);
        let vals: Vec<Complex64> = g.nodes.iter().map(|&k| f(k)).collect();
        for i in [200usize, 250, 300] {
            let table = pv_on_node(&g, &vals, i, g.lower()).unwrap();
            let direct = pv_integrate(&PvIntegrand { regular_part: f, pole: g.nodes[i] }, &g).unwrap().total();
            assert!((table - direct).norm() < 1e-6 * direct.norm().max(1e-3), "{i}: {table} {direct}");
        }
    }

    proptest! {
        #[test]
        fn weights_integrate_linear_accurately(a in -5.0f64..0.0, len in 0.5f64..20.0, c0 in -2.0f64..2.0) {
            let b = a + len;
            let g = SinhGrid::on_interval(a + 0.3 * len, 0.01, 0.05, a, b).unwrap();
            prop_assert!(g.nodes.windows(2).all(|w| w[1] > w[0]));
            let s = g.integrate_real(|x| 1.0 + c0 * x);
            let want = len + 0.5 * c0 * (b * b - a * a);
            prop_assert!((s - want).abs() < 1e-3 * want.abs().max(1.0));
        }
    }
}
