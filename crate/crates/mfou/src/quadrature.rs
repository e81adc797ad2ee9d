//! Quadrature kernels: fixed Gauss-Legendre panels, an adaptive
//! Gauss-Kronrod integrator, and the graded Fourier-coefficient grid used by
//! the Toeplitz builders.
//!
//! The Fourier grid is deterministic and depends only on the largest lag and
//! the grading floor, never on the model parameters. Symbol derivatives
//! integrated on the same grid are therefore exact derivatives of the
//! integrated symbol, which is what makes the score/finite-difference
//! equivalence tests sharp.

use crate::error::{Error, Result};
use crate::par;

/// 16-point Gauss-Legendre rule on [-1, 1]: positive abscissae and weights.
const GL16: [(f64, f64); 8] = [
    (0.09501250983763744, 0.1894506104550685),
    (0.2816035507792589, 0.18260341504492358),
    (0.45801677765722737, 0.16915651939500254),
    (0.6178762444026438, 0.14959598881657674),
    (0.755404408355003, 0.12462897125553388),
    (0.8656312023878318, 0.09515851168249279),
    (0.9445750230732326, 0.062253523938647894),
    (0.9894009349916499, 0.027152459411754096),
];

/// 8-point Gauss-Legendre rule on [-1, 1], used as the embedded error probe.
const GL8: [(f64, f64); 4] = [
    (0.1834346424956498, 0.362683783378362),
    (0.525532409916329, 0.31370664587788727),
    (0.7966664774136267, 0.22238103445337448),
    (0.9602898564975363, 0.10122853629037626),
];

/// Integrates `f` over `[a, b]` with the 16-point Gauss rule.
pub fn gl16<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let mut acc = 0.0;
    for &(x, w) in &GL16 {
        acc += w * (f(c + hw * x) + f(c - hw * x));
    }
    acc * hw
}

fn gl8<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let mut acc = 0.0;
    for &(x, w) in &GL8 {
        acc += w * (f(c + hw * x) + f(c - hw * x));
    }
    acc * hw
}

/// Nodes and weights of the 16-point rule mapped onto `[a, b]`.
pub(crate) fn gl_nodes(a: f64, b: f64) -> [(f64, f64); 16] {
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let mut out = [(0.0, 0.0); 16];
    for (i, &(x, w)) in GL16.iter().enumerate() {
        out[2 * i] = (c + hw * x, w * hw);
        out[2 * i + 1] = (c - hw * x, w * hw);
    }
    out
}

/// 16-point rule applied to a vector-valued integrand.
pub(crate) fn gl16_array<const N: usize>(f: &dyn Fn(f64) -> [f64; N], a: f64, b: f64) -> [f64; N] {
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let mut acc = [0.0; N];
    for &(x, w) in &GL16 {
        let p = f(c + hw * x);
        let m = f(c - hw * x);
        for i in 0..N {
            acc[i] += w * (p[i] + m[i]);
        }
    }
    for v in acc.iter_mut() {
        *v *= hw;
    }
    acc
}

/// 8-point rule applied to a vector-valued integrand.
pub(crate) fn gl8_array<const N: usize>(f: &dyn Fn(f64) -> [f64; N], a: f64, b: f64) -> [f64; N] {
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let mut acc = [0.0; N];
    for &(x, w) in &GL8 {
        let p = f(c + hw * x);
        let m = f(c - hw * x);
        for i in 0..N {
            acc[i] += w * (p[i] + m[i]);
        }
    }
    for v in acc.iter_mut() {
        *v *= hw;
    }
    acc
}

/// 15-point Kronrod abscissae (QUADPACK), paired with Kronrod weights; the
/// odd entries are the embedded 7-point Gauss nodes with their Gauss weights.
const K15_X: [f64; 8] = [
    0.9914553711208126,
    0.9491079123427585,
    0.8648644233597691,
    0.7415311855993945,
    0.5860872354676911,
    0.4058451513773972,
    0.20778495500789848,
    0.0,
];
const K15_W: [f64; 8] = [
    0.022935322010529224,
    0.06309209262997856,
    0.10479001032225019,
    0.14065325971552592,
    0.1690047266392679,
    0.19035057806478542,
    0.20443294007529889,
    0.20948214108472782,
];
const G7_W: [f64; 4] = [
    0.1294849661688697,
    0.27970539148927664,
    0.3818300505051189,
    0.4179591836734694,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let mut k = 0.0;
    let mut g = 0.0;
    for i in 0..8 {
        let x = K15_X[i];
        let (fp, fm) = if x == 0.0 {
            (f(c), 0.0)
        } else {
            (f(c + hw * x), f(c - hw * x))
        };
        k += K15_W[i] * (fp + fm);
        // odd indices are the embedded 7-point Gauss nodes (center included)
        if i % 2 == 1 {
            g += G7_W[i / 2] * (fp + fm);
        }
    }
    (k * hw, (k - g).abs() * hw)
}

/// Adaptive Gauss-Kronrod integration over `[a, b]`.
///
/// Splits the worst panel until the summed error estimate falls below
/// `abs_tol + rel_tol * |integral|` or the panel budget is exhausted.
pub fn adaptive_gk<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Result<f64> {
    #[derive(Debug)]
    struct Panel {
        a: f64,
        b: f64,
        val: f64,
        err: f64,
    }
    let (val, err) = gk15(f, a, b);
    let mut panels = vec![Panel { a, b, val, err }];
    loop {
        let total: f64 = panels.iter().map(|p| p.val).sum();
        let err_sum: f64 = panels.iter().map(|p| p.err).sum();
        if err_sum <= abs_tol + rel_tol * total.abs() {
            return Ok(total);
        }
        if panels.len() >= max_panels {
            return Err(Error::QuadratureBudget { worst: err_sum });
        }
        let (worst_idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .expect("non-empty");
        let Panel { a, b, .. } = panels.swap_remove(worst_idx);
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            return Err(Error::QuadratureBudget { worst: err_sum });
        }
        let (v1, e1) = gk15(f, a, mid);
        let (v2, e2) = gk15(f, mid, b);
        panels.push(Panel { a, b: mid, val: v1, err: e1 });
        panels.push(Panel { a: mid, b, val: v2, err: e2 });
    }
}

/// Local model of an even symbol near lambda = 0, used to integrate the head
/// `[0, lambda_min]` in closed form. `PowerLog` models `a * x^e * (c0 - 2 ln x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SymbolHead {
    /// No singular structure; the head panel is integrated numerically.
    Smooth,
    /// `a * x^e` with `e > -1`.
    PowerLaw { coeff: f64, exponent: f64 },
    /// `a * x^e * (offset - 2 ln x)` with `e > -1`.
    PowerLog { coeff: f64, exponent: f64, offset: f64 },
}

impl SymbolHead {
    pub(crate) fn model_value(&self, x: f64) -> f64 {
        match *self {
            SymbolHead::Smooth => 0.0,
            SymbolHead::PowerLaw { coeff, exponent } => coeff * x.powf(exponent),
            SymbolHead::PowerLog { coeff, exponent, offset } => {
                coeff * x.powf(exponent) * (offset - 2.0 * x.ln())
            }
        }
    }

    /// Closed form of `int_0^eps model(x) dx`.
    pub(crate) fn closed_integral(&self, eps: f64) -> f64 {
        match *self {
            SymbolHead::Smooth => 0.0,
            SymbolHead::PowerLaw { coeff, exponent } => {
                coeff * eps.powf(exponent + 1.0) / (exponent + 1.0)
            }
            SymbolHead::PowerLog { coeff, exponent, offset } => {
                let e1 = exponent + 1.0;
                let p = eps.powf(e1);
                // int x^e dx = eps^(e+1)/(e+1);  int x^e ln x dx = eps^(e+1) (ln eps - 1/(e+1))/(e+1)
                coeff * (offset * p / e1 - 2.0 * p * (eps.ln() - 1.0 / e1) / e1)
            }
        }
    }
}

/// Deterministic panel grid on `(lambda_min, pi]`: dyadic grading toward the
/// origin, each dyadic panel subdivided so the worst-lag oscillation
/// `j_max * width` stays under the phase budget of the 16-point rule.
#[derive(Debug, Clone)]
pub struct FourierGrid {
    pub(crate) nodes: Vec<f64>,
    pub(crate) weights: Vec<f64>,
    /// Start of the analytic head interval `[0, lambda_min]`.
    pub(crate) lambda_min: f64,
    /// Panel boundaries of the dyadic backbone (for the error probe).
    panels: Vec<(f64, f64)>,
}

/// Grading floor: panels shrink dyadically down to this width.
pub const LAMBDA_MIN: f64 = 1e-10;
/// Largest phase `j * width` allowed on one 16-point panel.
const OSC_BUDGET: f64 = 8.0;

impl FourierGrid {
    pub fn for_max_lag(j_max: usize) -> Self {
        Self::with_floor(j_max, LAMBDA_MIN)
    }

    pub fn with_floor(j_max: usize, lambda_min: f64) -> Self {
        let mut bounds = vec![std::f64::consts::PI];
        loop {
            let next = bounds.last().unwrap() * 0.5;
            if next <= lambda_min {
                break;
            }
            bounds.push(next);
        }
        bounds.push(lambda_min);
        bounds.reverse(); // ascending: lambda_min .. pi

        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut panels = Vec::new();
        let jm = j_max.max(1) as f64;
        for w in bounds.windows(2) {
            let (a, b) = (w[0], w[1]);
            panels.push((a, b));
            let n_sub = ((b - a) * jm / OSC_BUDGET).ceil().max(1.0) as usize;
            let width = (b - a) / n_sub as f64;
            for s in 0..n_sub {
                let sa = a + s as f64 * width;
                let c = sa + 0.5 * width;
                let hw = 0.5 * width;
                for &(x, wt) in &GL16 {
                    nodes.push(c + hw * x);
                    weights.push(wt * hw);
                    nodes.push(c - hw * x);
                    weights.push(wt * hw);
                }
            }
        }
        FourierGrid {
            nodes,
            weights,
            lambda_min,
            panels,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Dyadic backbone panels `(a, b)` in ascending order.
    pub(crate) fn backbone(&self) -> &[(f64, f64)] {
        &self.panels
    }

    /// Checks that the dyadic backbone resolves the (non-oscillatory) symbol:
    /// each backbone panel is compared against the embedded 8-point rule.
    /// Returns the worst absolute discrepancy.
    pub fn probe_symbol<F>(&self, f: &F) -> f64
    where
        F: Fn(f64) -> f64 + Sync,
    {
        let errs = par::map_collect(self.panels.len(), |i| {
            let (a, b) = self.panels[i];
            (gl16(f, a, b) - gl8(f, a, b)).abs()
        });
        errs.into_iter().fold(0.0, f64::max)
    }

    /// Cosine moments of tabulated symbol values against every lag
    /// `0..=j_max`: `out[j] = sum_i w_i v_i cos(j x_i)`.
    ///
    /// Each lag is an independent fixed-order sum, so the result does not
    /// depend on the thread count.
    pub fn cosine_moments(&self, values: &[f64], j_max: usize) -> Vec<f64> {
        assert_eq!(values.len(), self.nodes.len());
        let weighted: Vec<f64> = values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| v * w)
            .collect();
        let nodes = &self.nodes;
        par::map_collect(j_max + 1, |j| cos_moment(nodes, &weighted, j as f64))
    }
}

/// Chunked dot of `w_i * cos(j x_i)` with a fixed summation order.
fn cos_moment(nodes: &[f64], weighted: &[f64], j: f64) -> f64 {
    const CHUNK: usize = 64;
    let mut total = 0.0;
    let mut i = 0;
    while i < nodes.len() {
        let hi = (i + CHUNK).min(nodes.len());
        let mut acc = 0.0;
        for k in i..hi {
            acc += weighted[k] * (j * nodes[k]).cos();
        }
        total += acc;
        i = hi;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl16_exact_on_polynomials() {
        // degree-31 polynomial integrated exactly
        let f = |x: f64| x.powi(10) - 3.0 * x.powi(5) + 2.0;
        let exact = 2.0 / 11.0 + 4.0; // over [-1, 1]
        assert!((gl16(&f, -1.0, 1.0) - exact).abs() < 1e-14);
    }

    #[test]
    fn adaptive_gk_log_singularity() {
        // int_0^1 ln(x) dx = -1
        let v = adaptive_gk(&|x: f64| x.ln(), 0.0, 1.0, 1e-12, 1e-12, 2000).unwrap();
        assert!((v + 1.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn adaptive_gk_budget_error() {
        // absurd tolerance on an oscillatory integrand with a tiny budget
        let r = adaptive_gk(&|x: f64| (500.0 * x).sin(), 0.0, 10.0, 1e-300, 0.0, 4);
        assert!(matches!(r, Err(Error::QuadratureBudget { .. })));
    }

    #[test]
    fn head_closed_forms() {
        let eps = 1e-4;
        let pl = SymbolHead::PowerLaw { coeff: 2.0, exponent: -0.6 };
        let num = adaptive_gk(&|x| pl.model_value(x), 1e-300, eps, 0.0, 1e-13, 4000).unwrap();
        assert!((pl.closed_integral(eps) - num).abs() < 1e-10 * num.abs());

        let plog = SymbolHead::PowerLog { coeff: 0.7, exponent: -0.3, offset: 1.9 };
        let num = adaptive_gk(&|x| plog.model_value(x), 1e-300, eps, 0.0, 1e-13, 4000).unwrap();
        assert!((plog.closed_integral(eps) - num).abs() < 1e-10 * num.abs());
    }

    #[test]
    fn grid_covers_domain_without_zero_node() {
        let g = FourierGrid::for_max_lag(100);
        assert!(g.nodes.iter().all(|&x| x > 0.0 && x <= std::f64::consts::PI));
        let total: f64 = g.weights.iter().sum();
        assert!((total - (std::f64::consts::PI - g.lambda_min)).abs() < 1e-12);
    }

    #[test]
    fn cosine_moments_match_direct_integrals() {
        // g(x) = 2 cos(x): (1/pi) int_0^pi g cos(jx) = delta_{j,1}
        let g = FourierGrid::for_max_lag(16);
        let vals: Vec<f64> = g.nodes.iter().map(|&x| 2.0 * x.cos()).collect();
        let m = g.cosine_moments(&vals, 16);
        for (j, v) in m.iter().enumerate() {
            let gamma = v / std::f64::consts::PI;
            let expect = if j == 1 { 1.0 } else { 0.0 };
            assert!((gamma - expect).abs() < 1e-10, "lag {j}: {gamma}");
        }
    }
}
