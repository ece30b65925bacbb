//! Classical Jacobi and Chebyshev polynomials and rising factorials.
//!
//! Jacobi polynomials use the classical normalization
//! `P_n^{(a,b)}(1) = (a+1)_n / n!`.

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Exponents `(alpha, beta)` of the weight `(1-x)^alpha (1+x)^beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JacobiParams {
    pub alpha: f64,
    pub beta: f64,
}

impl JacobiParams {
    /// The first-kind Chebyshev weight, `alpha = beta = -1/2`.
    pub const CHEBYSHEV: JacobiParams = JacobiParams {
        alpha: -0.5,
        beta: -0.5,
    };

    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha.is_finite() && beta.is_finite()) || alpha <= -1.0 || beta <= -1.0 {
            return Err(Error::InvalidParams(format!(
                "need alpha > -1 and beta > -1, got alpha = {alpha}, beta = {beta}"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn is_chebyshev(&self) -> bool {
        self.alpha == -0.5 && self.beta == -0.5
    }

    /// `(alpha + k, beta + k)`, the parameters of the k-th derivative family.
    pub fn raised(&self, k: u32) -> Self {
        Self {
            alpha: self.alpha + k as f64,
            beta: self.beta + k as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyValue {
    pub value: f64,
    pub derivative: Option<f64>,
}

/// Rising factorial `(x)_n = x (x+1) ... (x+n-1)`, with `(x)_0 = 1`.
///
/// Fails with [`Error::Range`] once the product leaves the f64 range; use
/// [`ln_pochhammer`] there.
pub fn pochhammer(x: f64, n: u32) -> Result<f64> {
    let mut acc = 1.0;
    for k in 0..n {
        acc *= x + k as f64;
    }
    if acc.is_finite() {
        Ok(acc)
    } else {
        Err(Error::Range { x, n })
    }
}

/// `ln (x)_n` for `x > 0`.
pub fn ln_pochhammer(x: f64, n: u32) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("ln_pochhammer needs x > 0, got {x}")));
    }
    // Direct log-sum is more accurate than a difference of ln-gammas while
    // the term count is small.
    if n <= 64 {
        Ok((0..n).map(|k| (x + k as f64).ln()).sum())
    } else {
        Ok(ln_gamma(x + n as f64) - ln_gamma(x))
    }
}

/// Values `P_0(x), ..., P_{n_max}(x)` from the three-term recurrence.
pub fn jacobi_sequence(params: JacobiParams, x: f64, n_max: usize) -> Vec<f64> {
    let JacobiParams { alpha: a, beta: b } = params;
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(1.0);
    if n_max == 0 {
        return out;
    }
    out.push((a + 1.0) + 0.5 * (a + b + 2.0) * (x - 1.0));
    let ab2 = a * a - b * b;
    for n in 2..=n_max {
        let nf = n as f64;
        let s = 2.0 * nf + a + b;
        let c1 = 2.0 * nf * (nf + a + b) * (s - 2.0);
        let c2 = (s - 1.0) * ab2;
        let c3 = (s - 2.0) * (s - 1.0) * s;
        let c4 = 2.0 * (nf + a - 1.0) * (nf + b - 1.0) * s;
        let p = ((c2 + c3 * x) * out[n - 1] - c4 * out[n - 2]) / c1;
        out.push(p);
    }
    out
}

/// Endpoint values `P_n(1) = (alpha+1)_n / n!` for `n = 0..=n_max`, by running ratio.
pub fn jacobi_endpoint_sequence(params: JacobiParams, n_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    let mut v = 1.0;
    out.push(v);
    for n in 1..=n_max {
        v *= (params.alpha + n as f64) / n as f64;
        out.push(v);
    }
    out
}

/// `P_n^{(alpha,beta)}(x)` by the classical recurrence. Evaluates for any
/// real `x`; the intended domain is `[-1, 1]`.
pub fn jacobi_eval(params: JacobiParams, n: usize, x: f64) -> PolyValue {
    PolyValue {
        value: *jacobi_sequence(params, x, n).last().unwrap(),
        derivative: None,
    }
}

/// As [`jacobi_eval`], also filling the derivative from
/// `d/dx P_n^{(a,b)} = (n+a+b+1)/2 * P_{n-1}^{(a+1,b+1)}`.
pub fn jacobi_eval_with_derivative(params: JacobiParams, n: usize, x: f64) -> PolyValue {
    let value = jacobi_eval(params, n, x).value;
    let derivative = if n == 0 {
        0.0
    } else {
        let scale = 0.5 * (n as f64 + params.alpha + params.beta + 1.0);
        scale * jacobi_eval(params.raised(1), n - 1, x).value
    };
    PolyValue {
        value,
        derivative: Some(derivative),
    }
}

/// First-kind Chebyshev `T_n(x)`: trigonometric form inside `(-1,1)`,
/// limit values at the endpoints.
pub fn chebyshev_t(n: u32, x: f64) -> f64 {
    if x >= 1.0 {
        1.0
    } else if x <= -1.0 {
        if n % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    } else {
        (n as f64 * x.acos()).cos()
    }
}

/// Second-kind Chebyshev `U_n(x)` for `n >= -1`, with `U_{-1} = 0`.
pub fn chebyshev_u(n: i64, x: f64) -> f64 {
    assert!(n >= -1, "chebyshev_u defined for n >= -1");
    if n == -1 {
        return 0.0;
    }
    let m = (n + 1) as f64;
    if x >= 1.0 {
        m
    } else if x <= -1.0 {
        if n % 2 == 0 {
            m
        } else {
            -m
        }
    } else {
        let theta = x.acos();
        let s = theta.sin();
        if s == 0.0 {
            if x > 0.0 || n % 2 == 0 { m } else { -m }
        } else {
            (m * theta).sin() / s
        }
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximizes `|f|` on `[lo, hi]` by golden-section search.
fn golden_max_abs<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = f(c).abs();
    let mut fd = f(d).abs();
    for _ in 0..200 {
        if (hi - lo).abs() <= 1e-14 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c).abs();
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d).abs();
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Estimates `sup_{[-1,1]} |f|` for a polynomial of degree `n`.
///
/// Scans a Chebyshev-Lobatto grid of `8(n+1)+1` points (endpoints
/// included), then refines around the best grid point by golden-section
/// search. Every returned value is an attained `|f(x)|`, so the estimate
/// never exceeds the true sup norm.
pub fn sup_norm_estimate<F: Fn(f64) -> f64>(f: F, n: usize) -> f64 {
    let g = 8 * (n + 1) + 1;
    let grid: Vec<f64> = (0..g)
        .map(|k| (std::f64::consts::PI * k as f64 / (g - 1) as f64).cos())
        .collect();
    refine_on_grid(&f, &grid)
}

pub(crate) fn refine_on_grid<F: Fn(f64) -> f64>(f: &F, grid: &[f64]) -> f64 {
    let (best_k, best) = grid
        .iter()
        .enumerate()
        .map(|(k, &x)| (k, f(x).abs()))
        .fold((0, f64::NEG_INFINITY), |acc, v| if v.1 > acc.1 { v } else { acc });
    refine_around(f, grid, best_k, best)
}

/// Golden-section refinement inside the grid cells adjacent to `k`.
pub(crate) fn refine_around<F: Fn(f64) -> f64>(f: &F, grid: &[f64], k: usize, grid_best: f64) -> f64 {
    let left = grid[k.saturating_sub(1)];
    let right = grid[(k + 1).min(grid.len() - 1)];
    let (lo, hi) = if left < right { (left, right) } else { (right, left) };
    if hi <= lo {
        return grid_best;
    }
    let (_, refined) = golden_max_abs(f, lo, hi);
    grid_best.max(refined)
}
