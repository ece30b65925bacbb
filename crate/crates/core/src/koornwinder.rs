//! Jacobi polynomials with a point mass attached at `x = 1`.
//!
//! For weight `N >= 0` the polynomials
//!
//! ```text
//! P_n^{a,b,N}(x) = ((a+b+2)_{n-1} / n!) A_n [ -N (1+x) d/dx + B_n ] P_n^{(a,b)}(x)
//! A_n = (a+1)_n / (b+1)_n
//! B_n = (b+1)_n n! / ((a+1)_n (a+b+2)_{n-1}) + n (n+a+b+1) N / (a+1)
//! ```
//!
//! are orthogonal for `dψ = (C (1-x)^a (1+x)^b dx + N δ_1) / (N+1)`.
//! We work with the endpoint-normalized `Q_n = n! P_n^{a,b,N} / (a+1)_n`,
//! so that `Q_n(1) = 1`.
//!
//! Dividing through by the endpoint values gives the form used for
//! evaluation,
//!
//! ```text
//! Q_n(x) = (1 + N D_n) R_n(x) - N D_n (1+x)/2 S_{n-1}(x)
//! D_n    = (a+b+2)_n (a+2)_{n-1} / ((b+1)_n (n-1)!)
//! ```
//!
//! where `R_n` and `S_{n-1}` are `P_n^{(a,b)}` and `P_{n-1}^{(a+1,b+1)}`
//! scaled to equal 1 at `x = 1`. Both are bounded by polynomial growth, so
//! no factorials are ever formed.

use serde::Serialize;
use statrs::function::beta::ln_beta;

use crate::error::{Error, Result};
use crate::orthopoly::{
    chebyshev_t, chebyshev_u, jacobi_endpoint_sequence, jacobi_eval_with_derivative,
    jacobi_sequence, ln_pochhammer, JacobiParams,
};
use crate::spectral::QuadratureRule;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KoornwinderParams {
    pub jacobi: JacobiParams,
    /// Mass `N` attached at `x = 1` before renormalizing to a probability measure.
    pub big_n: f64,
}

impl KoornwinderParams {
    pub fn new(alpha: f64, beta: f64, big_n: f64) -> Result<Self> {
        let jacobi = JacobiParams::new(alpha, beta)?;
        if !(big_n.is_finite() && big_n >= 0.0) {
            return Err(Error::InvalidParams(format!("need N >= 0, got {big_n}")));
        }
        Ok(Self { jacobi, big_n })
    }

    pub fn chebyshev(big_n: f64) -> Result<Self> {
        Self::new(-0.5, -0.5, big_n)
    }

    pub fn alpha(&self) -> f64 {
        self.jacobi.alpha
    }

    pub fn beta(&self) -> f64 {
        self.jacobi.beta
    }

    pub fn is_chebyshev(&self) -> bool {
        self.jacobi.is_chebyshev()
    }

    /// Mass of the atom at 1 in the normalized measure.
    pub fn atom_mass(&self) -> f64 {
        self.big_n / (self.big_n + 1.0)
    }
}

/// `P_n^{a,b,N}(x)` straight from the defining transform.
///
/// Prefactors go through the log domain; for `n = 0` the constant 1 is
/// returned, since `(a+b+2)_{-1}` has no agreed value.
pub fn koornwinder_raw(params: KoornwinderParams, n: u32, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let (a, b, big_n) = (params.alpha(), params.beta(), params.big_n);
    let lp = |y: f64, k: u32| ln_pochhammer(y, k).expect("positive Pochhammer base");
    let ln_fact = lp(1.0, n);
    let ln_ab = lp(a + b + 2.0, n - 1);
    let ln_a = lp(a + 1.0, n);
    let ln_b = lp(b + 1.0, n);

    let prefactor = (ln_ab - ln_fact + ln_a - ln_b).exp();
    let nf = n as f64;
    let b_n = (ln_b + ln_fact - ln_a - ln_ab).exp() + nf * (nf + a + b + 1.0) * big_n / (a + 1.0);

    let pv = jacobi_eval_with_derivative(params.jacobi, n as usize, x);
    prefactor * (-big_n * (1.0 + x) * pv.derivative.unwrap() + b_n * pv.value)
}

/// `Q_n(x)` and `Q_n'(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QValue {
    pub value: f64,
    pub derivative: f64,
}

/// `Q_0(x), ..., Q_{n_max}(x)` together with derivatives, in one O(n_max) sweep.
pub fn q_sequence(params: KoornwinderParams, x: f64, n_max: usize) -> Vec<QValue> {
    let (a, b, big_n) = (params.alpha(), params.beta(), params.big_n);
    let normalized = |p: JacobiParams, len: usize| -> Vec<f64> {
        let vals = jacobi_sequence(p, x, len);
        let ends = jacobi_endpoint_sequence(p, len);
        vals.iter().zip(&ends).map(|(v, e)| v / e).collect()
    };
    let r = normalized(params.jacobi, n_max);
    let s = normalized(params.jacobi.raised(1), n_max.saturating_sub(1));
    let s2 = normalized(params.jacobi.raised(2), n_max.saturating_sub(2));

    let mut out = Vec::with_capacity(n_max + 1);
    out.push(QValue {
        value: 1.0,
        derivative: 0.0,
    });
    let mut d_n = (a + b + 2.0) / (b + 1.0);
    for n in 1..=n_max {
        let nf = n as f64;
        if n > 1 {
            let m = nf - 1.0;
            d_n *= (a + b + 2.0 + m) * (a + 1.0 + m) / ((b + 1.0 + m) * m);
        }
        let rn = r[n];
        let rn_prime = nf * (nf + a + b + 1.0) / (2.0 * (a + 1.0)) * s[n - 1];
        let sm = s[n - 1];
        let sm_prime = if n >= 2 {
            (nf - 1.0) * (nf + a + b + 2.0) / (2.0 * (a + 2.0)) * s2[n - 2]
        } else {
            0.0
        };
        let nd = big_n * d_n;
        let half = 0.5 * (1.0 + x);
        out.push(QValue {
            value: (1.0 + nd) * rn - nd * half * sm,
            derivative: (1.0 + nd) * rn_prime - nd * (0.5 * sm + half * sm_prime),
        });
    }
    out
}

/// Endpoint-normalized `Q_n(x)`; exactly 1 at `x = 1`.
pub fn q_eval(params: KoornwinderParams, n: usize, x: f64) -> f64 {
    if x == 1.0 {
        return 1.0;
    }
    q_sequence(params, x, n)[n].value
}

/// Closed form for `alpha = beta = -1/2`:
/// `Q_n(x) = -N (x+1) U_{n-1}(x) + (1 + 2nN) T_n(x)`.
pub fn q_chebyshev(big_n: f64, n: u32, x: f64) -> f64 {
    -big_n * (x + 1.0) * chebyshev_u(n as i64 - 1, x)
        + (1.0 + 2.0 * n as f64 * big_n) * chebyshev_t(n, x)
}

/// Orthogonality measure of the `Q_n`: a Jacobi density on `(-1,1)` carrying
/// mass `1/(N+1)` and an atom of mass `N/(N+1)` at 1.
///
/// The atom is never folded into a quadrature rule; integrals are always
/// "continuous part by quadrature + atom by evaluation".
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralMeasure {
    pub params: KoornwinderParams,
    /// Normalizer making `C (1-x)^a (1+x)^b` a probability density on `(-1,1)`.
    pub normalizer: f64,
    pub continuous_mass: f64,
    pub atom_mass: f64,
    pub atom_location: f64,
}

impl SpectralMeasure {
    pub fn density(&self, x: f64) -> f64 {
        if x <= -1.0 || x >= 1.0 {
            return 0.0;
        }
        let (a, b) = (self.params.alpha(), self.params.beta());
        self.continuous_mass * self.normalizer * (1.0 - x).powf(a) * (1.0 + x).powf(b)
    }

    /// `∫ f dψ` with the continuous part taken from `rule`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, rule: &QuadratureRule, f: F) -> f64 {
        rule.integrate(&f) + self.atom_mass * f(self.atom_location)
    }
}

pub fn spectral_measure(params: KoornwinderParams) -> SpectralMeasure {
    let (a, b) = (params.alpha(), params.beta());
    let ln_c = -((a + b + 1.0) * std::f64::consts::LN_2 + ln_beta(a + 1.0, b + 1.0));
    SpectralMeasure {
        params,
        normalizer: ln_c.exp(),
        continuous_mass: 1.0 / (params.big_n + 1.0),
        atom_mass: params.atom_mass(),
        atom_location: 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orthopoly::{jacobi_eval, pochhammer};
    use crate::spectral::build_rule;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cheb(n: f64) -> KoornwinderParams {
        KoornwinderParams::chebyshev(n).unwrap()
    }

    #[test]
    fn raw_examples() {
        let p = KoornwinderParams::new(0.3, 0.7, 2.0).unwrap();
        assert_eq!(koornwinder_raw(p, 0, 0.4), 1.0);
        assert_relative_eq!(koornwinder_raw(cheb(1.0), 1, 1.0), 0.5, max_relative = 1e-14);
    }

    #[test]
    fn zero_mass_reduces_to_legendre() {
        let p = KoornwinderParams::new(0.0, 0.0, 0.0).unwrap();
        for k in 0..20 {
            let x = -0.95 + 0.1 * k as f64;
            let want = jacobi_eval(p.jacobi, 2, x).value;
            assert_relative_eq!(koornwinder_raw(p, 2, x), want, max_relative = 1e-12);
            assert_relative_eq!(q_eval(p, 2, x), want, max_relative = 1e-12);
        }
    }

    #[test]
    fn q_examples() {
        let p = cheb(1.0);
        for n in 0..10 {
            assert_eq!(q_eval(p, n, 1.0), 1.0);
        }
        assert_relative_eq!(q_eval(p, 1, 0.0), -1.0, epsilon = 1e-14);
        assert_relative_eq!(q_eval(p, 2, 0.5), -4.0, epsilon = 1e-13);
    }

    #[test]
    fn q_chebyshev_examples() {
        for &x in &[-1.0, -0.3, 0.0, 0.6, 1.0] {
            assert_relative_eq!(q_chebyshev(1.0, 1, x), 2.0 * x - 1.0, epsilon = 1e-14);
        }
        for &n in &[0.0, 0.1, 1.0, 7.5] {
            for k in 0..12 {
                assert_relative_eq!(q_chebyshev(n, k, 1.0), 1.0, epsilon = 1e-12);
            }
        }
        // N = 0 collapses to T_4(x) = 8x^4 - 8x^2 + 1.
        assert_relative_eq!(q_chebyshev(0.0, 4, 0.2), 0.6928, epsilon = 1e-14);
    }

    #[test]
    fn normalized_form_matches_literal_transform() {
        for &(a, b, n_mass) in &[(-0.5, -0.5, 1.0), (0.0, 0.0, 2.0), (0.5, -0.25, 1.0), (1.5, 2.0, 0.3)] {
            let p = KoornwinderParams::new(a, b, n_mass).unwrap();
            for n in 1..=50u32 {
                let scale = pochhammer(1.0, n).unwrap() / pochhammer(a + 1.0, n).unwrap();
                for k in 0..7 {
                    let x = -0.9 + 0.3 * k as f64;
                    let q = q_eval(p, n as usize, x);
                    let lit = scale * koornwinder_raw(p, n, x);
                    assert!((q - lit).abs() <= 1e-10 * q.abs().max(1.0), "a={a} b={b} n={n} x={x}: {q} vs {lit}");
                }
            }
        }
    }

    #[test]
    fn endpoint_limit_is_continuous() {
        for &(a, b) in &[(-0.5, -0.5), (0.5, -0.25), (2.0, 0.0)] {
            let p = KoornwinderParams::new(a, b, 1.0).unwrap();
            let at_one = q_sequence(p, 1.0, 30);
            for n in 0..=30 {
                let near = q_eval(p, n, 1.0 - 1e-12);
                let slope = at_one[n].derivative.abs();
                assert!((near - 1.0).abs() < 2e-12 * slope + 1e-10, "n={n}: {near}");
            }
        }
    }

    #[test]
    fn measure_examples() {
        let m = spectral_measure(cheb(1.0));
        for &x in &[-0.7f64, 0.0, 0.4] {
            let want = 1.0 / (2.0 * std::f64::consts::PI * (1.0 - x * x).sqrt());
            assert_relative_eq!(m.density(x), want, max_relative = 1e-13);
        }
        assert_eq!(m.atom_mass, 0.5);

        let m = spectral_measure(KoornwinderParams::new(0.0, 0.0, 0.0).unwrap());
        assert_relative_eq!(m.density(0.3), 0.5, max_relative = 1e-14);
        assert_eq!(m.atom_mass, 0.0);

        for &(a, b, n) in &[(-0.5, -0.5, 1.0), (0.0, 0.0, 0.0), (0.5, -0.25, 3.0)] {
            let p = KoornwinderParams::new(a, b, n).unwrap();
            let m = spectral_measure(p);
            let rule = build_rule(p, 0).unwrap();
            assert!((m.integrate(&rule, |_| 1.0) - 1.0).abs() < 1e-12);
        }
    }

    fn gram_check(p: KoornwinderParams, n_max: usize) {
        let m = spectral_measure(p);
        let rule = build_rule(p, 2 * n_max).unwrap();
        let values: Vec<Vec<QValue>> = rule.nodes.iter().map(|&x| q_sequence(p, x, n_max)).collect();
        let gram = |i: usize, k: usize| -> f64 {
            let cont: f64 = rule.weights.iter().zip(&values).map(|(w, q)| w * q[i].value * q[k].value).sum();
            cont + m.atom_mass
        };
        let diag: Vec<f64> = (0..=n_max).map(|i| gram(i, i)).collect();
        for i in 0..=n_max {
            for k in 0..i {
                let rel = gram(i, k).abs() / (diag[i] * diag[k]).sqrt();
                assert!(rel < 1e-9, "{p:?} G[{i},{k}] rel {rel:e}");
            }
        }
    }

    #[test]
    fn gram_matrix_is_diagonal() {
        for &(a, b) in &[(-0.5, -0.5), (0.0, 0.0), (0.5, -0.25)] {
            for &n in &[0.0, 1.0] {
                gram_check(KoornwinderParams::new(a, b, n).unwrap(), 30);
            }
        }
    }

    #[test]
    fn squared_norm_of_q1() {
        // ∫ (2x-1)^2 dψ for N = 1: arcsine part 3 halved, plus atom 1/2
        let p = cheb(1.0);
        let m = spectral_measure(p);
        let rule = build_rule(p, 2).unwrap();
        let v = m.integrate(&rule, |x| (2.0 * x - 1.0).powi(2));
        assert_relative_eq!(v, 2.0, max_relative = 1e-14);
    }

    proptest! {
        #[test]
        fn chebyshev_specialization(x in -1.0f64..=1.0, n in 0usize..=50, which in 0usize..3) {
            let big_n = [0.1, 1.0, 10.0][which];
            let closed = q_chebyshev(big_n, n as u32, x);
            let general = q_eval(cheb(big_n), n, x);
            prop_assert!((closed - general).abs() < 1e-10 * (1.0 + closed.abs()), "{} vs {}", closed, general);
        }

        #[test]
        fn derivative_matches_finite_difference(x in -0.95f64..0.95, n in 1usize..=25) {
            let p = KoornwinderParams::new(0.5, -0.25, 1.0).unwrap();
            let h = 1e-6;
            let d = q_sequence(p, x, n)[n].derivative;
            let fd = (q_eval(p, n, x + h) - q_eval(p, n, x - h)) / (2.0 * h);
            prop_assert!((d - fd).abs() <= 1e-5 * d.abs().max(1.0));
        }
    }
}
