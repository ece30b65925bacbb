//! Tridiagonal recurrence coefficients of the `Q_n`, the affine shift that
//! turns them into transition probabilities, and the reversibility weights.
//!
//! `Q_n` satisfies `p_n Q_{n+1} + r_n Q_n + q_n Q_{n-1} = x Q_n` with
//! `p_n + r_n + q_n = 1` (since every `Q_n(1) = 1`). The diagonal can be
//! negative; `P_λ = (H + λ I) / (1 + λ)` is stochastic once
//! `λ >= sup_n (-r_n)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::koornwinder::{q_sequence, KoornwinderParams, QValue};
use crate::sum::NeumaierSum;

/// Shifted entries down to this value are rounding noise and clip to 0.
pub const NEGATIVE_ENTRY_TOL: f64 = 1e-14;

/// Condition number beyond which the 3x3 coefficient system is rejected.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// Sites scanned by [`lambda_min`] outside the Chebyshev family.
pub const LAMBDA_SCAN: usize = 2048;

/// Minimum truncation used to estimate `rho` when no closed-form tail exists.
pub const RHO_MIN_SITES: usize = 4096;

/// Relative tail mass above which a truncated `π`-sum is not accepted as a
/// stationary normalization.
pub const STATIONARY_TAIL_TOL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecurrenceCoeffs {
    pub site: usize,
    pub q: f64,
    pub r: f64,
    pub p: f64,
    pub shifted: bool,
}

impl RecurrenceCoeffs {
    pub fn row_sum(&self) -> f64 {
        self.p + self.r + self.q
    }
}

/// Evaluation points used for the third equation of the coefficient system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointSet {
    /// `x = 1`, `x = -1`, derivative at `x = 0`.
    Primary,
    /// `x = 1`, `x = -1`, derivative at `x = 1/2`.
    Fallback,
}

impl PointSet {
    fn derivative_point(self) -> f64 {
        match self {
            PointSet::Primary => 0.0,
            PointSet::Fallback => 0.5,
        }
    }
}

/// Closed-form coefficients for `alpha = beta = -1/2`.
pub fn coeffs_chebyshev(big_n: f64, n: usize) -> RecurrenceCoeffs {
    if n == 0 {
        return RecurrenceCoeffs {
            site: 0,
            q: 0.0,
            r: big_n / (big_n + 1.0),
            p: 1.0 / (big_n + 1.0),
            shifted: false,
        };
    }
    let nf = n as f64;
    let lo = 1.0 + (2.0 * nf - 1.0) * big_n;
    let hi = 1.0 + (2.0 * nf + 1.0) * big_n;
    RecurrenceCoeffs {
        site: n,
        q: 0.5 * hi / lo,
        r: -2.0 * big_n * big_n / (lo * hi),
        p: 0.5 * lo / hi,
        shifted: false,
    }
}

/// Samples of the `Q` sequence needed by the coefficient solver.
struct Samples {
    at_minus_one: Vec<QValue>,
    at_point: Vec<QValue>,
    x0: f64,
}

impl Samples {
    fn new(params: KoornwinderParams, n_max: usize, set: PointSet) -> Self {
        let x0 = set.derivative_point();
        Self {
            at_minus_one: q_sequence(params, -1.0, n_max + 1),
            at_point: q_sequence(params, x0, n_max + 1),
            x0,
        }
    }

    fn solve(&self, n: usize) -> Result<RecurrenceCoeffs> {
        if n == 0 {
            // p_0 Q_1(x) + r_0 = x at x = 1 and x = 0
            let q1_at_0 = if self.x0 == 0.0 {
                self.at_point[1].value
            } else {
                // Q_1 is linear: recover Q_1(0) from value and slope at x0
                self.at_point[1].value - self.x0 * self.at_point[1].derivative
            };
            let p = 1.0 / (1.0 - q1_at_0);
            return Ok(RecurrenceCoeffs {
                site: 0,
                q: 0.0,
                r: 1.0 - p,
                p,
                shifted: false,
            });
        }
        let m = &self.at_minus_one;
        let d = &self.at_point;
        let a = [
            [1.0, 1.0, 1.0],
            [m[n + 1].value, m[n].value, m[n - 1].value],
            [d[n + 1].derivative, d[n].derivative, d[n - 1].derivative],
        ];
        let rhs = [1.0, -m[n].value, d[n].value + self.x0 * d[n].derivative];
        let ([p, r, q], condition) = solve3(a, rhs);
        if !(condition.is_finite() && condition <= SINGULAR_CONDITION) {
            return Err(Error::SingularSystem { site: n, condition });
        }
        Ok(RecurrenceCoeffs {
            site: n,
            q,
            r,
            p,
            shifted: false,
        })
    }
}

/// Solves a row-equilibrated 3x3 system; returns the solution and the
/// 1-norm condition number of the equilibrated matrix.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> ([f64; 3], f64) {
    for i in 0..3 {
        let s = a[i].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if s > 0.0 {
            for v in a[i].iter_mut() {
                *v /= s;
            }
            b[i] /= s;
        }
    }
    let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    if det == 0.0 || !det.is_finite() {
        return ([f64::NAN; 3], f64::INFINITY);
    }
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
            let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
            inv[i][j] = (a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0]) / det;
        }
    }
    let norm1 = |m: &[[f64; 3]; 3]| (0..3).map(|j| (0..3).map(|i| m[i][j].abs()).sum::<f64>()).fold(0.0, f64::max);
    let condition = norm1(&a) * norm1(&inv);

    // Gaussian elimination with partial pivoting for the solve itself.
    let mut m = a;
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|k| m[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / m[i][i];
    }
    (x, condition)
}

/// Coefficients at site `n` with a fixed point set, without retry.
pub fn coeffs_general_with(params: KoornwinderParams, n: usize, set: PointSet) -> Result<RecurrenceCoeffs> {
    Samples::new(params, n, set).solve(n)
}

/// Coefficients at site `n`, from the recurrence evaluated at `x = 1`,
/// `x = -1` and its derivative at `x = 0` (falling back to `x = 1/2`).
pub fn coeffs_general(params: KoornwinderParams, n: usize) -> Result<RecurrenceCoeffs> {
    match coeffs_general_with(params, n, PointSet::Primary) {
        Err(Error::SingularSystem { .. }) => coeffs_general_with(params, n, PointSet::Fallback),
        other => other,
    }
}

/// Coefficients for sites `0..=n_max` in one pass over the `Q` samples.
pub fn coeffs_general_range(params: KoornwinderParams, n_max: usize) -> Result<Vec<RecurrenceCoeffs>> {
    let primary = Samples::new(params, n_max, PointSet::Primary);
    let mut fallback: Option<Samples> = None;
    (0..=n_max)
        .map(|n| match primary.solve(n) {
            Err(Error::SingularSystem { .. }) => fallback
                .get_or_insert_with(|| Samples::new(params, n_max, PointSet::Fallback))
                .solve(n),
            other => other,
        })
        .collect()
}

/// Unshifted coefficients for sites `0..=n_max`, closed form when available.
pub fn coefficients(params: KoornwinderParams, n_max: usize) -> Result<Vec<RecurrenceCoeffs>> {
    if params.is_chebyshev() {
        Ok((0..=n_max).map(|n| coeffs_chebyshev(params.big_n, n)).collect())
    } else {
        coeffs_general_range(params, n_max)
    }
}

/// Smallest shift making every diagonal entry nonnegative, `sup_n max(0, -r_n)`.
///
/// Closed form `2N^2/((1+N)(1+3N))` in the Chebyshev family. Otherwise the
/// first [`LAMBDA_SCAN`] sites are scanned; values below `1e-13` count as
/// zero, and the scan must show `max(0, -r_n)` non-increasing over its second
/// half or it fails with [`Error::NotStabilized`].
pub fn lambda_min(params: KoornwinderParams) -> Result<f64> {
    if params.is_chebyshev() {
        let n = params.big_n;
        return Ok(2.0 * n * n / ((1.0 + n) * (1.0 + 3.0 * n)));
    }
    lambda_min_scan(params, LAMBDA_SCAN)
}

pub fn lambda_min_scan(params: KoornwinderParams, n_scan: usize) -> Result<f64> {
    let coeffs = coeffs_general_range(params, n_scan)?;
    let deficit: Vec<f64> = coeffs
        .iter()
        .map(|c| if -c.r > 1e-13 { -c.r } else { 0.0 })
        .collect();
    let half = n_scan / 2;
    let settled = deficit[half..].windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    if !settled {
        return Err(Error::NotStabilized { n_scan });
    }
    Ok(deficit.iter().copied().fold(0.0, f64::max))
}

/// `p/(1+λ)`, `(r+λ)/(1+λ)`, `q/(1+λ)`.
pub fn shift(c: RecurrenceCoeffs, lambda: f64) -> Result<RecurrenceCoeffs> {
    let s = 1.0 + lambda;
    let mut out = RecurrenceCoeffs {
        site: c.site,
        q: c.q / s,
        r: (c.r + lambda) / s,
        p: c.p / s,
        shifted: true,
    };
    for (entry, v) in [("q", &mut out.q), ("r", &mut out.r), ("p", &mut out.p)] {
        if *v < -NEGATIVE_ENTRY_TOL {
            return Err(Error::NegativeEntry {
                site: c.site,
                entry,
                value: *v,
            });
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(out)
}

/// One chain of the family: parameters, shift and starting site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainSpec {
    pub params: KoornwinderParams,
    pub lambda: f64,
    pub origin: usize,
}

impl ChainSpec {
    /// Validates that every shifted entry is a probability; a shift below
    /// threshold is reported as [`Error::NegativeEntry`] at the first
    /// offending site.
    pub fn new(params: KoornwinderParams, lambda: f64, origin: usize) -> Result<Self> {
        if !(lambda.is_finite() && lambda > -1.0) {
            return Err(Error::InvalidParams(format!("lambda must be finite and > -1, got {lambda}")));
        }
        let threshold = lambda_min(params)?;
        if lambda < threshold {
            let scan = if params.is_chebyshev() { 8 } else { LAMBDA_SCAN };
            for c in coefficients(params, scan)? {
                shift(c, lambda)?;
            }
        }
        Ok(Self { params, lambda, origin })
    }

    /// The chain with `λ = lambda_min(params)`.
    pub fn with_min_lambda(params: KoornwinderParams, origin: usize) -> Result<Self> {
        Self::new(params, lambda_min(params)?, origin)
    }

    /// Chebyshev-family chain with `λ = lambda_min`.
    pub fn chebyshev(big_n: f64, origin: usize) -> Result<Self> {
        Self::with_min_lambda(KoornwinderParams::chebyshev(big_n)?, origin)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TailEstimate {
    /// Closed-form `Σ_{n>M} π_n`.
    Exact(f64),
    /// `π_n ≈ c n^{-s}` fitted over the last decade of sites.
    PowerLaw { mass: f64, exponent: f64 },
    /// Too few sites to fit a tail.
    Unavailable,
    /// Fitted exponent `s <= 1`: the weights are not summable.
    Divergent { exponent: f64 },
}

impl TailEstimate {
    pub fn mass(&self) -> Option<f64> {
        match *self {
            TailEstimate::Exact(m) | TailEstimate::PowerLaw { mass: m, .. } => Some(m),
            _ => None,
        }
    }
}

/// `π_0 = 1, π_{n+1} = π_n p_n / q_{n+1}` and `ρ = Σ π_n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReversibilityMeasure {
    pub values: Vec<f64>,
    /// `Σ_{n<=M} π_n`.
    pub partial_sum: f64,
    pub tail: TailEstimate,
    /// `partial_sum + tail`, infinite when the tail is divergent or unknown.
    pub rho: f64,
}

impl ReversibilityMeasure {
    pub fn truncation(&self) -> usize {
        self.values.len() - 1
    }

    /// Replaces the fitted tail by a closed form.
    pub fn with_exact_tail(mut self, tail_mass: f64) -> Self {
        self.tail = TailEstimate::Exact(tail_mass);
        self.rho = self.partial_sum + tail_mass;
        self
    }

    /// `Σ_{n>m} π_n` for `m <= M`, from the stored weights and the tail.
    pub fn tail_beyond(&self, m: usize) -> f64 {
        let tail = self.tail.mass().unwrap_or(f64::INFINITY);
        let mut s = NeumaierSum::new();
        for &v in self.values.iter().skip(m + 1) {
            s.add(v);
        }
        s.add(tail);
        s.value()
    }
}

/// Closed-form `Σ_{n>m} π_n = (1+N) / (N (1 + (2m+1) N))` for the Chebyshev
/// family with `N > 0`.
pub fn chebyshev_pi_tail(big_n: f64, m: usize) -> f64 {
    (1.0 + big_n) / (big_n * (1.0 + (2.0 * m as f64 + 1.0) * big_n))
}

/// Reversibility weights for sites `0..=up_to` from unshifted or shifted
/// coefficients (the shift cancels in `p_n / q_{n+1}`).
pub fn reversibility(coeffs: &[RecurrenceCoeffs], up_to: usize) -> Result<ReversibilityMeasure> {
    if coeffs.len() <= up_to {
        return Err(Error::Domain(format!(
            "need coefficients through site {up_to}, have {}",
            coeffs.len()
        )));
    }
    let mut values = Vec::with_capacity(up_to + 1);
    let mut pi = 1.0;
    values.push(pi);
    for n in 0..up_to {
        let (p, q) = (coeffs[n].p, coeffs[n + 1].q);
        if !(p > 0.0 && q > 0.0) {
            return Err(Error::Domain(format!("need p_{n} > 0 and q_{} > 0, got {p}, {q}", n + 1)));
        }
        pi *= p / q;
        if pi < 1e-300 {
            return Err(Error::Underflow { site: n + 1 });
        }
        values.push(pi);
    }
    let partial_sum = values.iter().copied().collect::<NeumaierSum>().value();
    let tail = fit_power_tail(&values);
    let rho = partial_sum + tail.mass().unwrap_or(f64::INFINITY);
    Ok(ReversibilityMeasure {
        values,
        partial_sum,
        tail,
        rho,
    })
}

fn fit_power_tail(values: &[f64]) -> TailEstimate {
    let m = values.len() - 1;
    if m < 20 {
        return TailEstimate::Unavailable;
    }
    let m0 = m / 10;
    let exponent = (values[m0] / values[m]).ln() / (m as f64 / m0 as f64).ln();
    if exponent <= 1.0 {
        return TailEstimate::Divergent { exponent };
    }
    // ∫_{M+1/2}^∞ c x^{-s} dx with c fitted at x = M
    let c = values[m] * (m as f64).powf(exponent);
    let mass = c * (m as f64 + 0.5).powf(1.0 - exponent) / (exponent - 1.0);
    TailEstimate::PowerLaw { mass, exponent }
}

/// `ν = π / ρ` on sites `0..=M` plus the mass beyond `M`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryDistribution {
    pub probabilities: Vec<f64>,
    pub rho: f64,
    pub tail_mass: f64,
}

impl StationaryDistribution {
    pub fn get(&self, n: usize) -> f64 {
        self.probabilities.get(n).copied().unwrap_or(0.0)
    }

    /// `Σ_{n>m} ν_n` for `m` within the stored range.
    pub fn tail_beyond(&self, m: usize) -> f64 {
        let mut s = NeumaierSum::new();
        for &v in self.probabilities.iter().skip(m + 1) {
            s.add(v);
        }
        s.add(self.tail_mass);
        s.value()
    }
}

pub fn stationary(measure: &ReversibilityMeasure) -> Result<StationaryDistribution> {
    let truncation = measure.truncation();
    let tail = match measure.tail {
        TailEstimate::Exact(t) => t,
        TailEstimate::PowerLaw { mass, .. } if mass <= STATIONARY_TAIL_TOL * measure.rho => mass,
        TailEstimate::PowerLaw { mass, .. } => {
            return Err(Error::NotPositiveRecurrent { truncation, tail: mass })
        }
        _ => {
            return Err(Error::NotPositiveRecurrent {
                truncation,
                tail: f64::INFINITY,
            })
        }
    };
    let rho = measure.rho;
    Ok(StationaryDistribution {
        probabilities: measure.values.iter().map(|v| v / rho).collect(),
        rho,
        tail_mass: tail / rho,
    })
}

/// Coefficients, shifted coefficients and weights of one chain on sites `0..=M`.
#[derive(Debug, Clone)]
pub struct Chain {
    pub spec: ChainSpec,
    pub unshifted: Vec<RecurrenceCoeffs>,
    pub shifted: Vec<RecurrenceCoeffs>,
    pub reversibility: ReversibilityMeasure,
}

impl Chain {
    /// Builds sites `0..=n_max`. Outside the Chebyshev family at least
    /// [`RHO_MIN_SITES`] sites are generated so the `ρ` tail fit is usable.
    pub fn build(spec: ChainSpec, n_max: usize) -> Result<Self> {
        let params = spec.params;
        let sites = if params.is_chebyshev() { n_max } else { n_max.max(RHO_MIN_SITES) };
        let unshifted = coefficients(params, sites)?;
        let shifted = unshifted
            .iter()
            .map(|&c| shift(c, spec.lambda))
            .collect::<Result<Vec<_>>>()?;
        let mut reversibility = reversibility(&unshifted, sites)?;
        if params.is_chebyshev() {
            reversibility = if params.big_n > 0.0 {
                reversibility.with_exact_tail(chebyshev_pi_tail(params.big_n, sites))
            } else {
                ReversibilityMeasure {
                    tail: TailEstimate::Divergent { exponent: 0.0 },
                    rho: f64::INFINITY,
                    ..reversibility
                }
            };
        }
        Ok(Self {
            spec,
            unshifted,
            shifted,
            reversibility,
        })
    }

    pub fn sites(&self) -> usize {
        self.unshifted.len() - 1
    }

    pub fn pi(&self, n: usize) -> f64 {
        self.reversibility.values[n]
    }

    pub fn rho(&self) -> f64 {
        self.reversibility.rho
    }

    pub fn stationary(&self) -> Result<StationaryDistribution> {
        stationary(&self.reversibility)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::koornwinder::q_eval;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cheb(n: f64) -> KoornwinderParams {
        KoornwinderParams::chebyshev(n).unwrap()
    }

    fn close(c: RecurrenceCoeffs, q: f64, r: f64, p: f64, tol: f64) {
        assert!((c.q - q).abs() < tol && (c.r - r).abs() < tol && (c.p - p).abs() < tol, "{c:?} vs ({q}, {r}, {p})");
    }

    #[test]
    fn general_examples() {
        close(coeffs_general(cheb(1.0), 0).unwrap(), 0.0, 0.5, 0.5, 1e-14);
        close(coeffs_general(cheb(1.0), 1).unwrap(), 1.0, -0.25, 0.25, 1e-12);
        let legendre = KoornwinderParams::new(0.0, 0.0, 0.0).unwrap();
        close(coeffs_general(legendre, 1).unwrap(), 1.0 / 3.0, 0.0, 2.0 / 3.0, 1e-13);
    }

    #[test]
    fn general_p0_closed_form() {
        // p_0 = 2(a+1) / ((1+N)(a+b+2))
        for &(a, b, n) in &[(0.5, -0.25, 1.0), (2.0, 3.0, 0.4), (-0.7, 0.1, 5.0)] {
            let c = coeffs_general(KoornwinderParams::new(a, b, n).unwrap(), 0).unwrap();
            assert_relative_eq!(c.p, 2.0 * (a + 1.0) / ((1.0 + n) * (a + b + 2.0)), max_relative = 1e-13);
        }
    }

    #[test]
    fn chebyshev_examples() {
        close(coeffs_chebyshev(1.0, 2), 0.75, -1.0 / 12.0, 1.0 / 3.0, 1e-15);
        let far = coeffs_chebyshev(1.0, 1_000_000);
        assert!((far.p - 0.5).abs() < 1e-6 && (far.q - 0.5).abs() < 1e-6 && far.r.abs() < 1e-6);
        let mut prev = coeffs_chebyshev(1.0, 1);
        for n in 2..2000 {
            let c = coeffs_chebyshev(1.0, n);
            assert!(c.p > prev.p && c.q < prev.q && c.r.abs() < prev.r.abs());
            prev = c;
        }
    }

    #[test]
    fn two_paths_agree() {
        for &n_mass in &[0.1, 1.0, 10.0] {
            let general = coeffs_general_range(cheb(n_mass), 50).unwrap();
            for (n, g) in general.iter().enumerate() {
                let c = coeffs_chebyshev(n_mass, n);
                close(*g, c.q, c.r, c.p, 1e-9);
            }
        }
    }

    #[test]
    fn general_recurrence_residual() {
        let p = KoornwinderParams::new(0.5, -0.25, 1.0).unwrap();
        let coeffs = coeffs_general_range(p, 40).unwrap();
        for n in 1..40 {
            let c = coeffs[n];
            assert!((c.row_sum() - 1.0).abs() < 1e-12);
            for k in 0..10 {
                let x = -0.97 + 0.21 * k as f64;
                let lhs = c.p * q_eval(p, n + 1, x) + c.r * q_eval(p, n, x) + c.q * q_eval(p, n - 1, x);
                let rhs = x * q_eval(p, n, x);
                assert!((lhs - rhs).abs() < 1e-9 * (1.0 + rhs.abs()), "n={n} x={x}");
            }
        }
    }

    #[test]
    fn fallback_point_set_agrees() {
        let p = KoornwinderParams::new(0.5, -0.25, 1.0).unwrap();
        // At site 1 the primary rows are dependent for every parameter choice:
        // Q_1 and Q_2 are at most quadratic, so the x = -1 row is fixed by
        // the x = 1 row and the derivative at 0.
        assert!(matches!(
            coeffs_general_with(p, 1, PointSet::Primary),
            Err(Error::SingularSystem { site: 1, .. })
        ));
        for n in (0..30).filter(|&n| n != 1) {
            let a = coeffs_general_with(p, n, PointSet::Primary).unwrap();
            let b = coeffs_general_with(p, n, PointSet::Fallback).unwrap();
            close(a, b.q, b.r, b.p, 1e-10);
        }
        assert_eq!(coeffs_general(p, 1).unwrap(), coeffs_general_with(p, 1, PointSet::Fallback).unwrap());
    }

    #[test]
    fn singular_system_detected() {
        let (_, cond) = solve3([[1.0, 1.0, 1.0], [2.0, 2.0, 2.0], [0.0, 1.0, 3.0]], [1.0, 2.0, 0.0]);
        assert!(!(cond <= SINGULAR_CONDITION));
    }

    #[test]
    fn lambda_min_examples() {
        assert_eq!(lambda_min(cheb(1.0)).unwrap(), 0.25);
        let tiny = lambda_min(cheb(1e-4)).unwrap();
        assert!((tiny - 2e-8).abs() < 1e-11);
        let legendre = KoornwinderParams::new(0.0, 0.0, 0.0).unwrap();
        assert_eq!(lambda_min(legendre).unwrap(), 0.0);
        // general scan on the Chebyshev parameters reproduces |r_1|
        let scanned = lambda_min_scan(cheb(1.0), 256).unwrap();
        assert!((scanned - 0.25).abs() < 1e-12);
    }

    #[test]
    fn shift_examples() {
        let c1 = coeffs_chebyshev(1.0, 1);
        close(shift(c1, 0.25).unwrap(), 0.8, 0.0, 0.2, 1e-15);
        close(shift(coeffs_chebyshev(1.0, 0), 0.25).unwrap(), 0.0, 0.6, 0.4, 1e-15);
        let id = shift(c1, 0.0);
        assert!(matches!(id, Err(Error::NegativeEntry { site: 1, entry: "r", .. })));
        let c2 = coeffs_chebyshev(1.0, 2);
        let s = shift(c2, 0.0);
        assert!(s.is_err());
        let legendre = coeffs_chebyshev(0.0, 3);
        let s = shift(legendre, 0.0).unwrap();
        assert_eq!((s.q, s.r, s.p), (legendre.q, legendre.r, legendre.p));
    }

    #[test]
    fn spec_rejects_low_lambda_with_site() {
        let err = ChainSpec::new(cheb(1.0), 0.2, 0).unwrap_err();
        assert!(matches!(err, Error::NegativeEntry { site: 1, .. }), "{err:?}");
        assert!(ChainSpec::new(cheb(1.0), 0.25, 0).is_ok());
    }

    #[test]
    fn reversibility_examples() {
        let coeffs: Vec<_> = (0..=4).map(|n| coeffs_chebyshev(1.0, n)).collect();
        let m = reversibility(&coeffs, 4).unwrap();
        for (n, want) in [(1, 0.5), (2, 1.0 / 6.0), (3, 1.0 / 12.0), (4, 1.0 / 20.0)] {
            assert_relative_eq!(m.values[n], want, max_relative = 1e-14);
        }
        let coeffs: Vec<_> = (0..=1).map(|n| coeffs_chebyshev(2.0, n)).collect();
        assert_relative_eq!(reversibility(&coeffs, 1).unwrap().values[1], 2.0 / 7.0, max_relative = 1e-15);
    }

    #[test]
    fn reversibility_is_shift_invariant() {
        let unshifted: Vec<_> = (0..=500).map(|n| coeffs_chebyshev(3.0, n)).collect();
        let shifted: Vec<_> = unshifted.iter().map(|&c| shift(c, 0.7).unwrap()).collect();
        let a = reversibility(&unshifted, 500).unwrap();
        let b = reversibility(&shifted, 500).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert_relative_eq!(x, y, max_relative = 1e-12);
        }
    }

    #[test]
    fn stationary_examples() {
        let chain = Chain::build(ChainSpec::chebyshev(1.0, 0).unwrap(), 50).unwrap();
        let nu = chain.stationary().unwrap();
        assert_relative_eq!(nu.get(0), 0.5, max_relative = 1e-15);
        assert_relative_eq!(nu.get(1), 0.25, max_relative = 1e-15);
        assert_relative_eq!(nu.get(2), 1.0 / 12.0, max_relative = 1e-14);
        for n in 1..=50 {
            assert_relative_eq!(nu.get(n), 1.0 / (2.0 * n as f64 * (n as f64 + 1.0)), max_relative = 1e-13);
        }
        let chain = Chain::build(ChainSpec::chebyshev(2.0, 0).unwrap(), 50).unwrap();
        assert_relative_eq!(chain.rho(), 1.5, max_relative = 1e-14);
        assert_relative_eq!(chain.stationary().unwrap().get(0), 2.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn zero_mass_is_not_positive_recurrent() {
        let spec = ChainSpec::new(cheb(0.0), 0.0, 0).unwrap();
        let chain = Chain::build(spec, 100).unwrap();
        assert!(matches!(chain.stationary(), Err(Error::NotPositiveRecurrent { .. })));
        let legendre = ChainSpec::new(KoornwinderParams::new(0.0, 0.0, 0.0).unwrap(), 0.0, 0).unwrap();
        let chain = Chain::build(legendre, 10).unwrap();
        assert!(matches!(chain.stationary(), Err(Error::NotPositiveRecurrent { .. })));
    }

    #[test]
    fn stationary_is_invariant() {
        let m = 10_000;
        let chain = Chain::build(ChainSpec::chebyshev(1.0, 0).unwrap(), m + 1).unwrap();
        let nu = chain.stationary().unwrap();
        let s = &chain.shifted;
        let mut l1 = NeumaierSum::new();
        for n in 0..=m {
            let mut v = NeumaierSum::new();
            if n > 0 {
                v.add(nu.get(n - 1) * s[n - 1].p);
            }
            v.add(nu.get(n) * s[n].r);
            v.add(nu.get(n + 1) * s[n + 1].q);
            l1.add((v.value() - nu.get(n)).abs());
        }
        assert!(l1.value() < 1e-10, "{}", l1.value());
    }

    #[test]
    fn pi_decays_like_inverse_square() {
        // n^2 π_n with π_n = 2(1+N)/((1+(2n-1)N)(1+(2n+1)N))
        for &n_mass in &[1.0, 2.0, 10.0] {
            let chain = Chain::build(ChainSpec::chebyshev(n_mass, 0).unwrap(), 5000).unwrap();
            let lo = 2.0 * (1.0 + n_mass) / (5.0 * n_mass * n_mass);
            let hi = 2.0 * (1.0 + n_mass) / (3.0 * n_mass * n_mass);
            for n in 10..=5000 {
                let v = (n * n) as f64 * chain.pi(n);
                assert!(v >= lo && v <= hi, "N={n_mass} n={n}: {v} not in [{lo}, {hi}]");
            }
        }
    }

    #[test]
    fn fitted_tail_tracks_exact_tail() {
        let coeffs: Vec<_> = (0..=20_000).map(|n| coeffs_chebyshev(1.0, n)).collect();
        let m = reversibility(&coeffs, 20_000).unwrap();
        let exact = chebyshev_pi_tail(1.0, 20_000);
        let fitted = m.tail.mass().unwrap();
        assert!((fitted - exact).abs() < 1e-3 * exact, "{fitted} vs {exact}");
        assert!((1.0 / m.rho - 0.5).abs() < 1e-8);
    }

    proptest! {
        #[test]
        fn shifted_rows_are_stochastic(which in 0usize..3, lam_kind in 0usize..3, n in 0usize..10_000) {
            let big_n = [0.1, 1.0, 10.0][which];
            let lmin = lambda_min(cheb(big_n)).unwrap();
            let lambda = [lmin, 2.0 * lmin, 1.0][lam_kind];
            let c = shift(coeffs_chebyshev(big_n, n), lambda).unwrap();
            prop_assert!(c.p >= 0.0 && c.r >= 0.0 && c.q >= 0.0);
            prop_assert!((c.row_sum() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn detailed_balance(which in 0usize..3, n in 0usize..2000) {
            let big_n = [0.1, 1.0, 10.0][which];
            let chain = Chain::build(ChainSpec::chebyshev(big_n, 0).unwrap(), n + 1).unwrap();
            let lhs = chain.pi(n) * chain.shifted[n].p;
            let rhs = chain.pi(n + 1) * chain.shifted[n + 1].q;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs());
        }

        #[test]
        fn shifted_eigenvector(x in -0.999f64..0.999, n in 0usize..50, which in 0usize..3) {
            let big_n = [0.5, 1.0, 2.0][which];
            let spec = ChainSpec::chebyshev(big_n, 0).unwrap();
            let chain = Chain::build(spec, n + 1).unwrap();
            let p = spec.params;
            let c = chain.shifted[n];
            let qm = if n == 0 { 0.0 } else { q_eval(p, n - 1, x) };
            let lhs = c.p * q_eval(p, n + 1, x) + c.r * q_eval(p, n, x) + c.q * qm;
            let rhs = (x + spec.lambda) / (1.0 + spec.lambda) * q_eval(p, n, x);
            prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + rhs.abs()));
        }
    }
}
