//! Mixing times, the explicit spectral upper bound, decay-rate fits and the
//! spectral-gap check.

use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::chain::{Chain, ChainSpec};
use crate::error::{Error, Result};
use crate::koornwinder::KoornwinderParams;
use crate::oracle::power_sweep;
use crate::spectral::{build_rule_with_nodes, tv_distance, tv_distance_with, Method, TvOptions};
use crate::sum::NeumaierSum;

/// Slack allowed when comparing a computed TV against `ε` in
/// [`mixing_time`] and when checking monotonicity of a curve.
pub const MIX_SLACK: f64 = 1e-12;

/// `(t, ‖ν - μ_t‖_TV)` samples with strictly increasing `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayCurve {
    pub spec: ChainSpec,
    pub points: Vec<(u64, f64)>,
    pub method: Method,
}

impl DecayCurve {
    pub fn new(spec: ChainSpec, points: Vec<(u64, f64)>, method: Method) -> Result<Self> {
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidParams("decay curve times must be strictly increasing".into()));
        }
        if let Some(&(t, v)) = points.iter().find(|p| !(0.0..=1.0).contains(&p.1)) {
            return Err(Error::Domain(format!("total variation {v} at t = {t} is outside [0, 1]")));
        }
        Ok(Self { spec, points, method })
    }

    pub fn times(&self) -> Vec<u64> {
        self.points.iter().map(|p| p.0).collect()
    }

    /// True when no sample exceeds its predecessor by more than `slack`.
    pub fn is_non_increasing(&self, slack: f64) -> bool {
        self.points.windows(2).all(|w| w[1].1 <= w[0].1 + slack)
    }
}

/// `count` integers log-spaced over `[t_min, t_max]`, rounded and deduplicated.
pub fn log_spaced_times(t_min: u64, t_max: u64, count: usize) -> Vec<u64> {
    if count <= 1 || t_min >= t_max {
        return vec![t_min];
    }
    let (a, b) = ((t_min.max(1) as f64).ln(), (t_max as f64).ln());
    let mut out: Vec<u64> = (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp().round() as u64)
        .collect();
    out[0] = t_min;
    out[count - 1] = t_max;
    out.dedup();
    out
}

/// Spectral TV at each of `times`. Each point is computed with the
/// parallel kernel; points are taken in order.
pub fn decay_curve(spec: &ChainSpec, times: &[u64], opts: &TvOptions) -> Result<DecayCurve> {
    let points = times
        .iter()
        .map(|&t| Ok((t, tv_distance_with(spec, t, opts)?.value)))
        .collect::<Result<Vec<_>>>()?;
    DecayCurve::new(*spec, points, Method::Spectral)
}

/// TV at every `t = 0..=t_max` from one matrix-power sweep.
pub fn oracle_tv_curve(spec: &ChainSpec, t_max: u64) -> Result<Vec<f64>> {
    let size = spec.origin + t_max as usize;
    let nu = Chain::build(*spec, size)?.stationary()?;
    let mut out = Vec::with_capacity(t_max as usize + 1);
    let mut tail = None;
    power_sweep(spec, t_max, size, |_, mu| {
        let beyond = *tail.get_or_insert_with(|| nu.tail_beyond(mu.len() - 1));
        let mut s = NeumaierSum::new();
        for (n, &m) in mu.iter().enumerate() {
            s.add((m - nu.get(n)).abs());
        }
        s.add(beyond);
        out.push(0.5 * s.value());
    })?;
    Ok(out)
}

/// Smallest `t <= t_cap` with `TV(t) <= ε`.
///
/// Doubling search brackets the crossing, bisection narrows it, and the
/// two steps below the result are rechecked directly.
pub fn mixing_time(spec: &ChainSpec, epsilon: f64, t_cap: u64) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParams(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let mixed = |t: u64| -> Result<bool> { Ok(tv_distance(spec, t)? <= epsilon + MIX_SLACK) };
    if mixed(0)? {
        return Ok(0);
    }
    let mut lo = 0u64;
    let mut hi = 1u64;
    loop {
        let probe = hi.min(t_cap);
        if mixed(probe)? {
            hi = probe;
            break;
        }
        if probe == t_cap {
            return Err(Error::NotMixedByCap {
                t_cap,
                epsilon,
                tv: tv_distance(spec, t_cap)?,
            });
        }
        lo = probe;
        hi = probe.saturating_mul(2);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if mixed(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut best = hi;
    for t in (hi.saturating_sub(2)..hi).rev() {
        if mixed(t)? {
            best = t;
        }
    }
    Ok(best)
}

/// How `‖Q_n‖_∞` on `[-1, 1]` is obtained for the upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SupNormMode {
    /// Maximum over a Chebyshev-Lobatto grid with `8(n_max+1)+1` points.
    Estimated,
    /// `4Nn + 1`, valid in the Chebyshev family.
    ChebyshevBound,
}

impl SupNormMode {
    pub fn default_for(params: KoornwinderParams) -> Self {
        if params.is_chebyshev() {
            SupNormMode::ChebyshevBound
        } else {
            SupNormMode::Estimated
        }
    }
}

/// `max_{grid} |Q_n|` for `n = 0..=n_max`, using the chain's recurrence.
pub fn sup_norms(chain: &Chain, n_max: usize) -> Vec<f64> {
    let g = 8 * (n_max + 1) + 1;
    let c = &chain.unshifted;
    (0..g)
        .into_par_iter()
        .fold(
            || vec![0.0f64; n_max + 1],
            |mut best, k| {
                let x = (std::f64::consts::PI * k as f64 / (g - 1) as f64).cos();
                let (mut prev, mut cur) = (0.0, 1.0);
                best[0] = best[0].max(1.0);
                for n in 0..n_max {
                    let next = ((x - c[n].r) * cur - c[n].q * prev) / c[n].p;
                    prev = cur;
                    cur = next;
                    best[n + 1] = best[n + 1].max(cur.abs());
                }
                best
            },
        )
        .reduce(
            || vec![0.0f64; n_max + 1],
            |a, b| a.into_iter().zip(b).map(|(x, y)| x.max(y)).collect(),
        )
}

/// Pieces of the explicit bound
///
/// ```text
/// B(t) = C ‖Q_j‖ / (t+1)^{1+α} · Σ_{n<=j+t} π_n ‖Q_n‖ + ½ Σ_{n>j+t} π_n
/// ```
///
/// precomputed through `t_max` so that many `t` are cheap.
#[derive(Debug, Clone)]
pub struct UpperBound {
    spec: ChainSpec,
    sup_origin: f64,
    /// `Σ_{n<=m} π_n ‖Q_n‖` for `m = 0..=j+t_max`.
    weighted: Vec<f64>,
    /// `Σ_{n>m} π_n`.
    tails: Vec<f64>,
}

impl UpperBound {
    pub fn new(spec: &ChainSpec, t_max: u64, mode: SupNormMode) -> Result<Self> {
        let n_max = spec.origin + t_max as usize;
        let chain = Chain::build(*spec, n_max)?;
        if chain.reversibility.tail.mass().is_none() {
            return Err(Error::NotPositiveRecurrent {
                truncation: chain.sites(),
                tail: f64::INFINITY,
            });
        }
        let norms = match mode {
            SupNormMode::Estimated => sup_norms(&chain, n_max),
            SupNormMode::ChebyshevBound => {
                if !spec.params.is_chebyshev() {
                    return Err(Error::InvalidParams(
                        "the 4Nn+1 sup-norm bound holds only for alpha = beta = -1/2".into(),
                    ));
                }
                let big_n = spec.params.big_n;
                (0..=n_max).map(|n| 4.0 * big_n * n as f64 + 1.0).collect()
            }
        };
        let mut acc = NeumaierSum::new();
        let weighted = (0..=n_max)
            .map(|n| {
                acc.add(chain.pi(n) * norms[n]);
                acc.value()
            })
            .collect();
        let rev = &chain.reversibility;
        let mut tails = vec![0.0; n_max + 1];
        let mut beyond = NeumaierSum::new();
        beyond.add(rev.tail_beyond(n_max));
        for m in (0..=n_max).rev() {
            tails[m] = beyond.value();
            beyond.add(rev.values[m]);
        }
        Ok(Self {
            spec: *spec,
            sup_origin: norms[spec.origin],
            weighted,
            tails,
        })
    }

    pub fn t_max(&self) -> u64 {
        (self.weighted.len() - 1 - self.spec.origin) as u64
    }

    /// `‖Q_j‖ Σ_{n<=j+t} π_n ‖Q_n‖ / (t+1)^{1+α}`, the factor of `C`.
    pub fn main_factor(&self, t: u64) -> f64 {
        let m = self.spec.origin + t as usize;
        let decay = ((t + 1) as f64).powf(1.0 + self.spec.params.alpha());
        self.sup_origin * self.weighted[m] / decay
    }

    /// `½ Σ_{n>j+t} π_n`.
    pub fn tail_term(&self, t: u64) -> f64 {
        0.5 * self.tails[self.spec.origin + t as usize]
    }

    pub fn eval(&self, t: u64, constant: f64) -> f64 {
        constant * self.main_factor(t) + self.tail_term(t)
    }

    /// Smallest constant with `B(t0) >= tv`, raised by a relative `1e-12`
    /// so the anchor itself is covered after rounding.
    pub fn calibrate(&self, t0: u64, tv: f64) -> f64 {
        let need = (tv - self.tail_term(t0)).max(0.0) / self.main_factor(t0);
        need * (1.0 + 1e-12)
    }
}

/// `B(t)` for a caller-supplied constant.
pub fn spectral_upper_bound(spec: &ChainSpec, t: u64, constant: f64, mode: SupNormMode) -> Result<f64> {
    if t < 1 || !(constant > 0.0) {
        return Err(Error::InvalidParams("need t >= 1 and a positive constant".into()));
    }
    Ok(UpperBound::new(spec, t, mode)?.eval(t, constant))
}

/// Constant of [`spectral_upper_bound`] fixed so that the bound equals the
/// spectral TV at `t0`.
pub fn calibrate_upper_constant(spec: &ChainSpec, t0: u64, mode: SupNormMode) -> Result<f64> {
    let bound = UpperBound::new(spec, t0, mode)?;
    Ok(bound.calibrate(t0, tv_distance(spec, t0)?))
}

/// Constants of the two-sided decay law `c/√t <= TV <= C log t/√t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundParams {
    pub c_upper: f64,
    pub c_lower: f64,
    pub fit_window: (u64, u64),
}

impl BoundParams {
    pub fn new(c_upper: f64, c_lower: f64, fit_window: (u64, u64)) -> Result<Self> {
        if !(c_upper > 0.0 && c_lower > 0.0) {
            return Err(Error::InvalidParams(format!(
                "bound constants must be positive, got C = {c_upper}, c = {c_lower}"
            )));
        }
        Ok(Self {
            c_upper,
            c_lower,
            fit_window,
        })
    }

    /// Tightest constants on a curve: `c = min TV √t`, `C = max TV √t / ln t`.
    pub fn from_curve(curve: &DecayCurve) -> Result<Self> {
        let pts: Vec<_> = curve.points.iter().filter(|p| p.0 >= 2).collect();
        let (first, last) = match (pts.first(), pts.last()) {
            (Some(a), Some(b)) => (a.0, b.0),
            _ => return Err(Error::InsufficientRange("no points with t >= 2".into())),
        };
        let scaled = |&&(t, v): &&(u64, f64)| v * (t as f64).sqrt();
        let c_lower = pts.iter().map(scaled).fold(f64::INFINITY, f64::min);
        let c_upper = pts
            .iter()
            .map(|p| scaled(p) / (p.0 as f64).ln())
            .fold(0.0, f64::max);
        Self::new(c_upper, c_lower, (first, last))
    }
}

/// `∫_0^L e^{-s(t+1)} s^α ds` over `Γ(α+1)/(t+1)^{1+α}`, with
/// `L = ln((1+λ)/λ)`.
///
/// After `u = (t+1)s` the ratio is `∫_0^X e^{-u} u^α du / Γ(α+1)` with
/// `X = (t+1)L`. For `α < 0` the piece below [`laplace_split`] is taken
/// in `v = u^{α+1}`, where the integrand `e^{-v^{1/(α+1)}} / (α+1)` is
/// bounded; everything else is integrated in `u`. Both pieces use double-exponential quadrature.
pub fn laplace_reference(alpha: f64, lambda: f64, t: u64) -> Result<f64> {
    if !(alpha > -1.0) || !(lambda > 0.0) || t < 1 {
        return Err(Error::InvalidParams(format!(
            "need alpha > -1, lambda > 0, t >= 1; got {alpha}, {lambda}, {t}"
        )));
    }
    let a1 = alpha + 1.0;
    let x = (t + 1) as f64 * ((1.0 + lambda) / lambda).ln();
    let split = laplace_split(alpha).min(x);
    let direct = |u: f64| (-u).exp() * u.powf(alpha);
    let mut integral = if alpha < 0.0 {
        let near = |v: f64| (-v.powf(1.0 / a1)).exp() / a1;
        quadrature::double_exponential::integrate(near, 0.0, split.powf(a1), 1e-14).integral
    } else {
        quadrature::double_exponential::integrate(direct, 0.0, split, 1e-14).integral
    };
    if x > split {
        integral += quadrature::double_exponential::integrate(direct, split, x, 1e-14).integral;
    }
    Ok(integral / gamma(a1))
}

/// Point past the peak of `e^{-u} u^α` where the two pieces meet.
pub fn laplace_split(alpha: f64) -> f64 {
    alpha.max(0.0) + 40.0
}

/// Least-squares summary of a decay curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    /// Slope of `ln TV` against `ln t`.
    pub slope: f64,
    pub intercept: f64,
    /// Slope of `ln(TV √t)` against `ln ln t`.
    pub log_corrected_slope: f64,
    /// Residuals of the `ln TV` fit, one per point.
    pub residuals: Vec<f64>,
    pub min_scaled: f64,
    pub max_scaled: f64,
    /// `max / min` of `TV √t / ln t`.
    pub log_ratio_spread: f64,
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

pub fn fit_decay(curve: &DecayCurve) -> Result<DecayFit> {
    let pts = &curve.points;
    if pts.len() < 8 {
        return Err(Error::InsufficientRange(format!("{} points", pts.len())));
    }
    if let Some(&(t, v)) = pts.iter().find(|p| p.0 < 3 || !(p.1 > 0.0)) {
        return Err(Error::InsufficientRange(format!(
            "every point needs t >= 3 and TV > 0, got ({t}, {v})"
        )));
    }
    let (t_lo, t_hi) = (pts[0].0 as f64, pts[pts.len() - 1].0 as f64);
    if t_hi < 100.0 * t_lo {
        return Err(Error::InsufficientRange(format!("t spans [{t_lo}, {t_hi}]")));
    }
    let lt: Vec<f64> = pts.iter().map(|p| (p.0 as f64).ln()).collect();
    let lv: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (slope, intercept) = least_squares(&lt, &lv);
    let residuals = lt.iter().zip(&lv).map(|(x, y)| y - (slope * x + intercept)).collect();

    let scaled: Vec<f64> = pts.iter().map(|p| p.1 * (p.0 as f64).sqrt()).collect();
    let llt: Vec<f64> = lt.iter().map(|x| x.ln()).collect();
    let ls: Vec<f64> = scaled.iter().map(|s| s.ln()).collect();
    let (log_corrected_slope, _) = least_squares(&llt, &ls);

    let ratio: Vec<f64> = scaled.iter().zip(&lt).map(|(s, l)| s / l).collect();
    let max_of = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_of = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(DecayFit {
        slope,
        intercept,
        log_corrected_slope,
        residuals,
        min_scaled: min_of(&scaled),
        max_scaled: max_of(&scaled),
        log_ratio_spread: max_of(&ratio) / min_of(&ratio),
    })
}

/// Location of the continuous spectrum of `P_λ` relative to the atom.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    /// `(λ-1)/(λ+1)`, image of `x = -1`.
    pub support_lower: f64,
    /// Image of `x = 1`.
    pub support_upper: f64,
    pub atom_location: f64,
    /// `atom_location - support_upper`.
    pub gap: f64,
    /// `(K, 1 - largest shifted Gauss node)`: continuous spectrum found
    /// ever closer to the atom as `K` grows.
    pub node_distance: Vec<(usize, f64)>,
}

pub fn spectral_gap_report(spec: &ChainSpec) -> Result<GapReport> {
    let lam = spec.lambda;
    let shift = |x: f64| (x + lam) / (1.0 + lam);
    let support_upper = shift(1.0);
    let atom_location = 1.0;
    let node_distance = [10usize, 100, 1000]
        .iter()
        .map(|&k| {
            let rule = build_rule_with_nodes(spec.params, k)?;
            let top = rule.nodes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Ok((k, 1.0 - shift(top)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GapReport {
        support_lower: shift(-1.0),
        support_upper,
        atom_location,
        gap: atom_location - support_upper,
        node_distance,
    })
}
