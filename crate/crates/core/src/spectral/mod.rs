//! Karlin-McGregor integrals for the shifted chain.
//!
//! With `Q_n` orthogonal for `dψ` and `P_λ = (H + λ I)/(1 + λ)`,
//!
//! ```text
//! p_t(i, k) = π_k ∫ ((x + λ)/(1 + λ))^t Q_i(x) Q_k(x) dψ(x)
//! ```
//!
//! The integrand is a polynomial of degree `t + i + k`, so a Gauss rule
//! with enough nodes integrates the continuous part exactly; the atom at 1
//! contributes `N/(N+1)` since every `Q_n(1) = 1`.
//!
//! Writing `I_n` for the continuous-part integral, `μ_t(n) = π_n I_n + ν_n`
//! and so `ν_n - μ_t(n) = -π_n I_n`; the total variation distance is formed
//! from the `I_n` directly, with no cancellation against `ν`.

mod quadrature;

pub use quadrature::{
    build_rule, build_rule_with_nodes, gauss_chebyshev, gauss_jacobi, nodes_for_degree, QuadratureFamily,
    QuadratureRule, CHEBYSHEV_NODE_CAP, GENERAL_NODE_CAP,
};

use rayon::prelude::*;
use serde::Serialize;

use crate::chain::{Chain, ChainSpec};
use crate::error::{Error, Result};
use crate::sum::{tree_reduce, NeumaierSum};

/// Nodes are dealt round-robin to this many lanes; lane partials are then
/// reduced pairwise in lane order, so results do not depend on thread count.
pub const FAN_IN: usize = 64;

/// Nodes whose weight times power factor falls below this are skipped. The
/// polynomials involved stay far below `1e20` in magnitude on `[-1,1]` for
/// every supported degree, so a skipped node moves no integral by more than
/// `1e-260`.
pub const NEGLIGIBLE_NODE_WEIGHT: f64 = 1e-280;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Spectral,
    MatrixPower,
    MonteCarlo,
}

/// `μ_t` on sites `0..probabilities.len()`; every later site has mass 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionSnapshot {
    pub time: u64,
    pub origin: usize,
    pub probabilities: Vec<f64>,
    pub method: Method,
    /// `|1 - Σ probabilities|` after clipping.
    pub mass_deficit: f64,
}

impl DistributionSnapshot {
    pub fn get(&self, n: usize) -> f64 {
        self.probabilities.get(n).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().copied().collect::<NeumaierSum>().value()
    }

    pub(crate) fn from_raw(time: u64, origin: usize, mut probabilities: Vec<f64>, method: Method) -> Self {
        for v in probabilities.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let total = probabilities.iter().copied().collect::<NeumaierSum>().value();
        Self {
            time,
            origin,
            probabilities,
            method,
            mass_deficit: (1.0 - total).abs(),
        }
    }
}

/// `b^t` by repeated squaring; exact sign for negative bases.
pub fn int_pow(mut base: f64, mut t: u64) -> f64 {
    let mut acc = 1.0;
    while t > 0 {
        if t & 1 == 1 {
            acc *= base;
        }
        base *= base;
        t >>= 1;
    }
    acc
}

/// Upward sweep of the `Q_n` three-term recurrence at `x`, calling `visit`
/// for `n = 0..=n_max`.
#[inline]
fn sweep_q<F: FnMut(usize, f64)>(chain: &Chain, inv_p: &[f64], x: f64, n_max: usize, mut visit: F) {
    let c = &chain.unshifted;
    let mut prev = 0.0;
    let mut cur = 1.0;
    visit(0, cur);
    for n in 0..n_max {
        let next = ((x - c[n].r) * cur - c[n].q * prev) * inv_p[n];
        prev = cur;
        cur = next;
        visit(n + 1, cur);
    }
}

fn q_at(chain: &Chain, inv_p: &[f64], x: f64, n: usize) -> f64 {
    let mut v = 1.0;
    sweep_q(chain, inv_p, x, n, |_, q| v = q);
    v
}

/// `I_n = Σ_k w_k b(x_k)^t Q_j(x_k) Q_n(x_k)` for `n = 0..=n_max`, with
/// `b(x) = (x + λ)/(1 + λ)`.
pub(crate) fn continuous_integrals(chain: &Chain, rule: &QuadratureRule, t: u64, j: usize, n_max: usize) -> Vec<f64> {
    let lambda = chain.spec.lambda;
    let sweep_to = n_max.max(j);
    let inv_p: Vec<f64> = chain.unshifted[..sweep_to].iter().map(|c| 1.0 / c.p).collect();
    let k = rule.len();
    let lanes = FAN_IN.min(k);

    let parts: Vec<Option<Vec<f64>>> = (0..lanes)
        .into_par_iter()
        .map(|lane| {
            let mut acc: Option<Vec<NeumaierSum>> = None;
            let mut node = lane;
            while node < k {
                let x = rule.nodes[node];
                let g = rule.weights[node] * int_pow((x + lambda) / (1.0 + lambda), t) * q_at(chain, &inv_p, x, j);
                if g.abs() >= NEGLIGIBLE_NODE_WEIGHT {
                    let sums = acc.get_or_insert_with(|| vec![NeumaierSum::new(); n_max + 1]);
                    sweep_q(chain, &inv_p, x, n_max, |n, q| sums[n].add(g * q));
                }
                node += lanes;
            }
            acc.map(|s| s.into_iter().map(|v| v.value()).collect())
        })
        .collect();

    tree_reduce(parts.into_iter().flatten().collect()).unwrap_or_else(|| vec![0.0; n_max + 1])
}

/// `p_t(i, k)` together with how far the raw quadrature value lay outside
/// `[0, 1]` before clipping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClippedProbability {
    pub value: f64,
    pub clip_deviation: f64,
}

/// One-off `p_t(i, k)`; the origin stored in `spec` is not used.
pub fn transition_probability(spec: &ChainSpec, i: usize, k: usize, t: u64) -> Result<f64> {
    Ok(transition_probability_detailed(spec, i, k, t)?.value)
}

pub fn transition_probability_detailed(spec: &ChainSpec, i: usize, k: usize, t: u64) -> Result<ClippedProbability> {
    if i.abs_diff(k) as u64 > t {
        return Ok(ClippedProbability {
            value: 0.0,
            clip_deviation: 0.0,
        });
    }
    let top = i.max(k);
    let chain = Chain::build(*spec, top)?;
    let rule = build_rule(spec.params, t as usize + i + k)?;
    let integrals = continuous_integrals(&chain, &rule, t, i, top);
    let raw = chain.pi(k) * (integrals[k] + spec.params.atom_mass());
    let value = raw.clamp(0.0, 1.0);
    Ok(ClippedProbability {
        value,
        clip_deviation: (raw - value).abs(),
    })
}

/// `μ_t` from `δ_j` on sites `0..=j+t`.
pub fn distribution_at(spec: &ChainSpec, t: u64) -> Result<DistributionSnapshot> {
    let j = spec.origin;
    let n_max = j + t as usize;
    let chain = Chain::build(*spec, n_max)?;
    let rule = build_rule(spec.params, t as usize + j + n_max)?;
    Ok(distribution_from(&chain, &rule, t))
}

pub(crate) fn distribution_from(chain: &Chain, rule: &QuadratureRule, t: u64) -> DistributionSnapshot {
    let j = chain.spec.origin;
    let n_max = j + t as usize;
    let atom = chain.spec.params.atom_mass();
    let integrals = continuous_integrals(chain, rule, t, j, n_max);
    let probs = integrals
        .iter()
        .enumerate()
        .map(|(n, i)| chain.pi(n) * (i + atom))
        .collect();
    DistributionSnapshot::from_raw(t, j, probs, Method::Spectral)
}

/// Total variation distance with the quadrature size used and, for
/// capped rules, a doubling-based error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TvEstimate {
    pub t: u64,
    pub value: f64,
    pub nodes: usize,
    /// Zero when the rule is exact for every integrand involved.
    pub error_estimate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TvOptions {
    /// Largest rule to build; `None` means the family's own cap.
    pub node_cap: Option<usize>,
    /// Permit rules below the exactness size (Chebyshev family only).
    pub allow_capped: bool,
}


/// `‖ν - μ_t‖_TV` from `δ_origin`, exact quadrature.
pub fn tv_distance(spec: &ChainSpec, t: u64) -> Result<f64> {
    Ok(tv_distance_with(spec, t, &TvOptions::default())?.value)
}

pub fn tv_distance_with(spec: &ChainSpec, t: u64, opts: &TvOptions) -> Result<TvEstimate> {
    let j = spec.origin;
    let n_max = j + t as usize;
    let needed = nodes_for_degree(2 * n_max);
    let chain = Chain::build(*spec, n_max)?;
    let nu_tail = chain.stationary()?.tail_beyond(n_max);

    let cap = opts.node_cap.unwrap_or(usize::MAX);
    if needed <= cap {
        let rule = build_rule_with_nodes(spec.params, needed)?;
        return Ok(TvEstimate {
            t,
            value: tv_from_rule(&chain, &rule, t, nu_tail),
            nodes: needed,
            error_estimate: 0.0,
        });
    }
    if !(opts.allow_capped && spec.params.is_chebyshev()) {
        return Err(Error::DegreeTooLarge { nodes: needed, cap });
    }
    let rule = build_rule_with_nodes(spec.params, cap)?;
    let half = build_rule_with_nodes(spec.params, (cap / 2).max(1))?;
    let value = tv_from_rule(&chain, &rule, t, nu_tail);
    let coarse = tv_from_rule(&chain, &half, t, nu_tail);
    Ok(TvEstimate {
        t,
        value,
        nodes: cap,
        error_estimate: (value - coarse).abs(),
    })
}

/// TV at `t` from an explicit rule (exact only if the rule is large enough).
pub fn tv_with_rule(spec: &ChainSpec, t: u64, rule: &QuadratureRule) -> Result<f64> {
    let n_max = spec.origin + t as usize;
    let chain = Chain::build(*spec, n_max)?;
    let nu_tail = chain.stationary()?.tail_beyond(n_max);
    Ok(tv_from_rule(&chain, rule, t, nu_tail))
}

fn tv_from_rule(chain: &Chain, rule: &QuadratureRule, t: u64, nu_tail: f64) -> f64 {
    let j = chain.spec.origin;
    let n_max = j + t as usize;
    let integrals = continuous_integrals(chain, rule, t, j, n_max);
    let mut s = NeumaierSum::new();
    for (n, i) in integrals.iter().enumerate() {
        s.add(chain.pi(n) * i.abs());
    }
    s.add(nu_tail);
    0.5 * s.value()
}
