//! Ground truth independent of the spectral representation: exact
//! distributions by repeated row-vector multiplication with the truncated
//! tridiagonal matrix, and Monte Carlo simulation.

use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::chain::{Chain, ChainSpec, StationaryDistribution};
use crate::error::{Error, Result};
use crate::spectral::{DistributionSnapshot, Method};
use crate::sum::NeumaierSum;

/// Walkers simulated per parallel task.
const WALKER_CHUNK: u64 = 4096;

/// Shifted transition matrix on sites `0..=M`; the step out of site `M`
/// (probability `p_M`) leaves the truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalOperator {
    /// `sub[n] = q_{n+1}`, the step from `n+1` down to `n`.
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    /// `sup[n] = p_n`, the step from `n` up to `n+1`.
    pub sup: Vec<f64>,
    /// `p_M`.
    pub leak: f64,
}

impl TridiagonalOperator {
    pub fn from_chain(chain: &Chain, size: usize) -> Self {
        let c = &chain.shifted[..=size];
        Self {
            sub: c[1..].iter().map(|c| c.q).collect(),
            diag: c.iter().map(|c| c.r).collect(),
            sup: c[..size].iter().map(|c| c.p).collect(),
            leak: c[size].p,
        }
    }

    pub fn size(&self) -> usize {
        self.diag.len() - 1
    }

    /// `out = μ P` restricted to `0..=M`, each entry summed with compensation.
    pub fn apply(&self, mu: &[f64], out: &mut [f64]) {
        self.apply_range(mu, out, 0, self.size());
    }

    /// As [`apply`](Self::apply) but writes only `out[lo..=hi]`; exact when
    /// `μ` vanishes outside `lo+1..hi`.
    pub fn apply_range(&self, mu: &[f64], out: &mut [f64], lo: usize, hi: usize) {
        let m = self.size();
        for n in lo..=hi.min(m) {
            let mut s = NeumaierSum::new();
            if n > 0 {
                s.add(mu[n - 1] * self.sup[n - 1]);
            }
            s.add(mu[n] * self.diag[n]);
            if n < m {
                s.add(mu[n + 1] * self.sub[n]);
            }
            out[n] = s.value();
        }
    }
}

/// Calls `visit(s, μ_s)` for `s = 0..=t`, on sites `0..=size`.
///
/// Exact whenever `size >= origin + t`, since the walk cannot reach
/// `size + 1` in `t` steps.
pub fn power_sweep<F: FnMut(u64, &[f64])>(spec: &ChainSpec, t: u64, size: usize, mut visit: F) -> Result<()> {
    let j = spec.origin;
    if (size as u64) < j as u64 + t {
        return Err(Error::TruncationTooSmall { size, origin: j, t });
    }
    let chain = Chain::build(*spec, size)?;
    let op = TridiagonalOperator::from_chain(&chain, size);
    let mut mu = vec![0.0; size + 1];
    let mut next = vec![0.0; size + 1];
    mu[j] = 1.0;
    visit(0, &mu);
    for s in 1..=t {
        let reach = s as usize;
        op.apply_range(&mu, &mut next, j.saturating_sub(reach), j + reach);
        std::mem::swap(&mut mu, &mut next);
        visit(s, &mu);
    }
    Ok(())
}

/// Exact `μ_t` by `t` row-vector multiplications on sites `0..=size`.
pub fn truncated_power(spec: &ChainSpec, t: u64, size: usize) -> Result<DistributionSnapshot> {
    let mut last = Vec::new();
    power_sweep(spec, t, size, |s, mu| {
        if s == t {
            last = mu.to_vec();
        }
    })?;
    Ok(DistributionSnapshot::from_raw(t, spec.origin, last, Method::MatrixPower))
}

/// Uniform on `[0, 1)` from the top 53 bits.
fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Empirical `μ_t` from `walkers` independent trajectories.
///
/// Walker `w` draws from ChaCha8 seeded by `seed` on stream `w`, so the
/// result depends only on `(spec, t, walkers, seed)`. Each step compares
/// one uniform against the cumulative `(q, r, p)` in that order.
pub fn monte_carlo(spec: &ChainSpec, t: u64, walkers: u64, seed: u64) -> Result<DistributionSnapshot> {
    if walkers == 0 {
        return Err(Error::InvalidParams("walkers must be at least 1".into()));
    }
    let j = spec.origin;
    let top = j + t as usize;
    let chain = Chain::build(*spec, top)?;
    let cum: Vec<(f64, f64)> = chain.shifted[..=top].iter().map(|c| (c.q, c.q + c.r)).collect();

    let chunks = walkers.div_ceil(WALKER_CHUNK);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut counts = vec![0u64; top + 1];
            let start = chunk * WALKER_CHUNK;
            let end = (start + WALKER_CHUNK).min(walkers);
            for w in start..end {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(w);
                let mut site = j;
                for _ in 0..t {
                    let u = unit(&mut rng);
                    let (down, stay) = cum[site];
                    if u < down {
                        site -= 1;
                    } else if u >= stay {
                        site += 1;
                    }
                }
                counts[site] += 1;
            }
            counts
        })
        .reduce(
            || vec![0u64; top + 1],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );

    let total = walkers as f64;
    let probs = counts.into_iter().map(|c| c as f64 / total).collect();
    Ok(DistributionSnapshot::from_raw(t, j, probs, Method::MonteCarlo))
}

/// The second argument of [`tv_between`].
#[derive(Debug, Clone, Copy)]
pub enum Reference<'a> {
    Snapshot(&'a DistributionSnapshot),
    Stationary(&'a StationaryDistribution),
}

/// `½ Σ |a_n - b_n|`, padding the shorter vector with zeros.
///
/// Against a stationary reference the mass of `ν` beyond its stored sites
/// is added whole. That is exact when `a` has no mass there and an upper
/// bound otherwise.
pub fn tv_between(a: &DistributionSnapshot, b: Reference<'_>) -> f64 {
    let mut s = NeumaierSum::new();
    match b {
        Reference::Snapshot(b) => {
            let len = a.probabilities.len().max(b.probabilities.len());
            for n in 0..len {
                s.add((a.get(n) - b.get(n)).abs());
            }
        }
        Reference::Stationary(nu) => {
            let len = a.probabilities.len().max(nu.probabilities.len());
            for n in 0..len {
                s.add((a.get(n) - nu.get(n)).abs());
            }
            s.add(nu.tail_mass);
        }
    }
    0.5 * s.value()
}
