//! Gauss rules for the continuous part of the spectral measure.
//!
//! `alpha = beta = -1/2` uses the closed-form Gauss-Chebyshev rule. Other
//! exponents go through Golub-Welsch: the nodes are eigenvalues of the
//! Jacobi matrix of the monic Jacobi recurrence, the weights are the squared
//! first components of its eigenvectors. Only those first components are
//! tracked through the implicit QL sweeps, which keeps the cost at O(K^2).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::koornwinder::KoornwinderParams;
use crate::orthopoly::JacobiParams;
use crate::sum::NeumaierSum;

/// Node cap for Golub-Welsch rules.
pub const GENERAL_NODE_CAP: usize = 100_000;
/// Node cap for the closed-form Chebyshev rule.
pub const CHEBYSHEV_NODE_CAP: usize = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureFamily {
    GaussJacobi,
    GaussChebyshev,
}

/// Nodes and positive weights integrating the continuous part of `dψ`
/// (total mass `1/(N+1)`) exactly through polynomial degree `exact_degree`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
    pub family: QuadratureFamily,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let mut s = NeumaierSum::new();
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            s.add(w * f(x));
        }
        s.value()
    }
}

/// Smallest Gauss node count exact through `degree`: `ceil((degree+1)/2)`.
pub fn nodes_for_degree(degree: usize) -> usize {
    degree / 2 + 1
}

/// Rule for the continuous part of `dψ`, exact through `degree`.
pub fn build_rule(params: KoornwinderParams, degree: usize) -> Result<QuadratureRule> {
    build_rule_with_nodes(params, nodes_for_degree(degree))
}

pub fn build_rule_with_nodes(params: KoornwinderParams, k: usize) -> Result<QuadratureRule> {
    let k = k.max(1);
    let mass = 1.0 / (params.big_n + 1.0);
    if params.is_chebyshev() {
        if k > CHEBYSHEV_NODE_CAP {
            return Err(Error::DegreeTooLarge {
                nodes: k,
                cap: CHEBYSHEV_NODE_CAP,
            });
        }
        Ok(gauss_chebyshev(k, mass))
    } else {
        if k > GENERAL_NODE_CAP {
            return Err(Error::DegreeTooLarge {
                nodes: k,
                cap: GENERAL_NODE_CAP,
            });
        }
        gauss_jacobi(params.jacobi, k, mass)
    }
}

/// `x_k = cos((2k-1)π/(2K))` with equal weights `mass / K`.
pub fn gauss_chebyshev(k: usize, mass: f64) -> QuadratureRule {
    let kf = k as f64;
    let nodes = (1..=k)
        .map(|i| ((2 * i - 1) as f64 * std::f64::consts::PI / (2.0 * kf)).cos())
        .collect();
    QuadratureRule {
        nodes,
        weights: vec![mass / kf; k],
        exact_degree: 2 * k - 1,
        family: QuadratureFamily::GaussChebyshev,
    }
}

/// Monic Jacobi recurrence: diagonal `a_n` and squared off-diagonal `b_n`
/// (`b_0` unused) for the probability-normalized weight.
fn monic_jacobi_recurrence(p: JacobiParams, k: usize) -> (Vec<f64>, Vec<f64>) {
    let (a, b) = (p.alpha, p.beta);
    let mut diag = Vec::with_capacity(k);
    let mut off2 = vec![0.0; k];
    for n in 0..k {
        let nf = n as f64;
        let s = 2.0 * nf + a + b;
        diag.push(if n == 0 {
            (b - a) / (a + b + 2.0)
        } else {
            (b * b - a * a) / (s * (s + 2.0))
        });
        if n >= 1 {
            off2[n] = if n == 1 {
                4.0 * (a + 1.0) * (b + 1.0) / ((a + b + 2.0).powi(2) * (a + b + 3.0))
            } else {
                4.0 * nf * (nf + a) * (nf + b) * (nf + a + b) / (s * s * (s + 1.0) * (s - 1.0))
            };
        }
    }
    (diag, off2)
}

/// Gauss-Jacobi rule for `C (1-x)^a (1+x)^b` scaled to total `mass`.
pub fn gauss_jacobi(p: JacobiParams, k: usize, mass: f64) -> Result<QuadratureRule> {
    let (mut d, off2) = monic_jacobi_recurrence(p, k);
    let mut e: Vec<f64> = (0..k).map(|i| if i + 1 < k { off2[i + 1].sqrt() } else { 0.0 }).collect();
    let mut z = vec![0.0; k];
    z[0] = 1.0;
    implicit_ql(&mut d, &mut e, &mut z)?;

    let mut pairs: Vec<(f64, f64)> = d.into_iter().zip(z.into_iter().map(|v| mass * v * v)).collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let (nodes, weights) = pairs.into_iter().unzip();
    Ok(QuadratureRule {
        nodes,
        weights,
        exact_degree: 2 * k - 1,
        family: QuadratureFamily::GaussJacobi,
    })
}

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix.
///
/// `d` is the diagonal, `e[i]` couples `i` and `i+1` (`e[n-1]` is scratch).
/// `z` is a row vector carried through every rotation; starting from
/// `e_0` it ends as the first components of the eigenvectors.
fn implicit_ql(d: &mut [f64], e: &mut [f64], z: &mut [f64]) -> Result<()> {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * (dd + f64::EPSILON) {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 100 {
                return Err(Error::Domain(format!("QL iteration failed to converge at index {l}")));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = (f * f + g * g).sqrt();
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}
