use serde_json::{json, Value};

use koornwalk::analysis::{log_spaced_times, mixing_time, oracle_tv_curve, SupNormMode, UpperBound};
use koornwalk::chain::lambda_min;
use koornwalk::oracle::{monte_carlo, truncated_power, tv_between, Reference};
use koornwalk::spectral::{distribution_at, nodes_for_degree, tv_distance, tv_distance_with, QuadratureFamily};
use koornwalk::{Chain, ChainSpec, Error, KoornwinderParams, TvOptions};

use crate::output::{Cell, Table};
use crate::{ChainArgs, Failure, Lambda, QuadArgs, TimeArgs, Truncation};

pub fn resolve(args: &ChainArgs) -> Result<ChainSpec, Failure> {
    let params = KoornwinderParams::new(args.alpha, args.beta, args.big_n)?;
    let lambda = match args.lambda {
        Lambda::Auto => lambda_min(params)?,
        Lambda::Value(v) => v,
    };
    Ok(ChainSpec::new(params, lambda, args.origin)?)
}

fn family(params: KoornwinderParams) -> QuadratureFamily {
    if params.is_chebyshev() {
        QuadratureFamily::GaussChebyshev
    } else {
        QuadratureFamily::GaussJacobi
    }
}

/// Metadata every output starts with.
pub fn header(command: &str, args: &ChainArgs, spec: &ChainSpec) -> Table {
    let mut t = Table::default();
    t.meta("tool", "koornwalk");
    t.meta("version", env!("CARGO_PKG_VERSION"));
    t.meta("command", command);
    t.meta_float("alpha", spec.params.alpha());
    t.meta_float("beta", spec.params.beta());
    t.meta_float("N", spec.params.big_n);
    t.meta(
        "lambda_requested",
        match args.lambda {
            Lambda::Auto => Value::from("auto"),
            Lambda::Value(v) => json!(v),
        },
    );
    t.meta_float("lambda", spec.lambda);
    t.meta("origin", spec.origin);
    t
}

fn quadrature_meta(t: &mut Table, params: KoornwinderParams, max_nodes: usize) {
    let fam = serde_json::to_value(family(params)).unwrap_or(Value::Null);
    if max_nodes == 0 {
        t.meta("quadrature", "none");
    } else {
        t.meta(
            "quadrature",
            json!({ "family": fam, "max_nodes": max_nodes, "max_exact_degree": 2 * max_nodes - 1 }),
        );
    }
}

fn with_columns(mut t: Table, columns: &[&str]) -> Table {
    t.columns = columns.iter().map(|c| c.to_string()).collect();
    t
}

pub fn chain(args: &ChainArgs, rows: usize) -> Result<Table, Failure> {
    if rows == 0 {
        return Err(Failure::invalid("--rows must be at least 1"));
    }
    let spec = resolve(args)?;
    let chain = Chain::build(spec, rows - 1)?;
    let mut t = with_columns(
        header("chain", args, &spec),
        &["n", "p", "r", "q", "p_shifted", "r_shifted", "q_shifted", "pi", "nu"],
    );
    quadrature_meta(&mut t, spec.params, 0);
    t.meta_float("rho", chain.rho());
    let nu = match chain.stationary() {
        Ok(nu) => {
            t.meta("stationary", "positive recurrent");
            Some(nu)
        }
        Err(Error::NotPositiveRecurrent { .. }) => {
            t.meta("stationary", "not positive recurrent: nu column left empty");
            None
        }
        Err(e) => return Err(e.into()),
    };
    for n in 0..rows {
        let (u, s) = (chain.unshifted[n], chain.shifted[n]);
        t.push(vec![
            n.into(),
            u.p.into(),
            u.r.into(),
            u.q.into(),
            s.p.into(),
            s.r.into(),
            s.q.into(),
            chain.pi(n).into(),
            nu.as_ref().map(|d| d.get(n)).into(),
        ]);
    }
    Ok(t)
}

pub fn parse_times(args: &TimeArgs) -> Result<Vec<u64>, Failure> {
    let mut times = if let Some(r) = &args.t_range {
        let parts: Vec<&str> = r.split(':').collect();
        let bad = || Failure::invalid(format!("--t-range expects MIN:MAX:COUNT, got {r:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: u64 = parts[0].parse().map_err(|_| bad())?;
        let hi: u64 = parts[1].parse().map_err(|_| bad())?;
        let count: usize = parts[2].parse().map_err(|_| bad())?;
        if lo > hi || count == 0 {
            return Err(bad());
        }
        log_spaced_times(lo, hi, count)
    } else {
        args.t.clone()
    };
    if times.is_empty() {
        return Err(Failure::invalid("give times with --t or --t-range"));
    }
    times.sort_unstable();
    times.dedup();
    Ok(times)
}

pub fn tv(
    args: &ChainArgs,
    times: &TimeArgs,
    quad: &QuadArgs,
    oracle_cap: u64,
    anchor: Option<u64>,
) -> Result<Table, Failure> {
    let spec = resolve(args)?;
    let times = parse_times(times)?;
    let opts = TvOptions {
        node_cap: quad.quad_cap,
        allow_capped: quad.allow_capped,
    };
    let mut t = with_columns(
        header("tv", args, &spec),
        &["t", "tv_spectral", "tv_oracle", "bound", "tv_sqrt_t", "nodes", "error_estimate"],
    );

    let estimates = times
        .iter()
        .map(|&s| tv_distance_with(&spec, s, &opts))
        .collect::<Result<Vec<_>, _>>()?;
    let max_nodes = estimates.iter().map(|e| e.nodes).max().unwrap_or(0);
    quadrature_meta(&mut t, spec.params, max_nodes);
    t.meta("oracle_cap", oracle_cap);

    let oracle_max = times.iter().copied().filter(|&s| s <= oracle_cap).max();
    let oracle = match oracle_max {
        Some(m) => Some(oracle_tv_curve(&spec, m)?),
        None => None,
    };

    let bound = match anchor {
        Some(a) => {
            if a < 1 {
                return Err(Failure::invalid("--anchor must be at least 1"));
            }
            let mode = SupNormMode::default_for(spec.params);
            let t_max = times.last().copied().unwrap_or(a).max(a);
            let ub = UpperBound::new(&spec, t_max, mode)?;
            let c = ub.calibrate(a, tv_distance(&spec, a)?);
            t.meta("bound_anchor", a);
            t.meta_float("bound_constant", c);
            t.meta("sup_norm_mode", serde_json::to_value(mode).unwrap_or(Value::Null));
            Some((ub, c))
        }
        None => None,
    };

    for (&s, est) in times.iter().zip(&estimates) {
        let oracle_v = oracle
            .as_ref()
            .and_then(|c| (s <= oracle_cap).then(|| c[s as usize]));
        let bound_v = bound.as_ref().and_then(|(ub, c)| (s >= 1).then(|| ub.eval(s, *c)));
        t.push(vec![
            s.into(),
            est.value.into(),
            oracle_v.into(),
            bound_v.into(),
            (est.value * (s as f64).sqrt()).into(),
            est.nodes.into(),
            est.error_estimate.into(),
        ]);
    }
    Ok(t)
}

pub fn mix(args: &ChainArgs, eps: &[f64], t_cap: u64) -> Result<Table, Failure> {
    let spec = resolve(args)?;
    let mut t = with_columns(header("mix", args, &spec), &["eps", "t_mix", "tv_at_t_mix", "status"]);
    t.meta("t_cap", t_cap);
    let mut max_nodes = 0;
    for &e in eps {
        match mixing_time(&spec, e, t_cap) {
            Ok(tm) => {
                max_nodes = max_nodes.max(nodes_for_degree(2 * (spec.origin + tm as usize)));
                t.push(vec![e.into(), tm.into(), tv_distance(&spec, tm)?.into(), "mixed".into()]);
            }
            Err(Error::NotMixedByCap { tv, .. }) => {
                t.push(vec![e.into(), Cell::Missing, tv.into(), "not mixed by cap".into()]);
            }
            Err(err) => return Err(err.into()),
        }
    }
    quadrature_meta(&mut t, spec.params, max_nodes);
    Ok(t)
}

pub fn pt(args: &ChainArgs, steps: u64, truncation: Truncation, oracle_cap: u64) -> Result<Table, Failure> {
    let spec = resolve(args)?;
    let top = spec.origin + steps as usize;
    let d = distribution_at(&spec, steps)?;
    let size = match truncation {
        Truncation::Auto => top + 1,
        Truncation::Sites(m) => m,
    };
    let oracle = if steps <= oracle_cap {
        Some(truncated_power(&spec, steps, size)?)
    } else {
        None
    };
    let nu = Chain::build(spec, top)?.stationary().ok();

    let mut t = with_columns(header("pt", args, &spec), &["n", "spectral", "matrix_power", "nu"]);
    t.meta("t", steps);
    quadrature_meta(&mut t, spec.params, nodes_for_degree(2 * top));
    t.meta_float("mass_deficit", d.mass_deficit);
    if let Some(o) = &oracle {
        t.meta("truncation", size);
        t.meta_float("tv_spectral_vs_oracle", tv_between(&d, Reference::Snapshot(o)));
    }
    if let Some(nu) = &nu {
        t.meta_float("tv_to_stationary", tv_between(&d, Reference::Stationary(nu)));
    }
    for n in 0..=top {
        t.push(vec![
            n.into(),
            d.get(n).into(),
            oracle.as_ref().map(|o| o.get(n)).into(),
            nu.as_ref().map(|v| v.get(n)).into(),
        ]);
    }
    Ok(t)
}

pub fn simulate(args: &ChainArgs, steps: u64, walkers: u64, seed: u64) -> Result<Table, Failure> {
    let spec = resolve(args)?;
    let top = spec.origin + steps as usize;
    let mc = monte_carlo(&spec, steps, walkers, seed)?;
    let exact = truncated_power(&spec, steps, top)?;
    let mut t = with_columns(header("simulate", args, &spec), &["n", "empirical", "exact"]);
    quadrature_meta(&mut t, spec.params, 0);
    t.meta("t", steps);
    t.meta("walkers", walkers);
    t.meta("seed", seed);
    t.meta("generator", "chacha8, one stream per walker");
    t.meta_float("tv_to_exact", tv_between(&mc, Reference::Snapshot(&exact)));
    for n in 0..=top {
        t.push(vec![n.into(), mc.get(n).into(), exact.get(n).into()]);
    }
    Ok(t)
}
