//! Exact binomial moments by enumeration.
//!
//! Used to check two facts about `B ~ Bin(n, p)` that control the random
//! cell counts of the histogram: central moments grow like `(np)^{q/2}`,
//! and the truncated inverse moment `E[1{B>0} (1/B − 1/(np))^q]` decays like
//! `(np)^{-3q/2}`. Neither constant is known, so the sweep only checks for
//! the absence of an upward trend.

use rayon::prelude::*;
use serde::Serialize;
use statrs::function::factorial::ln_binomial;

use crate::error::{domain, Result};

/// Largest `n` accepted for enumeration.
pub const MAX_ENUMERATION_N: u64 = 100_000;

/// Sweeps skip points with `np` below this.
pub const MIN_SWEEP_NP: f64 = 2.0;

/// Largest-decade maximum may exceed the middle-decade maximum by this factor.
pub const TREND_TOLERANCE: f64 = 1.2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BinomSpec {
    pub n: u64,
    pub prob: f64,
    pub order: u32,
}

impl BinomSpec {
    /// `prob = 1` is accepted as a limiting case.
    pub fn new(n: u64, prob: f64, order: u32) -> Result<Self> {
        if n == 0 || n > MAX_ENUMERATION_N {
            return Err(domain(format!(
                "n = {n} outside 1..={MAX_ENUMERATION_N} for exact enumeration"
            )));
        }
        if !(prob > 0.0 && prob <= 1.0) {
            return Err(domain(format!("probability {prob} not in (0,1]")));
        }
        if order < 2 {
            return Err(domain(format!("moment order {order} must exceed 1")));
        }
        Ok(Self { n, prob, order })
    }

    pub fn mean(&self) -> f64 {
        self.n as f64 * self.prob
    }

    /// `(k, P(B = k))` for every `k` with nonzero mass.
    fn weights(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        let n = self.n;
        let p = self.prob;
        let (ln_p, ln_q) = (p.ln(), (-p).ln_1p());
        (0..=n).filter_map(move |k| {
            if p == 1.0 {
                return (k == n).then_some((k, 1.0));
            }
            let lw = ln_binomial(n, k) + k as f64 * ln_p + (n - k) as f64 * ln_q;
            Some((k, lw.exp()))
        })
    }
}

/// Neumaier-compensated sum.
#[derive(Default)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// `E[g(B)]`, normalised by the enumerated mass so that rounding in the
/// log-space weights does not bias the result.
fn expectation(spec: &BinomSpec, g: impl Fn(u64) -> f64) -> f64 {
    let mut acc = CompensatedSum::default();
    let mut mass = CompensatedSum::default();
    for (k, w) in spec.weights() {
        acc.add(w * g(k));
        mass.add(w);
    }
    acc.value() / mass.value()
}

/// `E[(B − np)^q]`.
pub fn central_moment_exact(spec: &BinomSpec) -> f64 {
    let mean = spec.mean();
    let q = spec.order as i32;
    expectation(spec, |k| (k as f64 - mean).powi(q))
}

/// `E[1{B > 0} (1/B − 1/(np))^q]`.
pub fn truncated_inverse_moment(spec: &BinomSpec) -> f64 {
    let inv_mean = 1.0 / spec.mean();
    let q = spec.order as i32;
    expectation(spec, |k| if k == 0 { 0.0 } else { (1.0 / k as f64 - inv_mean).powi(q) })
}

/// `truncated_inverse_moment / (np)^{-3q/2}`.
pub fn inverse_moment_ratio(spec: &BinomSpec) -> f64 {
    truncated_inverse_moment(spec) * spec.mean().powf(1.5 * spec.order as f64)
}

/// `central_moment_exact / (np)^{q/2}`.
pub fn central_moment_ratio(spec: &BinomSpec) -> f64 {
    central_moment_exact(spec) / spec.mean().powf(0.5 * spec.order as f64)
}

/// The three terms of
/// `1/k − 1/μ = (μ−k)/μ² + (μ−k)²/μ³ + (μ−k)³/(k μ³)` for `μ = np`.
pub fn inverse_decomposition_terms(k: u64, mean: f64) -> [f64; 3] {
    let d = mean - k as f64;
    let m3 = mean * mean * mean;
    [d / (mean * mean), d * d / m3, d * d * d / (k as f64 * m3)]
}

/// Relative tolerance for the decomposition identity.
pub const IDENTITY_TOLERANCE: f64 = 1e-10;

/// Largest relative residual of the decomposition identity over
/// `k = 1..=n`, scaled by the sum of the absolute terms.
pub fn decomposition_residual(n: u64, mean: f64) -> f64 {
    (1..=n)
        .map(|k| {
            let lhs = 1.0 / k as f64 - 1.0 / mean;
            let terms = inverse_decomposition_terms(k, mean);
            let rhs: f64 = terms.iter().sum();
            let scale = terms.iter().map(|t| t.abs()).sum::<f64>().max(lhs.abs());
            if scale == 0.0 {
                0.0
            } else {
                (lhs - rhs).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub n: u64,
    pub prob: f64,
    pub order: u32,
    pub np: f64,
    pub central_ratio: f64,
    pub inverse_ratio: f64,
    pub identity_residual: f64,
}

/// Maximum of a ratio over each `np` decade `[10^d, 10^{d+1})`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrendCheck {
    pub order: u32,
    pub statistic: &'static str,
    pub max: f64,
    pub decade_max: Vec<(i32, f64)>,
    pub largest_over_middle: Option<f64>,
    pub bounded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    /// `(n, p, q)` skipped for `np < 2`.
    pub excluded: Vec<(u64, f64, u32)>,
    pub trends: Vec<TrendCheck>,
    pub max_central_ratio: f64,
    pub max_inverse_ratio: f64,
    pub max_identity_residual: f64,
    pub identity_holds: bool,
    /// `"bounded"` when every trend check passes, `"growing"` otherwise.
    pub verdict: &'static str,
}

impl SweepReport {
    pub fn bounded(&self) -> bool {
        self.verdict == "bounded"
    }
}

fn trend(points: &[&SweepPoint], order: u32, statistic: &'static str, f: fn(&SweepPoint) -> f64) -> TrendCheck {
    let mut decade_max: Vec<(i32, f64)> = Vec::new();
    for p in points {
        let d = p.np.log10().floor() as i32;
        let v = f(p);
        match decade_max.iter_mut().find(|(k, _)| *k == d) {
            Some((_, m)) => *m = m.max(v),
            None => decade_max.push((d, v)),
        }
    }
    decade_max.sort_by_key(|&(d, _)| d);
    let largest_over_middle = match decade_max.as_slice() {
        [.., (_, middle), (_, largest)] => Some(largest / middle),
        _ => None,
    };
    let max = decade_max.iter().map(|&(_, v)| v).fold(f64::NEG_INFINITY, f64::max);
    TrendCheck {
        order,
        statistic,
        max,
        decade_max,
        largest_over_middle,
        bounded: max.is_finite() && largest_over_middle.is_none_or(|r| r <= TREND_TOLERANCE),
    }
}

/// Evaluates both ratios on the `n × p × q` grid and checks each
/// (statistic, order) pair for an upward trend in `np`.
pub fn binomial_ratio_sweep(n_values: &[u64], p_values: &[f64], q_values: &[u32]) -> Result<SweepReport> {
    let mut specs = Vec::new();
    let mut excluded = Vec::new();
    for &q in q_values {
        for &n in n_values {
            for &p in p_values {
                let spec = BinomSpec::new(n, p, q)?;
                if spec.mean() < MIN_SWEEP_NP {
                    excluded.push((n, p, q));
                } else {
                    specs.push(spec);
                }
            }
        }
    }
    let points: Vec<SweepPoint> = specs
        .par_iter()
        .map(|s| SweepPoint {
            n: s.n,
            prob: s.prob,
            order: s.order,
            np: s.mean(),
            central_ratio: central_moment_ratio(s),
            inverse_ratio: inverse_moment_ratio(s),
            identity_residual: decomposition_residual(s.n, s.mean()),
        })
        .collect();

    let mut trends = Vec::new();
    for &q in q_values {
        let at_q: Vec<&SweepPoint> = points.iter().filter(|p| p.order == q).collect();
        if at_q.is_empty() {
            continue;
        }
        trends.push(trend(&at_q, q, "central_moment", |p| p.central_ratio.abs()));
        trends.push(trend(&at_q, q, "truncated_inverse_moment", |p| p.inverse_ratio.abs()));
    }
    let max_of = |f: fn(&SweepPoint) -> f64| points.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let verdict = if trends.iter().all(|t| t.bounded) { "bounded" } else { "growing" };
    let max_identity_residual = max_of(|p| p.identity_residual).max(0.0);
    Ok(SweepReport {
        max_identity_residual,
        identity_holds: max_identity_residual <= IDENTITY_TOLERANCE,
        max_central_ratio: max_of(|p| p.central_ratio),
        max_inverse_ratio: max_of(|p| p.inverse_ratio),
        points,
        excluded,
        trends,
        verdict,
    })
}

/// The sweep run by `simulate verify-binomial` without a config:
/// `n = 50·2^k ≤ 3200`, `p ∈ {0.05, 0.1, 0.2}`, `q ∈ {2, 4}`.
pub fn default_sweep() -> Result<SweepReport> {
    let n_values: Vec<u64> = (0..7).map(|k| 50 << k).collect();
    binomial_ratio_sweep(&n_values, &[0.05, 0.1, 0.2], &[2, 4])
}
