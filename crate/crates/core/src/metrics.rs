//! Failure curves, efficiency ratios, rank statistics and manifold metrics.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("empty sample")]
    Empty,
    #[error("baseline area under the failure curve is zero")]
    ZeroBaseline,
    #[error("curves cover different budgets ({0} vs {1})")]
    BudgetMismatch(usize, usize),
    #[error("pooled standard deviation is zero")]
    ZeroVariance,
    #[error("need more than {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("embeddings have different dimensions")]
    DimensionMismatch,
    #[error("baseline iteration time must be positive")]
    ZeroBaselineTime,
}

/// Cumulative failure rate after iterations `1..=budget`.
#[derive(Debug, Clone, PartialEq)]
pub struct FailureCurve {
    rates: Vec<f64>,
}

impl FailureCurve {
    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn budget(&self) -> usize {
        self.rates.len()
    }

    /// Rate after `iteration` iterations (1-based).
    pub fn at(&self, iteration: usize) -> f64 {
        self.rates[iteration - 1]
    }

    /// The curve restricted to the first `budget` iterations.
    pub fn truncated(&self, budget: usize) -> Self {
        Self {
            rates: self.rates[..budget.min(self.rates.len())].to_vec(),
        }
    }

    pub fn last(&self) -> f64 {
        self.rates.last().copied().unwrap_or(0.0)
    }
}

/// Fraction of seeds that failed within each number of iterations. `None`
/// marks a seed that never failed.
pub fn failure_curve(failure_iterations: &[Option<usize>], budget: usize) -> Result<FailureCurve, MetricsError> {
    if failure_iterations.is_empty() || budget == 0 {
        return Err(MetricsError::Empty);
    }
    let mut hits = vec![0usize; budget + 1];
    for it in failure_iterations.iter().flatten() {
        if (1..=budget).contains(it) {
            hits[*it] += 1;
        }
    }
    let n = failure_iterations.len() as f64;
    let mut acc = 0;
    let rates = (1..=budget)
        .map(|i| {
            acc += hits[i];
            acc as f64 / n
        })
        .collect();
    Ok(FailureCurve { rates })
}

/// Trapezoidal area under the curve over its iteration index, divided by
/// the number of intervals so that a constant curve integrates to its
/// value. A one-point curve is its own area.
pub fn aufc(curve: &FailureCurve) -> f64 {
    let r = curve.rates();
    match r.len() {
        0 => 0.0,
        1 => r[0],
        n => r.windows(2).map(|w| (w[0] + w[1]) / 2.0).sum::<f64>() / (n - 1) as f64,
    }
}

pub fn relative_efficiency(guided: &FailureCurve, baseline: &FailureCurve) -> Result<f64, MetricsError> {
    if guided.budget() != baseline.budget() {
        return Err(MetricsError::BudgetMismatch(guided.budget(), baseline.budget()));
    }
    let b = aufc(baseline);
    if b == 0.0 {
        return Err(MetricsError::ZeroBaseline);
    }
    Ok(aufc(guided) / b)
}

/// Extra mean per-iteration time relative to the baseline's.
pub fn xai_overhead(guided_mean: f64, baseline_mean: f64) -> Result<f64, MetricsError> {
    if !(baseline_mean > 0.0) {
        return Err(MetricsError::ZeroBaselineTime);
    }
    Ok((guided_mean - baseline_mean) / baseline_mean)
}

pub fn composite_efficiency(relative: f64, overhead: f64) -> f64 {
    relative / (1.0 + overhead)
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyReport {
    pub aufc_guided: f64,
    pub aufc_baseline: f64,
    pub relative_efficiency: f64,
    pub xai_overhead: f64,
    pub composite_efficiency: f64,
}

/// Efficiency of a guided campaign against the baseline, given the mean
/// per-iteration times of each.
pub fn efficiency_report(
    guided: &FailureCurve,
    baseline: &FailureCurve,
    guided_mean_time: f64,
    baseline_mean_time: f64,
) -> Result<EfficiencyReport, MetricsError> {
    let relative = relative_efficiency(guided, baseline)?;
    let overhead = xai_overhead(guided_mean_time, baseline_mean_time)?;
    Ok(EfficiencyReport {
        aufc_guided: aufc(guided),
        aufc_baseline: aufc(baseline),
        relative_efficiency: relative,
        xai_overhead: overhead,
        composite_efficiency: composite_efficiency(relative, overhead),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannWhitney {
    /// U statistic of the first sample.
    pub u: f64,
    /// U statistic of the second sample; `u + u_other == n_x * n_y`.
    pub u_other: f64,
    /// Two-sided p-value.
    pub p: f64,
    /// One-sided p-value for the first sample being stochastically larger.
    pub p_greater: f64,
    pub exact: bool,
}

/// Largest size of both samples for which the p-value is computed exactly.
pub const EXACT_LIMIT: usize = 8;

/// Doubled mid-ranks of the pooled sample (integers, 1-based ranks), and
/// the tie-group sizes.
fn doubled_midranks(x: &[f64], y: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let mut pooled: Vec<(f64, usize)> = x.iter().chain(y).copied().zip(0..).collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut ranks = vec![0u64; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        // Positions i..=j hold ranks i+1..=j+1; twice their mean is i+j+2.
        for item in &pooled[i..=j] {
            ranks[item.1] = (i + j + 2) as u64;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

/// Mann-Whitney U test. Exact permutation p-values when both samples have
/// at most [`EXACT_LIMIT`] values; otherwise the normal approximation with
/// tie and continuity corrections.
pub fn mann_whitney_u(x: &[f64], y: &[f64]) -> Result<MannWhitney, MetricsError> {
    if x.is_empty() || y.is_empty() {
        return Err(MetricsError::Empty);
    }
    let (nx, ny) = (x.len(), y.len());
    let (ranks, ties) = doubled_midranks(x, y);
    let rank_sum2: u64 = ranks[..nx].iter().sum();
    // 2U = 2R - nx(nx + 1); centred at nx*ny.
    let u2 = rank_sum2 as i64 - (nx * (nx + 1)) as i64;
    let prod = (nx * ny) as f64;
    let u = u2 as f64 / 2.0;
    if nx <= EXACT_LIMIT && ny <= EXACT_LIMIT {
        let (p, p_greater) = exact_p(&ranks, nx, u2);
        return Ok(MannWhitney {
            u,
            u_other: prod - u,
            p,
            p_greater,
            exact: true,
        });
    }
    let n = (nx + ny) as f64;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * (n - 1.0));
    let var = prod / 12.0 * ((n + 1.0) - tie_term);
    let mu = prod / 2.0;
    let (p, p_greater) = if var > 0.0 {
        let sd = libm::sqrt(var);
        let z = ((u - mu).abs() - 0.5).max(0.0) / sd;
        let zg = (u - mu - 0.5) / sd;
        (
            libm::erfc(z / core::f64::consts::SQRT_2).min(1.0),
            0.5 * libm::erfc(zg / core::f64::consts::SQRT_2),
        )
    } else {
        (1.0, 1.0)
    };
    Ok(MannWhitney {
        u,
        u_other: prod - u,
        p,
        p_greater,
        exact: false,
    })
}

/// Counts, over every way of drawing `nx` of the pooled doubled ranks, how
/// often 2U is at least as far from its mean as observed (two-sided) and at
/// least as large (one-sided).
fn exact_p(ranks: &[u64], nx: usize, u2_obs: i64) -> (f64, f64) {
    let total_sum: u64 = ranks.iter().sum();
    let width = total_sum as usize + 1;
    // ways[j][s]: subsets of size j with doubled-rank sum s.
    let mut ways = vec![vec![0u64; width]; nx + 1];
    ways[0][0] = 1;
    for &r in ranks {
        for j in (1..=nx).rev() {
            for s in (r as usize..width).rev() {
                ways[j][s] += ways[j - 1][s - r as usize];
            }
        }
    }
    let ny = ranks.len() - nx;
    let centre = (nx * ny) as i64;
    let offset = (nx * (nx + 1)) as i64;
    let dev_obs = (u2_obs - centre).abs();
    let (mut total, mut extreme, mut greater) = (0u64, 0u64, 0u64);
    for (s, &count) in ways[nx].iter().enumerate() {
        if count == 0 {
            continue;
        }
        let u2 = s as i64 - offset;
        total += count;
        if (u2 - centre).abs() >= dev_obs {
            extreme += count;
        }
        if u2 >= u2_obs {
            greater += count;
        }
    }
    (extreme as f64 / total as f64, greater as f64 / total as f64)
}

fn variance(xs: &[f64], m: f64) -> f64 {
    xs.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Standardised mean difference with the pooled standard deviation.
pub fn cohens_d(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    if x.len() < 2 || y.len() < 2 {
        return Err(MetricsError::TooFewPoints {
            need: 1,
            got: x.len().min(y.len()),
        });
    }
    let (mx, my) = (mean(x).expect("non-empty"), mean(y).expect("non-empty"));
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let pooled = ((nx - 1.0) * variance(x, mx) + (ny - 1.0) * variance(y, my)) / (nx + ny - 2.0);
    if !(pooled > 0.0) {
        return Err(MetricsError::ZeroVariance);
    }
    Ok((mx - my) / libm::sqrt(pooled))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EffectSize {
    Negligible,
    Small,
    Medium,
    Large,
}

impl EffectSize {
    pub fn of(d: f64) -> Self {
        match d.abs() {
            a if a < 0.2 => EffectSize::Negligible,
            a if a < 0.5 => EffectSize::Small,
            a if a < 0.8 => EffectSize::Medium,
            _ => EffectSize::Large,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EffectSize::Negligible => "negligible",
            EffectSize::Small => "small",
            EffectSize::Medium => "medium",
            EffectSize::Large => "large",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityCoverage {
    pub density: f64,
    pub coverage: f64,
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum())
}

/// k-NN manifold density and coverage of `generated` with respect to
/// `real`. Each real point owns the closed ball reaching its k-th nearest
/// other real point.
pub fn density_coverage(real: &[Vec<f64>], generated: &[Vec<f64>], k: usize) -> Result<DensityCoverage, MetricsError> {
    if k == 0 || real.len() <= k {
        return Err(MetricsError::TooFewPoints { need: k, got: real.len() });
    }
    if generated.is_empty() {
        return Err(MetricsError::Empty);
    }
    let dim = real[0].len();
    if real.iter().chain(generated).any(|v| v.len() != dim) {
        return Err(MetricsError::DimensionMismatch);
    }
    let radii: Vec<f64> = real
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut d: Vec<f64> = real
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, q)| euclid(r, q))
                .collect();
            d.sort_by(f64::total_cmp);
            d[k - 1]
        })
        .collect();
    let mut covered = vec![false; real.len()];
    let mut hits = 0usize;
    for g in generated {
        for (i, r) in real.iter().enumerate() {
            if euclid(g, r) <= radii[i] {
                hits += 1;
                covered[i] = true;
            }
        }
    }
    Ok(DensityCoverage {
        density: hits as f64 / (k * generated.len()) as f64,
        coverage: covered.iter().filter(|&&c| c).count() as f64 / real.len() as f64,
    })
}
