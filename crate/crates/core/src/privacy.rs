//! Privacy mechanisms and (epsilon, delta) budget arithmetic.

use std::collections::BTreeMap;

use crate::error::{invalid, Error, Result};
use crate::rng::{laplace, rng_from_seed};

/// An (epsilon, delta) differential privacy guarantee.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyBudget {
    epsilon: f64,
    delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::OutOfRange {
                name: "epsilon",
                value: epsilon,
                reason: "must be positive and finite",
            });
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::OutOfRange {
                name: "delta",
                value: delta,
                reason: "must lie in (0, 1)",
            });
        }
        Ok(Self { epsilon, delta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `(epsilon / parts, delta / parts)`.
    pub fn split_evenly(&self, parts: usize) -> Result<Self> {
        if parts == 0 {
            return Err(invalid("cannot split a budget into zero parts"));
        }
        Self::new(self.epsilon / parts as f64, self.delta / parts as f64)
    }

    pub fn halved(&self) -> Self {
        Self {
            epsilon: self.epsilon / 2.0,
            delta: self.delta / 2.0,
        }
    }
}

/// Noise standard deviation of the Gaussian mechanism,
/// `sensitivity * sqrt(2 ln(1.25 / delta)) / epsilon`, valid for `epsilon < 1`.
pub fn gaussian_sigma(sensitivity: f64, budget: PrivacyBudget) -> Result<f64> {
    if !(sensitivity >= 0.0 && sensitivity.is_finite()) {
        return Err(Error::OutOfRange {
            name: "sensitivity",
            value: sensitivity,
            reason: "must be finite and nonnegative",
        });
    }
    if budget.epsilon >= 1.0 {
        return Err(Error::OutOfRange {
            name: "epsilon",
            value: budget.epsilon,
            reason: "the Gaussian mechanism calibration requires epsilon < 1; split the budget first",
        });
    }
    Ok(sensitivity * (2.0 * (1.25 / budget.delta).ln()).sqrt() / budget.epsilon)
}

/// How histogram bin ids map to intervals.
#[derive(Debug, Clone, PartialEq)]
pub enum BinFamily {
    /// Bin `k` is `(k width, (k + 1) width]`.
    Linear { width: f64 },
    /// Bin `k` is `[ratio^k, ratio^(k+1))`, plus a reserved bin for exact zero.
    Geometric { ratio: f64, zero_bin: i64 },
    /// Ids carry no geometric meaning.
    Custom,
}

/// Released masses of a stability-based histogram. Only bins that survived
/// thresholding are present and every stored mass is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramOutcome {
    pub counts: BTreeMap<i64, f64>,
    pub bins: BinFamily,
}

impl HistogramOutcome {
    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Bin with the largest released mass; ties go to the smallest id.
    pub fn max_bin(&self) -> Option<(i64, f64)> {
        self.counts
            .iter()
            .fold(None, |best: Option<(i64, f64)>, (&k, &p)| match best {
                Some((_, bp)) if bp >= p => best,
                _ => Some((k, p)),
            })
    }

    pub fn with_bins(mut self, bins: BinFamily) -> Self {
        self.bins = bins;
        self
    }
}

/// Exact normalized counts `count_k / n_total` of the occupied bins.
pub fn exact_histogram(values: &[i64], n_total: usize) -> BTreeMap<i64, f64> {
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for &v in values {
        *counts.entry(v).or_default() += 1;
    }
    counts
        .into_iter()
        .map(|(k, c)| (k, c as f64 / n_total as f64))
        .collect()
}

/// Laplace noise scale of [`stable_histogram`].
pub fn histogram_noise_scale(n_total: usize, budget: PrivacyBudget) -> f64 {
    2.0 / (budget.epsilon * n_total as f64)
}

/// Release threshold of [`stable_histogram`].
pub fn histogram_threshold(n_total: usize, budget: PrivacyBudget) -> f64 {
    histogram_noise_scale(n_total, budget) * (2.0 / budget.delta).ln() + 1.0 / n_total as f64
}

/// Stability-based histogram over an unbounded family of bins.
///
/// Each occupied bin gets `p_k + Lap(2 / (epsilon n))`; bins whose noisy mass
/// falls below `2 / (epsilon n) ln(2 / delta) + 1 / n` are dropped. Empty bins
/// never receive noise, so the number of possible bins is irrelevant.
pub fn stable_histogram(
    values: &[i64],
    n_total: usize,
    budget: PrivacyBudget,
    seed: u64,
) -> Result<HistogramOutcome> {
    if n_total == 0 {
        return Err(invalid("n_total must be at least 1"));
    }
    if values.len() > n_total {
        return Err(invalid(format!(
            "{} values exceed n_total = {n_total}",
            values.len()
        )));
    }
    if budget.delta >= 1.0 / n_total as f64 {
        return Err(Error::OutOfRange {
            name: "delta",
            value: budget.delta,
            reason: "stability histogram requires delta < 1 / n",
        });
    }
    let scale = histogram_noise_scale(n_total, budget);
    let threshold = histogram_threshold(n_total, budget);
    let mut rng = rng_from_seed(seed);
    let counts = exact_histogram(values, n_total)
        .into_iter()
        .filter_map(|(k, p)| {
            let noisy = p + laplace(&mut rng, scale);
            (noisy >= threshold && noisy > 0.0).then_some((k, noisy))
        })
        .collect();
    Ok(HistogramOutcome {
        counts,
        bins: BinFamily::Custom,
    })
}

/// Per-query budget under which `k` adaptive accesses compose to `total`:
/// `(epsilon / (2 sqrt(2 k ln(2 / delta))), delta / (2 k))`. Needs `epsilon <= 0.9`.
pub fn advanced_composition_split(total: PrivacyBudget, k: usize) -> Result<PrivacyBudget> {
    if k == 0 {
        return Err(invalid("number of queries must be at least 1"));
    }
    check_advanced_range(total.epsilon)?;
    let kf = k as f64;
    PrivacyBudget::new(
        total.epsilon / (2.0 * (2.0 * kf * (2.0 / total.delta).ln()).sqrt()),
        total.delta / (2.0 * kf),
    )
}

/// Inverse of [`advanced_composition_split`]: the end-to-end guarantee of `k`
/// accesses at `per_query`.
pub fn advanced_composition_total(per_query: PrivacyBudget, k: usize) -> Result<PrivacyBudget> {
    if k == 0 {
        return Err(invalid("number of queries must be at least 1"));
    }
    let kf = k as f64;
    let delta = per_query.delta * 2.0 * kf;
    let total = PrivacyBudget::new(
        per_query.epsilon * 2.0 * (2.0 * kf * (2.0 / delta).ln()).sqrt(),
        delta,
    )?;
    check_advanced_range(total.epsilon)?;
    Ok(total)
}

fn check_advanced_range(epsilon: f64) -> Result<()> {
    if epsilon > 0.9 {
        return Err(Error::OutOfRange {
            name: "epsilon",
            value: epsilon,
            reason: "advanced composition is stated for epsilon <= 0.9",
        });
    }
    Ok(())
}

/// Sequential accesses to the same data: budgets add.
pub fn serial_compose(budgets: &[PrivacyBudget]) -> Result<PrivacyBudget> {
    if budgets.is_empty() {
        return Err(invalid("cannot compose an empty list of budgets"));
    }
    let (epsilon, delta) = budgets
        .iter()
        .fold((0.0, 0.0), |(e, d), b| (e + b.epsilon, d + b.delta));
    if delta >= 1.0 {
        return Err(Error::OutOfRange {
            name: "delta",
            value: delta,
            reason: "composed delta reaches 1",
        });
    }
    PrivacyBudget::new(epsilon, delta)
}

/// Accesses to disjoint parts of the data: the worst budget applies.
pub fn parallel_compose(budgets: &[PrivacyBudget]) -> Result<PrivacyBudget> {
    if budgets.is_empty() {
        return Err(invalid("cannot compose an empty list of budgets"));
    }
    let (epsilon, delta) = budgets
        .iter()
        .fold((0.0f64, 0.0f64), |(e, d), b| (e.max(b.epsilon), d.max(b.delta)));
    PrivacyBudget::new(epsilon, delta)
}

/// Multiplier on the amplification-by-shuffling bound.
pub const SHUFFLE_CONSTANT: f64 = 1.0;

/// Central epsilon after shuffling `n` reports of an `eps0`-DP local randomizer:
/// `C (1 - e^-eps0) (sqrt(e^eps0 ln(1/delta) / n) + e^eps0 / n)`.
///
/// Requires `eps0 <= ln(n / (16 ln(2 / delta)))`.
pub fn shuffle_amplified_epsilon(eps0: f64, n: usize, delta: f64) -> Result<f64> {
    if !(eps0 >= 0.0 && eps0.is_finite()) {
        return Err(Error::OutOfRange {
            name: "eps0",
            value: eps0,
            reason: "must be finite and nonnegative",
        });
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::OutOfRange {
            name: "delta",
            value: delta,
            reason: "must lie in (0, 1)",
        });
    }
    let nf = n as f64;
    let limit = (nf / (16.0 * (2.0 / delta).ln())).ln();
    if n == 0 || eps0 > limit {
        return Err(Error::OutOfRange {
            name: "eps0",
            value: eps0,
            reason: "shuffling amplification requires eps0 <= ln(n / (16 ln(2 / delta)))",
        });
    }
    let e = eps0.exp();
    Ok(SHUFFLE_CONSTANT
        * (1.0 - (-eps0).exp())
        * ((e * (1.0 / delta).ln()).sqrt() / nf.sqrt() + e / nf))
}

/// One accounted access in a [`PrivacyLedger`].
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerEntry {
    pub label: String,
    /// Which part of the data was touched, e.g. `"batch 3, first half"`.
    pub scope: String,
    pub budget: PrivacyBudget,
}

/// Record of every private release made by an algorithm run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PrivacyLedger {
    pub entries: Vec<LedgerEntry>,
}

impl PrivacyLedger {
    pub fn record(&mut self, label: impl Into<String>, scope: impl Into<String>, budget: PrivacyBudget) {
        self.entries.push(LedgerEntry {
            label: label.into(),
            scope: scope.into(),
            budget,
        });
    }

    /// Serial composition of every entry, ignoring disjointness.
    pub fn serial_total(&self) -> Option<PrivacyBudget> {
        let budgets: Vec<_> = self.entries.iter().map(|e| e.budget).collect();
        serial_compose(&budgets).ok()
    }

    /// Entries grouped by scope, composed serially within a scope and in
    /// parallel across scopes.
    pub fn per_scope_total(&self) -> Option<PrivacyBudget> {
        let mut by_scope: BTreeMap<&str, Vec<PrivacyBudget>> = BTreeMap::new();
        for e in &self.entries {
            by_scope.entry(e.scope.as_str()).or_default().push(e.budget);
        }
        let per_scope: Vec<_> = by_scope
            .values()
            .filter_map(|b| serial_compose(b).ok())
            .collect();
        parallel_compose(&per_scope).ok()
    }
}
