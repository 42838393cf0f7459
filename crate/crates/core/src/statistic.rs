//! The weighted U-statistic profile `k -> G(k)` and the test decision.
//!
//! `G(k) = D(k) / (n^{3/2} (k/n (1 - k/n))^gamma)` where `D(k)` is the double
//! sum `sum_{i<=k} sum_{j>k} g(X_j - X_i)`. The brute-force path evaluates the
//! double sum literally and serves as the oracle; the CUSUM fast path uses the
//! prefix-sum identity `D(k) = k S_n - n S_k`, the Wilcoxon fast path
//! maintains rank counts incrementally in `k` via Fenwick trees.

use crate::error::Error;
use crate::kernels::{Kernel, KernelKind};
use crate::limits::QuantileTable;
use crate::Result;

/// Ordered real observations, validated finite with length at least 2.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::SeriesTooShort { needed: 2, got: values.len() });
        }
        if let Some(&bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput(bad));
        }
        Ok(TimeSeries { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sample standard deviation (denominator `n - 1`).
    pub fn sample_std(&self) -> f64 {
        let n = self.values.len() as f64;
        let mean = self.values.iter().sum::<f64>() / n;
        let ss: f64 = self.values.iter().map(|x| (x - mean) * (x - mean)).sum();
        (ss / (n - 1.0)).sqrt()
    }
}

/// Weight exponent, restricted to `[0, 1/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightGamma(f64);

impl WeightGamma {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && (0.0..0.5).contains(&gamma)) {
            return Err(Error::InvalidParameter(format!(
                "gamma must lie in [0, 0.5), got {gamma}"
            )));
        }
        Ok(WeightGamma(gamma))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

impl std::fmt::Display for WeightGamma {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Which maximum the test takes over the profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sidedness {
    /// `max_k G(k)` (signed), as in the fixed-fraction limit theorem and the
    /// signed critical-value table.
    OneSidedMax,
    /// `max_k |G(k)|`, as in the early-change limit theorems.
    TwoSidedMaxAbs,
}

/// The vector `k -> G(k)` for `k = 1..n-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct StatisticProfile {
    gamma: WeightGamma,
    values: Vec<f64>,
}

impl StatisticProfile {
    /// `G(k)` for `k = 1..n-1`; index 0 holds `G(1)`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn gamma(&self) -> WeightGamma {
        self.gamma
    }

    /// Maximum statistic and its split `k` (smallest on ties).
    pub fn max(&self, sided: Sidedness) -> (f64, usize) {
        max_statistic(self, sided)
    }
}

/// Raw double sums `D(k) = sum_{i<=k} sum_{j>k} g(X_j - X_i)` for all `k`,
/// before weighting and `n^{3/2}` normalization. Exposed so that one pass over
/// a series can serve every `gamma`.
pub fn double_sums(x: &TimeSeries, kernel: &Kernel) -> Result<Vec<f64>> {
    match kernel.kind() {
        KernelKind::Cusum => Ok(double_sums_cusum(x)),
        KernelKind::Wilcoxon => Ok(double_sums_wilcoxon(x)),
        KernelKind::Custom => double_sums_bruteforce(x, kernel),
    }
}

fn double_sums_bruteforce(x: &TimeSeries, kernel: &Kernel) -> Result<Vec<f64>> {
    let v = x.values();
    let n = v.len();
    let mut out = Vec::with_capacity(n - 1);
    for k in 1..n {
        let mut s = 0.0;
        for i in 0..k {
            for j in k..n {
                s += kernel.eval(v[j] - v[i])?;
            }
        }
        out.push(s);
    }
    Ok(out)
}

/// `D(k) = k S_n - n S_k` with `S_k` the prefix sum.
fn double_sums_cusum(x: &TimeSeries) -> Vec<f64> {
    let v = x.values();
    let n = v.len();
    let total: f64 = v.iter().sum();
    let mut out = Vec::with_capacity(n - 1);
    let mut prefix = 0.0;
    for k in 1..n {
        prefix += v[k - 1];
        out.push(k as f64 * total - n as f64 * prefix);
    }
    out
}

struct Fenwick {
    tree: Vec<u32>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Fenwick { tree: vec![0; n + 1] }
    }

    fn add(&mut self, mut i: usize, delta: i32) {
        i += 1;
        while i < self.tree.len() {
            self.tree[i] = (self.tree[i] as i64 + delta as i64) as u32;
            i += i & i.wrapping_neg();
        }
    }

    /// Count of inserted ranks in `0..=i`.
    fn prefix(&self, i: usize) -> u32 {
        let mut i = i + 1;
        let mut s = 0u32;
        while i > 0 {
            s += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

/// Incremental rank computation: moving the split from `k-1` to `k` transfers
/// one observation from the right block to the left block, and the double sum
/// changes by the pair contributions of that observation against both blocks.
/// `O(n log n)` total; exact on ties under the `g(0) = 0` convention.
fn double_sums_wilcoxon(x: &TimeSeries) -> Vec<f64> {
    let v = x.values();
    let n = v.len();

    // dense tie-aware ranks
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
    let mut rank = vec![0usize; n];
    let mut r = 0usize;
    for t in 0..n {
        if t > 0 && v[order[t]] > v[order[t - 1]] {
            r += 1;
        }
        rank[order[t]] = r;
    }
    let distinct = r + 1;

    let mut left = Fenwick::new(distinct);
    let mut right = Fenwick::new(distinct);
    for i in 0..n {
        right.add(rank[i], 1);
    }

    let mut out = Vec::with_capacity(n - 1);
    // D as an integer count of (greater pairs - smaller pairs); each pair
    // contributes +-1/2, so D(k) = half_units / 2.
    let mut half_units: i64 = 0;
    for k in 1..n {
        let rk = rank[k - 1];
        right.add(rk, -1);
        let left_size = (k - 1) as i64;
        let right_size = (n - k) as i64;

        // pairs (i, k), i < k: contribute g(x_k - x_i)
        let l_le = left.prefix(rk) as i64;
        let l_less = if rk == 0 { 0 } else { left.prefix(rk - 1) as i64 };
        let l_greater = left_size - l_le;
        // pairs (k, j), j > k: contribute g(x_j - x_k)
        let r_le = right.prefix(rk) as i64;
        let r_less = if rk == 0 { 0 } else { right.prefix(rk - 1) as i64 };
        let r_greater = right_size - r_le;

        half_units += (r_greater - r_less) - (l_less - l_greater);
        left.add(rk, 1);
        out.push(half_units as f64 / 2.0);
    }
    out
}

fn profile_from_raw(raw: Vec<f64>, n: usize, gamma: WeightGamma) -> StatisticProfile {
    let scale = (n as f64).powf(1.5);
    let g = gamma.value();
    let values = raw
        .into_iter()
        .enumerate()
        .map(|(idx, d)| {
            let lam = (idx + 1) as f64 / n as f64;
            let w = if g == 0.0 { 1.0 } else { (lam * (1.0 - lam)).powf(g) };
            d / (scale * w)
        })
        .collect();
    StatisticProfile { gamma, values }
}

/// Literal double-sum evaluation; the oracle against which the fast paths are
/// tested. `O(n^3)`.
pub fn profile_bruteforce(
    x: &TimeSeries,
    kernel: &Kernel,
    gamma: WeightGamma,
) -> Result<StatisticProfile> {
    let raw = double_sums_bruteforce(x, kernel)?;
    Ok(profile_from_raw(raw, x.len(), gamma))
}

/// CUSUM profile via the prefix-sum identity. `O(n)`.
pub fn profile_cusum(x: &TimeSeries, gamma: WeightGamma) -> StatisticProfile {
    profile_from_raw(double_sums_cusum(x), x.len(), gamma)
}

/// Wilcoxon profile via incremental rank counts. `O(n log n)`.
pub fn profile_wilcoxon(x: &TimeSeries, gamma: WeightGamma) -> StatisticProfile {
    profile_from_raw(double_sums_wilcoxon(x), x.len(), gamma)
}

/// Profile for any kernel, choosing the fast path where one exists.
pub fn profile(x: &TimeSeries, kernel: &Kernel, gamma: WeightGamma) -> Result<StatisticProfile> {
    Ok(profile_from_raw(double_sums(x, kernel)?, x.len(), gamma))
}

/// Maximum over the profile; ties broken to the smallest `k`.
pub fn max_statistic(p: &StatisticProfile, sided: Sidedness) -> (f64, usize) {
    let mut best = f64::NEG_INFINITY;
    let mut best_k = 1usize;
    for (idx, &v) in p.values.iter().enumerate() {
        let m = match sided {
            Sidedness::OneSidedMax => v,
            Sidedness::TwoSidedMaxAbs => v.abs(),
        };
        if m > best {
            best = m;
            best_k = idx + 1;
        }
    }
    (best, best_k)
}

/// Where the critical value for the test comes from.
pub enum CriticalSource<'a> {
    /// Asymptotic table; the statistic is studentized by `sigma` before the
    /// comparison.
    AsymptoticTable(&'a QuantileTable),
    /// A precomputed (e.g. finite-sample empirical) critical value for the
    /// studentized statistic.
    Fixed(f64),
}

/// Scale used to studentize the CUSUM statistic. The Wilcoxon statistic is
/// always scaled by its distribution-free `1/sqrt(12)`.
#[derive(Debug, Clone, Copy)]
pub enum SigmaSource {
    Known(f64),
    /// Plug-in: the sample standard deviation of the series. Biased upward
    /// under the alternative.
    SampleStd,
}

/// Result of one test run.
#[derive(Debug, Clone, Copy)]
pub struct TestOutcome {
    /// Studentized max statistic.
    pub statistic: f64,
    pub critical_value: f64,
    pub reject: bool,
    /// Split attaining the maximum; the change-point estimate.
    pub estimated_changepoint: usize,
    pub alpha: f64,
    pub gamma: WeightGamma,
    pub kernel: KernelKind,
}

/// Runs the change-point test at level `alpha`.
pub fn run_test(
    x: &TimeSeries,
    kernel: &Kernel,
    gamma: WeightGamma,
    alpha: f64,
    sided: Sidedness,
    critical: CriticalSource<'_>,
    sigma: SigmaSource,
) -> Result<TestOutcome> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let p = profile(x, kernel, gamma)?;
    let (raw, k_hat) = p.max(sided);
    let scale = match kernel.kind() {
        KernelKind::Wilcoxon => (1.0 / 12.0f64).sqrt(),
        KernelKind::Cusum => match sigma {
            SigmaSource::Known(s) => {
                if s <= 0.0 {
                    return Err(Error::DegenerateNoise);
                }
                s
            }
            SigmaSource::SampleStd => x.sample_std(),
        },
        KernelKind::Custom => match sigma {
            SigmaSource::Known(s) => {
                if s <= 0.0 {
                    return Err(Error::DegenerateNoise);
                }
                s
            }
            SigmaSource::SampleStd => {
                return Err(Error::UnsupportedCombination(
                    "custom kernels need an explicit sigma".into(),
                ))
            }
        },
    };
    let statistic = raw / scale;
    let critical_value = match critical {
        CriticalSource::AsymptoticTable(table) => table.lookup(gamma.value(), alpha)?,
        CriticalSource::Fixed(q) => q,
    };
    Ok(TestOutcome {
        statistic,
        critical_value,
        reject: statistic > critical_value,
        estimated_changepoint: k_hat,
        alpha,
        gamma,
        kernel: kernel.kind(),
    })
}
