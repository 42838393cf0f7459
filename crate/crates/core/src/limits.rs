//! Monte Carlo samplers of the limit distributions.
//!
//! Under the hypothesis the normalized profile converges to a weighted
//! Brownian bridge, so critical values are quantiles of
//! `sup_lambda W0(lambda) / (lambda(1-lambda))^gamma`. Fixed-fraction local
//! alternatives add the tent-shaped drift `c_g * phi_tau(lambda)`; the
//! early-change regime with `gamma > 0` degenerates to the maximum of a
//! deterministic atom `c^{1-gamma} u(delta)` and the null supremum.
//!
//! Bridges are simulated as Gaussian random walks conditioned by subtraction
//! (`W(lambda_i) - lambda_i W(1)`) on a uniform grid, which has the exact
//! finite-dimensional distributions at the grid points. The weighted supremum
//! is evaluated at the interior points only; the resulting discretization bias
//! is small and signed (finer grids give larger suprema).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::Error;
use crate::rng::stream_rng;
use crate::statistic::{Sidedness, WeightGamma};
use crate::Result;

const EXP_QUANTILE_TABLE: u64 = 0x7ab1e_0001;

/// Uniform evaluation grid `lambda_i = i/m`, `i = 1..m-1`. The endpoints are
/// excluded: the weight diverges there and the bridge vanishes.
#[derive(Debug, Clone, Copy)]
pub struct BridgeGrid {
    m: usize,
}

impl BridgeGrid {
    pub const DEFAULT_M: usize = 10_000;

    pub fn new(m: usize) -> Result<Self> {
        if m < 100 {
            return Err(Error::InvalidParameter(format!("grid needs m >= 100, got {m}")));
        }
        Ok(BridgeGrid { m })
    }

    pub fn m(&self) -> usize {
        self.m
    }
}

impl Default for BridgeGrid {
    fn default() -> Self {
        BridgeGrid { m: Self::DEFAULT_M }
    }
}

fn weight_vector(gamma: f64, m: usize) -> Vec<f64> {
    (1..m)
        .map(|i| {
            if gamma == 0.0 {
                1.0
            } else {
                let lam = i as f64 / m as f64;
                (lam * (1.0 - lam)).powf(-gamma)
            }
        })
        .collect()
}

/// Fills `walk[i-1] = W(i/m)` for `i = 1..m` from fresh N(0, 1/m) increments.
fn sample_walk(m: usize, rng: &mut ChaCha8Rng, walk: &mut Vec<f64>) {
    walk.clear();
    let step = (1.0 / m as f64).sqrt();
    let mut acc = 0.0;
    for _ in 0..m {
        let z: f64 = rng.sample(StandardNormal);
        acc += z * step;
        walk.push(acc);
    }
}

/// One bridge path evaluated at the interior grid points: returns
/// `W0(i/m)` for `i = 1..m-1`.
pub fn sample_bridge_path(grid: &BridgeGrid, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let m = grid.m();
    let mut walk = Vec::with_capacity(m);
    sample_walk(m, rng, &mut walk);
    let w1 = walk[m - 1];
    (1..m).map(|i| walk[i - 1] - (i as f64 / m as f64) * w1).collect()
}

/// Batch sampler of weighted bridge suprema, sharing each simulated path
/// across several `gamma` values.
pub struct BridgeSupSampler {
    m: usize,
    weights: Vec<Vec<f64>>,
}

impl BridgeSupSampler {
    pub fn new(gammas: &[WeightGamma], grid: &BridgeGrid) -> Self {
        BridgeSupSampler {
            m: grid.m(),
            weights: gammas.iter().map(|g| weight_vector(g.value(), grid.m())).collect(),
        }
    }

    pub fn gamma_count(&self) -> usize {
        self.weights.len()
    }

    /// One path; writes one supremum per `gamma` into `out`.
    pub fn sample_into(
        &self,
        sided: Sidedness,
        rng: &mut ChaCha8Rng,
        walk: &mut Vec<f64>,
        out: &mut [f64],
    ) {
        debug_assert_eq!(out.len(), self.weights.len());
        let m = self.m;
        sample_walk(m, rng, walk);
        let w1 = walk[m - 1];
        for (g, weights) in self.weights.iter().enumerate() {
            let mut best = f64::NEG_INFINITY;
            for i in 1..m {
                let lam = i as f64 / m as f64;
                let b = (walk[i - 1] - lam * w1) * weights[i - 1];
                let v = match sided {
                    Sidedness::OneSidedMax => b,
                    Sidedness::TwoSidedMaxAbs => b.abs(),
                };
                if v > best {
                    best = v;
                }
            }
            out[g] = best;
        }
    }
}

/// One draw of `sup_lambda W0(lambda) / (lambda(1-lambda))^gamma`.
pub fn sample_weighted_bridge_sup(
    gamma: WeightGamma,
    grid: &BridgeGrid,
    sided: Sidedness,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let sampler = BridgeSupSampler::new(&[gamma], grid);
    let mut walk = Vec::with_capacity(grid.m());
    let mut out = [0.0];
    sampler.sample_into(sided, rng, &mut walk, &mut out);
    out[0]
}

/// One critical value with its Monte Carlo context.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileEntry {
    pub gamma: f64,
    pub alpha: f64,
    pub quantile: f64,
    pub std_error: f64,
    pub reps: u64,
    pub grid_m: usize,
}

/// Critical values of the weighted bridge supremum, `(gamma, alpha)` indexed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuantileTable {
    entries: Vec<QuantileEntry>,
}

impl QuantileTable {
    pub fn entries(&self) -> &[QuantileEntry] {
        &self.entries
    }

    /// Exact-match lookup; no interpolation.
    pub fn lookup(&self, gamma: f64, alpha: f64) -> Result<f64> {
        self.entries
            .iter()
            .find(|e| (e.gamma - gamma).abs() < 1e-9 && (e.alpha - alpha).abs() < 1e-9)
            .map(|e| e.quantile)
            .ok_or(Error::TableMiss { gamma, alpha })
    }

    pub fn entry(&self, gamma: f64, alpha: f64) -> Result<&QuantileEntry> {
        self.entries
            .iter()
            .find(|e| (e.gamma - gamma).abs() < 1e-9 && (e.alpha - alpha).abs() < 1e-9)
            .ok_or(Error::TableMiss { gamma, alpha })
    }

    /// Writes `gamma,alpha,quantile,stderr,reps,grid_m` rows.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "gamma,alpha,quantile,stderr,reps,grid_m")?;
        for e in &self.entries {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                e.gamma, e.alpha, e.quantile, e.std_error, e.reps, e.grid_m
            )?;
        }
        Ok(())
    }

    pub fn read_csv<R: std::io::BufRead>(r: R) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("gamma") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(Error::Parse(format!("line {}: expected 6 fields", lineno + 1)));
            }
            let num = |s: &str| -> Result<f64> {
                s.trim().parse().map_err(|_| Error::Parse(format!("bad number {s:?}")))
            };
            entries.push(QuantileEntry {
                gamma: num(fields[0])?,
                alpha: num(fields[1])?,
                quantile: num(fields[2])?,
                std_error: num(fields[3])?,
                reps: fields[4]
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad count {:?}", fields[4])))?,
                grid_m: fields[5]
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad count {:?}", fields[5])))?,
            });
        }
        Ok(QuantileTable { entries })
    }
}

/// Type-7 empirical quantile (linear interpolation between order statistics)
/// of pre-sorted data.
pub(crate) fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

/// Standard error of the empirical `p`-quantile from the order-statistic band
/// at one rank standard deviation.
pub(crate) fn quantile_stderr(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len() as f64;
    let s = (n * p * (1.0 - p)).sqrt();
    let center = (n - 1.0) * p;
    let lo = ((center - s).round().max(0.0)) as usize;
    let hi = ((center + s).round()) as usize;
    let hi = hi.min(sorted.len() - 1);
    (sorted[hi] - sorted[lo.min(hi)]) / 2.0
}

/// Builds the `(gamma, alpha)` critical-value table by simulating `reps`
/// bridge paths, each shared across all `gamma` values. Replications are
/// counter-seeded, so the result does not depend on the worker count.
pub fn build_quantile_table(
    gammas: &[WeightGamma],
    alphas: &[f64],
    reps: u64,
    grid: &BridgeGrid,
    sided: Sidedness,
    seed: u64,
) -> Result<QuantileTable> {
    if gammas.is_empty() || alphas.is_empty() {
        return Err(Error::InvalidParameter("empty gamma or alpha list".into()));
    }
    if reps < 2 {
        return Err(Error::InvalidParameter("need at least 2 replications".into()));
    }
    if let Some(&a) = alphas.iter().find(|a| !(0.0 < **a && **a < 1.0)) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0,1), got {a}")));
    }
    let sampler = BridgeSupSampler::new(gammas, grid);
    let ngam = gammas.len();

    let mut per_gamma: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .fold(
            || (vec![Vec::new(); ngam], Vec::with_capacity(grid.m()), vec![0.0; ngam]),
            |(mut acc, mut walk, mut out), rep| {
                let mut rng = stream_rng(seed, EXP_QUANTILE_TABLE, rep);
                sampler.sample_into(sided, &mut rng, &mut walk, &mut out);
                for (dst, &v) in acc.iter_mut().zip(out.iter()) {
                    dst.push(v);
                }
                (acc, walk, out)
            },
        )
        .map(|(acc, _, _)| acc)
        .reduce(
            || vec![Vec::new(); ngam],
            |mut a, b| {
                for (dst, mut src) in a.iter_mut().zip(b) {
                    dst.append(&mut src);
                }
                a
            },
        );

    let mut entries = Vec::with_capacity(ngam * alphas.len());
    for (g, gamma) in gammas.iter().enumerate() {
        let draws = &mut per_gamma[g];
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for &alpha in alphas {
            entries.push(QuantileEntry {
                gamma: gamma.value(),
                alpha,
                quantile: quantile_type7(draws, 1.0 - alpha),
                std_error: quantile_stderr(draws, 1.0 - alpha),
                reps,
                grid_m: grid.m(),
            });
        }
    }
    Ok(QuantileTable { entries })
}

/// Tent drift of the fixed-fraction alternative: peaks at `tau_star` with
/// value `tau_star (1 - tau_star)`.
pub fn phi_tau(tau_star: f64, lambda: f64) -> f64 {
    if lambda <= tau_star {
        lambda * (1.0 - tau_star)
    } else {
        tau_star * (1.0 - lambda)
    }
}

/// Limit under a shrinking jump at a fixed sample fraction.
#[derive(Debug, Clone, Copy)]
pub struct A1LimitSpec {
    pub gamma: WeightGamma,
    pub tau_star: f64,
    pub c_g: f64,
    pub sigma: f64,
}

impl A1LimitSpec {
    pub fn new(gamma: WeightGamma, tau_star: f64, c_g: f64, sigma: f64) -> Result<Self> {
        if !(tau_star > 0.0 && tau_star < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "tau_star must lie strictly in (0,1), got {tau_star}"
            )));
        }
        if sigma < 0.0 {
            return Err(Error::InvalidParameter(format!("sigma must be >= 0, got {sigma}")));
        }
        Ok(A1LimitSpec { gamma, tau_star, c_g, sigma })
    }
}

/// Batch sampler for the drifted weighted supremum.
pub struct A1LimitSampler {
    m: usize,
    sigma: f64,
    /// weight * drift, and bare weight, per interior grid point
    weights: Vec<f64>,
    drift: Vec<f64>,
}

impl A1LimitSampler {
    pub fn new(spec: &A1LimitSpec, grid: &BridgeGrid) -> Self {
        let m = grid.m();
        let weights = weight_vector(spec.gamma.value(), m);
        let drift = (1..m)
            .map(|i| spec.c_g * phi_tau(spec.tau_star, i as f64 / m as f64))
            .collect();
        A1LimitSampler { m, sigma: spec.sigma, weights, drift }
    }

    /// One draw of the one-sided drifted supremum.
    pub fn sample(&self, rng: &mut ChaCha8Rng, walk: &mut Vec<f64>) -> f64 {
        let m = self.m;
        sample_walk(m, rng, walk);
        let w1 = walk[m - 1];
        let mut best = f64::NEG_INFINITY;
        for i in 1..m {
            let lam = i as f64 / m as f64;
            let b = walk[i - 1] - lam * w1;
            let v = (self.sigma * b + self.drift[i - 1]) * self.weights[i - 1];
            if v > best {
                best = v;
            }
        }
        best
    }
}

/// One draw of the fixed-fraction limit
/// `sup_lambda [sigma W0 + c_g phi_tau] / (lambda(1-lambda))^gamma`.
pub fn sample_limit_a1(spec: &A1LimitSpec, grid: &BridgeGrid, rng: &mut ChaCha8Rng) -> f64 {
    let sampler = A1LimitSampler::new(spec, grid);
    let mut walk = Vec::with_capacity(grid.m());
    sampler.sample(rng, &mut walk)
}

/// Limit under an early change of fixed height.
#[derive(Debug, Clone, Copy)]
pub struct A2LimitSpec {
    pub gamma: WeightGamma,
    pub c: f64,
    pub u_delta: f64,
    pub sigma: f64,
}

impl A2LimitSpec {
    pub fn new(gamma: WeightGamma, c: f64, u_delta: f64, sigma: f64) -> Result<Self> {
        if c < 0.0 {
            return Err(Error::InvalidParameter(format!("c must be >= 0, got {c}")));
        }
        if sigma < 0.0 {
            return Err(Error::InvalidParameter(format!("sigma must be >= 0, got {sigma}")));
        }
        Ok(A2LimitSpec { gamma, c, u_delta, sigma })
    }

    /// Change-time exponent `kappa = (1 - 2 gamma) / (2 (1 - gamma))`.
    pub fn kappa(&self) -> f64 {
        kappa(self.gamma)
    }
}

/// `kappa = (1 - 2 gamma) / (2 (1 - gamma))`, the scale exponent of
/// detectable early changes; `kappa in (0, 1/2]`.
pub fn kappa(gamma: WeightGamma) -> f64 {
    let g = gamma.value();
    (1.0 - 2.0 * g) / (2.0 * (1.0 - g))
}

/// One draw of the unweighted early-change limit
/// `sup_lambda |sigma W0(lambda) + c (1-lambda) u(delta)|`. Requires
/// `gamma = 0`.
pub fn sample_limit_a2_unweighted(
    spec: &A2LimitSpec,
    grid: &BridgeGrid,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    if spec.gamma.value() != 0.0 {
        return Err(Error::WrongRegime(format!(
            "unweighted early-change limit requires gamma = 0, got {}",
            spec.gamma
        )));
    }
    let m = grid.m();
    let mut walk = Vec::with_capacity(m);
    sample_walk(m, rng, &mut walk);
    let w1 = walk[m - 1];
    let mut best = f64::NEG_INFINITY;
    // include lambda = 0, where the drift alone contributes c u(delta)
    let v0 = (spec.c * spec.u_delta).abs();
    if v0 > best {
        best = v0;
    }
    for i in 1..m {
        let lam = i as f64 / m as f64;
        let b = walk[i - 1] - lam * w1;
        let v = (spec.sigma * b + spec.c * (1.0 - lam) * spec.u_delta).abs();
        if v > best {
            best = v;
        }
    }
    Ok(best)
}

/// One draw of the weighted early-change limit
/// `max(c^{1-gamma} u(delta), sup_lambda sigma |W0| / (lambda(1-lambda))^gamma)`.
/// Requires `gamma > 0`.
pub fn sample_limit_a2_weighted(
    spec: &A2LimitSpec,
    grid: &BridgeGrid,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    if spec.gamma.value() <= 0.0 {
        return Err(Error::WrongRegime(format!(
            "weighted early-change limit requires gamma > 0, got {}",
            spec.gamma
        )));
    }
    let atom = spec.c.powf(1.0 - spec.gamma.value()) * spec.u_delta;
    let sup =
        spec.sigma * sample_weighted_bridge_sup(spec.gamma, grid, Sidedness::TwoSidedMaxAbs, rng);
    Ok(atom.max(sup))
}

/// Consistency threshold `c* = (q_alpha / u(delta))^{1/(1-gamma)}`: early
/// changes at `k* ~ c n^kappa` are detected with asymptotic power 1 for
/// `c > c*` and only trivial power for `c < c*`.
pub fn consistency_threshold(gamma: WeightGamma, q_alpha: f64, u_delta: f64) -> Result<f64> {
    if u_delta <= 0.0 {
        return Err(Error::UndetectableDirection(u_delta));
    }
    if q_alpha <= 0.0 {
        return Err(Error::InvalidParameter(format!("q_alpha must be > 0, got {q_alpha}")));
    }
    Ok((q_alpha / u_delta).powf(1.0 / (1.0 - gamma.value())))
}

/// Monte Carlo rejection probability `P(draw > q)` over counter-seeded
/// replications; returns `(estimate, binomial standard error)`.
pub fn rejection_probability<F>(
    sample: F,
    q: f64,
    reps: u64,
    seed: u64,
    experiment: u64,
) -> (f64, f64)
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let hits: u64 = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream_rng(seed, experiment, rep);
            u64::from(sample(&mut rng) > q)
        })
        .sum();
    let p = hits as f64 / reps as f64;
    (p, (p * (1.0 - p) / reps as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wg(g: f64) -> WeightGamma {
        WeightGamma::new(g).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(BridgeGrid::new(99).is_err());
        assert_eq!(BridgeGrid::default().m(), 10_000);
    }

    #[test]
    fn kappa_values() {
        assert_eq!(kappa(wg(0.0)), 0.5);
        assert!((kappa(wg(0.3)) - 2.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn phi_peaks_at_tau() {
        assert_eq!(phi_tau(0.5, 0.5), 0.25);
        assert!((phi_tau(0.25, 0.1) - 0.075).abs() < 1e-15);
        assert!((phi_tau(0.25, 0.9) - 0.025).abs() < 1e-15);
    }

    #[test]
    fn a1_deterministic_when_sigma_zero() {
        let spec = A1LimitSpec::new(wg(0.0), 0.5, 2.0, 0.0).unwrap();
        let grid = BridgeGrid::new(1000).unwrap();
        let mut rng = stream_rng(1, 1, 0);
        let v = sample_limit_a1(&spec, &grid, &mut rng);
        assert!((v - 0.5).abs() < 1e-12, "sup of 2 phi_{{0.5}} should be 0.5, got {v}");
    }

    #[test]
    fn a2_regime_checks() {
        let grid = BridgeGrid::new(200).unwrap();
        let mut rng = stream_rng(1, 2, 0);
        let spec0 = A2LimitSpec::new(wg(0.0), 1.0, 0.5, 1.0).unwrap();
        let specg = A2LimitSpec::new(wg(0.3), 1.0, 0.5, 1.0).unwrap();
        assert!(sample_limit_a2_unweighted(&specg, &grid, &mut rng).is_err());
        assert!(sample_limit_a2_weighted(&spec0, &grid, &mut rng).is_err());
        assert!(sample_limit_a2_unweighted(&spec0, &grid, &mut rng).is_ok());
        assert!(sample_limit_a2_weighted(&specg, &grid, &mut rng).is_ok());
    }

    #[test]
    fn a2_unweighted_deterministic_when_sigma_zero() {
        let spec = A2LimitSpec::new(wg(0.0), 3.0, 0.4, 0.0).unwrap();
        let grid = BridgeGrid::new(500).unwrap();
        let mut rng = stream_rng(1, 3, 0);
        let v = sample_limit_a2_unweighted(&spec, &grid, &mut rng).unwrap();
        assert!((v - 1.2).abs() < 1e-12, "drift sup at lambda=0 is c u = 1.2, got {v}");
    }

    #[test]
    fn consistency_threshold_values() {
        let c = consistency_threshold(wg(0.3), 1.96, 1.0).unwrap();
        assert!((c - 1.96f64.powf(1.0 / 0.7)).abs() < 1e-12);
        assert_eq!(consistency_threshold(wg(0.2), 0.8, 0.8).unwrap(), 1.0);
        // exponent is continuous at gamma -> 0
        let c_eps = consistency_threshold(wg(1e-9), 1.5, 0.5).unwrap();
        assert!((c_eps - 3.0).abs() < 1e-6);
        assert!(matches!(
            consistency_threshold(wg(0.3), 1.96, 0.0),
            Err(Error::UndetectableDirection(_))
        ));
    }

    #[test]
    fn table_lookup_and_csv_roundtrip() {
        let grid = BridgeGrid::new(200).unwrap();
        let table = build_quantile_table(
            &[wg(0.0), wg(0.2)],
            &[0.1, 0.05],
            2_000,
            &grid,
            Sidedness::OneSidedMax,
            9,
        )
        .unwrap();
        assert!(table.lookup(0.0, 0.05).is_ok());
        assert!(matches!(table.lookup(0.3, 0.05), Err(Error::TableMiss { .. })));

        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let parsed = QuantileTable::read_csv(std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(parsed, table);
    }

    #[test]
    fn table_deterministic_for_any_thread_count() {
        let grid = BridgeGrid::new(200).unwrap();
        let build = || {
            build_quantile_table(&[wg(0.0)], &[0.05], 500, &grid, Sidedness::OneSidedMax, 5)
                .unwrap()
        };
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let t1 = pool1.install(build);
        let t4 = pool4.install(build);
        assert_eq!(t1, t4);
    }

    #[test]
    fn quantile_type7_matches_hand_values() {
        let data = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_type7(&data, 0.5), 2.5);
        assert_eq!(quantile_type7(&data, 0.0), 1.0);
        assert_eq!(quantile_type7(&data, 1.0), 4.0);
        assert!((quantile_type7(&data, 0.25) - 1.75).abs() < 1e-15);
    }
}
