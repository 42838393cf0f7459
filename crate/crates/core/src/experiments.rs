//! Simulation harness: data generation under step alternatives, finite-sample
//! critical values, size-corrected power curves, envelope power and
//! overall-power summaries.
//!
//! Every replication owns a counter-derived RNG stream keyed by
//! `(seed, experiment id, replication index)`, and aggregation uses only sums
//! and counts, so results are bit-identical for any worker count.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Error;
use crate::kernels::{std_normal_cdf, std_normal_quantile, Kernel, KernelKind, NoiseModel};
use crate::limits::{kappa, quantile_type7};
use crate::rng::{stream_rng, sub_experiment};
use crate::statistic::{double_sums, Sidedness, TimeSeries, WeightGamma};
use crate::Result;

/// Experiment id of the null simulations behind `empirical_critical_values`;
/// exposed so size-correction exactness can be checked on the same streams.
pub const EXP_NULL_CRIT: u64 = 0xc217;
const EXP_POWER: u64 = 0x9074;

/// Step-change alternative driving data generation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Alternative {
    /// No change.
    Null,
    /// Change at a fixed fraction `tau_star` with shrinking jump
    /// `delta_n = c / sqrt(n)`.
    A1 { tau_star: f64, c: f64 },
    /// Fixed jump `delta` at the early time `k* = round(c n^kappa)`, with
    /// `kappa` determined by `gamma_for_kappa`.
    A2 { gamma_for_kappa: WeightGamma, c: f64, delta: f64 },
}

/// Concrete change location and height for one sample size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChangePlan {
    /// Last pre-change index (1-based); `None` under the null.
    pub k_star: Option<usize>,
    pub delta: f64,
    /// Whether `k*` had to be clamped into `[1, n-1]`.
    pub clamped: bool,
}

impl Alternative {
    /// Realizes `k*` and `delta_n` for sample size `n`, clamping `k*` into
    /// `[1, n-1]` where needed.
    pub fn plan(&self, n: usize) -> Result<ChangePlan> {
        if n < 2 {
            return Err(Error::SeriesTooShort { needed: 2, got: n });
        }
        match *self {
            Alternative::Null => Ok(ChangePlan { k_star: None, delta: 0.0, clamped: false }),
            Alternative::A1 { tau_star, c } => {
                if !(tau_star > 0.0 && tau_star < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "tau_star must lie in (0,1), got {tau_star}"
                    )));
                }
                let raw = (tau_star * n as f64).floor() as usize;
                let k = raw.clamp(1, n - 1);
                Ok(ChangePlan {
                    k_star: Some(k),
                    delta: c / (n as f64).sqrt(),
                    clamped: k != raw,
                })
            }
            Alternative::A2 { gamma_for_kappa, c, delta } => {
                if c < 0.0 {
                    return Err(Error::InvalidParameter(format!("c must be >= 0, got {c}")));
                }
                let raw = (c * (n as f64).powf(kappa(gamma_for_kappa))).round() as i64;
                let k = raw.clamp(1, n as i64 - 1) as usize;
                Ok(ChangePlan { k_star: Some(k), delta, clamped: k as i64 != raw })
            }
        }
    }
}

/// A simulated series together with the change plan that produced it.
#[derive(Debug, Clone)]
pub struct GeneratedSeries {
    pub series: TimeSeries,
    pub plan: ChangePlan,
    /// Set when the clamped change time sits at the boundary `n - 1`.
    pub boundary_warning: bool,
}

/// Draws `X_i = mu + xi_i + delta 1{i > k*}` for `i = 1..n`.
pub fn generate_series(
    n: usize,
    noise: &NoiseModel,
    alt: &Alternative,
    mu: f64,
    rng: &mut ChaCha8Rng,
) -> Result<GeneratedSeries> {
    let plan = alt.plan(n)?;
    let k = plan.k_star.unwrap_or(n);
    let mut values = Vec::with_capacity(n);
    for i in 1..=n {
        let shift = if i > k { plan.delta } else { 0.0 };
        values.push(mu + shift + noise.sample(rng));
    }
    Ok(GeneratedSeries {
        series: TimeSeries::new(values)?,
        plan,
        boundary_warning: plan.k_star == Some(n - 1) && plan.clamped,
    })
}

/// Raw (un-studentized) max statistic per `gamma`, all from one double-sum
/// pass over the series.
fn max_stats_all_gammas(
    raw: &[f64],
    n: usize,
    gammas: &[WeightGamma],
    sided: Sidedness,
    out: &mut [f64],
) {
    let scale = (n as f64).powf(1.5);
    for (gi, gamma) in gammas.iter().enumerate() {
        let g = gamma.value();
        let mut best = f64::NEG_INFINITY;
        for (idx, &d) in raw.iter().enumerate() {
            let lam = (idx + 1) as f64 / n as f64;
            let w = if g == 0.0 { 1.0 } else { (lam * (1.0 - lam)).powf(g) };
            let v = d / (scale * w);
            let v = match sided {
                Sidedness::OneSidedMax => v,
                Sidedness::TwoSidedMaxAbs => v.abs(),
            };
            if v > best {
                best = v;
            }
        }
        out[gi] = best;
    }
}

/// Null statistics for several `gamma` at once: `reps` simulated series, one
/// double-sum pass each. Returned per gamma, sorted ascending.
fn null_statistics(
    n: usize,
    kernel: &Kernel,
    gammas: &[WeightGamma],
    noise: &NoiseModel,
    sided: Sidedness,
    reps: u64,
    seed: u64,
    experiment: u64,
) -> Result<Vec<Vec<f64>>> {
    let ngam = gammas.len();
    let results: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream_rng(seed, experiment, rep);
            let gen = generate_series(n, noise, &Alternative::Null, 0.0, &mut rng)?;
            let raw = double_sums(&gen.series, kernel)?;
            let mut out = vec![0.0; ngam];
            max_stats_all_gammas(&raw, n, gammas, sided, &mut out);
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut per_gamma = vec![Vec::with_capacity(reps as usize); ngam];
    for row in results {
        for (g, v) in row.into_iter().enumerate() {
            per_gamma[g].push(v);
        }
    }
    for d in &mut per_gamma {
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
    Ok(per_gamma)
}

/// Finite-sample critical value: the empirical `(1-alpha)`-quantile of the
/// raw max statistic under the null, for the same `(n, kernel, gamma)`.
pub fn empirical_critical_value(
    n: usize,
    kernel: &Kernel,
    gamma: WeightGamma,
    noise: &NoiseModel,
    alpha: f64,
    sided: Sidedness,
    reps: u64,
    seed: u64,
) -> Result<f64> {
    Ok(empirical_critical_values(n, kernel, &[gamma], noise, alpha, sided, reps, seed)?[0])
}

/// Per-gamma empirical critical values sharing the null series across gammas.
#[allow(clippy::too_many_arguments)]
pub fn empirical_critical_values(
    n: usize,
    kernel: &Kernel,
    gammas: &[WeightGamma],
    noise: &NoiseModel,
    alpha: f64,
    sided: Sidedness,
    reps: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    if reps < 100 {
        return Err(Error::InvalidParameter("need at least 100 null replications".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let stats = null_statistics(n, kernel, gammas, noise, sided, reps, seed, EXP_NULL_CRIT)?;
    Ok(stats.iter().map(|d| quantile_type7(d, 1.0 - alpha)).collect())
}

/// Configuration echoed into every power curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveMeta {
    pub n: usize,
    pub kernel: KernelKind,
    pub gamma: f64,
    pub alpha: f64,
    pub reps: u64,
    pub size_corrected: bool,
    pub seed: u64,
}

/// Rejection rates along an abscissa grid (`tau` or `c`).
#[derive(Debug, Clone, PartialEq)]
pub struct PowerCurve {
    pub abscissa: Vec<f64>,
    pub power: Vec<f64>,
    pub std_err: Vec<f64>,
    pub meta: CurveMeta,
}

/// Shared options of the two power-curve families.
#[derive(Debug, Clone)]
pub struct PowerStudy {
    pub n: usize,
    pub kernel: Kernel,
    pub gammas: Vec<WeightGamma>,
    pub noise: NoiseModel,
    pub alpha: f64,
    pub sided: Sidedness,
    /// Sidedness of the null quantile behind the size correction. Usually
    /// equal to `sided`; reference asymptotic tables are one-sided, so
    /// studies calibrated to them test two-sided against one-sided quantiles.
    pub critical_sided: Sidedness,
    /// Replications per curve point.
    pub reps: u64,
    /// Null replications behind the size correction.
    pub null_reps: u64,
    pub seed: u64,
    /// Reuse each simulated series for every `gamma` (common random numbers).
    /// Off by default: each `gamma` gets independent streams.
    pub common_random_numbers: bool,
}

impl PowerStudy {
    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::SeriesTooShort { needed: 2, got: self.n });
        }
        if self.gammas.is_empty() {
            return Err(Error::InvalidParameter("empty gamma list".into()));
        }
        if self.reps == 0 {
            return Err(Error::InvalidParameter("reps must be positive".into()));
        }
        Ok(())
    }

    /// Rejection counts for the alternatives produced by `alt_of` on the
    /// abscissa grid, against per-gamma critical values.
    fn run(
        &self,
        grid: &[f64],
        criticals: &[f64],
        alt_of: impl Fn(f64) -> Alternative + Sync,
        experiment: u64,
    ) -> Result<Vec<PowerCurve>> {
        let ngam = self.gammas.len();
        let npts = grid.len();
        // hits[point][gamma]
        let hits: Vec<Vec<u64>> = (0..self.reps)
            .into_par_iter()
            .map(|rep| {
                let mut local = vec![vec![0u64; ngam]; npts];
                let mut stats = vec![0.0; ngam];
                for (t, &x) in grid.iter().enumerate() {
                    let alt = alt_of(x);
                    if self.common_random_numbers {
                        let exp = sub_experiment(experiment, &[t as u64]);
                        let mut rng = stream_rng(self.seed, exp, rep);
                        let gen = generate_series(self.n, &self.noise, &alt, 0.0, &mut rng)?;
                        let raw = double_sums(&gen.series, &self.kernel)?;
                        max_stats_all_gammas(&raw, self.n, &self.gammas, self.sided, &mut stats);
                        for g in 0..ngam {
                            local[t][g] += u64::from(stats[g] > criticals[g]);
                        }
                    } else {
                        for g in 0..ngam {
                            let exp = sub_experiment(experiment, &[t as u64, g as u64]);
                            let mut rng = stream_rng(self.seed, exp, rep);
                            let gen = generate_series(self.n, &self.noise, &alt, 0.0, &mut rng)?;
                            let raw = double_sums(&gen.series, &self.kernel)?;
                            max_stats_all_gammas(
                                &raw,
                                self.n,
                                &self.gammas[g..=g],
                                self.sided,
                                &mut stats[g..=g],
                            );
                            local[t][g] += u64::from(stats[g] > criticals[g]);
                        }
                    }
                }
                Ok::<_, Error>(local)
            })
            .try_reduce(
                || vec![vec![0u64; ngam]; npts],
                |mut a, b| {
                    for (ra, rb) in a.iter_mut().zip(b) {
                        for (ca, cb) in ra.iter_mut().zip(rb) {
                            *ca += cb;
                        }
                    }
                    Ok(a)
                },
            )?;

        let reps = self.reps as f64;
        Ok((0..ngam)
            .map(|g| {
                let power: Vec<f64> = (0..npts).map(|t| hits[t][g] as f64 / reps).collect();
                let std_err = power.iter().map(|&p| (p * (1.0 - p) / reps).sqrt()).collect();
                PowerCurve {
                    abscissa: grid.to_vec(),
                    power,
                    std_err,
                    meta: CurveMeta {
                        n: self.n,
                        kernel: self.kernel.kind(),
                        gamma: self.gammas[g].value(),
                        alpha: self.alpha,
                        reps: self.reps,
                        size_corrected: true,
                        seed: self.seed,
                    },
                }
            })
            .collect())
    }
}

/// Size-corrected power against fixed-fraction alternatives: one curve per
/// `gamma`, rejection rate over the `tau` grid at jump `delta_n = c/sqrt(n)`.
pub fn power_curve_a1(study: &PowerStudy, c: f64, tau_grid: &[f64]) -> Result<Vec<PowerCurve>> {
    study.validate()?;
    if tau_grid.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
        return Err(Error::InvalidParameter("tau grid must lie in (0,1)".into()));
    }
    let criticals = empirical_critical_values(
        study.n,
        &study.kernel,
        &study.gammas,
        &study.noise,
        study.alpha,
        study.critical_sided,
        study.null_reps,
        study.seed,
    )?;
    let experiment = sub_experiment(EXP_POWER, &[1, c.to_bits()]);
    study.run(tau_grid, &criticals, |tau| Alternative::A1 { tau_star: tau, c }, experiment)
}

/// Size-corrected power against early changes: rejection rate over the `c`
/// grid with `k* = round(c n^kappa)`, `kappa` fixed by `kappa_source_gamma`,
/// and constant jump `delta`.
pub fn power_curve_a2(
    study: &PowerStudy,
    delta: f64,
    kappa_source_gamma: WeightGamma,
    c_grid: &[f64],
) -> Result<Vec<PowerCurve>> {
    study.validate()?;
    if c_grid.iter().any(|&c| c < 0.0) {
        return Err(Error::InvalidParameter("c grid must be nonnegative".into()));
    }
    let criticals = empirical_critical_values(
        study.n,
        &study.kernel,
        &study.gammas,
        &study.noise,
        study.alpha,
        study.critical_sided,
        study.null_reps,
        study.seed,
    )?;
    let experiment = sub_experiment(EXP_POWER, &[2, delta.to_bits()]);
    study.run(
        c_grid,
        &criticals,
        |c| Alternative::A2 { gamma_for_kappa: kappa_source_gamma, c, delta },
        experiment,
    )
}

/// Simulated rejection probability of the studentized max statistic at a
/// fixed critical value; returns `(power, binomial standard error)`.
#[allow(clippy::too_many_arguments)]
pub fn simulated_power(
    n: usize,
    kernel: &Kernel,
    noise: &NoiseModel,
    alt: &Alternative,
    gamma: WeightGamma,
    sided: Sidedness,
    critical: f64,
    sigma: f64,
    reps: u64,
    seed: u64,
    experiment: u64,
) -> Result<(f64, f64)> {
    if sigma <= 0.0 {
        return Err(Error::DegenerateNoise);
    }
    let hits: u64 = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream_rng(seed, experiment, rep);
            let gen = generate_series(n, noise, alt, 0.0, &mut rng)?;
            let raw = double_sums(&gen.series, kernel)?;
            let mut out = [0.0];
            max_stats_all_gammas(&raw, n, &[gamma], sided, &mut out);
            Ok::<_, Error>(u64::from(out[0] / sigma > critical))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let p = hits as f64 / reps as f64;
    Ok((p, (p * (1.0 - p) / reps as f64).sqrt()))
}

/// Exact power of the most powerful level-`alpha` test against a known change
/// `(k, delta)` in Gaussian noise:
/// `1 - Phi(z_{1-alpha} - delta sqrt(k(n-k)/(n sigma^2)))`.
pub fn envelope_power(n: usize, k: usize, delta: f64, sigma: f64, alpha: f64) -> Result<f64> {
    if k < 1 || k > n - 1 {
        return Err(Error::InvalidParameter(format!("k must lie in [1, n-1], got {k}")));
    }
    if sigma <= 0.0 {
        return Err(Error::InvalidParameter(format!("sigma must be > 0, got {sigma}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let z = std_normal_quantile(1.0 - alpha);
    let ncp = delta * ((k as f64) * ((n - k) as f64) / (n as f64 * sigma * sigma)).sqrt();
    Ok(1.0 - std_normal_cdf(z - ncp))
}

/// Envelope power along a `tau` grid with `k = floor(tau n)`, as a curve
/// comparable to the simulated ones.
pub fn envelope_curve(
    n: usize,
    tau_grid: &[f64],
    delta: f64,
    sigma: f64,
    alpha: f64,
) -> Result<PowerCurve> {
    let mut power = Vec::with_capacity(tau_grid.len());
    for &tau in tau_grid {
        let k = ((tau * n as f64).floor() as usize).clamp(1, n - 1);
        power.push(envelope_power(n, k, delta, sigma, alpha)?);
    }
    Ok(PowerCurve {
        abscissa: tau_grid.to_vec(),
        std_err: vec![0.0; tau_grid.len()],
        power,
        meta: CurveMeta {
            n,
            kernel: KernelKind::Custom,
            gamma: f64::NAN,
            alpha,
            reps: 0,
            size_corrected: false,
            seed: 0,
        },
    })
}

fn trapezoid_area(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) / 2.0)
        .sum()
}

/// Overall power as a percentage of the envelope: ratio of trapezoidal areas
/// over a common abscissa grid.
pub fn overall_power_ratio(curve: &PowerCurve, envelope: &PowerCurve) -> Result<f64> {
    if curve.abscissa.len() != envelope.abscissa.len()
        || curve
            .abscissa
            .iter()
            .zip(&envelope.abscissa)
            .any(|(a, b)| (a - b).abs() > 1e-12)
    {
        return Err(Error::GridMismatch);
    }
    let num = trapezoid_area(&curve.abscissa, &curve.power);
    let den = trapezoid_area(&envelope.abscissa, &envelope.power);
    if den <= 0.0 {
        return Err(Error::InvalidParameter("envelope area is not positive".into()));
    }
    Ok(100.0 * num / den)
}

/// The 39-point `tau` grid `{0.025, 0.05, ..., 0.975}` used for the
/// fixed-fraction power study.
pub fn default_tau_grid() -> Vec<f64> {
    (1..40).map(|i| i as f64 * 0.025).collect()
}

/// Writes curves as CSV: `#`-prefixed metadata lines, then one row per
/// `(gamma, abscissa)` point.
pub fn write_power_curves<W: std::io::Write>(
    mut w: W,
    curves: &[PowerCurve],
    abscissa_name: &str,
    extra_meta: &[(String, String)],
) -> Result<()> {
    if let Some(first) = curves.first() {
        let m = &first.meta;
        writeln!(w, "# n: {}", m.n)?;
        writeln!(w, "# kernel: {}", m.kernel)?;
        writeln!(w, "# alpha: {}", m.alpha)?;
        writeln!(w, "# reps: {}", m.reps)?;
        writeln!(w, "# size_corrected: {}", m.size_corrected)?;
        writeln!(w, "# seed: {}", m.seed)?;
    }
    for (k, v) in extra_meta {
        writeln!(w, "# {k}: {v}")?;
    }
    writeln!(w, "gamma,{abscissa_name},power,stderr")?;
    for curve in curves {
        for i in 0..curve.abscissa.len() {
            writeln!(
                w,
                "{},{},{},{}",
                curve.meta.gamma, curve.abscissa[i], curve.power[i], curve.std_err[i]
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wg(g: f64) -> WeightGamma {
        WeightGamma::new(g).unwrap()
    }

    #[test]
    fn plans() {
        let p = Alternative::A1 { tau_star: 0.5, c: 5.0 }.plan(100).unwrap();
        assert_eq!(p.k_star, Some(50));
        assert!((p.delta - 0.5).abs() < 1e-15);
        assert!(!p.clamped);

        // 5000^{2/7} = 11.40 => k* = 23
        let p = Alternative::A2 { gamma_for_kappa: wg(0.3), c: 2.0, delta: 1.0 }
            .plan(5000)
            .unwrap();
        assert_eq!(p.k_star, Some(23));

        let p = Alternative::A2 { gamma_for_kappa: wg(0.0), c: 1000.0, delta: 1.0 }
            .plan(100)
            .unwrap();
        assert_eq!(p.k_star, Some(99));
        assert!(p.clamped);

        assert_eq!(Alternative::Null.plan(10).unwrap().k_star, None);
    }

    #[test]
    fn generated_series_has_step() {
        let mut rng = stream_rng(3, 3, 0);
        let alt = Alternative::A1 { tau_star: 0.5, c: 5.0 };
        let mut first = 0.0;
        let mut second = 0.0;
        let reps = 200;
        for _ in 0..reps {
            let g = generate_series(100, &NoiseModel::StandardNormal, &alt, 1.0, &mut rng).unwrap();
            let v = g.series.values();
            first += v[..50].iter().sum::<f64>() / 50.0;
            second += v[50..].iter().sum::<f64>() / 50.0;
        }
        let diff = (second - first) / reps as f64;
        assert!((diff - 0.5).abs() < 0.05, "mean step {diff}");
    }

    #[test]
    fn boundary_warning_flag() {
        let mut rng = stream_rng(3, 4, 0);
        let alt = Alternative::A2 { gamma_for_kappa: wg(0.0), c: 1e6, delta: 1.0 };
        let g = generate_series(50, &NoiseModel::StandardNormal, &alt, 0.0, &mut rng).unwrap();
        assert!(g.boundary_warning);
    }

    #[test]
    fn envelope_values() {
        assert!((envelope_power(100, 50, 0.0, 1.0, 0.05).unwrap() - 0.05).abs() < 1e-6);
        let p = envelope_power(100, 50, 0.5, 1.0, 0.05).unwrap();
        assert!((p - 0.8037).abs() < 1e-4, "got {p}");
        // power is maximal at the central split
        let mid = envelope_power(100, 50, 0.5, 1.0, 0.05).unwrap();
        let off = envelope_power(100, 20, 0.5, 1.0, 0.05).unwrap();
        assert!(mid > off);
        assert!(envelope_power(100, 0, 0.5, 1.0, 0.05).is_err());
        assert!(envelope_power(100, 100, 0.5, 1.0, 0.05).is_err());
    }

    #[test]
    fn overall_power_ratio_identity_and_mismatch() {
        let grid = default_tau_grid();
        let env = envelope_curve(1000, &grid, 0.2, 1.0, 0.05).unwrap();
        assert!((overall_power_ratio(&env, &env).unwrap() - 100.0).abs() < 1e-12);
        let other = envelope_curve(1000, &grid[..10], 0.2, 1.0, 0.05).unwrap();
        assert!(matches!(overall_power_ratio(&other, &env), Err(Error::GridMismatch)));
    }

    #[test]
    fn null_power_curve_sits_at_alpha() {
        let study = PowerStudy {
            n: 100,
            kernel: Kernel::Cusum,
            gammas: vec![wg(0.0)],
            noise: NoiseModel::StandardNormal,
            alpha: 0.1,
            sided: Sidedness::TwoSidedMaxAbs,
            critical_sided: Sidedness::TwoSidedMaxAbs,
            reps: 400,
            null_reps: 2000,
            seed: 11,
            common_random_numbers: false,
        };
        let curves = power_curve_a1(&study, 0.0, &[0.3, 0.7]).unwrap();
        for p in &curves[0].power {
            assert!((p - 0.1).abs() < 0.05, "null power {p}");
        }
    }

    #[test]
    fn csv_output_shape() {
        let curve = PowerCurve {
            abscissa: vec![0.25, 0.5],
            power: vec![0.3, 0.6],
            std_err: vec![0.01, 0.01],
            meta: CurveMeta {
                n: 100,
                kernel: KernelKind::Cusum,
                gamma: 0.1,
                alpha: 0.05,
                reps: 100,
                size_corrected: true,
                seed: 7,
            },
        };
        let mut buf = Vec::new();
        write_power_curves(&mut buf, &[curve], "tau", &[("note".into(), "x".into())]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# n: 100\n"));
        assert!(text.contains("# note: x\n"));
        assert!(text.contains("gamma,tau,power,stderr\n"));
        // 6 meta + 1 extra meta + header + 2 data rows
        assert_eq!(text.trim_end().lines().count(), 10);
    }
}
