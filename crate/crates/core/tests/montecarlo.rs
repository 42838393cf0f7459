//! Monte Carlo consistency checks: sampled quantities against closed forms,
//! limit-law anchors, and the qualitative behavior the asymptotics predict.
//!
//! Tolerances are stated in Monte Carlo standard errors (plus an explicit
//! signed allowance for grid discretization where the target is a continuous
//! supremum), so failures indicate real bias rather than noise.

use std::sync::Arc;

use wcpt_core::experiments::{
    empirical_critical_value, power_curve_a1, simulated_power, Alternative, PowerStudy,
    EXP_NULL_CRIT,
};
use wcpt_core::kernels::{hoeffding_projections, u_of_delta};
use wcpt_core::limits::{
    build_quantile_table, rejection_probability, sample_bridge_path, sample_limit_a2_unweighted,
    sample_limit_a2_weighted, A2LimitSpec, BridgeGrid, BridgeSupSampler,
};
use wcpt_core::rng::stream_rng;
use wcpt_core::{Kernel, NoiseModel, Sidedness, WeightGamma};

fn wg(g: f64) -> WeightGamma {
    WeightGamma::new(g).unwrap()
}

fn std_normal_cdf(x: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

/// The Wilcoxon kernel supplied as an opaque function, which forces the
/// pair-sampling Monte Carlo route instead of the closed form.
fn opaque_wilcoxon() -> Kernel {
    Kernel::Custom(Arc::new(|x: f64| {
        if x > 0.0 {
            0.5
        } else if x < 0.0 {
            -0.5
        } else {
            0.0
        }
    }))
}

#[test]
fn sampled_u_matches_closed_form() {
    let kernel = opaque_wilcoxon();
    let noise = NoiseModel::StandardNormal;
    for (i, delta) in [0.25, 0.5, 1.0, 2.0].into_iter().enumerate() {
        let mut rng = stream_rng(0x11, 1, i as u64);
        let est = u_of_delta(&kernel, &noise, delta, 200_000, &mut rng).unwrap();
        let exact = std_normal_cdf(delta / 2f64.sqrt()) - 0.5;
        assert!(est.std_error > 0.0);
        assert!(
            (est.value - exact).abs() <= 4.0 * est.std_error,
            "delta={delta}: {} vs {exact} (se {})",
            est.value,
            est.std_error
        );
    }
}

#[test]
fn projections_are_centered() {
    // E[h1(xi)] = E[h2(xi)] = 0 when xi has the noise distribution
    let noise = NoiseModel::StandardNormal;
    let delta = 0.5;
    let reps = 100_000u64;
    let mut rng = stream_rng(0x12, 1, 0);
    let (mut s1, mut q1, mut s2, mut q2) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..reps {
        let x = noise.sample(&mut rng);
        let (h1, h2) =
            hoeffding_projections(&Kernel::Wilcoxon, &noise, delta, x, 10, &mut rng).unwrap();
        s1 += h1.value;
        q1 += h1.value * h1.value;
        s2 += h2.value;
        q2 += h2.value * h2.value;
    }
    let n = reps as f64;
    for (s, q, name) in [(s1, q1, "h1"), (s2, q2, "h2")] {
        let mean = s / n;
        let sd = (q / n - mean * mean).max(0.0).sqrt();
        assert!(
            mean.abs() <= 5.0 * sd / n.sqrt(),
            "{name}: mean {mean}, sd {sd}"
        );
    }
}

#[test]
fn projection_variance_vanishes_for_shrinking_jumps() {
    // the contiguity premise: Var h1 -> 0 along delta_n = c / sqrt(n)
    let noise = NoiseModel::StandardNormal;
    let mut rng = stream_rng(0x13, 1, 0);
    let draws: Vec<f64> = (0..20_000).map(|_| noise.sample(&mut rng)).collect();
    let mut variances = Vec::new();
    for n in [100.0f64, 1_000.0, 10_000.0] {
        let delta = 5.0 / n.sqrt();
        let (mut s, mut q) = (0.0, 0.0);
        for &x in &draws {
            let (h1, _) =
                hoeffding_projections(&Kernel::Wilcoxon, &noise, delta, x, 10, &mut rng).unwrap();
            s += h1.value;
            q += h1.value * h1.value;
        }
        let m = s / draws.len() as f64;
        variances.push(q / draws.len() as f64 - m * m);
    }
    assert!(variances[1] < variances[0], "{variances:?}");
    assert!(variances[2] < variances[1], "{variances:?}");
    // the variance scales like delta^2, so a decade in n is a decade in Var
    assert!(variances[2] < variances[0] / 10.0, "{variances:?}");
}

#[test]
fn bridge_paths_have_bridge_moments() {
    let grid = BridgeGrid::new(2_000).unwrap();
    let m = grid.m();
    let reps = 20_000u64;
    // check E W0(lambda) = 0 and Var W0(lambda) = lambda(1-lambda)
    let probes = [m / 10, m / 2, 9 * m / 10];
    let mut sums = [0.0f64; 3];
    let mut sqs = [0.0f64; 3];
    for rep in 0..reps {
        let mut rng = stream_rng(0x14, 1, rep);
        let path = sample_bridge_path(&grid, &mut rng);
        for (j, &i) in probes.iter().enumerate() {
            let v = path[i - 1];
            sums[j] += v;
            sqs[j] += v * v;
        }
    }
    let n = reps as f64;
    for (j, &i) in probes.iter().enumerate() {
        let lam = i as f64 / m as f64;
        let var_true = lam * (1.0 - lam);
        let mean = sums[j] / n;
        let var = sqs[j] / n - mean * mean;
        assert!(
            mean.abs() <= 4.0 * (var_true / n).sqrt(),
            "lambda={lam}: mean {mean}"
        );
        // sample variance of a Gaussian has standard error var * sqrt(2/n)
        assert!(
            (var - var_true).abs() <= 5.0 * var_true * (2.0 / n).sqrt(),
            "lambda={lam}: var {var} vs {var_true}"
        );
    }
}

#[test]
fn unweighted_sup_matches_exponential_tail() {
    // P(sup W0 > x) = exp(-2 x^2) exactly for the one-sided unweighted sup
    let grid = BridgeGrid::new(2_000).unwrap();
    let sampler = BridgeSupSampler::new(&[wg(0.0)], &grid);
    let reps = 100_000u64;
    let mut walk = Vec::with_capacity(grid.m());
    let mut out = [0.0];
    let probes = [0.5f64, 1.0, 1.5];
    let mut hits = [0u64; 3];
    for rep in 0..reps {
        let mut rng = stream_rng(0x15, 1, rep);
        sampler.sample_into(Sidedness::OneSidedMax, &mut rng, &mut walk, &mut out);
        for (j, &x) in probes.iter().enumerate() {
            hits[j] += u64::from(out[0] > x);
        }
    }
    for (j, &x) in probes.iter().enumerate() {
        let p_true = (-2.0 * x * x).exp();
        let p_hat = hits[j] as f64 / reps as f64;
        let se = (p_true * (1.0 - p_true) / reps as f64).sqrt();
        // the grid sup undershoots the continuous one by about beta/sqrt(m)
        // in value (beta = 0.5826), hence by |d/dx exp(-2x^2)| * beta/sqrt(m)
        // in probability, always on the low side
        let bias = 4.0 * x * p_true * 0.5826 / (grid.m() as f64).sqrt();
        assert!(p_hat <= p_true + 4.0 * se, "x={x}: {p_hat} vs {p_true}");
        assert!(
            p_hat >= p_true - 4.0 * se - bias,
            "x={x}: {p_hat} vs {p_true} (bias allowance {bias})"
        );
    }
}

#[test]
fn critical_values_monotone_in_gamma_and_alpha() {
    let grid = BridgeGrid::new(2_000).unwrap();
    let gammas: Vec<_> = [0.0, 0.1, 0.2, 0.3, 0.4].map(wg).into();
    let alphas = [0.1, 0.05, 0.01];
    let table =
        build_quantile_table(&gammas, &alphas, 20_000, &grid, Sidedness::OneSidedMax, 0x16)
            .unwrap();
    for &alpha in &alphas {
        let qs: Vec<f64> =
            gammas.iter().map(|g| table.lookup(g.value(), alpha).unwrap()).collect();
        for w in qs.windows(2) {
            assert!(w[0] < w[1], "quantiles not increasing in gamma: {qs:?}");
        }
    }
    for g in &gammas {
        let qs: Vec<f64> =
            alphas.iter().map(|&a| table.lookup(g.value(), a).unwrap()).collect();
        for w in qs.windows(2) {
            assert!(w[0] < w[1], "quantiles not increasing as alpha shrinks: {qs:?}");
        }
    }
}

#[test]
fn quantiles_stable_under_grid_refinement() {
    // couple a fine grid with its 5x coarser subgrid on the same paths: the
    // coarse sup can never exceed the fine one, and the 95% quantiles agree
    // to well under the grid-refinement tolerance
    let fine = BridgeGrid::new(10_000).unwrap();
    let m = fine.m();
    let stride = 5;
    let gamma = 0.4;
    let reps = 20_000u64;
    let weights: Vec<f64> = (1..m)
        .map(|i| {
            let lam = i as f64 / m as f64;
            (lam * (1.0 - lam)).powf(-gamma)
        })
        .collect();
    let mut fine_sups = Vec::with_capacity(reps as usize);
    let mut coarse_sups = Vec::with_capacity(reps as usize);
    for rep in 0..reps {
        let mut rng = stream_rng(0x17, 1, rep);
        let path = sample_bridge_path(&fine, &mut rng);
        let mut best_fine = f64::NEG_INFINITY;
        let mut best_coarse = f64::NEG_INFINITY;
        for i in 1..m {
            let v = (path[i - 1] * weights[i - 1]).abs();
            if v > best_fine {
                best_fine = v;
            }
            if i % stride == 0 && v > best_coarse {
                best_coarse = v;
            }
        }
        assert!(best_coarse <= best_fine);
        fine_sups.push(best_fine);
        coarse_sups.push(best_coarse);
    }
    fine_sups.sort_by(|a, b| a.partial_cmp(b).unwrap());
    coarse_sups.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let idx = (0.95 * (reps - 1) as f64).round() as usize;
    let gap = fine_sups[idx] - coarse_sups[idx];
    assert!((0.0..0.02).contains(&gap), "quantile gap {gap}");
}

#[test]
fn early_change_dichotomy_around_threshold() {
    // gamma > 0: the limit power jumps from alpha to 1 across c*
    let gamma = wg(0.3);
    let grid = BridgeGrid::new(2_000).unwrap();
    let alpha = 0.05;
    let table = build_quantile_table(
        &[gamma],
        &[alpha],
        30_000,
        &grid,
        Sidedness::TwoSidedMaxAbs,
        0x18,
    )
    .unwrap();
    let q = table.lookup(gamma.value(), alpha).unwrap();
    let u_delta = 1.0;
    let c_star = (q / u_delta).powf(1.0 / 0.7);

    // below threshold the atom stays under q, so rejection falls back to the
    // null law and the probability is alpha
    let below = A2LimitSpec::new(gamma, 0.8 * c_star, u_delta, 1.0).unwrap();
    let (p_below, se) = rejection_probability(
        |rng| sample_limit_a2_weighted(&below, &grid, rng).unwrap(),
        q,
        20_000,
        0x18,
        2,
    );
    assert!(
        (p_below - alpha).abs() <= 4.0 * se + 0.005,
        "sub-threshold power {p_below} (se {se})"
    );

    // above threshold the deterministic atom alone exceeds q
    let above = A2LimitSpec::new(gamma, 1.2 * c_star, u_delta, 1.0).unwrap();
    let (p_above, _) = rejection_probability(
        |rng| sample_limit_a2_weighted(&above, &grid, rng).unwrap(),
        q,
        5_000,
        0x18,
        3,
    );
    assert_eq!(p_above, 1.0);
}

#[test]
fn unweighted_early_change_power_grows_with_c() {
    // gamma = 0: no dichotomy, the limit power climbs continuously in c
    let gamma = wg(0.0);
    let grid = BridgeGrid::new(2_000).unwrap();
    let alpha = 0.05;
    let table = build_quantile_table(
        &[gamma],
        &[alpha],
        30_000,
        &grid,
        Sidedness::TwoSidedMaxAbs,
        0x19,
    )
    .unwrap();
    let q = table.lookup(0.0, alpha).unwrap();
    let powers: Vec<f64> = [0.0, 1.0, 2.0, 4.0, 8.0]
        .into_iter()
        .map(|c| {
            let spec = A2LimitSpec::new(gamma, c, 0.5, 1.0).unwrap();
            rejection_probability(
                |rng| sample_limit_a2_unweighted(&spec, &grid, rng).unwrap(),
                q,
                20_000,
                0x19,
                c.to_bits(),
            )
            .0
        })
        .collect();
    assert!((powers[0] - alpha).abs() < 0.01, "null level {powers:?}");
    for w in powers.windows(2) {
        assert!(w[1] > w[0] - 0.01, "not increasing: {powers:?}");
    }
    assert!(powers[4] > 0.99, "{powers:?}");
}

#[test]
fn size_correction_is_exact_on_its_own_streams() {
    // re-simulating the null with the same seed and experiment id must reject
    // at rate alpha up to quantile granularity
    let n = 200;
    let gamma = wg(0.2);
    let alpha = 0.05;
    let reps = 2_000u64;
    let seed = 42;
    let cv = empirical_critical_value(
        n,
        &Kernel::Cusum,
        gamma,
        &NoiseModel::StandardNormal,
        alpha,
        Sidedness::TwoSidedMaxAbs,
        reps,
        seed,
    )
    .unwrap();
    let (p, _) = simulated_power(
        n,
        &Kernel::Cusum,
        &NoiseModel::StandardNormal,
        &Alternative::Null,
        gamma,
        Sidedness::TwoSidedMaxAbs,
        cv,
        1.0,
        reps,
        seed,
        EXP_NULL_CRIT,
    )
    .unwrap();
    assert!(
        (p - alpha).abs() <= 1.5 / reps as f64,
        "null rejection rate {p} at critical {cv}"
    );
}

#[test]
fn fixed_fraction_power_symmetric_under_time_reversal() {
    // (tau, +delta) and (1 - tau, -delta) give the same two-sided statistic
    // in distribution
    let study = PowerStudy {
        n: 200,
        kernel: Kernel::Cusum,
        gammas: vec![wg(0.1)],
        noise: NoiseModel::StandardNormal,
        alpha: 0.05,
        sided: Sidedness::TwoSidedMaxAbs,
        critical_sided: Sidedness::TwoSidedMaxAbs,
        reps: 2_000,
        null_reps: 2_000,
        seed: 0x1a,
        common_random_numbers: false,
    };
    let grid = [0.2, 0.8];
    let plus = power_curve_a1(&study, 4.0, &grid).unwrap();
    let minus = power_curve_a1(&study, -4.0, &grid).unwrap();
    let se = plus[0].std_err[0].max(minus[0].std_err[1]).max(0.005);
    assert!(
        (plus[0].power[0] - minus[0].power[1]).abs() <= 5.0 * se,
        "P(tau=0.2, +) = {} vs P(tau=0.8, -) = {}",
        plus[0].power[0],
        minus[0].power[1]
    );
    assert!(
        (plus[0].power[1] - minus[0].power[0]).abs() <= 5.0 * se,
        "P(tau=0.8, +) = {} vs P(tau=0.2, -) = {}",
        plus[0].power[1],
        minus[0].power[0]
    );
}

#[test]
fn fixed_fraction_power_monotone_in_jump_height() {
    let study = PowerStudy {
        n: 300,
        kernel: Kernel::Cusum,
        gammas: vec![wg(0.0)],
        noise: NoiseModel::StandardNormal,
        alpha: 0.05,
        sided: Sidedness::TwoSidedMaxAbs,
        critical_sided: Sidedness::TwoSidedMaxAbs,
        reps: 2_000,
        null_reps: 2_000,
        seed: 0x1b,
        common_random_numbers: false,
    };
    let grid = [0.5];
    let powers: Vec<f64> = [5.0, 7.0, 9.0]
        .into_iter()
        .map(|c| power_curve_a1(&study, c, &grid).unwrap()[0].power[0])
        .collect();
    assert!(powers[1] > powers[0] + 0.05, "{powers:?}");
    assert!(powers[2] > powers[1] + 0.02, "{powers:?}");
}

#[test]
fn power_curves_identical_for_any_thread_count() {
    let study = PowerStudy {
        n: 120,
        kernel: Kernel::Wilcoxon,
        gammas: vec![wg(0.0), wg(0.3)],
        noise: NoiseModel::StandardNormal,
        alpha: 0.1,
        sided: Sidedness::TwoSidedMaxAbs,
        critical_sided: Sidedness::TwoSidedMaxAbs,
        reps: 200,
        null_reps: 500,
        seed: 0x1c,
        common_random_numbers: true,
    };
    let grid = [0.25, 0.5];
    let run = || power_curve_a1(&study, 5.0, &grid).unwrap();
    let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let pool3 = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    assert_eq!(pool1.install(run), pool3.install(run));
}
