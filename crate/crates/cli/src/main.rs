mod config;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use wcpt_core::experiments::{
    default_tau_grid, envelope_curve, power_curve_a1, power_curve_a2, write_power_curves,
    PowerStudy,
};
use wcpt_core::limits::{build_quantile_table, BridgeGrid, QuantileTable};
use wcpt_core::statistic::{profile, run_test, CriticalSource, SigmaSource};
use wcpt_core::{Kernel, NoiseModel, Sidedness, TimeSeries, WeightGamma};

use config::GridSpec;

/// Documented fixed default seed; reproducibility first, never wall clock.
const DEFAULT_SEED: u64 = 0x5eed_cafe_f00d_0001;

// exit statuses beyond the clap default (2 = usage)
const EXIT_UNREADABLE: u8 = 3;
const EXIT_BAD_DATA: u8 = 4;
const EXIT_FAILED: u8 = 1;

#[derive(Parser)]
#[command(name = "wcpt", version, about = "Weighted U-statistic change-point tests")]
struct Cli {
    /// RNG seed shared by all Monte Carlo work.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output CSV path; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Cusum,
    Wilcoxon,
}

impl KernelArg {
    fn kernel(self) -> Kernel {
        match self {
            KernelArg::Cusum => Kernel::Cusum,
            KernelArg::Wilcoxon => Kernel::Wilcoxon,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SidedArg {
    One,
    Two,
}

impl SidedArg {
    fn sidedness(self) -> Sidedness {
        match self {
            SidedArg::One => Sidedness::OneSidedMax,
            SidedArg::Two => Sidedness::TwoSidedMaxAbs,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the change-point test on a single-column CSV of observations.
    Test(TestArgs),
    /// Simulate the critical-value table of the weighted bridge supremum.
    Quantiles(QuantilesArgs),
    /// Size-corrected power vs change fraction tau (shrinking jump c/sqrt(n)).
    PowerA1(PowerA1Args),
    /// Size-corrected power vs early-change scale c (fixed jump delta).
    PowerA2(PowerA2Args),
    /// Envelope power curve (exact normal theory, no simulation).
    Envelope(EnvelopeArgs),
}

#[derive(Args)]
struct TestArgs {
    /// Input CSV with one numeric column (header optional).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = KernelArg::Cusum)]
    kernel: KernelArg,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// One-sided signed max matches the signed critical-value table.
    #[arg(long, value_enum, default_value_t = SidedArg::One)]
    sided: SidedArg,
    /// Fixed critical value for the studentized statistic.
    #[arg(long, conflicts_with = "table")]
    critical: Option<f64>,
    /// Critical-value table CSV (as produced by `wcpt quantiles`).
    #[arg(long)]
    table: Option<PathBuf>,
    /// Known noise standard deviation for the CUSUM statistic; the sample
    /// standard deviation is used when omitted.
    #[arg(long)]
    sigma: Option<f64>,
    /// Write the full k -> G(k) profile to this CSV.
    #[arg(long)]
    profile_out: Option<PathBuf>,
    /// Replications for the internal table when neither --critical nor
    /// --table is given.
    #[arg(long, default_value_t = 20_000)]
    table_reps: u64,
    /// Bridge grid steps for the internal table.
    #[arg(long, default_value_t = 2_000)]
    table_grid_m: usize,
}

#[derive(Args)]
struct QuantilesArgs {
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.1, 0.2, 0.3, 0.4])]
    gammas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.05, 0.01])]
    alphas: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    reps: u64,
    #[arg(long, default_value_t = BridgeGrid::DEFAULT_M)]
    grid_m: usize,
    #[arg(long, value_enum, default_value_t = SidedArg::One)]
    sided: SidedArg,
}

#[derive(Args)]
struct PowerA1Args {
    /// Flat key=value config file; flags override file entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_enum)]
    kernel: Option<KernelArg>,
    #[arg(long, value_delimiter = ',')]
    gammas: Option<Vec<f64>>,
    /// Jump scale: delta_n = c / sqrt(n).
    #[arg(long)]
    c: Option<f64>,
    /// Grid as "start:stop:count" or a comma list; defaults to the 39-point
    /// grid 0.025..0.975.
    #[arg(long)]
    tau_grid: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    reps: Option<u64>,
    #[arg(long)]
    null_reps: Option<u64>,
    #[arg(long, value_enum, default_value_t = SidedArg::Two)]
    sided: SidedArg,
    /// Sidedness of the null quantile used for the size correction; defaults
    /// to --sided. Reference critical-value tables are one-sided, so studies
    /// calibrated to them test two-sided against one-sided quantiles.
    #[arg(long, value_enum)]
    critical_sided: Option<SidedArg>,
    /// Reuse each simulated series across all gammas.
    #[arg(long)]
    crn: bool,
}

#[derive(Args)]
struct PowerA2Args {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_enum)]
    kernel: Option<KernelArg>,
    #[arg(long, value_delimiter = ',')]
    gammas: Option<Vec<f64>>,
    /// Fixed jump height.
    #[arg(long)]
    delta: Option<f64>,
    /// Gamma whose kappa = (1-2g)/(2(1-g)) sets the change-time scale n^kappa.
    #[arg(long)]
    kappa_gamma: Option<f64>,
    /// Grid of c values, "start:stop:count" or comma list.
    #[arg(long)]
    c_grid: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    reps: Option<u64>,
    #[arg(long)]
    null_reps: Option<u64>,
    #[arg(long, value_enum, default_value_t = SidedArg::Two)]
    sided: SidedArg,
    /// Sidedness of the size-correction quantile; defaults to --sided.
    #[arg(long, value_enum)]
    critical_sided: Option<SidedArg>,
    #[arg(long)]
    crn: bool,
}

#[derive(Args)]
struct EnvelopeArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    tau_grid: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        // ignore failure: the global pool may already exist in tests
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.message);
            ExitCode::from(e.status)
        }
    }
}

struct CliError {
    status: u8,
    message: anyhow::Error,
}

impl CliError {
    fn new(status: u8, message: anyhow::Error) -> Self {
        CliError { status, message }
    }
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::new(EXIT_FAILED, e.into())
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Test(args) => cmd_test(cli, args),
        Command::Quantiles(args) => cmd_quantiles(cli, args),
        Command::PowerA1(args) => cmd_power_a1(cli, args),
        Command::PowerA2(args) => cmd_power_a2(cli, args),
        Command::Envelope(args) => cmd_envelope(cli, args),
    }
}

fn out_writer(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| {
            CliError::new(EXIT_UNREADABLE, anyhow::anyhow!("cannot create {}: {e}", p.display()))
        })?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn read_series(path: &Path) -> Result<TimeSeries, CliError> {
    let file = File::open(path).map_err(|e| {
        CliError::new(EXIT_UNREADABLE, anyhow::anyhow!("cannot read {}: {e}", path.display()))
    })?;
    let mut values = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::new(EXIT_UNREADABLE, e.into()))?;
        let cell = line.trim();
        if cell.is_empty() {
            continue;
        }
        match cell.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if i == 0 && values.is_empty() => continue, // header
            Err(_) => {
                return Err(CliError::new(
                    EXIT_BAD_DATA,
                    anyhow::anyhow!("line {}: not a number: {cell:?}", i + 1),
                ))
            }
        }
    }
    TimeSeries::new(values)
        .map_err(|e| CliError::new(EXIT_BAD_DATA, anyhow::anyhow!("invalid input: {e}")))
}

fn cmd_test(cli: &Cli, args: &TestArgs) -> Result<(), CliError> {
    let series = read_series(&args.input)?;
    let gamma = WeightGamma::new(args.gamma).map_err(usage)?;
    let kernel = args.kernel.kernel();
    let sided = args.sided.sidedness();

    let internal_table;
    let loaded_table;
    let critical = if let Some(q) = args.critical {
        CriticalSource::Fixed(q)
    } else if let Some(path) = &args.table {
        let file = File::open(path).map_err(|e| {
            CliError::new(EXIT_UNREADABLE, anyhow::anyhow!("cannot read {}: {e}", path.display()))
        })?;
        loaded_table = QuantileTable::read_csv(BufReader::new(file))
            .map_err(|e| CliError::new(EXIT_BAD_DATA, e.into()))?;
        CriticalSource::AsymptoticTable(&loaded_table)
    } else {
        let grid = BridgeGrid::new(args.table_grid_m).map_err(usage)?;
        internal_table = build_quantile_table(
            &[gamma],
            &[args.alpha],
            args.table_reps,
            &grid,
            sided,
            cli.seed,
        )?;
        CriticalSource::AsymptoticTable(&internal_table)
    };
    let sigma = match args.sigma {
        Some(s) => SigmaSource::Known(s),
        None => SigmaSource::SampleStd,
    };

    let outcome = run_test(&series, &kernel, gamma, args.alpha, sided, critical, sigma)?;

    let mut w = out_writer(cli.out.as_deref())?;
    writeln!(w, "n          = {}", series.len())?;
    writeln!(w, "kernel     = {}", outcome.kernel)?;
    writeln!(w, "gamma      = {}", outcome.gamma)?;
    writeln!(w, "alpha      = {}", outcome.alpha)?;
    writeln!(w, "statistic  = {}", outcome.statistic)?;
    writeln!(w, "critical   = {}", outcome.critical_value)?;
    writeln!(w, "reject     = {}", outcome.reject)?;
    writeln!(w, "changepoint = {}", outcome.estimated_changepoint)?;

    if let Some(path) = &args.profile_out {
        let p = profile(&series, &kernel, gamma)?;
        let mut f = BufWriter::new(File::create(path)?);
        writeln!(f, "# seed: {}", cli.seed)?;
        writeln!(f, "# version: {}", env!("CARGO_PKG_VERSION"))?;
        writeln!(f, "k,g")?;
        for (i, v) in p.values().iter().enumerate() {
            writeln!(f, "{},{}", i + 1, v)?;
        }
    }
    Ok(())
}

fn usage(e: wcpt_core::Error) -> CliError {
    CliError::new(2, e.into())
}

fn cmd_quantiles(cli: &Cli, args: &QuantilesArgs) -> Result<(), CliError> {
    let gammas: Vec<WeightGamma> = args
        .gammas
        .iter()
        .map(|&g| WeightGamma::new(g))
        .collect::<Result<_, _>>()
        .map_err(usage)?;
    let grid = BridgeGrid::new(args.grid_m).map_err(usage)?;
    let table =
        build_quantile_table(&gammas, &args.alphas, args.reps, &grid, args.sided.sidedness(), cli.seed)?;

    let mut w = out_writer(cli.out.as_deref())?;
    writeln!(w, "# seed: {}", cli.seed)?;
    writeln!(w, "# version: {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(w, "# reps: {}", args.reps)?;
    writeln!(w, "# grid_m: {}", args.grid_m)?;
    let max_se = table.entries().iter().map(|e| e.std_error).fold(0.0f64, f64::max);
    if max_se > 0.02 {
        writeln!(w, "# warning: high Monte Carlo stderr (max {max_se}); increase --reps")?;
    }
    table.write_csv(&mut w)?;
    Ok(())
}

fn study_from(
    cli: &Cli,
    file: &config::FlatConfig,
    n: Option<usize>,
    kernel: Option<KernelArg>,
    gammas: &Option<Vec<f64>>,
    alpha: Option<f64>,
    reps: Option<u64>,
    null_reps: Option<u64>,
    sided: SidedArg,
    critical_sided: Option<SidedArg>,
    crn: bool,
) -> Result<PowerStudy, CliError> {
    let n = n.or(file.get_usize("n")?).unwrap_or(1000);
    let kernel = match kernel {
        Some(k) => k.kernel(),
        None => match file.get_str("kernel") {
            Some("wilcoxon") => Kernel::Wilcoxon,
            Some("cusum") | None => Kernel::Cusum,
            Some(other) => {
                return Err(CliError::new(2, anyhow::anyhow!("unknown kernel {other:?}")))
            }
        },
    };
    let gammas = gammas
        .clone()
        .or(file.get_f64_list("gammas")?)
        .unwrap_or_else(|| vec![0.0, 0.1, 0.2, 0.3, 0.4]);
    let gammas: Vec<WeightGamma> =
        gammas.into_iter().map(WeightGamma::new).collect::<Result<_, _>>().map_err(usage)?;
    Ok(PowerStudy {
        n,
        kernel,
        gammas,
        noise: NoiseModel::StandardNormal,
        alpha: alpha.or(file.get_f64("alpha")?).unwrap_or(0.05),
        sided: sided.sidedness(),
        critical_sided: critical_sided.unwrap_or(sided).sidedness(),
        reps: reps.or(file.get_u64("reps")?).unwrap_or(5000),
        null_reps: null_reps.or(file.get_u64("null_reps")?).unwrap_or(5000),
        seed: file.get_u64("seed")?.unwrap_or(cli.seed),
        common_random_numbers: crn || file.get_str("crn") == Some("true"),
    })
}

fn cmd_power_a1(cli: &Cli, args: &PowerA1Args) -> Result<(), CliError> {
    let file = config::FlatConfig::load(args.config.as_deref())?;
    let study = study_from(
        cli,
        &file,
        args.n,
        args.kernel,
        &args.gammas,
        args.alpha,
        args.reps,
        args.null_reps,
        args.sided,
        args.critical_sided,
        args.crn,
    )?;
    let c = args.c.or(file.get_f64("c")?).unwrap_or(5.0);
    let tau_grid = match args.tau_grid.as_deref().or(file.get_str("tau_grid")) {
        Some(spec) => GridSpec::parse(spec)?.points(),
        None => default_tau_grid(),
    };
    let curves = power_curve_a1(&study, c, &tau_grid)?;
    let mut w = out_writer(cli.out.as_deref())?;
    write_power_curves(
        &mut w,
        &curves,
        "tau",
        &[
            ("regime".into(), "a1".into()),
            ("c".into(), format!("{c}")),
            ("version".into(), env!("CARGO_PKG_VERSION").into()),
        ],
    )?;
    Ok(())
}

fn cmd_power_a2(cli: &Cli, args: &PowerA2Args) -> Result<(), CliError> {
    let file = config::FlatConfig::load(args.config.as_deref())?;
    let study = study_from(
        cli,
        &file,
        args.n,
        args.kernel,
        &args.gammas,
        args.alpha,
        args.reps,
        args.null_reps,
        args.sided,
        args.critical_sided,
        args.crn,
    )?;
    let delta = args.delta.or(file.get_f64("delta")?).unwrap_or(1.0);
    let kappa_gamma =
        WeightGamma::new(args.kappa_gamma.or(file.get_f64("kappa_gamma")?).unwrap_or(0.3))
            .map_err(usage)?;
    let c_grid = match args.c_grid.as_deref().or(file.get_str("c_grid")) {
        Some(spec) => GridSpec::parse(spec)?.points(),
        None => (1..=20).map(|i| i as f64 * 0.2).collect(),
    };
    let curves = power_curve_a2(&study, delta, kappa_gamma, &c_grid)?;
    let mut w = out_writer(cli.out.as_deref())?;
    write_power_curves(
        &mut w,
        &curves,
        "c",
        &[
            ("regime".into(), "a2".into()),
            ("delta".into(), format!("{delta}")),
            ("kappa_gamma".into(), format!("{kappa_gamma}")),
            ("version".into(), env!("CARGO_PKG_VERSION").into()),
        ],
    )?;
    Ok(())
}

fn cmd_envelope(cli: &Cli, args: &EnvelopeArgs) -> Result<(), CliError> {
    let tau_grid = match args.tau_grid.as_deref() {
        Some(spec) => GridSpec::parse(spec)?.points(),
        None => default_tau_grid(),
    };
    let curve = envelope_curve(args.n, &tau_grid, args.delta, args.sigma, args.alpha)?;
    let mut w = out_writer(cli.out.as_deref())?;
    writeln!(w, "# n: {}", args.n)?;
    writeln!(w, "# delta: {}", args.delta)?;
    writeln!(w, "# sigma: {}", args.sigma)?;
    writeln!(w, "# alpha: {}", args.alpha)?;
    writeln!(w, "# version: {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(w, "tau,power")?;
    for (tau, p) in curve.abscissa.iter().zip(&curve.power) {
        writeln!(w, "{tau},{p}")?;
    }
    Ok(())
}
