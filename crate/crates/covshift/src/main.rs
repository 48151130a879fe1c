//! Command-line front end over the library: solve importance weights,
//! produce combined estimates, fit weighted ERM models, generate datasets,
//! and drive the benchmark experiments.
//!
//! Every subcommand reads and writes the crate's CSV layout (`x1..xp[,y]`,
//! header row) and reports structured results as JSON. Exit codes: 0 on
//! success, 1 on any error, 2 when `experiment --check` finds a violated
//! sanity property.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write as _};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use covshift::datagen::{
    biased_subsample, gen_gaussian10d, gen_toy1d, load_uci_breast_cancer, Gaussian10dParams,
};
use covshift::erm::{
    fit_kmm_weighted_logistic, fit_kmm_weighted_ridge, fit_robust_least_squares,
    fit_robust_logistic, fit_unweighted_nr_erm, ErmFit, Loss,
};
use covshift::estimators::{estimate_v_r_auto, GHatSpec, SplitPlan};
use covshift::experiments::{
    check_report, run_experiment, write_records_csv, ExperimentConfig, RatesConfig, Table1Config,
    ToyConfig, UciConfig,
};
use covshift::kernels::{read_dataset_csv, write_dataset_csv};
use covshift::kmm::{kmm_weights, KmmConfig};
use covshift::ridge::{fit_kernel_ridge, GammaSchedule};
use covshift::{Dataset, KernelSpec, Role};

#[derive(Parser)]
#[command(
    name = "covshift",
    version,
    about = "Covariate-shift correction: importance weights, combined mean estimation, weighted ERM, and benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve kernel mean matching weights for a training sample.
    Weights(WeightsArgs),
    /// Estimate the test-distribution mean outcome three ways.
    Estimate(EstimateArgs),
    /// Fit a penalized model by weighted, robust, or plug-in ERM.
    Erm(ErmArgs),
    /// Generate synthetic datasets or biased subsamples as CSV.
    #[command(subcommand)]
    Datagen(DatagenCommand),
    /// Run a benchmark scenario and write its report.
    Experiment(ExperimentArgs),
}

/// Kernel selection shared by the model-fitting subcommands.
#[derive(Args)]
struct KernelArgs {
    /// Kernel family.
    #[arg(long, value_enum, default_value_t = KernelKind::Gaussian)]
    kernel: KernelKind,
    /// Gaussian decay rate in exp(-sigma * ||x - x'||).
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Polynomial degree (polynomial kernel only).
    #[arg(long, default_value_t = 3)]
    degree: u32,
    /// Polynomial additive offset (polynomial kernel only).
    #[arg(long, default_value_t = 1.0)]
    offset: f64,
}

#[derive(Copy, Clone, ValueEnum)]
enum KernelKind {
    Gaussian,
    Polynomial,
}

impl KernelArgs {
    fn spec(&self) -> Result<KernelSpec> {
        Ok(match self.kernel {
            KernelKind::Gaussian => KernelSpec::gaussian(self.sigma)?,
            KernelKind::Polynomial => KernelSpec::polynomial(self.degree, self.offset)?,
        })
    }
}

/// Weight-solver knobs shared by every subcommand that runs one.
#[derive(Args)]
struct BoundArgs {
    /// Upper bound on each weight.
    #[arg(long = "B", default_value_t = 1000.0)]
    b: f64,
    /// Half-width of the mean-weight band; omitted applies the
    /// sample-size rule (sqrt(n) - 1) / sqrt(n).
    #[arg(long)]
    epsilon: Option<f64>,
    /// Stationarity tolerance for the weight solver.
    #[arg(long)]
    qp_tol: Option<f64>,
}

impl BoundArgs {
    fn kmm_config(&self, kernel: KernelSpec) -> KmmConfig {
        let mut cfg = KmmConfig::new(kernel);
        cfg.b = self.b;
        cfg.epsilon = self.epsilon;
        if let Some(tol) = self.qp_tol {
            cfg.qp_tol = tol;
        }
        cfg
    }
}

/// Ridge-penalty rule selection for fitted regression functions.
#[derive(Args)]
struct GammaArgs {
    /// Rule mapping sample sizes to the ridge penalty.
    #[arg(long, value_enum, default_value_t = GammaRule::Ntr)]
    gamma_rule: GammaRule,
    /// Smoothness parameter (gamma-rule theta only).
    #[arg(long)]
    theta: Option<f64>,
    /// Constant penalty value (gamma-rule fixed only).
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Copy, Clone, ValueEnum)]
enum GammaRule {
    /// min(n_tr, n_te)^(-(theta+2)/(theta+1)).
    Theta,
    /// min(n_tr, n_te)^-1.
    N,
    /// n_tr^-1.
    Ntr,
    /// A constant; requires --gamma.
    Fixed,
}

impl GammaArgs {
    fn schedule(&self) -> Result<GammaSchedule> {
        Ok(match self.gamma_rule {
            GammaRule::Theta => GammaSchedule::ThetaOptimal {
                theta: self
                    .theta
                    .context("--gamma-rule theta requires --theta")?,
            },
            GammaRule::N => GammaSchedule::InverseN,
            GammaRule::Ntr => GammaSchedule::InverseNtr,
            GammaRule::Fixed => GammaSchedule::Fixed {
                value: self
                    .gamma
                    .context("--gamma-rule fixed requires --gamma")?,
            },
        })
    }
}

#[derive(Args)]
struct WeightsArgs {
    /// Training covariates (labels ignored if present).
    #[arg(long)]
    train: PathBuf,
    /// Test covariates.
    #[arg(long)]
    test: PathBuf,
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    bounds: BoundArgs,
    /// Output CSV, one weight per training row; diagnostics go to the
    /// same path with a .json extension.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    /// Labeled training sample.
    #[arg(long)]
    train: PathBuf,
    /// Test covariates.
    #[arg(long)]
    test: PathBuf,
    /// Fraction of training rows assigned to the weighted block.
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    /// Use the full training set for both the weights and the fit
    /// instead of splitting it.
    #[arg(long)]
    reuse_full: bool,
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    bounds: BoundArgs,
    #[command(flatten)]
    gamma: GammaArgs,
    /// Fit the regression function by lasso with this penalty instead
    /// of kernel ridge.
    #[arg(long)]
    lasso: Option<f64>,
    /// Output JSON report.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ErmArgs {
    /// Which empirical risk to minimize.
    #[arg(long, value_enum)]
    mode: ErmModeArg,
    /// Loss function.
    #[arg(long, value_enum)]
    loss: LossArg,
    /// Labeled training sample.
    #[arg(long)]
    train: PathBuf,
    /// Test covariates (a y column, if present, is held out and used
    /// only to report the test error).
    #[arg(long)]
    test: PathBuf,
    /// ERM ridge penalty.
    #[arg(long)]
    lambda: f64,
    /// Fraction of training rows assigned to the weighted block.
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    /// Use the full training set for both blocks instead of splitting.
    #[arg(long)]
    reuse_full: bool,
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    bounds: BoundArgs,
    #[command(flatten)]
    gamma: GammaArgs,
    /// Gradient tolerance for logistic fits.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Output JSON model.
    #[arg(long)]
    out: PathBuf,
    /// Also write per-test-row decision values and hard labels as CSV.
    #[arg(long)]
    predict: Option<PathBuf>,
}

#[derive(Copy, Clone, ValueEnum)]
enum ErmModeArg {
    Robust,
    Kmm,
    Unweighted,
}

#[derive(Copy, Clone, ValueEnum)]
enum LossArg {
    Squared,
    Logistic,
}

#[derive(Subcommand)]
enum DatagenCommand {
    /// One-dimensional shifted-Gaussian regression pair.
    Toy1d(Toy1dArgs),
    /// Ten-dimensional random-Gaussian pair with a nonlinear response.
    Gaussian10d(Gaussian10dArgs),
    /// Split a labeled table and bias-subsample its training pool.
    UciBias(UciBiasArgs),
}

#[derive(Args)]
struct Toy1dArgs {
    #[arg(long, default_value_t = 500)]
    n_tr: usize,
    #[arg(long, default_value_t = 500)]
    n_te: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Training CSV path (labeled).
    #[arg(long)]
    train_out: PathBuf,
    /// Test CSV path (labels included but marked held-out on re-read).
    #[arg(long)]
    test_out: PathBuf,
}

#[derive(Args)]
struct Gaussian10dArgs {
    #[arg(long, default_value_t = 500)]
    n_tr: usize,
    #[arg(long, default_value_t = 500)]
    n_te: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Spread of the random mean vectors.
    #[arg(long)]
    mean_scale: Option<f64>,
    /// Spread of the oscillation coefficient in the response.
    #[arg(long)]
    c1_scale: Option<f64>,
    /// Spread of the sigmoid direction in the response.
    #[arg(long)]
    c2_scale: Option<f64>,
    /// Label noise standard deviation.
    #[arg(long)]
    noise_sd: Option<f64>,
    /// Monte Carlo draws behind the reported oracle mean.
    #[arg(long)]
    oracle_draws: Option<usize>,
    /// Training CSV path (labeled).
    #[arg(long)]
    train_out: PathBuf,
    /// Test CSV path (unlabeled).
    #[arg(long)]
    test_out: PathBuf,
    /// Optional JSON with the instance's oracle mean and response
    /// parameters.
    #[arg(long)]
    meta_out: Option<PathBuf>,
}

#[derive(Args)]
struct UciBiasArgs {
    /// Source table in the Wisconsin breast-cancer layout (no header,
    /// 11 columns: id, nine integer features, class 2 or 4).
    #[arg(long)]
    data: PathBuf,
    /// Fraction of rows forming the training pool; the rest become the
    /// test sample.
    #[arg(long, default_value_t = 0.5)]
    fraction: f64,
    /// Bias strength: selection probability proportional to
    /// exp(-sigma1 * ||x - mean||).
    #[arg(long, default_value_t = 0.01)]
    sigma1: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Biased training subsample CSV path (labeled).
    #[arg(long)]
    train_out: PathBuf,
    /// Held-out test CSV path (labeled).
    #[arg(long)]
    test_out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Benchmark scenario.
    #[arg(value_enum)]
    scenario: ScenarioArg,
    /// Scenario configuration JSON; omitted runs the scenario defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report JSON path.
    #[arg(long)]
    out: PathBuf,
    /// Also write the per-replication records as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Override the configuration's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Run the scenario's sanity checks; violations exit with code 2.
    #[arg(long)]
    check: bool,
}

#[derive(Copy, Clone, ValueEnum)]
enum ScenarioArg {
    Toy,
    Table1,
    Uci,
    Rates,
}

impl ScenarioArg {
    fn name(self) -> &'static str {
        match self {
            ScenarioArg::Toy => "toy",
            ScenarioArg::Table1 => "table1",
            ScenarioArg::Uci => "uci",
            ScenarioArg::Rates => "rates",
        }
    }

    fn default_config(self) -> ExperimentConfig {
        match self {
            ScenarioArg::Toy => ExperimentConfig::Toy(ToyConfig::default()),
            ScenarioArg::Table1 => ExperimentConfig::Table1(Table1Config::default()),
            ScenarioArg::Uci => ExperimentConfig::Uci(UciConfig::default()),
            ScenarioArg::Rates => ExperimentConfig::Rates(RatesConfig::default()),
        }
    }
}

/// Forwards library log records (bias-direction warnings and the like)
/// to stderr.
struct StderrLogger;

impl log::Log for StderrLogger {
    fn enabled(&self, metadata: &log::Metadata<'_>) -> bool {
        metadata.level() <= log::Level::Info
    }

    fn log(&self, record: &log::Record<'_>) {
        if self.enabled(record.metadata()) {
            eprintln!("{}: {}", record.level().to_string().to_lowercase(), record.args());
        }
    }

    fn flush(&self) {}
}

static LOGGER: StderrLogger = StderrLogger;

fn main() -> ExitCode {
    if log::set_logger(&LOGGER).is_ok() {
        log::set_max_level(log::LevelFilter::Info);
    }
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Weights(args) => cmd_weights(args)?,
        Command::Estimate(args) => cmd_estimate(args)?,
        Command::Erm(args) => cmd_erm(args)?,
        Command::Datagen(cmd) => cmd_datagen(cmd)?,
        Command::Experiment(args) => return cmd_experiment(args),
    }
    Ok(ExitCode::SUCCESS)
}

fn read_csv(path: &PathBuf, role: Role) -> Result<Dataset> {
    read_dataset_csv(path, role).with_context(|| format!("reading {}", path.display()))
}

fn write_json<T: serde::Serialize>(path: &PathBuf, value: &T) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

fn cmd_weights(args: WeightsArgs) -> Result<()> {
    let train = read_csv(&args.train, Role::Train)?;
    let test = read_csv(&args.test, Role::Test)?;
    let cfg = args.bounds.kmm_config(args.kernel.spec()?);
    let weights = kmm_weights(&train, &test, &cfg)?;

    let mut wtr = csv::Writer::from_path(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    wtr.write_record(["beta"])?;
    for b in &weights.beta {
        wtr.write_record([format!("{b}")])?;
    }
    wtr.flush()?;

    let sidecar = args.out.with_extension("json");
    write_json(
        &sidecar,
        &serde_json::json!({
            "l_hat": weights.l_hat,
            "kkt_residual": weights.kkt_residual,
            "mean_beta": weights.mean_beta,
        }),
    )?;
    println!(
        "{} weights -> {} (mean {:.6}, discrepancy {:.6}); diagnostics -> {}",
        weights.beta.len(),
        args.out.display(),
        weights.mean_beta,
        weights.l_hat,
        sidecar.display()
    );
    Ok(())
}

fn cmd_estimate(args: EstimateArgs) -> Result<()> {
    let train = read_csv(&args.train, Role::Train)?;
    let test = read_csv(&args.test, Role::Test)?;
    let kernel = args.kernel.spec()?;
    let plan = SplitPlan::new(args.rho, train.n(), args.reuse_full)?;
    let cfg = args.bounds.kmm_config(kernel.clone());
    let g_hat = match args.lasso {
        Some(lambda) => GHatSpec::LassoLinear { lambda },
        None => GHatSpec::KernelRidge {
            kernel,
            gamma: args.gamma.schedule()?,
        },
    };
    let report = estimate_v_r_auto(&train, &test, &plan, &cfg, &g_hat)?;
    write_json(&args.out, &report)?;
    println!(
        "v_kmm {:.6}  v_nr {:.6}  v_r {:.6} -> {}",
        report.v_kmm,
        report.v_nr,
        report.v_r,
        args.out.display()
    );
    Ok(())
}

fn cmd_erm(args: ErmArgs) -> Result<()> {
    let train = read_csv(&args.train, Role::Train)?;
    let test = read_csv(&args.test, Role::Test)?;
    let kernel = args.kernel.spec()?;
    let plan = SplitPlan::new(args.rho, train.n(), args.reuse_full)?;
    let kmm_block = train.rows(plan.kmm_indices())?;
    let nr_block = train.rows(plan.nr_indices())?;
    let loss = match args.loss {
        LossArg::Squared => Loss::Squared,
        LossArg::Logistic => Loss::Logistic,
    };

    let fit: ErmFit = match args.mode {
        ErmModeArg::Kmm => {
            let cfg = args.bounds.kmm_config(kernel.clone());
            let weights = kmm_weights(&kmm_block, &test, &cfg)?;
            match loss {
                Loss::Squared => {
                    fit_kmm_weighted_ridge(&kmm_block, &weights, args.lambda, &kernel, test.n())?
                }
                Loss::Logistic => fit_kmm_weighted_logistic(
                    &kmm_block,
                    &weights,
                    args.lambda,
                    &kernel,
                    args.tol,
                )?,
            }
        }
        ErmModeArg::Robust | ErmModeArg::Unweighted => {
            let gamma = args.gamma.schedule()?.gamma(nr_block.n(), test.n())?;
            let g_hat = fit_kernel_ridge(&nr_block, gamma, &kernel)?;
            match args.mode {
                ErmModeArg::Robust => {
                    let cfg = args.bounds.kmm_config(kernel.clone());
                    let weights = kmm_weights(&kmm_block, &test, &cfg)?;
                    match loss {
                        Loss::Squared => fit_robust_least_squares(
                            &kmm_block,
                            &test,
                            &weights,
                            &g_hat,
                            args.lambda,
                            &kernel,
                        )?,
                        Loss::Logistic => fit_robust_logistic(
                            &kmm_block,
                            &test,
                            &weights,
                            &g_hat,
                            args.lambda,
                            &kernel,
                            args.tol,
                        )?,
                    }
                }
                _ => fit_unweighted_nr_erm(&test, &g_hat, args.lambda, &kernel, loss, args.tol)?,
            }
        }
    };

    write_json(&args.out, &fit)?;
    println!(
        "fit ({} span points, objective {:.6}, gradient {:.2e}) -> {}",
        fit.span_len(),
        fit.objective,
        fit.grad_norm,
        args.out.display()
    );

    if let Some(predict_path) = &args.predict {
        let decisions = fit.decision_values(test.x())?;
        let classes = fit.classify(test.x())?;
        let mut wtr = csv::Writer::from_path(predict_path)
            .with_context(|| format!("creating {}", predict_path.display()))?;
        wtr.write_record(["decision_value", "predicted_class"])?;
        for (d, c) in decisions.iter().zip(classes.iter()) {
            wtr.write_record([format!("{d}"), format!("{c}")])?;
        }
        wtr.flush()?;
        println!("predictions -> {}", predict_path.display());
    }

    if let Some(y) = test.y() {
        if y.iter().all(|v| *v == 0.0 || *v == 1.0) {
            let classes = fit.classify(test.x())?;
            let wrong = classes
                .iter()
                .zip(y.iter())
                .filter(|(c, y)| (*c - *y).abs() > 0.5)
                .count();
            println!("test error {:.4}", wrong as f64 / y.len() as f64);
        }
    }
    Ok(())
}

fn cmd_datagen(cmd: DatagenCommand) -> Result<()> {
    match cmd {
        DatagenCommand::Toy1d(args) => {
            let sample = gen_toy1d(args.n_tr, args.n_te, args.seed)?;
            write_dataset_csv(&args.train_out, &sample.train)?;
            write_dataset_csv(&args.test_out, &sample.test)?;
            println!(
                "toy1d seed {} -> {} ({} rows), {} ({} rows)",
                args.seed,
                args.train_out.display(),
                sample.train.n(),
                args.test_out.display(),
                sample.test.n()
            );
        }
        DatagenCommand::Gaussian10d(args) => {
            let mut params = Gaussian10dParams::default();
            if let Some(v) = args.mean_scale {
                params.mean_scale = v;
            }
            if let Some(v) = args.c1_scale {
                params.c1_scale = v;
            }
            if let Some(v) = args.c2_scale {
                params.c2_scale = v;
            }
            if let Some(v) = args.noise_sd {
                params.noise_sd = v;
            }
            if let Some(v) = args.oracle_draws {
                params.oracle_draws = v;
            }
            let inst = gen_gaussian10d(args.n_tr, args.n_te, &params, args.seed)?;
            write_dataset_csv(&args.train_out, &inst.train)?;
            write_dataset_csv(&args.test_out, &inst.test)?;
            if let Some(meta) = &args.meta_out {
                write_json(
                    meta,
                    &serde_json::json!({
                        "nu_oracle": inst.nu_oracle,
                        "c1": inst.c1,
                        "c2": inst.c2.to_vec(),
                        "g_sd": inst.g_sd,
                        "noise_sd": inst.noise_sd,
                    }),
                )?;
            }
            println!(
                "gaussian10d seed {} -> {} ({} rows), {} ({} rows); oracle mean {:.6}",
                args.seed,
                args.train_out.display(),
                inst.train.n(),
                args.test_out.display(),
                inst.test.n(),
                inst.nu_oracle
            );
        }
        DatagenCommand::UciBias(args) => {
            if !(args.fraction > 0.0 && args.fraction < 1.0) {
                bail!("--fraction must lie strictly between 0 and 1");
            }
            let (full, load) = load_uci_breast_cancer(&args.data)?;
            let pool_len = (args.fraction * full.n() as f64).floor() as usize;
            if pool_len == 0 || pool_len >= full.n() {
                bail!(
                    "--fraction {} leaves an empty split of {} rows",
                    args.fraction,
                    full.n()
                );
            }
            let mut master = ChaCha8Rng::seed_from_u64(args.seed);
            let split_seed: u64 = master.random();
            let bias_seed: u64 = master.random();
            let mut order: Vec<usize> = (0..full.n()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(split_seed));
            let pool = full.rows(&order[..pool_len])?;
            let rest = full.rows(&order[pool_len..])?;
            let biased = biased_subsample(&pool, args.sigma1, bias_seed)?;
            write_dataset_csv(&args.train_out, &biased)?;
            write_dataset_csv(&args.test_out, &rest)?;
            println!(
                "{} rows kept ({} dropped for missing fields); biased train {} rows -> {}; test {} rows -> {}",
                load.rows_kept,
                load.rows_dropped_missing,
                biased.n(),
                args.train_out.display(),
                rest.n(),
                args.test_out.display()
            );
        }
    }
    Ok(())
}

fn cmd_experiment(args: ExperimentArgs) -> Result<ExitCode> {
    let mut cfg = match &args.config {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let cfg: ExperimentConfig = serde_json::from_reader(BufReader::new(file))
                .with_context(|| format!("parsing {}", path.display()))?;
            if cfg.scenario() != args.scenario.name() {
                bail!(
                    "config {} describes scenario '{}', but '{}' was requested",
                    path.display(),
                    cfg.scenario(),
                    args.scenario.name()
                );
            }
            cfg
        }
        None => args.scenario.default_config(),
    };
    if let Some(seed) = args.seed {
        cfg.set_base_seed(seed);
    }

    let report = run_experiment(&cfg)?;
    write_json(&args.out, &report)?;
    if let Some(csv_path) = &args.csv {
        let file =
            File::create(csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
        write_records_csv(&report.records, BufWriter::new(file))?;
    }
    println!(
        "{}: {} records, {} summaries, {:.1}s -> {}",
        report.scenario,
        report.records.len(),
        report.summaries.len(),
        report.wall_clock_seconds,
        args.out.display()
    );
    for s in &report.summaries {
        match s.mse {
            Some(mse) => println!(
                "  {} {}: mean {:.4}, sd {:.4}, mse {:.4}",
                s.group, s.metric, s.mean, s.sd, mse
            ),
            None => println!("  {} {}: mean {:.4}, sd {:.4}", s.group, s.metric, s.mean, s.sd),
        }
    }

    if args.check {
        let violations = check_report(&report);
        if !violations.is_empty() {
            for v in &violations {
                eprintln!("check failed: {v}");
            }
            return Ok(ExitCode::from(2));
        }
        println!("all checks passed");
    }
    Ok(ExitCode::SUCCESS)
}
