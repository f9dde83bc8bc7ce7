use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use bayesvis_cli::{fit_cafe, random_baseline, read_table, simulate, write_model, write_table, FitOptions};
use bayesvis_core::analysis::calibration::calibration_report;
use bayesvis_core::analysis::interval::paired_differences;
use bayesvis_core::analysis::{
    bootstrap_effect_size, paired_central_interval, Agent, EffectScale, Factor, Measure, Pooling, ResponseTable,
};
use bayesvis_core::cafe::hmc::HmcConfig;
use bayesvis_core::task::Subset;
use bayesvis_study::{load_template, open_state, BlobStore, ServiceConfig, StudyStore};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bayesvis", version, about = "Evaluate visualisations of Bayesian models")]
struct Cli {
    /// Master seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct StoreArgs {
    #[arg(long, default_value = "bayesvis.sqlite")]
    database: PathBuf,
    #[arg(long, default_value = "blobs")]
    blob_dir: PathBuf,
}

#[derive(Args)]
struct ComparisonArgs {
    /// Response table written by `export` or `simulate-agents`.
    #[arg(long)]
    responses: PathBuf,
    #[arg(long)]
    factor: Factor,
    #[arg(long, default_value = "reward")]
    measure: Measure,
    #[arg(long, default_value = "comprehension")]
    subset: Subset,
}

#[derive(Subcommand)]
enum Command {
    /// Run the REST service.
    Serve {
        /// TOML config; BAYESVIS_* environment variables override it.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Validate a template against the blob directory, store it and print its id.
    RegisterStudy {
        template: PathBuf,
        #[command(flatten)]
        store: StoreArgs,
    },
    /// Simulate the synthetic cafe data, fit it with HMC and write the posterior
    /// predictive blob with its manifest.
    FitCafe {
        #[arg(long, default_value = "blobs")]
        blob_dir: PathBuf,
        #[arg(long, default_value = "cafe-posterior")]
        id: String,
        #[arg(long, default_value_t = 16)]
        cafes: usize,
        #[arg(long, default_value_t = 5)]
        visits: usize,
        #[arg(long, default_value_t = bayesvis_cli::DEFAULT_DATA_SEED)]
        data_seed: u64,
        #[arg(long, default_value_t = 20_000)]
        samples: usize,
        #[arg(long, default_value_t = 1_000)]
        warmup: usize,
        #[arg(long, default_value_t = 32)]
        leapfrog: usize,
    },
    /// Dump every scored response of a study as CSV.
    Export {
        #[arg(long)]
        study: String,
        #[command(flatten)]
        store: StoreArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare responses per task against the random agent.
    Calibrate {
        #[arg(long)]
        responses: PathBuf,
        #[arg(long)]
        template: PathBuf,
        #[arg(long, default_value = "blobs")]
        blob_dir: PathBuf,
        #[arg(long, default_value_t = 1000)]
        random_draws: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Print the full report as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Central interval of within-subject differences between factor levels.
    Compare {
        #[command(flatten)]
        args: ComparisonArgs,
        #[arg(long, default_value_t = 0.5)]
        level: f64,
        /// Average each participant's differences before taking quantiles.
        #[arg(long)]
        per_user_mean: bool,
    },
    /// Bootstrap effect size of a factor on a measure.
    EffectSize {
        #[command(flatten)]
        args: ComparisonArgs,
        #[arg(long, default_value_t = 1000)]
        n_boot: usize,
        /// Scale by sqrt((sd_a^2 + sd_b^2) / 2) instead of sqrt((sd_a + sd_b) / 2).
        #[arg(long)]
        pooled_variance: bool,
    },
    /// Play a template with simulated participants and write their responses as CSV.
    SimulateAgents {
        #[arg(long)]
        agent: Agent,
        #[arg(long)]
        template: PathBuf,
        #[arg(long, default_value = "blobs")]
        blob_dir: PathBuf,
        #[arg(long, default_value_t = 22)]
        participants: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn load_responses(path: &Path) -> Result<ResponseTable> {
    read_table(File::open(path).with_context(|| format!("opening {}", path.display()))?)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(io::stderr)
        .init();
    match cli.command {
        Command::Serve { config } => {
            let config = ServiceConfig::load(config.as_deref())?;
            let state = open_state(&config)?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(bayesvis_study::service::serve(state, config.bind))?;
        }
        Command::RegisterStudy { template, store } => {
            let blobs = BlobStore::open(&store.blob_dir)?;
            let template = load_template(&template, &blobs)?;
            let id = StudyStore::open(&store.database)?.register_study(&template)?;
            println!("{id}");
        }
        Command::FitCafe {
            blob_dir,
            id,
            cafes,
            visits,
            data_seed,
            samples,
            warmup,
            leapfrog,
        } => {
            let opts = FitOptions {
                n_cafes: cafes,
                n_visits: visits,
                data_seed,
                hmc: HmcConfig {
                    n_samples: samples,
                    warmup,
                    n_leapfrog: leapfrog,
                    seed: cli.seed,
                    ..HmcConfig::default()
                },
                predictive_seed: cli.seed.wrapping_add(1),
            };
            let (js, manifest) = fit_cafe(&opts)?;
            write_model(&BlobStore::open(&blob_dir)?, &id, &js, &manifest)?;
            println!("{}", serde_json::to_string_pretty(&manifest.posterior_means)?);
            eprintln!(
                "wrote {id}: {} rows x {} columns, acceptance {:.3}, {} divergences",
                js.rows(),
                js.columns(),
                manifest.acceptance_rate,
                manifest.divergences
            );
        }
        Command::Export { study, store, out } => {
            let table = StudyStore::open(&store.database)?.response_table(&study)?;
            write_table(&table, output(out.as_deref())?)?;
        }
        Command::Calibrate {
            responses,
            template,
            blob_dir,
            random_draws,
            alpha,
            json,
        } => {
            let blobs = BlobStore::open(&blob_dir)?;
            let template = load_template(&template, &blobs)?;
            let table = load_responses(&responses)?;
            let random = random_baseline(&template, &blobs, random_draws, cli.seed)?;
            let report = calibration_report(&table, &random, alpha)?;
            let mut out = io::stdout().lock();
            if json {
                serde_json::to_writer_pretty(&mut out, &report)?;
                writeln!(out)?;
            } else {
                writeln!(out, "query_id\tsubset\tn\tq1\tmedian\tq3\trandom_median\tU\tp\trejected\ttoo_easy")?;
                for r in &report {
                    writeln!(
                        out,
                        "{}\t{:?}\t{}\t{:.1}\t{:.1}\t{:.1}\t{:.1}\t{:.1}\t{:.3e}\t{}\t{}",
                        r.query_id,
                        r.subset,
                        r.overall.n,
                        r.overall.q1,
                        r.overall.median,
                        r.overall.q3,
                        r.random.median,
                        r.test.u,
                        r.test.p_value,
                        r.test.rejected,
                        r.too_easy
                    )?;
                }
            }
        }
        Command::Compare {
            args,
            level,
            per_user_mean,
        } => {
            let table = load_responses(&args.responses)?;
            let pooling = if per_user_mean {
                Pooling::PerUserMean
            } else {
                Pooling::StratifiedByTask
            };
            let i = paired_central_interval(&table, args.factor, args.measure, args.subset, level, pooling)?;
            println!(
                "{}",
                serde_json::json!({ "factor": args.factor, "measure": args.measure, "subset": args.subset,
                    "level": level, "lo": i.lo, "hi": i.hi, "pairs": i.n_pairs })
            );
        }
        Command::EffectSize {
            args,
            n_boot,
            pooled_variance,
        } => {
            let table = load_responses(&args.responses)?;
            let (treated, control): (Vec<_>, Vec<_>) = table
                .rows
                .iter()
                .filter(|r| r.subset == args.subset)
                .partition(|r| args.factor.treated(r.visualisation));
            let a: Vec<f64> = treated.iter().map(|r| args.measure.of(r)).collect();
            let b: Vec<f64> = control.iter().map(|r| args.measure.of(r)).collect();
            let scale = if pooled_variance {
                EffectScale::PooledVariance
            } else {
                EffectScale::SqrtMeanSd
            };
            let e = bootstrap_effect_size(&a, &b, n_boot, cli.seed, scale)?;
            let pairs = paired_differences(&table, args.factor, args.measure, args.subset, Pooling::default(), false).len();
            println!(
                "{}",
                serde_json::json!({ "factor": args.factor, "measure": args.measure, "subset": args.subset,
                    "effect": e.effect, "se": e.se, "n_treated": a.len(), "n_control": b.len(), "pairs": pairs })
            );
        }
        Command::SimulateAgents {
            agent,
            template,
            blob_dir,
            participants,
            out,
        } => {
            let blobs = BlobStore::open(&blob_dir)?;
            let template = load_template(&template, &blobs)?;
            let table = simulate(&template, &blobs, agent, participants, cli.seed)?;
            write_table(&table, output(out.as_deref())?)?;
        }
    }
    Ok(())
}
