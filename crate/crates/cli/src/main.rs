use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cascadevae::assignment::{format_assignment, parse_instance, solve_mcf};
use cascadevae::config::TrainConfig;
use cascadevae::data::{generate_dataset, load_dataset, save_dataset, FactorSpec};
use cascadevae::metrics::{evaluate, verify_identities, vote_csv};
use cascadevae::neural::random_gradient_check;
use cascadevae::trainer::{load_checkpoint, save_checkpoint, TraceWriter, Trainer};
use cascadevae::traverse::write_traversals;
use cascadevae::Prng;

const IDENTITY_TOLERANCE: f64 = 1e-9;
const BOUND_TOLERANCE: f64 = 1e-12;
const GRADIENT_TOLERANCE: f64 = 1e-4;

#[derive(Parser)]
#[command(name = "cascadevae", version, about = "Disentangling VAE with an information cascade and exact discrete inference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render the synthetic sprite dataset.
    GenData {
        #[arg(long)]
        out: PathBuf,
        /// Image side length in pixels.
        #[arg(long, default_value_t = 16)]
        width: usize,
        /// Number of scale values.
        #[arg(long, default_value_t = 3)]
        scales: usize,
        /// Number of positions per axis.
        #[arg(long, default_value_t = 8)]
        positions: usize,
    },
    /// Train from scratch, or continue from a checkpoint with --resume.
    Train(TrainArgs),
    /// Compute the metrics report of a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Report path; the vote matrix goes next to it as `<stem>.votes.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Samples per vote.
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 800)]
        votes: usize,
        /// Batch size of the MI estimator.
        #[arg(long, default_value_t = 64)]
        mi_batch: usize,
    },
    /// Write latent traversal grids as PGM files.
    Traverse {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Sweep range as `lo,hi`.
        #[arg(long, default_value = "-1.5,1.5", value_parser = parse_range, allow_hyphen_values = true)]
        range: (f64, f64),
        /// Image width; defaults to the side of a square image.
        #[arg(long)]
        width: Option<usize>,
    },
    /// Solve an assignment instance read from a text file.
    AssignSolve { input: PathBuf },
    /// Run the identity suite and the gradient check.
    Check {
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Random networks for the gradient check.
        #[arg(long, default_value_t = 20)]
        networks: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Flat `key=value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Checkpoint written at the end of the run.
    #[arg(long)]
    out: PathBuf,
    /// Trace CSV; defaults to the checkpoint path with a `.csv` extension.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Continue from this checkpoint and append to the trace.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iters: Option<u64>,
    #[arg(long)]
    beta_h: Option<f64>,
    #[arg(long)]
    beta_l: Option<f64>,
    #[arg(long)]
    r: Option<u64>,
    #[arg(long)]
    t_d: Option<u64>,
    #[arg(long)]
    lambda_prime: Option<f64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    s_card: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
}

impl Overrides {
    fn apply(&self, cfg: &mut TrainConfig) {
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = self.$flag { cfg.$field = v; })*
            };
        }
        set!(seed => seed, iters => max_iter, beta_h => beta_h, beta_l => beta_l, r => r, t_d => t_d,
             lambda_prime => lambda_prime, m => m, s_card => s_card, batch => batch_size, lr => learning_rate);
    }

    /// Flags other than `--iters`, which would change an interrupted run.
    fn changes_run(&self) -> bool {
        let Overrides { seed, iters: _, beta_h, beta_l, r, t_d, lambda_prime, m, s_card, batch, lr } = self;
        seed.is_some()
            || beta_h.is_some()
            || beta_l.is_some()
            || r.is_some()
            || t_d.is_some()
            || lambda_prime.is_some()
            || m.is_some()
            || s_card.is_some()
            || batch.is_some()
            || lr.is_some()
    }
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected lo,hi")?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad number {lo:?}"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad number {hi:?}"))?;
    if !(lo < hi) {
        return Err("range needs lo < hi".into());
    }
    Ok((lo, hi))
}

fn banner(config: &TrainConfig) {
    println!("# resolved configuration");
    print!("{config}");
}

fn train(args: TrainArgs) -> Result<()> {
    let dataset = load_dataset(&args.data)?;
    let trace_path = args.trace.clone().unwrap_or_else(|| args.out.with_extension("csv"));

    let (mut trainer, mut trace) = if let Some(resume) = &args.resume {
        if args.config.is_some() || args.overrides.changes_run() {
            bail!("--resume takes its configuration from the checkpoint; only --iters may be given");
        }
        let (state, mut config) = load_checkpoint(resume)?;
        if let Some(iters) = args.overrides.iters {
            config.max_iter = iters;
        }
        banner(&config);
        println!("# resuming from iteration {}", state.iter);
        (Trainer::resume(config, state, &dataset)?, TraceWriter::append(&trace_path)?)
    } else {
        let mut config = TrainConfig::default();
        if let Some(path) = &args.config {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            config.apply_text(&text).with_context(|| format!("in {}", path.display()))?;
        }
        args.overrides.apply(&mut config);
        config.validate()?;
        banner(&config);
        (Trainer::new(config, &dataset)?, TraceWriter::create(&trace_path)?)
    };
    let until = trainer.config.max_iter;
    trainer.run_traced(until, &mut trace)?;
    trace.finish()?;
    save_checkpoint(&trainer.state, &trainer.config, &args.out)?;
    println!("checkpoint={}", args.out.display());
    println!("trace={}", trace_path.display());
    Ok(())
}

fn votes_path(report: &Path) -> PathBuf {
    let stem = report.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    report.with_file_name(format!("{stem}.votes.csv"))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData { out, width, scales, positions } => {
            let spec = FactorSpec {
                width,
                scales: FactorSpec::grid(scales, 0.3, 0.7),
                pos_x: FactorSpec::grid(positions, 0.3, 0.7),
                pos_y: FactorSpec::grid(positions, 0.3, 0.7),
            };
            let ds = generate_dataset(&spec)?;
            save_dataset(&ds, &out)?;
            println!("count={}", ds.len());
            println!("out={}", out.display());
        }
        Command::Train(args) => train(args)?,
        Command::Eval { checkpoint, data, out, seed, samples, votes, mi_batch } => {
            let (state, config) = load_checkpoint(&checkpoint)?;
            let dataset = load_dataset(&data)?;
            state.check_compatible(&config, dataset.pixels_per_image())?;
            let report = evaluate(&state.params, &dataset, samples, votes, mi_batch, &Prng::new(seed))?;
            let text = report.to_text();
            print!("{text}");
            if let Some(out) = out {
                std::fs::write(&out, &text).with_context(|| format!("writing {}", out.display()))?;
                let names: Vec<String> = dataset.factors().iter().map(|f| f.name.clone()).collect();
                let csv_path = votes_path(&out);
                std::fs::write(&csv_path, vote_csv(&report.disentanglement, &names))
                    .with_context(|| format!("writing {}", csv_path.display()))?;
            }
        }
        Command::Traverse { checkpoint, out, range, width } => {
            let (state, _) = load_checkpoint(&checkpoint)?;
            let dim = state.params.image_dim();
            let width = match width {
                Some(w) => w,
                None => {
                    let side = (dim as f64).sqrt().round() as usize;
                    if side * side != dim {
                        bail!("images have {dim} pixels, which is not a square; pass --width");
                    }
                    side
                }
            };
            for path in write_traversals(&state.params, &out, range, width)? {
                println!("{}", path.display());
            }
        }
        Command::AssignSolve { input } => {
            let text = std::fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let instance = parse_instance(&text).with_context(|| format!("in {}", input.display()))?;
            print!("{}", format_assignment(&solve_mcf(&instance)?));
        }
        Command::Check { trials, networks, seed } => {
            if trials == 0 {
                bail!("--trials must be at least 1");
            }
            let root = Prng::new(seed);
            let ids = verify_identities(&mut root.derive("identities"), trials)?;
            println!("trials={}", ids.trials);
            println!("chain_step_residual={:e}", ids.chain_step);
            println!("partition_residual={:e}", ids.partition);
            println!("telescoping_residual={:e}", ids.telescoping);
            println!("kl_decomposition_residual={:e}", ids.kl_decomposition);
            println!("max_identity_residual={:e}", ids.max_residual());
            println!("collision_bound_violation={:e}", ids.collision_bound_violation);
            let grad = random_gradient_check(&mut root.derive("gradients"), networks)?;
            println!("gradient_networks={networks}");
            println!("gradient_max_relative_error={grad:e}");
            if ids.max_residual() >= IDENTITY_TOLERANCE
                || ids.collision_bound_violation > BOUND_TOLERANCE
                || !(grad < GRADIENT_TOLERANCE)
            {
                bail!("check failed: a residual exceeds its tolerance");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
