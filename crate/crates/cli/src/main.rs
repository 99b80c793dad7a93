use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use sddpg_core::bench::bench_artifacts;
use sddpg_core::eval::{evaluate, record_states, EvalProtocol, EvalReport};
use sddpg_core::model_io::{Model, ModelFile};
use sddpg_core::quantize::{dnn_snn_convert, quantize_san, ConvertConfig, W_MAX_INT};
use sddpg_core::sim::resolve_world;
use sddpg_core::train::trainer::TRAIN_LOG_FILE;
use sddpg_core::train::{Actor, ActorKind, Preset, TrainConfig, Trainer};
use sddpg_core::{Error, Result};

/// Spiking actor / deep critic navigation: train, evaluate, quantize, compare.
#[derive(Parser)]
#[command(name = "sddpg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the full configuration of a preset as TOML.
    ShowConfig {
        #[arg(long, default_value = "desk")]
        preset: Preset,
    },
    /// Train one model per seed into <out-dir>/seed-<n>.
    Train(TrainArgs),
    /// Evaluate a model on a seeded start/goal list.
    Eval(EvalArgs),
    /// Rescale a spiking actor to 8-bit integer weights.
    Quantize {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = W_MAX_INT)]
        w_max: i32,
    },
    /// Convert a dense actor into a spiking actor.
    Convert(ConvertArgs),
    /// Compare evaluation reports: CSV table and SVG plots.
    Bench {
        /// Evaluation reports produced by `eval`.
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value = "desk")]
    preset: Preset,
    /// TOML file replacing the preset entirely.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    actor: Option<ActorKind>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seed: Vec<u64>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Continue from a stage checkpoint instead of starting fresh. World
    /// paths inside it resolve against the working directory.
    #[arg(long, conflicts_with_all = ["config", "actor"])]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// `bundled:<name>` or a world TOML file.
    #[arg(long, default_value = "bundled:desk-test")]
    world: String,
    #[arg(long, default_value_t = 50)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the encoder timestep count of a spiking model.
    #[arg(long)]
    timesteps: Option<usize>,
    /// Label in the report; defaults to the model's method.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value = "bundled:desk-test")]
    world: String,
    /// Calibration states recorded from the dense actor.
    #[arg(long, default_value_t = 1000)]
    states: usize,
    #[arg(long, default_value_t = 5)]
    timesteps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn load_config(args: &TrainArgs) -> Result<TrainConfig> {
    let mut cfg = match &args.config {
        Some(path) => TrainConfig::load(path)?,
        None => TrainConfig::preset(args.preset),
    };
    if let Some(kind) = args.actor {
        cfg.actor = kind;
    }
    Ok(cfg)
}

fn train(args: &TrainArgs) -> Result<()> {
    if let Some(ck) = &args.resume {
        let mut trainer = Trainer::load_checkpoint(ck, None)?;
        std::fs::create_dir_all(&args.out_dir)?;
        trainer.run(Some(&args.out_dir))?;
        report_training(&trainer, &args.out_dir);
        return Ok(());
    }
    let cfg = load_config(args)?;
    let base = args.config.as_deref().and_then(Path::parent);
    for &seed in &args.seed {
        let dir = args.out_dir.join(format!("seed-{seed}"));
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join("config.toml"), cfg.to_toml())?;
        let mut trainer = Trainer::new(cfg.clone(), seed, base)?;
        trainer.run(Some(&dir))?;
        report_training(&trainer, &dir);
    }
    Ok(())
}

fn report_training(trainer: &Trainer, dir: &Path) {
    let log = trainer.log();
    let goals = log.iter().filter(|r| r.outcome.as_str() == "goal").count();
    println!(
        "seed {}: {} episodes, {} steps, {} updates, {} goals; wrote {}",
        trainer.seed(),
        log.len(),
        trainer.total_steps(),
        trainer.updates(),
        goals,
        dir.join(TRAIN_LOG_FILE).display()
    );
}

fn eval(args: &EvalArgs) -> Result<()> {
    let mut file = ModelFile::load(&args.model)?;
    if let Some(t) = args.timesteps {
        match &mut file.model {
            Model::Actor(Actor::Spiking { lif, .. }) => lif.timesteps = t,
            Model::Quantized(q) => q.lif.timesteps = t,
            _ => return Err(Error::Config("--timesteps applies to spiking models only".into())),
        }
    }
    let world = resolve_world(&args.world, None)?;
    let protocol = EvalProtocol::generate(&world, args.episodes, args.seed)?;
    let method = args.method.clone().unwrap_or_else(|| file.method.clone());
    let report = evaluate(&method, file.policy()?, &world, &protocol, &file.meta.kinematics, &file.meta.rollout())?;
    std::fs::write(&args.out, report.to_json()?)?;
    let r = report.rates();
    println!(
        "{method}: success {:.3} collision {:.3} timeout {:.3} over {} episodes (pairs {})",
        r.success,
        r.collision,
        r.timeout,
        report.episodes.len(),
        &report.pairs_hash[..12]
    );
    Ok(())
}

fn quantize(model: &Path, out: &Path, w_max: i32) -> Result<()> {
    let file = ModelFile::load(model)?;
    let Model::Actor(Actor::Spiking { params, lif }) = &file.model else {
        return Err(Error::InvalidInput(format!("{} does not hold a spiking actor", model.display())));
    };
    let q = quantize_san(params, lif, w_max)?;
    for (k, l) in q.layers.iter().enumerate() {
        println!("layer {k}: ratio {:.3}, threshold {}", l.ratio, l.v_th);
    }
    ModelFile::new(format!("{}-int8", file.method), file.meta, Model::Quantized(q)).save(out)
}

fn convert(args: &ConvertArgs) -> Result<()> {
    let file = ModelFile::load(&args.model)?;
    let Model::Actor(actor @ Actor::Deep { params, .. }) = &file.model else {
        return Err(Error::InvalidInput(format!("{} does not hold a dense actor", args.model.display())));
    };
    let world = resolve_world(&args.world, None)?;
    let states = record_states(actor, &world, &file.meta.kinematics, &file.meta.rollout(), args.states, args.seed)?;
    let mut lif = TrainConfig::paper().lif;
    lif.timesteps = args.timesteps;
    let cfg = ConvertConfig { seed: args.seed, ..ConvertConfig::default() };
    let c = dnn_snn_convert(params, &lif, &states, &cfg)?;
    println!("factors {:?}, mean action error {:.4}", c.factors, c.error);
    let converted = Actor::Spiking { params: c.params, lif };
    ModelFile::new(format!("{}-converted", file.method), file.meta, Model::Actor(converted)).save(&args.out)
}

fn bench(reports: &[PathBuf], out_dir: &Path) -> Result<()> {
    let reports = reports
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::InvalidInput(format!("cannot read report {}: {e}", p.display())))?;
            EvalReport::from_json(&text)
        })
        .collect::<Result<Vec<_>>>()?;
    let files = bench_artifacts(&reports)?;
    std::fs::create_dir_all(out_dir)?;
    for (name, body) in &files {
        std::fs::write(out_dir.join(name), body)?;
    }
    print!("{}", files[0].1);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::ShowConfig { preset } => {
            print!("{}", TrainConfig::preset(preset).to_toml());
            Ok(())
        }
        Command::Train(args) => train(&args),
        Command::Eval(args) => eval(&args),
        Command::Quantize { model, out, w_max } => quantize(&model, &out, w_max),
        Command::Convert(args) => convert(&args),
        Command::Bench { reports, out_dir } => bench(&reports, &out_dir),
    }
}

/// 2: bad configuration or input files, 3: protocol violation, 1: anything else.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidInput(_) | Error::Format(_) => 2,
        Error::Protocol(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
