use crate::{print_json, CmdResult, Ctx, Failure, Format};
use anyhow::{anyhow, Context};
use edge_entropy::experiment::ShiftMode;
use edge_entropy::gnn::{input_features, stratified_split, train_with_shift, DecayMode, NetConfig, ShiftKind};
use edge_entropy::graph::load_dir;
use edge_entropy::RngStream;
use std::path::PathBuf;

const SPLIT_STREAM: u64 = 1;
const INIT_STREAM: u64 = 2;

#[derive(clap::ValueEnum, Debug, Clone, Copy)]
pub enum DecayArg {
    L2,
    Schedule,
}

#[derive(clap::ValueEnum, Debug, Clone, Copy)]
pub enum KindArg {
    Normalized,
    Raw,
}

#[derive(clap::Args, Debug)]
pub struct Args {
    pub graph: PathBuf,
    /// Number of filter layers.
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
    /// Filter taps per layer (powers S^0 .. S^{d-1}).
    #[arg(long, short = 'd', default_value_t = 2)]
    pub degree: usize,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 5e-4)]
    pub decay: f64,
    /// `l2` penalizes weights; `schedule` decays the learning rate.
    #[arg(long, value_enum, default_value_t = DecayArg::L2)]
    pub decay_mode: DecayArg,
    /// given, identity, erdos_renyi or file:<graph dir>
    #[arg(long, default_value = "given")]
    pub shift: String,
    #[arg(long, value_enum, default_value_t = KindArg::Normalized)]
    pub shift_kind: KindArg,
    #[arg(long, default_value_t = 0.3)]
    pub train_fraction: f64,
}

pub fn run(ctx: &Ctx, args: &Args) -> CmdResult {
    if ctx.format == Format::Csv {
        return Err(Failure::Usage(anyhow!("train supports --format json or table")));
    }
    if args.layers == 0 {
        return Err(Failure::Usage(anyhow!("--layers must be at least 1")));
    }
    let seed = ctx.seed();
    let g = load_dir(&args.graph).with_context(|| format!("loading graph from {}", args.graph.display()))?;
    let x = input_features(&g);
    let config = NetConfig {
        hidden: vec![args.hidden; args.layers - 1],
        learning_rate: args.lr,
        decay: args.decay,
        decay_mode: match args.decay_mode {
            DecayArg::L2 => DecayMode::L2,
            DecayArg::Schedule => DecayMode::LrSchedule,
        },
        epochs: args.epochs,
        ..NetConfig::two_layer(x.ncols(), g.num_classes(), args.degree)
    };
    config.validate()?;
    let kind = match args.shift_kind {
        KindArg::Normalized => ShiftKind::Normalized,
        KindArg::Raw => ShiftKind::Raw,
    };
    let mode = ShiftMode::parse(&args.shift)?;
    let s = mode.operator(&g, kind, seed)?;

    let root = RngStream::new(seed, 0);
    let split = stratified_split(g.labels(), g.num_classes(), args.train_fraction, &mut root.derive(SPLIT_STREAM))?;
    ctx.info(format!("training on {} of {} nodes", split.train_count(), g.num_nodes()));
    let (_, outcome) = train_with_shift(&config, &s, &x, g.labels(), &split, &mut root.derive(INIT_STREAM))?;

    match ctx.format {
        Format::Table => {
            match outcome.accuracy {
                Some(a) => println!("test accuracy   {a:.4}"),
                None => println!("test accuracy   diverged"),
            }
            if let Some(a) = outcome.train_accuracy {
                println!("train accuracy  {a:.4}");
            }
            if let Some(l) = outcome.loss_curve.last() {
                println!("final loss      {l:.6}");
            }
            println!("seed            {seed}");
        }
        _ => print_json(&serde_json::json!({
            "command": "train",
            "config": {
                "graph": args.graph.display().to_string(),
                "shift": mode.label(),
                "shift_kind": kind,
                "train_fraction": args.train_fraction,
                "net": config,
            },
            "seed": seed,
            "accuracy": outcome.accuracy,
            "train_accuracy": outcome.train_accuracy,
            "diverged": outcome.diverged,
            "loss_curve": outcome.loss_curve,
        }))?,
    }
    Ok(())
}
