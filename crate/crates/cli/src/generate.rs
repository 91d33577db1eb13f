use crate::{print_json, CmdResult, Ctx, Failure, Format};
use anyhow::{anyhow, bail, Context};
use edge_entropy::graph::save_graph;
use edge_entropy::synthgen::{self, equal_class_sizes, normalize_t, verify_realization, FeatureModel, GeneratorConfig, Preset};
use std::path::PathBuf;

pub const VERIFICATION_FILE: &str = "verification.json";

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Output directory.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Named configuration: dense_low, sparse_low, dense_high or sparse_high.
    #[arg(long)]
    pub preset: Option<String>,
    /// Total node count (presets default to 3000).
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Comma-separated class sizes; split equally over the classes when omitted.
    #[arg(long, value_delimiter = ',')]
    pub class_sizes: Option<Vec<usize>>,
    /// Connectivity probability rows as JSON, e.g. `[[0.9,0.1],[0.2,0.8]]`.
    #[arg(long, conflicts_with = "t")]
    pub p: Option<String>,
    /// Nonnegative count rows as JSON; normalized to probabilities.
    #[arg(long)]
    pub t: Option<String>,
    /// Global connection probability multiplier.
    #[arg(long)]
    pub sparsity: Option<f64>,
    #[arg(long)]
    pub feature_dim: Option<usize>,
    /// Add class-dependent signal of this strength to the features.
    #[arg(long)]
    pub signal: Option<f64>,
    /// Symmetrize sampled edges.
    #[arg(long)]
    pub undirected: bool,
    /// Exit 1 when the realized entropy misses the target by more than the tolerance.
    #[arg(long)]
    pub strict: bool,
    #[arg(long, default_value_t = 0.01)]
    pub tolerance: f64,
}

fn parse_rows(flag: &str, text: &str) -> anyhow::Result<Vec<Vec<f64>>> {
    serde_json::from_str(text).with_context(|| format!("--{flag} expects a JSON array of rows"))
}

pub fn build_config(args: &Args, seed: u64) -> anyhow::Result<GeneratorConfig> {
    let mut cfg = match (&args.preset, &args.p, &args.t) {
        (Some(name), None, None) => {
            let preset = Preset::parse(name)?;
            let n = match (&args.nodes, &args.class_sizes) {
                (Some(n), _) => *n,
                (None, Some(sizes)) => sizes.iter().sum(),
                (None, None) => 3000,
            };
            preset.config(n, seed)
        }
        (Some(_), _, _) => bail!("--preset cannot be combined with --p or --t"),
        (None, p, t) => {
            let rows = match (p, t) {
                (Some(p), _) => parse_rows("p", p)?,
                (None, Some(t)) => normalize_t(&parse_rows("t", t)?)?,
                (None, None) => bail!("one of --preset, --p or --t is required"),
            };
            let sizes = match (&args.class_sizes, args.nodes) {
                (Some(s), _) => s.clone(),
                (None, Some(n)) => equal_class_sizes(n, rows.len()),
                (None, None) => bail!("--nodes or --class-sizes is required with --p/--t"),
            };
            GeneratorConfig::new(sizes, rows, args.sparsity.unwrap_or(synthgen::DENSE_SPARSITY), seed)
        }
    };
    if let Some(sizes) = &args.class_sizes {
        if let Some(n) = args.nodes {
            let total: usize = sizes.iter().sum();
            if total != n {
                bail!("--nodes {n} conflicts with --class-sizes summing to {total}");
            }
        }
        if sizes.len() != cfg.num_classes() {
            bail!("{} class sizes given for {} classes", sizes.len(), cfg.num_classes());
        }
        cfg.num_nodes = sizes.iter().sum();
        cfg.class_sizes = sizes.clone();
    }
    if let Some(s) = args.sparsity {
        cfg.sparsity = s;
    }
    if let Some(f) = args.feature_dim {
        cfg.feature_dim = f;
    }
    if let Some(strength) = args.signal {
        cfg.features = FeatureModel::ClassSignal { strength };
    }
    cfg.undirected = args.undirected;
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(ctx: &Ctx, args: &Args) -> CmdResult {
    if ctx.format == Format::Csv {
        return Err(Failure::Usage(anyhow!("generate supports --format json or table")));
    }
    let cfg = build_config(args, ctx.seed())?;
    ctx.info(format!("sampling {} nodes, {} classes", cfg.num_nodes, cfg.num_classes()));
    let g = synthgen::generate(&cfg)?;
    let manifest = save_graph(&g, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    let report = verify_realization(&g, &cfg, args.tolerance)?;
    let path = args.out.join(VERIFICATION_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(&report)?).with_context(|| format!("writing {}", path.display()))?;

    match ctx.format {
        Format::Table => {
            println!("wrote {} ({} nodes, {} edges)", args.out.display(), g.num_nodes(), g.num_edges());
            println!("seed              {}", cfg.seed);
            println!("target entropy    {:.6}", report.target_entropy);
            println!("realized entropy  {:.6}", report.realized_entropy);
            if let Some(d) = report.max_deviation {
                println!("max |P - target|  {d:.6}");
            }
            println!("components        {}", report.weak_components);
        }
        _ => print_json(&serde_json::json!({
            "command": "generate",
            "config": cfg,
            "out": args.out.display().to_string(),
            "num_edges": g.num_edges(),
            "manifest": manifest,
            "verification": report,
        }))?,
    }
    if !report.invalid_rows.is_empty() {
        eprintln!("warning: classes {:?} have no outgoing edges", report.invalid_rows);
    }
    if args.strict && !report.within_tolerance {
        return Err(Failure::Check(format!(
            "realized entropy {:.6} differs from target {:.6} by more than {}",
            report.realized_entropy, report.target_entropy, args.tolerance
        )));
    }
    Ok(())
}
