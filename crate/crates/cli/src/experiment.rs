use crate::{print_json, CmdResult, Ctx, Failure, Format};
use anyhow::{anyhow, Context};
use edge_entropy::experiment::{entropy_improvement_table, run_experiment, sweep_curves, ExperimentResult, ImprovementTable, SuitePlan};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const RESULTS_FILE: &str = "results.json";
pub const CURVES_FILE: &str = "curves.csv";
pub const TABLE_FILE: &str = "table.csv";

#[derive(clap::Args, Debug)]
pub struct Args {
    /// JSON plan file.
    pub plan: PathBuf,
    /// Output directory for results.json, curves.csv and table.csv.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Override the number of trials per cell.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Print the work the plan would do and exit.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(clap::Args, Debug)]
pub struct ReportArgs {
    /// A results.json written by `experiment`.
    pub results: PathBuf,
    /// Training fraction to tabulate; the plan's table fraction by default.
    #[arg(long)]
    pub fraction: Option<f64>,
}

/// Contents of results.json.
#[derive(Debug, Serialize, Deserialize)]
pub struct Bundle {
    pub plan: SuitePlan,
    pub results: Vec<ExperimentResult>,
    pub table: Option<ImprovementTable>,
}

fn effective_plan(ctx: &Ctx, args: &Args) -> anyhow::Result<SuitePlan> {
    let mut suite = SuitePlan::from_file(&args.plan)?;
    if let Some(seed) = ctx.seed {
        suite.base_seed = seed;
    }
    if let Some(t) = args.trials {
        suite.trials = t;
    }
    for plan in suite.plans() {
        plan.validate()?;
    }
    if suite.datasets.is_empty() {
        anyhow::bail!("{} lists no datasets", args.plan.display());
    }
    Ok(suite)
}

pub fn run(ctx: &Ctx, args: &Args) -> CmdResult {
    let suite = effective_plan(ctx, args)?;
    let plans = suite.plans();
    let runs: usize = plans.iter().map(|p| p.total_runs()).sum();
    let cells: usize = plans.iter().map(|p| p.fractions.len() * p.modes.len()).sum();

    if args.dry_run {
        let epochs = runs * suite.model.epochs;
        return match ctx.format {
            Format::Table => {
                println!("datasets        {}", plans.len());
                println!("cells           {cells}");
                println!("training runs   {runs}");
                println!("epochs total    {epochs}");
                println!("base seed       {}", suite.base_seed);
                Ok(())
            }
            _ => print_json(&serde_json::json!({
                "command": "experiment",
                "dry_run": true,
                "plan": suite,
                "datasets": plans.len(),
                "cells": cells,
                "training_runs": runs,
                "total_epochs": epochs,
            })),
        };
    }

    let out = args.out.clone().ok_or_else(|| anyhow!("--out is required unless --dry-run is given"))?;
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut results = Vec::with_capacity(plans.len());
    for plan in &plans {
        ctx.info(format!("{}: {} training runs", plan.name, plan.total_runs()));
        let r = run_experiment(plan).with_context(|| format!("dataset {}", plan.name))?;
        ctx.info(format!("{}: edge entropy {:.4}", plan.name, r.entropy.edge_entropy));
        results.push(r);
    }
    let fraction = suite.table_fraction();
    let table = if results.len() >= 2 {
        Some(entropy_improvement_table(&results, fraction)?)
    } else {
        eprintln!("note: one dataset only, no comparison table written");
        None
    };
    let bundle = Bundle { plan: suite, results, table };
    write_bundle(&out, &bundle)?;

    match ctx.format {
        Format::Csv => print_table_csv(bundle.table.as_ref(), std::io::stdout())?,
        Format::Table => print_table_text(&bundle),
        Format::Json => print_json(&serde_json::json!({
            "command": "experiment",
            "plan": bundle.plan,
            "out": out.display().to_string(),
            "table": bundle.table,
            "improvements": bundle.results.iter().map(|r| serde_json::json!({
                "dataset": r.name(),
                "edge_entropy": r.entropy.edge_entropy,
                "improvement": r.improvement_at(fraction),
            })).collect::<Vec<_>>(),
        }))?,
    }

    let empty: Vec<String> = bundle
        .results
        .iter()
        .flat_map(|r| r.empty_cells().into_iter().map(move |c| format!("{} fraction {} mode {}", r.name(), c.fraction, c.mode)))
        .collect();
    if !empty.is_empty() {
        return Err(Failure::Check(format!("cells without a valid trial: {}", empty.join(", "))));
    }
    Ok(())
}

pub fn write_bundle(out: &Path, bundle: &Bundle) -> anyhow::Result<()> {
    let path = out.join(RESULTS_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(bundle)?).with_context(|| format!("writing {}", path.display()))?;

    let path = out.join(CURVES_FILE);
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    for r in &bundle.results {
        for row in sweep_curves(r) {
            w.serialize(row)?;
        }
    }
    w.flush()?;

    let path = out.join(TABLE_FILE);
    if let Some(table) = &bundle.table {
        let file = std::fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
        print_table_csv(Some(table), file)?;
    } else if path.exists() {
        std::fs::remove_file(&path)?;
    }
    Ok(())
}

/// Table rows followed by a `# spearman_rho=` comment line.
fn print_table_csv(table: Option<&ImprovementTable>, sink: impl std::io::Write) -> anyhow::Result<()> {
    let Some(table) = table else {
        return Ok(());
    };
    let mut w = csv::Writer::from_writer(sink);
    for row in &table.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    let mut sink = w.into_inner().map_err(|e| anyhow!("{e}"))?;
    match table.spearman {
        Some(rho) => writeln!(sink, "# spearman_rho={rho}")?,
        None => writeln!(sink, "# spearman_rho=undefined")?,
    }
    Ok(())
}

fn print_table_text(bundle: &Bundle) {
    let fraction = bundle.plan.table_fraction();
    println!("{:<16} {:>9} {:>9} {:>11} {:>12}", "dataset", "entropy", "intra", "clustering", "improvement");
    let fmt = |v: Option<f64>| v.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into());
    let rows: Vec<_> = match &bundle.table {
        Some(t) => t
            .rows
            .iter()
            .map(|r| (r.dataset.clone(), r.edge_entropy, r.intra_class_ratio, r.clustering_coefficient, r.improvement))
            .collect(),
        None => bundle
            .results
            .iter()
            .map(|r| {
                let e = &r.entropy;
                (r.name().to_string(), e.edge_entropy, e.intra_class_ratio, e.clustering_coefficient, r.improvement_at(fraction))
            })
            .collect(),
    };
    for (name, h, intra, cc, imp) in rows {
        println!("{name:<16} {h:>9.4} {:>9} {cc:>11.4} {:>12}", fmt(intra), fmt(imp));
    }
    if let Some(t) = &bundle.table {
        println!("training fraction {}, spearman rho {}", t.fraction, fmt(t.spearman));
    }
}

pub fn report(ctx: &Ctx, args: &ReportArgs) -> CmdResult {
    let text = std::fs::read_to_string(&args.results).with_context(|| format!("reading {}", args.results.display()))?;
    let mut bundle: Bundle = serde_json::from_str(&text).with_context(|| format!("parsing {}", args.results.display()))?;
    let fraction = args.fraction.unwrap_or_else(|| bundle.plan.table_fraction());
    bundle.plan.table_fraction = Some(fraction);
    bundle.table = if bundle.results.len() >= 2 {
        Some(entropy_improvement_table(&bundle.results, fraction)?)
    } else {
        None
    };
    match ctx.format {
        Format::Csv => print_table_csv(bundle.table.as_ref(), std::io::stdout())?,
        Format::Table => print_table_text(&bundle),
        Format::Json => print_json(&serde_json::json!({
            "command": "report",
            "config": { "results": args.results.display().to_string(), "fraction": fraction },
            "table": bundle.table,
        }))?,
    }
    if bundle.table.is_none() {
        return Err(Failure::Usage(anyhow!("a comparison table needs at least two datasets")));
    }
    Ok(())
}
