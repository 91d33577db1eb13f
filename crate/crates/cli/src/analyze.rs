use crate::{print_json, CmdResult, Ctx, Format};
use anyhow::Context;
use edge_entropy::graph::load_dir;
use edge_entropy::metrics::edge_entropy;
use std::path::PathBuf;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Graph directory (edges.txt, labels.txt, optional features.csv and manifest.json).
    pub graph: PathBuf,
}

/// Column order of `--format csv`; kept stable.
pub const CSV_HEADER: [&str; 8] = [
    "graph",
    "num_nodes",
    "num_classes",
    "num_edges",
    "edge_entropy",
    "intra_class_ratio",
    "clustering_coefficient",
    "per_class_entropy",
];

pub fn run(ctx: &Ctx, args: &Args) -> CmdResult {
    let g = load_dir(&args.graph).with_context(|| format!("loading graph from {}", args.graph.display()))?;
    ctx.info(format!("loaded {} nodes, {} edges", g.num_nodes(), g.num_edges()));
    let report = edge_entropy(&g);
    let graph = args.graph.display().to_string();
    match ctx.format {
        Format::Json => print_json(&serde_json::json!({
            "command": "analyze",
            "config": { "graph": graph, "format": ctx.format },
            "num_nodes": g.num_nodes(),
            "num_classes": g.num_classes(),
            "num_edges": g.num_edges(),
            "directed": g.directedness().is_directed(),
            "report": report,
        }))?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            w.write_record(CSV_HEADER)?;
            let per_class: Vec<String> = report.per_class.iter().map(|h| h.to_string()).collect();
            w.write_record([
                graph,
                g.num_nodes().to_string(),
                g.num_classes().to_string(),
                g.num_edges().to_string(),
                report.edge_entropy.to_string(),
                report.intra_class_ratio.map(|r| r.to_string()).unwrap_or_default(),
                report.clustering_coefficient.to_string(),
                per_class.join(";"),
            ])?;
            w.flush()?;
        }
        Format::Table => {
            println!("graph                   {graph}");
            println!("nodes / classes / edges {} / {} / {}", g.num_nodes(), g.num_classes(), g.num_edges());
            println!("edge entropy            {:.6}", report.edge_entropy);
            match report.intra_class_ratio {
                Some(r) => println!("intra-class ratio       {r:.6}"),
                None => println!("intra-class ratio       undefined (no edges)"),
            }
            println!("clustering coefficient  {:.6}", report.clustering_coefficient);
            for (c, (h, w)) in report.per_class.iter().zip(&report.class_weights).enumerate() {
                println!("  class {c:<3} H = {h:.6}  weight = {w:.4}");
            }
        }
    }
    Ok(())
}
