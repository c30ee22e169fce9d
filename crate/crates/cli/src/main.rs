// SPDX-License-Identifier: Apache-2.0

//! `ffrnet`: parse, simulate, embed, train and predict from the shell.
//!
//! Exit codes: 0 success, 1 usage or configuration, 2 data error,
//! 3 numeric failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ffrnet::pipeline::{
    cmd_campaign, cmd_embed, cmd_gen, cmd_parse, cmd_pipeline, cmd_predict, cmd_train, PipelineConfig,
    PipelineError,
};

#[derive(Parser, Debug)]
#[command(name = "ffrnet", version, about = "SEU functional failure rate prediction")]
struct Cli {
    /// TOML or JSON pipeline configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Global seed; stage seeds derive from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Directory for all artifacts.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Override any configuration field, e.g. `--set embed.epochs=4`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Inputs {
    /// `.bench` netlist.
    #[arg(long)]
    netlist: Option<PathBuf>,
    /// Stimulus JSON; random when absent.
    #[arg(long)]
    stimulus: Option<PathBuf>,
    /// Cycles of the random stimulus.
    #[arg(long)]
    cycles: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the circuit graph (GML) and node features.
    Parse {
        netlist: PathBuf,
    },
    /// Exhaustive single-bit-flip campaign.
    Campaign(Inputs),
    /// Train the graph encoder and embed flip-flops.
    Embed(Inputs),
    /// Fit the regressor on campaign rates and embeddings.
    Train,
    /// Predict with the saved model and write the report.
    Predict,
    /// Every stage plus the timing table.
    Pipeline(Inputs),
    /// Write a random sequential circuit.
    Gen {
        #[arg(long)]
        ffs: usize,
        #[arg(long)]
        gates: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn config(cli: &Cli, inputs: Option<&Inputs>) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::default(),
    };
    for s in &cli.set {
        cfg.set(s)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        cfg.out_dir = dir.clone();
    }
    if let Some(i) = inputs {
        if let Some(p) = &i.netlist {
            cfg.netlist = Some(p.clone());
        }
        if let Some(p) = &i.stimulus {
            cfg.stimulus = Some(p.clone());
        }
        if let Some(c) = i.cycles {
            cfg.cycles = c;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(PipelineError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
    }
    match &cli.command {
        Command::Parse { netlist } => {
            let cfg = config(cli, None)?;
            let out = cmd_parse(netlist, &cfg.out_dir)?;
            println!(
                "parsed {} nodes, {} flip-flops into {}",
                out.graph.node_count(),
                out.netlist.flip_flops().len(),
                cfg.out_dir.display()
            );
        }
        Command::Campaign(i) => {
            let out = cmd_campaign(&config(cli, Some(i))?)?;
            println!(
                "campaign: {} flip-flops, {} cycles, total ffr {} ({:.3} s)",
                out.result.per_ff.len(),
                out.result.cycles,
                out.result.aggregate,
                out.seconds
            );
        }
        Command::Embed(i) => {
            let out = cmd_embed(&config(cli, Some(i))?)?;
            println!(
                "embedded {} nodes, final loss {:.6} ({:.3} s)",
                out.names.len(),
                out.embedder.loss_history.last().copied().unwrap_or(f64::NAN),
                out.seconds
            );
        }
        Command::Train => {
            let out = cmd_train(&config(cli, None)?)?;
            let h = &out.model.loss_history;
            println!(
                "trained on {} rows, train mse {:.6} -> {:.6}",
                out.dataset.train_rows().count(),
                h[0],
                h[h.len() - 1]
            );
        }
        Command::Predict => {
            let out = cmd_predict(&config(cli, None)?)?;
            report_line(&out.report);
        }
        Command::Pipeline(i) => {
            let out = cmd_pipeline(&config(cli, Some(i))?)?;
            report_line(&out.report);
            println!(
                "campaign {:.3} s, prediction flow {:.3} s, ratio {:.4}",
                out.timing.campaign,
                out.timing.prediction_flow(),
                out.timing.ratio()
            );
        }
        Command::Gen { ffs, gates, output } => {
            let cfg = config(cli, None)?;
            cmd_gen(*ffs, *gates, cfg.seed, output)?;
            println!("wrote {}", output.display());
        }
    }
    Ok(())
}

fn report_line(r: &ffrnet::metrics::PredictionReport) {
    let r2 = r.r2.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    println!("{} fold: mae {:.4}, r2 {r2}", r.fold.name(), r.mae);
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.render().to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("ffrnet: error: {} (see --help)", first.trim_start_matches("error: "));
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("ffrnet: error: {msg}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
