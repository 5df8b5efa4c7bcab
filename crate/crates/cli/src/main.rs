use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use shadowfx_cli::config::{config_help, parse_time_fe};
use shadowfx_cli::{
    cmd_build, cmd_quantile_bounds, cmd_regress, cmd_summary, cmd_synth, cmd_var, model_help, CliError, Group,
    ModelId, RunConfig,
};

#[derive(Parser)]
#[command(name = "shadowfx", version)]
#[command(about = "Shadow exchange rates, BTC premiums and regulatory-friction panel models")]
#[command(after_help = after_help())]
struct Cli {
    /// Config file (key = value)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides `out`)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Capital-control threshold for the constrained dummy
    #[arg(long, global = true)]
    delta: Option<f64>,

    /// Time effects: model, none, biweek or month
    #[arg(long = "time-fe", global = true)]
    time_fe: Option<String>,

    /// Seed for synthetic data
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse inputs and write daily prices, series, regulatory indices and the panel
    Build,
    /// Premium summary statistics from the panel
    Summary,
    /// Fixed-effects regression for one named model
    #[command(after_help = model_help())]
    Regress {
        /// Model id, e.g. micro-4 or cost-2
        #[arg(long)]
        model: ModelId,
    },
    /// Panel VAR of depreciation and premium for one constraint group
    Var {
        /// unconstrained or constrained
        #[arg(long)]
        group: Group,
        /// Number of lags
        #[arg(long, default_value_t = 1)]
        lags: usize,
    },
    /// Generate synthetic datasets, truth files and a build fixture
    Synth {
        /// DGP spec file (key = value); built-in defaults if omitted
        spec: Option<PathBuf>,
    },
    /// Recompute the weighted/median ratio band from the trade log
    QuantileBounds {
        #[arg(long, default_value_t = 0.01)]
        lower_q: f64,
        #[arg(long, default_value_t = 0.99)]
        upper_q: f64,
    },
}

fn after_help() -> String {
    format!(
        "{}\n{}\nExit codes: 0 success, 2 input or schema error, 3 model or identification error, 4 rejection threshold exceeded.",
        model_help(),
        config_help()
    )
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        // flags are relative to the working directory, not the config file
        cfg.out = std::env::current_dir().map_err(|e| CliError::io(".", e))?.join(out);
    }
    if cli.delta.is_some() {
        cfg.delta = cli.delta;
    }
    if let Some(t) = &cli.time_fe {
        cfg.time_fe = parse_time_fe(t)?;
    }
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = load_config(&cli)?;
    match cli.command {
        Command::Build => {
            let s = cmd_build(&cfg)?;
            println!(
                "{} trades -> {} daily prices ({} corrected), {} series points, {} panel rows in {}",
                s.n_trades,
                s.n_daily_prices,
                s.n_corrected,
                s.n_series_points,
                s.n_panel_rows,
                s.out_dir.display()
            );
        }
        Command::Summary => {
            let s = cmd_summary(&cfg)?;
            if let Some(p) = s.pooled {
                println!(
                    "n {} min {:.3} max {:.3} mean {:.3} median {:.3} nonnegative {:.1}%",
                    p.n, p.min, p.max, p.mean, p.median, p.share_nonnegative_pct
                );
            }
        }
        Command::Regress { model } => {
            let r = cmd_regress(&cfg, model)?;
            println!("{} ({} time effects), n = {}, units = {}", r.model, r.time_fe, r.n_obs, r.n_units);
            for c in &r.coefficients {
                println!("  {:<36} {:>12.6} ({:.6}) p = {:.4}", c.term, c.estimate, c.std_error, c.p_value);
            }
            if r.condition_warning {
                eprintln!("warning: design condition number {:.3e}", r.condition_number);
            }
        }
        Command::Var { group, lags } => {
            let r = cmd_var(&cfg, group, lags)?;
            println!("{} group, l = {}, n = {}, units = {}", r.group, r.lags, r.n_obs, r.n_units);
            for c in &r.coefficients {
                println!("  {:<10} {:<16} {:>10.6} ({:.6}) p = {:.4}", c.equation, c.term, c.estimate, c.std_error, c.p_value);
            }
            println!("  Hansen J = {:.4}, df = {}, p = {:.4}", r.hansen_j, r.hansen_df, r.hansen_p);
        }
        Command::Synth { spec } => {
            if spec.is_some() {
                // a positional spec is relative to the working directory
                cfg.synth_spec = spec.map(|p| std::env::current_dir().unwrap_or_default().join(p));
            }
            let s = cmd_synth(&cfg)?;
            println!("seed {}: {} files written, truth files: {}", s.seed, s.files.len(), s.truth_files.join(", "));
        }
        Command::QuantileBounds { lower_q, upper_q } => {
            let q = cmd_quantile_bounds(&cfg, lower_q, upper_q)?;
            println!("{} buckets: q{} = {:.4}, q{} = {:.4}", q.n_buckets, q.lower_q, q.lower, q.upper_q, q.upper);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
