use clap::{Parser, Subcommand, ValueEnum};
use dbpi::commands;
use dbpi::config::{RunConfig, ScoreMode};
use dbpi::io;
use dbpi::model::ModelContainer;
use dbpi::report::emit_report;
use dbpi::{CliError, Result};
use dbpi_core::adminframe::CriteriaParams;
use dbpi_core::popframe::SimulationConfig;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "dbpi", version, about = "Design-based predictive inference for sample surveys")]
struct Cli {
    /// Master seed; every sub-seed is derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel runners.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Run configuration (JSON, or TOML by extension). Flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Categorical,
    Continuous,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte-Carlo study of the prediction and subsampling RB estimators.
    SimulateSrb {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Selective-editing scores for a batch of records.
    EditScore {
        #[arg(long)]
        historic: Option<PathBuf>,
        #[arg(long)]
        batch: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long)]
        revision_fraction: Option<f64>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Early totals from a partially collected panel.
    EarlyEstimate {
        #[arg(long)]
        panel: Option<PathBuf>,
        /// Reference period, YYYY-MM.
        #[arg(long)]
        period: Option<String>,
        /// Collection day.
        #[arg(long)]
        tau: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Save the selected model.
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
    /// Survey or model reporting for each administrative unit.
    AdminSelect {
        #[arg(long)]
        panel: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write survey/administrative quantile tables here.
        #[arg(long)]
        diagnostics: Option<PathBuf>,
    },
    /// Weekly and monthly estimates from a quarterly rotating sample.
    TimeDisaggregate {
        #[arg(long)]
        panel: Option<PathBuf>,
        #[arg(long)]
        margins: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quarter: Option<u32>,
    },
    /// Pretrained prediction estimator against Horvitz-Thompson per variable.
    RelativeEfficiency {
        #[arg(long)]
        previous: Option<PathBuf>,
        #[arg(long)]
        current: Option<PathBuf>,
        #[arg(long)]
        population: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::SimulateSrb { .. } => "simulate-srb",
            Command::EditScore { .. } => "edit-score",
            Command::EarlyEstimate { .. } => "early-estimate",
            Command::AdminSelect { .. } => "admin-select",
            Command::TimeDisaggregate { .. } => "time-disaggregate",
            Command::RelativeEfficiency { .. } => "relative-efficiency",
        }
    }
}

fn need(value: Option<PathBuf>, fallback: &Option<PathBuf>, flag: &str) -> Result<PathBuf> {
    value.or_else(|| fallback.clone()).ok_or_else(|| CliError::Config(format!("missing --{flag}")))
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.check_subcommand(cli.command.name())?;
    let seed = cli.seed.or(cfg.seed);
    if let Some(n) = cli.threads.or(cfg.threads) {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Config(e.to_string()))?;
    }
    let predictors = commands::seeded(cfg.predictors.clone(), seed);
    let inputs = &cfg.inputs;
    match cli.command {
        Command::SimulateSrb { out } => {
            let out = need(out, &cfg.out, "out")?;
            let mut sim = cfg.simulation.clone().unwrap_or_else(|| SimulationConfig::linear_example(0));
            if let Some(s) = seed {
                sim.seed = s;
            }
            emit_report(&commands::simulate_srb(&sim)?, &out)
        }
        Command::EditScore { historic, batch, out, mode, revision_fraction, threshold } => {
            let historic = io::read_editing_records(&need(historic, &inputs.historic, "historic")?)?;
            let batch = io::read_editing_records(&need(batch, &inputs.batch, "batch")?)?;
            let out = need(out, &cfg.out, "out")?;
            let mut ecfg = cfg.editing.clone();
            if let Some(m) = mode {
                ecfg.mode = match m {
                    Mode::Categorical => ScoreMode::Categorical,
                    Mode::Continuous => ScoreMode::Continuous,
                };
            }
            if revision_fraction.is_some() || threshold.is_some() {
                ecfg.revision_fraction = revision_fraction;
                ecfg.threshold = threshold;
            }
            emit_report(&commands::edit_score(&historic, &batch, &ecfg, &predictors)?, &out)
        }
        Command::EarlyEstimate { panel, period, tau, out, model_out } => {
            let records = io::read_panel(&need(panel, &inputs.panel, "panel")?)?;
            let period =
                period.or(cfg.early.period.clone()).ok_or_else(|| CliError::Config("missing --period".into()))?;
            let period = io::parse_period(&period).map_err(CliError::Config)?;
            let tau = tau.or(cfg.early.tau).ok_or_else(|| CliError::Config("missing --tau".into()))?;
            let out = need(out, &cfg.out, "out")?;
            let (report, predictor) = commands::early_estimate(records, period, tau, &predictors)?;
            emit_report(&report, &out)?;
            if let Some(p) = model_out.or(cfg.early.model_out.clone()) {
                ModelContainer::new(&predictor).save(&p)?;
            }
            Ok(())
        }
        Command::AdminSelect { panel, out, diagnostics } => {
            let units = io::read_admin_units(&need(panel, &inputs.panel, "panel")?)?;
            let out = need(out, &cfg.out, "out")?;
            let params = cfg.admin.criteria.clone().unwrap_or_else(CriteriaParams::default);
            emit_report(&commands::admin_select(&units, &params, &predictors)?, &out)?;
            if let Some(d) = diagnostics.or(cfg.admin.diagnostics.clone()) {
                emit_report(&commands::admin_diagnostics(&units, cfg.admin.quantile_points.unwrap_or(99))?, &d)?;
            }
            Ok(())
        }
        Command::TimeDisaggregate { panel, margins, out, quarter } => {
            let records = io::read_rotating(&need(panel, &inputs.panel, "panel")?)?;
            let margins = match margins.or(inputs.margins.clone()) {
                Some(p) => Some(io::read_margins(&p)?),
                None => None,
            };
            let out = need(out, &cfg.out, "out")?;
            let mut tcfg = cfg.time.clone();
            tcfg.quarter = quarter.or(tcfg.quarter);
            let report =
                commands::time_disaggregate(&records, margins.as_ref(), &tcfg, &predictors, seed.unwrap_or(0))?;
            emit_report(&report, &out)
        }
        Command::RelativeEfficiency { previous, current, population, out } => {
            let (_, prev) = io::read_survey_table(&need(previous, &inputs.previous, "previous")?)?;
            let (ids, cur) = io::read_survey_table(&need(current, &inputs.current, "current")?)?;
            let (pop, x) = commands::read_frame(&need(population, &inputs.population, "population")?)?;
            let out = need(out, &cfg.out, "out")?;
            let (report, table) =
                commands::relative_efficiency(&prev, &ids, &cur, &pop, &x, cfg.design.as_ref(), &predictors)?;
            emit_report(&report, &out)?;
            if out != Path::new("-") {
                println!("{} of {} variables have quotient < 1", table.below_one, table.rows.len());
            }
            Ok(())
        }
    }
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
