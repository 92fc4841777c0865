use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use vsg_npc::harness::{self, ControllerKind, GridPreset, ScenarioConfig};
use vsg_npc::nn::{self, gradcheck, Dataset, TrainOptions};
use vsg_npc::Result;

#[derive(Parser)]
#[command(name = "vsg-lab", version, about = "VSG voltage-control simulation lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its time series, metrics, report and plots.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Collect a one-step training dataset under the config's PI controller.
    Collect {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        duration: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a predictor on a collected dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        epochs: usize,
        #[arg(long)]
        lr: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 256)]
        batch_size: usize,
    },
    /// One-step RMSE of a model on a dataset.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Run several scenarios side by side.
    Compare {
        #[arg(long, value_delimiter = ',', required = true)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check backpropagation against finite differences on random networks.
    Gradcheck {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        nets: usize,
        #[arg(long, default_value_t = 5)]
        samples: usize,
    },
    /// Write a preset scenario config.
    Preset {
        #[arg(long, value_enum)]
        grid: Grid,
        /// Controller; omit together with `--collection` for the data-logging preset.
        #[arg(long, value_enum, required_unless_present = "collection")]
        controller: Option<Controller>,
        /// Baseline loop with excitation, for `collect`.
        #[arg(long, conflicts_with = "controller")]
        collection: bool,
        /// NPC horizon in control steps.
        #[arg(long, default_value_t = vsg_npc::npc::DEFAULT_HORIZON)]
        horizon: usize,
        /// Model file referenced by an NPC config, relative to the config.
        #[arg(long, default_value = "model.json")]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Grid {
    Inductive,
    Resistive,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Controller {
    PiDroop,
    TunedPi,
    Npc,
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate { config, out } => {
            let config = ScenarioConfig::load(&config)?;
            let record = harness::run_scenario(&config)?;
            harness::write_run(&config, &record, &out)?;
            let summary = harness::RunSummary::from_record(&record)?;
            print!("{}", harness::output::run_report(&summary));
            if let Some(fault) = record.fault {
                eprintln!("run aborted: {fault}");
                std::process::exit(2);
            }
        }
        Command::Collect {
            config,
            duration,
            seed,
            out,
        } => {
            let config = ScenarioConfig::load(&config)?;
            let options = config.collection.unwrap_or_default();
            let data = nn::collect_dataset(&config, &options, duration, seed)?;
            data.write_csv(&out)?;
            println!("{} rows written to {}", data.samples.len(), out.display());
        }
        Command::Train {
            data,
            epochs,
            lr,
            seed,
            out,
            batch_size,
        } => {
            let data = Dataset::read_csv(&data)?;
            let options = TrainOptions {
                epochs,
                learning_rate: lr,
                seed,
                batch_size: Some(batch_size),
                ..TrainOptions::default()
            };
            let outcome = nn::fit(&data, &options)?;
            harness::save_model(&outcome.net, &out)?;
            if let Some(last) = outcome.history.last() {
                println!("final training loss {last:.6e}");
            }
            print!("{}", outcome.validation.table());
        }
        Command::Evaluate { model, data } => {
            let net = harness::load_model(&model)?;
            let data = Dataset::read_csv(&data)?;
            let report = nn::evaluate(&net, &data.samples)?;
            print!("{}", report.table());
        }
        Command::Compare { configs, out } => {
            let configs = configs
                .iter()
                .map(|p| ScenarioConfig::load(p))
                .collect::<Result<Vec<_>>>()?;
            let (report, records) = harness::compare(&configs)?;
            harness::write_comparison(&report, &records, &out)?;
            print!("{}", report.text());
        }
        Command::Gradcheck {
            seed,
            nets,
            samples,
        } => {
            let report = gradcheck::check_random_networks(seed, nets, samples)?;
            println!(
                "{} parameters checked, max relative error {:.3e}, {} above {:e}",
                report.parameters_checked,
                report.max_relative_error,
                report.failures,
                gradcheck::REL_TOLERANCE
            );
            if !report.passed() {
                std::process::exit(2);
            }
        }
        Command::Preset {
            grid,
            controller,
            collection,
            horizon,
            model,
            out,
        } => {
            let grid = match grid {
                Grid::Inductive => GridPreset::Inductive,
                Grid::Resistive => GridPreset::Resistive,
            };
            let config = match (collection, controller) {
                (true, _) | (false, None) => ScenarioConfig::collection_preset(grid),
                (false, Some(Controller::PiDroop)) => {
                    ScenarioConfig::preset(grid, ControllerKind::PiDroop)
                }
                (false, Some(Controller::TunedPi)) => {
                    ScenarioConfig::preset(grid, ControllerKind::TunedPi)
                }
                (false, Some(Controller::Npc)) => ScenarioConfig::npc_preset(grid, model, horizon),
            };
            config.save(&out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
