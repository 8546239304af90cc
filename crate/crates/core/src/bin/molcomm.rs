use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use molcomm_noma::experiments::config::ScheduleRecipe;
use molcomm_noma::experiments::{run, CampaignConfig, Command};
use molcomm_noma::optimizer::SweepParameter;
use molcomm_noma::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_CAP: u8 = 3;
const EXIT_DISAGREEMENT: u8 = 4;

/// Analytic BEP, sweeps, Monte-Carlo validation and protocol runs for
/// asynchronous molecular NOMA networks.
#[derive(Parser)]
#[command(name = "molcomm", version)]
struct Cli {
    /// TOML campaign file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Default)]
struct ScenarioArgs {
    #[arg(long)]
    num_tx: Option<usize>,
    /// ISI memory L in symbols.
    #[arg(long)]
    isi_length: Option<usize>,
    /// SNR in dB; `inf` for no noise.
    #[arg(long)]
    snr_db: Option<f64>,
    #[arg(long)]
    n_tx_max: Option<f64>,
    /// TX distance in µm, applied to every TX.
    #[arg(long)]
    distance_um: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Parameter {
    SnrDb,
    NumTx,
}

#[derive(Clone, Copy, ValueEnum)]
enum Recipe {
    None,
    SnrSteps,
    DistanceSteps,
}

#[derive(Subcommand)]
enum Cmd {
    /// BEP and MI of NOMA, TDMA and MDMA with optimized thresholds.
    Analytic(ScenarioArgs),
    /// P_e,1 and coupled P_e,2 against the threshold (two TXs).
    SweepThreshold {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        max_tau: Option<u64>,
    },
    /// P_e,sys over the (N_TX,2, ΔN_TX) plane (two TXs).
    SweepNtx(ScenarioArgs),
    /// P_e,sys over the (t_off,1, t_off,2) plane (two TXs).
    SweepOffset {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Cells per axis.
        #[arg(long)]
        cells: Option<usize>,
    },
    /// System MI of every scheme and offset case against SNR or K.
    CompareMa {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_enum)]
        parameter: Option<Parameter>,
        #[arg(long)]
        random_samples: Option<usize>,
    },
    /// Seed ensemble of the pilot-based optimization protocol.
    Protocol {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        n_seed: Option<usize>,
        #[arg(long)]
        n_iter: Option<usize>,
        /// Largest WCAM delay in seconds (0 disables the shifts).
        #[arg(long)]
        delta_s_max: Option<f64>,
        #[arg(long, value_enum)]
        schedule: Option<Recipe>,
        /// Turn on molecule-count adaptation (two TXs).
        #[arg(long)]
        ntx_opt: bool,
    },
    /// Analytic-vs-simulation agreement matrix.
    Validate {
        /// Tallied slots per cell.
        #[arg(long)]
        symbols: Option<u64>,
        #[arg(long)]
        no_negative_control: bool,
    },
}

fn apply_scenario(cfg: &mut CampaignConfig, a: &ScenarioArgs) {
    let s = &mut cfg.scenario;
    if a.num_tx.is_some() {
        s.num_tx = a.num_tx;
    }
    if let Some(l) = a.isi_length {
        s.isi_length = l;
    }
    if let Some(v) = a.snr_db {
        s.snr_db = v;
    }
    if let Some(v) = a.n_tx_max {
        s.n_tx_max = v;
    }
    if let Some(d) = a.distance_um {
        s.distances_um = vec![d];
    }
}

fn configure(cli: &Cli) -> Result<(Command, CampaignConfig), Error> {
    let mut cfg = match &cli.config {
        Some(p) => CampaignConfig::load(p)?,
        None => CampaignConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    let command = match &cli.command {
        Cmd::Analytic(a) => {
            apply_scenario(&mut cfg, a);
            Command::Analytic
        }
        Cmd::SweepThreshold { scenario, max_tau } => {
            apply_scenario(&mut cfg, scenario);
            if max_tau.is_some() {
                cfg.sweep.max_tau = *max_tau;
            }
            Command::SweepThreshold
        }
        Cmd::SweepNtx(a) => {
            apply_scenario(&mut cfg, a);
            Command::SweepNtx
        }
        Cmd::SweepOffset { scenario, cells } => {
            apply_scenario(&mut cfg, scenario);
            if let Some(n) = cells {
                cfg.sweep.offset_cells = *n;
            }
            Command::SweepOffset
        }
        Cmd::CompareMa {
            scenario,
            parameter,
            random_samples,
        } => {
            apply_scenario(&mut cfg, scenario);
            if let Some(p) = parameter {
                cfg.sweep.parameter = match p {
                    Parameter::SnrDb => SweepParameter::SnrDb,
                    Parameter::NumTx => SweepParameter::NumTx,
                };
            }
            if let Some(n) = random_samples {
                cfg.sweep.random_samples = *n;
            }
            Command::CompareMa
        }
        Cmd::Protocol {
            scenario,
            n_seed,
            n_iter,
            delta_s_max,
            schedule,
            ntx_opt,
        } => {
            apply_scenario(&mut cfg, scenario);
            if let Some(n) = n_seed {
                cfg.n_seed = *n;
            }
            if let Some(n) = n_iter {
                cfg.protocol.n_iter = *n;
            }
            if let Some(d) = delta_s_max {
                cfg.protocol.delta_s_max = *d;
            }
            if let Some(r) = schedule {
                cfg.schedule.events.clear();
                cfg.schedule.recipe = match r {
                    Recipe::None => ScheduleRecipe::Custom,
                    Recipe::SnrSteps => ScheduleRecipe::SnrSteps,
                    Recipe::DistanceSteps => ScheduleRecipe::DistanceSteps,
                };
            }
            if *ntx_opt {
                cfg.protocol.enable_ntx_opt = true;
            }
            Command::Protocol
        }
        Cmd::Validate {
            symbols,
            no_negative_control,
        } => {
            if let Some(n) = symbols {
                cfg.validate.symbols = *n;
            }
            if *no_negative_control {
                cfg.validate.negative_control = false;
            }
            Command::Validate
        }
    };
    Ok((command, cfg))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Toml(_) | Error::Dimension(_) | Error::Unsupported(_) | Error::Domain(_) => {
            EXIT_CONFIG
        }
        Error::EnumerationCap { .. } => EXIT_CAP,
        _ => EXIT_FAILURE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure(&cli).and_then(|(command, cfg)| run(command, &cfg).map(|o| (command, o)));
    match result {
        Ok((command, outcome)) => {
            for note in &outcome.notes {
                println!("{note}");
            }
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("{}: agreement check failed", command.name());
                ExitCode::from(EXIT_DISAGREEMENT)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
