use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mapmatch::commands::{self, MapSource, MatchArgs};
use mapmatch::config::{self, RunConfig};
use mapmatch::formats::write_text;
use mapmatch::sim::SimConfig;
use mapmatch::{CliError, Result};

/// Online SD-map matching with lane-marking and scenario factors.
///
/// Exit codes: 0 ok, 2 input error, 3 nothing could be matched,
/// 4 prediction and ground truth do not line up.
#[derive(Parser)]
#[command(name = "mapmatch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set gamma=80`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

impl ConfigArgs {
    fn run_config(&self) -> Result<RunConfig> {
        let c: RunConfig = config::load(self.config.as_deref(), &self.sets)?;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct MapArgs {
    /// Road map (GeoJSON).
    #[arg(long)]
    map: Option<PathBuf>,
    /// Enriched map written by `enrich`.
    #[arg(long)]
    enriched: Option<PathBuf>,
}

impl MapArgs {
    fn source(&self) -> MapSource {
        match (&self.map, &self.enriched) {
            (_, Some(e)) => MapSource::Enriched(e.clone()),
            (Some(m), None) => MapSource::Plain(m.clone()),
            (None, None) => unreachable!("clap requires one map source"),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Associate lane markings with the road map.
    Enrich {
        #[arg(long)]
        map: PathBuf,
        /// Lane markings (JSONL).
        #[arg(long)]
        lanes: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Match a trajectory onto the map.
    Match {
        #[command(flatten)]
        map: MapArgs,
        /// Trajectory (JSONL).
        #[arg(long)]
        traj: PathBuf,
        /// Per-frame lane detections in the vehicle frame (JSONL).
        #[arg(long, visible_alias = "detections")]
        lanes: Option<PathBuf>,
        /// Scenario recognition stream (JSONL).
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Match records (JSONL), followed by the finalized road sequence.
        #[arg(long)]
        out: PathBuf,
        /// Also write matched roads and samples as GeoJSON.
        #[arg(long, value_name = "PATH")]
        emit_geojson: Option<PathBuf>,
        /// Keep the raw position for the distance emission.
        #[arg(long)]
        no_pose_correction: bool,
        /// Drop the lane-marking factor.
        #[arg(long)]
        disable_pl: bool,
        /// Drop the scenario factor.
        #[arg(long)]
        disable_ps: bool,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Score a match output against ground truth.
    Eval {
        #[command(flatten)]
        map: MapArgs,
        /// Output of `match`.
        #[arg(long)]
        pred: PathBuf,
        /// Ground truth (JSONL).
        #[arg(long)]
        truth: PathBuf,
        /// Report path; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate synthetic multilevel drives.
    Sim {
        #[arg(long)]
        out: PathBuf,
        /// Seed, overriding the configuration.
        #[arg(long, conflicts_with = "seeds")]
        seed: Option<u64>,
        /// Seed range `a..b`; each seed goes to its own `seed-N` directory.
        #[arg(long)]
        seeds: Option<String>,
        /// Also run the ablation variants and write `ablation.csv`.
        #[arg(long)]
        ablate: bool,
        /// Simulator configuration (TOML, nested tables).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// Print the effective configuration.
    Config {
        /// Print the defaults.
        #[arg(long)]
        dump: bool,
        /// Use the simulator configuration instead of the matcher's.
        #[arg(long)]
        sim: bool,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Enrich { map, lanes, out, cfg } => commands::enrich(&map, &lanes, &cfg.run_config()?, &out),
        Command::Match { map, traj, lanes, scenario, out, emit_geojson, no_pose_correction, disable_pl, disable_ps, cfg } => {
            let mut rc = cfg.run_config()?;
            rc.pose_correction &= !no_pose_correction;
            rc.enable_lane_factor &= !disable_pl;
            rc.enable_scenario &= !disable_ps;
            let args = MatchArgs { map: map.source(), trajectory: traj, detections: lanes, scenario, out, geojson: emit_geojson };
            commands::match_trajectory(&args, &rc).map(|_| ())
        }
        Command::Eval { map, pred, truth, out } => {
            let text = commands::report_to_string(&commands::eval(&pred, &truth, &map.source())?);
            match out {
                Some(p) => write_text(&p, &text),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        Command::Sim { out, seed, seeds, ablate, config, sets } => {
            let mut cfg: SimConfig = config::load(config.as_deref(), &sets)?;
            let seeds = match (seed, seeds) {
                (_, Some(range)) => commands::parse_seeds(&range)?,
                (Some(s), None) => vec![s],
                (None, None) => vec![cfg.seed],
            };
            cfg.seed = seeds[0];
            commands::sim(&cfg, &seeds, &out, ablate.then(RunConfig::default).as_ref())
        }
        Command::Config { dump, sim, cfg } => {
            let text = match (dump, sim) {
                (true, false) => config::dump(&RunConfig::default())?,
                (true, true) => config::dump(&SimConfig::default())?,
                (false, false) => config::dump(&cfg.run_config()?)?,
                (false, true) => {
                    let s: SimConfig = config::load(cfg.config.as_deref(), &cfg.sets)?;
                    s.validate()?;
                    config::dump(&s)?
                }
            };
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_status(&e))
        }
    }
}

fn exit_status(e: &CliError) -> u8 {
    e.exit_code() as u8
}
