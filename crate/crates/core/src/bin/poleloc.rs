//! Command-line front end: synthesize scenarios, run the filter over a
//! chosen sensor set and compare finished runs side by side.

use clap::{Parser, Subcommand};
use poleloc::run::{compare, run_scenario, write_artifacts, RunConfig, SensorCombo};
use poleloc::sim::Scenario;
use poleloc::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "poleloc", version, about = "Pole-landmark vehicle localization on synthetic worlds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a scenario, play it through the filter, write artifacts.
    Run {
        /// Builtin scenario name or path to a scenario TOML file.
        #[arg(long)]
        scenario: String,
        /// Landmark sensors fused on top of GNSS, odometry and the gyro.
        #[arg(long, value_enum, default_value = "lidar_cameras")]
        sensors: SensorCombo,
        /// Directory the run artifacts are written into.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed baked into the scenario.
        #[arg(long)]
        seed: Option<u64>,
        /// Turns off association gates and the innovation gate.
        #[arg(long)]
        no_gating: bool,
        /// Also dump the synthesized sensor log into OUT/sensors/.
        #[arg(long)]
        dump_sensors: bool,
    },
    /// Tabulate position RMS across run directories, best run starred.
    Compare {
        /// Run directories, each holding a summary.json.
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::init();
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Numerical { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn real_main() -> poleloc::Result<()> {
    match Cli::parse().command {
        Command::Run { scenario, sensors, out, seed, no_gating, dump_sensors } => {
            let sc = Scenario::resolve(&scenario)?;
            let cfg = RunConfig { sensors, seed, gating: !no_gating };
            let output = run_scenario(&sc, &cfg)?;
            write_artifacts(&out, &output)?;
            if dump_sensors {
                output.sim.log.save(&out.join("sensors"))?;
            }
            let e = &output.summary.errors;
            println!(
                "{} [{}]: {} epochs, rms position {:.3} m, cross-track {:.3} m -> {}",
                output.summary.scenario,
                output.summary.sensors,
                e.epochs,
                e.rms_position_m,
                e.rms_cross_track_m,
                out.display()
            );
            Ok(())
        }
        Command::Compare { dirs } => {
            print!("{}", compare(&dirs)?);
            Ok(())
        }
    }
}
