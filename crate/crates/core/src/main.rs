use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tdcm::config::{ParamsFile, ScenarioFile};
use tdcm::detector::DetectError;
use tdcm::experiment::{self, plot_data, AxisOutcome, ExperimentReport, ScenarioSpec};
use tdcm::identify::identify;
use tdcm::io::{self, ShiftEstimateFile};
use tdcm::{Axis, ControllerKind, Error};

#[derive(Parser)]
#[command(
    name = "tdcm",
    version,
    about = "Hysteresis shift detection and compensation for tendon-driven catheters"
)]
struct Cli {
    /// Directory for outputs.
    #[arg(long, global = true, env = "TDCM_OUT_DIR", default_value = "results")]
    out_dir: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for trials (default: one per core).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fits a parameter file to a calibration sweep trace.
    Identify {
        trace: PathBuf,
        #[arg(long, default_value = "ap")]
        axis: Axis,
        /// Output file (default: <out-dir>/params.json).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Simulates one run of a scenario and writes its trace.
    Simulate {
        config: PathBuf,
        #[arg(long, default_value = "none")]
        controller: ControllerKind,
    },
    /// Runs shift detection on every driven axis of a scenario.
    Detect { config: PathBuf },
    /// Runs the full scenario protocol and writes the report.
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
    },
    /// Collects report.csv files below a directory into one table.
    Report { results: PathBuf },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 4,
        Error::Detection(DetectError::Timeout { .. }) => 3,
        _ => 2,
    }
}

fn load_spec(path: &Path, seed: Option<u64>) -> tdcm::Result<ScenarioSpec> {
    let file = ScenarioFile::load(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut spec = file.spec(base)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    Ok(spec)
}

fn write(path: &Path, text: &str) -> tdcm::Result<()> {
    io::write_atomic(path, text.as_bytes())?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> tdcm::Result<()> {
    let out = &cli.out_dir;
    match cli.command {
        Command::Identify {
            trace,
            axis,
            output,
        } => {
            let samples = io::trace_from_csv(&io::read_to_string(&trace)?)?;
            let id = identify(&samples, axis)?;
            let path = output.unwrap_or_else(|| out.join("params.json"));
            let file = ParamsFile::from(&id.params);
            file.save(&path)?;
            println!(
                "d_pos {:.3} deg, d_neg {:.3} deg, omega {:.4} ({} samples), written to {}",
                file.d_pos_deg,
                file.d_neg_deg,
                file.omega,
                id.omega_samples,
                path.display()
            );
        }
        Command::Simulate { config, controller } => {
            let spec = load_spec(&config, cli.seed)?;
            let cell = experiment::simulate(&spec, controller)?;
            let trace = cell.trace.unwrap_or_default();
            let path = out.join(format!("{}_{}_trace.csv", spec.name, controller));
            write(&path, &io::trace_to_csv(&trace)?)?;
            for (axis, o) in &cell.outcomes {
                if let AxisOutcome::Measured { ptpe, rmse } = o {
                    println!("{axis}: PTPE {ptpe:.3} deg, RMSE {rmse:.3} deg");
                }
            }
        }
        Command::Detect { config } => {
            let spec = load_spec(&config, cli.seed)?;
            for &axis in spec.dof.axes() {
                let stem = out.join(format!("{}_{}", spec.name, axis));
                match experiment::detect(&spec, axis) {
                    Ok(d) => {
                        write(
                            &stem.with_extension("log.csv"),
                            &io::detection_log_to_csv(&d.log)?,
                        )?;
                        let file = ShiftEstimateFile::new(axis, &d);
                        io::save_json(&stem.with_extension("shift.json"), &file)?;
                        println!(
                            "{axis}: offset {:.3} deg ({} side, {} iterations, {} flips)",
                            file.offset_deg,
                            file.detected_side,
                            file.iterations_used,
                            file.direction_flips
                        );
                    }
                    Err(Error::Detection(DetectError::Timeout { iterations, log })) => {
                        write(
                            &stem.with_extension("log.csv"),
                            &io::detection_log_to_csv(&log)?,
                        )?;
                        return Err(Error::Detection(DetectError::Timeout { iterations, log }));
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        Command::Run { configs } => {
            let specs = configs
                .iter()
                .map(|c| load_spec(c, cli.seed))
                .collect::<tdcm::Result<Vec<_>>>()?;
            for spec in &specs {
                let result = experiment::run_scenario(spec, cli.jobs)?;
                let dir = out.join(&spec.name);
                write(&dir.join("report.csv"), &result.report.to_csv()?)?;
                write(&dir.join("report.txt"), &result.report.to_table())?;
                let mut det = String::from(
                    "catheter,trial,axis,offset_deg,true_offset_deg,direction_flips,iterations\n",
                );
                for cell in &result.cells {
                    for (axis, d) in &cell.detections {
                        let truth = match axis {
                            Axis::Ap => spec.shape.knob_offset().ap,
                            Axis::Lr => spec.shape.knob_offset().lr,
                        };
                        det.push_str(&format!(
                            "{},{},{},{},{},{},{}\n",
                            cell.catheter,
                            cell.trial,
                            axis,
                            io::fmt_sig9(d.offset.to_degrees()),
                            io::fmt_sig9(truth.to_degrees()),
                            d.direction_flips,
                            d.iterations_used
                        ));
                    }
                }
                write(&dir.join("detections.csv"), &det)?;
                for cell in result.cells.iter().filter(|c| c.trace.is_some()) {
                    let trace = cell.trace.as_deref().unwrap_or_default();
                    write(
                        &dir.join(format!("trace_{}.csv", cell.controller)),
                        &io::trace_to_csv(trace)?,
                    )?;
                    for &axis in spec.dof.axes() {
                        write(
                            &dir.join(format!("plot_{}_{}.dat", cell.controller, axis)),
                            &plot_data(trace, axis, result.discard_s),
                        )?;
                    }
                }
                print!("{}", result.report.to_table());
            }
        }
        Command::Report { results } => {
            let mut files = Vec::new();
            collect_reports(&results, &mut files)?;
            files.sort();
            if files.is_empty() {
                return Err(Error::Config(format!(
                    "no report.csv found below {}",
                    results.display()
                )));
            }
            let mut all = ExperimentReport::default();
            for f in &files {
                all.extend(ExperimentReport::from_csv(&io::read_to_string(f)?)?);
            }
            write(&out.join("summary.csv"), &all.to_csv()?)?;
            let table = all.to_table();
            write(&out.join("summary.txt"), &table)?;
            print!("{table}");
        }
    }
    Ok(())
}

fn collect_reports(dir: &Path, out: &mut Vec<PathBuf>) -> tdcm::Result<()> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    for entry in entries {
        let path = entry
            .map_err(|e| Error::Io {
                path: dir.to_path_buf(),
                source: e,
            })?
            .path();
        if path.is_dir() {
            collect_reports(&path, out)?;
        } else if path.file_name().is_some_and(|n| n == "report.csv") {
            out.push(path);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
