//! `mfso3`: evaluate matrix Fisher densities on sphere grids, draw exact
//! samples, fit parameters from samples, and run attitude-estimation
//! scenarios.
//!
//! All outputs are deterministic functions of the inputs and the seed.

use clap::{Parser, Subcommand};
use mfso3::io::{
    density_grid, read_rotation_samples, write_density_grid, write_rotation_samples, FitReport,
    MatrixParameterFile,
};
use mfso3::special::QuadratureRule;
use mfso3::{MatrixFisher, ScenarioConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "mfso3",
    about = "Matrix Fisher distributions on SO(3): densities, sampling, fitting, estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Export per-axis marginal densities on a latitude-longitude grid.
    Density {
        /// JSON file with the matrix parameter, {"f": [[..],[..],[..]]}.
        #[arg(long)]
        input: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        output: PathBuf,
        /// Elevation resolution; the grid is N elevations x 2N azimuths.
        #[arg(long, default_value_t = 64)]
        grid: usize,
        /// Gauss-Legendre order for the normalizing integrals.
        #[arg(long, default_value_t = 80)]
        quad_order: usize,
    },
    /// Draw exact samples and write them as a nine-column CSV.
    Sample {
        /// JSON file with the matrix parameter.
        #[arg(long)]
        input: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        output: PathBuf,
        /// Number of rotations to draw.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Random seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Gauss-Legendre order for the normalizing integrals.
        #[arg(long, default_value_t = 80)]
        quad_order: usize,
    },
    /// Fit the matrix parameter to rotation samples by maximum likelihood.
    Fit {
        /// Sample CSV (as written by `sample`).
        #[arg(long)]
        input: PathBuf,
        /// Output JSON report; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Gauss-Legendre order for the normalizing integrals.
        #[arg(long, default_value_t = 80)]
        quad_order: usize,
    },
    /// Run an estimation scenario: both filters on one measurement stream.
    Estimate {
        /// Scenario JSON file.
        #[arg(long)]
        input: PathBuf,
        /// Output prefix; writes `<prefix>_first_order.csv`,
        /// `<prefix>_unscented.csv`, and `<prefix>_summary.json`.
        #[arg(long)]
        output: PathBuf,
        /// Override the scenario's unscented spread parameter.
        #[arg(long)]
        sigma: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<(), String> {
    match command {
        Command::Density {
            input,
            output,
            grid,
            quad_order,
        } => cmd_density(&input, &output, grid, quad_order),
        Command::Sample {
            input,
            output,
            samples,
            seed,
            quad_order,
        } => cmd_sample(&input, &output, samples, seed, quad_order),
        Command::Fit {
            input,
            output,
            quad_order,
        } => cmd_fit(&input, output.as_deref(), quad_order),
        Command::Estimate {
            input,
            output,
            sigma,
        } => cmd_estimate(&input, &output, sigma),
    }
}

fn read_parameter(path: &Path, rule: &QuadratureRule) -> Result<MatrixFisher, String> {
    let file = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let param: MatrixParameterFile = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| format!("{}: {e}", path.display()))?;
    MatrixFisher::with_rule(param.matrix(), rule).map_err(|e| e.to_string())
}

fn build_rule(order: usize) -> Result<QuadratureRule, String> {
    QuadratureRule::gauss_legendre(order).map_err(|e| e.to_string())
}

/// Prints to stdout, treating a closed pipe as success.
fn print_line(text: &str) -> Result<(), String> {
    match writeln!(std::io::stdout(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => r.map_err(|e| e.to_string()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, String> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| format!("{}: {e}", path.display()))
}

fn cmd_density(input: &Path, output: &Path, grid: usize, quad_order: usize) -> Result<(), String> {
    if grid == 0 {
        return Err("grid resolution must be positive".into());
    }
    let d = read_parameter(input, &build_rule(quad_order)?)?;
    let rows = density_grid(&d, 2 * grid, grid);
    let mut out = create(output)?;
    write_density_grid(&rows, &mut out).map_err(|e| format!("{}: {e}", output.display()))?;
    out.flush().map_err(|e| e.to_string())?;
    Ok(())
}

fn cmd_sample(
    input: &Path,
    output: &Path,
    samples: usize,
    seed: u64,
    quad_order: usize,
) -> Result<(), String> {
    if samples == 0 {
        return Err("sample count must be positive".into());
    }
    let d = read_parameter(input, &build_rule(quad_order)?)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let batch = d.sample_batch(samples, &mut rng);
    let mut out = create(output)?;
    write_rotation_samples(&batch.rotations, &mut out)
        .map_err(|e| format!("{}: {e}", output.display()))?;
    out.flush().map_err(|e| e.to_string())?;
    eprintln!(
        "wrote {} samples (rejection acceptance rate {:.3})",
        samples, batch.acceptance_rate
    );
    Ok(())
}

fn cmd_fit(input: &Path, output: Option<&Path>, quad_order: usize) -> Result<(), String> {
    let rule = build_rule(quad_order)?;
    let file = File::open(input).map_err(|e| format!("{}: {e}", input.display()))?;
    let samples = read_rotation_samples(BufReader::new(file)).map_err(|e| e.to_string())?;
    let fit = mfso3::fitting::fit_from_samples_with_rule(&samples, &rule)
        .map_err(|e| e.to_string())?;
    let report = FitReport::from_fit(&fit);
    let text = serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?;
    match output {
        Some(path) => {
            let mut out = create(path)?;
            writeln!(out, "{text}").map_err(|e| e.to_string())?;
            out.flush().map_err(|e| e.to_string())?;
        }
        None => print_line(&text)?,
    }
    Ok(())
}

fn cmd_estimate(input: &Path, output: &Path, sigma: Option<f64>) -> Result<(), String> {
    let file = File::open(input).map_err(|e| format!("{}: {e}", input.display()))?;
    let mut cfg: ScenarioConfig = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| format!("{}: {e}", input.display()))?;
    if let Some(s) = sigma {
        cfg.sigma = s;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    let out = mfso3::run_scenario(&cfg).map_err(|e| e.to_string())?;

    let stem = output.to_string_lossy();
    let fo_path = PathBuf::from(format!("{stem}_first_order.csv"));
    let un_path = PathBuf::from(format!("{stem}_unscented.csv"));
    let summary_path = PathBuf::from(format!("{stem}_summary.json"));

    let mut w = create(&fo_path)?;
    out.first_order
        .write_csv(&mut w)
        .map_err(|e| e.to_string())?;
    w.flush().map_err(|e| e.to_string())?;
    let mut w = create(&un_path)?;
    out.unscented.write_csv(&mut w).map_err(|e| e.to_string())?;
    w.flush().map_err(|e| e.to_string())?;
    let mut w = create(&summary_path)?;
    writeln!(
        w,
        "{}",
        serde_json::to_string_pretty(&out.summary).map_err(|e| e.to_string())?
    )
    .map_err(|e| e.to_string())?;
    w.flush().map_err(|e| e.to_string())?;

    print_line(&format!(
        "steady-state mean error: first-order {:.3} deg, unscented {:.3} deg",
        out.summary.first_order.mean_error_deg, out.summary.unscented.mean_error_deg
    ))
}
