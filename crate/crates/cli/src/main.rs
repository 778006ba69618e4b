mod matrix_io;

use clap::{Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use wsc_core::json::{format_f64, to_canonical_string};
use wsc_core::simulation::{with_threads, StudyConfig};
use wsc_core::{bulk_geometry, denoise, AspectRatios, DenoiseInput, Epsilon, Error, SpectralModel};

#[derive(Parser)]
#[command(name = "wsc", version, about = "Whiten, shrink and recolor low-rank signals in correlated noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Denoise a data matrix given noise-only samples.
    Denoise {
        /// Data matrix `Y` (p x n), CSV or WSC1.
        #[arg(long)]
        input: PathBuf,
        /// Noise-only samples (p x m), CSV or WSC1.
        #[arg(long)]
        noise: PathBuf,
        /// Detection margin above the bulk edge: a positive number or `auto`.
        #[arg(long, default_value = "auto", value_parser = parse_epsilon)]
        epsilon: Epsilon,
        #[arg(long)]
        rank_cap: Option<usize>,
        /// Where to write the estimate.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: matrix_io::Format,
        /// JSON report with the per-component estimates.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run a simulation study described by a JSON config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Results table (CSV). A manifest is written next to it.
        #[arg(long)]
        out: PathBuf,
        /// Manifest path; defaults to the results path with `.manifest.json`.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Worker threads. Results do not depend on this.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Tabulate a spectral function on a uniform grid.
    Spectral {
        #[arg(long)]
        gamma: f64,
        /// Ignored by the threshold and edge functions, which sweep beta instead.
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
        #[arg(long = "fn", value_enum)]
        function: SpectralFn,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long, default_value_t = 101)]
        points: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
enum SpectralFn {
    Sbar,
    Sassoc,
    Zeta,
    Psi,
    Phi,
    Xi,
    XiInv,
    Upsilon1,
    Upsilon2,
    #[value(name = "E")]
    E,
    Density,
    SigmaThresh,
    ThetaMax,
    ThetaMin,
}

fn parse_epsilon(text: &str) -> Result<Epsilon, String> {
    if text.eq_ignore_ascii_case("auto") {
        return Ok(Epsilon::Auto);
    }
    match text.parse::<f64>() {
        Ok(e) if e.is_finite() && e > 0.0 => Ok(Epsilon::Value(e)),
        _ => Err(format!("expected `auto` or a positive number, got {text:?}")),
    }
}

/// Failure with its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn io(message: String) -> Self {
        Self { code: 2, message }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::IllConditioned(_) => 3,
            Error::Dimension(_) => 4,
            Error::Domain { .. } | Error::SubThreshold { .. } => 5,
            Error::Config(_) => 2,
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Denoise {
            input,
            noise,
            epsilon,
            rank_cap,
            out,
            format,
            report,
        } => run_denoise(&input, &noise, epsilon, rank_cap, &out, format, report.as_deref()),
        Command::Simulate {
            config,
            out,
            manifest,
            threads,
        } => run_simulate(&config, &out, manifest, threads),
        Command::Spectral {
            gamma,
            beta,
            function,
            from,
            to,
            points,
        } => run_spectral(gamma, beta, function, from, to, points),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("wsc: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn run_denoise(
    input: &Path,
    noise: &Path,
    epsilon: Epsilon,
    rank_cap: Option<usize>,
    out: &Path,
    format: matrix_io::Format,
    report: Option<&Path>,
) -> Result<(), Failure> {
    let y = matrix_io::read(input).map_err(Failure::io)?;
    let r = matrix_io::read(noise).map_err(Failure::io)?;
    let result = denoise(&DenoiseInput {
        y: y.as_ref(),
        noise: r.as_ref(),
        epsilon,
        rank_cap,
    })?;
    for warning in &result.warnings {
        eprintln!("wsc: warning: {warning}");
    }
    matrix_io::write(out, &result.x_hat, format).map_err(Failure::io)?;
    if let Some(path) = report {
        let mut text = to_canonical_string(&result)?;
        text.push('\n');
        write_text(path, &text)?;
    }
    Ok(())
}

fn run_simulate(config: &Path, out: &Path, manifest: Option<PathBuf>, threads: Option<usize>) -> Result<(), Failure> {
    let text = std::fs::read_to_string(config).map_err(|e| Failure::io(format!("{}: {e}", config.display())))?;
    let study: StudyConfig =
        serde_json::from_str(&text).map_err(|e| Failure::io(format!("{}: {e}", config.display())))?;
    study.validate()?;
    let csv = with_threads(threads, || study.run_to_csv())??;
    write_text(out, &csv)?;

    let manifest_path = manifest.unwrap_or_else(|| {
        let mut name = out.file_stem().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        out.with_file_name(name)
    });
    let doc = serde_json::json!({
        "config": study,
        "results": out.file_name().map(|n| n.to_string_lossy().into_owned()),
        "version": env!("CARGO_PKG_VERSION"),
    });
    let mut text = to_canonical_string(&doc)?;
    text.push('\n');
    write_text(&manifest_path, &text)
}

fn run_spectral(gamma: f64, beta: f64, function: SpectralFn, from: f64, to: f64, points: usize) -> Result<(), Failure> {
    if points == 0 || !from.is_finite() || !to.is_finite() {
        return Err(Failure::io("need a finite range and at least one point".into()));
    }
    let grid: Vec<f64> = if points == 1 {
        vec![from]
    } else {
        (0..points)
            .map(|i| from + (to - from) * i as f64 / (points - 1) as f64)
            .collect()
    };
    let sweeps_beta = matches!(function, SpectralFn::SigmaThresh | SpectralFn::ThetaMax | SpectralFn::ThetaMin);
    let model = if sweeps_beta { None } else { Some(SpectralModel::new(gamma, beta)?) };
    let mut out = format!("x,{}\n", function.to_possible_value().unwrap().get_name());
    for &x in &grid {
        let value = match (function, &model) {
            (SpectralFn::SigmaThresh | SpectralFn::ThetaMax | SpectralFn::ThetaMin, _) => {
                let bulk = bulk_geometry(AspectRatios::new(gamma, x)?);
                match function {
                    SpectralFn::SigmaThresh => bulk.sigma_thresh,
                    SpectralFn::ThetaMax => bulk.theta_max,
                    _ => bulk.theta_min,
                }
            }
            (_, Some(m)) => match function {
                SpectralFn::Sbar => m.stieltjes(x)?,
                SpectralFn::Sassoc => m.stieltjes_assoc(x)?,
                SpectralFn::Zeta => m.zeta(x)?,
                SpectralFn::Psi => m.psi(x)?,
                SpectralFn::Phi => m.phi(x)?,
                SpectralFn::Xi => m.xi(x)?,
                SpectralFn::XiInv => m.xi_inv(x)?,
                SpectralFn::Upsilon1 => m.upsilon1(x)?,
                SpectralFn::Upsilon2 => m.upsilon2(x)?,
                SpectralFn::E => m.e_func(x)?,
                SpectralFn::Density => m.wachter_density(x),
                _ => unreachable!(),
            },
            (_, None) => unreachable!(),
        };
        out.push_str(&format!("{},{}\n", format_f64(x), format_f64(value)));
    }
    print!("{out}");
    Ok(())
}
