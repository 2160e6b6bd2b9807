use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use sde_trbdf2::experiments::{run_test, ExperimentConfig, TestCase};
use sde_trbdf2::integrals::Truncation;
use sde_trbdf2::stability::{
    a_stability_probe, h_star_with, ms_gain, ms_polynomial, stability_map, GridRange, MsScheme,
};
use sde_trbdf2::{Error, Scheme, SchemeConfig};

/// Stochastic TR-BDF2: convergence experiments, mean-square stability maps and point queries.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    /// Worker threads (defaults to all cores); results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct Output {
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "csv")]
    format: Format,

    /// Leave out the JSON `meta` object (version, seed, wall time).
    #[arg(long)]
    no_meta: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Strong-error convergence experiment on one of the test problems.
    Run {
        /// Test problem: order, stiff2, stiff5 or general.
        #[arg(long, value_parser = parse_test)]
        test: TestCase,

        /// Comma-separated scheme names; the test's default set when absent.
        #[arg(long, value_delimiter = ',', value_parser = parse_scheme)]
        schemes: Vec<Scheme>,

        /// Monte Carlo paths per step size.
        #[arg(long, default_value_t = 10_000)]
        paths: usize,

        #[arg(long, default_value_t = 0)]
        seed: u64,

        /// Step sizes h = 2^-i for i in LO..HI (inclusive); the test's default when absent.
        #[arg(long, value_parser = parse_exponents)]
        h_exp: Option<(u32, u32)>,

        /// First-stage fraction of TR-BDF2.
        #[arg(long, default_value_t = 2.0 - std::f64::consts::SQRT_2)]
        gamma: f64,

        /// Fourier terms per sub-step are ceil(K / sqrt(delta)).
        #[arg(long, default_value_t = 1.0)]
        trunc_k: f64,

        #[command(flatten)]
        output: Output,
    },
    /// Grid of the mean-square step bound h* over real lambda and sigma.
    StabilityMap {
        /// trbdf2 or it2.
        #[arg(long, value_parser = parse_ms_scheme, default_value = "trbdf2")]
        scheme: MsScheme,

        /// Re(lambda) grid as lo:hi:count (hi excluded).
        #[arg(long, allow_hyphen_values = true, value_parser = parse_grid, default_value = "-200:0:200")]
        re_lambda: GridRange,

        /// |sigma| grid as lo:hi:count (hi excluded).
        #[arg(long, allow_hyphen_values = true, value_parser = parse_grid, default_value = "0:20:200")]
        sigma: GridRange,

        /// Largest step searched; cells stable up to it report inf.
        #[arg(long, default_value_t = 1e3)]
        cap: f64,

        #[arg(long, default_value_t = 2.0 - std::f64::consts::SQRT_2)]
        gamma: f64,

        #[command(flatten)]
        output: Output,
    },
    /// Mean-square gain, stability polynomial and h* at one (lambda, sigma).
    MsGain {
        #[arg(long, value_parser = parse_ms_scheme, default_value = "trbdf2")]
        scheme: MsScheme,

        /// lambda as RE,IM.
        #[arg(long, allow_hyphen_values = true, value_parser = parse_complex)]
        lambda: Complex64,

        /// sigma as RE,IM.
        #[arg(long, allow_hyphen_values = true, value_parser = parse_complex)]
        sigma: Complex64,

        /// Step size.
        #[arg(long)]
        h: f64,

        #[arg(long, default_value_t = 2.0 - std::f64::consts::SQRT_2)]
        gamma: f64,

        #[arg(long, default_value_t = 1e3)]
        cap: f64,

        #[command(flatten)]
        output: Output,
    },
    /// A- and L-stability probe of the deterministic amplification function.
    AProbe {
        #[arg(long, default_value_t = 2.0 - std::f64::consts::SQRT_2)]
        gamma: f64,

        #[command(flatten)]
        output: Output,
    },
}

fn parse_test(s: &str) -> Result<TestCase, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_ms_scheme(s: &str) -> Result<MsScheme, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_grid(s: &str) -> Result<GridRange, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_exponents(s: &str) -> Result<(u32, u32), String> {
    let (lo, hi) = s.split_once("..").ok_or_else(|| format!("expected LO..HI, got {s:?}"))?;
    let lo: u32 = lo.trim().parse().map_err(|_| format!("bad exponent {lo:?}"))?;
    let hi: u32 = hi.trim().parse().map_err(|_| format!("bad exponent {hi:?}"))?;
    if lo > hi || hi > 30 {
        return Err(format!("exponent range {lo}..{hi} must satisfy LO <= HI <= 30"));
    }
    Ok((lo, hi))
}

fn parse_complex(s: &str) -> Result<Complex64, String> {
    let (re, im) = s.split_once(',').unwrap_or((s, "0"));
    let re: f64 = re.trim().parse().map_err(|_| format!("bad real part {re:?}"))?;
    let im: f64 = im.trim().parse().map_err(|_| format!("bad imaginary part {im:?}"))?;
    if !(re.is_finite() && im.is_finite()) {
        return Err(format!("{s:?} is not finite"));
    }
    Ok(Complex64::new(re, im))
}

fn check_gamma(gamma: f64) -> Result<()> {
    SchemeConfig::with_gamma(gamma)?;
    Ok(())
}

fn emit(output: &Output, text: &str) -> Result<()> {
    match &output.out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn key_values(rows: &[(String, String)]) -> String {
    let mut out = String::from("quantity,value\n");
    for (k, v) in rows {
        let _ = writeln!(out, "{k},{v}");
    }
    out
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run {
            test,
            schemes,
            paths,
            seed,
            h_exp,
            gamma,
            trunc_k,
            output,
        } => {
            if paths == 0 {
                bail!(Error::InvalidParameter("--paths must be positive".into()));
            }
            if !(trunc_k > 0.0 && trunc_k.is_finite()) {
                bail!(Error::InvalidParameter(format!("--trunc-k = {trunc_k}")));
            }
            let mut cfg = ExperimentConfig::new(test);
            if !schemes.is_empty() {
                cfg.schemes = schemes;
            }
            if let Some(range) = h_exp {
                cfg.h_exponents = range;
            }
            cfg.paths = paths;
            cfg.seed = seed;
            cfg.scheme_config = SchemeConfig::with_gamma(gamma)?;
            cfg.scheme_config.truncation = Truncation::InverseSqrtDelta(trunc_k);
            let report = run_test(&cfg)?;
            let text = match output.format {
                Format::Csv => report.to_csv(),
                Format::Json => report.to_json(!output.no_meta)? + "\n",
            };
            emit(&output, &text)?;
            if report.flagged() {
                eprintln!("warning: more than 0.1% of paths failed on at least one level");
            }
            Ok(())
        }
        Command::StabilityMap {
            scheme,
            re_lambda,
            sigma,
            cap,
            gamma,
            output,
        } => {
            check_gamma(gamma)?;
            let grid = stability_map(scheme, re_lambda, sigma, gamma, cap)?;
            let text = match output.format {
                Format::Csv => grid.to_csv(),
                Format::Json => {
                    let mut doc = serde_json::json!({
                        "scheme": scheme.to_string(),
                        "gamma": gamma,
                        "cap": cap,
                        "re_lambda": grid.re_lambda,
                        "sigma_abs": grid.sigma,
                        "h_star": grid.cells.iter().map(|c| c.csv_value()).collect::<Vec<_>>(),
                    });
                    if !output.no_meta {
                        doc["meta"] = serde_json::json!({ "version": env!("CARGO_PKG_VERSION") });
                    }
                    serde_json::to_string_pretty(&doc)? + "\n"
                }
            };
            emit(&output, &text)
        }
        Command::MsGain {
            scheme,
            lambda,
            sigma,
            h,
            gamma,
            cap,
            output,
        } => {
            check_gamma(gamma)?;
            if !(h > 0.0 && h.is_finite()) {
                bail!(Error::InvalidParameter(format!("--h = {h}")));
            }
            let gain = ms_gain(scheme, h, lambda, sigma, gamma)?;
            let poly = ms_polynomial(scheme, lambda, sigma, gamma)?;
            let h_star = match h_star_with(scheme, lambda, sigma, gamma, cap) {
                Ok(hs) => hs.to_string(),
                Err(Error::NotMeanSquareStable(_)) => "-1".to_string(),
                Err(e) => return Err(e.into()),
            };
            let text = match output.format {
                Format::Csv => {
                    let mut rows = vec![("gain".to_string(), gain.to_string())];
                    for (k, c) in poly.coefficients.iter().enumerate() {
                        rows.push((format!("c{k}"), c.to_string()));
                    }
                    rows.push(("h_star".to_string(), h_star));
                    key_values(&rows)
                }
                Format::Json => {
                    let doc = serde_json::json!({
                        "scheme": scheme.to_string(),
                        "h": h,
                        "gain": gain,
                        "coefficients": poly.coefficients,
                        "h_star": h_star,
                    });
                    serde_json::to_string_pretty(&doc)? + "\n"
                }
            };
            emit(&output, &text)
        }
        Command::AProbe { gamma, output } => {
            check_gamma(gamma)?;
            let r = a_stability_probe(gamma)?;
            let text = match output.format {
                Format::Csv => key_values(&[
                    ("gamma".into(), r.gamma.to_string()),
                    ("interior_points".into(), r.interior_points.to_string()),
                    ("max_interior".into(), r.max_interior.to_string()),
                    ("boundary_points".into(), r.boundary_points.to_string()),
                    ("max_boundary".into(), r.max_boundary.to_string()),
                    ("far_field".into(), r.far_field.to_string()),
                ]),
                Format::Json => serde_json::to_string_pretty(&r)? + "\n",
            };
            emit(&output, &text)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_numerical() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
