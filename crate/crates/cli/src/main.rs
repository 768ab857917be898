// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};

use fcs_qkd::optimizer::{optimize_params, SearchBox};
use fcs_qkd::simulator::{coverage_experiment, coverage_tolerance};
use fcs_qkd::{key_rate, run_protocol, ChannelParams, ProtocolParams, SimConfig};

mod config;
mod output;

use config::Config;
use output::{fmt_num, round_json};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or invalid configuration. Exit code 2.
    Config(String),
    /// A computation failed on valid input. Exit code 3.
    Numeric(String),
    /// Writing the output failed. Exit code 1.
    Io(io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric error: {m}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<fcs_qkd::Error> for CliError {
    fn from(e: fcs_qkd::Error) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

#[derive(Parser)]
#[command(version, about = "Finite-key rate bounds, parameter sweeps and protocol simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimized key rate over attenuation for each correlation range (CSV).
    Sweep(Common),
    /// Key rate and every intermediate bound at one operating point (JSON).
    Point(Common),
    /// Monte Carlo run of the protocol; one-line JSON summary.
    Simulate(Common),
    /// Empirical failure rates of the concentration bounds (CSV table).
    Coverage(Common),
}

/// Flags override values from the config file.
#[derive(Args, Clone)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Write to this file instead of stdout.
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Total correlation range r1 + r2 (applied as r1 = value, r2 = 0).
    #[arg(long, value_name = "INT")]
    r_total: Option<usize>,
    #[arg(long, value_name = "DB")]
    attenuation_db: Option<f64>,
    /// Optimize µ and P_est instead of using the configured values.
    #[arg(long)]
    optimize: bool,
}

impl Common {
    fn load(&self) -> Result<Config, CliError> {
        let mut cfg = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        if let Some(seed) = self.seed {
            cfg.sim.seed = seed;
            cfg.coverage.seed = seed;
        }
        if let Some(r) = self.r_total {
            cfg.protocol.r1 = r;
            cfg.protocol.r2 = 0;
            cfg.sweep.range_list = vec![r];
        }
        if let Some(db) = self.attenuation_db {
            cfg.channel.attenuation_db = db;
            cfg.sweep.attenuation_start = db;
            cfg.sweep.attenuation_stop = db;
        }
        if self.optimize {
            cfg.protocol.optimize = true;
        }
        Ok(cfg)
    }

    fn sink(&self) -> Result<Box<dyn Write>, CliError> {
        Ok(match &self.output {
            Some(path) => Box::new(BufWriter::new(File::create(path)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }
}

struct SweepRow {
    r_total: usize,
    attenuation_db: f64,
    mu_opt: f64,
    p_est_opt: f64,
    n_ph_bar: f64,
    key_length: f64,
    rate: f64,
}

fn optimized_point(
    template: &ProtocolParams,
    channel: &ChannelParams,
) -> Result<(ProtocolParams, fcs_qkd::KeyRateResult), CliError> {
    let opt = optimize_params(template, channel, SearchBox::default())?;
    let params = ProtocolParams {
        mu: opt.mu_opt,
        p_est: opt.p_est_opt,
        ..*template
    };
    let result = key_rate(&params, channel)?;
    Ok((params, result))
}

/// Keeps leading zero-rate rows and the first zero after a positive rate.
fn truncate_curve(rows: &mut Vec<SweepRow>) {
    if let Some(first_pos) = rows.iter().position(|r| r.rate > 0.0) {
        if let Some(off) = rows[first_pos..].iter().position(|r| r.rate <= 0.0) {
            rows.truncate(first_pos + off + 1);
        }
    }
}

fn cmd_sweep(args: &Common) -> Result<(), CliError> {
    let cfg = args.load()?;
    let template = cfg.protocol()?;
    let channel = cfg.channel()?;
    let attenuations = cfg.attenuations()?;
    let ranges = cfg.sweep.range_list.clone();

    let cells: Vec<(usize, f64)> = ranges
        .iter()
        .flat_map(|&r| attenuations.iter().map(move |&db| (r, db)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(r, db)| {
            let t = ProtocolParams {
                r1: r,
                r2: 0,
                ..template
            };
            let ch = ChannelParams {
                attenuation_db: db,
                ..channel
            };
            let (params, res) = optimized_point(&t, &ch)?;
            Ok(SweepRow {
                r_total: r,
                attenuation_db: db,
                mu_opt: params.mu,
                p_est_opt: params.p_est,
                n_ph_bar: res.n_ph_bar,
                key_length: res.key_length,
                rate: res.rate,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut out = args.sink()?;
    if ranges.is_empty() {
        return Ok(out.flush()?);
    }
    writeln!(out, "r_total,attenuation_db,mu_opt,p_est_opt,n_ph_bar,key_length,rate")?;
    let mut rows = rows.into_iter().peekable();
    for &r in &ranges {
        let mut curve: Vec<SweepRow> = Vec::new();
        while let Some(row) = rows.next_if(|row| row.r_total == r) {
            curve.push(row);
        }
        truncate_curve(&mut curve);
        for row in curve {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                row.r_total,
                fmt_num(row.attenuation_db),
                fmt_num(row.mu_opt),
                fmt_num(row.p_est_opt),
                fmt_num(row.n_ph_bar),
                fmt_num(row.key_length),
                fmt_num(row.rate)
            )?;
        }
    }
    Ok(out.flush()?)
}

fn cmd_point(args: &Common) -> Result<(), CliError> {
    let cfg = args.load()?;
    let template = cfg.protocol()?;
    let channel = cfg.channel()?;
    let (params, result) = if cfg.protocol.optimize {
        optimized_point(&template, &channel)?
    } else {
        (template, key_rate(&template, &channel)?)
    };
    let mut record = json!({
        "n_rounds": params.n_rounds,
        "r1": params.r1,
        "r2": params.r2,
        "attenuation_db": channel.attenuation_db,
        "mu": params.mu,
        "p_est": params.p_est,
        "optimized": cfg.protocol.optimize,
        "p0a_floor": params.p0a_floor(),
        "p0b_floor": params.p0b_floor(),
    });
    let detail = serde_json::to_value(&result).map_err(|e| CliError::Numeric(e.to_string()))?;
    if let (Value::Object(rec), Value::Object(det)) = (&mut record, detail) {
        rec.extend(det);
    }
    round_json(&mut record);
    let mut out = args.sink()?;
    writeln!(
        out,
        "{}",
        serde_json::to_string_pretty(&record).expect("JSON values serialize")
    )?;
    Ok(out.flush()?)
}

fn cmd_simulate(args: &Common) -> Result<(), CliError> {
    let cfg = args.load()?;
    let protocol = ProtocolParams {
        n_rounds: cfg.sim.n_rounds,
        ..cfg.protocol()?
    };
    let (kernel_a, kernel_b) = cfg.kernels()?;
    let config = SimConfig {
        seed: cfg.sim.seed,
        n_rounds: cfg.sim.n_rounds,
        kernel_a,
        kernel_b,
        channel: cfg.channel()?,
        protocol,
        thresholds: cfg.thresholds()?,
    };
    let r = run_protocol(&config)?;
    let mut summary = json!({
        "seed": config.seed,
        "n_rounds": config.n_rounds,
        "n_sig": r.tallies.n_sig,
        "n_est": r.n_est,
        "n_est_bit": r.tallies.n_est_bit,
        "n_sig_tol": r.tallies.n_sig_tol,
        "n_est_tol": r.tallies.n_est_tol,
        "total_clicks": r.total_clicks,
        "double_clicks": r.double_clicks,
        "sifted_errors": r.sifted_errors(),
        "aborted": r.aborted,
        "z_n_sig": r.z_scores.n_sig,
        "z_n_est": r.z_scores.n_est,
        "z_n_est_bit": r.z_scores.n_est_bit,
    });
    round_json(&mut summary);
    let mut out = args.sink()?;
    writeln!(out, "{summary}")?;
    Ok(out.flush()?)
}

fn cmd_coverage(args: &Common) -> Result<(), CliError> {
    let cfg = args.load()?;
    let suite = cfg.coverage_suite()?;
    let c = &cfg.coverage;
    let mut out = args.sink()?;
    writeln!(out, "bound,sequence,n,epsilon,trials,violation_fraction,tolerance,pass")?;
    let mut seed = c.seed;
    for (kind, spec) in suite {
        for &n in &c.n {
            for &eps in &c.eps {
                let res = coverage_experiment(kind, spec, n, eps, c.trials, seed)?;
                seed = seed.wrapping_add(1);
                let tol = coverage_tolerance(eps, c.trials);
                writeln!(
                    out,
                    "{},{},{n},{},{},{},{},{}",
                    kind.label(),
                    spec.label(),
                    fmt_num(eps),
                    c.trials,
                    fmt_num(res.violation_fraction),
                    fmt_num(tol),
                    if res.violation_fraction <= tol { "pass" } else { "fail" }
                )?;
            }
        }
    }
    Ok(out.flush()?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Sweep(a) => cmd_sweep(a),
        Command::Point(a) => cmd_point(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Coverage(a) => cmd_coverage(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fcs-qkd: {e}");
            ExitCode::from(match e {
                CliError::Config(_) => 2,
                CliError::Numeric(_) => 3,
                CliError::Io(_) => 1,
            })
        }
    }
}
