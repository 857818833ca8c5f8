//! Command implementations behind the binary: estimate, simulate, verify.
//!
//! Commands return `Ok(pass)` so the binary can map outcomes onto its exit
//! contract: 0 = success and certified, 1 = certification failure,
//! 2 = input/validation error (any `Err`).

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Serialize;

use crate::channel::Channel;
use crate::datagen;
use crate::dist::{Dist, ExtendedReal};
use crate::em::{self, MonotonicityReport, StopCriteria, StopReason};
use crate::io;

#[derive(Debug, Clone)]
pub enum Theta0Source {
    Uniform,
    File(PathBuf),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub channel_path: PathBuf,
    pub tau_path: Option<PathBuf>,
    pub samples_path: Option<PathBuf>,
    pub theta0: Theta0Source,
    pub stop: StopCriteria,
    pub output_dir: PathBuf,
    pub seed: Option<u64>,
    pub emit_plot_data: bool,
}

#[derive(Serialize)]
struct EstimateSummary<'a> {
    theta: &'a Dist,
    excluded: &'a [usize],
    converged: bool,
    stop_reason: StopReason,
    iterations: usize,
    final_kl: ExtendedReal,
    final_log_lik: ExtendedReal,
}

#[derive(Serialize)]
struct CertificationFile<'a> {
    monotone_tol: f64,
    identity_tol: f64,
    #[serde(flatten)]
    report: &'a MonotonicityReport,
}

fn load_channel(path: &Path) -> anyhow::Result<Channel> {
    io::load_channel(path).with_context(|| format!("loading channel from {}", path.display()))
}

fn load_observations(config: &RunConfig, channel: &Channel) -> anyhow::Result<Dist> {
    match (&config.tau_path, &config.samples_path) {
        (Some(path), None) => io::load_dist(path)
            .with_context(|| format!("loading output distribution from {}", path.display())),
        (None, Some(path)) => {
            let samples = io::load_samples(path)
                .with_context(|| format!("loading samples from {}", path.display()))?;
            Dist::from_samples(&samples, channel.output_count())
                .with_context(|| format!("tabulating samples from {}", path.display()))
        }
        _ => bail!("exactly one of the output distribution and the sample file must be given"),
    }
}

fn load_theta0(source: &Theta0Source, channel: &Channel) -> anyhow::Result<Dist> {
    match source {
        Theta0Source::Uniform => Ok(Dist::uniform(channel.input_count())),
        Theta0Source::File(path) => io::load_dist(path)
            .with_context(|| format!("loading initial estimate from {}", path.display())),
    }
}

fn print_certification(report: &MonotonicityReport) {
    let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
    println!(
        "kl non-increase:             {} (worst increase {:e})",
        verdict(report.worst_kl_increase <= em::MONOTONE_TOL),
        report.worst_kl_increase
    );
    println!(
        "log-likelihood non-decrease: {} (worst decrease {:e})",
        verdict(report.worst_log_lik_decrease <= em::MONOTONE_TOL),
        report.worst_log_lik_decrease
    );
    println!(
        "kl / log-likelihood match:   {} (worst gap {:e})",
        verdict(report.worst_identity_gap <= em::IDENTITY_TOL),
        report.worst_identity_gap
    );
    if let Some(v) = &report.first_violation {
        println!(
            "first violation: record {} ({:?}, magnitude {:e})",
            v.index, v.kind, v.magnitude
        );
    }
    println!("certification: {}", verdict(report.pass));
}

/// Estimate the input distribution, write the trace and reports, certify.
pub fn cmd_estimate(config: &RunConfig) -> anyhow::Result<bool> {
    config.stop.validate()?;
    let channel = load_channel(&config.channel_path)?;
    let tau = load_observations(config, &channel)?;
    let theta0 = load_theta0(&config.theta0, &channel)?;

    let trace = em::run(&channel, &theta0, &tau, &config.stop).context("estimation failed")?;
    // reconstruct the pruning for reporting; cannot fail after a successful run
    let (_, kept) = channel.prune_inputs(&tau)?;
    let excluded: Vec<usize> =
        (0..channel.input_count()).filter(|x| !kept.contains(x)).collect();

    let report = trace.certify();
    let final_rec = trace.final_record();
    let summary = EstimateSummary {
        theta: &final_rec.theta,
        excluded: &excluded,
        converged: trace.converged,
        stop_reason: trace.stop_reason,
        iterations: trace.steps(),
        final_kl: final_rec.kl,
        final_log_lik: final_rec.log_lik,
    };

    let dir = &config.output_dir;
    fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    io::atomic_write(
        &dir.join("trace.jsonl"),
        io::records_to_jsonl(&trace.records)?.as_bytes(),
    )?;
    io::atomic_write(
        &dir.join("trace.csv"),
        io::records_to_csv(&trace.records).as_bytes(),
    )?;
    io::atomic_write(
        &dir.join("theta_hat.json"),
        format!("{}\n", io::to_json_line(&summary)?).as_bytes(),
    )?;
    let cert = CertificationFile {
        monotone_tol: em::MONOTONE_TOL,
        identity_tol: em::IDENTITY_TOL,
        report: &report,
    };
    io::atomic_write(
        &dir.join("certification.json"),
        format!("{}\n", io::to_json_line(&cert)?).as_bytes(),
    )?;
    if config.emit_plot_data {
        io::atomic_write(
            &dir.join("plot_data.csv"),
            io::plot_data_csv(&trace.records).as_bytes(),
        )?;
    }

    println!(
        "channel: {} inputs → {} outputs ({})",
        channel.input_count(),
        channel.output_count(),
        config.channel_path.display()
    );
    println!(
        "estimate: {} after {} steps (stop: {})",
        if trace.converged { "converged" } else { "did not converge" },
        trace.steps(),
        trace.stop_reason
    );
    println!("final kl: {}   final log-likelihood: {}", final_rec.kl, final_rec.log_lik);
    println!("theta_hat: {}", io::to_json_line(&final_rec.theta)?);
    if !excluded.is_empty() {
        println!("excluded inputs (cannot explain any observation): {excluded:?}");
    }
    print_certification(&report);
    println!("wrote {}", dir.join("trace.jsonl").display());
    Ok(report.pass)
}

/// Sample a synthetic run and write it next to its observations file.
pub fn cmd_simulate(config: &RunConfig, true_theta_path: &Path, n: usize) -> anyhow::Result<()> {
    let channel = load_channel(&config.channel_path)?;
    let theta_star = io::load_dist(true_theta_path)
        .with_context(|| format!("loading true distribution from {}", true_theta_path.display()))?;
    let seed = config.seed.unwrap_or(0);
    let run = datagen::sample_run(&channel, &theta_star, n, seed).context("sampling failed")?;

    let dir = &config.output_dir;
    fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    io::atomic_write(
        &dir.join("run.json"),
        format!("{}\n", io::to_json_line(&run)?).as_bytes(),
    )?;
    let mut obs = String::with_capacity(run.ys.len() * 2);
    for y in &run.ys {
        obs.push_str(&y.to_string());
        obs.push('\n');
    }
    io::atomic_write(&dir.join("observations.txt"), obs.as_bytes())?;

    let tau = datagen::observed_tau(&run, channel.output_count())?;
    println!(
        "sampled {} observations (seed {}, generator {})",
        n,
        seed,
        datagen::GENERATOR_ID
    );
    println!("observed frequencies: {}", io::to_json_line(&tau)?);
    println!("wrote {}", dir.join("run.json").display());
    Ok(())
}

/// Re-check the monotonicity guarantee on a previously written trace.
pub fn cmd_verify(trace_path: &Path) -> anyhow::Result<bool> {
    let text = fs::read_to_string(trace_path)
        .with_context(|| format!("reading trace from {}", trace_path.display()))?;
    let records = io::records_from_jsonl(&text)
        .with_context(|| format!("parsing trace from {}", trace_path.display()))?;
    if records.is_empty() {
        bail!("trace {} has no records", trace_path.display());
    }
    let report = em::certify_monotone(&records);
    println!("trace: {} records ({} steps)", records.len(), report.steps);
    print_certification(&report);
    Ok(report.pass)
}
