//! `onr`: command-line front end for the onr-core simulator.

mod parse;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use onr_core::bistability::{
    metrics_at_inputs, onr_window, scurve, sweep_atom_number, switch_thresholds, window_metrics,
    SwitchThresholds, WindowConvention,
};
use onr_core::designer::{design_report, optimal_mirror_split, rates_report, DesignInputs};
use onr_core::measurement::{
    measured_metrics, measured_window, read_sweep_file, synthesize_sweep, write_sweep, CountMode,
    ThresholdRule,
};
use onr_core::params::preset;
use onr_core::quantum::{quantum_io_curve, QuantumModel, DEFAULT_DIMENSION_CAP};
use onr_core::semiclassical::output_for_input;
use onr_core::spectrum::{
    fit_neff, symmetric_grid, transmission_spectrum, FitOptions, SpectrumData,
};
use onr_core::units::{flux_to_power, intracavity_photons, mhz, power_to_flux, to_mhz};
use onr_core::{Direction, SystemParams};

#[derive(Parser)]
#[command(
    name = "onr",
    version,
    about = "Few-photon optical nonreciprocity in an asymmetric atom–cavity system"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Parameter preset: paper-fig2 (alias paper), paper-resonant, paper-n3, paper-n14.7.
    #[arg(long, global = true, default_value = "paper-fig2")]
    preset: String,
    /// `key = value` parameter file applied on top of the preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set g=12`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Effective atom number N_eff.
    #[arg(long, global = true)]
    neff: Option<f64>,
    /// Seed for Poisson sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dir {
    Forward,
    Backward,
    Both,
}

impl Dir {
    fn list(self) -> Vec<Direction> {
        match self {
            Dir::Forward => vec![Direction::Forward],
            Dir::Backward => vec![Direction::Backward],
            Dir::Both => Direction::BOTH.to_vec(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Convention {
    Guaranteed,
    Hysteretic,
}

impl From<Convention> for WindowConvention {
    fn from(c: Convention) -> Self {
        match c {
            Convention::Guaranteed => WindowConvention::Guaranteed,
            Convention::Hysteretic => WindowConvention::Hysteretic,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Steady-state input–output curve sampled in the saturation parameter y.
    #[command(
        after_help = "CSV columns: direction,y,input_pW,output_pW,transmission,intracavity_photons,stable"
    )]
    Scurve {
        #[arg(long, value_enum, default_value = "both")]
        direction: Dir,
        #[arg(long, default_value_t = 1e-4)]
        y_min: f64,
        #[arg(long, default_value_t = 1e3)]
        y_max: f64,
        #[arg(long, default_value_t = 600)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Nonreciprocity window: edges in pW, intracavity photon numbers, metrics.
    #[command(
        after_help = "JSON fields: status, convention, n_eff, cooperativity, lower_pW, upper_pW, \
        photons_lower, photons_upper, thresholds, metrics"
    )]
    Window {
        #[arg(long, value_enum, default_value = "guaranteed")]
        convention: Convention,
        /// Power samples for the window averages.
        #[arg(long, default_value_t = 41)]
        samples: usize,
    },
    /// Thresholds, windows and metrics against the atom number.
    #[command(
        after_help = "CSV columns: n_eff,cooperativity,blocking_ratio_db,forward_up_pW,forward_down_pW,\
        backward_up_pW,backward_down_pW,window_lower_pW,window_upper_pW,photons_lower,photons_upper,\
        mean_forward_transmission,mean_forward_incremental_transmission,mean_blocking_ratio_db\n\
        Empty fields mean the quantity does not exist (no bistability or empty window)."
    )]
    SweepNeff {
        #[arg(long, default_value = "3.0,5.2,7.4,9.6,11.8,12.8,14.7")]
        values: String,
        #[arg(long, value_enum, default_value = "guaranteed")]
        convention: Convention,
        #[arg(long, default_value_t = 21)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Forward/backward operating points at given input powers.
    #[command(
        after_help = "Powers: start:stop:step or a,b,c with unit suffix pW (default), nW, uW, mW, W.\n\
        CSV columns: input_pW,forward_output_pW,backward_output_pW,forward_transmission,\
        forward_incremental_transmission,backward_transmission,blocking_ratio_db,forward_photons"
    )]
    Metrics {
        #[arg(long, default_value = "30:110:10pW")]
        powers: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Weak-probe transmission spectrum.
    #[command(
        after_help = "CSV columns: offset_MHz,transmission (offset = probe − cavity frequency)"
    )]
    Spectrum {
        /// Atom–cavity offset in MHz; defaults to the parameter set's Δ − δ.
        #[arg(long)]
        offset_mhz: Option<f64>,
        #[arg(long, default_value_t = 40.0)]
        span_mhz: f64,
        #[arg(long, default_value_t = 401)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit N_eff to a transmission spectrum.
    #[command(after_help = "Input CSV: header offset_MHz,transmission. Output: JSON FitResult.")]
    FitNeff {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        offset_mhz: Option<f64>,
        #[arg(long)]
        fit_amplitude: bool,
        #[arg(long)]
        fit_background: bool,
    },
    /// Cavity design report: transmission, windows, matched-mirror alternative.
    #[command(
        after_help = "Without mirror flags the preset's rates are used. With --optimize the \
        impedance-matched split κ₁ = κ/2, κ₂ = κ/2 − κ_loss is evaluated instead."
    )]
    Design {
        #[arg(long, requires_all = ["t2_ppm", "loss_ppm"])]
        t1_ppm: Option<f64>,
        #[arg(long, requires_all = ["t1_ppm", "loss_ppm"])]
        t2_ppm: Option<f64>,
        #[arg(long, requires_all = ["t1_ppm", "t2_ppm"])]
        loss_ppm: Option<f64>,
        #[arg(long)]
        length_um: Option<f64>,
        #[arg(long)]
        optimize: bool,
        /// Total field decay rate κ/2π for --optimize.
        #[arg(long)]
        kappa_mhz: Option<f64>,
        #[arg(long)]
        kappa_loss_mhz: Option<f64>,
        #[arg(long)]
        target_db: Option<f64>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Master-equation input–output curve compared with the semiclassical roots.
    #[command(
        after_help = "Drive scan: start:stop:count (log-spaced) with unit suffix, default pW.\n\
        CSV columns: direction,input_pW,output_pW,mean_photon_number,top_fock_population,adequate,\
        semiclassical_roots,semiclassical_low_pW,semiclassical_high_pW"
    )]
    QuantumValidate {
        #[arg(long, default_value_t = 1)]
        n_atoms: usize,
        #[arg(long, default_value_t = 20)]
        fock: usize,
        #[arg(long, default_value = "0.01:100:21pW")]
        drive_scan: String,
        #[arg(long, value_enum, default_value = "forward")]
        direction: Dir,
        #[arg(long, default_value_t = DEFAULT_DIMENSION_CAP)]
        cap: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Window and metrics from a measured sweep CSV.
    #[command(
        after_help = "Input CSV: header input_power_pW,forward_counts,backward_counts,repeats.\n\
        Detector: dark=<counts/s>,eff=<0..1>,t=<s>. Output: JSON."
    )]
    Ingest {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "")]
        detector: String,
        /// Window edge: first point above this multiple of the low-power baseline.
        #[arg(long, default_value_t = 5.0)]
        multiple: f64,
        #[arg(long, default_value_t = 3)]
        baseline_points: usize,
        /// Do not subtract the detector dark floor before edge detection.
        #[arg(long)]
        no_dark_subtraction: bool,
    },
    /// Synthetic sweep CSV from the model seen through a detector.
    #[command(
        after_help = "Output CSV: input_power_pW,forward_counts,backward_counts,repeats. \
        --poisson requires --seed."
    )]
    SynthSweep {
        #[arg(long, default_value = "10:1000:10pW")]
        powers: String,
        #[arg(long, default_value = "")]
        detector: String,
        #[arg(long, value_enum, default_value = "guaranteed")]
        convention: Convention,
        #[arg(long)]
        poisson: bool,
        #[arg(long, default_value_t = 20)]
        repeats: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_params(g: &Global) -> Result<SystemParams> {
    let mut p = preset(&g.preset).ok_or_else(|| anyhow!("unknown preset `{}`", g.preset))?;
    if let Some(path) = &g.config {
        p = SystemParams::from_config_file(path, p)
            .with_context(|| format!("reading config {}", path.display()))?;
    }
    if !g.overrides.is_empty() {
        p = SystemParams::from_config_str(&g.overrides.join("\n"), p).context("--set")?;
    }
    if let Some(n) = g.neff {
        p = p.with_n_eff(n)?;
    }
    Ok(p)
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn print_json(value: &impl Serialize) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

/// Shortest round-trip form, in exponent notation outside [1e-4, 1e15).
fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !a.is_finite() {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn flux_of_pw(power_pw: f64, p: &SystemParams) -> Result<f64> {
    Ok(power_to_flux(power_pw * 1e-12, p.wavelength())?)
}

fn pw(flux: f64, p: &SystemParams) -> Result<f64> {
    Ok(flux_to_power(flux, p.wavelength())? * 1e12)
}

fn opt_pw(flux: Option<f64>, p: &SystemParams) -> Result<Option<f64>> {
    flux.map(|f| pw(f, p)).transpose()
}

fn thresholds_json(t: &SwitchThresholds, p: &SystemParams) -> Result<serde_json::Value> {
    Ok(json!({
        "bistable": t.is_bistable(),
        "up_switch_pW": opt_pw(t.up_switch_flux(), p)?,
        "down_switch_pW": opt_pw(t.down_switch_flux(), p)?,
    }))
}

fn cmd_scurve(
    p: &SystemParams,
    dir: Dir,
    y_min: f64,
    y_max: f64,
    n: usize,
    out: &Option<PathBuf>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(output(out)?);
    w.write_record([
        "direction",
        "y",
        "input_pW",
        "output_pW",
        "transmission",
        "intracavity_photons",
        "stable",
    ])?;
    for d in dir.list() {
        let curve = scurve(d, p, y_min, y_max, n)?;
        for s in &curve.samples {
            w.write_record([
                d.to_string(),
                num(s.y),
                num(pw(s.input_flux, p)?),
                num(pw(s.output_flux, p)?),
                num(s.transmission()),
                num(intracavity_photons(s.output_flux, d.output_kappa(p))?),
                s.stable.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_window(p: &SystemParams, conv: WindowConvention, samples: usize) -> Result<()> {
    let w = onr_window(p, conv)?;
    let metrics = if w.is_nonempty() {
        let m = window_metrics(p, &w, samples)?;
        Some(json!({
            "mean_forward_transmission": m.mean_forward_transmission,
            "mean_forward_incremental_transmission": m.mean_forward_incremental_transmission,
            "mean_blocking_ratio_db": m.mean_blocking_ratio_db,
            "min_blocking_ratio_db": m.min_blocking_ratio_db,
            "max_blocking_ratio_db": m.max_blocking_ratio_db,
        }))
    } else {
        None
    };
    print_json(&json!({
        "status": if w.is_nonempty() { "nonreciprocal window" } else { "empty window" },
        "convention": conv,
        "n_eff": p.n_eff(),
        "cooperativity": p.cooperativity(),
        "lower_pW": opt_pw(w.lower, p)?,
        "upper_pW": opt_pw(w.upper, p)?,
        "photons_lower": w.photons_lower,
        "photons_upper": w.photons_upper,
        "thresholds": {
            "forward": thresholds_json(&switch_thresholds(Direction::Forward, p), p)?,
            "backward": thresholds_json(&switch_thresholds(Direction::Backward, p), p)?,
        },
        "metrics": metrics,
    }))
}

fn cmd_sweep(
    p: &SystemParams,
    values: &str,
    conv: WindowConvention,
    samples: usize,
    out: &Option<PathBuf>,
) -> Result<()> {
    let list = parse::list(values)?;
    let sweep = sweep_atom_number(p, &list, conv, samples)?;
    let mut w = csv::Writer::from_writer(output(out)?);
    w.write_record([
        "n_eff",
        "cooperativity",
        "blocking_ratio_db",
        "forward_up_pW",
        "forward_down_pW",
        "backward_up_pW",
        "backward_down_pW",
        "window_lower_pW",
        "window_upper_pW",
        "photons_lower",
        "photons_upper",
        "mean_forward_transmission",
        "mean_forward_incremental_transmission",
        "mean_blocking_ratio_db",
    ])?;
    for r in &sweep.rows {
        let q = p.with_n_eff(r.n_eff)?;
        let m = r.metrics.as_ref();
        w.write_record([
            num(r.n_eff),
            num(r.cooperativity),
            num(r.blocking_ratio_simplified_db),
            opt(opt_pw(r.forward.up_switch_flux(), &q)?),
            opt(opt_pw(r.forward.down_switch_flux(), &q)?),
            opt(opt_pw(r.backward.up_switch_flux(), &q)?),
            opt(opt_pw(r.backward.down_switch_flux(), &q)?),
            opt(opt_pw(r.window.lower, &q)?),
            opt(opt_pw(r.window.upper, &q)?),
            opt(r.window.photons_lower),
            opt(r.window.photons_upper),
            opt(m.map(|m| m.mean_forward_transmission)),
            opt(m.map(|m| m.mean_forward_incremental_transmission)),
            opt(m.map(|m| m.mean_blocking_ratio_db)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_metrics(p: &SystemParams, powers: &str, out: &Option<PathBuf>) -> Result<()> {
    let powers = parse::powers(powers)?;
    let fluxes = powers
        .iter()
        .map(|&x| flux_of_pw(x, p))
        .collect::<Result<Vec<_>>>()?;
    let samples = metrics_at_inputs(p, &fluxes)?;
    let mut w = csv::Writer::from_writer(output(out)?);
    w.write_record([
        "input_pW",
        "forward_output_pW",
        "backward_output_pW",
        "forward_transmission",
        "forward_incremental_transmission",
        "backward_transmission",
        "blocking_ratio_db",
        "forward_photons",
    ])?;
    for (s, power) in samples.iter().zip(&powers) {
        w.write_record([
            num(*power),
            num(pw(s.forward_output, p)?),
            num(pw(s.backward_output, p)?),
            num(s.forward_transmission),
            num(s.forward_incremental_transmission),
            num(s.backward_transmission),
            num(s.blocking_ratio_db),
            num(s.forward_photons),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_design(p: &SystemParams, c: &Command) -> Result<()> {
    let Command::Design {
        t1_ppm,
        t2_ppm,
        loss_ppm,
        length_um,
        optimize,
        kappa_mhz,
        kappa_loss_mhz,
        target_db,
        format,
    } = c
    else {
        unreachable!()
    };
    let mut base = *p;
    if let Some(l) = length_um {
        let mut raw = base.raw();
        raw.cavity_length = l * 1e-6;
        base = SystemParams::new(raw)?;
    }
    let report = if *optimize {
        let kappa = kappa_mhz.map(mhz).unwrap_or(base.kappa());
        let loss = kappa_loss_mhz.map(mhz).unwrap_or(base.kappa_loss());
        let split = optimal_mirror_split(kappa, loss)?;
        rates_report(
            &base.with_mirrors(split.kappa1, split.kappa2, split.kappa_loss)?,
            *target_db,
        )?
    } else if let (Some(t1), Some(t2), Some(loss)) = (t1_ppm, t2_ppm, loss_ppm) {
        design_report(&DesignInputs {
            t1_ppm: *t1,
            t2_ppm: *t2,
            loss_ppm: *loss,
            cavity_length: base.cavity_length(),
            atoms: base,
            target_blocking_db: *target_db,
        })?
    } else {
        if kappa_mhz.is_some() || kappa_loss_mhz.is_some() {
            bail!("--kappa-mhz and --kappa-loss-mhz apply only with --optimize");
        }
        rates_report(&base, *target_db)?
    };
    match format {
        Format::Json => print_json(&report),
        Format::Text => {
            print!("{report}");
            Ok(())
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_quantum(
    p: &SystemParams,
    n_atoms: usize,
    fock: usize,
    scan: &str,
    dir: Dir,
    cap: usize,
    out: &Option<PathBuf>,
) -> Result<()> {
    let q = p.with_n_eff(n_atoms as f64)?;
    let powers = parse::log_powers(scan)?;
    let fluxes = powers
        .iter()
        .map(|&x| flux_of_pw(x, &q))
        .collect::<Result<Vec<_>>>()?;
    let mut w = csv::Writer::from_writer(output(out)?);
    w.write_record([
        "direction",
        "input_pW",
        "output_pW",
        "mean_photon_number",
        "top_fock_population",
        "adequate",
        "semiclassical_roots",
        "semiclassical_low_pW",
        "semiclassical_high_pW",
    ])?;
    for d in dir.list() {
        let template = QuantumModel::new(q, n_atoms, fock, d)?.with_dimension_cap(cap)?;
        let curve = quantum_io_curve(&template, &fluxes)?;
        for (pt, power) in curve.iter().zip(&powers) {
            let roots = output_for_input(pt.input_flux, d, &q)?;
            let stable: Vec<f64> = roots
                .iter()
                .filter(|r| r.stable)
                .map(|r| r.output_flux)
                .collect();
            let lo = stable.first().copied().unwrap_or(roots[0].output_flux);
            let hi = stable
                .last()
                .copied()
                .unwrap_or(roots[roots.len() - 1].output_flux);
            w.write_record([
                d.to_string(),
                num(*power),
                num(pw(pt.output_flux, &q)?),
                num(pt.mean_photon_number),
                num(pt.top_fock_population),
                pt.adequate.to_string(),
                roots.len().to_string(),
                num(pw(lo, &q)?),
                num(pw(hi, &q)?),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_ingest(
    p: &SystemParams,
    input: &Path,
    det: &str,
    multiple: f64,
    baseline: usize,
    no_dark: bool,
) -> Result<()> {
    let det = parse::detector(det)?;
    let records = read_sweep_file(input)?;
    let rule = ThresholdRule {
        multiple,
        baseline_points: baseline,
        dark_counts: if no_dark { 0.0 } else { det.dark_floor() },
    };
    let window = measured_window(&records, &rule)?;
    let range = match (window.lower, window.upper) {
        (Some(l), Some(u)) if l < u => Some((l, u)),
        _ => None,
    };
    let metrics = measured_metrics(&records, &det, p.wavelength(), range)?;
    let to_pw = |x: Option<f64>| x.map(|v| v * 1e12);
    print_json(&json!({
        "records": records.len(),
        "detector": det,
        "threshold_rule": rule,
        "window": {
            "status": window.status(),
            "lower_pW": to_pw(window.lower),
            "upper_pW": to_pw(window.upper),
            "forward_switch_pW": to_pw(window.forward_switch),
            "backward_switch_pW": to_pw(window.backward_switch),
        },
        "metrics": {
            "range_pW": range.map(|(l, u)| [l * 1e12, u * 1e12]),
            "mean_forward_transmission": metrics.mean_forward_transmission,
            "mean_blocking_ratio_db": metrics.mean_blocking_ratio_db,
            "points": metrics.points.iter().map(|m| json!({
                "input_pW": m.input_power * 1e12,
                "forward_transmission": m.forward_transmission,
                "backward_transmission": m.backward_transmission,
                "apparent_blocking_db": m.apparent_blocking_db,
            })).collect::<Vec<_>>(),
        },
    }))
}

fn run(cli: Cli) -> Result<()> {
    let p = load_params(&cli.global)?;
    match &cli.command {
        Command::Scurve {
            direction,
            y_min,
            y_max,
            samples,
            out,
        } => cmd_scurve(&p, *direction, *y_min, *y_max, *samples, out),
        Command::Window {
            convention,
            samples,
        } => cmd_window(&p, (*convention).into(), *samples),
        Command::SweepNeff {
            values,
            convention,
            samples,
            out,
        } => cmd_sweep(&p, values, (*convention).into(), *samples, out),
        Command::Metrics { powers, out } => cmd_metrics(&p, powers, out),
        Command::Spectrum {
            offset_mhz,
            span_mhz,
            points,
            out,
        } => {
            let offset = offset_mhz.map(mhz).unwrap_or(p.atom_cavity_offset());
            let s = transmission_spectrum(&p, offset, &symmetric_grid(mhz(*span_mhz), *points))?;
            let mut w = output(out)?;
            s.write_csv(&mut w)?;
            w.flush()?;
            Ok(())
        }
        Command::FitNeff {
            input,
            offset_mhz,
            fit_amplitude,
            fit_background,
        } => {
            let file = File::open(input).with_context(|| format!("opening {}", input.display()))?;
            let data = SpectrumData::read_csv(file)?;
            let opts = FitOptions {
                atom_cavity_offset: offset_mhz.map(mhz).unwrap_or(p.atom_cavity_offset()),
                fit_amplitude: *fit_amplitude,
                fit_background: *fit_background,
            };
            let fit = fit_neff(&data, &p, opts)?;
            print_json(&json!({
                "n_eff_hat": fit.n_eff_hat,
                "confidence_halfwidth": fit.confidence_halfwidth,
                "residual_rms": fit.residual_rms,
                "amplitude": fit.amplitude,
                "background": fit.background,
                "atom_cavity_offset_MHz": to_mhz(opts.atom_cavity_offset),
                "points": data.points().len(),
            }))
        }
        c @ Command::Design { .. } => cmd_design(&p, c),
        Command::QuantumValidate {
            n_atoms,
            fock,
            drive_scan,
            direction,
            cap,
            out,
        } => cmd_quantum(&p, *n_atoms, *fock, drive_scan, *direction, *cap, out),
        Command::Ingest {
            input,
            detector,
            multiple,
            baseline_points,
            no_dark_subtraction,
        } => cmd_ingest(
            &p,
            input,
            detector,
            *multiple,
            *baseline_points,
            *no_dark_subtraction,
        ),
        Command::SynthSweep {
            powers,
            detector,
            convention,
            poisson,
            repeats,
            out,
        } => {
            let mode = match (*poisson, cli.global.seed) {
                (false, _) => CountMode::Expected,
                (true, Some(seed)) => CountMode::Poisson { seed },
                (true, None) => bail!("--poisson needs an explicit --seed"),
            };
            let recs = synthesize_sweep(
                &p,
                &parse::powers(powers)?
                    .iter()
                    .map(|x| x * 1e-12)
                    .collect::<Vec<_>>(),
                &parse::detector(detector)?,
                (*convention).into(),
                mode,
                *repeats,
            )?;
            let mut w = output(out)?;
            write_sweep(&recs, &mut w)?;
            w.flush()?;
            Ok(())
        }
    }
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    use onr_core::Error as E;
    match e.downcast_ref::<E>() {
        Some(E::Domain(_)) => "domain",
        Some(E::InvalidParam { .. }) => "invalid_parameter",
        Some(E::Infeasible(_)) => "infeasible",
        Some(E::Fit(_)) => "fit",
        Some(E::EmptyWindow) => "empty_window",
        Some(E::DimensionCap { .. }) => "dimension_cap",
        Some(E::Solver(_)) => "solver",
        Some(E::Config { .. }) => "config",
        Some(E::Ingest(_)) => "ingest",
        Some(E::Csv(_)) => "csv",
        Some(E::Io(_)) => "io",
        None => "usage",
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    let pipe = |k: io::ErrorKind| k == io::ErrorKind::BrokenPipe;
    e.chain().any(|c| {
        if let Some(err) = c.downcast_ref::<io::Error>() {
            return pipe(err.kind());
        }
        if let Some(err) = c.downcast_ref::<serde_json::Error>() {
            return err.io_error_kind().is_some_and(pipe);
        }
        if let Some(err) = c.downcast_ref::<csv::Error>() {
            return matches!(err.kind(), csv::ErrorKind::Io(io) if pipe(io.kind()));
        }
        match c.downcast_ref::<onr_core::Error>() {
            Some(onr_core::Error::Io(io)) => pipe(io.kind()),
            Some(onr_core::Error::Csv(err)) => {
                matches!(err.kind(), csv::ErrorKind::Io(io) if pipe(io.kind()))
            }
            _ => false,
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            let rows = match e.downcast_ref::<onr_core::Error>() {
                Some(onr_core::Error::Ingest(rows)) => Some(rows.clone()),
                _ => None,
            };
            let report = json!({
                "error": error_kind(&e),
                "message": format!("{e:#}"),
                "rows": rows,
            });
            eprintln!(
                "{}",
                serde_json::to_string_pretty(&report).unwrap_or_else(|_| e.to_string())
            );
            ExitCode::FAILURE
        }
    }
}
