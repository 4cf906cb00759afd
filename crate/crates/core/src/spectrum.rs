//! Weak-probe transmission spectra (vacuum Rabi splitting) and atom-number
//! fitting.

use std::io::Read;

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::params::SystemParams;
use crate::semiclassical::linear_transmission;
use crate::units::{mhz, to_mhz};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumPoint {
    /// ω_p − ω_cav, rad/s.
    pub probe_offset: f64,
    /// Transmission, or raw counts for uncalibrated data. Background-subtracted
    /// noisy values may dip below zero.
    pub transmission: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumData {
    points: Vec<SpectrumPoint>,
}

impl SpectrumData {
    pub fn new(points: Vec<SpectrumPoint>) -> Result<Self> {
        if points
            .windows(2)
            .any(|w| !(w[1].probe_offset > w[0].probe_offset))
        {
            return Err(domain("probe offsets must be strictly increasing"));
        }
        if let Some(bad) = points.iter().find(|p| !p.transmission.is_finite()) {
            return Err(domain(format!(
                "transmission must be finite, got {}",
                bad.transmission
            )));
        }
        Ok(SpectrumData { points })
    }

    pub fn points(&self) -> &[SpectrumPoint] {
        &self.points
    }

    /// Offsets of local transmission maxima, ascending.
    pub fn peak_offsets(&self) -> Vec<f64> {
        let pts = &self.points;
        (1..pts.len().saturating_sub(1))
            .filter(|&i| {
                pts[i].transmission > pts[i - 1].transmission
                    && pts[i].transmission >= pts[i + 1].transmission
            })
            .map(|i| pts[i].probe_offset)
            .collect()
    }

    /// Reads the two-column CSV `offset_MHz,transmission_or_counts` (header
    /// required).
    pub fn read_csv(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || headers[0].parse::<f64>().is_ok() {
            return Err(domain(
                "spectrum CSV needs the header `offset_MHz,transmission_or_counts`",
            ));
        }
        let mut points = Vec::new();
        let mut errors = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let parsed = (|| -> std::result::Result<SpectrumPoint, String> {
                if record.len() != 2 {
                    return Err(format!("expected 2 fields, got {}", record.len()));
                }
                let num = |i: usize| {
                    record[i]
                        .parse::<f64>()
                        .map_err(|_| format!("`{}` is not a number", &record[i]))
                };
                Ok(SpectrumPoint {
                    probe_offset: mhz(num(0)?),
                    transmission: num(1)?,
                })
            })();
            match parsed {
                Ok(p) => points.push(p),
                Err(message) => errors.push(crate::error::RowError { line, message }),
            }
        }
        if !errors.is_empty() {
            return Err(Error::Ingest(errors));
        }
        Self::new(points)
    }

    pub fn write_csv(&self, writer: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["offset_MHz", "transmission"])?;
        for p in &self.points {
            w.write_record([
                to_mhz(p.probe_offset).to_string(),
                p.transmission.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Weak-probe transmission at one probe offset x = ω_p − ω_cav, with the atomic
/// line sitting `atom_cavity_offset` = ω_at − ω_cav away from the cavity.
pub fn transmission_at(p: &SystemParams, atom_cavity_offset: f64, probe_offset: f64) -> f64 {
    let q = p
        .with_detunings(atom_cavity_offset - probe_offset, -probe_offset)
        .expect("finite detunings");
    linear_transmission(&q)
}

/// Linear transmission spectrum over a strictly increasing probe grid.
pub fn transmission_spectrum(
    p: &SystemParams,
    atom_cavity_offset: f64,
    probe_grid: &[f64],
) -> Result<SpectrumData> {
    SpectrumData::new(
        probe_grid
            .iter()
            .map(|&x| SpectrumPoint {
                probe_offset: x,
                transmission: transmission_at(p, atom_cavity_offset, x),
            })
            .collect(),
    )
}

/// `n` evenly spaced offsets over `[-span, span]`.
pub fn symmetric_grid(span: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| -span + 2.0 * span * i as f64 / (n.max(2) - 1) as f64)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitOptions {
    /// ω_at − ω_cav of the measurement, rad/s.
    pub atom_cavity_offset: f64,
    /// Fit a global scale factor (uncalibrated or count data).
    pub fit_amplitude: bool,
    /// Fit a constant background (e.g. detector dark counts).
    pub fit_background: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            atom_cavity_offset: 0.0,
            fit_amplitude: false,
            fit_background: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitResult {
    pub n_eff_hat: f64,
    pub residual_rms: f64,
    /// Half-width of the N_eff interval over which χ² rises by one, with the
    /// noise variance estimated from the residuals.
    pub confidence_halfwidth: f64,
    pub amplitude: f64,
    pub background: f64,
}

/// Coarse grid of atom numbers scanned before refinement.
fn neff_grid() -> Vec<f64> {
    let mut g = vec![0.0];
    let (lo, hi, n) = (-3.0f64, 3.0f64, 241);
    g.extend((0..n).map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (n - 1) as f64)));
    g
}

struct Profile<'a> {
    data: &'a SpectrumData,
    params: SystemParams,
    opts: FitOptions,
}

impl Profile<'_> {
    /// Residual sum of squares at `n` with the linear nuisance parameters
    /// (amplitude, background) profiled out in closed form.
    fn eval(&self, n: f64) -> (f64, f64, f64) {
        let p = self.params.with_n_eff(n).expect("n ≥ 0");
        let model: Vec<f64> = self
            .data
            .points
            .iter()
            .map(|pt| transmission_at(&p, self.opts.atom_cavity_offset, pt.probe_offset))
            .collect();
        let ys: Vec<f64> = self.data.points.iter().map(|pt| pt.transmission).collect();
        let m = ys.len() as f64;
        let (amp, bg) = match (self.opts.fit_amplitude, self.opts.fit_background) {
            (false, false) => (1.0, 0.0),
            (true, false) => {
                let sxy: f64 = model.iter().zip(&ys).map(|(x, y)| x * y).sum();
                let sxx: f64 = model.iter().map(|x| x * x).sum();
                (if sxx > 0.0 { sxy / sxx } else { 0.0 }, 0.0)
            }
            (false, true) => {
                let bg = ys.iter().zip(&model).map(|(y, x)| y - x).sum::<f64>() / m;
                (1.0, bg)
            }
            (true, true) => {
                let mx = model.iter().sum::<f64>() / m;
                let my = ys.iter().sum::<f64>() / m;
                let sxy: f64 = model
                    .iter()
                    .zip(&ys)
                    .map(|(x, y)| (x - mx) * (y - my))
                    .sum();
                let sxx: f64 = model.iter().map(|x| (x - mx).powi(2)).sum();
                let a = if sxx > 0.0 { sxy / sxx } else { 0.0 };
                (a, my - a * mx)
            }
        };
        let ssr = model
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - amp * x - bg).powi(2))
            .sum();
        (ssr, amp, bg)
    }

    fn ssr(&self, n: f64) -> f64 {
        self.eval(n).0
    }
}

/// Golden-section minimum over a linear bracket.
fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo <= 1e-13 * hi.abs().max(1e-12) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}

/// Fits the effective atom number to a spectrum with g, γ, κ's known from
/// `known` (its `n_eff` is ignored): log-grid scan of N_eff followed by
/// golden-section refinement around the best grid point.
pub fn fit_neff(
    spectrum: &SpectrumData,
    known: &SystemParams,
    opts: FitOptions,
) -> Result<FitResult> {
    let pts = spectrum.points();
    if pts.len() < 5 {
        return Err(Error::Fit(format!(
            "need at least 5 spectrum points, got {}",
            pts.len()
        )));
    }
    let first = pts[0].transmission;
    let spread = pts
        .iter()
        .map(|p| (p.transmission - first).abs())
        .fold(0.0, f64::max);
    if spread <= 1e-14 * first.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::Fit(
            "spectrum is flat; atom number is not identifiable".into(),
        ));
    }

    let profile = Profile {
        data: spectrum,
        params: *known,
        opts,
    };
    let grid = neff_grid();
    let values: Vec<f64> = grid.iter().map(|&n| profile.ssr(n)).collect();
    let best = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty grid");
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let mut n_hat = golden_min(|n| profile.ssr(n), lo, hi);
    if profile.ssr(n_hat) > values[best] {
        n_hat = grid[best];
    }
    let (ssr, amplitude, background) = profile.eval(n_hat);

    let m = pts.len() as f64;
    let dof =
        (m - 1.0 - opts.fit_amplitude as u8 as f64 - opts.fit_background as u8 as f64).max(1.0);
    let sigma2 = ssr / dof;
    let h = 1e-3 * n_hat.max(1e-2);
    let curvature = if n_hat - h >= 0.0 {
        (profile.ssr(n_hat + h) - 2.0 * ssr + profile.ssr(n_hat - h)) / (h * h)
    } else {
        (profile.ssr(n_hat + 2.0 * h) - 2.0 * profile.ssr(n_hat + h) + ssr) / (h * h)
    };
    // SSR ≈ SSR₀ + (c/2)(N − N̂)²; Δχ² = ΔSSR/σ² = 1
    let confidence_halfwidth = if curvature > 0.0 {
        (2.0 * sigma2 / curvature).sqrt()
    } else {
        f64::INFINITY
    };

    Ok(FitResult {
        n_eff_hat: n_hat,
        residual_rms: (ssr / m).sqrt(),
        confidence_halfwidth,
        amplitude,
        background,
    })
}
