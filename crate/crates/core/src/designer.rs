//! Cavity design: impedance-matched mirror split and atom-number requirements.

use std::fmt;

use serde::Serialize;

use crate::bistability::{onr_window, window_metrics, OnrWindow, WindowConvention};
use crate::error::{domain, Error, Result};
use crate::params::{RawParams, SystemParams};
use crate::semiclassical::{blocking_ratio_linear, blocking_ratio_simplified};
use crate::units::{flux_to_power, mirror_ppm_to_rate, rate_to_ppm, to_mhz};

/// Mirror coupling rates maximising resonant transmission at fixed total κ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MirrorSplit {
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa_loss: f64,
    pub transmission: f64,
    /// κ₁ > κ₂, required for nonreciprocity.
    pub asymmetric: bool,
}

/// Impedance-matched split κ₁ = κ₂ + κ_loss at fixed κ:
/// κ₁ = κ/2, κ₂ = κ/2 − κ_loss, T = (κ − 2κ_loss)/κ.
pub fn optimal_mirror_split(total_kappa: f64, kappa_loss: f64) -> Result<MirrorSplit> {
    if !(kappa_loss >= 0.0) || !total_kappa.is_finite() {
        return Err(domain(format!(
            "need finite κ and κ_loss ≥ 0, got κ = {total_kappa}, κ_loss = {kappa_loss}"
        )));
    }
    if !(total_kappa > 2.0 * kappa_loss) {
        return Err(Error::Infeasible(format!(
            "total decay 2π×{:.4} MHz must exceed twice the extra loss 2π×{:.4} MHz \
             for a matched design with κ₂ > 0",
            to_mhz(total_kappa),
            to_mhz(kappa_loss)
        )));
    }
    let kappa1 = 0.5 * total_kappa;
    let kappa2 = 0.5 * total_kappa - kappa_loss;
    Ok(MirrorSplit {
        kappa1,
        kappa2,
        kappa_loss,
        transmission: 4.0 * kappa1 * kappa2 / total_kappa.powi(2),
        asymmetric: kappa1 > kappa2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RequiredAtoms {
    /// Smallest real N with (1+2C(N))² at or above the target.
    pub continuous: f64,
    /// Smallest integer atom number meeting the target.
    pub ceiling: f64,
}

/// Inverts the blocking ratio (1+2C)² for the atom number, keeping the other
/// rates of `template`.
pub fn required_neff_for_blocking(
    target_db: f64,
    template: &SystemParams,
) -> Result<RequiredAtoms> {
    if !(target_db >= 0.0) || !target_db.is_finite() {
        return Err(domain(format!(
            "target blocking ratio must be ≥ 0 dB, got {target_db}"
        )));
    }
    let per_atom = template.g().powi(2) / (2.0 * template.kappa() * template.gamma());
    let c = 0.5 * (10f64.powf(target_db / 20.0) - 1.0);
    let mut n = (c / per_atom).max(0.0);
    let meets =
        |n: f64| blocking_ratio_simplified(&template.with_n_eff(n).expect("n ≥ 0")).db >= target_db;
    while !meets(n) {
        n = n.next_up();
    }
    Ok(RequiredAtoms {
        continuous: n,
        ceiling: n.ceil(),
    })
}

/// Inputs of a design report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DesignInputs {
    pub t1_ppm: f64,
    pub t2_ppm: f64,
    pub loss_ppm: f64,
    /// m
    pub cavity_length: f64,
    /// Atomic parameters (g, γ, N_eff, detunings, wavelength); its mirror
    /// rates and length are replaced by the ones derived here.
    pub atoms: SystemParams,
    pub target_blocking_db: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatesMhz {
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa_loss: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WindowReport {
    pub convention: WindowConvention,
    pub nonempty: bool,
    pub lower_pw: Option<f64>,
    pub upper_pw: Option<f64>,
    pub photons_lower: Option<f64>,
    pub photons_upper: Option<f64>,
    pub mean_forward_transmission: Option<f64>,
    pub mean_blocking_ratio_db: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MatchedDesign {
    pub kappa1_mhz: f64,
    pub kappa2_mhz: f64,
    pub t1_ppm: f64,
    pub t2_ppm: f64,
    pub transmission: f64,
    pub asymmetric: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DesignReport {
    pub rates_mhz: RatesMhz,
    pub cavity_length_um: f64,
    pub n_eff: f64,
    pub cooperativity: f64,
    /// 4κ₁κ₂/κ²
    pub transmission: f64,
    pub blocking_ratio_simplified_db: f64,
    pub blocking_ratio_linear_db: f64,
    pub status: String,
    pub windows: Vec<WindowReport>,
    pub matched: Option<MatchedDesign>,
    pub matched_infeasible: Option<String>,
    pub target_blocking_db: Option<f64>,
    pub required_n_eff: Option<RequiredAtoms>,
}

fn window_report(p: &SystemParams, w: &OnrWindow) -> Result<WindowReport> {
    let pw = |flux: Option<f64>| -> Result<Option<f64>> {
        flux.map(|f| flux_to_power(f, p.wavelength()).map(|w| w * 1e12))
            .transpose()
    };
    let metrics = if w.is_nonempty() {
        Some(window_metrics(p, w, 21)?)
    } else {
        None
    };
    Ok(WindowReport {
        convention: w.convention,
        nonempty: w.is_nonempty(),
        lower_pw: pw(w.lower)?,
        upper_pw: pw(w.upper)?,
        photons_lower: w.photons_lower,
        photons_upper: w.photons_upper,
        mean_forward_transmission: metrics.as_ref().map(|m| m.mean_forward_transmission),
        mean_blocking_ratio_db: metrics.as_ref().map(|m| m.mean_blocking_ratio_db),
    })
}

/// Evaluates a mirror set: rates, transmission, predicted windows and
/// metrics, the impedance-matched alternative at the same κ and κ_loss, and
/// the atom number needed for a target blocking ratio.
pub fn design_report(inputs: &DesignInputs) -> Result<DesignReport> {
    let len = inputs.cavity_length;
    let kappa1 = mirror_ppm_to_rate(inputs.t1_ppm, len)?;
    let kappa2 = mirror_ppm_to_rate(inputs.t2_ppm, len)?;
    let kappa_loss = if inputs.loss_ppm == 0.0 {
        0.0
    } else {
        mirror_ppm_to_rate(inputs.loss_ppm, len)?
    };
    let p = SystemParams::new(RawParams {
        kappa1,
        kappa2,
        kappa_loss,
        cavity_length: len,
        ..inputs.atoms.raw()
    })?;
    rates_report(&p, inputs.target_blocking_db)
}

/// Same report for a parameter set given directly in rates.
pub fn rates_report(p: &SystemParams, target_blocking_db: Option<f64>) -> Result<DesignReport> {
    let len = p.cavity_length();
    let windows = [WindowConvention::Guaranteed, WindowConvention::Hysteretic]
        .into_iter()
        .map(|c| window_report(p, &onr_window(p, c)?))
        .collect::<Result<Vec<_>>>()?;
    let status = if windows.iter().any(|w| w.nonempty) {
        "nonreciprocal window".to_string()
    } else {
        "no nonreciprocal window".to_string()
    };
    let (matched, matched_infeasible) = match optimal_mirror_split(p.kappa(), p.kappa_loss()) {
        Ok(m) => (
            Some(MatchedDesign {
                kappa1_mhz: to_mhz(m.kappa1),
                kappa2_mhz: to_mhz(m.kappa2),
                t1_ppm: rate_to_ppm(m.kappa1, len)?,
                t2_ppm: rate_to_ppm(m.kappa2, len)?,
                transmission: m.transmission,
                asymmetric: m.asymmetric,
            }),
            None,
        ),
        Err(Error::Infeasible(why)) => (None, Some(why)),
        Err(e) => return Err(e),
    };
    let required_n_eff = target_blocking_db
        .map(|t| required_neff_for_blocking(t, p))
        .transpose()?;
    Ok(DesignReport {
        rates_mhz: RatesMhz {
            kappa1: to_mhz(p.kappa1()),
            kappa2: to_mhz(p.kappa2()),
            kappa_loss: to_mhz(p.kappa_loss()),
            kappa: to_mhz(p.kappa()),
        },
        cavity_length_um: len * 1e6,
        n_eff: p.n_eff(),
        cooperativity: p.cooperativity(),
        transmission: p.empty_cavity_transmission(),
        blocking_ratio_simplified_db: blocking_ratio_simplified(p).db,
        blocking_ratio_linear_db: blocking_ratio_linear(p).db,
        status,
        windows,
        matched,
        matched_infeasible,
        target_blocking_db,
        required_n_eff,
    })
}

impl fmt::Display for DesignReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = &self.rates_mhz;
        writeln!(
            f,
            "rates (2π MHz): κ₁ = {:.4}, κ₂ = {:.4}, κ_loss = {:.4}, κ = {:.4}",
            r.kappa1, r.kappa2, r.kappa_loss, r.kappa
        )?;
        writeln!(f, "cavity length: {:.1} µm", self.cavity_length_um)?;
        writeln!(f, "N_eff = {}, C = {:.3}", self.n_eff, self.cooperativity)?;
        writeln!(
            f,
            "saturated forward transmission: {:.4}",
            self.transmission
        )?;
        writeln!(
            f,
            "blocking ratio: {:.2} dB (1+2C)², {:.2} dB full linear",
            self.blocking_ratio_simplified_db, self.blocking_ratio_linear_db
        )?;
        writeln!(f, "status: {}", self.status)?;
        for w in &self.windows {
            match (w.nonempty, w.lower_pw, w.upper_pw) {
                (true, Some(l), Some(u)) => writeln!(
                    f,
                    "  {:?} window: {:.2} – {:.2} pW, n = {:.2} – {:.2}, T = {:.4}, {:.2} dB",
                    w.convention,
                    l,
                    u,
                    w.photons_lower.unwrap_or(f64::NAN),
                    w.photons_upper.unwrap_or(f64::NAN),
                    w.mean_forward_transmission.unwrap_or(f64::NAN),
                    w.mean_blocking_ratio_db.unwrap_or(f64::NAN),
                )?,
                _ => writeln!(f, "  {:?} window: empty", w.convention)?,
            }
        }
        match (&self.matched, &self.matched_infeasible) {
            (Some(m), _) => writeln!(
                f,
                "matched design: κ₁ = {:.4}, κ₂ = {:.4} (2π MHz); T₁ = {:.2}, T₂ = {:.2} ppm; \
                 transmission {:.4}{}",
                m.kappa1_mhz,
                m.kappa2_mhz,
                m.t1_ppm,
                m.t2_ppm,
                m.transmission,
                if m.asymmetric {
                    ""
                } else {
                    " (symmetric: no nonreciprocity)"
                }
            )?,
            (None, Some(why)) => writeln!(f, "matched design: infeasible, {why}")?,
            (None, None) => {}
        }
        if let (Some(t), Some(n)) = (self.target_blocking_db, self.required_n_eff) {
            writeln!(
                f,
                "N_eff for {t} dB: {:.3} (at least {} atoms)",
                n.continuous, n.ceiling
            )?;
        }
        Ok(())
    }
}
