//! S-curves, saddle-node switching thresholds and the nonreciprocity window.
//!
//! The input flux P_in(y) has at most two turning points on y > 0 (the
//! steady-state condition is a cubic). A local maximum ends the lower branch
//! (up-switch), a local minimum starts the upper branch (down-switch).
//! Because the two directions differ only through P_ct, the backward curve is
//! the forward one scaled by κ₁/κ₂ on the input axis for any detuning.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::params::{Direction, SystemParams};
use crate::semiclassical::{
    input_for_saturation, input_slope, output_for_input, SteadyStateSolution,
};
use crate::units::{intracavity_photons, to_db};

/// Grid density of the turning-point bracketing scan.
pub const POINTS_PER_DECADE: usize = 400;

#[derive(Debug, Clone, Serialize)]
pub struct SCurve {
    pub direction: Direction,
    pub samples: Vec<SteadyStateSolution>,
}

impl SCurve {
    /// Number of maximal runs of consecutive unstable samples.
    pub fn unstable_segments(&self) -> usize {
        let mut count = 0;
        let mut inside = false;
        for s in &self.samples {
            if !s.stable && !inside {
                count += 1;
            }
            inside = !s.stable;
        }
        count
    }
}

fn log_grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(move |i| {
        if i + 1 == n {
            hi
        } else {
            (a + (b - a) * i as f64 / (n - 1) as f64).exp()
        }
    })
}

/// Samples the steady-state curve on a log-spaced grid of y.
pub fn scurve(
    direction: Direction,
    p: &SystemParams,
    y_min: f64,
    y_max: f64,
    n_samples: usize,
) -> Result<SCurve> {
    if !(y_min > 0.0 && y_min < y_max && y_max.is_finite()) {
        return Err(domain(format!(
            "need 0 < y_min < y_max, got [{y_min}, {y_max}]"
        )));
    }
    if n_samples < 2 {
        return Err(domain(format!("need at least 2 samples, got {n_samples}")));
    }
    let p_ct = p.saturation_flux(direction);
    let samples = log_grid(y_min, y_max, n_samples)
        .map(|y| SteadyStateSolution {
            y,
            output_flux: y * p_ct,
            input_flux: input_for_saturation(y, direction, p),
            stable: input_slope(y, direction, p) > 0.0,
            marginal: false,
        })
        .collect();
    Ok(SCurve { direction, samples })
}

/// A saddle node of the steady-state curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TurningPoint {
    pub y: f64,
    pub input_flux: f64,
    pub output_flux: f64,
}

impl TurningPoint {
    fn at(y: f64, direction: Direction, p: &SystemParams) -> Self {
        TurningPoint {
            y,
            input_flux: input_for_saturation(y, direction, p),
            output_flux: y * p.saturation_flux(direction),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwitchThresholds {
    pub direction: Direction,
    /// Local maximum of P_in(y): the lower branch ends here.
    pub up_switch: Option<TurningPoint>,
    /// Local minimum of P_in(y): the upper branch starts here.
    pub down_switch: Option<TurningPoint>,
}

impl SwitchThresholds {
    pub fn is_bistable(&self) -> bool {
        self.up_switch.is_some() && self.down_switch.is_some()
    }
    pub fn up_switch_flux(&self) -> Option<f64> {
        self.up_switch.map(|t| t.input_flux)
    }
    pub fn down_switch_flux(&self) -> Option<f64> {
        self.down_switch.map(|t| t.input_flux)
    }
}

/// Bisection on ln y for a sign change of `f` in `[a, b]`, to 1e-13 relative.
fn bisect_log(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a).signum();
    for _ in 0..200 {
        if b / a - 1.0 < 1e-13 {
            break;
        }
        let m = (a * b).sqrt();
        if f(m).signum() == fa {
            a = m;
        } else {
            b = m;
        }
    }
    (a * b).sqrt()
}

/// Golden-section minimum of `f` over ln y in `[a, b]`.
fn golden_min_log(f: impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (a.ln(), b.ln());
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1.exp()), f(x2.exp()));
    for _ in 0..100 {
        if hi - lo < 1e-12 {
            break;
        }
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1.exp());
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2.exp());
        }
    }
    if f1 < f2 {
        (x1.exp(), f1)
    } else {
        (x2.exp(), f2)
    }
}

/// Scan range for turning points, in y.
fn scan_range(p: &SystemParams) -> (f64, f64) {
    let k = p.kappa();
    let den = p.delta_atom().powi(2) + p.gamma().powi(2);
    let strength = p.omega().powi(2) * (p.gamma() + p.delta_atom().abs()) / (den * k);
    (1e-6, 1e3 * (1.0 + strength))
}

/// Locates the saddle nodes of P_in(y) numerically: slope-sign bracketing on a
/// log grid, then bisection of dP_in/dy.
pub fn switch_thresholds(direction: Direction, p: &SystemParams) -> SwitchThresholds {
    let mut out = SwitchThresholds {
        direction,
        up_switch: None,
        down_switch: None,
    };
    if p.n_eff() == 0.0 {
        return out;
    }
    let (lo, hi) = scan_range(p);
    let decades = (hi / lo).log10();
    let n = (decades * POINTS_PER_DECADE as f64).ceil() as usize + 1;
    // scale-free slope; the positive prefactor does not affect signs
    let slope = |y: f64| input_slope(y, direction, p);
    let ys: Vec<f64> = log_grid(lo, hi, n).collect();
    let ss: Vec<f64> = ys.iter().map(|&y| slope(y)).collect();

    let mut roots: Vec<(f64, bool)> = Vec::new();
    for i in 0..ys.len() - 1 {
        if ss[i] > 0.0 && ss[i + 1] <= 0.0 {
            roots.push((bisect_log(slope, ys[i], ys[i + 1]), true));
        } else if ss[i] <= 0.0 && ss[i + 1] > 0.0 {
            roots.push((bisect_log(slope, ys[i], ys[i + 1]), false));
        }
    }
    if roots.is_empty() {
        // a narrow dip below zero can hide between grid points near onset
        for i in 1..ys.len() - 1 {
            if ss[i] < ss[i - 1] && ss[i] <= ss[i + 1] {
                let (ym, sm) = golden_min_log(slope, ys[i - 1], ys[i + 1]);
                if sm < 0.0 {
                    roots.push((bisect_log(slope, ys[i - 1], ym), true));
                    roots.push((bisect_log(slope, ym, ys[i + 1]), false));
                }
            }
        }
    }
    for (y, is_max) in roots {
        let tp = TurningPoint::at(y, direction, p);
        if is_max {
            out.up_switch.get_or_insert(tp);
        } else {
            out.down_switch.get_or_insert(tp);
        }
    }
    if !out.is_bistable() {
        out.up_switch = None;
        out.down_switch = None;
    }
    out
}

/// Closed-form turning points at resonance (Δ = δ = 0), as `(y_up, y_down)`.
///
/// With A = κ, B = Ω²/γ and u = 1 + y, the extrema solve κu² − Bu + 2B = 0,
/// u = [B ∓ √(B² − 8κB)]/(2κ). Detunings in `p` are ignored.
pub fn resonant_turning_points(p: &SystemParams) -> Option<(f64, f64)> {
    let a = p.kappa();
    let b = p.omega().powi(2) / p.gamma();
    let disc = b * b - 8.0 * a * b;
    if !(disc > 0.0) {
        return None;
    }
    let root = disc.sqrt();
    // u₋ via the product of roots for accuracy
    let u_plus = (b + root) / (2.0 * a);
    let u_minus = 2.0 * b / (a * u_plus);
    Some((u_minus - 1.0, u_plus - 1.0))
}

/// Atom number at which resonant bistability sets in (C = 4).
pub fn bistability_onset_neff(p: &SystemParams) -> f64 {
    8.0 * p.kappa() * p.gamma() / p.g().powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WindowConvention {
    /// [up-switch(forward), down-switch(backward)]: forward has only its upper
    /// branch and backward only its lower branch, independent of history.
    #[default]
    Guaranteed,
    /// [down-switch(forward), up-switch(backward)]: reachable with an upward
    /// power sweep history.
    Hysteretic,
}

impl std::str::FromStr for WindowConvention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "guaranteed" => Ok(WindowConvention::Guaranteed),
            "hysteretic" => Ok(WindowConvention::Hysteretic),
            _ => Err(domain(format!("unknown window convention `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OnrWindow {
    pub convention: WindowConvention,
    /// P_l as input photon flux; absent without bistability.
    pub lower: Option<f64>,
    /// P_u as input photon flux.
    pub upper: Option<f64>,
    /// Forward intracavity photon number on the upper branch at P_l.
    pub photons_lower: Option<f64>,
    /// Forward intracavity photon number on the upper branch at P_u.
    pub photons_upper: Option<f64>,
}

impl OnrWindow {
    pub fn is_nonempty(&self) -> bool {
        matches!((self.lower, self.upper), (Some(l), Some(u)) if l < u)
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        match (self.lower, self.upper) {
            (Some(l), Some(u)) if l < u => Some((l, u)),
            _ => None,
        }
    }
}

fn forward_upper_output(input: f64, p: &SystemParams, fwd: &SwitchThresholds) -> Result<f64> {
    if let Some(down) = fwd.down_switch {
        if input == down.input_flux {
            return Ok(down.output_flux);
        }
    }
    let sols = output_for_input(input, Direction::Forward, p)?;
    Ok(sols
        .iter()
        .filter(|s| s.stable || s.marginal)
        .map(|s| s.output_flux)
        .fold(0.0, f64::max))
}

/// The nonreciprocity working window under the chosen convention.
pub fn onr_window(p: &SystemParams, convention: WindowConvention) -> Result<OnrWindow> {
    let fwd = switch_thresholds(Direction::Forward, p);
    let bwd = switch_thresholds(Direction::Backward, p);
    let (lower, upper) = match convention {
        WindowConvention::Guaranteed => (fwd.up_switch_flux(), bwd.down_switch_flux()),
        WindowConvention::Hysteretic => (fwd.down_switch_flux(), bwd.up_switch_flux()),
    };
    let photons = |edge: Option<f64>| -> Result<Option<f64>> {
        match edge {
            Some(x) => {
                let out = forward_upper_output(x, p, &fwd)?;
                Ok(Some(intracavity_photons(out, p.kappa2())?))
            }
            None => Ok(None),
        }
    };
    Ok(OnrWindow {
        convention,
        lower,
        upper,
        photons_lower: photons(lower)?,
        photons_upper: photons(upper)?,
    })
}

/// Forward (highest stable) and backward (lowest stable) operating points at
/// one input power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSample {
    pub input_flux: f64,
    pub forward_output: f64,
    pub backward_output: f64,
    pub forward_transmission: f64,
    /// dP_t/dP_in on the forward branch.
    pub forward_incremental_transmission: f64,
    pub backward_transmission: f64,
    pub blocking_ratio_db: f64,
    pub forward_photons: f64,
}

/// Operating points at the given inputs using the window branch rule: forward
/// takes the highest-output stable solution, backward the lowest.
pub fn metrics_at_inputs(p: &SystemParams, inputs: &[f64]) -> Result<Vec<MetricSample>> {
    inputs
        .iter()
        .map(|&x| {
            if !(x > 0.0) {
                return Err(domain(format!("metric inputs must be positive, got {x}")));
            }
            let f = output_for_input(x, Direction::Forward, p)?;
            let b = output_for_input(x, Direction::Backward, p)?;
            let pick = |sols: &[SteadyStateSolution], highest: bool| {
                let mut stable = sols.iter().filter(|s| s.stable);
                let chosen = if highest {
                    stable.next_back()
                } else {
                    stable.next()
                };
                // fall back to the extreme root when only marginal roots remain
                *chosen.unwrap_or(if highest {
                    sols.last().unwrap()
                } else {
                    &sols[0]
                })
            };
            let fs = pick(&f, true);
            let bs = pick(&b, false);
            let incremental =
                p.saturation_flux(Direction::Forward) / input_slope(fs.y, Direction::Forward, p);
            Ok(MetricSample {
                input_flux: x,
                forward_output: fs.output_flux,
                backward_output: bs.output_flux,
                forward_transmission: fs.output_flux / x,
                forward_incremental_transmission: incremental,
                backward_transmission: bs.output_flux / x,
                blocking_ratio_db: to_db(fs.output_flux / bs.output_flux),
                forward_photons: intracavity_photons(fs.output_flux, p.kappa2())?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowMetrics {
    pub mean_forward_transmission: f64,
    /// Mean dP_t/dP_in on the forward upper branch; this is the slope
    /// 4κ₁κ₂/κ² once the atoms are saturated.
    pub mean_forward_incremental_transmission: f64,
    pub mean_blocking_ratio_db: f64,
    pub min_blocking_ratio_db: f64,
    pub max_blocking_ratio_db: f64,
    pub samples: Vec<MetricSample>,
}

/// Averages the operating points over `n_power_samples` evenly spaced inputs
/// strictly inside the window (cell midpoints).
pub fn window_metrics(
    p: &SystemParams,
    window: &OnrWindow,
    n_power_samples: usize,
) -> Result<WindowMetrics> {
    let (lo, hi) = window.bounds().ok_or(Error::EmptyWindow)?;
    if n_power_samples == 0 {
        return Err(domain("need at least one power sample"));
    }
    let inputs: Vec<f64> = (0..n_power_samples)
        .map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n_power_samples as f64)
        .collect();
    let samples = metrics_at_inputs(p, &inputs)?;
    let n = samples.len() as f64;
    let mean = |f: fn(&MetricSample) -> f64| samples.iter().map(f).sum::<f64>() / n;
    let db = samples.iter().map(|s| s.blocking_ratio_db);
    Ok(WindowMetrics {
        mean_forward_transmission: mean(|s| s.forward_transmission),
        mean_forward_incremental_transmission: mean(|s| s.forward_incremental_transmission),
        mean_blocking_ratio_db: mean(|s| s.blocking_ratio_db),
        min_blocking_ratio_db: db.clone().fold(f64::INFINITY, f64::min),
        max_blocking_ratio_db: db.fold(f64::NEG_INFINITY, f64::max),
        samples,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub n_eff: f64,
    pub cooperativity: f64,
    pub blocking_ratio_simplified_db: f64,
    pub forward: SwitchThresholds,
    pub backward: SwitchThresholds,
    pub window: OnrWindow,
    pub metrics: Option<WindowMetrics>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NeffSweep {
    pub convention: WindowConvention,
    pub rows: Vec<SweepRow>,
    /// Thresholds of bistable rows never decrease as N_eff increases
    /// (rows taken in ascending N_eff).
    pub thresholds_monotone: bool,
    /// Window edges never decrease as N_eff increases.
    pub window_monotone: bool,
}

/// Thresholds, window and metrics per atom number. Rows are computed in
/// parallel and returned in input order.
pub fn sweep_atom_number(
    template: &SystemParams,
    n_eff_list: &[f64],
    convention: WindowConvention,
    n_power_samples: usize,
) -> Result<NeffSweep> {
    if n_eff_list.is_empty() {
        return Err(domain("atom-number list is empty"));
    }
    let rows = n_eff_list
        .par_iter()
        .map(|&n| {
            let p = template.with_n_eff(n)?;
            let window = onr_window(&p, convention)?;
            let metrics = if window.is_nonempty() {
                Some(window_metrics(&p, &window, n_power_samples)?)
            } else {
                None
            };
            Ok(SweepRow {
                n_eff: n,
                cooperativity: p.cooperativity(),
                blocking_ratio_simplified_db: crate::semiclassical::blocking_ratio_simplified(&p)
                    .db,
                forward: switch_thresholds(Direction::Forward, &p),
                backward: switch_thresholds(Direction::Backward, &p),
                window,
                metrics,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut order: Vec<&SweepRow> = rows.iter().collect();
    order.sort_by(|a, b| a.n_eff.total_cmp(&b.n_eff));
    let nondecreasing = |vals: Vec<f64>| vals.windows(2).all(|w| w[1] >= w[0]);
    let bistable: Vec<&&SweepRow> = order.iter().filter(|r| r.forward.is_bistable()).collect();
    let thresholds_monotone = [
        bistable
            .iter()
            .map(|r| r.forward.up_switch_flux().unwrap())
            .collect(),
        bistable
            .iter()
            .map(|r| r.forward.down_switch_flux().unwrap())
            .collect(),
    ]
    .into_iter()
    .all(nondecreasing);
    let windowed: Vec<&&SweepRow> = order.iter().filter(|r| r.window.is_nonempty()).collect();
    let window_monotone = [
        windowed.iter().map(|r| r.window.lower.unwrap()).collect(),
        windowed.iter().map(|r| r.window.upper.unwrap()).collect(),
    ]
    .into_iter()
    .all(nondecreasing);

    Ok(NeffSweep {
        convention,
        rows,
        thresholds_monotone,
        window_monotone,
    })
}
