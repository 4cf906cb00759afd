//! Semiclassical steady-state input–output relation for N two-level atoms in
//! an asymmetric two-port cavity.
//!
//! With saturation parameter y = P_t/P_ct and u = 1 + y,
//!
//! ```text
//! P_in = P_t/(4κ₁κ₂) · { [κ + Ω²γ/((Δ²+γ²)u)]² + [−δ + Ω²Δ/((Δ²+γ²)u)]² }
//! ```
//!
//! All fluxes are photon fluxes (s⁻¹). Internally the relation is evaluated in
//! units of the total decay rate κ to keep the cubic well scaled.

use serde::Serialize;

use crate::cubic;
use crate::error::{domain, Result};
use crate::params::{Direction, SystemParams};
use crate::units::to_db;

/// Relative tolerance under which coalescing roots are merged.
pub const ROOT_MERGE_TOL: f64 = 1e-9;

/// One steady state of the semiclassical model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyStateSolution {
    /// Saturation parameter y = P_t / P_ct.
    pub y: f64,
    /// Transmitted photon flux P_t.
    pub output_flux: f64,
    /// Driving photon flux P_in.
    pub input_flux: f64,
    /// Positive slope of P_in(P_t).
    pub stable: bool,
    /// Merged double root at a saddle node.
    pub marginal: bool,
}

impl SteadyStateSolution {
    pub fn transmission(&self) -> f64 {
        if self.input_flux > 0.0 {
            self.output_flux / self.input_flux
        } else {
            0.0
        }
    }
}

/// Dimensionless response coefficients in units of κ.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Response {
    /// δ/κ
    d: f64,
    /// Ω²γ/((Δ²+γ²)κ)
    gg: f64,
    /// Ω²Δ/((Δ²+γ²)κ)
    hh: f64,
}

impl Response {
    pub(crate) fn new(p: &SystemParams) -> Self {
        let k = p.kappa();
        let den = p.delta_atom().powi(2) + p.gamma().powi(2);
        let omega2 = p.omega().powi(2);
        Response {
            d: p.delta_cav() / k,
            gg: omega2 * p.gamma() / (den * k),
            hh: omega2 * p.delta_atom() / (den * k),
        }
    }

    /// F(u) = |(1 + G/u) + i(−d + H/u)|²
    fn f(&self, u: f64) -> f64 {
        (1.0 + self.gg / u).powi(2) + (-self.d + self.hh / u).powi(2)
    }

    fn df(&self, u: f64) -> f64 {
        let u2 = u * u;
        -2.0 * (1.0 + self.gg / u) * self.gg / u2 - 2.0 * (-self.d + self.hh / u) * self.hh / u2
    }

    /// d/dy of y·F(1+y)
    fn dyf(&self, y: f64) -> f64 {
        let u = 1.0 + y;
        self.f(u) + y * self.df(u)
    }
}

/// Prefactor P_ct·κ²/(4κ₁κ₂), so that P_in(y) = prefactor · y·F(1+y).
fn input_prefactor(direction: Direction, p: &SystemParams) -> f64 {
    p.saturation_flux(direction) * p.kappa().powi(2) / (4.0 * p.kappa1() * p.kappa2())
}

/// Driving flux as a function of the saturation parameter.
pub fn input_for_saturation(y: f64, direction: Direction, p: &SystemParams) -> f64 {
    input_prefactor(direction, p) * y * Response::new(p).f(1.0 + y)
}

/// dP_in/dy.
pub fn input_slope(y: f64, direction: Direction, p: &SystemParams) -> f64 {
    input_prefactor(direction, p) * Response::new(p).dyf(y)
}

/// Input flux needed to sustain the given transmitted flux (direct evaluation).
pub fn input_for_output(output_flux: f64, direction: Direction, p: &SystemParams) -> f64 {
    input_for_saturation(output_flux / p.saturation_flux(direction), direction, p)
}

fn solution(
    y: f64,
    input_flux: f64,
    direction: Direction,
    p: &SystemParams,
    marginal: bool,
) -> SteadyStateSolution {
    SteadyStateSolution {
        y,
        output_flux: y * p.saturation_flux(direction),
        input_flux,
        stable: Response::new(p).dyf(y) > 0.0,
        marginal,
    }
}

/// All steady states for a given input flux, sorted by ascending y.
///
/// Solves y·S(1+y) = K(1+y)² with S(u) = (1+d²)u² + 2(G − dH)u + G² + H²
/// (units of κ) and K = 4κ₁κ₂·P_in/(P_ct·κ²), written directly as a cubic in y
/// so that weak-drive solutions keep full relative precision.
pub fn output_for_input(
    input_flux: f64,
    direction: Direction,
    p: &SystemParams,
) -> Result<Vec<SteadyStateSolution>> {
    if !(input_flux >= 0.0) || !input_flux.is_finite() {
        return Err(domain(format!(
            "input flux must be finite and non-negative, got {input_flux}"
        )));
    }
    if input_flux == 0.0 {
        return Ok(vec![solution(0.0, 0.0, direction, p, false)]);
    }
    if p.n_eff() == 0.0 {
        let y = linear_transmission(p) * input_flux / p.saturation_flux(direction);
        return Ok(vec![solution(y, input_flux, direction, p, false)]);
    }

    let r = Response::new(p);
    let k = input_flux / input_prefactor(direction, p);
    let s2 = 1.0 + r.d * r.d;
    let cross = r.gg - r.d * r.hh;
    let s1 = 2.0 * s2 + 2.0 * cross;
    let s0 = (1.0 + r.gg).powi(2) + (r.hh - r.d).powi(2);

    let roots = cubic::real_roots(s2, s1 - k, s0 - 2.0 * k, -k, ROOT_MERGE_TOL);
    let mut out: Vec<SteadyStateSolution> = roots
        .into_iter()
        .filter(|root| root.value > 0.0)
        .map(|root| solution(root.value, input_flux, direction, p, root.double))
        .collect();
    debug_assert!(!out.is_empty(), "cubic has a positive root for K > 0");
    if out.is_empty() {
        // K > 0 guarantees a positive root; reached only on catastrophic rounding
        return Err(domain(format!(
            "no steady state found for input {input_flux}"
        )));
    }
    out.sort_by(|a, b| a.y.total_cmp(&b.y));
    Ok(out)
}

/// Weak-drive (y → 0) transmission 4κ₁κ₂/{[κ + Ω²γ/(Δ²+γ²)]² + [−δ + Ω²Δ/(Δ²+γ²)]²}.
/// Identical for both directions.
pub fn linear_transmission(p: &SystemParams) -> f64 {
    p.empty_cavity_transmission() / Response::new(p).f(1.0)
}

/// Forward output far above saturation: (4κ₁κ₂/κ²)·P_in − 2Nκ₂γ/κ, floored at 0.
pub fn approx_forward_output(input_flux: f64, p: &SystemParams) -> f64 {
    let offset = 2.0 * p.n_eff() * p.kappa2() * p.gamma() / p.kappa();
    (p.empty_cavity_transmission() * input_flux - offset).max(0.0)
}

/// Backward output far below saturation: (4κ₁κ₂/κ²)·P_in/(1+2C)².
pub fn approx_backward_output(input_flux: f64, p: &SystemParams) -> f64 {
    p.empty_cavity_transmission() * input_flux / (1.0 + 2.0 * p.cooperativity()).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockingRatio {
    pub ratio: f64,
    pub db: f64,
}

impl BlockingRatio {
    pub fn from_ratio(ratio: f64) -> Self {
        BlockingRatio {
            ratio,
            db: to_db(ratio),
        }
    }
}

/// Forward-to-backward blocking ratio (1+2C)².
pub fn blocking_ratio_simplified(p: &SystemParams) -> BlockingRatio {
    BlockingRatio::from_ratio((1.0 + 2.0 * p.cooperativity()).powi(2))
}

/// Ratio of empty-cavity to loaded-cavity weak-drive transmission, from the
/// full relation including detunings.
pub fn blocking_ratio_linear(p: &SystemParams) -> BlockingRatio {
    BlockingRatio::from_ratio(p.empty_cavity_transmission() / linear_transmission(p))
}
