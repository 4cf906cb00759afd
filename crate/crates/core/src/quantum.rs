//! Driven Tavis–Cummings master equation in a collective-spin ⊗ Fock basis.
//!
//! In the frame rotating at the probe frequency,
//! H = δ a†a + Δ J₊J₋ + g (a† J₋ + a J₊) + η (a + a†)
//! with collapse operators √(2κ) a and √(2γ/N) J₋. The atomic channel is
//! collective. Its rate is scaled by 1/N so that the low-excitation polarization
//! decays at γ, as in the semiclassical equations. For N = 1 it is ordinary
//! spontaneous emission.
//!
//! The steady state is found by a sparse LU solve of the vectorized
//! stationarity condition with one equation replaced by Tr ρ = 1.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use faer::{c64, Mat, Side};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::params::{Direction, SystemParams};

/// Default bound on the Hilbert-space dimension (N+1)·fock_dim.
pub const DEFAULT_DIMENSION_CAP: usize = 2048;
/// Largest top-Fock population for which a truncation counts as adequate.
pub const ADEQUACY_THRESHOLD: f64 = 1e-6;
pub const TRACE_TOLERANCE: f64 = 1e-10;
pub const POSITIVITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumModel {
    pub n_atoms: usize,
    pub fock_dim: usize,
    pub params: SystemParams,
    /// Drive amplitude η in rad/s; P_in = η²/(2κ_in).
    pub drive_amplitude: f64,
    pub direction: Direction,
    pub dimension_cap: usize,
}

impl QuantumModel {
    /// Undriven model. `params.n_eff()` is ignored in favour of `n_atoms`.
    pub fn new(
        params: SystemParams,
        n_atoms: usize,
        fock_dim: usize,
        direction: Direction,
    ) -> Result<Self> {
        let m = QuantumModel {
            n_atoms,
            fock_dim,
            params,
            drive_amplitude: 0.0,
            direction,
            dimension_cap: DEFAULT_DIMENSION_CAP,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_drive_amplitude(mut self, eta: f64) -> Result<Self> {
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::InvalidParam {
                name: "drive_amplitude",
                value: eta,
                reason: "must be finite and non-negative",
            });
        }
        self.drive_amplitude = eta;
        Ok(self)
    }

    pub fn with_input_flux(self, input_flux: f64) -> Result<Self> {
        if !(input_flux.is_finite() && input_flux >= 0.0) {
            return Err(domain(format!(
                "input flux must be non-negative, got {input_flux}"
            )));
        }
        let k_in = self.direction.input_kappa(&self.params);
        self.with_drive_amplitude((2.0 * k_in * input_flux).sqrt())
    }

    pub fn with_dimension_cap(mut self, cap: usize) -> Result<Self> {
        self.dimension_cap = cap;
        self.validate()?;
        Ok(self)
    }

    pub fn input_flux(&self) -> f64 {
        self.drive_amplitude.powi(2) / (2.0 * self.direction.input_kappa(&self.params))
    }

    pub fn dimension(&self) -> usize {
        (self.n_atoms + 1) * self.fock_dim
    }

    fn validate(&self) -> Result<()> {
        if self.fock_dim < 2 {
            return Err(Error::InvalidParam {
                name: "fock_dim",
                value: self.fock_dim as f64,
                reason: "must be at least 2",
            });
        }
        let dim = self
            .n_atoms
            .checked_add(1)
            .and_then(|s| s.checked_mul(self.fock_dim))
            .unwrap_or(usize::MAX);
        if dim > self.dimension_cap {
            return Err(Error::DimensionCap {
                dim,
                cap: self.dimension_cap,
            });
        }
        Ok(())
    }
}

/// Dense density operator, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    pub dim: usize,
    pub data: Vec<c64>,
}

impl DensityOperator {
    pub fn get(&self, i: usize, j: usize) -> c64 {
        self.data[i * self.dim + j]
    }

    pub fn trace(&self) -> c64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Largest |ρᵢⱼ − ρⱼᵢ*|.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in i..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let m = Mat::<c64>::from_fn(self.dim, self.dim, |i, j| {
            (self.get(i, j) + self.get(j, i).conj()) * 0.5
        });
        m.self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Solver(format!("eigenvalue decomposition failed: {e:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumSteadyState {
    pub density: DensityOperator,
    pub mean_photon_number: f64,
    /// 2κ_out·⟨a†a⟩.
    pub output_flux: f64,
    /// Population of the highest retained Fock level.
    pub top_fock_population: f64,
    /// True when the top-Fock population is at most [`ADEQUACY_THRESHOLD`].
    pub adequate: bool,
    pub trace_error: f64,
    pub hermiticity_error: f64,
    pub min_eigenvalue: f64,
}

impl QuantumSteadyState {
    pub fn is_physical(&self) -> bool {
        self.trace_error <= TRACE_TOLERANCE
            && self.hermiticity_error <= TRACE_TOLERANCE
            && self.min_eigenvalue >= -POSITIVITY_TOLERANCE
    }

    pub fn transmission(&self, input_flux: f64) -> f64 {
        if input_flux > 0.0 {
            self.output_flux / input_flux
        } else {
            0.0
        }
    }
}

type Sparse = Vec<(usize, usize, c64)>;

struct Operators {
    h_eff: Sparse,
    jumps: Vec<Sparse>,
}

// basis index = k·F + n, k = number of excited atoms, n = photon number
fn operators(m: &QuantumModel) -> Operators {
    let p = &m.params;
    let scale = p.kappa();
    let f = m.fock_dim;
    let n_at = m.n_atoms;
    let idx = |k: usize, n: usize| k * f + n;
    let (kappa, gamma) = (p.kappa() / scale, p.gamma() / scale);
    let (delta, det_atom) = (p.delta_cav() / scale, p.delta_atom() / scale);
    let (g, eta) = (p.g() / scale, m.drive_amplitude / scale);

    let mut h: Sparse = Vec::new();
    let mut a_op: Sparse = Vec::new();
    let mut lower: Sparse = Vec::new();
    for k in 0..=n_at {
        for n in 0..f {
            let i = idx(k, n);
            // diagonal: energies and −(i/2)ΣC†C
            let atom_decay = if n_at > 0 {
                2.0 * gamma / n_at as f64 * (k * (n_at - k + 1)) as f64
            } else {
                0.0
            };
            let re = delta * n as f64 + det_atom * k as f64;
            let im = -0.5 * (2.0 * kappa * n as f64 + atom_decay);
            h.push((i, i, c64::new(re, im)));
            if n + 1 < f {
                let sq = ((n + 1) as f64).sqrt();
                a_op.push((idx(k, n), idx(k, n + 1), c64::new(sq, 0.0)));
                // η(a + a†)
                h.push((idx(k, n), idx(k, n + 1), c64::new(eta * sq, 0.0)));
                h.push((idx(k, n + 1), idx(k, n), c64::new(eta * sq, 0.0)));
            }
            if k >= 1 {
                let jm = ((k * (n_at - k + 1)) as f64).sqrt();
                lower.push((idx(k - 1, n), idx(k, n), c64::new(jm, 0.0)));
                if n + 1 < f {
                    // g a† J₋ and its conjugate
                    let c = g * jm * ((n + 1) as f64).sqrt();
                    h.push((idx(k - 1, n + 1), idx(k, n), c64::new(c, 0.0)));
                    h.push((idx(k, n), idx(k - 1, n + 1), c64::new(c, 0.0)));
                }
            }
        }
    }
    let scale_op = |op: Sparse, rate: f64| -> Sparse {
        let s = rate.sqrt();
        op.into_iter().map(|(r, c, v)| (r, c, v * s)).collect()
    };
    let mut jumps = vec![scale_op(a_op, 2.0 * kappa)];
    if n_at > 0 && gamma > 0.0 {
        jumps.push(scale_op(lower, 2.0 * gamma / n_at as f64));
    }
    Operators { h_eff: h, jumps }
}

fn liouvillian_triplets(ops: &Operators, d: usize) -> Vec<Triplet<usize, usize, c64>> {
    let i_unit = c64::new(0.0, 1.0);
    let mut t: Vec<(usize, usize, c64)> = Vec::new();
    // −i H_eff ρ
    for &(r, c, v) in &ops.h_eff {
        for j in 0..d {
            t.push((r * d + j, c * d + j, -i_unit * v));
        }
    }
    // +i ρ H_eff†: (ρ H†)_{ij} = Σ_k ρ_{ik} conj(H_{jk})
    for &(r, c, v) in &ops.h_eff {
        for i in 0..d {
            t.push((i * d + r, i * d + c, i_unit * v.conj()));
        }
    }
    // C ρ C†
    for op in &ops.jumps {
        for &(i, k, a) in op {
            for &(j, l, b) in op {
                t.push((i * d + j, k * d + l, a * b.conj()));
            }
        }
    }
    // replace the ρ₀₀ equation by the trace condition
    t.retain(|&(r, _, _)| r != 0);
    for i in 0..d {
        t.push((0, i * d + i, c64::new(1.0, 0.0)));
    }
    t.sort_unstable_by_key(|&(r, c, _)| (c, r));
    let mut out: Vec<Triplet<usize, usize, c64>> = Vec::with_capacity(t.len());
    for (r, c, v) in t {
        match out.last_mut() {
            Some(last) if last.row == r && last.col == c => last.val += v,
            _ => out.push(Triplet::new(r, c, v)),
        }
    }
    out
}

/// Stationary state of the master equation.
pub fn steady_state(model: &QuantumModel) -> Result<QuantumSteadyState> {
    model.validate()?;
    let d = model.dimension();
    let f = model.fock_dim;
    let ops = operators(model);
    let triplets = liouvillian_triplets(&ops, d);
    let size = d * d;
    let mat = SparseColMat::<usize, c64>::try_new_from_triplets(size, size, &triplets)
        .map_err(|e| Error::Solver(format!("assembling Liouvillian: {e:?}")))?;
    let lu = mat
        .sp_lu()
        .map_err(|e| Error::Solver(format!("sparse LU failed: {e:?}")))?;
    let mut rhs = Col::<c64>::zeros(size);
    rhs[0] = c64::new(1.0, 0.0);
    let x = lu.solve(&rhs);
    let data: Vec<c64> = (0..size).map(|i| x[i]).collect();
    if data.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::Solver(
            "steady-state solve produced non-finite values".into(),
        ));
    }
    let density = DensityOperator { dim: d, data };

    let mut mean_n = 0.0;
    let mut top = 0.0;
    for k in 0..=model.n_atoms {
        for n in 0..f {
            let pop = density.get(k * f + n, k * f + n).re;
            mean_n += n as f64 * pop;
            if n == f - 1 {
                top += pop;
            }
        }
    }
    let trace_error = (density.trace() - c64::new(1.0, 0.0)).norm();
    let hermiticity_error = density.hermiticity_error();
    let min_eigenvalue = density.eigenvalues()?.first().copied().unwrap_or(0.0);
    let k_out = model.direction.output_kappa(&model.params);
    Ok(QuantumSteadyState {
        density,
        mean_photon_number: mean_n,
        output_flux: 2.0 * k_out * mean_n,
        top_fock_population: top,
        adequate: top.abs() <= ADEQUACY_THRESHOLD,
        trace_error,
        hermiticity_error,
        min_eigenvalue,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantumIoPoint {
    pub input_flux: f64,
    pub output_flux: f64,
    pub mean_photon_number: f64,
    pub top_fock_population: f64,
    pub adequate: bool,
}

/// Steady-state output for each input flux, solved in parallel.
pub fn quantum_io_curve(template: &QuantumModel, inputs: &[f64]) -> Result<Vec<QuantumIoPoint>> {
    if inputs.is_empty() {
        return Err(domain("input flux list is empty"));
    }
    inputs
        .par_iter()
        .map(|&flux| {
            let model = template.clone().with_input_flux(flux)?;
            let s = steady_state(&model)?;
            Ok(QuantumIoPoint {
                input_flux: flux,
                output_flux: s.output_flux,
                mean_photon_number: s.mean_photon_number,
                top_fock_population: s.top_fock_population,
                adequate: s.adequate,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bistability::switch_thresholds;
    use crate::semiclassical::{approx_backward_output, linear_transmission, output_for_input};
    use crate::units::mhz;

    fn model(n_atoms: usize, fock: usize) -> QuantumModel {
        QuantumModel::new(SystemParams::reference(), n_atoms, fock, Direction::Forward).unwrap()
    }

    #[test]
    fn empty_cavity_matches_closed_form() {
        for delta in [0.0, mhz(1.5)] {
            let p = SystemParams::reference()
                .with_detunings(0.0, delta)
                .unwrap();
            let eta = 0.3 * p.kappa();
            let m = QuantumModel::new(p, 0, 12, Direction::Forward)
                .unwrap()
                .with_drive_amplitude(eta)
                .unwrap();
            let s = steady_state(&m).unwrap();
            let want = eta * eta / (p.kappa().powi(2) + delta * delta);
            assert!(
                (s.mean_photon_number / want - 1.0).abs() < 1e-6,
                "{} vs {want}",
                s.mean_photon_number
            );
            assert!(s.adequate);
            assert!(s.is_physical(), "{s:?}");
        }
    }

    #[test]
    fn zero_drive_is_vacuum() {
        let s = steady_state(&model(2, 4)).unwrap();
        assert!(s.mean_photon_number.abs() < 1e-14);
        assert!((s.density.get(0, 0).re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weak_drive_matches_linear_transmission() {
        for n_atoms in 1..=3usize {
            let p = SystemParams::reference()
                .with_n_eff(n_atoms as f64)
                .unwrap();
            let t_lin = linear_transmission(&p);
            // aim for about 1e-4 photons
            let flux = 1e-4 * 2.0 * p.kappa2() / t_lin;
            for dir in Direction::BOTH {
                let m = QuantumModel::new(p, n_atoms, 5, dir)
                    .unwrap()
                    .with_input_flux(flux)
                    .unwrap();
                let s = steady_state(&m).unwrap();
                assert!(s.mean_photon_number < 1e-3);
                let t = s.transmission(flux);
                assert!(
                    (t / t_lin - 1.0).abs() < 0.01,
                    "N={n_atoms} {dir}: {t} vs {t_lin}"
                );
                assert!(s.is_physical());
            }
        }
    }

    #[test]
    fn dimension_cap_is_enforced() {
        let err =
            QuantumModel::new(SystemParams::reference(), 15, 200, Direction::Forward).unwrap_err();
        assert!(matches!(
            err,
            Error::DimensionCap {
                dim: 3200,
                cap: 2048
            }
        ));
        assert!(model(1, 10).with_dimension_cap(10).is_err());
        assert!(QuantumModel::new(SystemParams::reference(), 1, 1, Direction::Forward).is_err());
    }

    #[test]
    fn truncation_flag_raised_when_fock_space_too_small() {
        let m = model(0, 3)
            .with_drive_amplitude(3.0 * SystemParams::reference().kappa())
            .unwrap();
        let s = steady_state(&m).unwrap();
        assert!(!s.adequate);
        assert!(s.top_fock_population > ADEQUACY_THRESHOLD);
    }

    #[test]
    fn steady_state_is_a_valid_density_operator() {
        let m = model(2, 10).with_input_flux(5e7).unwrap();
        let s = steady_state(&m).unwrap();
        assert!(s.trace_error <= TRACE_TOLERANCE);
        assert!(s.hermiticity_error <= TRACE_TOLERANCE);
        assert!(s.min_eigenvalue >= -POSITIVITY_TOLERANCE);
    }

    fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
            .collect()
    }

    #[test]
    fn low_drive_tail_follows_cooperativity_suppression() {
        let p = SystemParams::reference()
            .at_resonance()
            .with_n_eff(1.0)
            .unwrap();
        let m = QuantumModel::new(p, 1, 8, Direction::Backward).unwrap();
        for q in quantum_io_curve(&m, &log_grid(1e2, 1e4, 5)).unwrap() {
            let want = approx_backward_output(q.input_flux, &p);
            assert!((q.output_flux / want - 1.0).abs() < 0.05, "{q:?} vs {want}");
        }
    }

    #[test]
    fn saturated_atom_recovers_empty_cavity_slope() {
        let p = SystemParams::reference()
            .at_resonance()
            .with_n_eff(1.0)
            .unwrap();
        let m = QuantumModel::new(p, 1, 60, Direction::Forward).unwrap();
        let curve = quantum_io_curve(&m, &log_grid(1e6, 3e8, 6)).unwrap();
        let clean: Vec<_> = curve.iter().filter(|q| q.adequate).collect();
        let top = clean.last().unwrap();
        let start = clean
            .iter()
            .find(|q| q.input_flux >= top.input_flux / 10.0)
            .unwrap();
        assert!(top.input_flux / start.input_flux > 5.0);
        let slope = (top.output_flux - start.output_flux) / (top.input_flux - start.input_flux);
        let t0 = p.empty_cavity_transmission();
        assert!((slope / t0 - 1.0).abs() < 0.10, "slope {slope} vs {t0}");
    }

    #[test]
    fn truncation_converges_on_clean_points() {
        let p = SystemParams::reference()
            .at_resonance()
            .with_n_eff(1.0)
            .unwrap();
        let inputs = log_grid(1e5, 1e8, 4);
        let small = quantum_io_curve(
            &QuantumModel::new(p, 1, 25, Direction::Forward).unwrap(),
            &inputs,
        )
        .unwrap();
        let large = quantum_io_curve(
            &QuantumModel::new(p, 1, 50, Direction::Forward).unwrap(),
            &inputs,
        )
        .unwrap();
        for (a, b) in small.iter().zip(&large) {
            if a.adequate {
                let rel = (a.mean_photon_number / b.mean_photon_number - 1.0).abs();
                assert!(rel <= 1e-4, "{a:?} vs {b:?}");
            }
        }
        assert!(small.iter().filter(|q| q.adequate).count() >= 3);
    }

    #[test]
    fn strongly_coupled_atom_has_no_bistability() {
        let p = SystemParams::reference()
            .at_resonance()
            .with_n_eff(1.0)
            .unwrap()
            .with_g(mhz(12.0))
            .unwrap();
        assert!(p.cooperativity() > 4.0);
        let th = switch_thresholds(Direction::Forward, &p);
        let (down, up) = (th.down_switch_flux().unwrap(), th.up_switch_flux().unwrap());
        let inputs = log_grid(0.2 * down, 5.0 * up, 24);
        let three = inputs
            .iter()
            .any(|&x| output_for_input(x, Direction::Forward, &p).unwrap().len() == 3);
        assert!(three);

        let m = QuantumModel::new(p, 1, 30, Direction::Forward).unwrap();
        let curve = quantum_io_curve(&m, &inputs).unwrap();
        assert!(curve.iter().all(|q| q.adequate));
        for w in curve.windows(2) {
            assert!(w[1].output_flux >= w[0].output_flux, "{w:?}");
        }
        // no step as large as the semiclassical jump at the up switch
        let branches = output_for_input(up * (1.0 + 1e-6), Direction::Forward, &p).unwrap();
        let jump = branches.last().unwrap().output_flux / th.up_switch.unwrap().output_flux;
        for w in curve.windows(2) {
            assert!(w[1].output_flux / w[0].output_flux < jump.sqrt(), "{w:?}");
        }
    }

    #[test]
    fn io_curve_rejects_empty_list() {
        assert!(quantum_io_curve(&model(1, 4), &[]).is_err());
        assert!(quantum_io_curve(&model(1, 4), &[-1.0]).is_err());
    }
}
