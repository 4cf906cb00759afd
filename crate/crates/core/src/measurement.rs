//! Photon-counting detector model and ingestion of measured power sweeps.

use std::io::Read;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;

use crate::bistability::WindowConvention;
use crate::error::{domain, Error, Result, RowError};
use crate::params::{Direction, SystemParams};
use crate::semiclassical::{output_for_input, BlockingRatio, SteadyStateSolution};
use crate::units::{flux_to_power, power_to_flux};

/// Column header of sweep files.
pub const SWEEP_HEADER: [&str; 4] = [
    "input_power_pW",
    "forward_counts",
    "backward_counts",
    "repeats",
];
pub const MIN_SWEEP_POINTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectorModel {
    pub quantum_efficiency: f64,
    /// Dark counts per second.
    pub dark_rate: f64,
    /// Seconds.
    pub integration_time: f64,
}

impl DetectorModel {
    pub fn new(quantum_efficiency: f64, dark_rate: f64, integration_time: f64) -> Result<Self> {
        if !(quantum_efficiency > 0.0 && quantum_efficiency <= 1.0) {
            return Err(Error::InvalidParam {
                name: "quantum_efficiency",
                value: quantum_efficiency,
                reason: "must lie in (0, 1]",
            });
        }
        if !(dark_rate.is_finite() && dark_rate >= 0.0) {
            return Err(Error::InvalidParam {
                name: "dark_rate",
                value: dark_rate,
                reason: "must be finite and non-negative",
            });
        }
        if !(integration_time.is_finite() && integration_time > 0.0) {
            return Err(Error::InvalidParam {
                name: "integration_time",
                value: integration_time,
                reason: "must be finite and positive",
            });
        }
        Ok(DetectorModel {
            quantum_efficiency,
            dark_rate,
            integration_time,
        })
    }

    /// Counts expected with no light.
    pub fn dark_floor(&self) -> f64 {
        self.dark_rate * self.integration_time
    }

    pub fn expected_counts(&self, true_flux: f64) -> f64 {
        (self.quantum_efficiency * true_flux + self.dark_rate) * self.integration_time
    }

    /// Flux inferred from counts after dark subtraction, clamped at zero.
    pub fn inferred_flux(&self, counts: f64) -> f64 {
        (counts / self.integration_time - self.dark_rate).max(0.0) / self.quantum_efficiency
    }
}

impl Default for DetectorModel {
    fn default() -> Self {
        DetectorModel {
            quantum_efficiency: 0.5,
            dark_rate: 100.0,
            integration_time: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectorReading {
    pub expected_counts: f64,
    pub inferred_flux: f64,
}

pub fn apply_detector(true_flux: f64, det: &DetectorModel) -> Result<DetectorReading> {
    if !(true_flux.is_finite() && true_flux >= 0.0) {
        return Err(domain(format!(
            "flux must be finite and non-negative, got {true_flux}"
        )));
    }
    let counts = det.expected_counts(true_flux);
    Ok(DetectorReading {
        expected_counts: counts,
        inferred_flux: det.inferred_flux(counts),
    })
}

/// Blocking ratio read off raw (not dark-subtracted) counts.
pub fn apparent_blocking_ratio(
    forward_flux: f64,
    backward_flux: f64,
    det: &DetectorModel,
) -> Result<BlockingRatio> {
    let f = apply_detector(forward_flux, det)?.expected_counts;
    let b = apply_detector(backward_flux, det)?.expected_counts;
    if b <= 0.0 {
        return Err(domain("backward counts are zero; ratio undefined"));
    }
    Ok(BlockingRatio::from_ratio(f / b))
}

/// One power step of a sweep. Counts are per integration window, averaged over
/// `repeats` acquisitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRecord {
    /// Watts.
    pub input_power: f64,
    pub forward_counts: f64,
    pub backward_counts: f64,
    pub repeats: u32,
}

fn parse_record(record: &csv::StringRecord) -> std::result::Result<SweepRecord, String> {
    if record.len() != 4 {
        return Err(format!("expected 4 fields, got {}", record.len()));
    }
    let num = |i: usize| {
        record[i]
            .parse::<f64>()
            .map_err(|_| format!("{}: `{}` is not a number", SWEEP_HEADER[i], &record[i]))
    };
    let power = num(0)?;
    if !(power.is_finite() && power >= 0.0) {
        return Err(format!("input_power_pW must be non-negative, got {power}"));
    }
    let (fwd, bwd) = (num(1)?, num(2)?);
    for (name, v) in [(SWEEP_HEADER[1], fwd), (SWEEP_HEADER[2], bwd)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(format!("{name} must be finite and non-negative, got {v}"));
        }
    }
    let repeats: u32 = record[3]
        .parse()
        .map_err(|_| format!("repeats: `{}` is not a positive integer", &record[3]))?;
    if repeats == 0 {
        return Err("repeats must be at least 1".into());
    }
    Ok(SweepRecord {
        input_power: power * 1e-12,
        forward_counts: fwd,
        backward_counts: bwd,
        repeats,
    })
}

/// Parses a sweep CSV. Every data line is either parsed or reported with its
/// line number.
pub fn ingest_sweep(reader: impl Read) -> Result<Vec<SweepRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(SWEEP_HEADER.iter().copied()) {
        return Err(domain(format!(
            "sweep CSV header must be `{}`",
            SWEEP_HEADER.join(",")
        )));
    }
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        match parse_record(&row) {
            Ok(r) => records.push(r),
            Err(message) => errors.push(RowError { line, message }),
        }
    }
    if !errors.is_empty() {
        return Err(Error::Ingest(errors));
    }
    if records.len() < MIN_SWEEP_POINTS {
        return Err(domain(format!(
            "sweep has {} data rows, need at least {MIN_SWEEP_POINTS}",
            records.len()
        )));
    }
    Ok(records)
}

pub fn read_sweep_file(path: impl AsRef<Path>) -> Result<Vec<SweepRecord>> {
    ingest_sweep(std::fs::File::open(path)?)
}

pub fn write_sweep(records: &[SweepRecord], writer: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SWEEP_HEADER)?;
    for r in records {
        w.write_record([
            (r.input_power * 1e12).to_string(),
            r.forward_counts.to_string(),
            r.backward_counts.to_string(),
            r.repeats.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Edge detection on the counts-per-power trace of each direction.
///
/// A direction switches at the first power where (counts − dark_counts)/power
/// exceeds `multiple` times its mean over the `baseline_points` lowest powers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdRule {
    pub multiple: f64,
    pub baseline_points: usize,
    /// Dark counts per record subtracted before normalising.
    pub dark_counts: f64,
}

impl Default for ThresholdRule {
    fn default() -> Self {
        ThresholdRule {
            multiple: 5.0,
            baseline_points: MIN_SWEEP_POINTS,
            dark_counts: 0.0,
        }
    }
}

impl ThresholdRule {
    pub fn with_detector(det: &DetectorModel) -> Self {
        ThresholdRule {
            dark_counts: det.dark_floor(),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasuredWindow {
    /// Power (W) at which the forward trace switches up.
    pub forward_switch: Option<f64>,
    /// Power (W) at which the backward trace switches up.
    pub backward_switch: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl MeasuredWindow {
    pub fn is_nonempty(&self) -> bool {
        matches!((self.lower, self.upper), (Some(l), Some(u)) if l < u)
    }

    pub fn status(&self) -> &'static str {
        if self.is_nonempty() {
            "window detected"
        } else {
            "no window detected"
        }
    }
}

fn sorted(records: &[SweepRecord]) -> Vec<SweepRecord> {
    let mut r = records.to_vec();
    r.sort_by(|a, b| a.input_power.total_cmp(&b.input_power));
    r
}

fn switch_power(
    records: &[SweepRecord],
    rule: &ThresholdRule,
    counts: impl Fn(&SweepRecord) -> f64,
) -> Option<f64> {
    let norm: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.input_power > 0.0)
        .map(|r| {
            (
                r.input_power,
                (counts(r) - rule.dark_counts).max(0.0) / r.input_power,
            )
        })
        .collect();
    if norm.len() <= rule.baseline_points {
        return None;
    }
    let baseline = norm[..rule.baseline_points]
        .iter()
        .map(|x| x.1)
        .sum::<f64>()
        / rule.baseline_points as f64;
    if baseline <= 0.0 {
        // no signal at low power: the first clearly lit point counts as the switch
        let lit = norm.iter().map(|x| x.1).fold(0.0, f64::max);
        if lit <= 0.0 {
            return None;
        }
        return norm.iter().find(|x| x.1 > lit / rule.multiple).map(|x| x.0);
    }
    norm[rule.baseline_points..]
        .iter()
        .find(|x| x.1 > rule.multiple * baseline)
        .map(|x| x.0)
}

/// Nonreciprocal window from a measured sweep: from the forward switch to the
/// backward switch.
pub fn measured_window(records: &[SweepRecord], rule: &ThresholdRule) -> Result<MeasuredWindow> {
    if records.len() < MIN_SWEEP_POINTS {
        return Err(domain(format!(
            "need at least {MIN_SWEEP_POINTS} sweep points, got {}",
            records.len()
        )));
    }
    if !(rule.multiple > 1.0) || rule.baseline_points == 0 || !(rule.dark_counts >= 0.0) {
        return Err(domain(
            "threshold rule needs multiple > 1, baseline_points ≥ 1, dark_counts ≥ 0",
        ));
    }
    let recs = sorted(records);
    let fwd = switch_power(&recs, rule, |r| r.forward_counts);
    let bwd = switch_power(&recs, rule, |r| r.backward_counts);
    let (lower, upper) = match (fwd, bwd) {
        (Some(f), Some(b)) if f < b => (Some(f), Some(b)),
        // forward switches but backward never does inside the sweep
        (Some(f), None) => (Some(f), recs.last().map(|r| r.input_power)),
        _ => (None, None),
    };
    Ok(MeasuredWindow {
        forward_switch: fwd,
        backward_switch: bwd,
        lower,
        upper,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasuredPoint {
    pub input_power: f64,
    pub forward_transmission: f64,
    pub backward_transmission: f64,
    /// From raw counts.
    pub apparent_blocking_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasuredMetrics {
    pub points: Vec<MeasuredPoint>,
    /// Means over the points inside `range` (all points when none is given).
    pub mean_forward_transmission: f64,
    pub mean_blocking_ratio_db: f64,
    pub range: Option<(f64, f64)>,
}

/// Dark-subtracted transmissions and raw-count blocking ratios per record.
pub fn measured_metrics(
    records: &[SweepRecord],
    det: &DetectorModel,
    wavelength: f64,
    range: Option<(f64, f64)>,
) -> Result<MeasuredMetrics> {
    if records.len() < MIN_SWEEP_POINTS {
        return Err(domain(format!(
            "need at least {MIN_SWEEP_POINTS} sweep points, got {}",
            records.len()
        )));
    }
    let mut points = Vec::with_capacity(records.len());
    for r in sorted(records).iter().filter(|r| r.input_power > 0.0) {
        let flux = power_to_flux(r.input_power, wavelength)?;
        let ratio = if r.backward_counts > 0.0 {
            r.forward_counts / r.backward_counts
        } else {
            f64::INFINITY
        };
        points.push(MeasuredPoint {
            input_power: r.input_power,
            forward_transmission: det.inferred_flux(r.forward_counts) / flux,
            backward_transmission: det.inferred_flux(r.backward_counts) / flux,
            apparent_blocking_db: crate::units::to_db(ratio),
        });
    }
    let inside: Vec<&MeasuredPoint> = points
        .iter()
        .filter(|p| range.is_none_or(|(lo, hi)| p.input_power >= lo && p.input_power <= hi))
        .collect();
    if inside.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let n = inside.len() as f64;
    Ok(MeasuredMetrics {
        mean_forward_transmission: inside.iter().map(|p| p.forward_transmission).sum::<f64>() / n,
        mean_blocking_ratio_db: inside.iter().map(|p| p.apparent_blocking_db).sum::<f64>() / n,
        points,
        range,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountMode {
    Expected,
    Poisson { seed: u64 },
}

/// Branch observed in each direction for a given window convention.
///
/// Guaranteed: forward on the lowest stable branch, backward on the highest.
/// Hysteretic: forward on the highest, backward on the lowest.
fn observed_branch(
    solutions: &[SteadyStateSolution],
    direction: Direction,
    convention: WindowConvention,
) -> SteadyStateSolution {
    let stable: Vec<&SteadyStateSolution> = solutions.iter().filter(|s| s.stable).collect();
    let pool: Vec<&SteadyStateSolution> = if stable.is_empty() {
        solutions.iter().collect()
    } else {
        stable
    };
    let highest = matches!(
        (direction, convention),
        (Direction::Forward, WindowConvention::Hysteretic)
            | (Direction::Backward, WindowConvention::Guaranteed)
    );
    if highest {
        *pool[pool.len() - 1]
    } else {
        *pool[0]
    }
}

/// Synthetic sweep from the semiclassical model seen through `det`.
pub fn synthesize_sweep(
    p: &SystemParams,
    powers: &[f64],
    det: &DetectorModel,
    convention: WindowConvention,
    mode: CountMode,
    repeats: u32,
) -> Result<Vec<SweepRecord>> {
    if repeats == 0 {
        return Err(domain("repeats must be at least 1"));
    }
    let mut rng = match mode {
        CountMode::Poisson { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        CountMode::Expected => None,
    };
    let mut out = Vec::with_capacity(powers.len());
    for &power in powers {
        let flux = power_to_flux(power, p.wavelength())?;
        let mut counts = [0.0; 2];
        for (slot, dir) in counts.iter_mut().zip(Direction::BOTH) {
            let sols = output_for_input(flux, dir, p)?;
            let mean = det.expected_counts(observed_branch(&sols, dir, convention).output_flux);
            *slot = match rng.as_mut() {
                None => mean,
                Some(rng) if mean > 0.0 => {
                    let dist = Poisson::new(mean)
                        .map_err(|e| domain(format!("Poisson mean {mean}: {e}")))?;
                    (0..repeats).map(|_| dist.sample(rng)).sum::<f64>() / repeats as f64
                }
                Some(_) => 0.0,
            };
        }
        out.push(SweepRecord {
            input_power: power,
            forward_counts: counts[0],
            backward_counts: counts[1],
            repeats,
        });
    }
    Ok(out)
}

/// Powers in W evenly spaced from `start` to `stop` inclusive.
pub fn power_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && start >= 0.0 && stop >= start) {
        return Err(domain("power grid needs 0 ≤ start ≤ stop and step > 0"));
    }
    let n = ((stop - start) / step * (1.0 + 1e-12)).floor() as usize;
    Ok((0..=n).map(|i| start + step * i as f64).collect())
}

/// Convenience for reporting inferred output powers.
pub fn inferred_power(counts: f64, det: &DetectorModel, wavelength: f64) -> Result<f64> {
    flux_to_power(det.inferred_flux(counts), wavelength)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bistability::{onr_window, switch_thresholds};
    use crate::semiclassical::blocking_ratio_linear;

    fn reference() -> SystemParams {
        SystemParams::reference().at_resonance()
    }

    #[test]
    fn dark_floor_and_round_trip() {
        let det = DetectorModel::new(0.4, 250.0, 2.0).unwrap();
        let r = apply_detector(0.0, &det).unwrap();
        assert_eq!(r.expected_counts, 500.0);
        assert_eq!(r.inferred_flux, 0.0);
        for flux in [1.0, 1e3, 3.7e6] {
            let r = apply_detector(flux, &det).unwrap();
            assert!((r.inferred_flux / flux - 1.0).abs() < 1e-12);
        }
        assert!(apply_detector(-1.0, &det).is_err());
        assert!(DetectorModel::new(0.0, 1.0, 1.0).is_err());
        assert!(DetectorModel::new(1.2, 1.0, 1.0).is_err());
        assert!(DetectorModel::new(0.5, -1.0, 1.0).is_err());
        assert!(DetectorModel::new(0.5, 1.0, 0.0).is_err());
    }

    #[test]
    fn dark_counts_matching_backward_signal_cost_three_db() {
        let p = reference().with_n_eff(14.7).unwrap();
        let ratio = blocking_ratio_linear(&p);
        let backward = 1e4;
        let forward = backward * ratio.ratio;
        // dark counts equal to the backward signal
        let det = DetectorModel::new(0.5, 0.5 * backward, 1.0).unwrap();
        let apparent = apparent_blocking_ratio(forward, backward, &det).unwrap();
        assert!(
            (ratio.db - apparent.db - 3.0103).abs() < 0.01,
            "{} vs {}",
            apparent.db,
            ratio.db
        );
    }

    #[test]
    fn apparent_ratio_never_exceeds_true_ratio() {
        let det = DetectorModel::new(0.3, 40.0, 0.5).unwrap();
        for (f, b) in [(1e6, 1e3), (5e4, 5e4), (1e2, 1.0), (7.0, 3.0)] {
            let a = apparent_blocking_ratio(f, b, &det).unwrap();
            assert!(a.ratio <= f / b * (1.0 + 1e-12));
        }
    }

    #[test]
    fn ingest_reports_bad_rows_by_line() {
        let text = "input_power_pW,forward_counts,backward_counts,repeats\n\
                    10,100,50,20\n\
                    20,abc,50,20\n\
                    30,100,50\n\
                    40,100,50,0\n\
                    50,100,50,20\n";
        match ingest_sweep(text.as_bytes()) {
            Err(Error::Ingest(rows)) => {
                let lines: Vec<u64> = rows.iter().map(|r| r.line).collect();
                assert_eq!(lines, vec![3, 4, 5]);
            }
            other => panic!("{other:?}"),
        }
        let bad_header = "power,f,b,r\n1,1,1,1\n";
        assert!(ingest_sweep(bad_header.as_bytes()).is_err());
        let short = "input_power_pW,forward_counts,backward_counts,repeats\n1,1,1,1\n";
        assert!(ingest_sweep(short.as_bytes()).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let det = DetectorModel::default();
        let powers = power_grid(10e-12, 200e-12, 10e-12).unwrap();
        let recs = synthesize_sweep(
            &reference(),
            &powers,
            &det,
            WindowConvention::Hysteretic,
            CountMode::Expected,
            20,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_sweep(&recs, &mut buf).unwrap();
        let back = ingest_sweep(buf.as_slice()).unwrap();
        assert_eq!(back.len(), recs.len());
        for (a, b) in back.iter().zip(&recs) {
            assert!((a.input_power / b.input_power - 1.0).abs() < 1e-12);
            assert_eq!(a.forward_counts, b.forward_counts);
            assert_eq!(a.repeats, 20);
        }
    }

    fn round_trip(convention: WindowConvention, mode: CountMode) {
        let p = reference();
        let det = DetectorModel::new(0.3, 200.0, 0.1).unwrap();
        let truth = onr_window(&p, convention).unwrap();
        let (lo, hi) = truth.bounds().unwrap();
        let (lo_w, hi_w) = (
            flux_to_power(lo, p.wavelength()).unwrap(),
            flux_to_power(hi, p.wavelength()).unwrap(),
        );
        let step = (hi_w / 60.0).min(lo_w / 4.0);
        let powers = power_grid(step, 1.5 * hi_w, step).unwrap();
        let recs = synthesize_sweep(&p, &powers, &det, convention, mode, 20).unwrap();
        let w = measured_window(&recs, &ThresholdRule::with_detector(&det)).unwrap();
        assert!(w.is_nonempty(), "{w:?}");
        let (l, u) = (w.lower.unwrap(), w.upper.unwrap());
        assert!(l >= lo_w && l - lo_w <= step * 1.000001, "{l} vs {lo_w}");
        assert!(u >= hi_w && u - hi_w <= step * 1.000001, "{u} vs {hi_w}");
    }

    #[test]
    fn synthetic_window_round_trips_within_one_step() {
        for conv in [WindowConvention::Guaranteed, WindowConvention::Hysteretic] {
            round_trip(conv, CountMode::Expected);
        }
        round_trip(WindowConvention::Hysteretic, CountMode::Poisson { seed: 7 });
    }

    #[test]
    fn poisson_mode_is_reproducible() {
        let det = DetectorModel::default();
        let powers = power_grid(10e-12, 100e-12, 10e-12).unwrap();
        let run = |seed| {
            synthesize_sweep(
                &reference(),
                &powers,
                &det,
                WindowConvention::Guaranteed,
                CountMode::Poisson { seed },
                5,
            )
            .unwrap()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
    }

    #[test]
    fn all_dark_sweep_has_no_window() {
        let recs: Vec<SweepRecord> = (1..=10)
            .map(|i| SweepRecord {
                input_power: i as f64 * 1e-11,
                forward_counts: 100.0,
                backward_counts: 100.0,
                repeats: 20,
            })
            .collect();
        let rule = ThresholdRule {
            dark_counts: 100.0,
            ..ThresholdRule::default()
        };
        let w = measured_window(&recs, &rule).unwrap();
        assert!(!w.is_nonempty());
        assert_eq!(w.status(), "no window detected");
        // without dark subtraction the counts-per-power trace only falls
        assert!(!measured_window(&recs, &ThresholdRule::default())
            .unwrap()
            .is_nonempty());
    }

    #[test]
    fn backward_trace_sits_on_dark_floor_below_switching() {
        let p = SystemParams::reference();
        let det = DetectorModel::new(0.02, 1e4, 1.0).unwrap();
        let down_b = switch_thresholds(Direction::Backward, &p)
            .down_switch_flux()
            .unwrap();
        let down_b_w = flux_to_power(down_b, p.wavelength()).unwrap();
        let powers = power_grid(10e-12, 0.95 * down_b_w, 10e-12).unwrap();
        let recs = synthesize_sweep(
            &p,
            &powers,
            &det,
            WindowConvention::Guaranteed,
            CountMode::Expected,
            20,
        )
        .unwrap();
        let floor = det.dark_floor();
        let (min_b, max_b) = recs.iter().fold((f64::MAX, 0.0f64), |(lo, hi), r| {
            (lo.min(r.backward_counts), hi.max(r.backward_counts))
        });
        let (min_f, max_f) = recs.iter().fold((f64::MAX, 0.0f64), |(lo, hi), r| {
            (lo.min(r.forward_counts), hi.max(r.forward_counts))
        });
        assert!(min_b >= floor && max_b < 2.0 * floor, "{min_b} {max_b}");
        assert!(max_f / min_f > 100.0);
    }

    #[test]
    fn metrics_recover_transmission_from_counts() {
        let p = reference();
        let det = DetectorModel::new(0.5, 50.0, 1.0).unwrap();
        let powers = power_grid(10e-12, 100e-12, 10e-12).unwrap();
        let recs = synthesize_sweep(
            &p,
            &powers,
            &det,
            WindowConvention::Guaranteed,
            CountMode::Expected,
            1,
        )
        .unwrap();
        let m = measured_metrics(&recs, &det, p.wavelength(), None).unwrap();
        let t_lin = crate::semiclassical::linear_transmission(&p);
        let first = &m.points[0];
        assert!((first.backward_transmission / t_lin - 1.0).abs() < 0.02);
        assert!(m.points.iter().all(|x| x.apparent_blocking_db >= 0.0));
        assert!(matches!(
            measured_metrics(&recs, &det, p.wavelength(), Some((1.0, 2.0))),
            Err(Error::EmptyWindow)
        ));
    }

    #[test]
    fn power_grid_is_inclusive() {
        let g = power_grid(30e-12, 110e-12, 10e-12).unwrap();
        assert_eq!(g.len(), 9);
        assert!((g[8] - 110e-12).abs() < 1e-24);
        assert!(power_grid(1.0, 0.5, 0.1).is_err());
    }
}
