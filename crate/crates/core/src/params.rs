//! Physical parameters of the atom–cavity system, named presets and the flat
//! key-value config format.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{mhz, mirror_ppm_to_rate, to_mhz};

/// Probe direction. `Forward` drives through M₁ (mode a), `Backward` through M₂ (mode b).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Forward, Direction::Backward];

    /// Coupling rate of the mirror the probe enters through.
    pub fn input_kappa(self, p: &SystemParams) -> f64 {
        match self {
            Direction::Forward => p.kappa1,
            Direction::Backward => p.kappa2,
        }
    }

    /// Coupling rate of the mirror the transmitted light leaves through.
    pub fn output_kappa(self, p: &SystemParams) -> f64 {
        match self {
            Direction::Forward => p.kappa2,
            Direction::Backward => p.kappa1,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        })
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "forward" | "a" => Ok(Direction::Forward),
            "backward" | "b" => Ok(Direction::Backward),
            _ => Err(Error::Domain(format!("unknown direction `{s}`"))),
        }
    }
}

/// Unvalidated parameter set. All rates in rad/s, lengths in m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawParams {
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa_loss: f64,
    pub g: f64,
    pub gamma: f64,
    pub n_eff: f64,
    pub delta_atom: f64,
    pub delta_cav: f64,
    pub wavelength: f64,
    pub cavity_length: f64,
}

/// Validated atom–cavity parameters.
///
/// Rates are field (amplitude) decay rates in rad/s. The total cavity decay
/// rate κ, the collective coupling Ω and the cooperativity C are derived on
/// demand and never stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct SystemParams {
    kappa1: f64,
    kappa2: f64,
    kappa_loss: f64,
    g: f64,
    gamma: f64,
    n_eff: f64,
    delta_atom: f64,
    delta_cav: f64,
    wavelength: f64,
    cavity_length: f64,
}

fn check(name: &'static str, value: f64, ok: bool, reason: &'static str) -> Result<()> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParam {
            name,
            value,
            reason,
        })
    }
}

impl TryFrom<RawParams> for SystemParams {
    type Error = Error;

    fn try_from(r: RawParams) -> Result<Self> {
        check("kappa1", r.kappa1, r.kappa1 > 0.0, "must be positive")?;
        check("kappa2", r.kappa2, r.kappa2 > 0.0, "must be positive")?;
        check(
            "kappa_loss",
            r.kappa_loss,
            r.kappa_loss >= 0.0,
            "must be non-negative",
        )?;
        check("g", r.g, r.g > 0.0, "must be positive")?;
        check("gamma", r.gamma, r.gamma > 0.0, "must be positive")?;
        check("n_eff", r.n_eff, r.n_eff >= 0.0, "must be non-negative")?;
        check("delta_atom", r.delta_atom, true, "must be finite")?;
        check("delta_cav", r.delta_cav, true, "must be finite")?;
        check(
            "wavelength",
            r.wavelength,
            r.wavelength > 0.0,
            "must be positive",
        )?;
        check(
            "cavity_length",
            r.cavity_length,
            r.cavity_length > 0.0,
            "must be positive",
        )?;
        Ok(SystemParams {
            kappa1: r.kappa1,
            kappa2: r.kappa2,
            kappa_loss: r.kappa_loss,
            g: r.g,
            gamma: r.gamma,
            n_eff: r.n_eff,
            delta_atom: r.delta_atom,
            delta_cav: r.delta_cav,
            wavelength: r.wavelength,
            cavity_length: r.cavity_length,
        })
    }
}

impl From<SystemParams> for RawParams {
    fn from(p: SystemParams) -> Self {
        p.raw()
    }
}

/// Experimental values: (g, κ, γ) = 2π × (5.5, 3.7, 2.6) MHz with
/// κ₁, κ₂, κ_loss = 2π × (3.1, 0.2, 0.4) MHz, Cs D2 line, 335 µm cavity.
pub const REFERENCE_RAW: RawParams = RawParams {
    kappa1: 3.1 * 2.0 * std::f64::consts::PI * 1e6,
    kappa2: 0.2 * 2.0 * std::f64::consts::PI * 1e6,
    kappa_loss: 0.4 * 2.0 * std::f64::consts::PI * 1e6,
    g: 5.5 * 2.0 * std::f64::consts::PI * 1e6,
    gamma: 2.6 * 2.0 * std::f64::consts::PI * 1e6,
    n_eff: 12.8,
    delta_atom: -0.64 * 2.0 * std::f64::consts::PI * 1e6,
    delta_cav: 0.0,
    wavelength: 852.3e-9,
    cavity_length: 335e-6,
};

/// Named presets: `(name, description)`.
pub const PRESETS: &[(&str, &str)] = &[
    (
        "paper-fig2",
        "experimental rates, N_eff = 12.8, cavity-resonant probe with Δ − δ = −2π×0.64 MHz",
    ),
    (
        "paper-resonant",
        "experimental rates, N_eff = 12.8, Δ = δ = 0",
    ),
    (
        "paper-n3",
        "experimental rates, N_eff = 3.0, Δ − δ = −2π×0.64 MHz",
    ),
    (
        "paper-n14.7",
        "experimental rates, N_eff = 14.7, Δ − δ = −2π×0.64 MHz",
    ),
];

/// Looks up a named preset.
pub fn preset(name: &str) -> Option<SystemParams> {
    let base = SystemParams::reference();
    match name {
        "paper-fig2" | "paper" => Some(base),
        "paper-resonant" => Some(base.at_resonance()),
        "paper-n3" => base.with_n_eff(3.0).ok(),
        "paper-n14.7" => base.with_n_eff(14.7).ok(),
        _ => None,
    }
}

impl SystemParams {
    pub fn new(raw: RawParams) -> Result<Self> {
        Self::try_from(raw)
    }

    /// The `paper-fig2` preset.
    pub fn reference() -> Self {
        Self::try_from(REFERENCE_RAW).expect("preset is valid")
    }

    pub fn raw(&self) -> RawParams {
        RawParams {
            kappa1: self.kappa1,
            kappa2: self.kappa2,
            kappa_loss: self.kappa_loss,
            g: self.g,
            gamma: self.gamma,
            n_eff: self.n_eff,
            delta_atom: self.delta_atom,
            delta_cav: self.delta_cav,
            wavelength: self.wavelength,
            cavity_length: self.cavity_length,
        }
    }

    fn modify(&self, f: impl FnOnce(&mut RawParams)) -> Result<Self> {
        let mut raw = self.raw();
        f(&mut raw);
        Self::try_from(raw)
    }

    pub fn with_n_eff(&self, n_eff: f64) -> Result<Self> {
        self.modify(|r| r.n_eff = n_eff)
    }

    pub fn with_g(&self, g: f64) -> Result<Self> {
        self.modify(|r| r.g = g)
    }

    pub fn with_detunings(&self, delta_atom: f64, delta_cav: f64) -> Result<Self> {
        self.modify(|r| {
            r.delta_atom = delta_atom;
            r.delta_cav = delta_cav;
        })
    }

    pub fn with_mirrors(&self, kappa1: f64, kappa2: f64, kappa_loss: f64) -> Result<Self> {
        self.modify(|r| {
            r.kappa1 = kappa1;
            r.kappa2 = kappa2;
            r.kappa_loss = kappa_loss;
        })
    }

    /// Same system with Δ = δ = 0.
    pub fn at_resonance(&self) -> Self {
        Self {
            delta_atom: 0.0,
            delta_cav: 0.0,
            ..*self
        }
    }

    pub fn kappa1(&self) -> f64 {
        self.kappa1
    }
    pub fn kappa2(&self) -> f64 {
        self.kappa2
    }
    pub fn kappa_loss(&self) -> f64 {
        self.kappa_loss
    }
    pub fn g(&self) -> f64 {
        self.g
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn n_eff(&self) -> f64 {
        self.n_eff
    }
    /// Δ = ω_at − ω_p.
    pub fn delta_atom(&self) -> f64 {
        self.delta_atom
    }
    /// δ = ω_cav − ω_p.
    pub fn delta_cav(&self) -> f64 {
        self.delta_cav
    }
    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }
    pub fn cavity_length(&self) -> f64 {
        self.cavity_length
    }

    /// Total cavity field decay rate κ = κ₁ + κ₂ + κ_loss.
    pub fn kappa(&self) -> f64 {
        self.kappa1 + self.kappa2 + self.kappa_loss
    }

    /// Collective coupling Ω = √N·g.
    pub fn omega(&self) -> f64 {
        self.n_eff.sqrt() * self.g
    }

    /// Cooperativity C = N·g²/(2κγ).
    pub fn cooperativity(&self) -> f64 {
        self.n_eff * self.g * self.g / (2.0 * self.kappa() * self.gamma)
    }

    /// ω_at − ω_cav = Δ − δ.
    pub fn atom_cavity_offset(&self) -> f64 {
        self.delta_atom - self.delta_cav
    }

    /// Critical transmitted flux P_ct = κ_out(Δ² + γ²)/g² for the given direction.
    pub fn saturation_flux(&self, direction: Direction) -> f64 {
        direction.output_kappa(self) * (self.delta_atom.powi(2) + self.gamma.powi(2))
            / (self.g * self.g)
    }

    /// Empty-cavity resonant transmission 4κ₁κ₂/κ².
    pub fn empty_cavity_transmission(&self) -> f64 {
        4.0 * self.kappa1 * self.kappa2 / self.kappa().powi(2)
    }

    /// Parses the flat `key = value` config format on top of `base`.
    ///
    /// Keys and units: `preset` (name, replaces the base and must come
    /// first), `kappa1`, `kappa2`, `kappa_loss`, `g`, `gamma`, `delta_atom`,
    /// `delta_cav` in MHz, `n_eff`, `wavelength` in nm, `cavity_length` in
    /// µm, and `t1_ppm`, `t2_ppm`, `loss_ppm` which set κ₁, κ₂, κ_loss from
    /// mirror transmissions at the final cavity length. `#` starts a comment.
    pub fn from_config_str(text: &str, base: SystemParams) -> Result<Self> {
        let mut raw = base.raw();
        let mut ppm: [Option<(f64, usize)>; 3] = [None; 3];
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let err = |message: String| Error::Config {
                line: lineno,
                message,
            };
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            let value = value.trim();
            if key == "preset" {
                raw = preset(value)
                    .ok_or_else(|| err(format!("unknown preset `{value}`")))?
                    .raw();
                continue;
            }
            let number: f64 = value
                .parse()
                .map_err(|_| err(format!("`{key}`: `{value}` is not a number")))?;
            match key {
                "kappa1" => raw.kappa1 = mhz(number),
                "kappa2" => raw.kappa2 = mhz(number),
                "kappa_loss" => raw.kappa_loss = mhz(number),
                "g" => raw.g = mhz(number),
                "gamma" => raw.gamma = mhz(number),
                "delta_atom" => raw.delta_atom = mhz(number),
                "delta_cav" => raw.delta_cav = mhz(number),
                "n_eff" => raw.n_eff = number,
                "wavelength" => raw.wavelength = number * 1e-9,
                "cavity_length" => raw.cavity_length = number * 1e-6,
                "t1_ppm" => ppm[0] = Some((number, lineno)),
                "t2_ppm" => ppm[1] = Some((number, lineno)),
                "loss_ppm" => ppm[2] = Some((number, lineno)),
                _ => return Err(err(format!("unknown key `{key}`"))),
            }
        }
        for (slot, target) in ppm.into_iter().zip(0..3) {
            if let Some((value, line)) = slot {
                let rate =
                    mirror_ppm_to_rate(value, raw.cavity_length).map_err(|e| Error::Config {
                        line,
                        message: e.to_string(),
                    })?;
                match target {
                    0 => raw.kappa1 = rate,
                    1 => raw.kappa2 = rate,
                    _ => raw.kappa_loss = rate,
                }
            }
        }
        Self::try_from(raw)
    }

    pub fn from_config_file(path: impl AsRef<Path>, base: SystemParams) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_config_str(&text, base)
    }

    /// Renders the parameters in the config format, MHz for rates.
    pub fn to_config_string(&self) -> String {
        format!(
            "kappa1 = {}\nkappa2 = {}\nkappa_loss = {}\ng = {}\ngamma = {}\nn_eff = {}\n\
             delta_atom = {}\ndelta_cav = {}\nwavelength = {}\ncavity_length = {}\n",
            to_mhz(self.kappa1),
            to_mhz(self.kappa2),
            to_mhz(self.kappa_loss),
            to_mhz(self.g),
            to_mhz(self.gamma),
            self.n_eff,
            to_mhz(self.delta_atom),
            to_mhz(self.delta_cav),
            self.wavelength * 1e9,
            self.cavity_length * 1e6,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_preset_derived_quantities() {
        let p = SystemParams::reference();
        assert!((to_mhz(p.kappa()) - 3.7).abs() < 1e-12);
        assert!((to_mhz(p.omega()) - 12.8f64.sqrt() * 5.5).abs() < 1e-9);
        // 12.8 · 5.5² / (2 · 3.7 · 2.6)
        assert!((p.cooperativity() - 20.1247).abs() < 1e-3);
        assert!((p.empty_cavity_transmission() - 0.181154).abs() < 1e-5);
        assert!((to_mhz(p.atom_cavity_offset()) + 0.64).abs() < 1e-12);
    }

    #[test]
    fn saturation_flux_picks_output_mirror() {
        let p = SystemParams::reference().at_resonance();
        let f = p.saturation_flux(Direction::Forward);
        let b = p.saturation_flux(Direction::Backward);
        assert!((b / f - 15.5).abs() < 1e-12);
        let expected = p.kappa2() * p.gamma().powi(2) / p.g().powi(2);
        assert_eq!(f, expected);
    }

    #[test]
    fn invalid_params_fail_loudly() {
        let p = SystemParams::reference();
        assert!(p.with_n_eff(-0.1).is_err());
        assert!(p.with_g(0.0).is_err());
        assert!(p.with_mirrors(1.0, 0.0, 0.0).is_err());
        assert!(p.with_mirrors(1.0, 1.0, -1.0).is_err());
        assert!(p.with_detunings(f64::NAN, 0.0).is_err());
        let mut raw = p.raw();
        raw.gamma = -1.0;
        match SystemParams::new(raw) {
            Err(Error::InvalidParam { name, .. }) => assert_eq!(name, "gamma"),
            other => panic!("expected InvalidParam, got {other:?}"),
        }
    }

    #[test]
    fn serde_validates() {
        let json = serde_json::to_string(&SystemParams::reference()).unwrap();
        let back: SystemParams = serde_json::from_str(&json).unwrap();
        assert_eq!(back, SystemParams::reference());
        let bad = json.replace("\"n_eff\":12.8", "\"n_eff\":-1.0");
        assert!(serde_json::from_str::<SystemParams>(&bad).is_err());
    }

    #[test]
    fn presets_resolve() {
        for (name, _) in PRESETS {
            assert!(preset(name).is_some(), "{name}");
        }
        assert_eq!(preset("paper-n3").unwrap().n_eff(), 3.0);
        assert_eq!(preset("paper-resonant").unwrap().delta_atom(), 0.0);
        assert!(preset("nope").is_none());
    }

    #[test]
    fn config_parsing() {
        let text = "preset = paper-resonant\n# comment\nn_eff = 5  # trailing\ng = 6.0\n";
        let p = SystemParams::from_config_str(text, SystemParams::reference()).unwrap();
        assert_eq!(p.n_eff(), 5.0);
        assert!((to_mhz(p.g()) - 6.0).abs() < 1e-12);
        assert_eq!(p.delta_atom(), 0.0);

        let p = SystemParams::from_config_str(
            "t1_ppm = 88.9\nt2_ppm = 5.1\nloss_ppm = 10.8\ncavity_length = 335",
            SystemParams::reference(),
        )
        .unwrap();
        assert!((to_mhz(p.kappa1()) - 3.1656).abs() < 1e-3);

        let round = SystemParams::from_config_str(&p.to_config_string(), SystemParams::reference())
            .unwrap();
        assert!((round.kappa1() / p.kappa1() - 1.0).abs() < 1e-12);

        match SystemParams::from_config_str("n_eff = 1\nfoo = 2\n", SystemParams::reference()) {
            Err(Error::Config { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(SystemParams::from_config_str("n_eff = -1", SystemParams::reference()).is_err());
        assert!(SystemParams::from_config_str("n_eff 3", SystemParams::reference()).is_err());
    }
}
