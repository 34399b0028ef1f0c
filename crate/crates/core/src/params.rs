//! Physical parameters, lattice description and configuration files.
//!
//! Every frequency is an angular frequency in rad/s and every rate is in 1/s.
//! Omitted keys fall back to the reference parameter set (`Default`), so a
//! config file only needs to name the scenario.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::constants::{CA40_MASS, E_CHARGE, HBAR, K_B};
use crate::error::{Error, Result};
use crate::scenario::ScenarioSpec;

/// Scalars shared by every scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalParams {
    /// Optical transition frequency, rad/s (cavity frequency taken equal).
    pub omega0: f64,
    /// Hyperfine splitting between the two lower states, rad/s.
    pub omega10: f64,
    /// One-photon Raman detuning, rad/s.
    pub detuning_ci: f64,
    /// Highest lattice vibration frequency, rad/s.
    pub nu_max: f64,
    /// Gating-field one-photon Rabi frequency for cases (i) and (ii), rad/s.
    pub omega_rabi: [f64; 2],
    /// Cavity one-photon Rabi frequency per lower state a = 0, 1, rad/s.
    pub g_cavity: [f64; 2],
    /// Spontaneous emission rate of the 2-a transition, 1/s.
    pub gamma_se: [f64; 2],
    /// Lamb-Dicke parameter.
    pub eta: f64,
    /// Cavity decay rate, 1/s.
    pub gamma_cav: f64,
    /// Cavity quality factor.
    pub q_factor: f64,
    /// Reservoir temperature, K.
    pub temperature: f64,
    pub n_qubits: usize,
    /// Angle between the dipole matrix elements d_20 and d_21, rad.
    pub dipole_angle: f64,
    /// Cavity mode volume, m^3. Only the ion-current coupling depends on it.
    pub cavity_volume: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            omega0: 3.0e15,
            omega10: 6.0e9,
            detuning_ci: 3.0e10,
            nu_max: 8.0e7,
            omega_rabi: [3.0e6, 3.0e8],
            g_cavity: [3.0e8, 3.0e8],
            gamma_se: [3.0e4, 3.0e4],
            eta: 6.0e-2,
            gamma_cav: 3.0e8,
            q_factor: 1.0e7,
            temperature: 300.0,
            n_qubits: 10_000,
            dipole_angle: 0.0,
            cavity_volume: 1.3e-15,
        }
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("omega0", self.omega0),
            ("omega10", self.omega10),
            ("detuning_ci", self.detuning_ci),
            ("nu_max", self.nu_max),
            ("omega_rabi[0]", self.omega_rabi[0]),
            ("omega_rabi[1]", self.omega_rabi[1]),
            ("eta", self.eta),
            ("gamma_cav", self.gamma_cav),
            ("q_factor", self.q_factor),
            ("cavity_volume", self.cavity_volume),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParam(format!("{name} must be positive, got {v}")));
            }
        }
        // per-transition couplings may be switched off individually
        for (name, arr) in [("g_cavity", self.g_cavity), ("gamma_se", self.gamma_se)] {
            for (a, v) in arr.iter().enumerate() {
                if !(v.is_finite() && *v >= 0.0) {
                    return Err(Error::InvalidParam(format!(
                        "{name}[{a}] must be non-negative, got {v}"
                    )));
                }
            }
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(Error::InvalidParam(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if self.n_qubits < 1 {
            return Err(Error::InvalidParam("n_qubits must be >= 1".into()));
        }
        if !self.dipole_angle.is_finite() {
            return Err(Error::InvalidParam("dipole_angle must be finite".into()));
        }
        let q_implied = self.omega0 / self.gamma_cav;
        let ratio = q_implied / self.q_factor;
        if !(0.1..=10.0).contains(&ratio) {
            log::warn!(
                "q_factor {:.3e} inconsistent with omega0/gamma_cav = {:.3e}",
                self.q_factor,
                q_implied
            );
        }
        Ok(())
    }

    /// cos(theta_ab) between dipole elements; 1 on the diagonal.
    pub fn dipole_cos(&self, a: usize, b: usize) -> f64 {
        if a == b {
            1.0
        } else {
            self.dipole_angle.cos()
        }
    }

    /// Energy of lower level a relative to level 0, rad/s.
    pub fn lower_level_energy(&self, a: usize) -> f64 {
        if a == 0 {
            0.0
        } else {
            self.omega10
        }
    }

    /// Names accepted by [`PhysicalParams::set`] for parameter sweeps.
    pub const SWEEPABLE: &'static [&'static str] = &[
        "omega0",
        "omega10",
        "detuning_ci",
        "nu_max",
        "omega_rabi",
        "omega_rabi.0",
        "omega_rabi.1",
        "g_cavity",
        "g_cavity.0",
        "g_cavity.1",
        "gamma_se",
        "gamma_se.0",
        "gamma_se.1",
        "eta",
        "gamma_cav",
        "q_factor",
        "temperature",
        "n_qubits",
        "dipole_angle",
        "cavity_volume",
    ];

    /// Set a named field. Array fields without an index suffix set both entries.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        match name {
            "omega0" => self.omega0 = value,
            "omega10" => self.omega10 = value,
            "detuning_ci" => self.detuning_ci = value,
            "nu_max" => self.nu_max = value,
            "omega_rabi" => self.omega_rabi = [value; 2],
            "omega_rabi.0" => self.omega_rabi[0] = value,
            "omega_rabi.1" => self.omega_rabi[1] = value,
            "g_cavity" => self.g_cavity = [value; 2],
            "g_cavity.0" => self.g_cavity[0] = value,
            "g_cavity.1" => self.g_cavity[1] = value,
            "gamma_se" => self.gamma_se = [value; 2],
            "gamma_se.0" => self.gamma_se[0] = value,
            "gamma_se.1" => self.gamma_se[1] = value,
            "eta" => self.eta = value,
            "gamma_cav" => self.gamma_cav = value,
            "q_factor" => self.q_factor = value,
            "temperature" => self.temperature = value,
            "n_qubits" => {
                if !(value.is_finite() && value >= 1.0) {
                    return Err(Error::InvalidParam(format!("n_qubits must be >= 1, got {value}")));
                }
                self.n_qubits = value.round() as usize;
            }
            "dipole_angle" => self.dipole_angle = value,
            "cavity_volume" => self.cavity_volume = value,
            other => {
                return Err(Error::InvalidParam(format!("unknown parameter '{other}'")));
            }
        }
        Ok(())
    }
}

/// exp(-hbar omega0 / k_B T); exactly 0 at T = 0.
pub fn boltzmann_factor(params: &PhysicalParams) -> f64 {
    boltzmann(params.omega0, params.temperature)
}

pub(crate) fn boltzmann(omega: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    (-HBAR * omega / (K_B * temperature)).exp()
}

/// Cubic block of trapped ions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeSpec {
    /// Ions per axis.
    pub dims: [usize; 3],
    /// Lattice constant, m.
    pub spacing: f64,
    /// Ion mass, kg.
    pub ion_mass: f64,
    /// Ion charge, C.
    pub ion_charge: f64,
    /// Per-site harmonic confinement, rad/s. Calibrated against `nu_max` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trap_freq: Option<f64>,
    /// Coulomb pairs further apart than this (m) are dropped. All pairs when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub neighbor_cutoff: Option<f64>,
    /// Position of site 0, m.
    pub origin: [f64; 3],
}

impl Default for LatticeSpec {
    fn default() -> Self {
        Self {
            dims: [4, 4, 4],
            spacing: 3.0e-6,
            ion_mass: CA40_MASS,
            ion_charge: E_CHARGE,
            trap_freq: None,
            neighbor_cutoff: None,
            origin: [0.0; 3],
        }
    }
}

impl LatticeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.origin.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParam("lattice origin must be finite".into()));
        }
        if self.dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidParam(format!(
                "lattice dims must all be >= 1, got {:?}",
                self.dims
            )));
        }
        for (name, v) in [
            ("spacing", self.spacing),
            ("ion_mass", self.ion_mass),
            ("ion_charge", self.ion_charge),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParam(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("trap_freq", self.trap_freq), ("neighbor_cutoff", self.neighbor_cutoff)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::InvalidParam(format!("{name} must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }

    pub fn n_ions(&self) -> usize {
        self.dims.iter().product()
    }

    /// Position of site `index`, x fastest. Indices past the block keep
    /// stacking layers along z, so any qubit count has a position.
    pub fn site_position(&self, index: usize) -> Vector3<f64> {
        let [nx, ny, _] = self.dims;
        let x = index % nx;
        let y = (index / nx) % ny;
        let z = index / (nx * ny);
        Vector3::from(self.origin) + Vector3::new(x as f64, y as f64, z as f64) * self.spacing
    }

    pub fn site_positions(&self) -> Vec<Vector3<f64>> {
        (0..self.n_ions()).map(|i| self.site_position(i)).collect()
    }
}

/// Everything a run needs: `[params]`, `[lattice]` and `[scenario]` sections.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub params: PhysicalParams,
    pub lattice: LatticeSpec,
    pub scenario: ScenarioSpec,
}

impl Config {
    /// Parse without requiring a scenario (the CLI may supply one).
    pub fn parse_lenient(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            if msg.contains("unknown variant") {
                Error::Config(format!("unknown scenario name: {msg}"))
            } else {
                Error::Config(e.to_string())
            }
        })?;
        cfg.params.validate()?;
        cfg.lattice.validate()?;
        cfg.scenario.validate_fields()?;
        Ok(cfg)
    }

    /// Parse and require `scenario.kind`.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg = Self::parse_lenient(text)?;
        if cfg.scenario.kind.is_none() {
            return Err(Error::Config("scenario required".into()));
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Load and validate a config file; `scenario.kind` is required.
pub fn load_config(path: impl AsRef<Path>) -> Result<(PhysicalParams, LatticeSpec, ScenarioSpec)> {
    let cfg = Config::parse(&read(path.as_ref())?)?;
    Ok((cfg.params, cfg.lattice, cfg.scenario))
}

/// Like [`load_config`] but tolerates a missing scenario.
pub fn load_config_lenient(path: impl AsRef<Path>) -> Result<Config> {
    Config::parse_lenient(&read(path.as_ref())?)
}
