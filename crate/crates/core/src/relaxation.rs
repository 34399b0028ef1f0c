//! Markovian relaxation matrices.
//!
//! An element `Gamma_{a;b}` pairs two system operators and multiplies
//! `<S_a S_b^dag> - <S_a><S_b^dag>` in the decoherence rate. Elements come either
//! from reservoir correlation integrals ([`correlation_integral`] followed by
//! [`gamma_delta`]) or from the closed forms of the three gating scenarios.
//!
//! Several closed forms are complex, with a phase set by the gating-field
//! carrier. Every entry therefore also stores an `envelope`, the phase-free
//! magnitude that the magnitude mode of the rate assembly uses.

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::FRAC_PI_4;
use std::path::Path;

use nalgebra::{DMatrix, Vector3};
use quadrature::double_exponential;
use serde::{Deserialize, Serialize};

use crate::constants::{HBAR, K_B};
use crate::couplings::{compute_internal_couplings, GatingField, InternalCouplings};
use crate::error::{Error, Result};
use crate::ops::{CavityOp, Channel, Site};
use crate::params::{LatticeSpec, PhysicalParams};
use crate::quad;
use crate::C64;

/// Value of the idle-qubit LD-cavity element quoted in the reference tables.
pub const TABLE_LD_CAVITY: f64 = 3.0e-9;
/// Default idle `ka-C+;kb-C+` element when the 2-0 transition couples to the cavity.
pub const DEFAULT_IDLE_CAVITY_PLUS: f64 = 1.0e6;

const HERMITIAN_TOL: f64 = 1e-12;

/// Physical origin of a group of relaxation elements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Thermal upward excitation of ungated qubits by spontaneous-emission modes.
    SpontaneousEmission,
    /// `ka-C;kb-C` on an idle qubit.
    IdleLdCavity,
    /// `ia-;ib-` on the gated qubit.
    LdGating,
    /// `ia+;ib+` on the gated qubit.
    SeGated,
    /// `ia-C;ib-C` on the gated qubit.
    LdCavity,
    /// `ia+C;ib+C` on the gated qubit.
    LdCavityPlus,
    /// Control qubit `ia-;ib-`, term 23.
    ControlGating,
    /// Control-target `ia-;jb-`, term 24.
    CrossGating,
    /// Target-control `ja-;ib-`, term 34.
    CrossGatingRev,
    /// Target qubit `ja-;jb-`, term 35.
    TargetGating,
    /// Cavity decay `C+;C+`, term 120.
    CavityDecay,
    /// `ka-;kb-` on an idle qubit.
    IdleGating,
    /// `ka-;kb-C` and its conjugate on an idle qubit.
    IdleGatingCavity,
    /// `ka-;kb-C+` and its conjugate on an idle qubit.
    IdleGatingCavityPlus,
    /// `ka+C;kb+C` on an idle qubit.
    IdleLdCavityPlus,
    /// `ka-C+;kb-C+` on an idle qubit.
    IdleCavityPlus,
    Generic,
}

impl Family {
    /// Non-gated families that vanish when the 2-0 transition is uncoupled from the cavity.
    pub const TWO_QUBIT_ZERO: [Family; 5] = [
        Family::IdleGating,
        Family::IdleGatingCavity,
        Family::IdleGatingCavityPlus,
        Family::IdleLdCavity,
        Family::IdleLdCavityPlus,
    ];

    /// Subscript notation of the element.
    pub fn symbol(self) -> &'static str {
        match self {
            Family::SpontaneousEmission => "ka;kb",
            Family::IdleLdCavity => "ka-C;kb-C",
            Family::LdGating => "ia-;ib-",
            Family::SeGated => "ia+;ib+",
            Family::LdCavity => "ia-C;ib-C",
            Family::LdCavityPlus => "ia+C;ib+C",
            Family::ControlGating => "ia-;ib-",
            Family::CrossGating => "ia-;jb-",
            Family::CrossGatingRev => "ja-;ib-",
            Family::TargetGating => "ja-;jb-",
            Family::CavityDecay => "C+;C+",
            Family::IdleGating => "ka-;kb-",
            Family::IdleGatingCavity => "ka-;kb-C",
            Family::IdleGatingCavityPlus => "ka-;kb-C+",
            Family::IdleLdCavityPlus => "ka+C;kb+C",
            Family::IdleCavityPlus => "ka-C+;kb-C+",
            Family::Generic => "a;b",
        }
    }

    /// Short description of the coupling responsible.
    pub fn effect(self) -> &'static str {
        match self {
            Family::SpontaneousEmission | Family::SeGated => "SE",
            Family::IdleLdCavity
            | Family::LdCavity
            | Family::LdCavityPlus
            | Family::IdleLdCavityPlus
            | Family::IdleCavityPlus => "LD-cavity",
            Family::LdGating
            | Family::ControlGating
            | Family::CrossGating
            | Family::CrossGatingRev
            | Family::TargetGating
            | Family::IdleGating => "LD-gating",
            Family::IdleGatingCavity | Family::IdleGatingCavityPlus => "LD-gating/cavity",
            Family::CavityDecay => "cavity decay",
            Family::Generic => "generic",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioTag {
    NoGating,
    OneQubit,
    TwoQubit,
    Generic,
}

/// One element `Gamma_{left;right}` with its shift and magnitude envelope.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RelaxationEntry {
    pub family: Family,
    pub left: Channel,
    pub right: Channel,
    /// Gamma, 1/s.
    pub gamma: C64,
    /// Delta, rad/s.
    pub shift: C64,
    /// Phase-free magnitude of `gamma`, 1/s.
    pub envelope: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RelaxationSet {
    pub scenario: ScenarioTag,
    pub entries: Vec<RelaxationEntry>,
    pub notes: Vec<String>,
}

impl RelaxationSet {
    pub fn new(scenario: ScenarioTag) -> Self {
        Self { scenario, entries: Vec::new(), notes: Vec::new() }
    }

    pub fn push(&mut self, family: Family, left: Channel, right: Channel, gamma: C64, envelope: f64) {
        self.entries.push(RelaxationEntry {
            family,
            left,
            right,
            gamma,
            shift: C64::new(0.0, 0.0),
            envelope,
        });
    }

    pub fn element(&self, left: &Channel, right: &Channel) -> Option<C64> {
        self.entries
            .iter()
            .find(|e| e.left == *left && e.right == *right)
            .map(|e| e.gamma)
    }

    pub fn family(&self, family: Family) -> impl Iterator<Item = &RelaxationEntry> {
        self.entries.iter().filter(move |e| e.family == family)
    }

    /// Families present, in a fixed order.
    pub fn families(&self) -> Vec<Family> {
        self.entries.iter().map(|e| e.family).collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// Qubits named explicitly by some entry.
    pub fn gated_sites(&self) -> BTreeSet<usize> {
        self.entries
            .iter()
            .flat_map(|e| [e.left.site(), e.right.site()])
            .filter_map(|s| match s {
                Some(Site::Qubit(i)) => Some(i),
                _ => None,
            })
            .collect()
    }

    /// Copy with every element, shift and envelope multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for e in &mut out.entries {
            e.gamma *= factor;
            e.shift *= factor;
            e.envelope *= factor.abs();
        }
        out
    }

    /// Check the Hermiticity of Gamma and Delta. A diagonal element with
    /// negative real part is logged, since printed phases can produce one.
    pub fn validate(&self) -> Result<()> {
        let index: HashMap<(Channel, Channel), &RelaxationEntry> =
            self.entries.iter().map(|e| ((e.left, e.right), e)).collect();
        let close = |x: C64, y: C64| (x - y).norm() <= HERMITIAN_TOL * x.norm().max(y.norm()).max(f64::MIN_POSITIVE);
        for e in &self.entries {
            let (g_t, d_t) = match index.get(&(e.right, e.left)) {
                Some(t) => (t.gamma, t.shift),
                None => (C64::new(0.0, 0.0), C64::new(0.0, 0.0)),
            };
            if !close(e.gamma, g_t.conj()) {
                return Err(Error::Numerical(format!(
                    "relaxation: Gamma[{};{}] = {} but conj Gamma[{};{}] = {}",
                    e.left, e.right, e.gamma, e.right, e.left, g_t.conj()
                )));
            }
            if !close(e.shift, d_t.conj()) {
                return Err(Error::Numerical(format!(
                    "relaxation: Delta[{};{}] not Hermitian",
                    e.left, e.right
                )));
            }
            if e.left == e.right && e.gamma.re < 0.0 {
                log::warn!("relaxation: diagonal Gamma[{};{}] = {} has negative real part", e.left, e.right, e.gamma);
            }
        }
        Ok(())
    }

    /// Rows `(label_a, label_b, re, im)` of Gamma.
    pub fn csv_rows(&self) -> Vec<(String, String, f64, f64)> {
        self.entries
            .iter()
            .map(|e| (e.left.to_string(), e.right.to_string(), e.gamma.re, e.gamma.im))
            .collect()
    }

    /// `family,label_a,label_b,re,im`, one row per element.
    pub fn to_csv(&self) -> Result<String> {
        let err = |e: csv::Error| Error::Report(e.to_string());
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["family", "label_a", "label_b", "re", "im"]).map_err(err)?;
        for e in &self.entries {
            w.write_record([
                e.family.symbol().to_string(),
                e.left.to_string(),
                e.right.to_string(),
                format!("{:.6e}", e.gamma.re),
                format!("{:.6e}", e.gamma.im),
            ])
            .map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Report(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Report(e.to_string()))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()?).map_err(|source| Error::Io { path: path.display().to_string(), source })
    }
}

/// Reservoir spectral density J(omega), normalised so a flat density of
/// `rate / 2 pi` gives the golden-rule decay rate `rate`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectralModel {
    Zero,
    /// `rate / 2 pi` on `[lo, hi]`.
    Flat { rate: f64, lo: f64, hi: f64 },
    /// `(rate / 2 pi) w^2 / ((omega - center)^2 + w^2)`.
    Lorentzian { rate: f64, center: f64, width: f64 },
}

/// Which half of the bosonic correlation is integrated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Process {
    /// Weight n + 1.
    Emission,
    /// Weight n.
    Absorption,
}

const LORENTZ_CUTOFF: f64 = 1.0e4;

impl SpectralModel {
    pub fn density(&self, omega: f64) -> f64 {
        let two_pi = 2.0 * std::f64::consts::PI;
        match *self {
            SpectralModel::Zero => 0.0,
            SpectralModel::Flat { rate, lo, hi } => {
                if (lo..=hi).contains(&omega) {
                    rate / two_pi
                } else {
                    0.0
                }
            }
            SpectralModel::Lorentzian { rate, center, width } => {
                rate / two_pi * width * width / ((omega - center).powi(2) + width * width)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |why: String| Err(Error::NonConvergent(why));
        match *self {
            SpectralModel::Zero => Ok(()),
            SpectralModel::Flat { rate, lo, hi } => {
                if !(rate.is_finite() && lo.is_finite() && hi.is_finite() && lo < hi) {
                    return bad(format!("flat band needs finite rate and lo < hi, got rate {rate}, [{lo}, {hi}]"));
                }
                Ok(())
            }
            SpectralModel::Lorentzian { rate, center, width } => {
                if !(rate.is_finite() && center.is_finite() && width.is_finite() && width > 0.0) {
                    return bad(format!("Lorentzian needs a positive width, got {width}"));
                }
                Ok(())
            }
        }
    }

    fn finest_scale(&self) -> f64 {
        match *self {
            SpectralModel::Zero => f64::INFINITY,
            SpectralModel::Flat { lo, hi, .. } => hi - lo,
            SpectralModel::Lorentzian { width, .. } => width,
        }
    }

    /// Integration range used for the thermal correction.
    fn thermal_support(&self) -> (f64, f64) {
        match *self {
            SpectralModel::Zero => (0.0, 0.0),
            SpectralModel::Flat { lo, hi, .. } => (lo, hi),
            SpectralModel::Lorentzian { center, width, .. } => {
                (center - LORENTZ_CUTOFF * width, center + LORENTZ_CUTOFF * width)
            }
        }
    }

    /// `int d omega' J(omega') / (eps - i (omega' - omega))` in closed form.
    fn vacuum_kernel(&self, omega: f64, eps: f64) -> C64 {
        match *self {
            SpectralModel::Zero => C64::new(0.0, 0.0),
            SpectralModel::Flat { rate, lo, hi } => {
                let j = rate / (2.0 * std::f64::consts::PI);
                let (u0, u1) = (lo - omega, hi - omega);
                let re = j * ((u1 / eps).atan() - (u0 / eps).atan());
                let im = 0.5 * j * ((eps * eps + u1 * u1).ln() - (eps * eps + u0 * u0).ln());
                C64::new(re, im)
            }
            SpectralModel::Lorentzian { rate, center, width } => {
                C64::new(0.5 * rate * width, 0.0) / C64::new(width + eps, -(center - omega))
            }
        }
    }
}

/// Mean thermal occupation 1 / (exp(hbar omega / k_B T) - 1); 0 at T = 0.
pub fn bose_occupation(omega: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    1.0 / (HBAR * omega / (K_B * temperature)).exp_m1()
}

fn bose_derivative(omega: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    let beta = HBAR / (K_B * temperature);
    let x = beta * omega;
    let e = x.exp();
    -beta * e / (e - 1.0).powi(2)
}

fn weight(process: Process, omega: f64, temperature: f64) -> f64 {
    let n = bose_occupation(omega, temperature);
    match process {
        Process::Emission => n + 1.0,
        Process::Absorption => n,
    }
}

/// One-sided correlation integral `C = int_0^inf d tau <R(t) R(t - tau)^dag> exp(-(i omega + eps) tau)`
/// for a bosonic reservoir with spectral density `model` at `temperature`.
///
/// The convergence factor is 1e-6 times the smaller of `max(|omega|, 1)` and
/// the narrowest feature of the spectral density; the result is
/// recomputed at `eps / 2` and rejected if it moves by more than 1e-3.
pub fn correlation_integral(
    model: &SpectralModel,
    process: Process,
    omega: f64,
    temperature: f64,
) -> Result<C64> {
    model.validate()?;
    if matches!(model, SpectralModel::Zero) {
        return Ok(C64::new(0.0, 0.0));
    }
    if !(omega.is_finite() && temperature.is_finite() && temperature >= 0.0) {
        return Err(Error::NonConvergent(format!("omega {omega}, temperature {temperature}")));
    }
    let eps = 1e-6 * omega.abs().max(1.0).min(model.finest_scale());
    let k1 = model.vacuum_kernel(omega, eps);
    let k2 = model.vacuum_kernel(omega, 0.5 * eps);
    if (k1 - k2).norm() > 1e-3 * k1.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::NonConvergent(format!(
            "result moves from {k1:.6e} to {k2:.6e} when eps is halved at omega = {omega:.6e}"
        )));
    }
    if temperature == 0.0 {
        return Ok(match process {
            Process::Emission => k2,
            Process::Absorption => C64::new(0.0, 0.0),
        });
    }
    let f0 = weight(process, omega, temperature);
    let base = k2 * f0;

    // the occupation varies across the band; the difference is smooth and
    // only shifts the imaginary part
    let (lo, hi) = model.thermal_support();
    if lo <= 0.0 {
        return Err(Error::NonConvergent(format!(
            "thermal weight diverges at zero frequency; band starts at {lo:.3e}"
        )));
    }
    let df0 = bose_derivative(omega, temperature);
    let g = |w: f64| {
        let u = w - omega;
        let ratio = if u.abs() < 1e-9 * omega.abs().max(1.0) {
            df0
        } else {
            (weight(process, w, temperature) - f0) / u
        };
        model.density(w) * ratio
    };
    let mut cuts = vec![lo, hi];
    if omega > lo && omega < hi {
        cuts.push(omega);
    }
    if let SpectralModel::Lorentzian { center, .. } = *model {
        if center > lo && center < hi {
            cuts.push(center);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut rest = 0.0;
    for w in cuts.windows(2) {
        let rough = double_exponential::integrate(g, w[0], w[1], 1e-3 * base.norm().max(1e-300)).integral;
        let tol = (1e-9 * (base.norm() + rough.abs())).max(1e-300);
        rest += quad::integrate_abs(g, w[0], w[1], tol)
            .map_err(|e| Error::NonConvergent(e.to_string()))?;
    }
    Ok(base + C64::new(0.0, rest))
}

/// Relaxation and shift matrices from a correlation matrix over `channels`:
/// `Gamma_ab = (C_ab + C_ba^*) / 2`, `Delta_ab = (C_ab - C_ba^*) / 2i`.
pub fn gamma_delta(c: &DMatrix<C64>, channels: &[Channel]) -> Result<RelaxationSet> {
    let n = channels.len();
    if c.nrows() != n || c.ncols() != n {
        return Err(Error::InvalidParam(format!(
            "correlation matrix is {}x{} for {n} channels",
            c.nrows(),
            c.ncols()
        )));
    }
    let mut set = RelaxationSet::new(ScenarioTag::Generic);
    for a in 0..n {
        for b in 0..n {
            let gamma = (c[(a, b)] + c[(b, a)].conj()) * 0.5;
            let shift = (c[(a, b)] - c[(b, a)].conj()) / C64::new(0.0, 2.0);
            set.entries.push(RelaxationEntry {
                family: Family::Generic,
                left: channels[a],
                right: channels[b],
                gamma,
                shift,
                envelope: gamma.norm(),
            });
        }
    }
    Ok(set)
}

/// Thermal absorption elements for ungated qubits, `sqrt(Gamma_a Gamma_b) cos theta_ab`
/// on the lowering operators of a representative idle qubit. The Boltzmann
/// factor is applied by the rate assembly.
pub fn closed_form_no_gating(params: &PhysicalParams) -> Result<RelaxationSet> {
    params.validate()?;
    let mut set = RelaxationSet::new(ScenarioTag::NoGating);
    for a in 0..2u8 {
        for b in 0..2u8 {
            let (ga, gb) = (params.gamma_se[a as usize], params.gamma_se[b as usize]);
            let v = (ga * gb).sqrt() * params.dipole_cos(a as usize, b as usize);
            set.push(
                Family::SpontaneousEmission,
                Channel::lower(Site::Idle, a),
                Channel::lower(Site::Idle, b),
                C64::new(v, 0.0),
                v.abs(),
            );
        }
    }
    set.notes.push("elements exclude the Boltzmann factor".into());
    Ok(set)
}

/// Gating-field strength of the one-qubit scenario.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum GatingCase {
    /// Weak field, `omega_rabi[0]`.
    #[default]
    #[serde(rename = "i")]
    Weak,
    /// Strong field, `omega_rabi[1]`.
    #[serde(rename = "ii")]
    Strong,
}

impl GatingCase {
    pub fn index(self) -> usize {
        match self {
            GatingCase::Weak => 0,
            GatingCase::Strong => 1,
        }
    }

    pub fn rabi(self, params: &PhysicalParams) -> f64 {
        params.omega_rabi[self.index()]
    }
}

/// Where the idle LD-cavity element comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LdCavitySource {
    /// `(i/8) eta^2 g_a g_b^* omega_ab / omega_0^2`.
    #[default]
    Formula,
    /// The same phases rescaled to the tabulated magnitude [`TABLE_LD_CAVITY`].
    Table,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OneQubitSetup {
    pub case: GatingCase,
    pub gated_qubit: usize,
    /// Carrier phase phi. When absent each gated qubit sees a locally
    /// phase-matched field with `k.r_i + phi = -pi/4`.
    pub carrier_phase: Option<f64>,
    pub dphi: f64,
    pub ld_cavity_source: LdCavitySource,
    /// Give `ia+C;ia+C` the magnitude `eta^2 |g_a|^2 / nu_max` instead of the
    /// zero implied by the `(1 - delta_ab)` factor.
    pub plus_c_diagonal: bool,
}

impl Default for OneQubitSetup {
    fn default() -> Self {
        Self {
            case: GatingCase::Weak,
            gated_qubit: 0,
            carrier_phase: None,
            dphi: 0.0,
            ld_cavity_source: LdCavitySource::Formula,
            plus_c_diagonal: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoQubitSetup {
    pub control: usize,
    pub target: usize,
    /// Carrier phase phi. When absent each gated qubit sees a locally
    /// phase-matched field with `k.r_i + phi = pi/4`.
    pub carrier_phase: Option<f64>,
    pub dphi: f64,
    /// Keep `g_cavity[0]`; by default the 2-0 transition is uncoupled.
    pub couple_g0: bool,
    /// Idle `ka-C+;kb-C+` diagonal used when `g_k0 != 0`, 1/s.
    pub idle_cavity_plus: f64,
}

impl Default for TwoQubitSetup {
    fn default() -> Self {
        Self {
            control: 0,
            target: 1,
            carrier_phase: None,
            dphi: 0.0,
            couple_g0: false,
            idle_cavity_plus: DEFAULT_IDLE_CAVITY_PLUS,
        }
    }
}

struct Field<'a> {
    internal: &'a InternalCouplings,
    amplitude: f64,
    carrier: Option<f64>,
    matched: f64,
    dphi: f64,
}

impl Field<'_> {
    /// Omega_ia = -i |Omega| exp(i (phase_i + [a = 0] dphi)).
    fn rabi(&self, i: usize, a: u8) -> C64 {
        let base = match self.carrier {
            Some(phi) => self.internal.site_phase(i) + phi,
            None => self.matched,
        };
        let extra = if a == 0 { self.dphi } else { 0.0 };
        C64::new(0.0, -1.0) * C64::from_polar(self.amplitude, base + extra)
    }
}

fn omega_ab(params: &PhysicalParams, a: u8, b: u8) -> f64 {
    params.lower_level_energy(a as usize) - params.lower_level_energy(b as usize)
}

/// `(i/8) eta^2 g_a g_b^* omega_ab / omega_0^2` with phase-free couplings.
fn ld_cavity_minus(params: &PhysicalParams, a: u8, b: u8) -> C64 {
    let g = params.g_cavity;
    C64::new(0.0, 0.125)
        * params.eta.powi(2)
        * g[a as usize]
        * g[b as usize]
        * omega_ab(params, a, b)
        / params.omega0.powi(2)
}

/// `i eta^2 g_a g_b^* (1 - delta_ab) (-1)^a / nu_max`.
fn ld_cavity_plus(params: &PhysicalParams, a: u8, b: u8) -> C64 {
    if a == b {
        return C64::new(0.0, 0.0);
    }
    let sign = if a == 0 { 1.0 } else { -1.0 };
    let g = params.g_cavity;
    C64::new(0.0, sign) * params.eta.powi(2) * g[a as usize] * g[b as usize] / params.nu_max
}

fn check_qubit(params: &PhysicalParams, i: usize, what: &str) -> Result<()> {
    if i >= params.n_qubits {
        return Err(Error::InvalidParam(format!(
            "{what} qubit {i} outside a register of {}",
            params.n_qubits
        )));
    }
    Ok(())
}

/// Relaxation elements of a single detuned Raman gating step on `setup.gated_qubit`.
pub fn closed_form_one_qubit(
    params: &PhysicalParams,
    lattice: &LatticeSpec,
    setup: &OneQubitSetup,
) -> Result<RelaxationSet> {
    params.validate()?;
    lattice.validate()?;
    let i = setup.gated_qubit;
    check_qubit(params, i, "gated")?;
    let amplitude = setup.case.rabi(params);
    let internal = compute_internal_couplings(
        params,
        lattice,
        GatingField { amplitude, carrier_phase: setup.carrier_phase.unwrap_or(0.0), dphi: setup.dphi },
    );
    let field = Field { internal: &internal, amplitude, carrier: setup.carrier_phase, matched: -FRAC_PI_4, dphi: setup.dphi };
    let eta2 = params.eta.powi(2);
    let delta = params.detuning_ci;
    let q = Site::Qubit(i);
    let mut set = RelaxationSet::new(ScenarioTag::OneQubit);

    let formula_max = ld_cavity_minus(params, 0, 1).norm();
    let cavity_scale = match setup.ld_cavity_source {
        LdCavitySource::Formula => 1.0,
        LdCavitySource::Table if formula_max > 0.0 => TABLE_LD_CAVITY / formula_max,
        LdCavitySource::Table => 0.0,
    };
    set.notes.push(format!(
        "ka-C;kb-C from the closed form: {formula_max:.3e} 1/s; tabulated: {TABLE_LD_CAVITY:.1e} 1/s; using {}",
        match setup.ld_cavity_source {
            LdCavitySource::Formula => "closed form",
            LdCavitySource::Table => "tabulated magnitude",
        }
    ));

    for a in 0..2u8 {
        for b in 0..2u8 {
            let (ua, ub) = (a as usize, b as usize);
            for (site, family) in [(Site::Idle, Family::IdleLdCavity), (q, Family::LdCavity)] {
                let v = ld_cavity_minus(params, a, b) * cavity_scale;
                set.push(
                    family,
                    Channel::lower(site, a).with_cavity(CavityOp::B),
                    Channel::lower(site, b).with_cavity(CavityOp::B),
                    v,
                    v.norm(),
                );
            }

            let (oa, ob) = (field.rabi(i, a), field.rabi(i, b));
            let ld = C64::new(0.0, 0.5) * eta2 * (oa.conj() * ob.conj() - oa * ob) / delta;
            let ld_env = eta2 * oa.norm() * ob.norm() / delta;
            set.push(Family::LdGating, Channel::lower(q, a), Channel::lower(q, b), ld, ld_env);

            let se = 0.5 * (params.gamma_se[ua] * params.gamma_se[ub]).sqrt() * params.dipole_cos(ua, ub);
            set.push(Family::SeGated, Channel::raise(q, a), Channel::raise(q, b), ld + se, se.abs() + ld_env);

            let (plus, plus_env) = if a == b && setup.plus_c_diagonal {
                let v = eta2 * params.g_cavity[ua].powi(2) / params.nu_max;
                (C64::new(v, 0.0), v)
            } else {
                let v = ld_cavity_plus(params, a, b);
                (v, v.norm())
            };
            set.push(
                Family::LdCavityPlus,
                Channel::raise(q, a).with_cavity(CavityOp::B),
                Channel::raise(q, b).with_cavity(CavityOp::B),
                plus,
                plus_env,
            );
        }
    }
    if setup.plus_c_diagonal {
        set.notes.push("ia+C;ia+C diagonal set to eta^2 |g_a|^2 / nu_max".into());
    }
    set.validate()?;
    Ok(set)
}

/// `x_ij = sqrt(3) a / |r_i - r_j|` for lattice constant `a`.
pub fn geometry_factor(lattice: &LatticeSpec, i: usize, j: usize) -> Result<f64> {
    let d = (lattice.site_position(i) - lattice.site_position(j)).norm();
    if d == 0.0 {
        return Err(Error::InvalidParam(format!("qubits {i} and {j} share a site")));
    }
    Ok(3f64.sqrt() * lattice.spacing / d)
}

/// Relaxation elements of the cavity-mediated CNOT between a control qubit
/// (2-1 transition driven) and a target qubit (2-0 transition driven).
pub fn closed_form_two_qubit(
    params: &PhysicalParams,
    lattice: &LatticeSpec,
    setup: &TwoQubitSetup,
) -> Result<RelaxationSet> {
    params.validate()?;
    lattice.validate()?;
    let (i, j) = (setup.control, setup.target);
    check_qubit(params, i, "control")?;
    check_qubit(params, j, "target")?;
    if i == j {
        return Err(Error::InvalidParam("control and target must differ".into()));
    }
    let mut p = params.clone();
    if !setup.couple_g0 {
        p.g_cavity[0] = 0.0;
    }
    let amplitude = p.omega_rabi[0];
    let internal = compute_internal_couplings(
        &p,
        lattice,
        GatingField { amplitude, carrier_phase: setup.carrier_phase.unwrap_or(0.0), dphi: setup.dphi },
    );
    let field = Field { internal: &internal, amplitude, carrier: setup.carrier_phase, matched: FRAC_PI_4, dphi: setup.dphi };
    let eta2 = p.eta.powi(2);
    let nu = p.nu_max;
    let i_unit = C64::new(0.0, 1.0);
    let mut set = RelaxationSet::new(ScenarioTag::TwoQubit);

    let oi = field.rabi(i, 1);
    let oj = field.rabi(j, 0);
    let (ci, qj) = (Site::Qubit(i), Site::Qubit(j));

    let v23 = i_unit * eta2 * (oi * oi - oi.conj() * oi.conj()) / nu;
    set.push(Family::ControlGating, Channel::lower(ci, 1), Channel::lower(ci, 1), v23, 2.0 * eta2 * oi.norm_sqr() / nu);

    let khat = Vector3::from(internal.wavevector).normalize();
    let kk = khat.dot(&khat);
    let x = geometry_factor(lattice, i, j)?;
    let sinc = quad::sinc_average(x);
    let v24 = i_unit * eta2 * kk * (oi * oj - oi.conj() * oj.conj()) / nu * sinc;
    let env24 = 2.0 * eta2 * kk.abs() * oi.norm() * oj.norm() / nu * sinc;
    set.push(Family::CrossGating, Channel::lower(ci, 1), Channel::lower(qj, 0), v24, env24);
    set.push(Family::CrossGatingRev, Channel::lower(qj, 0), Channel::lower(ci, 1), v24.conj(), env24);

    let v35 = i_unit * eta2 * (oj * oj - oj.conj() * oj.conj()) / nu;
    set.push(Family::TargetGating, Channel::lower(qj, 0), Channel::lower(qj, 0), v35, 2.0 * eta2 * oj.norm_sqr() / nu);

    let cav = Channel::cavity(CavityOp::BDag);
    set.push(Family::CavityDecay, cav, cav, C64::new(0.5 * p.gamma_cav, 0.0), 0.5 * p.gamma_cav);

    let k = Site::Idle;
    let zero = C64::new(0.0, 0.0);
    for a in 0..2u8 {
        for b in 0..2u8 {
            let (la, lb) = (Channel::lower(k, a), Channel::lower(k, b));
            set.push(Family::IdleGating, la, lb, zero, 0.0);
            set.push(Family::IdleGatingCavity, la, lb.with_cavity(CavityOp::B), zero, 0.0);
            set.push(Family::IdleGatingCavity, la.with_cavity(CavityOp::B), lb, zero, 0.0);
            set.push(Family::IdleGatingCavityPlus, la, lb.with_cavity(CavityOp::BDag), zero, 0.0);
            set.push(Family::IdleGatingCavityPlus, la.with_cavity(CavityOp::BDag), lb, zero, 0.0);

            let v = ld_cavity_minus(&p, a, b);
            set.push(Family::IdleLdCavity, la.with_cavity(CavityOp::B), lb.with_cavity(CavityOp::B), v, v.norm());

            let v = ld_cavity_plus(&p, a, b);
            set.push(
                Family::IdleLdCavityPlus,
                Channel::raise(k, a).with_cavity(CavityOp::B),
                Channel::raise(k, b).with_cavity(CavityOp::B),
                v,
                v.norm(),
            );

            let v = if a == b && p.g_cavity[0] != 0.0 { setup.idle_cavity_plus } else { 0.0 };
            set.push(
                Family::IdleCavityPlus,
                la.with_cavity(CavityOp::BDag),
                lb.with_cavity(CavityOp::BDag),
                C64::new(v, 0.0),
                v.abs(),
            );
        }
    }
    set.notes.push(format!("x_ij = {x:.6}, Si(x)/x = {sinc:.6}"));
    if !setup.couple_g0 {
        set.notes.push("g_k0 = 0: the 2-0 transition is uncoupled from the cavity".into());
    }
    set.validate()?;
    Ok(set)
}
