//! Decoherence rates, gate times and fidelity losses.
//!
//! The central quantity is `1/tau_D = 2 sum_ab Gamma_ab (<S_a S_b^dag> - <S_a><S_b^dag>)`,
//! assembled family by family into a ledger of [`TermLine`]s. Every line
//! carries both the magnitude-convention contribution used to reproduce the
//! reference tables and the exact real-part value.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize, Serializer};

use crate::couplings::CouplingSet;
use crate::error::{Error, Result};
use crate::ops::{pair_key, Channel, MomentKey, Site, Unit};
use crate::params::{boltzmann_factor, PhysicalParams};
use crate::relaxation::{bose_occupation, Family, GatingCase, RelaxationSet, ScenarioTag};
use crate::states::{embed_gated, hadamard_background, MomentSource, StateMoments};
use crate::C64;

pub const REPORT_VERSION: u32 = 1;

/// How a ledger line turns relaxation elements and state factors into a rate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMode {
    /// `|Gamma| |f|` of the dominant element, no factor 2.
    Table,
    /// `2 |Gamma| |f|` of the dominant element.
    Printed,
    /// `2 Re sum Gamma f`.
    RealPart,
}

impl RateMode {
    /// Convention that reproduces the reference tables for a scenario.
    pub fn default_for(scenario: ScenarioTag) -> Self {
        match scenario {
            ScenarioTag::OneQubit => RateMode::Table,
            ScenarioTag::NoGating | ScenarioTag::TwoQubit => RateMode::Printed,
            ScenarioTag::Generic => RateMode::RealPart,
        }
    }

    fn prefactor(self) -> f64 {
        match self {
            RateMode::Table => 1.0,
            RateMode::Printed | RateMode::RealPart => 2.0,
        }
    }
}

fn serialize_time<S: Serializer>(t: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if t.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*t)
    }
}

/// One row of the rate ledger.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TermLine {
    pub id: String,
    pub family: Family,
    pub symbol: String,
    pub effect: String,
    /// Number of equivalent qubits the line stands for.
    pub multiplicity: f64,
    /// Envelope of the dominant element, 1/s.
    pub relaxation: f64,
    /// |<S_a S_b^dag> - <S_a><S_b^dag>| of the dominant element.
    pub state_factor: f64,
    /// Contribution in the report's mode, 1/s.
    pub contribution: f64,
    /// `2 Re sum Gamma f` times the multiplicity, 1/s.
    pub exact: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecoherenceReport {
    pub scenario: ScenarioTag,
    pub mode: RateMode,
    pub terms: Vec<TermLine>,
    pub total_rate: f64,
    /// Sum of the exact column.
    pub exact_rate: f64,
    #[serde(serialize_with = "serialize_time")]
    pub tau_d: f64,
    pub gate_time: Option<f64>,
    pub delta_f: Option<f64>,
    /// Fidelity loss from the scenario's closed form, when one exists.
    pub delta_f_closed_form: Option<f64>,
    pub n_qubits: usize,
    pub notes: Vec<String>,
}

impl DecoherenceReport {
    pub fn from_terms(scenario: ScenarioTag, mode: RateMode, terms: Vec<TermLine>, n_qubits: usize) -> Self {
        let total_rate: f64 = terms.iter().map(|t| t.contribution).sum();
        let exact_rate: f64 = terms.iter().map(|t| t.exact).sum();
        Self {
            scenario,
            mode,
            terms,
            total_rate,
            exact_rate,
            tau_d: if total_rate == 0.0 { f64::INFINITY } else { 1.0 / total_rate },
            gate_time: None,
            delta_f: None,
            delta_f_closed_form: None,
            n_qubits,
            notes: Vec::new(),
        }
    }

    pub fn set_gate_time(&mut self, gate_time: f64) {
        self.gate_time = Some(gate_time);
        self.delta_f = Some(-self.total_rate * gate_time);
    }

    /// Largest contribution.
    pub fn dominant(&self) -> Option<&TermLine> {
        self.terms.iter().max_by(|a, b| a.contribution.abs().total_cmp(&b.contribution.abs()))
    }

    pub fn term(&self, id: &str) -> Option<&TermLine> {
        self.terms.iter().find(|t| t.id == id)
    }

    /// Sum of contributions over non-gated lines.
    pub fn idle_total(&self) -> f64 {
        self.terms.iter().filter(|t| t.id.starts_with("NG") || t.id == "1").map(|t| t.contribution).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Versioned<'a> {
            report_version: u32,
            #[serde(flatten)]
            report: &'a DecoherenceReport,
        }
        serde_json::to_string_pretty(&Versioned { report_version: REPORT_VERSION, report: self })
            .map_err(|e| Error::Report(e.to_string()))
    }

    /// Ledger rows followed by a `total` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("term,family,symbol,multiplicity,relaxation,state_factor,contribution,exact\n");
        for t in &self.terms {
            out.push_str(&format!(
                "{},{},{},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e}\n",
                t.id,
                t.effect,
                t.symbol,
                t.multiplicity,
                t.relaxation,
                t.state_factor,
                t.contribution,
                t.exact
            ));
        }
        out.push_str(&format!("total,,,,,,{:.6e},{:.6e}\n", self.total_rate, self.exact_rate));
        out
    }
}

fn term_id(scenario: ScenarioTag, family: Family) -> String {
    use Family::*;
    let id = match (scenario, family) {
        (ScenarioTag::OneQubit, IdleLdCavity) => "1",
        (ScenarioTag::OneQubit, LdGating) => "2",
        (ScenarioTag::OneQubit, SeGated) => "3",
        (ScenarioTag::OneQubit, LdCavity) => "4",
        (ScenarioTag::OneQubit, LdCavityPlus) => "5",
        (ScenarioTag::TwoQubit, ControlGating) => "23",
        (ScenarioTag::TwoQubit, CrossGating) => "24",
        (ScenarioTag::TwoQubit, CrossGatingRev) => "34",
        (ScenarioTag::TwoQubit, TargetGating) => "35",
        (ScenarioTag::TwoQubit, CavityDecay) => "120",
        (ScenarioTag::TwoQubit, f) => return format!("NG {}", f.symbol()),
        (_, f) => f.symbol(),
    };
    id.to_string()
}

/// `<S_a S_b^dag> - <S_a><S_b^dag>`.
pub fn state_factor(moments: &impl MomentSource, a: &Channel, b: &Channel) -> Result<C64> {
    let pair = match pair_key(a, b)? {
        Some(k) => moments.moment_or_err(&k)?,
        None => C64::new(0.0, 0.0),
    };
    let ma = moments.moment_or_err(&a.key())?;
    let mb = moments.moment_or_err(&b.adjoint().key())?;
    Ok(pair - ma * mb)
}

/// Rate ledger of an arbitrary relaxation set. Entries on `Site::Idle` are
/// counted once for every qubit not named explicitly by the set.
pub fn rate_general(relax: &RelaxationSet, moments: &StateMoments, mode: RateMode) -> Result<DecoherenceReport> {
    relax.validate()?;
    moments.validate()?;
    let gated = relax.gated_sites();
    if let Some(i) = gated.iter().find(|i| **i >= moments.n_qubits) {
        return Err(Error::MissingMoment(format!(
            "qubit {i} is outside a register of {}",
            moments.n_qubits
        )));
    }
    let idle_multiplicity = (moments.n_qubits - gated.len()) as f64;
    let mut terms = Vec::new();
    for family in relax.families() {
        let idle = relax
            .family(family)
            .any(|e| e.left.site() == Some(Site::Idle) || e.right.site() == Some(Site::Idle));
        let multiplicity = if idle { idle_multiplicity } else { 1.0 };
        let mut sum = C64::new(0.0, 0.0);
        let mut best: Option<(f64, f64, f64)> = None;
        for e in relax.family(family) {
            let f = state_factor(moments, &e.left, &e.right)?;
            sum += e.gamma * f;
            let cand = (e.envelope * f.norm(), e.envelope, f.norm());
            if best.is_none_or(|b| (cand.0, cand.1) > (b.0, b.1)) {
                best = Some(cand);
            }
        }
        let (score, relaxation, factor) = best.unwrap_or_default();
        let exact = 2.0 * sum.re * multiplicity;
        let contribution = match mode {
            RateMode::RealPart => exact,
            m => m.prefactor() * score * multiplicity,
        };
        terms.push(TermLine {
            id: term_id(relax.scenario, family),
            family,
            symbol: family.symbol().into(),
            effect: family.effect().into(),
            multiplicity,
            relaxation,
            state_factor: factor,
            contribution,
            exact,
        });
    }
    let mut report = DecoherenceReport::from_terms(relax.scenario, mode, terms, moments.n_qubits);
    report.notes = relax.notes.clone();
    Ok(report)
}

/// `sum_i <(|x><y|)_i>` including explicit single-site values.
fn register_sum(moments: &StateMoments, x: u8, y: u8) -> Result<C64> {
    let n = moments.n_qubits;
    let mut special: BTreeSet<usize> = moments.sites.keys().copied().filter(|i| *i < n).collect();
    for k in moments.explicit.keys() {
        if let ([u], crate::ops::CavityOp::Id) = (k.units.as_slice(), k.cavity) {
            if let Site::Qubit(i) = u.site {
                if i < n {
                    special.insert(i);
                }
            }
        }
    }
    let mut total = moments.background[x as usize][y as usize] * (n - special.len()) as f64;
    for i in special {
        let key = MomentKey::new(vec![Unit::new(Site::Qubit(i), x, y)], crate::ops::CavityOp::Id);
        total += moments.moment_or_err(&key)?;
    }
    Ok(total)
}

/// Thermal spontaneous-emission rate of a register with no gating:
/// `exp(-hbar omega_0 / k_B T) sum_ab sqrt(Gamma_a Gamma_b) cos theta_ab sum_i <sigma_ab^i>`.
pub fn rate_no_gating(params: &PhysicalParams, moments: &StateMoments) -> Result<DecoherenceReport> {
    params.validate()?;
    moments.validate()?;
    let boltzmann = boltzmann_factor(params);
    let mut terms = Vec::new();
    for a in 0..2u8 {
        for b in 0..2u8 {
            let g = (params.gamma_se[a as usize] * params.gamma_se[b as usize]).sqrt()
                * params.dipole_cos(a as usize, b as usize);
            let s = register_sum(moments, a, b)?;
            let v = boltzmann * g * s.re;
            terms.push(TermLine {
                id: format!("SE {a}{b}"),
                family: Family::SpontaneousEmission,
                symbol: format!("k{a};k{b}"),
                effect: Family::SpontaneousEmission.effect().into(),
                multiplicity: 1.0,
                relaxation: boltzmann * g,
                state_factor: s.re,
                contribution: v,
                exact: v,
            });
        }
    }
    let mut report = DecoherenceReport::from_terms(ScenarioTag::NoGating, RateMode::Printed, terms, moments.n_qubits);
    report.notes.push(format!("Boltzmann factor exp(-hbar omega0 / k_B T) = {boltzmann:.6e}"));
    Ok(report)
}

/// Which gate a gate time refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    OneQubit(GatingCase),
    TwoQubit,
}

/// `(pi/2) Delta / Omega_m^2` for one-qubit gating, `2 pi / Omega_m` for the CNOT.
pub fn gate_time(params: &PhysicalParams, kind: GateKind) -> f64 {
    match kind {
        GateKind::OneQubit(case) => 0.5 * PI * params.detuning_ci / case.rabi(params).powi(2),
        GateKind::TwoQubit => 2.0 * PI / params.omega_rabi[0],
    }
}

/// `-rate * gate_time`.
pub fn fidelity_loss(report: &DecoherenceReport) -> Result<f64> {
    let t = report
        .gate_time
        .ok_or_else(|| Error::Report("fidelity loss needs a gate time".into()))?;
    Ok(-report.total_rate * t)
}

/// Closed-form one-qubit fidelity loss `-(pi/4) eta^2`.
pub fn one_qubit_fidelity_closed_form(params: &PhysicalParams) -> f64 {
    -0.25 * PI * params.eta.powi(2)
}

/// `Gamma_cav 2 pi / Omega_m`, the fidelity loss per unit photon-number fluctuation.
pub fn two_qubit_fidelity_prefactor(params: &PhysicalParams) -> f64 {
    params.gamma_cav * 2.0 * PI / params.omega_rabi[0]
}

/// Register moments for one-qubit gating: a single-qubit gated state is
/// embedded at the gated qubit with the other qubits in the Hadamard state.
fn register_moments(relax: &RelaxationSet, moments: &StateMoments, n: usize) -> Result<StateMoments> {
    if moments.n_qubits == n {
        return Ok(moments.clone());
    }
    let gated: Vec<usize> = relax.gated_sites().into_iter().collect();
    match (moments.n_qubits, gated.as_slice()) {
        (1, [i]) => embed_gated(moments, n, *i, hadamard_background()),
        _ => Err(Error::InvalidMoments(format!(
            "moments describe {} qubits, register has {n}",
            moments.n_qubits
        ))),
    }
}

fn require(relax: &RelaxationSet, tag: ScenarioTag) -> Result<()> {
    if relax.scenario != tag {
        return Err(Error::InvalidParam(format!(
            "relaxation set is for {:?}, expected {tag:?}",
            relax.scenario
        )));
    }
    Ok(())
}

/// Five-term one-qubit gating ledger with gate time and fidelity loss.
pub fn rate_one_qubit(
    params: &PhysicalParams,
    case: GatingCase,
    relax: &RelaxationSet,
    moments: &StateMoments,
    n: usize,
    mode: RateMode,
) -> Result<DecoherenceReport> {
    require(relax, ScenarioTag::OneQubit)?;
    let full = register_moments(relax, moments, n)?;
    let mut report = rate_general(relax, &full, mode)?;
    report.set_gate_time(gate_time(params, GateKind::OneQubit(case)));
    report.delta_f_closed_form = Some(one_qubit_fidelity_closed_form(params));
    if let Some(d) = report.dominant() {
        let note = format!("dominant term {} ({}) {:.3e} 1/s", d.id, d.effect, d.contribution);
        report.notes.push(note);
    }
    Ok(report)
}

/// Two-qubit gating ledger: non-gated families over `n - 2` qubits plus the
/// printed gated terms.
pub fn rate_two_qubit(
    params: &PhysicalParams,
    relax: &RelaxationSet,
    moments: &StateMoments,
    n: usize,
    mode: RateMode,
) -> Result<DecoherenceReport> {
    require(relax, ScenarioTag::TwoQubit)?;
    if n < 2 {
        return Err(Error::InvalidParam("two-qubit gating needs n >= 2".into()));
    }
    let full = moments.clone().with_qubits(n);
    let mut report = rate_general(relax, &full, mode)?;
    report.set_gate_time(gate_time(params, GateKind::TwoQubit));
    let photon_var = full.cavity_n - full.cavity_b.norm_sqr();
    report.delta_f_closed_form = Some(-photon_var * two_qubit_fidelity_prefactor(params));
    report.notes.push("partial gated sum (5 of 120 printed terms)".into());
    Ok(report)
}

/// Bosonic modes shared by several system operators, at one temperature.
#[derive(Clone, Debug, PartialEq)]
pub struct Reservoir {
    pub label: String,
    pub temperature: f64,
    /// Mode frequencies, rad/s.
    pub modes: Vec<f64>,
    pub terms: Vec<ReservoirCoupling>,
}

/// `S R + R^dag S^dag` with `R = sum_k (c_k a_k + d_k a_k^dag)`, in rad/s.
#[derive(Clone, Debug, PartialEq)]
pub struct ReservoirCoupling {
    pub channel: Channel,
    pub c: Vec<C64>,
    pub d: Vec<C64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tau2Report {
    /// Always 0: the first-order term vanishes for an uncorrelated initial state.
    pub inv_tau1: f64,
    /// `<Delta V^2> / hbar^2`, (rad/s)^2.
    pub variance: f64,
    #[serde(serialize_with = "serialize_time")]
    pub tau2: f64,
    pub per_reservoir: Vec<(String, f64)>,
}

fn fluctuation(moments: &impl MomentSource, x: &Channel, y: &Channel) -> Result<C64> {
    // <X Y> - <X><Y>
    let xy = match pair_key(x, &y.adjoint())? {
        Some(k) => moments.moment_or_err(&k)?,
        None => C64::new(0.0, 0.0),
    };
    Ok(xy - moments.moment_or_err(&x.key())? * moments.moment_or_err(&y.key())?)
}

/// Short-time decoherence time from `hbar^2 / 2 tau_2^2 = Tr_B <Delta V_I(0)^2>_S`.
/// Reservoirs are independent and thermal; only operators sharing a reservoir
/// contribute cross terms.
pub fn short_time_tau2(reservoirs: &[Reservoir], moments: &impl MomentSource) -> Result<Tau2Report> {
    let mut total = 0.0;
    let mut per = Vec::new();
    for r in reservoirs {
        let m = r.modes.len();
        if let Some(t) = r.terms.iter().find(|t| t.c.len() != m || t.d.len() != m) {
            return Err(Error::InvalidParam(format!(
                "reservoir {}: coupling of {} has the wrong length",
                r.label, t.channel
            )));
        }
        let mut occupation = Vec::with_capacity(m);
        for (k, w) in r.modes.iter().enumerate() {
            let used = r.terms.iter().any(|t| t.c[k].norm() > 0.0 || t.d[k].norm() > 0.0);
            let n = if !used || r.temperature == 0.0 {
                0.0
            } else if *w > 0.0 {
                bose_occupation(*w, r.temperature)
            } else {
                return Err(Error::InvalidParam(format!("reservoir {}: thermal mode at frequency {w}", r.label)));
            };
            occupation.push(n);
        }
        let bath = |f: &dyn Fn(usize) -> C64| (0..m).map(f).sum::<C64>();
        let mut v = C64::new(0.0, 0.0);
        for a in &r.terms {
            for b in &r.terms {
                let (sa, sb) = (a.channel, b.channel);
                let (sad, sbd) = (sa.adjoint(), sb.adjoint());
                let n = &occupation;
                let rr = bath(&|k| a.c[k] * b.d[k] * (n[k] + 1.0) + a.d[k] * b.c[k] * n[k]);
                let rrd = bath(&|k| a.c[k] * b.c[k].conj() * (n[k] + 1.0) + a.d[k] * b.d[k].conj() * n[k]);
                let rdr = bath(&|k| a.c[k].conj() * b.c[k] * n[k] + a.d[k].conj() * b.d[k] * (n[k] + 1.0));
                let rdrd = bath(&|k| a.c[k].conj() * b.d[k].conj() * n[k] + a.d[k].conj() * b.c[k].conj() * (n[k] + 1.0));
                v += fluctuation(moments, &sa, &sb)? * rr
                    + fluctuation(moments, &sa, &sbd)? * rrd
                    + fluctuation(moments, &sad, &sb)? * rdr
                    + fluctuation(moments, &sad, &sbd)? * rdrd;
            }
        }
        if v.im.abs() > 1e-9 * v.norm() {
            return Err(Error::Numerical(format!("reservoir {}: <Delta V^2> = {v} is not real", r.label)));
        }
        per.push((r.label.clone(), v.re));
        total += v.re;
    }
    Ok(Tau2Report {
        inv_tau1: 0.0,
        variance: total,
        tau2: if total > 0.0 { 1.0 / (2.0 * total).sqrt() } else { f64::INFINITY },
        per_reservoir: per,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tau2Options {
    pub se_modes: usize,
    /// Half-width of the sampled emission band around omega_0, rad/s.
    pub se_half_width: f64,
    /// Keep the `S a^dag` terms of the emission coupling.
    pub counter_rotating: bool,
}

impl Default for Tau2Options {
    fn default() -> Self {
        Self { se_modes: 64, se_half_width: 1e12, counter_rotating: true }
    }
}

/// Emission and vibrational reservoirs of the gated qubits. Each gated qubit
/// gets its own emission continuum, sampled in two polarisations so that the
/// two transitions overlap by `cos theta_01`; the phonon modes are shared.
pub fn pipeline_reservoirs(
    params: &PhysicalParams,
    couplings: &CouplingSet,
    gated: &[usize],
    opts: &Tau2Options,
) -> Vec<Reservoir> {
    let mut out = Vec::new();
    let se = &couplings.internal.se;
    let theta = params.dipole_angle;
    for &i in gated {
        let samples = [
            se.sample(0, opts.se_half_width, opts.se_modes),
            se.sample(1, opts.se_half_width, opts.se_modes),
        ];
        let m = opts.se_modes;
        let modes: Vec<f64> = samples[0].iter().chain(samples[0].iter()).map(|s| s.omega).collect();
        let mut terms = Vec::new();
        for a in 0..2u8 {
            let (px, py) = if a == 0 { (1.0, 0.0) } else { (theta.cos(), theta.sin()) };
            let mut c = vec![C64::new(0.0, 0.0); 2 * m];
            for (k, s) in samples[a as usize].iter().enumerate() {
                c[k] = C64::new(s.coupling * px, 0.0);
                c[m + k] = C64::new(s.coupling * py, 0.0);
            }
            let d = if opts.counter_rotating { c.clone() } else { vec![C64::new(0.0, 0.0); 2 * m] };
            terms.push(ReservoirCoupling { channel: Channel::raise(Site::Qubit(i), a), c, d });
        }
        out.push(Reservoir { label: format!("SE q{i}"), temperature: params.temperature, modes, terms });
    }
    let mut terms = Vec::new();
    for &i in gated {
        for a in 0..2u8 {
            let c: Vec<C64> = couplings.ld_gating_theta.iter().map(|row| row[i][a as usize]).collect();
            terms.push(ReservoirCoupling { channel: Channel::raise(Site::Qubit(i), a), d: c.clone(), c });
        }
    }
    out.push(Reservoir {
        label: "LD-gating".into(),
        temperature: params.temperature,
        modes: couplings.frequencies.clone(),
        terms,
    });
    out
}
