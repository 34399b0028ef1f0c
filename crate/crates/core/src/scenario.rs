//! Scenario runner: lattice, couplings, relaxation, moments and rates in one call.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::couplings::{compute_internal_couplings, compute_ld_couplings, CouplingSet, GatingField};
use crate::decoherence::{
    pipeline_reservoirs, rate_no_gating, rate_one_qubit, rate_two_qubit, short_time_tau2, DecoherenceReport,
    RateMode, Tau2Options, Tau2Report, TermLine, REPORT_VERSION,
};
use crate::error::{Error, Result};
use crate::lattice::spectrum_for;
use crate::params::{LatticeSpec, PhysicalParams};
use crate::relaxation::{
    closed_form_no_gating, closed_form_one_qubit, closed_form_two_qubit, GatingCase, OneQubitSetup, RelaxationSet,
    ScenarioTag, TwoQubitSetup,
};
use crate::states::{
    embed_gated, ghz_moments, hadamard_background, hadamard_moments, one_qubit_gated_moments, read_moment_table,
    two_qubit_moment_table, StateMoments, TwoQubitInput,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioKind {
    #[serde(rename = "no_gating")]
    NoGating,
    #[serde(rename = "one_qubit_i")]
    OneQubitI,
    #[serde(rename = "one_qubit_ii")]
    OneQubitII,
    #[serde(rename = "two_qubit")]
    TwoQubit,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] =
        [ScenarioKind::NoGating, ScenarioKind::OneQubitI, ScenarioKind::OneQubitII, ScenarioKind::TwoQubit];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::NoGating => "no_gating",
            ScenarioKind::OneQubitI => "one_qubit_i",
            ScenarioKind::OneQubitII => "one_qubit_ii",
            ScenarioKind::TwoQubit => "two_qubit",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown scenario name '{name}'")))
    }

    fn case(self) -> Option<GatingCase> {
        match self {
            ScenarioKind::OneQubitI => Some(GatingCase::Weak),
            ScenarioKind::OneQubitII => Some(GatingCase::Strong),
            _ => None,
        }
    }
}

/// Register state fed to the rate assembly.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Hadamard,
    Ghz,
    /// Scenario-specific gated state.
    Gated,
    /// Moment table (`label,re,im`) applied on top of the scenario default.
    Custom(PathBuf),
}

impl StateKind {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "hadamard" => Ok(StateKind::Hadamard),
            "ghz" => Ok(StateKind::Ghz),
            "gated" => Ok(StateKind::Gated),
            other => match other.strip_prefix("custom:") {
                Some(p) if !p.is_empty() => Ok(StateKind::Custom(PathBuf::from(p))),
                _ => Err(Error::Config(format!(
                    "unknown state '{other}' (hadamard, ghz, gated or custom:PATH)"
                ))),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub param: String,
    pub from: f64,
    pub to: f64,
    pub points: usize,
    /// Geometric spacing.
    #[serde(default)]
    pub log: bool,
}

impl SweepSpec {
    /// Sweep points; register sizes are rounded to whole qubits.
    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        let round = |v: f64| if self.param == "n_qubits" { v.round() } else { v };
        if n == 1 {
            return vec![round(self.from)];
        }
        (0..n)
            .map(|k| {
                let s = k as f64 / (n - 1) as f64;
                if self.log {
                    (self.from.ln() + s * (self.to.ln() - self.from.ln())).exp()
                } else {
                    self.from + s * (self.to - self.from)
                }
            })
            .map(round)
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if !PhysicalParams::SWEEPABLE.contains(&self.param.as_str()) {
            return Err(Error::Config(format!("cannot sweep unknown parameter '{}'", self.param)));
        }
        if self.points == 0 || !self.from.is_finite() || !self.to.is_finite() {
            return Err(Error::Config("sweep needs finite bounds and at least one point".into()));
        }
        if self.log && (self.from <= 0.0 || self.to <= 0.0) {
            return Err(Error::Config("log sweep needs positive bounds".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl OutputFormat {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(Error::Config(format!("unknown format '{other}' (json or csv)"))),
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Json => "json",
            OutputFormat::Csv => "csv",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub path: Option<PathBuf>,
    pub format: OutputFormat,
}

/// Where on the gating trajectory the one-qubit state is taken.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaPolicy {
    /// theta = pi/4.
    #[default]
    Midway,
    /// Mean over theta in [0, pi/2].
    Averaged,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub kind: Option<ScenarioKind>,
    pub state: Option<StateKind>,
    pub sweep: Option<SweepSpec>,
    pub output: OutputSpec,
    /// Rate convention; the scenario default when absent.
    pub mode: Option<RateMode>,
    pub theta: ThetaPolicy,
    /// <b^dag b> during two-qubit gating.
    pub photon_number: Option<f64>,
    pub one_qubit: OneQubitSetup,
    pub two_qubit: TwoQubitSetup,
    pub tau2: Tau2Options,
}

impl ScenarioSpec {
    pub fn validate_fields(&self) -> Result<()> {
        if let Some(s) = &self.sweep {
            s.validate()?;
        }
        if let Some(StateKind::Custom(p)) = &self.state {
            if p.as_os_str().is_empty() {
                return Err(Error::Config("custom state needs a moment table path".into()));
            }
        }
        if let Some(n) = self.photon_number {
            if !(n.is_finite() && n >= 0.0) {
                return Err(Error::Config(format!("photon_number must be >= 0, got {n}")));
            }
        }
        Ok(())
    }

    fn kind(&self) -> Result<ScenarioKind> {
        self.kind.ok_or_else(|| Error::Config("scenario required".into()))
    }
}

fn custom_entries(path: &Path) -> Result<Vec<(crate::ops::MomentKey, crate::C64)>> {
    read_moment_table(path)
}

fn apply_entries(mut m: StateMoments, path: &Path) -> Result<StateMoments> {
    for (k, v) in custom_entries(path)? {
        m.explicit.remove(&k.adjoint());
        m.set(k, v);
    }
    m.validate()?;
    Ok(m)
}

fn unsupported(kind: ScenarioKind, state: &StateKind) -> Error {
    Error::Config(format!("state {state:?} is not available for {}", kind.name()))
}

fn no_gating_moments(spec: &ScenarioSpec, n: usize) -> Result<StateMoments> {
    match spec.state.clone().unwrap_or(StateKind::Hadamard) {
        StateKind::Hadamard => hadamard_moments(n),
        StateKind::Ghz => ghz_moments(n),
        StateKind::Custom(p) => apply_entries(hadamard_moments(n)?, &p),
        s @ StateKind::Gated => Err(unsupported(ScenarioKind::NoGating, &s)),
    }
}

fn one_qubit_moments(spec: &ScenarioSpec, params: &PhysicalParams, case: GatingCase, theta: f64) -> Result<StateMoments> {
    let setup = &spec.one_qubit;
    let single = one_qubit_gated_moments(theta, setup.dphi, case.rabi(params), params.detuning_ci)?;
    let full = embed_gated(&single, params.n_qubits, setup.gated_qubit, hadamard_background())?;
    match spec.state.clone().unwrap_or(StateKind::Gated) {
        StateKind::Gated => Ok(full),
        StateKind::Custom(p) => apply_entries(full, &p),
        s => Err(unsupported(ScenarioKind::OneQubitI, &s)),
    }
}

fn two_qubit_moments(spec: &ScenarioSpec, params: &PhysicalParams) -> Result<StateMoments> {
    let entries = match spec.state.clone().unwrap_or(StateKind::Gated) {
        StateKind::Gated => Vec::new(),
        StateKind::Custom(p) => custom_entries(&p)?,
        s => return Err(unsupported(ScenarioKind::TwoQubit, &s)),
    };
    two_qubit_moment_table(&TwoQubitInput {
        n_qubits: params.n_qubits,
        control: spec.two_qubit.control,
        target: spec.two_qubit.target,
        entries,
        cavity_n: spec.photon_number,
        cavity_b: None,
    })
}

const THETA_NODES: usize = 65;

/// Line-by-line composite Simpson mean of one-qubit reports over theta in [0, pi/2].
fn theta_averaged(reports: &[DecoherenceReport]) -> DecoherenceReport {
    let n = reports.len();
    let w = |k: usize| {
        let base = if k == 0 || k == n - 1 {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        base / (3.0 * (n - 1) as f64)
    };
    let first = &reports[0];
    let terms: Vec<TermLine> = first
        .terms
        .iter()
        .enumerate()
        .map(|(j, t)| {
            let avg = |f: &dyn Fn(&TermLine) -> f64| (0..n).map(|k| w(k) * f(&reports[k].terms[j])).sum::<f64>();
            TermLine {
                relaxation: avg(&|l| l.relaxation),
                state_factor: avg(&|l| l.state_factor),
                contribution: avg(&|l| l.contribution),
                exact: avg(&|l| l.exact),
                ..t.clone()
            }
        })
        .collect();
    let mut out = DecoherenceReport::from_terms(first.scenario, first.mode, terms, first.n_qubits);
    if let Some(t) = first.gate_time {
        out.set_gate_time(t);
    }
    out.delta_f_closed_form = first.delta_f_closed_form;
    out.notes = first.notes.clone();
    out.notes.retain(|s| !s.starts_with("dominant term"));
    out.notes.push(format!("averaged over theta in [0, pi/2] with {n} Simpson nodes"));
    out
}

/// Relaxation set and report for one parameter point, without a lattice solve.
pub fn evaluate(spec: &ScenarioSpec, params: &PhysicalParams, lattice: &LatticeSpec) -> Result<(RelaxationSet, DecoherenceReport)> {
    let kind = spec.kind()?;
    let n = params.n_qubits;
    match kind {
        ScenarioKind::NoGating => {
            let relax = closed_form_no_gating(params)?;
            let report = rate_no_gating(params, &no_gating_moments(spec, n)?)?;
            Ok((relax, report))
        }
        ScenarioKind::OneQubitI | ScenarioKind::OneQubitII => {
            let case = kind.case().unwrap();
            let setup = OneQubitSetup { case, ..spec.one_qubit };
            let relax = closed_form_one_qubit(params, lattice, &setup)?;
            let mode = spec.mode.unwrap_or(RateMode::default_for(ScenarioTag::OneQubit));
            let at = |theta: f64| -> Result<DecoherenceReport> {
                let m = one_qubit_moments(spec, params, case, theta)?;
                rate_one_qubit(params, case, &relax, &m, n, mode)
            };
            let mut report = match spec.theta {
                ThetaPolicy::Midway => at(FRAC_PI_4)?,
                ThetaPolicy::Averaged => {
                    let reports = (0..THETA_NODES)
                        .map(|k| at(FRAC_PI_2 * k as f64 / (THETA_NODES - 1) as f64))
                        .collect::<Result<Vec<_>>>()?;
                    theta_averaged(&reports)
                }
            };
            report.notes.push(format!("rate convention {mode:?}"));
            Ok((relax, report))
        }
        ScenarioKind::TwoQubit => {
            let relax = closed_form_two_qubit(params, lattice, &spec.two_qubit)?;
            let mode = spec.mode.unwrap_or(RateMode::default_for(ScenarioTag::TwoQubit));
            let mut report = rate_two_qubit(params, &relax, &two_qubit_moments(spec, params)?, n, mode)?;
            report.notes.push(format!("rate convention {mode:?}"));
            Ok((relax, report))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    pub report: DecoherenceReport,
}

/// Evaluate every sweep point in parallel, in sweep order.
pub fn sweep(spec: &ScenarioSpec, params: &PhysicalParams, lattice: &LatticeSpec, sweep: &SweepSpec) -> Result<Vec<SweepPoint>> {
    sweep.validate()?;
    sweep
        .values()
        .into_par_iter()
        .map(|value| {
            let mut p = params.clone();
            p.set(&sweep.param, value)?;
            let (_, report) = evaluate(spec, &p, lattice)?;
            Ok(SweepPoint { value, report })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LatticeSummary {
    pub n_ions: usize,
    pub trap_freq: f64,
    pub nu_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunOutput {
    #[serde(rename = "scenario")]
    pub kind: ScenarioKind,
    pub relaxation: RelaxationSet,
    pub report: DecoherenceReport,
    pub lattice: Option<LatticeSummary>,
    pub tau2: Option<Tau2Report>,
    pub sweep: Option<Vec<SweepPoint>>,
    pub sweep_param: Option<String>,
}

/// Lattice modes and all coupling families for the gating field of `field`.
pub fn couplings_for(params: &PhysicalParams, lattice: &LatticeSpec, field: GatingField) -> Result<(LatticeSpec, CouplingSet)> {
    let (spec, spectrum) = spectrum_for(lattice, params.nu_max)?;
    let internal = compute_internal_couplings(params, &spec, field);
    let set = compute_ld_couplings(params, &spec, &spectrum, &internal)?;
    Ok((spec, set))
}

/// Classical gating field the scenario drives its gated qubits with.
pub fn gating_field(kind: ScenarioKind, spec: &ScenarioSpec, params: &PhysicalParams) -> GatingField {
    let (amplitude, carrier, dphi) = match kind.case() {
        Some(case) => (case.rabi(params), spec.one_qubit.carrier_phase, spec.one_qubit.dphi),
        None => (params.omega_rabi[0], spec.two_qubit.carrier_phase, spec.two_qubit.dphi),
    };
    GatingField { amplitude, carrier_phase: carrier.unwrap_or(0.0), dphi }
}

/// Full pipeline for one scenario: lattice solve and couplings for gated
/// scenarios, relaxation elements, moments, rate ledger, short-time τ₂ and
/// the optional sweep.
pub fn run(spec: &ScenarioSpec, params: &PhysicalParams, lattice: &LatticeSpec) -> Result<RunOutput> {
    spec.validate_fields()?;
    let kind = spec.kind()?;
    let (relaxation, report) = evaluate(spec, params, lattice)?;
    let mut out = RunOutput { kind, relaxation, report, lattice: None, tau2: None, sweep: None, sweep_param: None };
    if kind != ScenarioKind::NoGating {
        let (solved, couplings) = couplings_for(params, lattice, gating_field(kind, spec, params))?;
        let n_ions = solved.n_ions();
        out.lattice = Some(LatticeSummary {
            n_ions,
            trap_freq: solved.trap_freq.unwrap_or_default(),
            nu_max: couplings.frequencies.iter().copied().fold(0.0, f64::max),
        });
        let gated: Vec<usize> = out.relaxation.gated_sites().into_iter().collect();
        if gated.iter().all(|i| *i < n_ions) {
            let moments = match kind {
                ScenarioKind::TwoQubit => two_qubit_moments(spec, params)?,
                _ => one_qubit_moments(spec, params, kind.case().unwrap(), FRAC_PI_4)?,
            };
            let reservoirs = pipeline_reservoirs(params, &couplings, &gated, &spec.tau2);
            out.tau2 = Some(short_time_tau2(&reservoirs, &moments)?);
        } else {
            out.report.notes.push("tau2 skipped: gated qubit outside the solved lattice".into());
        }
    }
    if let Some(s) = &spec.sweep {
        out.sweep = Some(sweep(spec, params, lattice, s)?);
        out.sweep_param = Some(s.param.clone());
    }
    Ok(out)
}

fn fmt_time(t: f64) -> String {
    if t.is_infinite() {
        "inf".into()
    } else {
        format!("{t:.6e}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6e}")).unwrap_or_default()
}

/// `value,total_rate,exact_rate,tau_d,gate_time,delta_f,dominant` per point.
pub fn sweep_csv(param: &str, points: &[SweepPoint]) -> String {
    let mut out = format!("{param},total_rate,exact_rate,tau_d,gate_time,delta_f,dominant\n");
    for p in points {
        let r = &p.report;
        let _ = writeln!(
            out,
            "{:.6e},{:.6e},{:.6e},{},{},{},{}",
            p.value,
            r.total_rate,
            r.exact_rate,
            fmt_time(r.tau_d),
            fmt_opt(r.gate_time),
            fmt_opt(r.delta_f),
            r.dominant().map(|t| t.id.as_str()).unwrap_or("")
        );
    }
    out
}

impl RunOutput {
    /// Structured document with `report_version`.
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Doc<'a> {
            report_version: u32,
            #[serde(flatten)]
            body: &'a RunOutput,
        }
        serde_json::to_string_pretty(&Doc { report_version: REPORT_VERSION, body: self })
            .map_err(|e| Error::Report(e.to_string()))
    }

    /// Report in `format` at `path`; sweeps and relaxation elements go next
    /// to it as `<stem>.sweep.csv` and `<stem>.relaxation.csv`.
    pub fn write(&self, path: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
        let io = |p: &Path| {
            let p = p.to_path_buf();
            move |source| Error::Io { path: p.display().to_string(), source }
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io(dir))?;
        }
        let body = match format {
            OutputFormat::Json => self.to_json()?,
            OutputFormat::Csv => self.report.to_csv(),
        };
        std::fs::write(path, body).map_err(io(path))?;
        let mut written = vec![path.to_path_buf()];
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
        let sibling = |suffix: &str| path.with_file_name(format!("{stem}.{suffix}"));
        let rel = sibling("relaxation.csv");
        self.relaxation.write_csv(&rel)?;
        written.push(rel);
        if let (Some(points), Some(spec)) = (&self.sweep, &self.sweep_param) {
            let p = sibling("sweep.csv");
            std::fs::write(&p, sweep_csv(spec, points)).map_err(io(&p))?;
            written.push(p);
        }
        Ok(written)
    }
}

/// `family,mode,ion,transition,re,im` rows of the per-ion coupling tables.
pub fn couplings_csv(set: &CouplingSet) -> String {
    let mut out = String::from("family,mode,ion,transition,re,im\n");
    let mut row = |family: &str, mode: Option<usize>, ion: usize, a: Option<usize>, v: crate::C64| {
        let m = mode.map(|k| k.to_string()).unwrap_or_default();
        let a = a.map(|k| k.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{family},{m},{ion},{a},{:.6e},{:.6e}", v.re, v.im);
    };
    for (i, r) in set.rabi_classical.iter().enumerate() {
        for (a, v) in r.iter().enumerate() {
            row("rabi", None, i, Some(a), *v);
        }
    }
    for (i, r) in set.cavity_g.iter().enumerate() {
        for (a, v) in r.iter().enumerate() {
            row("cavity_g", None, i, Some(a), *v);
        }
    }
    for (k, per_ion) in set.ld_cavity_p.iter().enumerate() {
        for (i, r) in per_ion.iter().enumerate() {
            for (a, v) in r.iter().enumerate() {
                row("ld_cavity_p", Some(k), i, Some(a), *v);
            }
        }
    }
    for (k, per_ion) in set.ld_gating_theta.iter().enumerate() {
        for (i, r) in per_ion.iter().enumerate() {
            for (a, v) in r.iter().enumerate() {
                row("ld_gating_theta", Some(k), i, Some(a), *v);
            }
        }
    }
    for (k, per_ion) in set.ion_current_t.iter().enumerate() {
        for (i, v) in per_ion.iter().enumerate() {
            row("ion_current_t", Some(k), i, None, *v);
        }
    }
    out
}
