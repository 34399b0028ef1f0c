//! Dense master-equation oracle.
//!
//! Integrates `d rho/dt = -i[H, rho] + sum_ab Gamma_ab (2 S_b^dag rho S_a - {S_a S_b^dag, rho})`
//! next to the purely coherent evolution of the same initial state and
//! compares the initial decay of `F(t) = Tr rho_0(t) rho(t)` with
//! `2 sum_ab Gamma_ab <Delta S_a Delta S_b^dag>`.

use nalgebra::{DMatrix, DVector};
use ode_solvers::{Dopri5, System};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::decoherence::{rate_general, RateMode, Reservoir};
use crate::error::{Error, Result};
use crate::ops::{Channel, DenseLayout, Site};
use crate::params::{LatticeSpec, PhysicalParams};
use crate::relaxation::{closed_form_one_qubit, OneQubitSetup, RelaxationSet};
use crate::states::{gated_amplitudes, one_qubit_gated_moments};
use crate::C64;

pub const MAX_DIM: usize = 1024;
/// Largest relative slope gap accepted by [`oracle_check`].
pub const GAP_TOLERANCE: f64 = 1e-3;
const RTOL: f64 = 1e-10;
const ATOL: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseModel {
    /// rad/s.
    pub hamiltonian: DMatrix<C64>,
    pub channels: Vec<DMatrix<C64>>,
    /// Gamma_ab, 1/s.
    pub weights: DMatrix<C64>,
    pub initial: DVector<C64>,
}

fn hermitian_gap(m: &DMatrix<C64>) -> f64 {
    (m - m.adjoint()).camax()
}

impl DenseModel {
    pub fn dim(&self) -> usize {
        self.initial.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        let bad = |msg: String| Err(Error::Oracle(msg));
        if d == 0 || d > MAX_DIM {
            return bad(format!("dimension {d} outside 1..={MAX_DIM}"));
        }
        if self.hamiltonian.shape() != (d, d) || self.channels.iter().any(|s| s.shape() != (d, d)) {
            return bad("operator shapes do not match the state dimension".into());
        }
        let m = self.channels.len();
        if self.weights.shape() != (m, m) {
            return bad(format!("weights are {:?} for {m} channels", self.weights.shape()));
        }
        if hermitian_gap(&self.hamiltonian) > 1e-12 * self.hamiltonian.camax().max(1.0) {
            return bad("Hamiltonian is not Hermitian".into());
        }
        if (self.initial.norm() - 1.0).abs() > 1e-12 {
            return bad(format!("initial state has norm {}", self.initial.norm()));
        }
        if m > 0 {
            let scale = self.weights.camax();
            if hermitian_gap(&self.weights) > 1e-12 * scale.max(f64::MIN_POSITIVE) {
                return bad("weight matrix is not Hermitian".into());
            }
            let eig = self.weights.clone().symmetric_eigen().eigenvalues;
            let lo = eig.min();
            if lo < -1e-12 * eig.amax() {
                return bad(format!("weight matrix has eigenvalue {lo:.3e}"));
            }
        }
        Ok(())
    }

    fn dissipator(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let d = self.dim();
        let mut out = DMatrix::zeros(d, d);
        for (a, sa) in self.channels.iter().enumerate() {
            for (b, sb) in self.channels.iter().enumerate() {
                let g = self.weights[(a, b)];
                if g == C64::new(0.0, 0.0) {
                    continue;
                }
                let sbd = sb.adjoint();
                let prod = sa * &sbd;
                out += (&sbd * rho * sa * C64::new(2.0, 0.0) - &prod * rho - rho * &prod) * g;
            }
        }
        out
    }

    /// `2 Re sum_ab Gamma_ab (<S_a S_b^dag> - <S_a><S_b^dag>)` in the initial state.
    pub fn formula_rate(&self) -> f64 {
        let psi = &self.initial;
        let expect = |m: &DMatrix<C64>| psi.dotc(&(m * psi));
        let mut sum = C64::new(0.0, 0.0);
        for (a, sa) in self.channels.iter().enumerate() {
            for (b, sb) in self.channels.iter().enumerate() {
                let sbd = sb.adjoint();
                let f = expect(&(sa * &sbd)) - expect(sa) * expect(&sbd);
                sum += self.weights[(a, b)] * f;
            }
        }
        2.0 * sum.re
    }

    /// Upper bound on the fastest rate in the problem, 1/s.
    pub fn rate_scale(&self) -> f64 {
        let mut s = spectral_radius(&self.hamiltonian);
        for (a, sa) in self.channels.iter().enumerate() {
            for (b, sb) in self.channels.iter().enumerate() {
                s += 2.0 * self.weights[(a, b)].norm() * sa.norm() * sb.norm();
            }
        }
        s
    }
}

fn spectral_radius(h: &DMatrix<C64>) -> f64 {
    if h.is_empty() {
        return 0.0;
    }
    h.clone().symmetric_eigen().eigenvalues.amax()
}

struct PairSystem<'a> {
    model: &'a DenseModel,
    dim: usize,
}

impl PairSystem<'_> {
    fn unpack(&self, y: &DVector<f64>, offset: usize) -> DMatrix<C64> {
        let d = self.dim;
        let n = d * d;
        DMatrix::from_fn(d, d, |r, c| C64::new(y[offset + r * d + c], y[offset + n + r * d + c]))
    }

    fn pack(&self, m: &DMatrix<C64>, out: &mut DVector<f64>, offset: usize) {
        let d = self.dim;
        let n = d * d;
        for r in 0..d {
            for c in 0..d {
                out[offset + r * d + c] = m[(r, c)].re;
                out[offset + n + r * d + c] = m[(r, c)].im;
            }
        }
    }
}

impl System<f64, DVector<f64>> for PairSystem<'_> {
    fn system(&self, _t: f64, y: &DVector<f64>, dy: &mut DVector<f64>) {
        let n2 = 2 * self.dim * self.dim;
        let h = &self.model.hamiltonian;
        let mi = C64::new(0.0, -1.0);
        let rho = self.unpack(y, 0);
        let d_rho = (h * &rho - &rho * h) * mi + self.model.dissipator(&rho);
        self.pack(&d_rho, dy, 0);
        let rho0 = self.unpack(y, n2);
        let d_rho0 = (h * &rho0 - &rho0 * h) * mi;
        self.pack(&d_rho0, dy, n2);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FidelityTrace {
    pub times: Vec<f64>,
    pub fidelity: Vec<f64>,
    /// `1 - F`, computed without cancellation against 1.
    pub infidelity: Vec<f64>,
    pub max_trace_error: f64,
    pub min_eigenvalue: f64,
}

/// Evolve the dissipative and coherent copies of the initial state to `t_max`,
/// sampling F every `dt`.
pub fn evolve_pair(model: &DenseModel, t_max: f64, dt: f64) -> Result<FidelityTrace> {
    model.validate()?;
    if !(t_max > 0.0 && dt > 0.0 && dt <= t_max) {
        return Err(Error::Oracle(format!("need 0 < dt <= t_max, got dt {dt}, t_max {t_max}")));
    }
    let fastest = spectral_radius(&model.hamiltonian);
    if dt * fastest >= 0.1 {
        return Err(Error::Oracle(format!(
            "dt = {dt:.3e} does not resolve the Hamiltonian (|E|max = {fastest:.3e})"
        )));
    }
    let d = model.dim();
    let sys = PairSystem { model, dim: d };
    let rho = &model.initial * model.initial.adjoint();
    let mut y = DVector::zeros(4 * d * d);
    sys.pack(&rho, &mut y, 0);
    sys.pack(&rho, &mut y, 2 * d * d);
    let mut stepper = Dopri5::new(sys, 0.0, t_max, dt, y, RTOL, ATOL);
    stepper
        .integrate()
        .map_err(|e| Error::Oracle(format!("integration failed: {e:?}")))?;
    let sys = PairSystem { model, dim: d };
    let mut trace = FidelityTrace {
        times: stepper.x_out().clone(),
        fidelity: Vec::new(),
        infidelity: Vec::new(),
        max_trace_error: 0.0,
        min_eigenvalue: f64::INFINITY,
    };
    for y in stepper.y_out() {
        let r = sys.unpack(y, 0);
        let r0 = sys.unpack(y, 2 * d * d);
        let trace_err = (r.trace() - C64::new(1.0, 0.0)).norm().max((r0.trace() - C64::new(1.0, 0.0)).norm());
        trace.max_trace_error = trace.max_trace_error.max(trace_err);
        if trace_err > 1e-9 {
            return Err(Error::Oracle(format!("trace drifted by {trace_err:.3e}")));
        }
        if hermitian_gap(&r) > 1e-9 {
            return Err(Error::Oracle("density matrix lost Hermiticity".into()));
        }
        let lo = r.clone().symmetric_eigen().eigenvalues.min();
        trace.min_eigenvalue = trace.min_eigenvalue.min(lo);
        if lo < -1e-8 {
            return Err(Error::Oracle(format!("density matrix eigenvalue {lo:.3e}")));
        }
        // 1 - Tr(r0 r) = Tr(r0 (r0 - r)) for the pure coherent copy
        let one_minus = (&r0 * (&r0 - &r)).trace().re;
        trace.infidelity.push(one_minus);
        trace.fidelity.push((&r0 * &r).trace().re);
    }
    Ok(trace)
}

/// `(1 - F(h)) / h` extrapolated to `h -> 0` from `h`, `h/2` and `h/4`.
pub fn richardson_slope(model: &DenseModel, h: f64) -> Result<f64> {
    let g = |t: f64| -> Result<f64> {
        let tr = evolve_pair(model, t, t)?;
        Ok(tr.infidelity.last().copied().unwrap_or(0.0) / t)
    };
    let (g1, g2, g3) = (g(h)?, g(0.5 * h)?, g(0.25 * h)?);
    let (r1, r2) = (2.0 * g2 - g1, 2.0 * g3 - g2);
    Ok((4.0 * r2 - r1) / 3.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeCheck {
    pub dim: usize,
    pub numeric: f64,
    pub formula: f64,
    /// Relative gap, or the gap over the rate scale when the formula vanishes.
    pub gap: f64,
}

impl SlopeCheck {
    pub fn passed(&self) -> bool {
        self.gap < GAP_TOLERANCE
    }
}

/// Initial step of the Richardson sequence.
pub fn default_step(model: &DenseModel) -> f64 {
    0.02 / model.rate_scale().max(f64::MIN_POSITIVE)
}

pub fn slope_check(model: &DenseModel) -> Result<SlopeCheck> {
    let numeric = richardson_slope(model, default_step(model))?;
    let formula = model.formula_rate();
    let gap = if formula != 0.0 {
        (numeric - formula).abs() / formula.abs()
    } else {
        numeric.abs() / model.rate_scale().max(f64::MIN_POSITIVE)
    };
    Ok(SlopeCheck { dim: model.dim(), numeric, formula, gap })
}

fn random_c(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

/// Random model of dimension `dim`: Hermitian H, up to three channels with a
/// weight matrix `A A^dag`, normalised pure initial state.
pub fn random_model(rng: &mut ChaCha8Rng, dim: usize) -> DenseModel {
    let a = DMatrix::from_fn(dim, dim, |_, _| random_c(rng));
    let hamiltonian = (&a + a.adjoint()) * C64::new(0.5, 0.0);
    let m = rng.random_range(1..=3usize);
    let channels = (0..m).map(|_| DMatrix::from_fn(dim, dim, |_, _| random_c(rng))).collect();
    let b = DMatrix::from_fn(m, m, |_, _| random_c(rng));
    let weights = &b * b.adjoint();
    let v = DVector::from_fn(dim, |_, _| random_c(rng));
    let initial = &v / C64::new(v.norm(), 0.0);
    DenseModel { hamiltonian, channels, weights, initial }
}

/// `trials` random models with dimensions 2..=12 from a fixed seed.
pub fn trial_models(seed: u64, trials: usize) -> Vec<DenseModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials)
        .map(|_| {
            let dim = rng.random_range(2..=12usize);
            random_model(&mut rng, dim)
        })
        .collect()
}

pub fn oracle_check(seed: u64, trials: usize) -> Result<Vec<SlopeCheck>> {
    trial_models(seed, trials).par_iter().map(slope_check).collect()
}

/// Gated-qubit part of a relaxation set as a dense model on one lambda qubit
/// and a cavity truncated at `cavity_dim` levels.
pub fn dense_from_relaxation(
    relax: &RelaxationSet,
    hamiltonian: DMatrix<C64>,
    initial: DVector<C64>,
    cavity_dim: usize,
) -> Result<DenseModel> {
    let layout = DenseLayout { n_qubits: 1, cavity_dim };
    let mut channels: Vec<Channel> = Vec::new();
    for e in &relax.entries {
        for c in [e.left, e.right] {
            if c.site() == Some(Site::Idle) {
                return Err(Error::Oracle(format!("idle channel {c} has no dense form")));
            }
            if !channels.contains(&c) {
                channels.push(c);
            }
        }
    }
    let idx = |c: &Channel| channels.iter().position(|x| x == c).unwrap();
    let mut weights = DMatrix::zeros(channels.len(), channels.len());
    for e in &relax.entries {
        weights[(idx(&e.left), idx(&e.right))] += e.gamma;
    }
    let ops = channels.iter().map(|c| c.dense(&layout)).collect::<Result<Vec<_>>>()?;
    Ok(DenseModel { hamiltonian, channels: ops, weights, initial })
}

/// Relaxation set restricted to the entries that act on named qubits or the cavity.
pub fn gated_part(relax: &RelaxationSet) -> RelaxationSet {
    let mut out = relax.clone();
    out.entries
        .retain(|e| e.left.site() != Some(Site::Idle) && e.right.site() != Some(Site::Idle));
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineCheck {
    pub slope: SlopeCheck,
    /// Rate assembled from the closed-form elements and structured moments.
    pub assembled: f64,
}

/// One gated lambda qubit and a two-level cavity driven by the effective
/// Raman coupling, with the closed-form one-qubit relaxation elements.
pub fn pipeline_model(params: &PhysicalParams, lattice: &LatticeSpec, setup: &OneQubitSetup) -> Result<(DenseModel, RelaxationSet)> {
    let setup = OneQubitSetup { gated_qubit: 0, ..*setup };
    let relax = gated_part(&closed_form_one_qubit(params, lattice, &setup)?);
    let omega = setup.case.rabi(params);
    let amps = gated_amplitudes(std::f64::consts::FRAC_PI_4, setup.dphi, omega, params.detuning_ci);
    let cavity_dim = 2;
    let mut initial = DVector::zeros(3 * cavity_dim);
    for (x, a) in amps.iter().enumerate() {
        initial[x * cavity_dim] = *a;
    }
    let coupling = omega * omega / params.detuning_ci;
    let mut h = DMatrix::zeros(3 * cavity_dim, 3 * cavity_dim);
    for n in 0..cavity_dim {
        h[(n, cavity_dim + n)] = C64::new(coupling, 0.0);
        h[(cavity_dim + n, n)] = C64::new(coupling, 0.0);
    }
    Ok((dense_from_relaxation(&relax, h, initial, cavity_dim)?, relax))
}

pub fn pipeline_check(params: &PhysicalParams, lattice: &LatticeSpec, setup: &OneQubitSetup) -> Result<PipelineCheck> {
    let (model, relax) = pipeline_model(params, lattice, setup)?;
    let omega = setup.case.rabi(params);
    let moments = one_qubit_gated_moments(std::f64::consts::FRAC_PI_4, setup.dphi, omega, params.detuning_ci)?;
    let assembled = rate_general(&relax, &moments, RateMode::RealPart)?.exact_rate;
    Ok(PipelineCheck { slope: slope_check(&model)?, assembled })
}

/// `Tr_B rho_B (<psi|V^2|psi> - <psi|V|psi>^2)` for one qubit coupled to a
/// single reservoir in its vacuum, where `<psi|V|psi>` is still a reservoir
/// operator. Built from dense operators with every mode truncated at two
/// excitations.
pub fn dense_tau2_variance(reservoir: &Reservoir, psi: &DVector<C64>) -> Result<f64> {
    let m = reservoir.modes.len();
    if m > 6 {
        return Err(Error::Oracle(format!("{m} modes is too many for the dense variance")));
    }
    if reservoir.temperature != 0.0 {
        return Err(Error::Oracle("dense variance needs a vacuum reservoir".into()));
    }
    if psi.len() != 3 {
        return Err(Error::Oracle("system state must be one lambda qubit".into()));
    }
    let layout = DenseLayout { n_qubits: 1, cavity_dim: 0 };
    let levels = 3usize;
    let bath_dim = levels.pow(m as u32);
    let lower = DMatrix::from_fn(levels, levels, |r, c| {
        if c == r + 1 {
            C64::new((c as f64).sqrt(), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let mode_op = |k: usize| {
        (0..m).fold(DMatrix::identity(1, 1), |acc: DMatrix<C64>, j| {
            acc.kronecker(&if j == k { lower.clone() } else { DMatrix::identity(levels, levels) })
        })
    };
    let a: Vec<DMatrix<C64>> = (0..m).map(mode_op).collect();
    let dim = 3 * bath_dim;
    let mut v = DMatrix::zeros(dim, dim);
    let mut w = DMatrix::zeros(bath_dim, bath_dim);
    for t in &reservoir.terms {
        let s = t.channel.dense(&layout)?;
        let mut r = DMatrix::zeros(bath_dim, bath_dim);
        for k in 0..m {
            r += &a[k] * t.c[k] + a[k].adjoint() * t.d[k];
        }
        let sr = s.kronecker(&r);
        v += &sr + sr.adjoint();
        let mean_s = psi.dotc(&(&s * psi));
        let wr = &r * mean_s;
        w += &wr + wr.adjoint();
    }
    let mut vac = DVector::zeros(bath_dim);
    vac[0] = C64::new(1.0, 0.0);
    let state = psi.kronecker(&vac);
    let second = (&v * &state).norm_squared();
    let conditional = (&w * &vac).norm_squared();
    Ok(second - conditional)
}
