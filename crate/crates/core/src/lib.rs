//! Markovian decoherence budgets for lambda-system qubits coupled to a cavity,
//! spontaneous-emission modes and the vibrational modes of an ion lattice.
//!
//! The pipeline runs lattice normal modes into coupling constants, relaxation
//! matrices and structured state moments, and finally into a decoherence
//! report. [`oracle`] integrates small dense master equations to check the
//! rate formula numerically.

pub mod constants;
pub mod couplings;
pub mod decoherence;
pub mod error;
pub mod lattice;
pub mod ops;
pub mod oracle;
pub mod params;
pub mod quad;
pub mod relaxation;
pub mod scenario;
pub mod states;

pub use num_complex::Complex64 as C64;

pub use couplings::{compute_internal_couplings, compute_ld_couplings, CouplingSet};
pub use decoherence::{
    fidelity_loss, gate_time, rate_general, rate_no_gating, rate_one_qubit, rate_two_qubit,
    short_time_tau2, DecoherenceReport, RateMode, Tau2Report, TermLine,
};
pub use error::{Error, Result};
pub use lattice::{
    build_hessian, calibrate_trap_freq, lamb_dicke, solve_modes, Hessian, VibrationalSpectrum,
};
pub use ops::{CavityOp, Channel, MomentKey, Site, Unit};
pub use oracle::{evolve_pair, slope_check, DenseModel, SlopeCheck};
pub use params::{boltzmann_factor, load_config, Config, LatticeSpec, PhysicalParams};
pub use relaxation::{
    closed_form_no_gating, closed_form_one_qubit, closed_form_two_qubit, correlation_integral,
    gamma_delta, Family, RelaxationEntry, RelaxationSet, SpectralModel,
};
pub use scenario::{run, OutputFormat, RunOutput, ScenarioKind, ScenarioSpec, StateKind, SweepSpec};
pub use states::{
    ghz_moments, hadamard_moments, one_qubit_gated_moments, theta_of_t, two_qubit_moment_table,
    MomentSource, PulseShape, StateMoments,
};
