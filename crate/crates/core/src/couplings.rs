//! Coupling constants between the qubits, the fields and the lattice modes.
//!
//! Dipole matrix elements never appear explicitly: the measured magnitudes
//! |Omega|, |g| and the emission rates are inputs, and positions enter through
//! plane-wave phases `exp(i k . r_i)`. All fields propagate along x.

use nalgebra::Vector3;
use serde::Serialize;

use crate::constants::{C_LIGHT, EPSILON_0, HBAR};
use crate::error::{Error, Result};
use crate::lattice::VibrationalSpectrum;
use crate::params::{LatticeSpec, PhysicalParams};
use crate::C64;

/// Polarization of the cavity mode, used by the ion-current coupling.
pub const CAVITY_POLARIZATION: [f64; 3] = [0.0, 0.0, 1.0];

/// Single effective carrier of a classical gating field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GatingField {
    /// |Omega_ia|, rad/s.
    pub amplitude: f64,
    /// Carrier phase phi, rad.
    pub carrier_phase: f64,
    /// Relative phase of the 0-2 field, Omega_i0 = Omega_i1 exp(i dphi).
    pub dphi: f64,
}

/// Flat continuum of spontaneous-emission modes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeBath {
    pub rates: [f64; 2],
    pub center: f64,
}

/// One discretised bath mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BathMode {
    pub omega: f64,
    /// |g_k^{ia}|, rad/s.
    pub coupling: f64,
}

impl SeBath {
    /// Spectral density J_a = Gamma_a / 2 pi of transition `a`.
    pub fn spectral_density(&self, a: usize) -> f64 {
        self.rates[a] / (2.0 * std::f64::consts::PI)
    }

    /// `n` equally spaced modes over `center +- half_width`, each carrying
    /// coupling sqrt(Gamma_a d_omega / 2 pi) so the golden-rule rate is Gamma_a.
    pub fn sample(&self, a: usize, half_width: f64, n: usize) -> Vec<BathMode> {
        let d = 2.0 * half_width / n as f64;
        let g = (self.spectral_density(a) * d).sqrt();
        (0..n)
            .map(|k| BathMode { omega: self.center - half_width + (k as f64 + 0.5) * d, coupling: g })
            .collect()
    }
}

/// Position-dependent couplings of the internal transitions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InternalCouplings {
    pub wavevector: [f64; 3],
    pub field: GatingField,
    pub g_magnitude: [f64; 2],
    pub se: SeBath,
    #[serde(skip)]
    lattice: LatticeSpec,
}

impl InternalCouplings {
    fn k(&self) -> Vector3<f64> {
        Vector3::from(self.wavevector)
    }

    /// Plane-wave phase k . r_i at site i.
    pub fn site_phase(&self, i: usize) -> f64 {
        self.k().dot(&self.lattice.site_position(i))
    }

    /// Omega_ia = -i |Omega| exp(i (k.r_i + phi)), with the 0-2 field offset by dphi.
    pub fn rabi(&self, i: usize, a: usize) -> C64 {
        let f = &self.field;
        let extra = if a == 0 { f.dphi } else { 0.0 };
        C64::new(0.0, -1.0) * C64::from_polar(f.amplitude, self.site_phase(i) + f.carrier_phase + extra)
    }

    /// g_ia = -i |g_a| exp(i k.r_i).
    pub fn cavity(&self, i: usize, a: usize) -> C64 {
        C64::new(0.0, -1.0) * C64::from_polar(self.g_magnitude[a], self.site_phase(i))
    }

    pub fn rabi_table(&self, n: usize) -> Vec<[C64; 2]> {
        (0..n).map(|i| [self.rabi(i, 0), self.rabi(i, 1)]).collect()
    }

    pub fn cavity_table(&self, n: usize) -> Vec<[C64; 2]> {
        (0..n).map(|i| [self.cavity(i, 0), self.cavity(i, 1)]).collect()
    }
}

pub fn compute_internal_couplings(
    params: &PhysicalParams,
    spec: &LatticeSpec,
    field: GatingField,
) -> InternalCouplings {
    let k = params.omega0 / C_LIGHT;
    InternalCouplings {
        wavevector: [k, 0.0, 0.0],
        field,
        g_magnitude: params.g_cavity,
        se: SeBath { rates: params.gamma_se, center: params.omega0 },
        lattice: spec.clone(),
    }
}

/// All coupling families for the ions of one lattice.
#[derive(Clone, Debug, Serialize)]
pub struct CouplingSet {
    pub internal: InternalCouplings,
    /// Omega_ia, indexed [i][a].
    pub rabi_classical: Vec<[C64; 2]>,
    /// g_ia, indexed [i][a].
    pub cavity_g: Vec<[C64; 2]>,
    pub frequencies: Vec<f64>,
    /// p_K^{ia}, indexed [K][i][a].
    pub ld_cavity_p: Vec<Vec<[C64; 2]>>,
    /// Theta_K^{ia}, indexed [K][i][a].
    pub ld_gating_theta: Vec<Vec<[C64; 2]>>,
    /// t_K^i, indexed [K][i].
    pub ion_current_t: Vec<Vec<C64>>,
}

pub fn compute_ld_couplings(
    params: &PhysicalParams,
    spec: &LatticeSpec,
    spectrum: &VibrationalSpectrum,
    internal: &InternalCouplings,
) -> Result<CouplingSet> {
    let n = spec.n_ions();
    if spectrum.mode_matrix.nrows() != 3 * n {
        return Err(Error::InvalidParam(format!(
            "couplings: spectrum has {} coordinates, lattice has {n} ions",
            spectrum.mode_matrix.nrows()
        )));
    }
    let k = internal.k();
    let u = Vector3::from(CAVITY_POLARIZATION);
    let m = spec.ion_mass;
    let current = spec.ion_charge / (2.0 * EPSILON_0 * params.omega0 * params.cavity_volume).sqrt();
    let rabi = internal.rabi_table(n);
    let cav = internal.cavity_table(n);
    let i_unit = C64::new(0.0, 1.0);

    let modes = spectrum.n_modes();
    let mut p = vec![vec![[C64::default(); 2]; n]; modes];
    let mut theta = p.clone();
    let mut t = vec![vec![C64::default(); n]; modes];
    for kk in 0..modes {
        let nu = spectrum.frequencies[kk];
        if nu <= 0.0 {
            continue;
        }
        let zpf = (HBAR / (2.0 * m * nu)).sqrt();
        for i in 0..n {
            let s = spectrum.displacement(i, kk);
            let proj = k.dot(&s) * zpf;
            for a in 0..2 {
                p[kk][i][a] = i_unit * cav[i][a] * proj;
                theta[kk][i][a] = i_unit * rabi[i][a] * proj;
            }
            t[kk][i] = i_unit
                * current
                * (nu / (2.0 * m)).sqrt()
                * u.dot(&s)
                * C64::from_polar(1.0, internal.site_phase(i));
        }
    }
    Ok(CouplingSet {
        internal: internal.clone(),
        rabi_classical: rabi,
        cavity_g: cav,
        frequencies: spectrum.frequencies.clone(),
        ld_cavity_p: p,
        ld_gating_theta: theta,
        ion_current_t: t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_hessian, solve_modes};

    fn field() -> GatingField {
        GatingField { amplitude: 3e6, carrier_phase: 0.3, dphi: 0.1 }
    }

    #[test]
    fn half_wavelength_gives_pi_phase() {
        let p = PhysicalParams::default();
        let lambda = 2.0 * std::f64::consts::PI * C_LIGHT / p.omega0;
        let spec = LatticeSpec { dims: [2, 1, 1], spacing: lambda / 2.0, ..Default::default() };
        let c = compute_internal_couplings(&p, &spec, field());
        let ratio = c.cavity(1, 1) / c.cavity(0, 1);
        assert!((ratio - C64::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn table_magnitudes() {
        let p = PhysicalParams::default();
        let c = compute_internal_couplings(&p, &LatticeSpec::default(), field());
        for i in 0..64 {
            for a in 0..2 {
                assert!((c.cavity(i, a).norm() - 3e8).abs() < 1e-6);
                assert!((c.rabi(i, a).norm() - 3e6).abs() < 1e-8);
            }
        }
        let p0 = PhysicalParams { g_cavity: [0.0, 3e8], ..p };
        let c = compute_internal_couplings(&p0, &LatticeSpec::default(), field());
        assert_eq!(c.cavity(5, 0), C64::new(0.0, 0.0));
    }

    #[test]
    fn se_sampler_reproduces_rate() {
        let bath = SeBath { rates: [3e4, 1e4], center: 3e15 };
        let modes = bath.sample(1, 1e12, 1000);
        let d = modes[1].omega - modes[0].omega;
        // golden rule: 2 pi sum |g|^2 delta(omega) -> 2 pi |g|^2 / d
        let rate = 2.0 * std::f64::consts::PI * modes[0].coupling.powi(2) / d;
        assert!((rate / 1e4 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_ion_completeness() {
        let p = PhysicalParams::default();
        let spec = LatticeSpec { dims: [1, 1, 1], trap_freq: Some(8e7), ..Default::default() };
        let s = solve_modes(&build_hessian(&spec).unwrap(), spec.ion_mass).unwrap();
        let c = compute_internal_couplings(&p, &spec, field());
        let set = compute_ld_couplings(&p, &spec, &s, &c).unwrap();
        let k = p.omega0 / C_LIGHT;
        let eta = k * (HBAR / (2.0 * spec.ion_mass * 8e7)).sqrt();
        let total: f64 = set.ld_cavity_p.iter().map(|m| m[0][1].norm_sqr()).sum();
        let want = eta * eta * 3e8f64.powi(2);
        assert!((total / want - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ld_invariants_on_cube() {
        let p = PhysicalParams::default();
        let spec = LatticeSpec { dims: [2, 2, 2], trap_freq: Some(6e7), ..Default::default() };
        let s = solve_modes(&build_hessian(&spec).unwrap(), spec.ion_mass).unwrap();
        let c = compute_internal_couplings(&p, &spec, field());
        let set = compute_ld_couplings(&p, &spec, &s, &c).unwrap();
        let k = Vector3::from(c.wavevector);
        for kk in 0..s.n_modes() {
            let zpf = (HBAR / (2.0 * spec.ion_mass * s.frequencies[kk])).sqrt();
            for i in 0..8 {
                let want = 3e8 * k.dot(&s.displacement(i, kk)).abs() * zpf;
                assert!((set.ld_cavity_p[kk][i][1].norm() - want).abs() <= 1e-12 * want.max(1e-300));
            }
        }
        // sum over modes of squared displacement is 1 per ion and axis
        for row in 0..24 {
            let sum: f64 = (0..24).map(|kk| s.mode_matrix[(row, kk)].powi(2)).sum();
            assert!((sum - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn common_shift_is_a_global_phase() {
        let p = PhysicalParams::default();
        let spec = LatticeSpec { dims: [3, 2, 1], trap_freq: Some(6e7), ..Default::default() };
        let moved = LatticeSpec { origin: [1.234e-7, -2e-7, 5e-8], ..spec.clone() };
        let s = solve_modes(&build_hessian(&spec).unwrap(), spec.ion_mass).unwrap();
        let s_moved = solve_modes(&build_hessian(&moved).unwrap(), spec.ion_mass).unwrap();
        let a = compute_ld_couplings(&p, &spec, &s, &compute_internal_couplings(&p, &spec, field())).unwrap();
        let b = compute_ld_couplings(&p, &moved, &s_moved, &compute_internal_couplings(&p, &moved, field())).unwrap();
        let global = b.cavity_g[0][1] / a.cavity_g[0][1];
        assert!((global.norm() - 1.0).abs() < 1e-12);
        for i in 0..6 {
            for x in 0..2 {
                assert!((b.cavity_g[i][x] - a.cavity_g[i][x] * global).norm() < 1e-6);
                assert!((b.rabi_classical[i][x] - a.rabi_classical[i][x] * global).norm() < 1e-8);
            }
        }
        // sum_K p_K^i conj(p_K^j) does not depend on the basis chosen inside degenerate modes
        let gram = |c: &CouplingSet, i: usize, j: usize| -> C64 {
            c.ld_cavity_p.iter().map(|pk| pk[i][1] * pk[j][1].conj()).sum()
        };
        for kk in 0..18 {
            assert!((a.frequencies[kk] / b.frequencies[kk] - 1.0).abs() < 1e-8);
        }
        let scale = gram(&a, 0, 0).norm();
        for i in 0..6 {
            for j in 0..6 {
                assert!((gram(&a, i, j) - gram(&b, i, j)).norm() < 1e-8 * scale);
            }
        }
    }

    #[test]
    fn ion_current_linear_in_charge() {
        let p = PhysicalParams::default();
        let spec = LatticeSpec { dims: [2, 1, 1], trap_freq: Some(6e7), ..Default::default() };
        let s = solve_modes(&build_hessian(&spec).unwrap(), spec.ion_mass).unwrap();
        let c = compute_internal_couplings(&p, &spec, field());
        let a = compute_ld_couplings(&p, &spec, &s, &c).unwrap();
        let spec2 = LatticeSpec { ion_charge: 2.0 * spec.ion_charge, ..spec.clone() };
        let b = compute_ld_couplings(&p, &spec2, &s, &c).unwrap();
        for kk in 0..6 {
            for i in 0..2 {
                assert!((b.ion_current_t[kk][i] - a.ion_current_t[kk][i] * 2.0).norm() <= 1e-12 * b.ion_current_t[kk][i].norm().max(1e-300));
            }
        }
    }
}
