//! Harmonic normal modes of a trapped-ion lattice.
//!
//! The potential energy is expanded to second order in the ion displacements.
//! Each ion sits in an isotropic harmonic well of frequency `trap_freq` and
//! interacts with every other ion through the Coulomb force.

use nalgebra::{DMatrix, Matrix3, SymmetricEigen, Vector3};

use crate::constants::{coulomb_strength, HBAR};
use crate::error::{Error, Result};
use crate::params::LatticeSpec;

const SYMMETRY_TOL: f64 = 1e-12;
const ORTHO_TOL: f64 = 1e-10;
const RESIDUAL_TOL: f64 = 1e-8;
const CLAMP_REL: f64 = 1e-8;

/// Second-derivative matrix `V_{ij}^{ab}` in N/m, index `3 i + a`.
#[derive(Clone, Debug)]
pub struct Hessian {
    pub matrix: DMatrix<f64>,
    pub site_positions: Vec<Vector3<f64>>,
}

impl Hessian {
    pub fn n_ions(&self) -> usize {
        self.site_positions.len()
    }

    /// Largest |V - V^T| entry relative to the largest |V| entry.
    pub fn symmetry_deviation(&self) -> f64 {
        let m = &self.matrix;
        let scale = m.amax().max(f64::MIN_POSITIVE);
        (m - m.transpose()).amax() / scale
    }
}

#[derive(Clone, Debug)]
pub struct VibrationalSpectrum {
    /// Mode frequencies in rad/s, ascending.
    pub frequencies: Vec<f64>,
    /// Column K holds the displacement pattern `S_{i a; K}`.
    pub mode_matrix: DMatrix<f64>,
    pub nu_max: f64,
    /// Modes whose small negative eigenvalue was clamped to zero.
    pub clamped: usize,
}

impl VibrationalSpectrum {
    /// Displacement of ion `ion` in mode `k`.
    pub fn displacement(&self, ion: usize, k: usize) -> Vector3<f64> {
        let s = &self.mode_matrix;
        Vector3::new(s[(3 * ion, k)], s[(3 * ion + 1, k)], s[(3 * ion + 2, k)])
    }

    pub fn n_modes(&self) -> usize {
        self.frequencies.len()
    }

    /// Max |S^T S - I| entry.
    pub fn orthogonality_deviation(&self) -> f64 {
        let s = &self.mode_matrix;
        let n = s.ncols();
        (s.transpose() * s - DMatrix::<f64>::identity(n, n)).amax()
    }
}

fn pair_block(r: &Vector3<f64>, kappa: f64) -> Matrix3<f64> {
    let r2 = r.norm_squared();
    let r5 = r2 * r2 * r2.sqrt();
    (3.0 * r * r.transpose() - Matrix3::identity() * r2) * (kappa / r5)
}

/// Coulomb part of the Hessian for ions at `positions`.
pub fn coulomb_hessian(
    positions: &[Vector3<f64>],
    charge: f64,
    cutoff: Option<f64>,
) -> Result<DMatrix<f64>> {
    let n = positions.len();
    let kappa = coulomb_strength(charge);
    let scale = positions.iter().map(|p| p.norm()).fold(0.0, f64::max).max(1.0e-300);
    let mut v = DMatrix::<f64>::zeros(3 * n, 3 * n);
    for i in 0..n {
        for j in (i + 1)..n {
            let r = positions[i] - positions[j];
            let dist = r.norm();
            if dist <= 1e-12 * scale {
                return Err(Error::CoincidentIons(i, j));
            }
            if cutoff.is_some_and(|c| dist > c) {
                continue;
            }
            let h = pair_block(&r, kappa);
            for a in 0..3 {
                for b in 0..3 {
                    v[(3 * i + a, 3 * j + b)] -= h[(a, b)];
                    v[(3 * j + a, 3 * i + b)] -= h[(a, b)];
                    v[(3 * i + a, 3 * i + b)] += h[(a, b)];
                    v[(3 * j + a, 3 * j + b)] += h[(a, b)];
                }
            }
        }
    }
    Ok(v)
}

/// Hessian for explicit positions, mass, charge and trap frequency.
pub fn build_hessian_at(
    positions: Vec<Vector3<f64>>,
    ion_mass: f64,
    ion_charge: f64,
    trap_freq: f64,
    cutoff: Option<f64>,
) -> Result<Hessian> {
    let mut matrix = coulomb_hessian(&positions, ion_charge, cutoff)?;
    let k_trap = ion_mass * trap_freq * trap_freq;
    for d in 0..matrix.nrows() {
        matrix[(d, d)] += k_trap;
    }
    let h = Hessian { matrix, site_positions: positions };
    let dev = h.symmetry_deviation();
    if dev > SYMMETRY_TOL {
        return Err(Error::Numerical(format!("lattice: Hessian asymmetry {dev:.3e}")));
    }
    Ok(h)
}

/// Hessian of the lattice described by `spec`. `spec.trap_freq` must be set;
/// see [`calibrate_trap_freq`] or [`resolve_trap`].
pub fn build_hessian(spec: &LatticeSpec) -> Result<Hessian> {
    spec.validate()?;
    let trap = spec.trap_freq.ok_or_else(|| {
        Error::Calibration("trap_freq unset; calibrate it against a target nu_max first".into())
    })?;
    build_hessian_at(
        spec.site_positions(),
        spec.ion_mass,
        spec.ion_charge,
        trap,
        spec.neighbor_cutoff,
    )
}

/// Normal modes of `h` for ions of mass `ion_mass`.
pub fn solve_modes(h: &Hessian, ion_mass: f64) -> Result<VibrationalSpectrum> {
    if !(ion_mass.is_finite() && ion_mass > 0.0) {
        return Err(Error::InvalidParam(format!("ion_mass must be positive, got {ion_mass}")));
    }
    let dim = h.matrix.nrows();
    let eig = SymmetricEigen::new(h.matrix.clone());
    let lam_max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let eps = CLAMP_REL * lam_max.abs().max(f64::MIN_POSITIVE);

    let mut modes: Vec<(f64, Vec<f64>)> = (0..dim)
        .map(|k| {
            let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().cloned().collect();
            if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
                if *first < 0.0 {
                    v.iter_mut().for_each(|x| *x = -*x);
                }
            }
            (eig.eigenvalues[k], v)
        })
        .collect();
    modes.sort_by(|a, b| a.0.total_cmp(&b.0));
    // lexicographic order inside each near-degenerate run
    let tie = 1e-12 * lam_max.abs().max(f64::MIN_POSITIVE);
    let mut start = 0;
    while start < modes.len() {
        let mut end = start + 1;
        while end < modes.len() && modes[end].0 - modes[end - 1].0 <= tie {
            end += 1;
        }
        let values: Vec<f64> = modes[start..end].iter().map(|m| m.0).collect();
        modes[start..end].sort_by(|a, b| {
            a.1.iter()
                .zip(&b.1)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        for (m, v) in modes[start..end].iter_mut().zip(values) {
            m.0 = v;
        }
        start = end;
    }

    let mut clamped = 0;
    let mut frequencies = Vec::with_capacity(dim);
    let mut s = DMatrix::<f64>::zeros(dim, dim);
    for (k, (lam, v)) in modes.iter().enumerate() {
        let lam = if *lam < 0.0 {
            if *lam < -eps {
                return Err(Error::UnstableLattice { eigenvalue: *lam, tolerance: eps });
            }
            clamped += 1;
            0.0
        } else {
            *lam
        };
        frequencies.push((lam / ion_mass).sqrt());
        for (r, x) in v.iter().enumerate() {
            s[(r, k)] = *x;
        }
    }

    let spectrum = VibrationalSpectrum {
        nu_max: frequencies.iter().cloned().fold(0.0, f64::max),
        frequencies,
        mode_matrix: s,
        clamped,
    };
    let ortho = spectrum.orthogonality_deviation();
    if ortho > ORTHO_TOL {
        return Err(Error::Numerical(format!("lattice: mode matrix not orthogonal ({ortho:.3e})")));
    }
    let norm = lam_max.abs().max(f64::MIN_POSITIVE);
    for k in 0..dim {
        let col = spectrum.mode_matrix.column(k);
        let lam = ion_mass * spectrum.frequencies[k].powi(2);
        let res = (&h.matrix * col - col * lam).amax() / norm;
        if res > RESIDUAL_TOL {
            return Err(Error::Numerical(format!(
                "lattice: eigen-residual {res:.3e} for mode {k}"
            )));
        }
    }
    Ok(spectrum)
}

/// Lamb-Dicke parameter |k| sqrt(hbar / (2 m nu)).
pub fn lamb_dicke(wavevector: f64, ion_mass: f64, nu: f64) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(Error::ZeroFrequencyMode);
    }
    Ok(wavevector.abs() * (HBAR / (2.0 * ion_mass * nu)).sqrt())
}

/// Trap frequency for which the solved spectrum has `nu_max == target`.
///
/// The isotropic trap adds `m nu_t^2` to every eigenvalue, so `nu_max^2 - nu_t^2`
/// is fixed by the Coulomb part alone. The result is verified by a full solve.
pub fn calibrate_trap_freq(spec: &LatticeSpec, target_nu_max: f64) -> Result<f64> {
    spec.validate()?;
    if !(target_nu_max.is_finite() && target_nu_max > 0.0) {
        return Err(Error::Calibration(format!("target nu_max must be positive, got {target_nu_max}")));
    }
    let positions = spec.site_positions();
    let c = coulomb_hessian(&positions, spec.ion_charge, spec.neighbor_cutoff)?;
    let eig = SymmetricEigen::new(c).eigenvalues;
    let c_max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let c_min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let nu_t2 = target_nu_max * target_nu_max - c_max / spec.ion_mass;
    if nu_t2 <= 0.0 {
        return Err(Error::Calibration(format!(
            "Coulomb stiffness alone gives nu_max {:.3e} > target {:.3e}",
            (c_max / spec.ion_mass).sqrt(),
            target_nu_max
        )));
    }
    if spec.ion_mass * nu_t2 + c_min < -CLAMP_REL * spec.ion_mass * target_nu_max.powi(2) {
        return Err(Error::Calibration(format!(
            "no stable trap reaches nu_max {target_nu_max:.3e}; softest Coulomb mode needs a stronger trap"
        )));
    }
    let trap = nu_t2.sqrt();
    let check = LatticeSpec { trap_freq: Some(trap), ..spec.clone() };
    let got = solve_modes(&build_hessian(&check)?, spec.ion_mass)?.nu_max;
    if (got / target_nu_max - 1.0).abs() > 1e-3 {
        return Err(Error::Calibration(format!(
            "calibrated nu_max {got:.6e} misses target {target_nu_max:.6e}"
        )));
    }
    Ok(trap)
}

/// Copy of `spec` with the trap frequency filled in from `target_nu_max` if absent.
pub fn resolve_trap(spec: &LatticeSpec, target_nu_max: f64) -> Result<LatticeSpec> {
    let mut out = spec.clone();
    if out.trap_freq.is_none() {
        out.trap_freq = Some(calibrate_trap_freq(spec, target_nu_max)?);
    }
    Ok(out)
}

/// Solve the modes of `spec`, calibrating the trap against `target_nu_max` if needed.
pub fn spectrum_for(spec: &LatticeSpec, target_nu_max: f64) -> Result<(LatticeSpec, VibrationalSpectrum)> {
    let spec = resolve_trap(spec, target_nu_max)?;
    let h = build_hessian(&spec)?;
    let s = solve_modes(&h, spec.ion_mass)?;
    Ok((spec, s))
}
