//! Low-order moments of structured register states.
//!
//! Every rate formula consumes only single-site and two-site moments plus a
//! few cavity expectation values, so a register of N qubits is stored as one
//! background site matrix, a handful of per-site overrides and an optional
//! table of explicit values. Nothing here scales with 3^N.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::{CavityOp, MomentKey, Site, Unit};
use crate::quad;
use crate::C64;

/// `m[x][y] = <(|x><y|)>` on one site.
pub type SiteMatrix = [[C64; 3]; 3];

const TOL: f64 = 1e-12;

/// Anything that can evaluate a moment key.
pub trait MomentSource {
    fn moment(&self, key: &MomentKey) -> Option<C64>;

    fn moment_or_err(&self, key: &MomentKey) -> Result<C64> {
        self.moment(key).ok_or_else(|| Error::MissingMoment(key.to_string()))
    }
}

/// How states on different sites are correlated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correlation {
    /// Uncorrelated product over sites.
    Product,
    /// (|00..0> + |11..1>)/sqrt 2 over all `n_qubits` sites.
    Ghz,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateMoments {
    pub n_qubits: usize,
    /// Site matrix shared by every qubit without an override, and by `Site::Idle`.
    pub background: SiteMatrix,
    pub sites: BTreeMap<usize, SiteMatrix>,
    pub correlation: Correlation,
    /// <b>.
    pub cavity_b: C64,
    /// <b^dag b>.
    pub cavity_n: f64,
    /// Values that take precedence over everything derived above.
    pub explicit: BTreeMap<MomentKey, C64>,
}

fn zero_site() -> SiteMatrix {
    [[C64::new(0.0, 0.0); 3]; 3]
}

/// Site matrix of the pure state with amplitudes `c`.
pub fn pure_site(c: [C64; 3]) -> SiteMatrix {
    let mut m = zero_site();
    for x in 0..3 {
        for y in 0..3 {
            m[x][y] = c[x].conj() * c[y];
        }
    }
    m
}

/// Site matrix of qubit level `a`.
pub fn level_site(a: usize) -> SiteMatrix {
    let mut c = [C64::new(0.0, 0.0); 3];
    c[a] = C64::new(1.0, 0.0);
    pure_site(c)
}

fn hadamard_site() -> SiteMatrix {
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    pure_site([h, h, C64::new(0.0, 0.0)])
}

impl StateMoments {
    /// Product state with every qubit in `site`, cavity in vacuum.
    pub fn uniform(n_qubits: usize, site: SiteMatrix) -> Self {
        Self {
            n_qubits,
            background: site,
            sites: BTreeMap::new(),
            correlation: Correlation::Product,
            cavity_b: C64::new(0.0, 0.0),
            cavity_n: 0.0,
            explicit: BTreeMap::new(),
        }
    }

    pub fn with_site(mut self, index: usize, site: SiteMatrix) -> Self {
        self.sites.insert(index, site);
        self
    }

    pub fn with_cavity(mut self, b: C64, n: f64) -> Self {
        self.cavity_b = b;
        self.cavity_n = n;
        self
    }

    pub fn with_qubits(mut self, n: usize) -> Self {
        self.n_qubits = n;
        self
    }

    pub fn set(&mut self, key: MomentKey, value: C64) {
        self.explicit.insert(key, value);
    }

    pub fn site_matrix(&self, site: Site) -> Option<&SiteMatrix> {
        match site {
            Site::Idle => Some(&self.background),
            Site::Qubit(i) if i < self.n_qubits => Some(self.sites.get(&i).unwrap_or(&self.background)),
            Site::Qubit(_) => None,
        }
    }

    /// Sum over all qubits of `<(|x><y|)_i>`.
    pub fn site_sum(&self, x: usize, y: usize) -> C64 {
        let plain = (self.n_qubits - self.sites.keys().filter(|i| **i < self.n_qubits).count()) as f64;
        let mut total = self.background[x][y] * plain;
        for (i, m) in &self.sites {
            if *i < self.n_qubits {
                total += m[x][y];
            }
        }
        total
    }

    fn cavity_moment(&self, op: CavityOp) -> C64 {
        match op {
            CavityOp::Id => C64::new(1.0, 0.0),
            CavityOp::B => self.cavity_b,
            CavityOp::BDag => self.cavity_b.conj(),
            CavityOp::BDagB => C64::new(self.cavity_n, 0.0),
            CavityOp::BBDag => C64::new(self.cavity_n + 1.0, 0.0),
        }
    }

    fn qubit_moment(&self, units: &[Unit]) -> Option<C64> {
        for u in units {
            self.site_matrix(u.site)?;
        }
        match (units, self.correlation) {
            ([], _) => Some(C64::new(1.0, 0.0)),
            ([u], Correlation::Product) => Some(self.site_matrix(u.site)?[u.ket as usize][u.bra as usize]),
            (_, Correlation::Product) => Some(
                units
                    .iter()
                    .map(|u| self.site_matrix(u.site).unwrap()[u.ket as usize][u.bra as usize])
                    .product(),
            ),
            (_, Correlation::Ghz) => {
                let x = units[0].ket;
                let y = units[0].bra;
                let uniform = units.iter().all(|u| u.ket == x && u.bra == y);
                let lower = x < 2 && y < 2;
                // coherences survive only when every qubit of the register is probed
                let full = units.len() == self.n_qubits;
                let v = if uniform && lower && (x == y || full) { 0.5 } else { 0.0 };
                Some(C64::new(v, 0.0))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits < 1 {
            return Err(Error::InvalidMoments("n_qubits must be >= 1".into()));
        }
        let check = |name: String, m: &SiteMatrix| -> Result<()> {
            let mut trace = 0.0;
            for x in 0..3 {
                let p = m[x][x];
                if p.im.abs() > TOL || p.re < -TOL || p.re > 1.0 + TOL {
                    return Err(Error::InvalidMoments(format!(
                        "{name}: population <|{x}><{x}|> = {p} outside [0, 1]"
                    )));
                }
                trace += p.re;
                for y in 0..3 {
                    if (m[x][y] - m[y][x].conj()).norm() > TOL {
                        return Err(Error::InvalidMoments(format!(
                            "{name}: <|{x}><{y}|> and <|{y}><{x}|> are not conjugate"
                        )));
                    }
                }
            }
            if (trace - 1.0).abs() > TOL {
                return Err(Error::InvalidMoments(format!("{name}: populations sum to {trace}")));
            }
            Ok(())
        };
        check("background".into(), &self.background)?;
        for (i, m) in &self.sites {
            check(format!("qubit {i}"), m)?;
        }
        if !(self.cavity_n.is_finite() && self.cavity_n >= 0.0) {
            return Err(Error::InvalidMoments(format!("<b^dag b> = {} is negative", self.cavity_n)));
        }
        for (k, v) in &self.explicit {
            let adj = k.adjoint();
            if adj == *k && v.im.abs() > TOL * v.norm().max(1.0) {
                return Err(Error::InvalidMoments(format!("{k} is Hermitian but has value {v}")));
            }
            if let Some(w) = self.explicit.get(&adj) {
                if (v - w.conj()).norm() > TOL * v.norm().max(1.0) {
                    return Err(Error::InvalidMoments(format!("{k} and {adj} are not conjugate")));
                }
            }
            let population = k.units.len() == 1 && k.units[0].ket == k.units[0].bra && k.cavity == CavityOp::Id;
            if population && !(-TOL..=1.0 + TOL).contains(&v.re) {
                return Err(Error::InvalidMoments(format!("population {k} = {} outside [0, 1]", v.re)));
            }
        }
        Ok(())
    }
}

impl MomentSource for StateMoments {
    fn moment(&self, key: &MomentKey) -> Option<C64> {
        if let Some(v) = self.explicit.get(key) {
            return Some(*v);
        }
        if let Some(v) = self.explicit.get(&key.adjoint()) {
            return Some(v.conj());
        }
        Some(self.qubit_moment(&key.units)? * self.cavity_moment(key.cavity))
    }
}

/// Every qubit in (|0> + |1>)/sqrt 2, cavity in vacuum.
pub fn hadamard_moments(n: usize) -> Result<StateMoments> {
    if n < 1 {
        return Err(Error::InvalidMoments("Hadamard state needs n >= 1".into()));
    }
    Ok(StateMoments::uniform(n, hadamard_site()))
}

/// (|00..0> + |11..1>)/sqrt 2, cavity in vacuum.
pub fn ghz_moments(n: usize) -> Result<StateMoments> {
    if n < 2 {
        return Err(Error::InvalidMoments("GHZ state needs n >= 2".into()));
    }
    let mut site = zero_site();
    site[0][0] = C64::new(0.5, 0.0);
    site[1][1] = C64::new(0.5, 0.0);
    Ok(StateMoments { correlation: Correlation::Ghz, ..StateMoments::uniform(n, site) })
}

/// Amplitudes of a qubit driven by a far-detuned two-photon Raman pair,
/// starting in |0>: cos t |0> + i sin t e^{i dphi} |1> - (omega/detuning) e^{i t} |2>,
/// normalised to unit length.
pub fn gated_amplitudes(theta: f64, dphi: f64, omega: f64, detuning: f64) -> [C64; 3] {
    let r = omega / detuning;
    let c0 = C64::new(theta.cos(), 0.0);
    let c1 = C64::new(0.0, theta.sin()) * C64::from_polar(1.0, dphi);
    let c2 = -C64::from_polar(r, theta);
    let norm = (1.0 + r * r).sqrt();
    [c0 / norm, c1 / norm, c2 / norm]
}

/// Single gated qubit (index 0) in the Raman-driven state at rotation angle `theta`.
pub fn one_qubit_gated_moments(theta: f64, dphi: f64, omega: f64, detuning: f64) -> Result<StateMoments> {
    if !(theta.is_finite() && dphi.is_finite() && omega.is_finite() && detuning.is_finite()) || detuning == 0.0 {
        return Err(Error::InvalidMoments("gated state needs finite theta, dphi, omega and nonzero detuning".into()));
    }
    if (omega / detuning).abs() > 0.2 {
        log::warn!("omega/detuning = {:.3} is not small; adiabatic moments are inaccurate", omega / detuning);
    }
    let site = pure_site(gated_amplitudes(theta, dphi, omega, detuning));
    Ok(StateMoments::uniform(1, site))
}

/// Gated qubit `gated` in an `n`-qubit register whose other qubits hold `background`.
pub fn embed_gated(
    gated: &StateMoments,
    n: usize,
    index: usize,
    background: SiteMatrix,
) -> Result<StateMoments> {
    if index >= n {
        return Err(Error::InvalidMoments(format!("gated qubit {index} outside register of {n}")));
    }
    Ok(StateMoments::uniform(n, background)
        .with_site(index, gated.background)
        .with_cavity(gated.cavity_b, gated.cavity_n))
}

pub fn hadamard_background() -> SiteMatrix {
    hadamard_site()
}

/// Envelope of the classical gating field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum PulseShape {
    /// Constant amplitude switched on at t = 0.
    Square { amplitude: f64 },
    /// amplitude * sin^2(pi t / duration) on [0, duration].
    SinSquared { amplitude: f64, duration: f64 },
}

/// Rotation angle theta(t) = int_{-inf}^t Omega(t')^2 / detuning dt'.
pub fn theta_of_t(pulse: PulseShape, detuning: f64, t: f64) -> Result<f64> {
    if !(detuning.is_finite() && detuning != 0.0) {
        return Err(Error::Pulse(format!("detuning {detuning}")));
    }
    match pulse {
        PulseShape::Square { amplitude } => {
            if !amplitude.is_finite() {
                return Err(Error::Pulse(format!("amplitude {amplitude}")));
            }
            Ok(amplitude * amplitude * t.max(0.0) / detuning)
        }
        PulseShape::SinSquared { amplitude, duration } => {
            if !(amplitude.is_finite() && duration.is_finite() && duration > 0.0) {
                return Err(Error::Pulse(format!("amplitude {amplitude}, duration {duration}")));
            }
            if amplitude == 0.0 || t <= 0.0 {
                return Ok(0.0);
            }
            let end = t.min(duration);
            let w = std::f64::consts::PI / duration;
            let f = |s: f64| (w * s).sin().powi(4);
            let integral = quad::integrate(f, 0.0, end, 1e-10)?;
            Ok(amplitude * amplitude * integral / detuning)
        }
    }
}

/// State description for the two gated qubits of a cavity-mediated gate.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TwoQubitInput {
    pub n_qubits: usize,
    pub control: usize,
    pub target: usize,
    /// Explicit moment assignments; anything listed overrides the defaults.
    pub entries: Vec<(MomentKey, C64)>,
    pub cavity_n: Option<f64>,
    pub cavity_b: Option<C64>,
}

/// Register state for two-qubit gating. Unset gated-qubit factors default to
/// 1 (control in |1>, target in |0>, unit cross moment), the cavity to vacuum
/// and idle qubits to the Hadamard state.
pub fn two_qubit_moment_table(input: &TwoQubitInput) -> Result<StateMoments> {
    let TwoQubitInput { n_qubits, control, target, .. } = *input;
    if n_qubits < 2 || control >= n_qubits || target >= n_qubits || control == target {
        return Err(Error::InvalidMoments(format!(
            "control {control} and target {target} must be distinct qubits of {n_qubits}"
        )));
    }
    let mut m = StateMoments::uniform(n_qubits, hadamard_site())
        .with_site(control, level_site(1))
        .with_site(target, level_site(0))
        .with_cavity(input.cavity_b.unwrap_or_default(), input.cavity_n.unwrap_or(0.0));
    let cross = MomentKey::new(
        vec![Unit::new(Site::Qubit(control), 1, 2), Unit::new(Site::Qubit(target), 2, 0)],
        CavityOp::Id,
    );
    m.set(cross, C64::new(1.0, 0.0));
    for (i, (k, v)) in input.entries.iter().enumerate() {
        for (k2, v2) in &input.entries[..i] {
            if *k2 == k.adjoint() && (v - v2.conj()).norm() > TOL * v.norm().max(1.0) {
                return Err(Error::InvalidMoments(format!("{k} and {k2} are not conjugate")));
            }
        }
        m.explicit.remove(&k.adjoint());
        m.set(k.clone(), *v);
    }
    m.validate()?;
    Ok(m)
}

#[derive(Debug, Serialize, Deserialize)]
struct MomentRow {
    label: String,
    re: f64,
    im: f64,
}

/// Read `label,re,im` rows.
pub fn read_moment_table(path: impl AsRef<Path>) -> Result<Vec<(MomentKey, C64)>> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::InvalidMoments(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for row in rdr.deserialize::<MomentRow>() {
        let row = row.map_err(|e| Error::InvalidMoments(format!("{}: {e}", path.display())))?;
        out.push((MomentKey::parse(&row.label)?, C64::new(row.re, row.im)));
    }
    Ok(out)
}

/// Write `label,re,im` rows in the given order.
pub fn write_moment_table(path: impl AsRef<Path>, rows: &[(MomentKey, C64)]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::InvalidMoments(format!("{}: {e}", path.display())))?;
    for (k, v) in rows {
        w.serialize(MomentRow { label: k.to_string(), re: v.re, im: v.im })
            .map_err(|e| Error::InvalidMoments(e.to_string()))?;
    }
    w.flush().map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn key(l: &str) -> MomentKey {
        MomentKey::parse(l).unwrap()
    }

    #[test]
    fn hadamard_values() {
        let m = hadamard_moments(1).unwrap();
        assert!((m.moment(&key("q0:01")).unwrap() - C64::new(0.5, 0.0)).norm() < 1e-15);
        assert_eq!(m.moment(&key("q0:22")).unwrap(), C64::new(0.0, 0.0));
        let big = hadamard_moments(10_000).unwrap();
        assert!(big.sites.is_empty());
        assert!((big.site_sum(0, 1).re - 5000.0).abs() < 1e-9);
        big.validate().unwrap();
    }

    #[test]
    fn ghz_values() {
        for n in [2, 3] {
            let m = ghz_moments(n).unwrap();
            assert_eq!(m.moment(&key("q0:01")).unwrap(), C64::new(0.0, 0.0));
            assert_eq!(m.moment(&key("q1:11")).unwrap(), C64::new(0.5, 0.0));
        }
        assert!(ghz_moments(1).is_err());
        assert_eq!(ghz_moments(2).unwrap().moment(&key("q0:01*q1:01")).unwrap(), C64::new(0.5, 0.0));
        assert_eq!(ghz_moments(3).unwrap().moment(&key("q0:01*q1:01")).unwrap(), C64::new(0.0, 0.0));
    }

    #[test]
    fn gated_values() {
        let m = one_qubit_gated_moments(0.0, 0.0, 3e6, 3e10).unwrap();
        assert!((m.moment(&key("q0:00")).unwrap().re - 1.0).abs() < 1e-7);
        assert!(m.moment(&key("q0:11")).unwrap().norm() < 1e-15);
        let pi4 = std::f64::consts::FRAC_PI_4;
        let m = one_qubit_gated_moments(pi4, 0.0, 3e6, 3e10).unwrap();
        assert!((m.moment(&key("q0:22")).unwrap().re / 1e-8 - 1.0).abs() < 1e-7);
        let m = one_qubit_gated_moments(pi4, 0.0, 3e8, 3e10).unwrap();
        assert!((m.moment(&key("q0:22")).unwrap().re / 1e-4 - 1.0).abs() < 1e-3);
        m.validate().unwrap();
    }

    #[test]
    fn gated_matches_printed_forms_to_first_order() {
        let (th, dp, om, de) = (0.37, 0.8, 3e8, 3e10);
        let m = one_qubit_gated_moments(th, dp, om, de).unwrap();
        let r = om / de;
        let i = C64::new(0.0, 1.0);
        let e = |x: f64| C64::from_polar(1.0, x);
        let printed = [
            ("q0:01", i * th.sin() * th.cos() * e(dp)),
            ("q0:00", C64::new(th.cos().powi(2), 0.0)),
            ("q0:11", C64::new(th.sin().powi(2), 0.0)),
            ("q0:20", -r * e(-th) * th.cos()),
            ("q0:21", -r * e(-th) * i * th.sin() * e(dp)),
            ("q0:22", C64::new(r * r, 0.0)),
        ];
        for (l, want) in printed {
            let got = m.moment(&key(l)).unwrap();
            // normalisation shifts every moment by the factor 1/(1 + r^2)
            assert!((got - want / (1.0 + r * r)).norm() < 1e-15, "{l}: {got} vs {want}");
        }
    }

    #[test]
    fn pulse_areas() {
        let (om, de) = (3e6, 3e10);
        let t = std::f64::consts::FRAC_PI_2 * de / (om * om);
        let th = theta_of_t(PulseShape::Square { amplitude: om }, de, t).unwrap();
        assert!((th - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert_eq!(theta_of_t(PulseShape::Square { amplitude: 0.0 }, de, t).unwrap(), 0.0);
        let tp = 2e-3;
        let th = theta_of_t(PulseShape::SinSquared { amplitude: om, duration: tp }, de, tp).unwrap();
        let want = 3.0 / 8.0 * om * om * tp / de;
        assert!((th / want - 1.0).abs() < 1e-6);
        assert!(theta_of_t(PulseShape::SinSquared { amplitude: om, duration: -1.0 }, de, tp).is_err());
    }

    #[test]
    fn two_qubit_defaults() {
        let input = TwoQubitInput { n_qubits: 10, control: 0, target: 1, ..Default::default() };
        let m = two_qubit_moment_table(&input).unwrap();
        assert_eq!(m.moment(&key("q0:11")).unwrap().re, 1.0);
        assert_eq!(m.moment(&key("q1:00")).unwrap().re, 1.0);
        assert_eq!(m.moment(&key("q0:12*q1:20")).unwrap().re, 1.0);
        assert_eq!(m.moment(&key("q0:21*q1:02")).unwrap().re, 1.0);
        assert_eq!(m.moment(&key("bdb")).unwrap().re, 0.0);

        let ok = TwoQubitInput { cavity_n: Some(1e-5), ..input.clone() };
        assert_eq!(two_qubit_moment_table(&ok).unwrap().cavity_n, 1e-5);

        let bad = TwoQubitInput { entries: vec![(key("q0:00"), C64::new(1.2, 0.0))], ..input.clone() };
        assert!(two_qubit_moment_table(&bad).is_err());
        let bad = TwoQubitInput {
            entries: vec![(key("q0:01"), C64::new(0.1, 0.2)), (key("q0:10"), C64::new(0.1, 0.2))],
            ..input
        };
        assert!(two_qubit_moment_table(&bad).is_err());
    }

    #[test]
    fn moment_table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let rows = vec![(key("q0:12*q1:20"), C64::new(0.5, -0.25)), (key("bdb"), C64::new(1e-5, 0.0))];
        write_moment_table(&p, &rows).unwrap();
        assert_eq!(read_moment_table(&p).unwrap(), rows);
    }

    proptest! {
        #[test]
        fn gated_purity(theta in -3.2f64..3.2, dphi in -3.2f64..3.2, r in 0.0f64..0.2) {
            let m = one_qubit_gated_moments(theta, dphi, r * 3e10, 3e10).unwrap();
            let s01 = m.moment(&key("q0:01")).unwrap();
            let s00 = m.moment(&key("q0:00")).unwrap().re;
            let s11 = m.moment(&key("q0:11")).unwrap().re;
            prop_assert!((s01.norm_sqr() - s00 * s11).abs() < 1e-14);
        }
    }
}
