//! System operators and the moment keys they generate.
//!
//! A [`Channel`] is a qubit transition `(|x><y|)_site` optionally multiplied by
//! a cavity operator. Relaxation elements pair two channels, and the rate needs
//! `<S_a S_b^dag>` and `<S_a>`; both are expressed as [`MomentKey`]s so that the
//! state engine can answer them without a state vector.
//!
//! Moment labels have the form `q0:12*q3:20*bdb`: factor `qI:XY` is
//! `(|X><Y|)` on qubit I, `k:XY` the same on a representative idle qubit, and
//! the optional cavity factor is one of `b`, `bd`, `bdb`, `bbd`. `1` is the identity.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

/// Where a qubit operator acts. `Idle` stands for any one of the qubits that
/// are not being gated; entries on it are counted with a multiplicity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Site {
    Qubit(usize),
    Idle,
}

/// `(|ket><bra|)` on one site, levels 0, 1 (lower) and 2 (upper).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Unit {
    pub site: Site,
    pub ket: u8,
    pub bra: u8,
}

impl Unit {
    pub fn new(site: Site, ket: u8, bra: u8) -> Self {
        debug_assert!(ket < 3 && bra < 3);
        Self { site, ket, bra }
    }

    pub fn adjoint(self) -> Self {
        Self { site: self.site, ket: self.bra, bra: self.ket }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CavityOp {
    Id,
    B,
    BDag,
    BDagB,
    BBDag,
}

impl CavityOp {
    pub fn adjoint(self) -> Self {
        match self {
            CavityOp::B => CavityOp::BDag,
            CavityOp::BDag => CavityOp::B,
            other => other,
        }
    }

    /// Product `self * other`, if it is one of the supported forms.
    pub fn times(self, other: CavityOp) -> Option<CavityOp> {
        use CavityOp::*;
        match (self, other) {
            (Id, x) | (x, Id) => Some(x),
            (B, BDag) => Some(BBDag),
            (BDag, B) => Some(BDagB),
            _ => None,
        }
    }

    fn label(self) -> Option<&'static str> {
        match self {
            CavityOp::Id => None,
            CavityOp::B => Some("b"),
            CavityOp::BDag => Some("bd"),
            CavityOp::BDagB => Some("bdb"),
            CavityOp::BBDag => Some("bbd"),
        }
    }

    /// Matrix on a Fock space truncated at `dim` levels.
    pub fn dense(self, dim: usize) -> DMatrix<C64> {
        let mut b = DMatrix::<C64>::zeros(dim, dim);
        for n in 1..dim {
            b[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
        }
        let bd = b.adjoint();
        match self {
            CavityOp::Id => DMatrix::identity(dim, dim),
            CavityOp::B => b,
            CavityOp::BDag => bd,
            CavityOp::BDagB => &bd * &b,
            CavityOp::BBDag => &b * &bd,
        }
    }
}

/// System operator `S = unit (x) cavity`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Channel {
    pub unit: Option<Unit>,
    pub cavity: CavityOp,
}

impl Channel {
    /// sigma_-^{a} = |a><2|.
    pub fn lower(site: Site, a: u8) -> Self {
        Self { unit: Some(Unit::new(site, a, 2)), cavity: CavityOp::Id }
    }

    /// sigma_+^{a} = |2><a|.
    pub fn raise(site: Site, a: u8) -> Self {
        Self { unit: Some(Unit::new(site, 2, a)), cavity: CavityOp::Id }
    }

    pub fn cavity(op: CavityOp) -> Self {
        Self { unit: None, cavity: op }
    }

    pub fn with_cavity(mut self, op: CavityOp) -> Self {
        self.cavity = op;
        self
    }

    pub fn adjoint(self) -> Self {
        Self { unit: self.unit.map(Unit::adjoint), cavity: self.cavity.adjoint() }
    }

    pub fn site(&self) -> Option<Site> {
        self.unit.map(|u| u.site)
    }

    /// Key of `<S>`.
    pub fn key(&self) -> MomentKey {
        MomentKey::new(self.unit.into_iter().collect(), self.cavity)
    }

    pub fn dense(&self, layout: &DenseLayout) -> Result<DMatrix<C64>> {
        self.key().dense(layout)
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.key())
    }
}

/// Product of single-site units and one cavity factor, in canonical order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MomentKey {
    pub units: Vec<Unit>,
    pub cavity: CavityOp,
}

impl MomentKey {
    pub fn new(mut units: Vec<Unit>, cavity: CavityOp) -> Self {
        units.sort();
        Self { units, cavity }
    }

    pub fn identity() -> Self {
        Self { units: Vec::new(), cavity: CavityOp::Id }
    }

    pub fn adjoint(&self) -> Self {
        Self::new(self.units.iter().map(|u| u.adjoint()).collect(), self.cavity.adjoint())
    }

    pub fn parse(label: &str) -> Result<Self> {
        let label = label.trim();
        if label == "1" {
            return Ok(Self::identity());
        }
        let mut units = Vec::new();
        let mut cavity = CavityOp::Id;
        for factor in label.split('*') {
            let factor = factor.trim();
            let cav = match factor {
                "b" => Some(CavityOp::B),
                "bd" => Some(CavityOp::BDag),
                "bdb" => Some(CavityOp::BDagB),
                "bbd" => Some(CavityOp::BBDag),
                _ => None,
            };
            if let Some(c) = cav {
                if cavity != CavityOp::Id {
                    return Err(bad_label(label, "more than one cavity factor"));
                }
                cavity = c;
                continue;
            }
            let (site, levels) = factor
                .split_once(':')
                .ok_or_else(|| bad_label(label, "factor needs 'site:XY'"))?;
            let site = if site == "k" {
                Site::Idle
            } else if let Some(idx) = site.strip_prefix('q') {
                Site::Qubit(idx.parse().map_err(|_| bad_label(label, "bad qubit index"))?)
            } else {
                return Err(bad_label(label, "site must be qN or k"));
            };
            let lv: Vec<u8> = levels
                .chars()
                .map(|c| c.to_digit(10).filter(|d| *d < 3).map(|d| d as u8))
                .collect::<Option<_>>()
                .ok_or_else(|| bad_label(label, "levels must be 0, 1 or 2"))?;
            if lv.len() != 2 {
                return Err(bad_label(label, "levels must be two digits"));
            }
            if units.iter().any(|u: &Unit| u.site == site) {
                return Err(bad_label(label, "site repeated"));
            }
            units.push(Unit::new(site, lv[0], lv[1]));
        }
        Ok(Self::new(units, cavity))
    }

    /// Dense operator on the layout; idle sites have no dense representation.
    pub fn dense(&self, layout: &DenseLayout) -> Result<DMatrix<C64>> {
        let mut factors: Vec<DMatrix<C64>> = (0..layout.n_qubits)
            .map(|_| DMatrix::identity(3, 3))
            .collect();
        for u in &self.units {
            let i = match u.site {
                Site::Qubit(i) if i < layout.n_qubits => i,
                other => {
                    return Err(Error::Oracle(format!(
                        "site {other:?} outside a dense layout of {} qubits",
                        layout.n_qubits
                    )))
                }
            };
            let mut m = DMatrix::zeros(3, 3);
            m[(u.ket as usize, u.bra as usize)] = C64::new(1.0, 0.0);
            factors[i] = m;
        }
        if layout.cavity_dim > 0 {
            factors.push(self.cavity.dense(layout.cavity_dim));
        } else if self.cavity != CavityOp::Id {
            return Err(Error::Oracle("cavity operator on a layout without a cavity".into()));
        }
        if factors.is_empty() {
            return Ok(DMatrix::identity(1, 1));
        }
        Ok(factors
            .iter()
            .skip(1)
            .fold(factors[0].clone(), |acc, f| acc.kronecker(f)))
    }
}

fn bad_label(label: &str, why: &str) -> Error {
    Error::InvalidMoments(format!("bad moment label '{label}': {why}"))
}

impl fmt::Display for MomentKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self
            .units
            .iter()
            .map(|u| match u.site {
                Site::Qubit(i) => format!("q{i}:{}{}", u.ket, u.bra),
                Site::Idle => format!("k:{}{}", u.ket, u.bra),
            })
            .collect();
        if let Some(c) = self.cavity.label() {
            parts.push(c.to_string());
        }
        if parts.is_empty() {
            write!(f, "1")
        } else {
            write!(f, "{}", parts.join("*"))
        }
    }
}

/// Key for `<S_a S_b^dag>`, or `None` when the product vanishes identically.
pub fn pair_key(a: &Channel, b: &Channel) -> Result<Option<MomentKey>> {
    let bd = b.adjoint();
    let cavity = a.cavity.times(bd.cavity).ok_or_else(|| {
        Error::MissingMoment(format!("unsupported cavity product in <({a})({b})^dag>"))
    })?;
    let units = match (a.unit, bd.unit) {
        (None, None) => vec![],
        (Some(u), None) | (None, Some(u)) => vec![u],
        (Some(u), Some(v)) if u.site == v.site => {
            if u.bra != v.ket {
                return Ok(None);
            }
            vec![Unit::new(u.site, u.ket, v.bra)]
        }
        (Some(u), Some(v)) => vec![u, v],
    };
    Ok(Some(MomentKey::new(units, cavity)))
}

/// Tensor layout of a small register: `n_qubits` three-level sites (qubit 0
/// most significant) followed by a cavity truncated at `cavity_dim` levels
/// (0 for no cavity).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DenseLayout {
    pub n_qubits: usize,
    pub cavity_dim: usize,
}

impl DenseLayout {
    pub fn dim(&self) -> usize {
        3usize.pow(self.n_qubits as u32) * self.cavity_dim.max(1)
    }
}
