//! Canonical scenario generators.
//!
//! Each builtin produces an `(Analyser, state)` pair with an exact
//! construction, so they double as test fixtures:
//!
//! * `Q2`: qubit measured in the z basis at time 0 and in the 45°-rotated
//!   basis at time 1; the two partitions share no common eigenvector, so
//!   the commutation subspace is `{0}`.
//! * `D4`: two commuting two-cell diagonal partitions of `C^4`; every
//!   joint cell is a coordinate line and all four histories carry mass 1/4.
//! * `TRI9`: nested position cells on nine coordinates: the level-1 cell
//!   covers the first three coordinates, the level-2 cell the first one, so
//!   under the uniform state `P(X_1 = 1) = 1/3` and `P(X_2 = 1) = 1/9`.
//! * `STATIC(steps, p)`: one fixed qubit partition repeated at `steps`
//!   times under the zero Hamiltonian; path measure concentrates on the two
//!   constant paths with weights `p` and `1-p`.
//! * `PGRID(sites)`: periodic ring with the discrete Laplacian, two
//!   half-ring position cells, and a localized wave packet.

use std::collections::BTreeMap;

use super::{heisenberg_analyser, Analyser, Partition, Time};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, C64};

/// Built-in scenario selector with validated parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Builtin {
    Q2,
    D4,
    Tri9,
    Static { steps: usize, p: f64 },
    PGrid { sites: usize },
}

/// Name and one-line description of a builtin, for listings.
#[derive(Debug, Clone)]
pub struct ScenarioInfo {
    pub name: &'static str,
    pub summary: &'static str,
}

impl Builtin {
    /// Parses a scenario name plus numeric parameters.
    ///
    /// `STATIC` reads `steps` (default 5) and `p` (default 0.7); `PGRID`
    /// reads `sites` (default 16, even, ≥ 4). Other builtins take no
    /// parameters.
    pub fn parse(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        match name.to_ascii_uppercase().as_str() {
            "Q2" => Ok(Self::Q2),
            "D4" => Ok(Self::D4),
            "TRI9" => Ok(Self::Tri9),
            "STATIC" => {
                let steps = params.get("steps").copied().unwrap_or(5.0);
                let p = params.get("p").copied().unwrap_or(0.7);
                if steps < 1.0 || steps.fract() != 0.0 || steps > 64.0 {
                    return Err(Error::InvalidScenarioParams(format!(
                        "STATIC steps must be an integer in 1..=64, got {steps}"
                    )));
                }
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidScenarioParams(format!(
                        "STATIC p must lie in [0, 1], got {p}"
                    )));
                }
                Ok(Self::Static {
                    steps: steps as usize,
                    p,
                })
            }
            "PGRID" => {
                let sites = params.get("sites").copied().unwrap_or(16.0);
                if sites < 4.0
                    || sites.fract() != 0.0
                    || !(sites as usize).is_multiple_of(2)
                    || sites > 256.0
                {
                    return Err(Error::InvalidScenarioParams(format!(
                        "PGRID sites must be an even integer in 4..=256, got {sites}"
                    )));
                }
                Ok(Self::PGrid {
                    sites: sites as usize,
                })
            }
            other => Err(Error::UnknownScenario(other.to_string())),
        }
    }

    /// Builds the analyser and its canonical state vector.
    pub fn build(&self) -> Result<(Analyser, CVector)> {
        match self {
            Self::Q2 => build_q2(),
            Self::D4 => build_d4(),
            Self::Tri9 => build_tri9(),
            Self::Static { steps, p } => build_static(*steps, *p),
            Self::PGrid { sites } => build_pgrid(*sites),
        }
    }

    /// Stable listing of all builtins.
    pub fn catalog() -> Vec<ScenarioInfo> {
        vec![
            ScenarioInfo {
                name: "Q2",
                summary: "qubit, z basis at time 0 then 45-degree rotated basis at time 1; \
                          fully non-commuting, commutation subspace {0}, defect 0.5",
            },
            ScenarioInfo {
                name: "D4",
                summary: "C^4 with two commuting diagonal 2-cell partitions; four joint \
                          histories of probability 1/4 each",
            },
            ScenarioInfo {
                name: "TRI9",
                summary: "nine coordinates with nested cells (first three, then first one); \
                          uniform state gives marginals 1/3 and 1/9",
            },
            ScenarioInfo {
                name: "STATIC",
                summary: "one qubit partition frozen at `steps` times (zero Hamiltonian); \
                          paths are constant with weights p and 1-p",
            },
            ScenarioInfo {
                name: "PGRID",
                summary: "periodic ring of `sites` sites under the discrete Laplacian, two \
                          half-ring position cells, localized wave packet",
            },
        ]
    }
}

/// Builds a named builtin scenario.
pub fn scenario(name: &str, params: &BTreeMap<String, f64>) -> Result<(Analyser, CVector)> {
    Builtin::parse(name, params)?.build()
}

fn basis_vector(dim: usize, i: usize) -> CVector {
    let mut v = CVector::zeros(dim);
    v[i] = C64::new(1.0, 0.0);
    v
}

fn index_partition(dim: usize, groups: &[(&str, Vec<usize>)]) -> Result<Partition> {
    let cells: Vec<(String, Vec<usize>)> = groups
        .iter()
        .map(|(l, idx)| (l.to_string(), idx.clone()))
        .collect();
    Partition::from_index_cells(dim, &cells)
}

fn build_q2() -> Result<(Analyser, CVector)> {
    let base = index_partition(2, &[("+", vec![0]), ("-", vec![1])])?;
    // H = (pi/4) sigma_y turns U_1 into the rotation by 45 degrees
    let w = std::f64::consts::FRAC_PI_4;
    let mut h = CMatrix::zeros(2, 2);
    h[(0, 1)] = C64::new(0.0, -w);
    h[(1, 0)] = C64::new(0.0, w);
    let an = heisenberg_analyser(&base, &h, &[0.0, 1.0])?;
    Ok((an, basis_vector(2, 0)))
}

fn build_d4() -> Result<(Analyser, CVector)> {
    let s = index_partition(4, &[("1", vec![0, 1]), ("2", vec![2, 3])])?;
    let t = index_partition(4, &[("1", vec![0, 2]), ("2", vec![1, 3])])?;
    let an = Analyser::new(vec![(Time::new(0.0), s), (Time::new(1.0), t)])?;
    let phi = CVector::from_element(4, C64::new(0.5, 0.0));
    Ok((an, phi))
}

fn build_tri9() -> Result<(Analyser, CVector)> {
    let p1 = index_partition(9, &[("1", vec![0, 1, 2]), ("2", (3..9).collect())])?;
    let p2 = index_partition(9, &[("1", vec![0]), ("2", (1..9).collect())])?;
    let an = Analyser::new(vec![(Time::new(1.0), p1), (Time::new(2.0), p2)])?;
    let phi = CVector::from_element(9, C64::new(1.0 / 3.0, 0.0));
    Ok((an, phi))
}

fn build_static(steps: usize, p: f64) -> Result<(Analyser, CVector)> {
    let base = index_partition(2, &[("1", vec![0]), ("2", vec![1])])?;
    let h = CMatrix::zeros(2, 2);
    let times: Vec<f64> = (0..steps).map(|k| k as f64).collect();
    let an = heisenberg_analyser(&base, &h, &times)?;
    let phi = CVector::from_vec(vec![
        C64::new(p.sqrt(), 0.0),
        C64::new((1.0 - p).sqrt(), 0.0),
    ]);
    Ok((an, phi))
}

/// Periodic discrete Laplacian on a ring: 2 on the diagonal, -1 between
/// neighbouring sites.
pub(crate) fn ring_laplacian(sites: usize) -> CMatrix {
    let mut h = CMatrix::zeros(sites, sites);
    for i in 0..sites {
        h[(i, i)] = C64::new(2.0, 0.0);
        let next = (i + 1) % sites;
        h[(i, next)] = C64::new(-1.0, 0.0);
        h[(next, i)] = C64::new(-1.0, 0.0);
    }
    h
}

fn build_pgrid(sites: usize) -> Result<(Analyser, CVector)> {
    let half = sites / 2;
    let base = index_partition(
        sites,
        &[("L", (0..half).collect()), ("R", (half..sites).collect())],
    )?;
    let h = ring_laplacian(sites);
    let an = heisenberg_analyser(&base, &h, &[0.0, 1.0])?;
    // Gaussian packet centred in the middle of the left half-ring
    let center = sites as f64 / 4.0;
    let width = sites as f64 / 8.0;
    let mut phi = CVector::from_fn(sites, |i, _| {
        let x = i as f64 - center;
        C64::new((-x * x / (2.0 * width * width)).exp(), 0.0)
    });
    let norm = phi.norm();
    phi /= C64::new(norm, 0.0);
    Ok((an, phi))
}
