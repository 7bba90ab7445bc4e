//! Ulam discretization of piecewise-affine interval maps on dyadic cells.
//!
//! Cell `c` at level `N` is `[c / 2^N, (c + 1) / 2^N)`. The transition
//! probability from cell `i` to cell `j` is the fraction of `i` mapped into
//! `j`. Each branch must map every cell piece onto a union of cells, which
//! makes the compilation exact for Markov maps such as the doubling map.
//! The lattice and fiber increments of an edge are those of the destination
//! cell.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{CoverError, Result};
use crate::model::{Edge, MarkovModel};

const GRID_TOL: f64 = 1e-9;

/// Affine branch sending `domain[0]` to `image[0]` and `domain[1]` to
/// `image[1]`; decreasing when `image[0] > image[1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineBranch {
    pub domain: [f64; 2],
    pub image: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalMap {
    pub name: String,
    pub branches: Vec<AffineBranch>,
}

impl IntervalMap {
    /// `x -> 2x mod 1`.
    pub fn doubling() -> Self {
        IntervalMap {
            name: "doubling".into(),
            branches: vec![
                AffineBranch {
                    domain: [0.0, 0.5],
                    image: [0.0, 1.0],
                },
                AffineBranch {
                    domain: [0.5, 1.0],
                    image: [0.0, 1.0],
                },
            ],
        }
    }

    /// Full tent map.
    pub fn tent() -> Self {
        IntervalMap {
            name: "tent".into(),
            branches: vec![
                AffineBranch {
                    domain: [0.0, 0.5],
                    image: [0.0, 1.0],
                },
                AffineBranch {
                    domain: [0.5, 1.0],
                    image: [1.0, 0.0],
                },
            ],
        }
    }

    fn validate(&self) -> Result<()> {
        let mut branches: Vec<&AffineBranch> = self.branches.iter().collect();
        branches.sort_by(|a, b| a.domain[0].total_cmp(&b.domain[0]));
        let mut cursor = 0.0;
        for b in &branches {
            if (b.domain[0] - cursor).abs() > 1e-12 || b.domain[1] <= b.domain[0] {
                return Err(CoverError::Config(format!(
                    "branch domains of map '{}' must tile [0, 1) without gaps",
                    self.name
                )));
            }
            if b.image.iter().any(|y| !(-1e-12..=1.0 + 1e-12).contains(y)) || b.image[0] == b.image[1] {
                return Err(CoverError::Config(format!(
                    "branch image {:?} of map '{}' must be a nondegenerate subinterval of [0, 1]",
                    b.image, self.name
                )));
            }
            cursor = b.domain[1];
        }
        if (cursor - 1.0).abs() > 1e-12 {
            return Err(CoverError::Config(format!("branch domains of map '{}' do not reach 1", self.name)));
        }
        Ok(())
    }
}

/// One interval on which the cocycle is constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocyclePiece {
    pub start: f64,
    pub end: f64,
    pub psi: Vec<i64>,
    #[serde(default)]
    pub phi: f64,
}

/// Piecewise-constant lattice and fiber increments on `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseCocycle {
    pub d: usize,
    pub pieces: Vec<CocyclePiece>,
}

impl PiecewiseCocycle {
    /// `+1` on `[0, 1/2)` and `-1` on `[1/2, 1)`.
    pub fn sign_halves() -> Self {
        PiecewiseCocycle {
            d: 1,
            pieces: vec![
                CocyclePiece {
                    start: 0.0,
                    end: 0.5,
                    psi: vec![1],
                    phi: 0.0,
                },
                CocyclePiece {
                    start: 0.5,
                    end: 1.0,
                    psi: vec![-1],
                    phi: 0.0,
                },
            ],
        }
    }

    fn on_cell(&self, lo: f64, hi: f64) -> Result<&CocyclePiece> {
        self.pieces
            .iter()
            .find(|p| p.start <= lo + 1e-12 && p.end >= hi - 1e-12)
            .ok_or_else(|| {
                CoverError::InvalidArgument(format!("cocycle is not constant on the cell [{lo}, {hi})"))
            })
    }
}

/// Ulam model of `map` on `2^level` dyadic cells.
pub fn ulam_compile(map: &IntervalMap, level: u32, cocycle: &PiecewiseCocycle) -> Result<MarkovModel> {
    map.validate()?;
    if level > 16 {
        return Err(CoverError::ResourceGuard(format!("Ulam level {level} exceeds 16")));
    }
    if let Some(p) = cocycle.pieces.iter().find(|p| p.psi.len() != cocycle.d) {
        return Err(CoverError::Config(format!("cocycle piece at {} has psi of length {}", p.start, p.psi.len())));
    }
    let n = 1usize << level;
    let width = 1.0 / n as f64;
    let increments: Vec<&CocyclePiece> = (0..n)
        .map(|c| cocycle.on_cell(c as f64 * width, (c + 1) as f64 * width))
        .collect::<Result<_>>()?;

    let mut edges = Vec::new();
    for i in 0..n {
        let (lo, hi) = (i as f64 * width, (i + 1) as f64 * width);
        let mut row: BTreeMap<usize, f64> = BTreeMap::new();
        for (b_idx, b) in map.branches.iter().enumerate() {
            let a = lo.max(b.domain[0]);
            let z = hi.min(b.domain[1]);
            if z - a <= 1e-15 {
                continue;
            }
            let slope = (b.image[1] - b.image[0]) / (b.domain[1] - b.domain[0]);
            let y0 = b.image[0] + slope * (a - b.domain[0]);
            let y1 = b.image[0] + slope * (z - b.domain[0]);
            let (ylo, yhi) = if y0 < y1 { (y0, y1) } else { (y1, y0) };
            let first = snap(ylo * n as f64);
            let last = snap(yhi * n as f64);
            let (first, last) = match (first, last) {
                (Some(f), Some(l)) if l > f => (f, l),
                _ => {
                    return Err(CoverError::BranchNotSurjective(format!(
                        "branch {b_idx} maps part of cell {i} onto [{ylo}, {yhi}), not a union of level-{level} cells"
                    )))
                }
            };
            let share = (z - a) / width / (last - first) as f64;
            for j in first..last {
                *row.entry(j).or_insert(0.0) += share;
            }
        }
        for (j, p) in row {
            edges.push(Edge {
                src: i,
                dst: j,
                prob: p,
                psi: increments[j].psi.clone(),
                phi: increments[j].phi,
            });
        }
    }
    MarkovModel::from_edges(format!("{}-ulam-{level}", map.name), n, cocycle.d, edges)
}

fn snap(x: f64) -> Option<usize> {
    let r = x.round();
    ((x - r).abs() <= GRID_TOL && r >= 0.0).then_some(r as usize)
}
