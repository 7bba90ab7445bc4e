//! Finite base dynamics with a lattice cocycle and an optional circle-fiber
//! angle cocycle.
//!
//! A [`MarkovModel`] is a finite multigraph of weighted edges. Each edge
//! `i -> j` carries a transition probability, an integer displacement
//! `psi` in Z^d (the lattice cocycle) and an angle `phi` (the fiber
//! cocycle). The cover dynamics is the skew product
//! `(x, n, a) -> (x', n + psi, a + phi)`.

use std::f64::consts::TAU;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CoverError, Result};
use crate::linalg::{eigenvalues_sorted, stationary_vector, CMatrix};

const ROW_SUM_TOL: f64 = 1e-12;
const PI_RESIDUAL_TOL: f64 = 1e-10;
const SLEM_MARGIN: f64 = 1e-9;
pub const CENTER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub prob: f64,
    pub psi: Vec<i64>,
    pub phi: f64,
}

#[derive(Debug, Clone)]
pub struct MarkovModel {
    pub name: String,
    state_count: usize,
    d: usize,
    edges: Vec<Edge>,
    pi: Vec<f64>,
}

/// Probability given either as a JSON number or as a decimal string.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ProbValue {
    Number(f64),
    Text(String),
}

impl ProbValue {
    fn value(&self) -> Result<f64> {
        match self {
            ProbValue::Number(x) => Ok(*x),
            ProbValue::Text(s) => s
                .trim()
                .parse::<f64>()
                .map_err(|e| CoverError::Config(format!("bad probability {s:?}: {e}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EdgeConfig {
    pub from: usize,
    pub to: usize,
    pub p: ProbValue,
    #[serde(default)]
    pub psi: Vec<f64>,
    #[serde(default)]
    pub phi: f64,
}

/// On-disk model description.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelConfig {
    pub name: String,
    pub d: usize,
    pub states: usize,
    pub edges: Vec<EdgeConfig>,
}

impl ModelConfig {
    pub fn new(name: impl Into<String>, d: usize, states: usize) -> Self {
        ModelConfig {
            name: name.into(),
            d,
            states,
            edges: Vec::new(),
        }
    }

    pub fn edge(self, from: usize, to: usize, p: f64, psi: &[i64]) -> Self {
        self.edge_with_phi(from, to, p, psi, 0.0)
    }

    pub fn edge_with_phi(mut self, from: usize, to: usize, p: f64, psi: &[i64], phi: f64) -> Self {
        self.edges.push(EdgeConfig {
            from,
            to,
            p: ProbValue::Number(p),
            psi: psi.iter().map(|&x| x as f64).collect(),
            phi,
        });
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}

/// Validate a configuration and compute the invariant distribution.
pub fn build_model(config: &ModelConfig) -> Result<MarkovModel> {
    let n = config.states;
    if n == 0 {
        return Err(CoverError::Config("model needs at least one state".into()));
    }
    let mut edges = Vec::with_capacity(config.edges.len());
    for (idx, e) in config.edges.iter().enumerate() {
        if e.from >= n || e.to >= n {
            return Err(CoverError::InvalidEdge(format!(
                "edge {idx} references state outside 0..{n}"
            )));
        }
        let prob = e.p.value()?;
        if !(prob > 0.0 && prob <= 1.0) {
            return Err(CoverError::InvalidEdge(format!(
                "edge {idx} has probability {prob} outside (0,1]"
            )));
        }
        if e.psi.len() != config.d {
            return Err(CoverError::InvalidEdge(format!(
                "edge {idx} has psi of length {} but d = {}",
                e.psi.len(),
                config.d
            )));
        }
        let mut psi = Vec::with_capacity(config.d);
        for &x in &e.psi {
            if !x.is_finite() || x.fract() != 0.0 || x.abs() > (1u64 << 40) as f64 {
                return Err(CoverError::NonIntegerPsi { edge: idx, value: x });
            }
            psi.push(x as i64);
        }
        if !e.phi.is_finite() {
            return Err(CoverError::InvalidEdge(format!("edge {idx} has non-finite phi")));
        }
        edges.push(Edge {
            src: e.from,
            dst: e.to,
            prob,
            psi,
            phi: e.phi.rem_euclid(TAU),
        });
    }
    MarkovModel::from_edges(config.name.clone(), n, config.d, edges)
}

impl MarkovModel {
    pub fn from_edges(name: String, state_count: usize, d: usize, edges: Vec<Edge>) -> Result<Self> {
        let mut sums = vec![0.0; state_count];
        for e in &edges {
            sums[e.src] += e.prob;
        }
        for (state, &sum) in sums.iter().enumerate() {
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(CoverError::NonStochasticRow { state, sum });
            }
        }
        let mut model = MarkovModel {
            name,
            state_count,
            d,
            edges,
            pi: Vec::new(),
        };
        let p = model.transition_matrix();
        let slem = second_eigen_modulus(&p)?;
        if slem >= 1.0 - SLEM_MARGIN {
            return Err(CoverError::NotMixing { slem });
        }
        let pi = stationary_vector(&p)?;
        let residual = (0..state_count)
            .map(|j| {
                let s: f64 = (0..state_count).map(|i| pi[i] * p[(i, j)]).sum();
                (s - pi[j]).abs()
            })
            .fold(0.0, f64::max);
        if residual > PI_RESIDUAL_TOL {
            return Err(CoverError::Numerical(format!(
                "stationary vector residual {residual:e}"
            )));
        }
        model.pi = pi;
        Ok(model)
    }

    pub fn state_count(&self) -> usize {
        self.state_count
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// P[i][j] = sum of probabilities of edges i -> j.
    pub fn transition_matrix(&self) -> DMatrix<f64> {
        let n = self.state_count;
        let mut p = DMatrix::zeros(n, n);
        for e in &self.edges {
            p[(e.src, e.dst)] += e.prob;
        }
        p
    }

    pub fn lattice(&self) -> LatticeCocycle<'_> {
        LatticeCocycle { model: self }
    }

    pub fn fiber(&self) -> FiberCocycle<'_> {
        FiberCocycle { model: self }
    }

    /// Largest |psi| component over all edges.
    pub fn max_step(&self) -> i64 {
        self.edges
            .iter()
            .flat_map(|e| e.psi.iter().map(|x| x.abs()))
            .max()
            .unwrap_or(0)
    }

    /// Second largest eigenvalue modulus of P.
    pub fn slem(&self) -> f64 {
        second_eigen_modulus(&self.transition_matrix()).unwrap_or(1.0)
    }

    /// The reversed model: edges flipped with probabilities
    /// pi[dst] p / pi[src], cocycle values negated.
    pub fn time_reversal(&self) -> Result<MarkovModel> {
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                src: e.dst,
                dst: e.src,
                prob: self.pi[e.src] * e.prob / self.pi[e.dst],
                psi: e.psi.iter().map(|x| -x).collect(),
                phi: (-e.phi).rem_euclid(TAU),
            })
            .collect();
        MarkovModel::from_edges(format!("{}-reversed", self.name), self.state_count, self.d, edges)
    }

    /// Model whose cocycle is psi concatenated with -psi: every edge is split
    /// into two parallel copies at half probability carrying +psi and -psi.
    pub fn symmetrized(&self) -> Result<MarkovModel> {
        let mut edges = Vec::with_capacity(2 * self.edges.len());
        for e in &self.edges {
            let mut plus = e.clone();
            plus.prob *= 0.5;
            let mut minus = plus.clone();
            minus.psi.iter_mut().for_each(|x| *x = -*x);
            edges.push(plus);
            edges.push(minus);
        }
        MarkovModel::from_edges(format!("{}-sym", self.name), self.state_count, self.d, edges)
    }

    /// Independent product of two models: states are pairs, the lattice is
    /// Z^(d1 + d2), angles add.
    pub fn product(&self, other: &MarkovModel) -> Result<MarkovModel> {
        let n2 = other.state_count;
        let mut edges = Vec::with_capacity(self.edges.len() * other.edges.len());
        for a in &self.edges {
            for b in &other.edges {
                let mut psi = a.psi.clone();
                psi.extend_from_slice(&b.psi);
                edges.push(Edge {
                    src: a.src * n2 + b.src,
                    dst: a.dst * n2 + b.dst,
                    prob: a.prob * b.prob,
                    psi,
                    phi: (a.phi + b.phi).rem_euclid(TAU),
                });
            }
        }
        MarkovModel::from_edges(
            format!("{}x{}", self.name, other.name),
            self.state_count * n2,
            self.d + other.d,
            edges,
        )
    }

    /// Copy of the model with the fiber angles replaced.
    pub fn with_phases(&self, phases: &[f64]) -> Result<MarkovModel> {
        if phases.len() != self.edges.len() {
            return Err(CoverError::InvalidArgument(format!(
                "{} phases for {} edges",
                phases.len(),
                self.edges.len()
            )));
        }
        let edges = self
            .edges
            .iter()
            .zip(phases)
            .map(|(e, &phi)| Edge {
                phi: phi.rem_euclid(TAU),
                ..e.clone()
            })
            .collect();
        MarkovModel::from_edges(self.name.clone(), self.state_count, self.d, edges)
    }

    pub fn to_config(&self) -> ModelConfig {
        ModelConfig {
            name: self.name.clone(),
            d: self.d,
            states: self.state_count,
            edges: self
                .edges
                .iter()
                .map(|e| EdgeConfig {
                    from: e.src,
                    to: e.dst,
                    p: ProbValue::Number(e.prob),
                    psi: e.psi.iter().map(|&x| x as f64).collect(),
                    phi: e.phi,
                })
                .collect(),
        }
    }
}

fn second_eigen_modulus(p: &DMatrix<f64>) -> Result<f64> {
    let n = p.nrows();
    if n == 1 {
        return Ok(0.0);
    }
    let cp: CMatrix = p.map(|x| Complex64::new(x, 0.0));
    let ev = eigenvalues_sorted(&cp)?;
    Ok(ev[1].norm())
}

/// Read-only view of the Z^d displacement carried by each edge.
#[derive(Clone, Copy)]
pub struct LatticeCocycle<'a> {
    model: &'a MarkovModel,
}

impl<'a> LatticeCocycle<'a> {
    pub fn psi(&self, edge: usize) -> &'a [i64] {
        &self.model.edges[edge].psi
    }

    /// Stationary mean displacement per step.
    pub fn mean_drift(&self) -> Vec<f64> {
        let mut drift = vec![0.0; self.model.d];
        for e in &self.model.edges {
            let w = self.model.pi[e.src] * e.prob;
            for (acc, &x) in drift.iter_mut().zip(&e.psi) {
                *acc += w * x as f64;
            }
        }
        drift
    }

    /// Displacement sums of closed edge paths of length at most `max_len`.
    pub fn cycle_sums(&self, max_len: usize) -> Vec<Vec<i64>> {
        use std::collections::BTreeSet;
        let n = self.model.state_count;
        let mut found: BTreeSet<Vec<i64>> = BTreeSet::new();
        for start in 0..n {
            let mut frontier: BTreeSet<(usize, Vec<i64>)> = BTreeSet::new();
            frontier.insert((start, vec![0; self.model.d]));
            for _ in 0..max_len {
                let mut next = BTreeSet::new();
                for (state, sum) in &frontier {
                    for e in self.model.edges.iter().filter(|e| e.src == *state) {
                        let s: Vec<i64> = sum.iter().zip(&e.psi).map(|(a, b)| a + b).collect();
                        if e.dst == start {
                            found.insert(s.clone());
                        }
                        next.insert((e.dst, s));
                    }
                }
                frontier = next;
            }
        }
        found.into_iter().collect()
    }

    /// Whether the cycle sums over closed paths of length up to
    /// `state_count + 2` generate all of Z^d.
    pub fn generates_lattice(&self) -> bool {
        let d = self.model.d;
        if d == 0 {
            return true;
        }
        let sums = self.cycle_sums(self.model.state_count + 2);
        lattice_index_is_one(&sums, d)
    }
}

/// Integer row reduction (Hermite style) to decide whether the given
/// vectors generate Z^d.
pub(crate) fn lattice_index_is_one(vectors: &[Vec<i64>], d: usize) -> bool {
    let mut rows: Vec<Vec<i128>> = vectors
        .iter()
        .map(|v| v.iter().map(|&x| x as i128).collect())
        .filter(|v: &Vec<i128>| v.iter().any(|&x| x != 0))
        .collect();
    let mut pivot_row = 0;
    for col in 0..d {
        // Euclid on column `col` among rows >= pivot_row.
        loop {
            let nonzero: Vec<usize> = (pivot_row..rows.len()).filter(|&r| rows[r][col] != 0).collect();
            if nonzero.is_empty() {
                return false;
            }
            let best = *nonzero
                .iter()
                .min_by_key(|&&r| rows[r][col].abs())
                .expect("nonempty");
            rows.swap(pivot_row, best);
            let mut done = true;
            for r in (pivot_row + 1)..rows.len() {
                if rows[r][col] != 0 {
                    let q = rows[r][col] / rows[pivot_row][col];
                    for c in 0..d {
                        rows[r][c] -= q * rows[pivot_row][c];
                    }
                    if rows[r][col] != 0 {
                        done = false;
                    }
                }
            }
            if done {
                break;
            }
        }
        if rows[pivot_row][col].abs() != 1 {
            return false;
        }
        pivot_row += 1;
    }
    true
}

/// Read-only view of the U(1) angle carried by each edge.
#[derive(Clone, Copy)]
pub struct FiberCocycle<'a> {
    model: &'a MarkovModel,
}

impl<'a> FiberCocycle<'a> {
    pub fn phi(&self, edge: usize) -> f64 {
        self.model.edges[edge].phi
    }

    /// True when every angle is zero, i.e. the model has no fiber extension.
    pub fn is_trivial(&self) -> bool {
        self.model.edges.iter().all(|e| e.phi == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CenterCheck {
    pub drift: Vec<f64>,
    pub pass: bool,
}

/// Stationary drift of the lattice cocycle; passes when it vanishes.
pub fn center_check(model: &MarkovModel) -> CenterCheck {
    let drift = model.lattice().mean_drift();
    let pass = drift.iter().all(|x| x.abs() <= CENTER_TOL);
    CenterCheck { drift, pass }
}

pub(crate) fn require_centered(model: &MarkovModel) -> Result<()> {
    let check = center_check(model);
    if check.pass {
        Ok(())
    } else {
        Err(CoverError::NonCentered { drift: check.drift })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn lazy_walk_is_valid_with_trivial_pi() {
        let m = fixtures::lazy_walk();
        assert_eq!(m.state_count(), 1);
        assert_eq!(m.pi(), &[1.0]);
        assert!(center_check(&m).pass);
    }

    #[test]
    fn fair_coin_has_uniform_pi() {
        let m = fixtures::fair_coin();
        assert!((m.pi()[0] - 0.5).abs() < 1e-15);
        assert!((m.pi()[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn row_sum_below_one_is_rejected() {
        let cfg = ModelConfig::new("bad", 1, 1)
            .edge(0, 0, 0.5, &[1])
            .edge(0, 0, 0.4, &[-1]);
        match build_model(&cfg) {
            Err(CoverError::NonStochasticRow { state: 0, sum }) => assert!((sum - 0.9).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
        let msg = build_model(&cfg).unwrap_err().to_string();
        assert!(msg.contains("non-stochastic row"));
    }

    #[test]
    fn non_integer_psi_is_rejected() {
        let text = r#"{"name":"x","d":1,"states":1,"edges":[
            {"from":0,"to":0,"p":0.5,"psi":[0.5]},
            {"from":0,"to":0,"p":0.5,"psi":[-1]}]}"#;
        let cfg = ModelConfig::from_json(text).unwrap();
        assert!(matches!(build_model(&cfg), Err(CoverError::NonIntegerPsi { edge: 0, .. })));
    }

    #[test]
    fn periodic_and_reducible_chains_are_rejected() {
        let periodic = ModelConfig::new("flip", 0, 2).edge(0, 1, 1.0, &[]).edge(1, 0, 1.0, &[]);
        assert!(matches!(build_model(&periodic), Err(CoverError::NotMixing { .. })));
        let reducible = ModelConfig::new("split", 0, 2).edge(0, 0, 1.0, &[]).edge(1, 1, 1.0, &[]);
        assert!(matches!(build_model(&reducible), Err(CoverError::NotMixing { .. })));
    }

    #[test]
    fn decimal_string_probabilities_parse() {
        let text = r#"{"name":"lazy","d":1,"states":1,"edges":[
            {"from":0,"to":0,"p":"0.25","psi":[1]},
            {"from":0,"to":0,"p":"0.5","psi":[0]},
            {"from":0,"to":0,"p":"0.25","psi":[-1],"phi":0.0}]}"#;
        let m = build_model(&ModelConfig::from_json(text).unwrap()).unwrap();
        assert_eq!(m.edges().len(), 3);
        assert_eq!(m.edges()[0].prob, 0.25);
    }

    #[test]
    fn drift_of_asymmetric_coin() {
        let m = fixtures::biased_coin();
        let c = center_check(&m);
        assert!(!c.pass);
        assert!((c.drift[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn product_of_lazy_walks_is_centered() {
        let m = fixtures::lazy_walk_2d();
        let c = center_check(&m);
        assert!(c.pass);
        assert_eq!(c.drift, vec![0.0, 0.0]);
    }

    #[test]
    fn symmetrized_model_is_centered() {
        let m = fixtures::biased_coin().symmetrized().unwrap();
        assert!(center_check(&m).pass);
        let r = fixtures::random_model(5, 2, 11, false);
        assert!(center_check(&r.symmetrized().unwrap()).pass);
    }

    #[test]
    fn lattice_generation() {
        assert!(fixtures::lazy_walk().lattice().generates_lattice());
        assert!(fixtures::fair_coin().lattice().generates_lattice());
        assert!(fixtures::lazy_walk_2d().lattice().generates_lattice());
        // only even displacements
        let even = build_model(
            &ModelConfig::new("even", 1, 1)
                .edge(0, 0, 0.5, &[2])
                .edge(0, 0, 0.5, &[-2]),
        )
        .unwrap();
        assert!(!even.lattice().generates_lattice());
        assert!(lattice_index_is_one(&[vec![2, 0], vec![3, 0], vec![0, 1]], 2));
        assert!(!lattice_index_is_one(&[vec![1, 1], vec![1, -1]], 2));
    }

    #[test]
    fn fiber_view() {
        assert!(fixtures::lazy_walk().fiber().is_trivial());
        let m = fixtures::lazy_walk_constant_fiber();
        assert!(!m.fiber().is_trivial());
        assert!(m.fiber().phi(0) >= 0.0 && m.fiber().phi(0) < TAU);
    }

    #[test]
    fn config_json_round_trip() {
        let m = fixtures::random_model(4, 2, 3, true);
        let text = serde_json::to_string(&m.to_config()).unwrap();
        let back = build_model(&ModelConfig::from_json(&text).unwrap()).unwrap();
        assert_eq!(back.edges(), m.edges());
        for (a, b) in back.pi().iter().zip(m.pi()) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
