//! Finitely supported observables on states x Z^d x fiber modes.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoverError, Result};

/// Key of one support point: (state, lattice point, fiber mode).
pub type SupportKey = (usize, Vec<i64>, i64);

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoverObservable {
    d: usize,
    values: BTreeMap<SupportKey, Complex64>,
}

/// One entry of the observable file format.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ObservableEntry {
    pub state: usize,
    pub n: Vec<i64>,
    #[serde(default)]
    pub k: i64,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl CoverObservable {
    pub fn zero(d: usize) -> Self {
        CoverObservable {
            d,
            values: BTreeMap::new(),
        }
    }

    /// Indicator of a single support point.
    pub fn delta(d: usize, state: usize, n: &[i64], k: i64) -> Self {
        let mut f = Self::zero(d);
        f.add(state, n, k, Complex64::new(1.0, 0.0));
        f
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Adds `value` at the given point (accumulating).
    pub fn add(&mut self, state: usize, n: &[i64], k: i64, value: Complex64) {
        assert_eq!(n.len(), self.d, "lattice point has wrong dimension");
        let key = (state, n.to_vec(), k);
        let slot = self.values.entry(key.clone()).or_insert(Complex64::new(0.0, 0.0));
        *slot += value;
        if *slot == Complex64::new(0.0, 0.0) {
            self.values.remove(&key);
        }
    }

    pub fn with(mut self, state: usize, n: &[i64], k: i64, value: Complex64) -> Self {
        self.add(state, n, k, value);
        self
    }

    pub fn get(&self, state: usize, n: &[i64], k: i64) -> Complex64 {
        self.values
            .get(&(state, n.to_vec(), k))
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&SupportKey, &Complex64)> {
        self.values.iter()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest sup-norm of a lattice point in the support.
    pub fn support_radius(&self) -> usize {
        self.values
            .keys()
            .flat_map(|(_, n, _)| n.iter().map(|x| x.unsigned_abs() as usize))
            .max()
            .unwrap_or(0)
    }

    /// Largest |k| in the support.
    pub fn fiber_band(&self) -> usize {
        self.values
            .keys()
            .map(|(_, _, k)| k.unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }

    /// Sorted list of fiber modes present.
    pub fn fiber_modes(&self) -> Vec<i64> {
        let mut ks: Vec<i64> = self.values.keys().map(|(_, _, k)| *k).collect();
        ks.sort_unstable();
        ks.dedup();
        ks
    }

    pub fn max_state(&self) -> Option<usize> {
        self.values.keys().map(|(s, _, _)| *s).max()
    }

    /// Entries at fiber mode `k` only.
    pub fn mode_slice(&self, k: i64) -> Self {
        CoverObservable {
            d: self.d,
            values: self
                .values
                .iter()
                .filter(|((_, _, kk), _)| *kk == k)
                .map(|(key, v)| (key.clone(), *v))
                .collect(),
        }
    }

    /// Pullback by the deck translation: (tau_m^* f)(x, n) = f(x, n + m).
    pub fn translated(&self, m: &[i64]) -> Self {
        assert_eq!(m.len(), self.d);
        CoverObservable {
            d: self.d,
            values: self
                .values
                .iter()
                .map(|((s, n, k), v)| {
                    let shifted: Vec<i64> = n.iter().zip(m).map(|(a, b)| a - b).collect();
                    ((*s, shifted, *k), *v)
                })
                .collect(),
        }
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        let mut out = Self::zero(self.d);
        for ((s, n, k), v) in &self.values {
            out.add(*s, n, *k, v * c);
        }
        out
    }

    pub fn plus(&self, other: &Self) -> Self {
        assert_eq!(self.d, other.d);
        let mut out = self.clone();
        for ((s, n, k), v) in &other.values {
            out.add(*s, n, *k, *v);
        }
        out
    }

    pub fn minus(&self, other: &Self) -> Self {
        self.plus(&other.scaled(Complex64::new(-1.0, 0.0)))
    }

    /// Direct pi-weighted pairing sum_{i,n,k} pi_i f conj(g).
    pub fn pairing(&self, other: &Self, pi: &[f64]) -> Complex64 {
        self.values
            .iter()
            .filter_map(|((s, n, k), v)| {
                other
                    .values
                    .get(&(*s, n.clone(), *k))
                    .map(|w| v * w.conj() * pi[*s])
            })
            .sum()
    }

    /// sum_{i,n} pi_i f(i, n, 0): the integral of the fiber-averaged
    /// observable against the invariant measure.
    pub fn integral(&self, pi: &[f64]) -> Complex64 {
        self.values
            .iter()
            .filter(|((_, _, k), _)| *k == 0)
            .map(|((s, _, _), v)| v * pi[*s])
            .sum()
    }

    pub fn is_real(&self) -> bool {
        self.values.values().all(|v| v.im == 0.0)
    }

    pub fn to_entries(&self) -> Vec<ObservableEntry> {
        self.values
            .iter()
            .map(|((s, n, k), v)| ObservableEntry {
                state: *s,
                n: n.clone(),
                k: *k,
                re: v.re,
                im: v.im,
            })
            .collect()
    }

    pub fn from_entries(d: usize, entries: &[ObservableEntry]) -> Result<Self> {
        let mut f = Self::zero(d);
        for e in entries {
            if e.n.len() != d {
                return Err(CoverError::Config(format!(
                    "observable entry at state {} has lattice point of length {} (d = {d})",
                    e.state,
                    e.n.len()
                )));
            }
            f.add(e.state, &e.n, e.k, Complex64::new(e.re, e.im));
        }
        Ok(f)
    }

    /// Reads an observable file; `d` is taken from the first entry.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let entries: Vec<ObservableEntry> = serde_json::from_str(&text)?;
        let d = entries.first().map(|e| e.n.len()).unwrap_or(0);
        Self::from_entries(d, &entries)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_entries())?)
    }

    pub fn check_states(&self, state_count: usize) -> Result<()> {
        match self.max_state() {
            Some(s) if s >= state_count => Err(CoverError::Config(format!(
                "observable references state {s} but the model has {state_count}"
            ))),
            _ => Ok(()),
        }
    }

    /// Random observable with support radius at most `radius` and fiber
    /// band at most `band`.
    pub fn random(seed: u64, states: usize, d: usize, radius: i64, band: i64, entries: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = Self::zero(d);
        for _ in 0..entries {
            let s = rng.gen_range(0..states);
            let n: Vec<i64> = (0..d).map(|_| rng.gen_range(-radius..=radius)).collect();
            let k = if band > 0 { rng.gen_range(-band..=band) } else { 0 };
            let v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            f.add(s, &n, k, v);
        }
        f
    }
}

/// The k = 0 slice: integrates the observable over the circle fiber.
pub fn fiber_average(f: &CoverObservable) -> CoverObservable {
    f.mode_slice(0)
}
