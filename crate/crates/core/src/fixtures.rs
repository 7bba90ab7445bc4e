//! Reference models used by the tests, the acceptance suite and the CLI.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{build_model, Edge, MarkovModel, ModelConfig};

/// One state, steps -1, 0, +1 with probabilities 1/4, 1/2, 1/4.
pub fn lazy_walk() -> MarkovModel {
    build_model(&lazy_walk_config()).expect("lazy walk is valid")
}

pub fn lazy_walk_config() -> ModelConfig {
    ModelConfig::new("lazy-walk", 1, 1)
        .edge(0, 0, 0.25, &[1])
        .edge(0, 0, 0.5, &[0])
        .edge(0, 0, 0.25, &[-1])
}

/// Two states, all transitions 1/2; entering state 0 steps +1, entering
/// state 1 steps -1. The lattice walk is the non-lazy simple walk.
pub fn fair_coin() -> MarkovModel {
    build_model(&fair_coin_config()).expect("fair coin is valid")
}

pub fn fair_coin_config() -> ModelConfig {
    ModelConfig::new("fair-coin", 1, 2)
        .edge(0, 0, 0.5, &[1])
        .edge(0, 1, 0.5, &[-1])
        .edge(1, 0, 0.5, &[1])
        .edge(1, 1, 0.5, &[-1])
}

/// Fair-coin layout with probabilities 3/4 into state 0 and 1/4 into
/// state 1; drift 1/2.
pub fn biased_coin() -> MarkovModel {
    build_model(
        &ModelConfig::new("biased-coin", 1, 2)
            .edge(0, 0, 0.75, &[1])
            .edge(0, 1, 0.25, &[-1])
            .edge(1, 0, 0.75, &[1])
            .edge(1, 1, 0.25, &[-1]),
    )
    .expect("biased coin is valid")
}

/// Independent product of two lazy walks on Z^2.
pub fn lazy_walk_2d() -> MarkovModel {
    lazy_walk().product(&lazy_walk()).expect("product is valid")
}

/// Lazy walk whose every edge rotates the fiber by the same golden-ratio
/// angle: the fiber extension is not mixing.
pub fn lazy_walk_constant_fiber() -> MarkovModel {
    let golden = TAU * (5f64.sqrt() - 1.0) / 2.0;
    lazy_walk().with_phases(&[golden; 3]).expect("valid phases")
}

/// Lazy walk with distinct irrational fiber rotations on its edges.
pub fn lazy_walk_mixing_fiber() -> MarkovModel {
    let phases = [TAU * (2f64.sqrt() - 1.0), 0.0, TAU * (3f64.sqrt() - 1.0) / 2.0];
    lazy_walk().with_phases(&phases).expect("valid phases")
}

/// Lazy walk with phases `a` on the +1 step and `c` on the -1 step, both
/// irrational multiples of a turn. The k = +-1 surfaces peak at
/// `cos((a + c) / 4)`, about 0.767.
pub fn u1_walk() -> MarkovModel {
    let a = TAU * (2f64.sqrt() - 1.0) / 2.0;
    let c = TAU * (5f64.sqrt() - 2.0);
    lazy_walk().with_phases(&[a, 0.0, c]).expect("valid phases")
}

/// Two-state model with a mixing fiber cocycle and a lazy lattice step.
pub fn two_state_mixing_fiber() -> MarkovModel {
    let a = TAU * (2f64.sqrt() - 1.0);
    let b = TAU * (3f64.sqrt() - 1.0) / 2.0;
    build_model(
        &ModelConfig::new("two-state-fiber", 1, 2)
            .edge_with_phi(0, 0, 0.3, &[1], a)
            .edge_with_phi(0, 0, 0.2, &[-1], 0.0)
            .edge_with_phi(0, 1, 0.5, &[0], b)
            .edge_with_phi(1, 0, 0.4, &[-1], 0.0)
            .edge_with_phi(1, 1, 0.3, &[1], a + b)
            .edge_with_phi(1, 1, 0.3, &[0], 0.0),
    )
    .expect("valid model")
}

/// Random mixing model. With `centered`, self-loops carrying unit steps are
/// mixed into one state so that the stationary drift vanishes.
pub fn random_model(states: usize, d: usize, seed: u64, centered: bool) -> MarkovModel {
    random_model_with_fiber(states, d, seed, centered, false)
}

pub fn random_model_with_fiber(
    states: usize,
    d: usize,
    seed: u64,
    centered: bool,
    fiber: bool,
) -> MarkovModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<Edge> = Vec::new();
    for i in 0..states {
        let mut row: Vec<(usize, f64)> = Vec::new();
        for j in 0..states {
            let forced = j == i || j == (i + 1) % states;
            if forced || rng.gen_bool(0.6) {
                row.push((j, rng.gen_range(0.2..1.0)));
            }
        }
        // a second parallel edge now and then
        if rng.gen_bool(0.5) {
            let j = rng.gen_range(0..states);
            row.push((j, rng.gen_range(0.2..1.0)));
        }
        let total: f64 = row.iter().map(|r| r.1).sum();
        for (j, w) in row {
            let psi = (0..d).map(|_| rng.gen_range(-2i64..=2)).collect();
            let phi = if fiber { rng.gen_range(0.0..TAU) } else { 0.0 };
            edges.push(Edge {
                src: i,
                dst: j,
                prob: w / total,
                psi,
                phi,
            });
        }
    }
    let name = format!("random-{states}-{d}-{seed}");
    let mut model =
        MarkovModel::from_edges(name.clone(), states, d, edges.clone()).expect("random model is mixing");
    if !centered {
        return model;
    }
    let s = 0;
    for axis in 0..d {
        let drift = model.lattice().mean_drift()[axis];
        if drift == 0.0 {
            continue;
        }
        let pi_s = model.pi()[s];
        let q = drift.abs() / (pi_s + drift.abs());
        for e in edges.iter_mut().filter(|e| e.src == s) {
            e.prob *= 1.0 - q;
        }
        let mut psi = vec![0; d];
        psi[axis] = if drift > 0.0 { -1 } else { 1 };
        let phi = if fiber { rng.gen_range(0.0..TAU) } else { 0.0 };
        edges.push(Edge {
            src: s,
            dst: s,
            prob: q,
            psi,
            phi,
        });
        model = MarkovModel::from_edges(name.clone(), states, d, edges.clone())
            .expect("centering keeps the chain mixing");
    }
    model
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::center_check;

    #[test]
    fn random_centered_models_are_centered() {
        for seed in 0..20 {
            let m = random_model(1 + (seed as usize % 8), 1 + (seed as usize % 2), seed, true);
            let c = center_check(&m);
            assert!(c.pass, "seed {seed}: drift {:?}", c.drift);
        }
    }

    #[test]
    fn random_models_are_deterministic() {
        let a = random_model(5, 2, 42, true);
        let b = random_model(5, 2, 42, true);
        assert_eq!(a.edges(), b.edges());
    }
}
