//! Stationary-phase expansion of the correlation at the origin.
//!
//! With `Sigma = -lambda''(0)` and `g = -i(lambda - theta^T lambda'' theta / 2)`,
//!
//! `L_j u = i^{-j} sum_{nu - mu = j, 2 nu >= 3 mu} 2^{-nu} / (mu! nu!) Op^nu (g^mu u)(0)`
//!
//! where `Op = <(-i lambda'')^{-1} D, D>` and `D = -i d/dtheta`. The correlation
//! then satisfies `t^{d/2} C(t) ~ kappa sum_j c_j t^{-j}` with `c_j = L_j a` and
//! `kappa = (2 pi)^{-d/2} det(Sigma)^{-1/2}`; `C` carries the `(2 pi)^{-d}` of
//! the torus integral.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::correlation::{floquet_correlation_with, PowerStrategy};
use crate::error::{CoverError, Result};
use crate::floquet::ThetaGrid;
use crate::jet::{monomials, order, TaylorJet};
use crate::linalg::eigenvalues_sorted;
use crate::model::{require_centered, MarkovModel};
use crate::observable::CoverObservable;
use crate::resonance::{amplitude_jet_auto, covariance_from_lambda, lambda_jet_auto, CovarianceMatrix, FittedJet, DRIFT_TOL};
use crate::twisted::{twisted_matrix, DEFAULT_GAP_FLOOR};

/// Name of the normalization convention written into reports.
pub const CONVENTION: &str = "C-includes-(2pi)^-d";

fn i_pow(n: i64) -> Complex64 {
    match n.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|x| x as f64).product()
}

/// `-i (lambda - theta^T lambda''(0) theta / 2)`, which vanishes to third
/// order.
pub fn g_jet(lambda: &TaylorJet) -> Result<TaylorJet> {
    let d = lambda.dim();
    let drift: Vec<f64> = monomials(d, 1)
        .iter()
        .filter(|a| order(a) == 1)
        .map(|a| lambda.coeff(a).norm())
        .collect();
    if drift.iter().any(|x| *x > DRIFT_TOL) {
        return Err(CoverError::NonCentered { drift });
    }
    let rest = lambda.sub(&lambda.homogeneous(2)).sub(&lambda.homogeneous(1));
    let rest = rest.sub(&TaylorJet::constant(d, lambda.degree(), lambda.value_at_zero()));
    Ok(rest.scale(Complex64::new(0.0, -1.0)))
}

/// `Op w = i sum_ab (Sigma^{-1})_ab d_a d_b w`.
fn second_order_op(w: &TaylorJet, inverse: &[Vec<f64>]) -> TaylorJet {
    let d = w.dim();
    let mut out = TaylorJet::zero(d, w.degree().saturating_sub(2));
    for a in 0..d {
        let da = w.partial(a);
        for b in 0..d {
            let s = inverse[a][b];
            if s == 0.0 {
                continue;
            }
            out = out.add(&da.partial(b).scale(Complex64::new(0.0, s)));
        }
    }
    out
}

/// `L_j u` at the origin.
pub fn apply_lj(lambda: &TaylorJet, u: &TaylorJet, j: usize) -> Result<Complex64> {
    if j == 0 {
        return Ok(u.value_at_zero());
    }
    if lambda.degree() < 2 * j + 2 {
        return Err(CoverError::InsufficientDegree {
            have: lambda.degree(),
            need: 2 * j + 2,
        });
    }
    if u.degree() < 2 * j {
        return Err(CoverError::InsufficientDegree {
            have: u.degree(),
            need: 2 * j,
        });
    }
    let sigma = covariance_from_lambda(lambda)?;
    let g = g_jet(lambda)?;
    let mut total = Complex64::new(0.0, 0.0);
    for mu in 0..=2 * j {
        let nu = j + mu;
        let degree = 2 * nu;
        let gd = g.with_degree(degree);
        let mut w = u.with_degree(degree);
        for _ in 0..mu {
            w = w.mul(&gd);
        }
        for _ in 0..nu {
            w = second_order_op(&w, &sigma.inverse);
        }
        let weight = 2f64.powi(-(nu as i32)) / (factorial(mu) * factorial(nu));
        total += w.value_at_zero() * weight;
    }
    Ok(total * i_pow(-(j as i64)))
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpansionCoefficients {
    pub d: usize,
    pub kappa: f64,
    pub sigma: CovarianceMatrix,
    pub c: Vec<Complex64>,
}

impl ExpansionCoefficients {
    /// `kappa sum_{j < n} c_j t^{-j}`.
    pub fn partial_sum(&self, t: f64, n: usize) -> Complex64 {
        self.c
            .iter()
            .take(n)
            .enumerate()
            .map(|(j, c)| c * t.powi(-(j as i32)))
            .sum::<Complex64>()
            * self.kappa
    }
}

/// `c_j = L_j a` for `j < n`.
pub fn expansion_coefficients(lambda: &TaylorJet, a: &TaylorJet, n: usize) -> Result<ExpansionCoefficients> {
    if n == 0 {
        return Err(CoverError::InvalidArgument("at least one expansion term is required".into()));
    }
    if lambda.degree() < 2 * n + 2 {
        return Err(CoverError::InsufficientDegree {
            have: lambda.degree(),
            need: 2 * n + 2,
        });
    }
    if a.degree() < 2 * n {
        return Err(CoverError::InsufficientDegree {
            have: a.degree(),
            need: 2 * n,
        });
    }
    let sigma = covariance_from_lambda(lambda)?;
    let c = (0..n).map(|j| apply_lj(lambda, a, j)).collect::<Result<Vec<_>>>()?;
    Ok(ExpansionCoefficients {
        d: lambda.dim(),
        kappa: sigma.kappa(),
        sigma,
        c,
    })
}

/// `i^{-j-1} 2^{-j} (j!)^{-1} <Sigma^{-1} xi, xi>^j`.
pub fn symbol_lj(sigma: &CovarianceMatrix, xi: &[f64], j: usize) -> Complex64 {
    let q = sigma.inverse_form(xi);
    i_pow(-(j as i64) - 1) * (2f64.powi(-(j as i32)) / factorial(j) * q.powi(j as i32))
}

/// `L_j(e^{i m.theta} a)(0)`.
pub fn shifted_growth(lambda: &TaylorJet, a: &TaylorJet, m: &[i64], j: usize) -> Result<Complex64> {
    let wave = TaylorJet::plane_wave(a.dim(), a.degree(), m);
    apply_lj(lambda, &wave.mul(a), j)
}

/// `sum_jk (Sigma^{-1})_jk d_j A(0) d_k B(0)`: the first coefficient when both
/// amplitude factors vanish at the origin.
pub fn c1_factorized(sigma: &CovarianceMatrix, a: &TaylorJet, b: &TaylorJet) -> Complex64 {
    let d = sigma.dim();
    let grad = |jet: &TaylorJet, axis: usize| {
        let mut e = vec![0u32; d];
        e[axis] = 1;
        jet.coeff(&e)
    };
    let mut total = Complex64::new(0.0, 0.0);
    for j in 0..d {
        for k in 0..d {
            total += grad(a, j) * grad(b, k) * sigma.inverse[j][k];
        }
    }
    total
}

/// `(2 pi)^{-d} int <M_theta^t F_theta, G_theta>_pi dtheta` for the k = 0
/// parts, on an exact grid.
pub fn direct_q(model: &MarkovModel, f: &CoverObservable, g: &CoverObservable, t: usize) -> Result<Complex64> {
    direct_q_with(model, f, g, t, PowerStrategy::Auto)
}

pub fn direct_q_with(
    model: &MarkovModel,
    f: &CoverObservable,
    g: &CoverObservable,
    t: usize,
    strategy: PowerStrategy,
) -> Result<Complex64> {
    floquet_correlation_with(model, &f.mode_slice(0), &g.mode_slice(0), t, strategy)
}

#[derive(Debug, Clone, Serialize)]
pub struct DriftPrediction {
    pub t: usize,
    pub k: Vec<i64>,
    pub predicted: Complex64,
}

fn validate_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 0.5) {
        return Err(CoverError::InvalidArgument(format!("epsilon={epsilon} outside (0, 1/2]")));
    }
    Ok(())
}

/// Shift `k = round(t^{1/2 - epsilon}) e`.
pub fn drift_shift(t: usize, epsilon: f64, direction: &[i64]) -> Vec<i64> {
    let scale = (t as f64).powf(0.5 - epsilon).round() as i64;
    direction.iter().map(|e| e * scale).collect()
}

/// Prediction of `t^{d/2} <tau_k^* f o T^{-t}, g>` in the regime
/// `|k| ~ t^{1/2 - epsilon}`:
/// `kappa a(0) (1 - |k|^2 / t <Sigma^{-1} k^, k^> / 2)`.
pub fn drift_expansion(
    sigma: &CovarianceMatrix,
    a: &TaylorJet,
    epsilon: f64,
    t: usize,
    direction: &[i64],
) -> Result<DriftPrediction> {
    validate_epsilon(epsilon)?;
    if direction.len() != sigma.dim() || direction.iter().all(|&x| x == 0) {
        return Err(CoverError::InvalidArgument("drift direction must be a nonzero lattice vector".into()));
    }
    let k = drift_shift(t, epsilon, direction);
    let norm2: f64 = k.iter().map(|x| (x * x) as f64).sum();
    let kf: Vec<f64> = k.iter().map(|&x| x as f64).collect();
    // <Sigma^{-1} k, k> = |k|^2 <Sigma^{-1} k^, k^>
    let quad = if norm2 > 0.0 { sigma.inverse_form(&kf) } else { 0.0 };
    let predicted = a.value_at_zero() * sigma.kappa() * (1.0 - 0.5 * quad / t as f64);
    Ok(DriftPrediction { t, k, predicted })
}

#[derive(Debug, Clone, Serialize)]
pub struct DriftPoint {
    pub t: usize,
    pub k: Vec<i64>,
    pub predicted: f64,
    pub exact: f64,
    pub relerr: f64,
}

/// Prediction against the exact shifted correlation for each `t`.
#[allow(clippy::too_many_arguments)]
pub fn drift_comparison(
    model: &MarkovModel,
    f: &CoverObservable,
    g: &CoverObservable,
    sigma: &CovarianceMatrix,
    a: &TaylorJet,
    epsilon: f64,
    t_values: &[usize],
    direction: &[i64],
) -> Result<Vec<DriftPoint>> {
    let half_d = model.dim() as f64 / 2.0;
    t_values
        .iter()
        .map(|&t| {
            let p = drift_expansion(sigma, a, epsilon, t, direction)?;
            let exact = direct_q(model, &f.translated(&p.k), g, t)? * (t as f64).powf(half_d);
            Ok(DriftPoint {
                t,
                k: p.k,
                predicted: p.predicted.re,
                exact: exact.re,
                relerr: (p.predicted - exact).norm() / exact.norm(),
            })
        })
        .collect()
}

/// Grid used for spectral precondition checks.
pub const CHECK_GRID: usize = 64;

/// Rejects models whose twisted matrices have unit spectral radius away from
/// the origin (k = 0) or anywhere (0 < |k| <= k_band).
pub fn check_spectral_preconditions(model: &MarkovModel, k_band: usize) -> Result<()> {
    let grid = ThetaGrid::new(model.dim(), CHECK_GRID)?;
    let limit = 1.0 - DEFAULT_GAP_FLOOR;
    let radii = |k: i64| -> Result<Vec<f64>> {
        (0..grid.node_count())
            .into_par_iter()
            .map(|idx| Ok(eigenvalues_sorted(&twisted_matrix(model, &grid.node(idx), k).entries)?[0].norm()))
            .collect()
    };
    let r0 = radii(0)?;
    if let Some(idx) = (1..r0.len()).find(|&i| r0[i] >= limit) {
        return Err(CoverError::BoundaryCharacter {
            theta: grid.node(idx),
            specrad: r0[idx],
        });
    }
    for k in 1..=k_band as i64 {
        for kk in [k, -k] {
            let r = radii(kk)?;
            if let Some(idx) = (0..r.len()).find(|&i| r[i] >= limit) {
                return Err(CoverError::FiberNotMixing(format!(
                    "mode k={kk} has spectral radius {:.12} at theta={:?}",
                    r[idx],
                    grid.node(idx)
                )));
            }
        }
    }
    Ok(())
}

/// Jets and coefficients for one (model, f, g) pair.
#[derive(Debug, Clone)]
pub struct Expansion {
    pub lambda: FittedJet,
    pub amplitude: FittedJet,
    pub coefficients: ExpansionCoefficients,
}

/// Full pipeline: preconditions, jets of the required degrees, coefficients.
pub fn expand(model: &MarkovModel, f: &CoverObservable, g: &CoverObservable, n: usize, k_band: usize) -> Result<Expansion> {
    require_centered(model)?;
    check_spectral_preconditions(model, k_band)?;
    let lambda = lambda_jet_auto(model, 2 * n + 2)?;
    let amplitude = amplitude_jet_auto(model, f, g, 2 * n)?;
    let coefficients = expansion_coefficients(&lambda.jet, &amplitude.jet, n)?;
    Ok(Expansion {
        lambda,
        amplitude,
        coefficients,
    })
}

/// File form of an expansion.
#[derive(Debug, Clone, Serialize)]
pub struct ExpansionReport {
    pub model: String,
    pub observables: Vec<String>,
    pub d: usize,
    pub kappa: f64,
    #[serde(rename = "Sigma")]
    pub sigma: Vec<Vec<f64>>,
    pub c: Vec<[f64; 2]>,
    pub convention: String,
    pub residual_slopes: Vec<Option<f64>>,
}

impl ExpansionReport {
    pub fn new(model: &str, observables: Vec<String>, coefficients: &ExpansionCoefficients, residual_slopes: Vec<Option<f64>>) -> Self {
        ExpansionReport {
            model: model.to_string(),
            observables,
            d: coefficients.d,
            kappa: coefficients.kappa,
            sigma: coefficients.sigma.sigma.clone(),
            c: coefficients.c.iter().map(|z| [z.re, z.im]).collect(),
            convention: CONVENTION.to_string(),
            residual_slopes,
        }
    }
}
