//! Taylor data of the leading resonance at the origin.
//!
//! Jets of `lambda(theta) = log mu(theta)` and of the amplitude
//! `a(theta) = <Pi_theta F_theta, G_theta>_pi` are obtained by least-squares
//! polynomial fits on symmetric stencils around `theta = 0`. The Hessian of
//! `lambda` is cross-checked against the Green-Kubo covariance computed from
//! the fundamental matrix.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CoverError, Result};
use crate::floquet::{floquet_transform, pi_inner};
use crate::jet::{monomials, order, JetExport, TaylorJet};
use crate::linalg::symmetric_eigenvalues;
use crate::model::{require_centered, MarkovModel};
use crate::observable::CoverObservable;
use crate::twisted::{leading_eigen, projector_pairing, twisted_matrix, EigenTriple};

/// Default stencil spacing.
pub const DEFAULT_H: f64 = 0.05;
/// Lowest polynomial degree used for a fit, whatever the requested order.
const MIN_FIT_DEGREE: usize = 12;
/// Largest admissible gradient of `lambda` at the origin.
pub const DRIFT_TOL: f64 = 1e-8;
/// Relative fit residual above which a stencil is rejected.
const FIT_RESIDUAL_TOL: f64 = 1e-6;

/// A fitted jet with the spacing used and an error estimate from refitting
/// at half the spacing.
#[derive(Debug, Clone)]
pub struct FittedJet {
    pub jet: TaylorJet,
    pub h: f64,
    pub error_estimate: f64,
}

impl FittedJet {
    pub fn export(&self) -> JetExport {
        JetExport {
            order: self.jet.degree(),
            h: self.h,
            error_estimate: self.error_estimate,
            coefficients: self.jet.to_export(),
        }
    }
}

fn fit_degree(order: usize) -> usize {
    (order + 4).max(MIN_FIT_DEGREE)
}

fn stencil_half_width(fit_degree: usize) -> usize {
    (fit_degree + 2).div_ceil(2)
}

/// Nodes of the symmetric `(2m+1)^d` stencil, first axis fastest.
fn stencil_nodes(d: usize, m: usize, h: f64) -> Vec<Vec<f64>> {
    let side = 2 * m + 1;
    let count = side.pow(d as u32);
    (0..count)
        .map(|mut idx| {
            (0..d)
                .map(|_| {
                    let j = (idx % side) as f64 - m as f64;
                    idx /= side;
                    j * h
                })
                .collect()
        })
        .collect()
}

/// Least-squares polynomial fit of `func` around the origin. With
/// `constant`, the value at the origin is imposed.
fn fit_once<F>(d: usize, out_degree: usize, h: f64, constant: Option<Complex64>, func: &F) -> Result<TaylorJet>
where
    F: Fn(&[f64]) -> Result<Complex64> + Sync,
{
    let fdeg = fit_degree(out_degree);
    let m = stencil_half_width(fdeg);
    let radius = m as f64 * h;
    let nodes = stencil_nodes(d, m, h);
    let samples: Vec<Complex64> = nodes.par_iter().map(|t| func(t)).collect::<Result<_>>()?;

    let basis: Vec<Vec<u32>> = monomials(d, fdeg)
        .into_iter()
        .filter(|a| constant.is_none() || order(a) > 0)
        .collect();
    let rows = nodes.len();
    let design = DMatrix::from_fn(rows, basis.len(), |r, c| {
        basis[c]
            .iter()
            .zip(&nodes[r])
            .map(|(&e, &t)| (t / radius).powi(e as i32))
            .product::<f64>()
    });
    let shift = constant.unwrap_or(Complex64::new(0.0, 0.0));
    let rhs_re = DVector::from_iterator(rows, samples.iter().map(|s| (s - shift).re));
    let rhs_im = DVector::from_iterator(rows, samples.iter().map(|s| (s - shift).im));
    let svd = design.clone().svd(true, true);
    let sol_re = svd.solve(&rhs_re, 1e-14).map_err(|e| CoverError::Numerical(e.to_string()))?;
    let sol_im = svd.solve(&rhs_im, 1e-14).map_err(|e| CoverError::Numerical(e.to_string()))?;

    let scale = samples.iter().map(|s| (s - shift).norm()).fold(0.0, f64::max);
    let fit_re = &design * &sol_re;
    let fit_im = &design * &sol_im;
    let residual = (0..rows)
        .map(|r| Complex64::new(fit_re[r] - rhs_re[r], fit_im[r] - rhs_im[r]).norm())
        .fold(0.0, f64::max);
    let tol = FIT_RESIDUAL_TOL * scale.max(1e-300);
    if residual > tol && residual > 1e-13 {
        return Err(CoverError::FitResidual { residual, tol });
    }

    let mut jet = TaylorJet::zero(d, out_degree);
    if let Some(c0) = constant {
        jet.set(&vec![0; d], c0);
    }
    for (c, alpha) in basis.iter().enumerate() {
        if order(alpha) <= out_degree {
            let factor = radius.powi(order(alpha) as i32);
            jet.set(alpha, Complex64::new(sol_re[c], sol_im[c]) / factor);
        }
    }
    Ok(jet)
}

fn fit_with_estimate<F>(d: usize, out_degree: usize, h: f64, constant: Option<Complex64>, func: &F) -> Result<FittedJet>
where
    F: Fn(&[f64]) -> Result<Complex64> + Sync,
{
    let coarse = fit_once(d, out_degree, h, constant, func)?;
    let fine = fit_once(d, out_degree, h / 2.0, constant, func)?;
    Ok(FittedJet {
        error_estimate: 2.0 * coarse.max_diff(&fine) + f64::EPSILON,
        jet: coarse,
        h,
    })
}

/// Tries `h, h/2, h/4, h/8` and keeps the fit with the smallest error
/// estimate.
fn fit_auto<F>(d: usize, out_degree: usize, h: f64, constant: Option<Complex64>, func: &F) -> Result<FittedJet>
where
    F: Fn(&[f64]) -> Result<Complex64> + Sync,
{
    let mut best: Option<FittedJet> = None;
    let mut last_err = None;
    for s in 0..4 {
        match fit_with_estimate(d, out_degree, h / f64::from(1u32 << s), constant, func) {
            Ok(fit) => {
                if best.as_ref().is_none_or(|b| fit.error_estimate < b.error_estimate) {
                    best = Some(fit);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.expect("at least one attempt"))
}

fn log_mu(model: &MarkovModel, theta: &[f64]) -> Result<Complex64> {
    let triple = leading_eigen(&twisted_matrix(model, theta, 0), None)?;
    if triple.mu.re <= 0.0 {
        return Err(CoverError::Numerical(format!(
            "leading eigenvalue {} leaves the right half-plane at theta={theta:?}; reduce h",
            triple.mu
        )));
    }
    Ok(triple.mu.ln())
}

fn check_gradient(jet: &TaylorJet) -> Result<()> {
    let d = jet.dim();
    let drift: Vec<f64> = (0..d)
        .map(|a| {
            let mut e = vec![0; d];
            e[a] = 1;
            jet.coeff(&e).norm()
        })
        .collect();
    if drift.iter().any(|x| *x > DRIFT_TOL) {
        return Err(CoverError::NonCentered { drift });
    }
    Ok(())
}

/// Jet of `lambda = log mu` at the origin with spacing `h`.
pub fn lambda_jet(model: &MarkovModel, order: usize, h: f64) -> Result<FittedJet> {
    require_centered(model)?;
    validate_h(h)?;
    let fit = fit_with_estimate(model.dim(), order.max(2), h, Some(Complex64::new(0.0, 0.0)), &|t: &[f64]| {
        log_mu(model, t)
    })?;
    check_gradient(&fit.jet)?;
    Ok(truncate_fit(fit, order))
}

/// [`lambda_jet`] with the spacing chosen among `DEFAULT_H / 2^s`.
pub fn lambda_jet_auto(model: &MarkovModel, order: usize) -> Result<FittedJet> {
    require_centered(model)?;
    let fit = fit_auto(model.dim(), order.max(2), DEFAULT_H, Some(Complex64::new(0.0, 0.0)), &|t: &[f64]| {
        log_mu(model, t)
    })?;
    check_gradient(&fit.jet)?;
    Ok(truncate_fit(fit, order))
}

fn truncate_fit(fit: FittedJet, order: usize) -> FittedJet {
    FittedJet {
        jet: fit.jet.truncate(order),
        ..fit
    }
}

fn validate_h(h: f64) -> Result<()> {
    if !(h > 0.0 && h <= 0.2) {
        return Err(CoverError::InvalidArgument(format!("stencil spacing h={h} outside (0, 0.2]")));
    }
    Ok(())
}

/// The k = 0 Floquet transforms of `f` and `g` at `theta`.
fn transforms(model: &MarkovModel, f: &CoverObservable, g: &CoverObservable, theta: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
    let n = model.state_count();
    (floquet_transform(f, theta, 0, n), floquet_transform(g, theta, 0, n))
}

fn check_observables(model: &MarkovModel, f: &CoverObservable, g: &CoverObservable) -> Result<()> {
    for obs in [f, g] {
        obs.check_states(model.state_count())?;
        if !obs.is_empty() && obs.dim() != model.dim() {
            return Err(CoverError::Config(format!(
                "observable dimension {} does not match model dimension {}",
                obs.dim(),
                model.dim()
            )));
        }
    }
    Ok(())
}

fn triple_at(model: &MarkovModel, theta: &[f64]) -> Result<EigenTriple> {
    leading_eigen(&twisted_matrix(model, theta, 0), None)
}

/// `a(theta) = <F_theta, v_theta>_pi <u_theta, G_theta>_pi` at one point.
pub fn amplitude_at(model: &MarkovModel, f: &CoverObservable, g: &CoverObservable, theta: &[f64]) -> Result<Complex64> {
    let triple = triple_at(model, theta)?;
    let (ft, gt) = transforms(model, f, g, theta);
    Ok(projector_pairing(&triple, &ft, &gt, model.pi()))
}

/// Jet of the amplitude for the k = 0 parts of `f` and `g`.
pub fn amplitude_jet(model: &MarkovModel, f: &CoverObservable, g: &CoverObservable, order: usize, h: f64) -> Result<FittedJet> {
    amplitude_generic(model, f, g, order, Some(h), projector_pairing)
}

pub fn amplitude_jet_auto(model: &MarkovModel, f: &CoverObservable, g: &CoverObservable, order: usize) -> Result<FittedJet> {
    amplitude_generic(model, f, g, order, None, projector_pairing)
}

/// Jets of the two factors `A = <F_theta, v_theta>_pi` and
/// `B = <u_theta, G_theta>_pi` of the amplitude, with `u` normalized by
/// `sum pi u = 1`.
pub fn amplitude_factor_jets(
    model: &MarkovModel,
    f: &CoverObservable,
    g: &CoverObservable,
    order: usize,
) -> Result<(FittedJet, FittedJet)> {
    let a = amplitude_generic(model, f, g, order, None, |triple, ft, _, pi| pi_inner(ft, &triple.v, pi))?;
    let b = amplitude_generic(model, f, g, order, None, |triple, _, gt, pi| pi_inner(&triple.u, gt, pi))?;
    Ok((a, b))
}

fn amplitude_generic<P>(
    model: &MarkovModel,
    f: &CoverObservable,
    g: &CoverObservable,
    order: usize,
    h: Option<f64>,
    pairing: P,
) -> Result<FittedJet>
where
    P: Fn(&EigenTriple, &[Complex64], &[Complex64], &[f64]) -> Complex64 + Sync,
{
    require_centered(model)?;
    check_observables(model, f, g)?;
    let f0 = f.mode_slice(0);
    let g0 = g.mode_slice(0);
    let d = model.dim();
    let eval = |theta: &[f64]| -> Result<Complex64> {
        let triple = triple_at(model, theta)?;
        let (ft, gt) = transforms(model, &f0, &g0, theta);
        Ok(pairing(&triple, &ft, &gt, model.pi()))
    };
    let origin = eval(&vec![0.0; d])?;
    match h {
        Some(h) => {
            validate_h(h)?;
            fit_with_estimate(d, order, h, Some(origin), &eval)
        }
        None => fit_auto(d, order, DEFAULT_H, Some(origin), &eval),
    }
}

/// Symmetric positive-definite covariance with cached determinant and
/// inverse.
#[derive(Debug, Clone, Serialize)]
pub struct CovarianceMatrix {
    pub sigma: Vec<Vec<f64>>,
    pub det: f64,
    pub inverse: Vec<Vec<f64>>,
}

impl CovarianceMatrix {
    pub fn new(sigma: DMatrix<f64>) -> Result<Self> {
        let d = sigma.nrows();
        if sigma.ncols() != d || d == 0 {
            return Err(CoverError::DegenerateCovariance("covariance must be square and nonempty".into()));
        }
        let asym = (&sigma - sigma.transpose()).abs().max();
        if asym > 1e-12 * sigma.abs().max().max(1.0) {
            return Err(CoverError::DegenerateCovariance(format!("asymmetry {asym:e}")));
        }
        let sym = (&sigma + sigma.transpose()) * 0.5;
        let eig = symmetric_eigenvalues(&sym);
        if eig[0] <= 1e-10 {
            return Err(CoverError::DegenerateCovariance(format!(
                "smallest eigenvalue {:e} is not positive",
                eig[0]
            )));
        }
        let inverse = sym
            .clone()
            .try_inverse()
            .ok_or_else(|| CoverError::DegenerateCovariance("singular covariance".into()))?;
        let inverse = (&inverse + inverse.transpose()) * 0.5;
        Ok(CovarianceMatrix {
            det: sym.determinant(),
            sigma: rows_of(&sym),
            inverse: rows_of(&inverse),
        })
    }

    pub fn dim(&self) -> usize {
        self.sigma.len()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        from_rows(&self.sigma)
    }

    pub fn inverse_matrix(&self) -> DMatrix<f64> {
        from_rows(&self.inverse)
    }

    /// `<Sigma^{-1} xi, xi>`.
    pub fn inverse_form(&self, xi: &[f64]) -> f64 {
        let d = self.dim();
        (0..d)
            .flat_map(|a| (0..d).map(move |b| (a, b)))
            .map(|(a, b)| self.inverse[a][b] * xi[a] * xi[b])
            .sum()
    }

    /// Leading constant `(2 pi)^{-d/2} det(Sigma)^{-1/2}`.
    pub fn kappa(&self) -> f64 {
        (2.0 * std::f64::consts::PI).powf(-(self.dim() as f64) / 2.0) / self.det.sqrt()
    }
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let d = rows.len();
    DMatrix::from_fn(d, d, |i, j| rows[i][j])
}

/// Real Hessian of a jet at the origin.
pub fn hessian(jet: &TaylorJet) -> DMatrix<f64> {
    let d = jet.dim();
    DMatrix::from_fn(d, d, |a, b| {
        let mut alpha = vec![0u32; d];
        alpha[a] += 1;
        alpha[b] += 1;
        let c = jet.coeff(&alpha).re;
        if a == b {
            2.0 * c
        } else {
            c
        }
    })
}

/// `Sigma = -lambda''(0)` from a lambda jet.
pub fn covariance_from_lambda(jet: &TaylorJet) -> Result<CovarianceMatrix> {
    CovarianceMatrix::new(-hessian(jet))
}

/// Asymptotic covariance of the lattice displacement from the fundamental
/// matrix `Z = (I - P + 1 pi)^{-1}`.
pub fn green_kubo_covariance(model: &MarkovModel) -> Result<CovarianceMatrix> {
    require_centered(model)?;
    let n = model.state_count();
    let d = model.dim();
    let p = model.transition_matrix();
    let pi = model.pi();
    let one_pi = DMatrix::from_fn(n, n, |_, j| pi[j]);
    let z = (DMatrix::<f64>::identity(n, n) - &p + one_pi)
        .try_inverse()
        .ok_or_else(|| CoverError::Numerical("fundamental matrix is singular".into()))?;

    // mean step out of each state, per axis
    let mut mean = DMatrix::<f64>::zeros(n, d);
    for e in model.edges() {
        for a in 0..d {
            mean[(e.src, a)] += e.prob * e.psi[a] as f64;
        }
    }
    let zm = &z * &mean;
    let mut sigma = DMatrix::<f64>::zeros(d, d);
    for e in model.edges() {
        let w = pi[e.src] * e.prob;
        for a in 0..d {
            for b in 0..d {
                let pa = e.psi[a] as f64;
                let pb = e.psi[b] as f64;
                sigma[(a, b)] += w * (pa * pb + pa * zm[(e.dst, b)] + pb * zm[(e.dst, a)]);
            }
        }
    }
    CovarianceMatrix::new(sigma)
}

/// `max |(-Hessian of lambda) - Sigma_GK|`.
pub fn hessian_check(model: &MarkovModel) -> Result<f64> {
    let lam = lambda_jet_auto(model, 2)?;
    let gk = green_kubo_covariance(model)?.matrix();
    Ok((-hessian(&lam.jet) - gk).abs().max())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::ModelConfig;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn stencil_geometry() {
        let nodes = stencil_nodes(2, 1, 0.5);
        assert_eq!(nodes.len(), 9);
        assert_eq!(nodes[0], vec![-0.5, -0.5]);
        assert_eq!(nodes[4], vec![0.0, 0.0]);
        assert_eq!(stencil_half_width(12), 7);
    }

    #[test]
    fn lazy_walk_lambda_series() {
        let fit = lambda_jet(&fixtures::lazy_walk(), 4, DEFAULT_H).unwrap();
        let j = &fit.jet;
        assert_eq!(j.coeff(&[0]), c(0.0));
        assert!((j.coeff(&[2]) - c(-0.25)).norm() < 1e-9);
        assert!((j.coeff(&[4]) - c(-1.0 / 96.0)).norm() < 1e-9);
        assert!(j.coeff(&[1]).norm() < 1e-9 && j.coeff(&[3]).norm() < 1e-9);
        assert!(fit.error_estimate < 1e-9);
    }

    #[test]
    fn lazy_walk_high_order_coefficients() {
        let fit = lambda_jet(&fixtures::lazy_walk(), 8, DEFAULT_H).unwrap();
        assert!((fit.jet.coeff(&[6]) - c(-1.0 / 1440.0)).norm() < 1e-9);
        // lambda = 2 log cos(theta/2) and log cos x has x^8 coefficient -17/2520
        let expected = 2.0 * (-17.0 / 2520.0) / 256.0;
        assert!((fit.jet.coeff(&[8]) - c(expected)).norm() < 1e-8);
    }

    #[test]
    fn fair_coin_lambda_is_log_cos() {
        let fit = lambda_jet(&fixtures::fair_coin(), 4, DEFAULT_H).unwrap();
        assert!((fit.jet.coeff(&[2]) - c(-0.5)).norm() < 1e-9);
        assert!((fit.jet.coeff(&[4]) - c(-1.0 / 12.0)).norm() < 1e-9);
    }

    #[test]
    fn product_hessian_is_diagonal() {
        let fit = lambda_jet(&fixtures::lazy_walk_2d(), 4, DEFAULT_H).unwrap();
        let h = hessian(&fit.jet);
        assert!((h[(0, 0)] + 0.5).abs() < 1e-9);
        assert!((h[(1, 1)] + 0.5).abs() < 1e-9);
        assert!(h[(0, 1)].abs() < 1e-9);
    }

    #[test]
    fn non_centered_model_is_rejected() {
        let err = lambda_jet(&fixtures::biased_coin(), 4, DEFAULT_H).unwrap_err();
        assert!(err.to_string().starts_with("non-centered model"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn halving_h_stays_within_error_estimate() {
        let model = fixtures::random_model(4, 1, 9, true);
        let fit = lambda_jet(&model, 4, 0.0125).unwrap();
        let half = lambda_jet(&model, 4, 0.00625).unwrap();
        assert!(fit.jet.max_diff(&half.jet) <= fit.error_estimate);
    }

    #[test]
    fn delta_amplitude_is_constant_one() {
        let f = CoverObservable::delta(1, 0, &[0], 0);
        let fit = amplitude_jet(&fixtures::lazy_walk(), &f, &f, 4, DEFAULT_H).unwrap();
        assert_eq!(fit.jet.value_at_zero(), c(1.0));
        for alpha in monomials(1, 4).into_iter().skip(1) {
            assert!(fit.jet.coeff(&alpha).norm() < 1e-10);
        }
    }

    #[test]
    fn amplitude_at_origin_is_product_of_integrals() {
        let model = fixtures::random_model(4, 1, 3, true);
        let f = CoverObservable::random(1, 4, 1, 2, 0, 6);
        let g = CoverObservable::random(2, 4, 1, 2, 0, 6);
        let fit = amplitude_jet(&model, &f, &g, 2, 0.0125).unwrap();
        let expected = f.integral(model.pi()) * g.integral(model.pi()).conj();
        assert!((fit.jet.value_at_zero() - expected).norm() < 1e-12);
    }

    #[test]
    fn zero_mean_observable_has_vanishing_amplitude() {
        let model = fixtures::random_model(3, 1, 4, true);
        let pi = model.pi().to_vec();
        let f = CoverObservable::zero(1)
            .with(0, &[0], 0, c(pi[1]))
            .with(1, &[1], 0, c(-pi[0]));
        let g = CoverObservable::delta(1, 2, &[0], 0);
        let a0 = amplitude_at(&model, &f, &g, &[0.0]).unwrap();
        assert!(a0.norm() < 1e-14);
    }

    #[test]
    fn shifted_amplitude_is_plane_wave_times_amplitude() {
        let model = fixtures::random_model(3, 1, 6, true);
        let f = CoverObservable::random(5, 3, 1, 1, 0, 4);
        let g = CoverObservable::random(6, 3, 1, 1, 0, 4);
        let m = [2i64];
        let base = amplitude_jet(&model, &f, &g, 4, 0.0125).unwrap();
        let shifted = amplitude_jet(&model, &f.translated(&m), &g, 4, 0.0125).unwrap();
        let expected = TaylorJet::plane_wave(1, 4, &m).mul(&base.jet);
        assert!(shifted.jet.max_diff(&expected) < 1e-8);
    }

    #[test]
    fn factor_jets_multiply_to_the_amplitude() {
        let model = fixtures::random_model(4, 1, 8, true);
        let f = CoverObservable::random(7, 4, 1, 1, 0, 5);
        let g = CoverObservable::random(8, 4, 1, 1, 0, 5);
        let (a, b) = amplitude_factor_jets(&model, &f, &g, 4).unwrap();
        let full = amplitude_jet_auto(&model, &f, &g, 4).unwrap();
        assert!(a.jet.mul(&b.jet).max_diff(&full.jet) < 1e-8);
    }

    #[test]
    fn green_kubo_closed_forms() {
        let lazy = green_kubo_covariance(&fixtures::lazy_walk()).unwrap();
        assert!((lazy.sigma[0][0] - 0.5).abs() < 1e-14);
        assert!((lazy.kappa() - 1.0 / std::f64::consts::PI.sqrt()).abs() < 1e-14);
        let coin = green_kubo_covariance(&fixtures::fair_coin()).unwrap();
        assert!((coin.sigma[0][0] - 1.0).abs() < 1e-14);
        let prod = green_kubo_covariance(&fixtures::lazy_walk_2d()).unwrap();
        assert!((prod.sigma[0][0] - 0.5).abs() < 1e-14 && (prod.sigma[1][1] - 0.5).abs() < 1e-14);
        assert!(prod.sigma[0][1].abs() < 1e-14);
    }

    #[test]
    fn hessian_matches_green_kubo() {
        assert!(hessian_check(&fixtures::lazy_walk()).unwrap() < 1e-9);
        assert!(hessian_check(&fixtures::fair_coin()).unwrap() < 1e-9);
        assert!(hessian_check(&fixtures::random_model(5, 2, 1, true)).unwrap() < 1e-6);
    }

    #[test]
    fn correlated_two_state_chain_green_kubo() {
        // sticky chain: steps +1 in state 0, -1 in state 1, stay with prob 0.9.
        // The step sequence is a two-state Markov chain with correlation
        // 0.8^t, so Sigma = 1 + 2 * sum 0.8^t = 1 + 2 * 4 = 9.
        let cfg = ModelConfig::new("sticky", 1, 2)
            .edge(0, 0, 0.9, &[1])
            .edge(0, 1, 0.1, &[-1])
            .edge(1, 1, 0.9, &[-1])
            .edge(1, 0, 0.1, &[1]);
        let model = crate::model::build_model(&cfg).unwrap();
        let gk = green_kubo_covariance(&model).unwrap();
        assert!((gk.sigma[0][0] - 9.0).abs() < 1e-12, "{}", gk.sigma[0][0]);
        assert!(hessian_check(&model).unwrap() < 1e-6);
    }

    #[test]
    fn degenerate_covariance_is_rejected() {
        let err = CovarianceMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0])).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn jet_export_fields() {
        let fit = lambda_jet(&fixtures::lazy_walk(), 2, DEFAULT_H).unwrap();
        let v = serde_json::to_value(fit.export()).unwrap();
        assert_eq!(v["order"], 2);
        assert!(v["coefficients"]["2"][0].as_f64().unwrap() + 0.25 < 1e-9);
        assert!(v["error_estimate"].as_f64().unwrap() >= 0.0);
    }
}
