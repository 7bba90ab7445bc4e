//! Twisted transfer matrices `M_{theta,k}` and their leading spectral data.
//!
//! `M_{theta,k}[i][j] = sum_{edges i->j} p e^{i theta.psi} e^{i k phi}`. The
//! correlation of Floquet components evolves as `<M^t F, G>_pi`, and near
//! `theta = 0` it is governed by the leading eigenvalue `mu(theta)` and the
//! rank-one projector `F -> <F, v>_pi u`.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CoverError, Result};
use crate::floquet::{pi_inner, ThetaGrid};
use crate::linalg::{eigenvalues_sorted, eigenvectors_at, CMatrix};
use crate::model::MarkovModel;

/// Minimum separation of the selected eigenvalue from the rest of the
/// spectrum for [`leading_eigen`].
pub const EIGEN_SEPARATION_FLOOR: f64 = 1e-10;
/// Default spectral-gap floor for resonance surfaces.
pub const DEFAULT_GAP_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct TwistedMatrix {
    pub theta: Vec<f64>,
    pub k: i64,
    pub entries: CMatrix,
    pi: Vec<f64>,
}

impl TwistedMatrix {
    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.size();
        (0..n)
            .map(|i| (0..n).map(|j| self.entries[(i, j)] * x[j]).sum())
            .collect()
    }

    /// Largest row sum of entry moduli.
    pub fn row_abs_sum(&self) -> f64 {
        (0..self.size())
            .map(|i| self.entries.row(i).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

pub fn twisted_matrix(model: &MarkovModel, theta: &[f64], k: i64) -> TwistedMatrix {
    assert_eq!(theta.len(), model.dim(), "theta has wrong dimension");
    let n = model.state_count();
    let mut m = CMatrix::zeros(n, n);
    for e in model.edges() {
        let arg: f64 = e.psi.iter().zip(theta).map(|(&p, &t)| p as f64 * t).sum::<f64>()
            + k as f64 * e.phi;
        m[(e.src, e.dst)] += Complex64::from_polar(e.prob, arg);
    }
    TwistedMatrix {
        theta: theta.to_vec(),
        k,
        entries: m,
        pi: model.pi().to_vec(),
    }
}

/// Leading eigenvalue with right eigenvector `u` and pi-adjoint left
/// eigenvector `v`, normalized so that `<u, v>_pi = 1`.
#[derive(Debug, Clone)]
pub struct EigenTriple {
    pub mu: Complex64,
    pub u: Vec<Complex64>,
    pub v: Vec<Complex64>,
    /// `|mu|` minus the largest modulus among the other eigenvalues.
    pub gap: f64,
    /// Largest modulus among the other eigenvalues.
    pub second_modulus: f64,
}

impl EigenTriple {
    /// The rank-one spectral projector applied to `x`.
    pub fn project(&self, x: &[Complex64], pi: &[f64]) -> Vec<Complex64> {
        let c = pi_inner(x, &self.v, pi);
        self.u.iter().map(|ui| ui * c).collect()
    }
}

/// Leading eigen-triple. Without a seed the eigenvalue of largest modulus is
/// taken; with a seed the eigenvalue closest to `seed.mu` is followed.
pub fn leading_eigen(m: &TwistedMatrix, seed: Option<&EigenTriple>) -> Result<EigenTriple> {
    let ev = eigenvalues_sorted(&m.entries)?;
    let chosen = match seed {
        None => 0,
        Some(s) => closest(&ev, s.mu),
    };
    let mu0 = ev[chosen];
    let others: Vec<Complex64> = ev
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != chosen)
        .map(|(_, z)| *z)
        .collect();
    let second_modulus = others.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let gap = mu0.norm() - second_modulus;
    let separation = match seed {
        _ if others.is_empty() => f64::INFINITY,
        None => gap,
        Some(_) => others.iter().map(|z| (z - mu0).norm()).fold(f64::INFINITY, f64::min),
    };
    if separation <= EIGEN_SEPARATION_FLOOR {
        return Err(CoverError::NearDegenerate { gap: separation });
    }
    eigen_triple_at(m, mu0, gap, second_modulus)
}

fn closest(ev: &[Complex64], target: Complex64) -> usize {
    ev.iter()
        .enumerate()
        .min_by(|a, b| {
            (a.1 - target)
                .norm()
                .partial_cmp(&(b.1 - target).norm())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .map(|(i, _)| i)
        .unwrap_or(0)
}

fn eigen_triple_at(m: &TwistedMatrix, mu0: Complex64, gap: f64, second_modulus: f64) -> Result<EigenTriple> {
    let n = m.size();
    let pi = &m.pi;
    let (right, left) = eigenvectors_at(&m.entries, mu0)?;
    let wu: Complex64 = left.iter().zip(right.iter()).map(|(a, b)| a * b).sum();
    if wu.norm() < 1e-10 {
        return Err(CoverError::NearDegenerate { gap: wu.norm() });
    }
    // Rayleigh quotient sharpens the eigenvalue from the Schur estimate.
    let mr = &m.entries * &right;
    let wmr: Complex64 = left.iter().zip(mr.iter()).map(|(a, b)| a * b).sum();
    let mu = wmr / wu;

    let mut u: Vec<Complex64> = right.iter().copied().collect();
    let mass: Complex64 = u.iter().zip(pi).map(|(x, w)| x * *w).sum();
    if mass.norm() > 1e-8 {
        u.iter_mut().for_each(|x| *x /= mass);
    } else {
        let (imax, _) = u
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap_or(std::cmp::Ordering::Equal))
            .expect("nonempty");
        let ph = u[imax] / u[imax].norm();
        let nrm = u.iter().zip(pi).map(|(x, w)| x.norm_sqr() * w).sum::<f64>().sqrt();
        u.iter_mut().for_each(|x| *x /= ph * nrm);
    }
    let mut v: Vec<Complex64> = (0..n).map(|i| left[i].conj() / pi[i]).collect();
    let uv = pi_inner(&u, &v, pi);
    v.iter_mut().for_each(|x| *x /= uv.conj());
    Ok(EigenTriple {
        mu,
        u,
        v,
        gap,
        second_modulus,
    })
}

/// `<F, v>_pi <u, G>_pi`.
pub fn projector_pairing(triple: &EigenTriple, f: &[Complex64], g: &[Complex64], pi: &[f64]) -> Complex64 {
    pi_inner(f, &triple.v, pi) * pi_inner(&triple.u, g, pi)
}

#[derive(Debug, Clone, Copy)]
pub struct SurfaceOptions {
    pub gap_floor: f64,
    /// Multiplier on `spacing * |dM/dtheta|` bounding a jump between
    /// neighbouring nodes.
    pub continuity_factor: f64,
}

impl Default for SurfaceOptions {
    fn default() -> Self {
        SurfaceOptions {
            gap_floor: DEFAULT_GAP_FLOOR,
            continuity_factor: 10.0,
        }
    }
}

/// Branch-continued leading eigenvalue over a torus grid.
#[derive(Debug, Clone, Serialize)]
pub struct ResonanceSurface {
    #[serde(skip)]
    pub grid: ThetaGrid,
    pub k: i64,
    pub mu: Vec<Complex64>,
    pub specrad: Vec<f64>,
    pub gap: Vec<f64>,
    pub gap_ok: Vec<bool>,
}

/// Largest row sum of `|p| * |psi|_1`, a bound on `|dM/dtheta|`.
fn twist_gradient_bound(model: &MarkovModel) -> f64 {
    let mut rows = vec![0.0; model.state_count()];
    for e in model.edges() {
        rows[e.src] += e.prob * e.psi.iter().map(|x| x.abs() as f64).sum::<f64>();
    }
    rows.into_iter().fold(0.0, f64::max)
}

pub fn resonance_surface(
    model: &MarkovModel,
    grid: &ThetaGrid,
    k: i64,
    options: SurfaceOptions,
) -> Result<ResonanceSurface> {
    assert_eq!(grid.dim(), model.dim(), "grid dimension must match the model");
    let count = grid.node_count();
    let spectra: Vec<Vec<Complex64>> = (0..count)
        .into_par_iter()
        .map(|idx| eigenvalues_sorted(&twisted_matrix(model, &grid.node(idx), k).entries))
        .collect::<Result<_>>()?;

    let bound = options.continuity_factor * grid.spacing() * twist_gradient_bound(model).max(1e-3);
    let mut order: Vec<usize> = (0..count).collect();
    order.sort_by_key(|&idx| (grid.layer(idx), idx));

    let mut mu = vec![Complex64::new(0.0, 0.0); count];
    let mut chosen = vec![0usize; count];
    for &idx in &order {
        if idx == 0 {
            mu[0] = spectra[0][0];
            continue;
        }
        let paths = predecessors(grid, idx);
        let seed = paths
            .iter()
            .map(|&(p1, p2)| match p2 {
                Some(p2) => mu[p1] * 2.0 - mu[p2],
                None => mu[p1],
            })
            .sum::<Complex64>()
            / paths.len() as f64;
        let c = closest_signed(&spectra[idx], seed, k);
        let jump = paths
            .iter()
            .map(|&(p1, _)| (spectra[idx][c] - mu[p1]).norm())
            .fold(f64::INFINITY, f64::min);
        if jump > bound {
            return Err(CoverError::BranchCrossing {
                theta: grid.node(idx),
                jump,
                bound,
            });
        }
        mu[idx] = spectra[idx][c];
        chosen[idx] = c;
    }

    let mut specrad = Vec::with_capacity(count);
    let mut gap = Vec::with_capacity(count);
    let mut gap_ok = Vec::with_capacity(count);
    for idx in 0..count {
        let ev = &spectra[idx];
        let rho = ev[0].norm();
        let second = ev
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != chosen[idx])
            .map(|(_, z)| z.norm())
            .fold(0.0, f64::max);
        let g = mu[idx].norm() - second;
        let origin = idx == 0 && k == 0;
        let ok = (ev.len() == 1 || g > options.gap_floor) && (origin || rho < 1.0 - options.gap_floor);
        specrad.push(rho);
        gap.push(g);
        gap_ok.push(ok);
    }
    Ok(ResonanceSurface {
        grid: grid.clone(),
        k,
        mu,
        specrad,
        gap,
        gap_ok,
    })
}

/// Previous one and two nodes on the continuation path from the origin:
/// step toward the origin along the first nonzero axis whose step does not
/// land on a self-conjugate node (all coordinates 0 or pi) other than the
/// origin. At such nodes a real twisted matrix can have a conjugate pair on
/// top, and passing through them would make the branch depend on the side
/// of approach. A coordinate at pi has two steps toward the origin and both
/// paths are returned. Both rules commute with `theta -> -theta`.
fn predecessors(grid: &ThetaGrid, idx: usize) -> Vec<(usize, Option<usize>)> {
    let n = grid.points_per_axis();
    let coords = grid.node_index(idx);
    let down = |j: usize| if 2 * j <= n { j - 1 } else { (j + 1) % n };
    let up = |j: usize| if 2 * j >= n { (j + 1) % n } else { j - 1 };
    let self_conjugate = |c: &[usize]| c.iter().any(|&j| j != 0) && c.iter().all(|&j| j == 0 || 2 * j == n);
    let stepped = |axis: usize| {
        let mut c = coords.clone();
        c[axis] = down(coords[axis]);
        c
    };
    let nonzero: Vec<usize> = (0..coords.len()).filter(|&a| coords[a] != 0).collect();
    assert!(!nonzero.is_empty(), "not the origin");
    let axis = nonzero
        .iter()
        .copied()
        .find(|&a| !self_conjugate(&stepped(a)))
        .unwrap_or(nonzero[0]);
    let mut steps: Vec<&dyn Fn(usize) -> usize> = vec![&down];
    if 2 * coords[axis] == n && n > 2 {
        steps.push(&up);
    }
    steps
        .into_iter()
        .map(|step| {
            let mut c1 = coords.clone();
            c1[axis] = step(coords[axis]);
            let p1 = grid.flat_index(&c1);
            let p2 = (c1[axis] != 0)
                .then(|| {
                    let mut c2 = c1.clone();
                    c2[axis] = step(c1[axis]);
                    c2
                })
                .filter(|c2| !self_conjugate(c2))
                .map(|c2| grid.flat_index(&c2));
            (p1, p2)
        })
        .collect()
}

/// Nearest eigenvalue to `target`; exact ties go to the larger imaginary
/// part for `k >= 0` and the smaller for `k < 0`, so that conjugate inputs
/// give conjugate choices.
fn closest_signed(ev: &[Complex64], target: Complex64, k: i64) -> usize {
    let best = ev.iter().map(|z| (z - target).norm()).fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * (1.0 + best);
    let sign = if k < 0 { -1.0 } else { 1.0 };
    (0..ev.len())
        .filter(|&i| (ev[i] - target).norm() <= best + tol)
        .max_by(|&a, &b| (sign * ev[a].im).total_cmp(&(sign * ev[b].im)))
        .unwrap_or(0)
}

impl ResonanceSurface {
    /// Largest spectral radius over grid nodes, excluding the origin when
    /// `k = 0`.
    pub fn max_specrad_off_origin(&self) -> f64 {
        self.specrad
            .iter()
            .enumerate()
            .filter(|(i, _)| !(self.k == 0 && *i == 0))
            .map(|(_, r)| *r)
            .fold(0.0, f64::max)
    }

    pub fn all_gap_ok(&self) -> bool {
        self.gap_ok.iter().all(|&b| b)
    }

    /// Nodes whose gap flag is false.
    pub fn flagged_nodes(&self) -> Vec<usize> {
        (0..self.gap_ok.len()).filter(|&i| !self.gap_ok[i]).collect()
    }

    /// CSV with columns theta_1..theta_d, k, mu_re, mu_im, specrad, gap, gap_ok.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let d = self.grid.dim();
        let mut header: Vec<String> = (1..=d).map(|a| format!("theta_{a}")).collect();
        header.extend(
            ["k", "mu_re", "mu_im", "specrad", "gap", "gap_ok"]
                .iter()
                .map(|s| s.to_string()),
        );
        writeln!(out, "{}", header.join(","))?;
        for idx in 0..self.mu.len() {
            let theta: Vec<String> = self.grid.node(idx).iter().map(|t| format!("{t:.17e}")).collect();
            let mut row = theta;
            row.push(self.k.to_string());
            row.push(format!("{:.17e}", self.mu[idx].re));
            row.push(format!("{:.17e}", self.mu[idx].im));
            row.push(format!("{:.17e}", self.specrad[idx]));
            row.push(format!("{:.17e}", self.gap[idx]));
            row.push(self.gap_ok[idx].to_string());
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// `max_{1 <= t <= t_max} |<M^t F, G>_pi - mu^t a| / rho_2^t`.
///
/// The remainder `M^t (I - Pi) F` is propagated directly with the leading
/// component projected out at every step, so the ratio stays meaningful
/// long after `rho_2^t` falls below machine precision relative to `mu^t`.
/// When the rest of the spectrum is zero the absolute residual is returned.
pub fn per_theta_decay_check(
    model: &MarkovModel,
    theta: &[f64],
    k: i64,
    f: &[Complex64],
    g: &[Complex64],
    t_max: usize,
) -> Result<f64> {
    let m = twisted_matrix(model, theta, k);
    let triple = leading_eigen(&m, None)?;
    let pi = model.pi();
    let deflate = |x: &[Complex64]| -> Vec<Complex64> {
        let p = triple.project(x, pi);
        x.iter().zip(&p).map(|(a, b)| a - b).collect()
    };
    let rho2 = triple.second_modulus;
    let absolute = rho2 < 1e-12;
    let mut y = deflate(f);
    let mut log_scale = 0.0f64;
    let mut worst = 0.0f64;
    for t in 1..=t_max {
        y = deflate(&m.apply(&y));
        let norm = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        if !absolute {
            y.iter_mut().for_each(|z| *z /= norm);
            log_scale += norm.ln();
        }
        let r = pi_inner(&y, g, pi).norm();
        let ratio = if absolute {
            r
        } else if r == 0.0 {
            0.0
        } else {
            (r.ln() + log_scale - t as f64 * rho2.ln()).exp()
        };
        worst = worst.max(ratio);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn lazy_walk_twist_at_quarter_turn() {
        let m = twisted_matrix(&fixtures::lazy_walk(), &[PI / 2.0], 0);
        assert!((m.entries[(0, 0)] - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn fair_coin_twist_rows() {
        let theta = 0.7;
        let m = twisted_matrix(&fixtures::fair_coin(), &[theta], 0);
        for i in 0..2 {
            assert!((m.entries[(i, 0)] - Complex64::from_polar(0.5, theta)).norm() < 1e-15);
            assert!((m.entries[(i, 1)] - Complex64::from_polar(0.5, -theta)).norm() < 1e-15);
        }
    }

    #[test]
    fn untwisted_matrix_is_p_and_twists_contract() {
        let model = fixtures::random_model_with_fiber(6, 2, 4, true, true);
        let m0 = twisted_matrix(&model, &[0.0, 0.0], 0);
        let p = model.transition_matrix();
        for i in 0..6 {
            for j in 0..6 {
                assert!((m0.entries[(i, j)] - c(p[(i, j)], 0.0)).norm() <= 1e-15);
            }
        }
        for (theta, k) in [([0.3, -2.0], 1), ([3.0, 1.0], -2)] {
            assert!(twisted_matrix(&model, &theta, k).row_abs_sum() <= 1.0 + 1e-15);
        }
    }

    #[test]
    fn lazy_walk_leading_eigen() {
        let t = leading_eigen(&twisted_matrix(&fixtures::lazy_walk(), &[PI / 2.0], 0), None).unwrap();
        assert!((t.mu - c(0.5, 0.0)).norm() < 1e-15);
        assert!((t.u[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((t.v[0] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn fair_coin_leading_eigen_is_cosine() {
        let model = fixtures::fair_coin();
        for theta in [0.2, 1.0, 2.5, -0.4] {
            let t = leading_eigen(&twisted_matrix(&model, &[theta], 0), None).unwrap();
            assert!((t.mu - c(f64::cos(theta), 0.0)).norm() < 1e-13, "{theta}: {}", t.mu);
        }
    }

    #[test]
    fn triple_at_origin_is_trivial() {
        let model = fixtures::random_model(5, 2, 17, true);
        let t = leading_eigen(&twisted_matrix(&model, &[0.0, 0.0], 0), None).unwrap();
        assert!((t.mu - c(1.0, 0.0)).norm() < 1e-13);
        for i in 0..5 {
            assert!((t.u[i] - c(1.0, 0.0)).norm() < 1e-12);
            assert!((t.v[i] - c(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn triple_satisfies_eigen_equations() {
        let model = fixtures::random_model_with_fiber(6, 1, 23, true, true);
        let m = twisted_matrix(&model, &[0.4], 1);
        let t = leading_eigen(&m, None).unwrap();
        let pi = model.pi();
        let mu_u: Vec<Complex64> = t.u.iter().map(|x| x * t.mu).collect();
        let res_r = m.apply(&t.u).iter().zip(&mu_u).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(res_r < 1e-12, "{res_r}");
        // pi-adjoint: (M* v)_i = sum_j conj(M_ji) pi_j v_j / pi_i
        for i in 0..6 {
            let adj: Complex64 = (0..6).map(|j| m.entries[(j, i)].conj() * pi[j] * t.v[j]).sum::<Complex64>() / pi[i];
            assert!((adj - t.mu.conj() * t.v[i]).norm() < 1e-12);
        }
        assert!((pi_inner(&t.u, &t.v, pi) - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn seeded_eigen_follows_the_closest_branch() {
        let model = fixtures::random_model(4, 1, 5, true);
        let m = twisted_matrix(&model, &[0.0], 0);
        let lead = leading_eigen(&m, None).unwrap();
        let ev = eigenvalues_sorted(&m.entries).unwrap();
        let fake = EigenTriple {
            mu: ev[1] + c(1e-3, 0.0),
            ..lead.clone()
        };
        let t = leading_eigen(&m, Some(&fake)).unwrap();
        assert!((t.mu - ev[1]).norm() < 1e-12);
    }

    #[test]
    fn degenerate_leading_eigenvalue_is_rejected() {
        // eigenvalues +-1/2 of equal modulus
        let model = fixtures::fair_coin();
        let m = twisted_matrix(&model, &[PI / 2.0], 0);
        let err = leading_eigen(&m, None).unwrap_err();
        assert!(err.to_string().contains("near-degenerate leading eigenvalue"));
    }

    #[test]
    fn projector_examples() {
        let model = fixtures::random_model(2, 1, 1, true);
        let t = leading_eigen(&twisted_matrix(&model, &[0.0], 0), None).unwrap();
        let pi = model.pi().to_vec();
        let f = vec![c(2.0, 0.0), c(2.0, 0.0)];
        let g = vec![c(3.0, 0.0), c(3.0, 0.0)];
        assert!((projector_pairing(&t, &f, &g, &pi) - c(6.0, 0.0)).norm() < 1e-12);
        // kernel of <., v>: orthogonal to constants under pi
        let h = vec![c(pi[1], 0.0), c(-pi[0], 0.0)];
        assert!(projector_pairing(&t, &h, &g, &pi).norm() < 1e-12);
        let lazy = leading_eigen(&twisted_matrix(&fixtures::lazy_walk(), &[0.0], 0), None).unwrap();
        let one = vec![c(1.0, 0.0)];
        assert!((projector_pairing(&lazy, &one, &one, &[1.0]) - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn projector_is_idempotent() {
        let model = fixtures::random_model_with_fiber(5, 1, 8, true, true);
        let t = leading_eigen(&twisted_matrix(&model, &[0.9], 1), None).unwrap();
        let x: Vec<Complex64> = (0..5).map(|i| c(i as f64 - 1.5, 0.3 * i as f64)).collect();
        let once = t.project(&x, model.pi());
        let twice = t.project(&once, model.pi());
        for (a, b) in once.iter().zip(&twice) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn lazy_walk_surface_matches_closed_form() {
        let grid = ThetaGrid::new(1, 64).unwrap();
        let s = resonance_surface(&fixtures::lazy_walk(), &grid, 0, SurfaceOptions::default()).unwrap();
        for idx in 0..64 {
            let theta = grid.node(idx)[0];
            assert!((s.mu[idx] - c(0.5 + 0.5 * theta.cos(), 0.0)).norm() < 1e-12);
        }
        assert_eq!(s.mu[0], c(1.0, 0.0));
        assert!(s.all_gap_ok());
    }

    #[test]
    fn fair_coin_surface_flags_the_boundary_character() {
        let grid = ThetaGrid::new(1, 64).unwrap();
        let s = resonance_surface(&fixtures::fair_coin(), &grid, 0, SurfaceOptions::default()).unwrap();
        assert!((s.specrad[32] - 1.0).abs() < 1e-12);
        assert!(!s.gap_ok[32]);
        assert!(s.gap_ok[0]);
        // the branch follows cos(theta) through the degenerate node at pi/2
        for idx in 0..64 {
            let theta = grid.node(idx)[0];
            assert!((s.mu[idx] - c(theta.cos(), 0.0)).norm() < 1e-12, "node {idx}");
        }
    }

    #[test]
    fn constant_fiber_angle_is_flagged_at_origin() {
        let grid = ThetaGrid::new(1, 32).unwrap();
        let s = resonance_surface(&fixtures::lazy_walk_constant_fiber(), &grid, 1, SurfaceOptions::default()).unwrap();
        assert!((s.specrad[0] - 1.0).abs() < 1e-14);
        assert!(!s.gap_ok[0]);
        let mixing = resonance_surface(&fixtures::lazy_walk_mixing_fiber(), &grid, 1, SurfaceOptions::default()).unwrap();
        assert!(mixing.all_gap_ok());
        assert!(mixing.max_specrad_off_origin() < 1.0);
    }

    #[test]
    fn surface_symmetry_under_conjugation() {
        let model = fixtures::random_model_with_fiber(4, 1, 3, true, true);
        let grid = ThetaGrid::new(1, 32).unwrap();
        let plus = resonance_surface(&model, &grid, 1, SurfaceOptions::default()).unwrap();
        let minus = resonance_surface(&model, &grid, -1, SurfaceOptions::default()).unwrap();
        for idx in 0..grid.node_count() {
            let m = grid.mirror(idx);
            assert!((minus.mu[m] - plus.mu[idx].conj()).norm() < 1e-12);
        }
    }

    /// A real twisted matrix at a self-conjugate node may carry a conjugate
    /// pair on the continued branch; no choice there is its own conjugate.
    /// Such nodes are the only asymmetric ones and are never gap_ok.
    #[test]
    fn asymmetry_is_confined_to_flagged_self_conjugate_nodes() {
        let grid = ThetaGrid::new(2, 16).unwrap();
        for seed in 1..30 {
            let model = fixtures::random_model(3, 2, seed, false);
            let s = resonance_surface(&model, &grid, 0, SurfaceOptions::default()).unwrap();
            for idx in 0..grid.node_count() {
                if (s.mu[grid.mirror(idx)] - s.mu[idx].conj()).norm() > 1e-12 {
                    assert_eq!(grid.mirror(idx), idx, "seed {seed}, node {idx}");
                    assert!(!s.gap_ok[idx], "seed {seed}, node {idx}");
                }
            }
        }
    }

    #[test]
    fn surface_refinement_is_consistent() {
        let model = fixtures::random_model(5, 1, 12, true);
        let coarse = resonance_surface(&model, &ThetaGrid::new(1, 32).unwrap(), 0, SurfaceOptions::default()).unwrap();
        let fine = resonance_surface(&model, &ThetaGrid::new(1, 64).unwrap(), 0, SurfaceOptions::default()).unwrap();
        for idx in 0..32 {
            assert!((coarse.mu[idx] - fine.mu[2 * idx]).norm() < 1e-12);
        }
    }

    #[test]
    fn surface_csv_header() {
        let grid = ThetaGrid::new(2, 4).unwrap();
        let s = resonance_surface(&fixtures::lazy_walk_2d(), &grid, 0, SurfaceOptions::default()).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next(),
            Some("theta_1,theta_2,k,mu_re,mu_im,specrad,gap,gap_ok")
        );
        assert_eq!(text.lines().count(), 17);
    }

    #[test]
    fn decay_residual_vanishes_for_rank_one_models() {
        let f = vec![c(1.0, 0.0), c(-0.5, 0.2)];
        let g = vec![c(0.3, 0.0), c(1.0, -1.0)];
        let r = per_theta_decay_check(&fixtures::fair_coin(), &[0.8], 0, &f, &g, 50).unwrap();
        assert!(r < 1e-14, "{r}");
        let one = vec![c(1.0, 0.0)];
        let r = per_theta_decay_check(&fixtures::lazy_walk(), &[1.3], 0, &one, &one, 50).unwrap();
        assert!(r < 1e-15);
    }

    #[test]
    fn decay_residual_ratio_is_bounded_for_random_model() {
        let model = fixtures::random_model(5, 1, 21, true);
        let f: Vec<Complex64> = (0..5).map(|i| c(1.0 + i as f64, 0.5)).collect();
        let g: Vec<Complex64> = (0..5).map(|i| c(0.2 * i as f64, -1.0)).collect();
        for theta in [0.0, 0.5, 2.0] {
            let r = per_theta_decay_check(&model, &[theta], 0, &f, &g, 200).unwrap();
            assert!(r.is_finite() && r <= 1e3, "theta {theta}: {r}");
        }
    }

    #[test]
    fn decay_residual_agrees_with_direct_powers_for_small_t() {
        let model = fixtures::random_model(4, 1, 2, true);
        let theta = [0.6];
        let m = twisted_matrix(&model, &theta, 0);
        let t = leading_eigen(&m, None).unwrap();
        let f: Vec<Complex64> = (0..4).map(|i| c(1.0, i as f64)).collect();
        let g: Vec<Complex64> = (0..4).map(|i| c(2.0 - i as f64, 0.0)).collect();
        let a = projector_pairing(&t, &f, &g, model.pi());
        let mut x = f.clone();
        let mut worst: f64 = 0.0;
        for step in 1..=5 {
            x = m.apply(&x);
            let direct = pi_inner(&x, &g, model.pi()) - t.mu.powu(step) * a;
            worst = worst.max(direct.norm() / t.second_modulus.powi(step as i32));
        }
        let r = per_theta_decay_check(&model, &theta, 0, &f, &g, 5).unwrap();
        assert!((r - worst).abs() < 1e-10 * (1.0 + worst), "{r} vs {worst}");
    }
}
