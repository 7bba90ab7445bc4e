//! Correlation functions on the cover.
//!
//! `C(t) = sum_k sum_n E_pi[f_k(X_t, n + S_t) conj(g_k(X_0, n)) e^{i k Phi_t}]`,
//! computed either by exact dynamic programming over reachable offsets or by
//! exact torus quadrature of `<M_{theta,k}^t F, G>_pi`.

use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CoverError, Result};
use crate::floquet::{floquet_transform, pi_inner, ThetaGrid};
use crate::linalg::CMatrix;
use crate::model::MarkovModel;
use crate::observable::CoverObservable;
use crate::stationary_phase::ExpansionCoefficients;
use crate::twisted::twisted_matrix;

/// Largest lattice radius handled by the dynamic program, per dimension.
pub fn brute_force_cap(d: usize) -> usize {
    match d {
        0 | 1 => 4096,
        2 => 512,
        _ => 64,
    }
}

/// Largest quadrature grid per axis.
pub const QUADRATURE_CAP: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Brute,
    Floquet,
    KSplit,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Brute => "brute",
            Method::Floquet => "floquet",
            Method::KSplit => "k-split",
        }
    }
}

fn check_inputs(model: &MarkovModel, f: &CoverObservable, g: &CoverObservable) -> Result<()> {
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

fn shared_modes(f: &CoverObservable, g: &CoverObservable) -> Vec<i64> {
    let gm = g.fiber_modes();
    f.fiber_modes().into_iter().filter(|k| gm.contains(k)).collect()
}

/// Lattice radius reached by `t` steps plus both supports.
pub fn required_radius(model: &MarkovModel, f: &CoverObservable, g: &CoverObservable, t: usize) -> usize {
    t * model.max_step() as usize + f.support_radius() + g.support_radius()
}

/// `C(t)` by exact propagation of the weighted measure.
pub fn brute_force_correlation(model: &MarkovModel, f: &CoverObservable, g: &CoverObservable, t: usize) -> Result<Complex64> {
    Ok(brute_force_series(model, f, g, t)?[t])
}

/// `C(0), ..., C(t_max)` from a single propagation.
pub fn brute_force_series(model: &MarkovModel, f: &CoverObservable, g: &CoverObservable, t_max: usize) -> Result<Vec<Complex64>> {
    check_inputs(model, f, g)?;
    let d = model.dim();
    let needed = required_radius(model, f, g, t_max);
    let cap = brute_force_cap(d);
    let step = model.max_step() as usize;
    let radius = t_max * step + f.support_radius().max(g.support_radius());
    let side = 2 * radius + 1;
    let cells = side.checked_pow(d as u32).unwrap_or(usize::MAX);
    if needed > cap {
        let bytes = cells.saturating_mul(model.state_count()).saturating_mul(32);
        return Err(CoverError::ResourceGuard(format!(
            "dynamic program needs lattice radius {needed} > cap {cap} for d={d} (about {:.1} MiB)",
            bytes as f64 / (1u64 << 20) as f64
        )));
    }
    let strides: Vec<usize> = (0..d).map(|a| side.pow(a as u32)).collect();
    let index = |n: &[i64]| -> usize {
        n.iter()
            .zip(&strides)
            .map(|(&x, &s)| (x + radius as i64) as usize * s)
            .sum()
    };
    let edge_shift: Vec<isize> = model
        .edges()
        .iter()
        .map(|e| e.psi.iter().zip(&strides).map(|(&p, &s)| p as isize * s as isize).sum())
        .collect();
    let pi = model.pi();
    let states = model.state_count();
    let mut out = vec![Complex64::new(0.0, 0.0); t_max + 1];

    for k in shared_modes(f, g) {
        let factors: Vec<Complex64> = model
            .edges()
            .iter()
            .map(|e| Complex64::from_polar(e.prob, k as f64 * e.phi))
            .collect();
        let f_k: Vec<(usize, usize, Complex64)> = f
            .entries()
            .filter(|((_, _, kk), _)| *kk == k)
            .map(|((s, n, _), v)| (*s, index(n), *v))
            .collect();
        let mut w = vec![vec![Complex64::new(0.0, 0.0); cells]; states];
        for ((s, n, kk), v) in g.entries() {
            if *kk == k {
                w[*s][index(n)] += v.conj() * pi[*s];
            }
        }
        let pair = |w: &[Vec<Complex64>]| -> Complex64 { f_k.iter().map(|(s, i, v)| w[*s][*i] * v).sum() };
        out[0] += pair(&w);
        let mut next = vec![vec![Complex64::new(0.0, 0.0); cells]; states];
        for s in 1..=t_max {
            let r_prev = (g.support_radius() + (s - 1) * step) as i64;
            for row in next.iter_mut() {
                row.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            }
            for_each_in_box(d, r_prev, |n| {
                let idx = index(n);
                for (e_idx, e) in model.edges().iter().enumerate() {
                    let x = w[e.src][idx];
                    if x.re == 0.0 && x.im == 0.0 {
                        continue;
                    }
                    let target = (idx as isize + edge_shift[e_idx]) as usize;
                    next[e.dst][target] += x * factors[e_idx];
                }
            });
            std::mem::swap(&mut w, &mut next);
            out[s] += pair(&w);
        }
    }
    Ok(out)
}

/// Calls `visit` for every lattice point of sup-norm at most `r`.
fn for_each_in_box<F: FnMut(&[i64])>(d: usize, r: i64, mut visit: F) {
    let mut n = vec![-r; d];
    loop {
        visit(&n);
        let mut axis = 0;
        loop {
            if axis == d {
                return;
            }
            if n[axis] < r {
                n[axis] += 1;
                break;
            }
            n[axis] = -r;
            axis += 1;
        }
    }
}

/// How `M^t` is applied at each quadrature node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerStrategy {
    /// Repeated squaring when `t` has few binary digits set, else iterative.
    Auto,
    /// `t` successive matrix-vector products.
    Iterative,
    /// Binary powering of the matrix, then one product.
    Squaring,
}

fn apply_power(m: &CMatrix, t: usize, x: &[Complex64], strategy: PowerStrategy) -> Vec<Complex64> {
    let strategy = match strategy {
        PowerStrategy::Auto if t.count_ones() <= 2 && t >= 32 && m.nrows() > 1 => PowerStrategy::Squaring,
        PowerStrategy::Auto => PowerStrategy::Iterative,
        s => s,
    };
    let n = m.nrows();
    match strategy {
        PowerStrategy::Squaring => {
            let mut result = CMatrix::identity(n, n);
            let mut base = m.clone();
            let mut e = t;
            while e > 0 {
                if e & 1 == 1 {
                    result = &result * &base;
                }
                e >>= 1;
                if e > 0 {
                    base = &base * &base;
                }
            }
            (0..n).map(|i| (0..n).map(|j| result[(i, j)] * x[j]).sum()).collect()
        }
        _ => {
            let mut v = x.to_vec();
            let mut tmp = vec![Complex64::new(0.0, 0.0); n];
            for _ in 0..t {
                for i in 0..n {
                    tmp[i] = (0..n).map(|j| m[(i, j)] * v[j]).sum();
                }
                std::mem::swap(&mut v, &mut tmp);
            }
            v
        }
    }
}

/// Points per axis making the quadrature exact for time `t`.
pub fn exact_grid_size(model: &MarkovModel, f: &CoverObservable, g: &CoverObservable, t: usize) -> Result<usize> {
    let required = 2 * required_radius(model, f, g, t);
    let points = (required + 1).max(2);
    if points > QUADRATURE_CAP {
        let nodes = points.checked_pow(model.dim() as u32).unwrap_or(usize::MAX);
        let bytes = nodes.saturating_mul(16);
        return Err(CoverError::ResourceGuard(format!(
            "exact quadrature needs {points} points per axis > cap {QUADRATURE_CAP} (about {:.1} MiB of node values)",
            bytes as f64 / (1u64 << 20) as f64
        )));
    }
    Ok(points)
}

/// `(2 pi)^{-d} int <M_{theta,k}^t F_{theta,k}, G_{theta,k}>_pi dtheta` for one
/// fiber mode, on an exact grid.
pub fn floquet_mode_correlation(
    model: &MarkovModel,
    f: &CoverObservable,
    g: &CoverObservable,
    t: usize,
    k: i64,
    strategy: PowerStrategy,
) -> Result<Complex64> {
    check_inputs(model, f, g)?;
    let fk = f.mode_slice(k);
    let gk = g.mode_slice(k);
    if fk.is_empty() || gk.is_empty() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let points = exact_grid_size(model, &fk, &gk, t)?;
    let grid = ThetaGrid::new(model.dim(), points)?;
    quadrature(model, &fk, &gk, t, k, &grid, strategy)
}

/// Quadrature on a caller-supplied grid; exact only when the grid is large
/// enough (see [`exact_grid_size`]).
pub fn quadrature(
    model: &MarkovModel,
    f: &CoverObservable,
    g: &CoverObservable,
    t: usize,
    k: i64,
    grid: &ThetaGrid,
    strategy: PowerStrategy,
) -> Result<Complex64> {
    let n = model.state_count();
    let pi = model.pi();
    let values: Vec<Complex64> = (0..grid.node_count())
        .into_par_iter()
        .map(|idx| {
            let theta = grid.node(idx);
            let m = twisted_matrix(model, &theta, k);
            let ft = floquet_transform(f, &theta, k, n);
            let gt = floquet_transform(g, &theta, k, n);
            pi_inner(&apply_power(&m.entries, t, &ft, strategy), &gt, pi)
        })
        .collect();
    let sum: Complex64 = values.iter().sum();
    Ok(sum / grid.node_count() as f64)
}

/// `C(t)` summed over shared fiber modes via exact torus quadrature.
pub fn floquet_correlation(model: &MarkovModel, f: &CoverObservable, g: &CoverObservable, t: usize) -> Result<Complex64> {
    floquet_correlation_with(model, f, g, t, PowerStrategy::Auto)
}

pub fn floquet_correlation_with(
    model: &MarkovModel,
    f: &CoverObservable,
    g: &CoverObservable,
    t: usize,
    strategy: PowerStrategy,
) -> Result<Complex64> {
    check_inputs(model, f, g)?;
    let mut total = Complex64::new(0.0, 0.0);
    for k in shared_modes(f, g) {
        total += floquet_mode_correlation(model, f, g, t, k, strategy)?;
    }
    Ok(total)
}

/// Correlation split by fiber mode: `principal` pairs the k = 0 parts,
/// `remainder` pairs the k != 0 parts, `cross` pairs the k = 0 part of one
/// with the k != 0 part of the other and vanishes by orthogonality.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KSplit {
    pub principal: Complex64,
    pub remainder: Complex64,
    pub cross: Complex64,
}

pub fn k_split_correlation(model: &MarkovModel, f: &CoverObservable, g: &CoverObservable, t: usize) -> Result<KSplit> {
    let f0 = f.mode_slice(0);
    let g0 = g.mode_slice(0);
    let f1 = f.minus(&f0);
    let g1 = g.minus(&g0);
    Ok(KSplit {
        principal: floquet_correlation(model, &f0, &g0, t)?,
        remainder: floquet_correlation(model, &f1, &g1, t)?,
        cross: floquet_correlation(model, &f0, &g1, t)? + floquet_correlation(model, &f1, &g0, t)?,
    })
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct CorrelationSeries {
    pub t_values: Vec<usize>,
    pub values: Vec<Complex64>,
    pub methods: Vec<Method>,
}

impl CorrelationSeries {
    pub fn push(&mut self, t: usize, value: Complex64, method: Method) {
        self.t_values.push(t);
        self.values.push(value);
        self.methods.push(method);
    }

    pub fn len(&self) -> usize {
        self.t_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_values.is_empty()
    }
}

/// `C(t)` for each requested time with one method.
pub fn correlation_series(
    model: &MarkovModel,
    f: &CoverObservable,
    g: &CoverObservable,
    t_values: &[usize],
    method: Method,
) -> Result<CorrelationSeries> {
    let mut series = CorrelationSeries::default();
    if method != Method::Brute {
        let t_max = t_values.iter().copied().max().unwrap_or(0);
        exact_grid_size(model, f, g, t_max)?;
    }
    match method {
        Method::Brute => {
            let t_max = t_values.iter().copied().max().unwrap_or(0);
            let all = brute_force_series(model, f, g, t_max)?;
            for &t in t_values {
                series.push(t, all[t], method);
            }
        }
        Method::Floquet => {
            for &t in t_values {
                series.push(t, floquet_correlation(model, f, g, t)?, method);
            }
        }
        Method::KSplit => {
            for &t in t_values {
                let split = k_split_correlation(model, f, g, t)?;
                series.push(t, split.principal + split.remainder + split.cross, method);
            }
        }
    }
    Ok(series)
}

/// Least-squares slope of `log y` against `log t`, skipping non-positive
/// values.
pub fn fit_loglog_slope(ts: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(ys)
        .filter(|(t, y)| **t > 0.0 && **y > 0.0 && y.is_finite())
        .map(|(t, y)| (t.ln(), y.ln()))
        .collect();
    fit_slope(&pts)
}

/// Least-squares slope of `log y` against `t`.
pub fn fit_log_rate(ts: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(ys)
        .filter(|(_, y)| **y > 0.0 && y.is_finite())
        .map(|(t, y)| (*t, y.ln()))
        .collect();
    fit_slope(&pts)
}

fn fit_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayRow {
    pub t: usize,
    pub value: Complex64,
    pub method: Method,
    /// `t^{d/2} C(t)`.
    pub scaled: Complex64,
    /// `|t^{d/2} C(t) - kappa sum_{j<N} c_j t^{-j}|` for N = 1, 2, ...
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub rows: Vec<DecayRow>,
    /// Fitted log-log slope of each residual over the slope window.
    pub residual_slopes: Vec<Option<f64>>,
}

/// Window used for residual slopes.
pub const SLOPE_WINDOW: (usize, usize) = (50, 400);

pub fn decay_report(
    model: &MarkovModel,
    f: &CoverObservable,
    g: &CoverObservable,
    t_values: &[usize],
    expansion: &ExpansionCoefficients,
    method: Method,
) -> Result<DecayReport> {
    let series = correlation_series(model, f, g, t_values, method)?;
    let half_d = model.dim() as f64 / 2.0;
    let terms = expansion.c.len();
    let rows: Vec<DecayRow> = (0..series.len())
        .map(|i| {
            let t = series.t_values[i];
            let scaled = series.values[i] * (t as f64).powf(half_d);
            let residuals = (1..=terms)
                .map(|n| (scaled - expansion.partial_sum(t as f64, n)).norm())
                .collect();
            DecayRow {
                t,
                value: series.values[i],
                method,
                scaled,
                residuals,
            }
        })
        .collect();
    let window: Vec<&DecayRow> = rows
        .iter()
        .filter(|r| r.t >= SLOPE_WINDOW.0 && r.t <= SLOPE_WINDOW.1)
        .collect();
    let ts: Vec<f64> = window.iter().map(|r| r.t as f64).collect();
    let residual_slopes = (0..terms)
        .map(|n| {
            let ys: Vec<f64> = window.iter().map(|r| r.residuals[n]).collect();
            fit_loglog_slope(&ts, &ys)
        })
        .collect();
    Ok(DecayReport { rows, residual_slopes })
}

impl DecayReport {
    /// CSV with columns t, re, im, method, t_pow_d2_re, residual_1..3.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,re,im,method,t_pow_d2_re,residual_1,residual_2,residual_3")?;
        for r in &self.rows {
            let res: Vec<String> = (0..3)
                .map(|n| r.residuals.get(n).map(|x| format!("{x:.17e}")).unwrap_or_default())
                .collect();
            writeln!(
                out,
                "{},{:.17e},{:.17e},{},{:.17e},{}",
                r.t,
                r.value.re,
                r.value.im,
                r.method.as_str(),
                r.scaled.re,
                res.join(",")
            )?;
        }
        Ok(())
    }
}

/// Sampling estimate of `C(t)` from `samples` trajectories started from
/// `pi`. For demonstration only: its variance is far too large for
/// coefficient extraction.
pub fn monte_carlo_correlation(
    model: &MarkovModel,
    f: &CoverObservable,
    g: &CoverObservable,
    t: usize,
    samples: usize,
    seed: u64,
) -> Result<Complex64> {
    check_inputs(model, f, g)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pi = model.pi();
    let n = model.state_count();
    let mut out_edges: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, e) in model.edges().iter().enumerate() {
        out_edges[e.src].push(i);
    }
    let pick = |rng: &mut ChaCha8Rng, weights: &mut dyn Iterator<Item = (usize, f64)>| -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, w) in weights {
            acc += w;
            last = i;
            if u < acc {
                return i;
            }
        }
        last
    };
    let g_entries: Vec<(usize, Vec<i64>, i64, Complex64)> =
        g.entries().map(|((s, n, k), v)| (*s, n.clone(), *k, *v)).collect();
    let mut total = Complex64::new(0.0, 0.0);
    for _ in 0..samples {
        let x0 = pick(&mut rng, &mut pi.iter().copied().enumerate());
        let mut x = x0;
        let mut disp = vec![0i64; model.dim()];
        let mut phase = 0.0;
        for _ in 0..t {
            let edges = &out_edges[x];
            let choice = pick(&mut rng, &mut edges.iter().map(|&i| (i, model.edges()[i].prob)));
            let e = &model.edges()[choice];
            disp.iter_mut().zip(&e.psi).for_each(|(a, b)| *a += b);
            phase += e.phi;
            x = e.dst;
        }
        for (s, n0, k, v) in &g_entries {
            if *s != x0 {
                continue;
            }
            let target: Vec<i64> = n0.iter().zip(&disp).map(|(a, b)| a + b).collect();
            let fv = f.get(x, &target, *k);
            total += fv * v.conj() * Complex64::from_polar(1.0, *k as f64 * phase);
        }
    }
    Ok(total / samples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn delta1() -> CoverObservable {
        CoverObservable::delta(1, 0, &[0], 0)
    }

    #[test]
    fn lazy_walk_return_probabilities() {
        let s = brute_force_series(&fixtures::lazy_walk(), &delta1(), &delta1(), 2).unwrap();
        assert_eq!(s[0], c(1.0, 0.0));
        assert!((s[1] - c(0.5, 0.0)).norm() < 1e-15);
        assert!((s[2] - c(0.375, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn time_zero_is_the_direct_pairing() {
        let model = fixtures::random_model_with_fiber(3, 1, 2, true, true);
        let f = CoverObservable::random(1, 3, 1, 2, 1, 8);
        let g = CoverObservable::random(2, 3, 1, 2, 1, 8);
        let direct = f.pairing(&g, model.pi());
        assert!((brute_force_correlation(&model, &f, &g, 0).unwrap() - direct).norm() < 1e-15);
        assert!((floquet_correlation(&model, &f, &g, 0).unwrap() - direct).norm() < 1e-13);
    }

    #[test]
    fn fair_coin_parity() {
        let d = CoverObservable::delta(1, 0, &[0], 0).plus(&CoverObservable::delta(1, 1, &[0], 0));
        let v = floquet_correlation(&fixtures::fair_coin(), &d, &d, 3).unwrap();
        assert!(v.norm() < 1e-15);
    }

    #[test]
    fn brute_and_floquet_agree_with_fiber_modes() {
        let model = fixtures::random_model_with_fiber(4, 1, 7, false, true);
        let f = CoverObservable::random(3, 4, 1, 2, 1, 10);
        let g = CoverObservable::random(4, 4, 1, 2, 1, 10);
        let brute = brute_force_series(&model, &f, &g, 20).unwrap();
        for t in [0, 1, 5, 20] {
            let fl = floquet_correlation(&model, &f, &g, t).unwrap();
            assert!((brute[t] - fl).norm() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn brute_and_floquet_agree_in_two_dimensions() {
        let model = fixtures::random_model(3, 2, 5, true);
        let f = CoverObservable::random(5, 3, 2, 1, 0, 6);
        let g = CoverObservable::random(6, 3, 2, 1, 0, 6);
        let brute = brute_force_correlation(&model, &f, &g, 6).unwrap();
        let fl = floquet_correlation(&model, &f, &g, 6).unwrap();
        assert!((brute - fl).norm() < 1e-12);
    }

    #[test]
    fn power_strategies_agree() {
        let model = fixtures::random_model_with_fiber(5, 1, 3, true, true);
        let f = CoverObservable::random(1, 5, 1, 1, 1, 6);
        let g = CoverObservable::random(2, 5, 1, 1, 1, 6);
        for t in [0, 1, 7, 64] {
            let a = floquet_correlation_with(&model, &f, &g, t, PowerStrategy::Iterative).unwrap();
            let b = floquet_correlation_with(&model, &f, &g, t, PowerStrategy::Squaring).unwrap();
            assert!((a - b).norm() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn shift_covariance_is_exact() {
        let model = fixtures::random_model(3, 1, 11, true);
        let f = CoverObservable::random(7, 3, 1, 2, 0, 5);
        let g = CoverObservable::random(8, 3, 1, 2, 0, 5);
        let m = [3];
        let a = brute_force_correlation(&model, &f.translated(&m), &g, 9).unwrap();
        let b = brute_force_correlation(&model, &f, &g.translated(&[-3]), 9).unwrap();
        assert!((a - b).norm() < 1e-15);
    }

    #[test]
    fn constant_fiber_angle_does_not_decay() {
        let model = fixtures::lazy_walk_constant_fiber();
        let f = CoverObservable::zero(1)
            .with(0, &[0], 1, c(1.0, 0.0))
            .with(0, &[1], 1, c(0.5, 0.0))
            .with(0, &[-1], 1, c(0.5, 0.0));
        // the fiber-averaged part is zero, so only the rotated mode remains and
        // |C(t)| equals the modulus of the untwisted lattice correlation
        let plain = model.with_phases(&[0.0; 3]).unwrap();
        for t in [1, 5, 30] {
            let rotated = floquet_correlation(&model, &f, &f, t).unwrap();
            let base = floquet_correlation(&plain, &f, &f, t).unwrap();
            assert!((rotated.norm() - base.norm()).abs() < 1e-13);
        }
    }

    #[test]
    fn k_split_decomposition() {
        let model = fixtures::lazy_walk_mixing_fiber();
        let f = CoverObservable::random(11, 1, 1, 2, 2, 10);
        let g = CoverObservable::random(12, 1, 1, 2, 2, 10);
        for t in [0, 4, 25] {
            let split = k_split_correlation(&model, &f, &g, t).unwrap();
            let full = floquet_correlation(&model, &f, &g, t).unwrap();
            assert!(split.cross.norm() <= 1e-13);
            assert!((split.principal + split.remainder - full).norm() < 1e-12);
        }
        let pure = CoverObservable::delta(1, 0, &[0], 0);
        let split = k_split_correlation(&model, &pure, &pure, 5).unwrap();
        assert_eq!(split.remainder, c(0.0, 0.0));
    }

    #[test]
    fn resource_guards() {
        let model = fixtures::lazy_walk();
        let err = brute_force_correlation(&model, &delta1(), &delta1(), 5000).unwrap_err();
        assert_eq!(err.exit_code(), 4);
        let err = floquet_correlation(&model, &delta1(), &delta1(), 3000).unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn loglog_slope_of_power_law() {
        let ts: Vec<f64> = (1..20).map(|x| x as f64 * 10.0).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 3.0 * t.powf(-1.5)).collect();
        assert!((fit_loglog_slope(&ts, &ys).unwrap() + 1.5).abs() < 1e-12);
        let rs: Vec<f64> = ts.iter().map(|t| (0.8f64).powf(*t)).collect();
        assert!((fit_log_rate(&ts, &rs).unwrap() - 0.8f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_is_in_the_right_ballpark() {
        let est = monte_carlo_correlation(&fixtures::lazy_walk(), &delta1(), &delta1(), 2, 20000, 1).unwrap();
        assert!((est.re - 0.375).abs() < 0.03);
    }
}
