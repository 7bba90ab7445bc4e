//! Fourier transform over the deck group Z^d.
//!
//! `F_{theta,k}(i) = sum_n f(i, n, k) exp(-i n . theta)`. On a uniform torus
//! grid with N points per axis every pairing or inversion below is a
//! trigonometric polynomial of bounded degree, so the trapezoid rule is
//! exact as soon as N exceeds the relevant degree bound.

use std::f64::consts::TAU;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{CoverError, Result};
use crate::observable::CoverObservable;

/// Uniform grid on the d-torus, nodes `2 pi j / N` in lexicographic order
/// (first axis most significant).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ThetaGrid {
    d: usize,
    points_per_axis: usize,
}

impl ThetaGrid {
    pub fn new(d: usize, points_per_axis: usize) -> Result<Self> {
        if points_per_axis < 2 {
            return Err(CoverError::InvalidArgument(format!(
                "grid needs at least 2 points per axis, got {points_per_axis}"
            )));
        }
        Ok(ThetaGrid { d, points_per_axis })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn node_count(&self) -> usize {
        self.points_per_axis.pow(self.d as u32)
    }

    pub fn spacing(&self) -> f64 {
        TAU / self.points_per_axis as f64
    }

    /// Integer coordinates of node `idx`.
    pub fn node_index(&self, mut idx: usize) -> Vec<usize> {
        let n = self.points_per_axis;
        let mut out = vec![0; self.d];
        for a in (0..self.d).rev() {
            out[a] = idx % n;
            idx /= n;
        }
        out
    }

    pub fn flat_index(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .fold(0, |acc, &c| acc * self.points_per_axis + c % self.points_per_axis)
    }

    pub fn node(&self, idx: usize) -> Vec<f64> {
        self.node_index(idx)
            .into_iter()
            .map(|j| TAU * j as f64 / self.points_per_axis as f64)
            .collect()
    }

    /// Node coordinates mapped into (-pi, pi].
    pub fn centered_node(&self, idx: usize) -> Vec<f64> {
        let n = self.points_per_axis;
        self.node_index(idx)
            .into_iter()
            .map(|j| {
                let jj = if 2 * j > n { j as i64 - n as i64 } else { j as i64 };
                TAU * jj as f64 / n as f64
            })
            .collect()
    }

    /// Index of the node at -theta.
    pub fn mirror(&self, idx: usize) -> usize {
        let n = self.points_per_axis;
        let coords: Vec<usize> = self.node_index(idx).into_iter().map(|j| (n - j) % n).collect();
        self.flat_index(&coords)
    }

    /// Torus L1 distance of a node from the origin, in grid steps.
    pub fn layer(&self, idx: usize) -> usize {
        let n = self.points_per_axis;
        self.node_index(idx).into_iter().map(|j| j.min(n - j)).sum()
    }

    /// Smallest points-per-axis giving exact trapezoid pairings for
    /// trigonometric polynomials of the given degree.
    pub fn exact_size(degree: usize) -> usize {
        (2 * degree + 1).max(2)
    }

    pub(crate) fn require_above(&self, required: usize) -> Result<()> {
        if self.points_per_axis <= required {
            Err(CoverError::Aliasing {
                points: self.points_per_axis,
                required,
            })
        } else {
            Ok(())
        }
    }
}

fn phase(n: &[i64], theta: &[f64], sign: f64) -> Complex64 {
    let arg: f64 = n.iter().zip(theta).map(|(&a, &b)| a as f64 * b).sum();
    Complex64::from_polar(1.0, sign * arg)
}

/// `F_{theta,k}(i) = sum_n f(i, n, k) e^{-i n.theta}` as a state vector.
pub fn floquet_transform(f: &CoverObservable, theta: &[f64], k: i64, state_count: usize) -> Vec<Complex64> {
    assert_eq!(theta.len(), f.dim(), "theta has wrong dimension");
    let mut out = vec![Complex64::new(0.0, 0.0); state_count];
    for ((s, n, kk), v) in f.entries() {
        if *kk == k {
            out[*s] += v * phase(n, theta, -1.0);
        }
    }
    out
}

/// Floquet components of an observable sampled on a grid for a band of
/// fiber modes.
#[derive(Debug, Clone)]
pub struct FloquetField {
    pub grid: ThetaGrid,
    pub modes: Vec<i64>,
    pub state_count: usize,
    /// `values[node][mode_index][state]`
    pub values: Vec<Vec<Vec<Complex64>>>,
}

impl FloquetField {
    pub fn from_observable(f: &CoverObservable, grid: &ThetaGrid, modes: &[i64], state_count: usize) -> Self {
        let values = (0..grid.node_count())
            .into_par_iter()
            .map(|idx| {
                let theta = grid.node(idx);
                modes
                    .iter()
                    .map(|&k| floquet_transform(f, &theta, k, state_count))
                    .collect()
            })
            .collect();
        FloquetField {
            grid: grid.clone(),
            modes: modes.to_vec(),
            state_count,
            values,
        }
    }

    /// Field whose every component equals the given function of theta.
    pub fn from_fn<F>(grid: &ThetaGrid, modes: &[i64], state_count: usize, func: F) -> Self
    where
        F: Fn(&[f64], i64) -> Vec<Complex64> + Sync,
    {
        let values = (0..grid.node_count())
            .into_par_iter()
            .map(|idx| {
                let theta = grid.node(idx);
                modes.iter().map(|&k| func(&theta, k)).collect()
            })
            .collect();
        FloquetField {
            grid: grid.clone(),
            modes: modes.to_vec(),
            state_count,
            values,
        }
    }

    /// CSV with columns theta_1..theta_d, k, state, re, im.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let d = self.grid.dim();
        let mut header: Vec<String> = (1..=d).map(|a| format!("theta_{a}")).collect();
        header.extend(["k", "state", "re", "im"].iter().map(|s| s.to_string()));
        writeln!(out, "{}", header.join(","))?;
        for (idx, per_node) in self.values.iter().enumerate() {
            let theta = self.grid.node(idx);
            let prefix: Vec<String> = theta.iter().map(|t| format!("{t:.17e}")).collect();
            for (mi, vec) in per_node.iter().enumerate() {
                for (s, v) in vec.iter().enumerate() {
                    writeln!(
                        out,
                        "{},{},{},{:.17e},{:.17e}",
                        prefix.join(","),
                        self.modes[mi],
                        s,
                        v.re,
                        v.im
                    )?;
                }
            }
        }
        Ok(())
    }
}

/// Inverse transform by the trapezoid rule, reconstructing all lattice
/// points with sup-norm at most `radius`.
pub fn floquet_inverse(field: &FloquetField, radius: usize) -> Result<CoverObservable> {
    let grid = &field.grid;
    grid.require_above(2 * radius)?;
    let d = grid.dim();
    let r = radius as i64;
    let side = 2 * radius + 1;
    let total = side.pow(d as u32);
    let scale = 1.0 / grid.node_count() as f64;
    let max_abs = field
        .values
        .iter()
        .flatten()
        .flatten()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    let cutoff = 1e-14 * max_abs;
    let mut out = CoverObservable::zero(d);
    for p in 0..total {
        let mut rem = p;
        let mut n = vec![0i64; d];
        for a in (0..d).rev() {
            n[a] = (rem % side) as i64 - r;
            rem /= side;
        }
        for (mi, &k) in field.modes.iter().enumerate() {
            for s in 0..field.state_count {
                let mut acc = Complex64::new(0.0, 0.0);
                for (idx, per_node) in field.values.iter().enumerate() {
                    acc += per_node[mi][s] * phase(&n, &grid.node(idx), 1.0);
                }
                acc *= scale;
                if acc.norm() > cutoff {
                    out.add(s, &n, k, acc);
                }
            }
        }
    }
    Ok(out)
}

/// `(2 pi)^{-d} sum_k int <F_{theta,k}, G_{theta,k}>_pi dtheta`, evaluated
/// exactly on the grid.
pub fn parseval_pairing(f: &CoverObservable, g: &CoverObservable, grid: &ThetaGrid, pi: &[f64]) -> Result<Complex64> {
    grid.require_above(2 * (f.support_radius() + g.support_radius()))?;
    let states = pi.len();
    let mut modes = f.fiber_modes();
    modes.retain(|k| g.fiber_modes().contains(k));
    let per_node: Vec<Complex64> = (0..grid.node_count())
        .into_par_iter()
        .map(|idx| {
            let theta = grid.node(idx);
            modes
                .iter()
                .map(|&k| {
                    let ff = floquet_transform(f, &theta, k, states);
                    let gg = floquet_transform(g, &theta, k, states);
                    pi_inner(&ff, &gg, pi)
                })
                .sum()
        })
        .collect();
    let total: Complex64 = per_node.iter().sum();
    Ok(total / grid.node_count() as f64)
}

/// `<a, b>_pi = sum_i pi_i a_i conj(b_i)`.
pub fn pi_inner(a: &[Complex64], b: &[Complex64], pi: &[f64]) -> Complex64 {
    a.iter()
        .zip(b)
        .zip(pi)
        .map(|((x, y), w)| x * y.conj() * *w)
        .sum()
}

/// Observable whose transform is the `alpha`-th theta derivative of the
/// transform of `f`: `n -> (-i)^{|alpha|} n^alpha f`.
pub fn floquet_derivative(f: &CoverObservable, alpha: &[u32]) -> CoverObservable {
    assert_eq!(alpha.len(), f.dim());
    let order: u32 = alpha.iter().sum();
    let factor = Complex64::new(0.0, -1.0).powu(order);
    let mut out = CoverObservable::zero(f.dim());
    for ((s, n, k), v) in f.entries() {
        let mono: f64 = n.iter().zip(alpha).map(|(&x, &a)| (x as f64).powi(a as i32)).product();
        out.add(*s, n, *k, v * factor * mono);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn delta_at_origin_transforms_to_unit_vector() {
        let f = CoverObservable::delta(1, 0, &[0], 0);
        let v = floquet_transform(&f, &[0.7], 0, 2);
        assert_eq!(v, vec![c(1.0, 0.0), c(0.0, 0.0)]);
    }

    #[test]
    fn sign_convention() {
        let f = CoverObservable::delta(1, 0, &[1], 0);
        let v = floquet_transform(&f, &[PI], 0, 1);
        assert!((v[0] - c(-1.0, 0.0)).norm() < 1e-15);
        let f = CoverObservable::delta(1, 0, &[1], 0);
        let v = floquet_transform(&f, &[PI / 2.0], 0, 1);
        assert!((v[0] - c(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn symmetric_pair_gives_cosine() {
        let f = CoverObservable::zero(1).with(0, &[-1], 0, c(1.0, 0.0)).with(0, &[1], 0, c(1.0, 0.0));
        for theta in [0.0, 0.3, 1.9, -2.5] {
            let v = floquet_transform(&f, &[theta], 0, 1);
            assert!((v[0] - c(2.0 * f64::cos(theta), 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn round_trip_on_exact_grid() {
        let f = CoverObservable::random(5, 3, 1, 3, 1, 25);
        let grid = ThetaGrid::new(1, 8).unwrap();
        let field = FloquetField::from_observable(&f, &grid, &[-1, 0, 1], 3);
        let back = floquet_inverse(&field, 3).unwrap();
        for ((s, n, k), v) in f.entries() {
            assert!((back.get(*s, n, *k) - v).norm() < 1e-12);
        }
        for ((s, n, k), v) in back.entries() {
            assert!((f.get(*s, n, *k) - v).norm() < 1e-12);
        }
    }

    #[test]
    fn flat_spectrum_inverts_to_delta() {
        let grid = ThetaGrid::new(1, 8).unwrap();
        let field = FloquetField::from_fn(&grid, &[0], 2, |_, _| vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let f = floquet_inverse(&field, 3).unwrap();
        assert_eq!(f.len(), 1);
        assert!((f.get(0, &[0], 0) - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let f = CoverObservable::delta(1, 0, &[3], 0);
        let grid = ThetaGrid::new(1, 6).unwrap();
        let field = FloquetField::from_observable(&f, &grid, &[0], 1);
        let err = floquet_inverse(&field, 3).unwrap_err();
        assert!(err.to_string().contains("aliasing: grid too coarse"));
    }

    #[test]
    fn pairing_examples() {
        let grid = ThetaGrid::new(1, 16).unwrap();
        let delta = CoverObservable::delta(1, 0, &[0], 0);
        let one = parseval_pairing(&delta, &delta, &grid, &[1.0]).unwrap();
        assert!((one - c(1.0, 0.0)).norm() < 1e-14);

        let other = CoverObservable::delta(1, 0, &[2], 0);
        let zero = parseval_pairing(&delta, &other, &grid, &[1.0]).unwrap();
        assert!(zero.norm() < 1e-14);

        let pair = CoverObservable::zero(1).with(0, &[-1], 0, c(1.0, 0.0)).with(0, &[1], 0, c(1.0, 0.0));
        let two = parseval_pairing(&pair, &pair, &grid, &[1.0]).unwrap();
        assert!((two - c(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn derivative_examples() {
        let f = CoverObservable::random(1, 2, 1, 2, 0, 6);
        assert_eq!(floquet_derivative(&f, &[0]), f);

        let d1 = floquet_derivative(&CoverObservable::delta(1, 0, &[1], 0), &[1]);
        assert_eq!(d1.get(0, &[1], 0), c(0.0, -1.0));

        let d2 = floquet_derivative(&CoverObservable::delta(2, 0, &[2, 1], 0), &[1, 1]);
        assert!((d2.get(0, &[2, 1], 0) - c(-2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn derivative_matches_central_differences() {
        let f = CoverObservable::random(8, 2, 2, 3, 0, 12);
        let theta = [0.4, -1.1];
        let h = 1e-5;
        for alpha in [[1u32, 0], [0, 1]] {
            let df = floquet_derivative(&f, &alpha);
            let exact = floquet_transform(&df, &theta, 0, 2);
            let mut plus = theta;
            let mut minus = theta;
            let axis = if alpha[0] == 1 { 0 } else { 1 };
            plus[axis] += h;
            minus[axis] -= h;
            let fp = floquet_transform(&f, &plus, 0, 2);
            let fm = floquet_transform(&f, &minus, 0, 2);
            for s in 0..2 {
                let fd = (fp[s] - fm[s]) / (2.0 * h);
                assert!((fd - exact[s]).norm() < 1e-8 * (1.0 + exact[s].norm()));
            }
        }
    }

    #[test]
    fn grid_bookkeeping() {
        let g = ThetaGrid::new(2, 4).unwrap();
        assert_eq!(g.node_count(), 16);
        assert_eq!(g.node_index(6), vec![1, 2]);
        assert_eq!(g.flat_index(&[1, 2]), 6);
        assert_eq!(g.mirror(6), g.flat_index(&[3, 2]));
        assert_eq!(g.layer(g.flat_index(&[3, 2])), 3);
        assert_eq!(g.node(0), vec![0.0, 0.0]);
        assert!(ThetaGrid::new(1, 1).is_err());
    }

    #[test]
    fn csv_layout() {
        let grid = ThetaGrid::new(1, 2).unwrap();
        let field = FloquetField::from_observable(&CoverObservable::delta(1, 0, &[0], 0), &grid, &[0], 1);
        let mut buf = Vec::new();
        field.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("theta_1,k,state,re,im"));
        assert_eq!(text.lines().count(), 3);
    }
}
