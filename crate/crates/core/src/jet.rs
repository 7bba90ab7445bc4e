//! Truncated multivariate power series at the origin.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::Serialize;

pub type MultiIndex = Vec<u32>;

/// Coefficients `c_alpha` of `sum_{|alpha| <= degree} c_alpha theta^alpha`.
/// Products and compositions are truncated at the jet degree.
#[derive(Clone, PartialEq)]
pub struct TaylorJet {
    d: usize,
    degree: usize,
    coeffs: BTreeMap<MultiIndex, Complex64>,
}

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// All multi-indices in `d` variables of total degree at most `degree`,
/// graded then lexicographic.
pub fn monomials(d: usize, degree: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    for total in 0..=degree {
        push_exact(d, total as u32, &mut Vec::with_capacity(d), &mut out);
    }
    out
}

fn push_exact(d: usize, total: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    if prefix.len() + 1 == d {
        let mut full = prefix.clone();
        full.push(total);
        out.push(full);
        return;
    }
    if d == 0 {
        if total == 0 {
            out.push(Vec::new());
        }
        return;
    }
    for first in (0..=total).rev() {
        prefix.push(first);
        push_exact(d, total - first, prefix, out);
        prefix.pop();
    }
}

pub fn order(alpha: &[u32]) -> usize {
    alpha.iter().map(|&a| a as usize).sum()
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

impl TaylorJet {
    pub fn zero(d: usize, degree: usize) -> Self {
        TaylorJet {
            d,
            degree,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn constant(d: usize, degree: usize, c: Complex64) -> Self {
        let mut j = Self::zero(d, degree);
        j.set(&vec![0; d], c);
        j
    }

    /// The coordinate function theta_axis.
    pub fn variable(d: usize, degree: usize, axis: usize) -> Self {
        let mut j = Self::zero(d, degree);
        if degree >= 1 {
            let mut alpha = vec![0; d];
            alpha[axis] = 1;
            j.set(&alpha, Complex64::new(1.0, 0.0));
        }
        j
    }

    /// Jet of `exp(i m . theta)`.
    pub fn plane_wave(d: usize, degree: usize, m: &[i64]) -> Self {
        assert_eq!(m.len(), d);
        let mut lin = Self::zero(d, degree);
        for (a, &ma) in m.iter().enumerate() {
            lin = lin.add(&Self::variable(d, degree, a).scale(Complex64::new(0.0, ma as f64)));
        }
        lin.exp()
    }

    pub fn from_coeffs(d: usize, degree: usize, coeffs: impl IntoIterator<Item = (MultiIndex, Complex64)>) -> Self {
        let mut j = Self::zero(d, degree);
        for (alpha, c) in coeffs {
            j.set(&alpha, c);
        }
        j
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeff(&self, alpha: &[u32]) -> Complex64 {
        self.coeffs.get(alpha).copied().unwrap_or(ZERO)
    }

    /// Sets a coefficient; indices above the degree are ignored.
    pub fn set(&mut self, alpha: &[u32], c: Complex64) {
        assert_eq!(alpha.len(), self.d);
        if order(alpha) > self.degree {
            return;
        }
        if c == ZERO {
            self.coeffs.remove(alpha);
        } else {
            self.coeffs.insert(alpha.to_vec(), c);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, &Complex64)> {
        self.coeffs.iter()
    }

    pub fn value_at_zero(&self) -> Complex64 {
        self.coeff(&vec![0; self.d])
    }

    /// Partial derivative `d^alpha` at the origin: `alpha! c_alpha`.
    pub fn derivative_at_zero(&self, alpha: &[u32]) -> Complex64 {
        let fact: f64 = alpha.iter().map(|&a| factorial(a)).product();
        self.coeff(alpha) * fact
    }

    pub fn truncate(&self, degree: usize) -> Self {
        let degree = degree.min(self.degree);
        TaylorJet {
            d: self.d,
            degree,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(a, _)| order(a) <= degree)
                .map(|(a, c)| (a.clone(), *c))
                .collect(),
        }
    }

    /// Same coefficients at a different nominal degree. Raising the degree
    /// treats the unknown higher coefficients as zero, which is exact for
    /// any quantity that only reads the known ones.
    pub fn with_degree(&self, degree: usize) -> Self {
        if degree <= self.degree {
            return self.truncate(degree);
        }
        TaylorJet {
            d: self.d,
            degree,
            coeffs: self.coeffs.clone(),
        }
    }

    /// Homogeneous part of the given total degree.
    pub fn homogeneous(&self, total: usize) -> Self {
        TaylorJet {
            d: self.d,
            degree: self.degree,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(a, _)| order(a) == total)
                .map(|(a, c)| (a.clone(), *c))
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.d, other.d);
        let degree = self.degree.min(other.degree);
        let mut out = self.truncate(degree);
        for (a, c) in other.coeffs.iter().filter(|(a, _)| order(a) <= degree) {
            let v = out.coeff(a) + c;
            out.set(a, v);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = Self::zero(self.d, self.degree);
        for (a, c) in &self.coeffs {
            out.set(a, c * s);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.d, other.d);
        let degree = self.degree.min(other.degree);
        let mut acc: BTreeMap<MultiIndex, Complex64> = BTreeMap::new();
        for (a, ca) in &self.coeffs {
            let oa = order(a);
            if oa > degree {
                continue;
            }
            for (b, cb) in &other.coeffs {
                if oa + order(b) > degree {
                    continue;
                }
                let key: MultiIndex = a.iter().zip(b).map(|(x, y)| x + y).collect();
                *acc.entry(key).or_insert(ZERO) += ca * cb;
            }
        }
        let mut out = Self::zero(self.d, degree);
        for (a, c) in acc {
            out.set(&a, c);
        }
        out
    }

    pub fn powu(&self, m: u32) -> Self {
        let mut out = Self::constant(self.d, self.degree, Complex64::new(1.0, 0.0));
        for _ in 0..m {
            out = out.mul(self);
        }
        out
    }

    /// `d/d theta_axis`; the result has degree one lower.
    pub fn partial(&self, axis: usize) -> Self {
        let degree = self.degree.saturating_sub(1);
        let mut out = Self::zero(self.d, degree);
        for (a, c) in &self.coeffs {
            if a[axis] == 0 {
                continue;
            }
            let mut b = a.clone();
            b[axis] -= 1;
            out.set(&b, c * a[axis] as f64);
        }
        out
    }

    /// Series of `log` around the constant term (principal branch).
    pub fn ln(&self) -> Self {
        let c0 = self.value_at_zero();
        assert!(c0 != ZERO, "log of a jet with zero constant term");
        let x = self.sub(&Self::constant(self.d, self.degree, c0)).scale(c0.inv());
        let mut out = Self::constant(self.d, self.degree, c0.ln());
        let mut power = Self::constant(self.d, self.degree, Complex64::new(1.0, 0.0));
        for m in 1..=self.degree {
            power = power.mul(&x);
            let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
            out = out.add(&power.scale(Complex64::new(sign / m as f64, 0.0)));
        }
        out
    }

    pub fn exp(&self) -> Self {
        let c0 = self.value_at_zero();
        let x = self.sub(&Self::constant(self.d, self.degree, c0));
        let mut out = Self::constant(self.d, self.degree, Complex64::new(1.0, 0.0));
        let mut power = out.clone();
        for m in 1..=self.degree {
            power = power.mul(&x).scale(Complex64::new(1.0 / m as f64, 0.0));
            out = out.add(&power);
        }
        out.scale(c0.exp())
    }

    /// Polynomial value at a point.
    pub fn evaluate(&self, theta: &[f64]) -> Complex64 {
        self.coeffs
            .iter()
            .map(|(a, c)| {
                let mono: f64 = a.iter().zip(theta).map(|(&e, &t)| t.powi(e as i32)).product();
                c * mono
            })
            .sum()
    }

    /// Largest coefficient modulus over odd total orders.
    pub fn odd_part_norm(&self) -> f64 {
        self.coeffs
            .iter()
            .filter(|(a, _)| order(a) % 2 == 1)
            .map(|(_, c)| c.norm())
            .fold(0.0, f64::max)
    }

    /// Largest coefficient difference against another jet.
    pub fn max_diff(&self, other: &Self) -> f64 {
        let degree = self.degree.min(other.degree);
        monomials(self.d, degree)
            .iter()
            .map(|a| (self.coeff(a) - other.coeff(a)).norm())
            .fold(0.0, f64::max)
    }

    /// Coefficients keyed by "a1,a2,..,ad" with `[re, im]` values.
    pub fn to_export(&self) -> BTreeMap<String, [f64; 2]> {
        self.coeffs
            .iter()
            .map(|(a, c)| {
                let key = a.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
                (key, [c.re, c.im])
            })
            .collect()
    }
}

impl fmt::Debug for TaylorJet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TaylorJet(d={}, degree={}) {{", self.d, self.degree)?;
        for (a, c) in &self.coeffs {
            write!(f, " {a:?}: {c},")?;
        }
        write!(f, " }}")
    }
}

/// File form of a jet with fit metadata.
#[derive(Debug, Clone, Serialize)]
pub struct JetExport {
    pub order: usize,
    pub h: f64,
    pub error_estimate: f64,
    pub coefficients: BTreeMap<String, [f64; 2]>,
}
