//! Gauss–Legendre angular quadrature for the discrete-ordinates sweep.

use serde::Serialize;

use crate::error::{Error, Result};

pub const MAX_ORDINATES: usize = 64;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending.
pub(crate) fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, 0.0); n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out[i] = (-x, w);
        out[n - 1 - i] = (x, w);
    }
    if n % 2 == 1 {
        out[n / 2].0 = 0.0;
    }
    out
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Positive direction cosines with their hemisphere weights. Each μ has a
/// mirrored direction −μ carrying the same weight.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrdinateSet {
    mu: Vec<f64>,
    weight: Vec<f64>,
}

impl OrdinateSet {
    /// Gauss–Legendre rule mapped from `[-1, 1]` onto `(0, 1]`.
    pub fn gauss(n: usize) -> Result<Self> {
        if !(1..=MAX_ORDINATES).contains(&n) {
            return Err(Error::config(
                "radiation.n_ordinates",
                format!("must be in 1..={MAX_ORDINATES}, got {n}"),
            ));
        }
        let (mu, weight) = gauss_legendre(n)
            .into_iter()
            .map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w))
            .unzip();
        Ok(Self { mu, weight })
    }

    /// Ordinates per hemisphere.
    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    /// Signed direction cosine of direction index `d`: indices `0..n` are
    /// `+μ_k`, indices `n..2n` are `−μ_k`.
    pub fn signed_mu(&self, d: usize) -> f64 {
        let n = self.len();
        if d < n {
            self.mu[d]
        } else {
            -self.mu[d - n]
        }
    }

    pub fn weight(&self, d: usize) -> f64 {
        self.weight[d % self.len()]
    }
}
