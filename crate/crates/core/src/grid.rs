use serde::Serialize;

use crate::error::{Error, Result};

/// Uniform node-centred grid on `[0, E]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid1D {
    length: f64,
    x: Vec<f64>,
    dx: f64,
}

impl Grid1D {
    pub fn new(length: f64, n_nodes: usize) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::config(
                "grid.length_m",
                format!("must be positive, got {length}"),
            ));
        }
        if n_nodes < 3 {
            return Err(Error::config(
                "grid.n_nodes",
                format!("must be at least 3, got {n_nodes}"),
            ));
        }
        let dx = length / (n_nodes - 1) as f64;
        let mut x: Vec<f64> = (0..n_nodes).map(|i| i as f64 * dx).collect();
        x[n_nodes - 1] = length;
        Ok(Self { length, x, dx })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n_nodes(&self) -> usize {
        self.x.len()
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub(crate) fn check_len(&self, context: &'static str, len: usize) -> Result<()> {
        if len == self.n_nodes() {
            Ok(())
        } else {
            Err(Error::Dimension {
                context,
                expected: self.n_nodes(),
                actual: len,
            })
        }
    }
}

/// Second-order first derivative on a uniform grid: central differences in
/// the interior and three-point one-sided stencils at both ends.
pub(crate) fn derivative(values: &[f64], dx: f64) -> Vec<f64> {
    let n = values.len();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        d[i] = (values[i + 1] - values[i - 1]) / (2.0 * dx);
    }
    d[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * dx);
    d[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * dx);
    d
}
