use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-feature standardisation with the population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    /// Fits on `rows`, each of length `names.len()`. A constant column is a
    /// config error naming that column.
    pub fn fit(names: &[&str], rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::Input(format!(
                "normalizer needs at least 2 rows, got {}",
                rows.len()
            )));
        }
        let d = names.len();
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::Dimension {
                context: "normalizer row",
                expected: d,
                actual: r.len(),
            });
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut std = vec![0.0; d];
        for r in rows {
            for k in 0..d {
                std[k] += (r[k] - mean[k]).powi(2);
            }
        }
        for k in 0..d {
            std[k] = (std[k] / n).sqrt();
            // relative floor catches columns that are constant up to roundoff
            if !(std[k] > 1e-12 * mean[k].abs().max(f64::MIN_POSITIVE)) {
                return Err(Error::config(names[k], "feature has zero variance"));
            }
        }
        Ok(Self {
            names: names.iter().map(|s| s.to_string()).collect(),
            mean,
            std,
        })
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.names.len() != self.mean.len() || self.std.len() != self.mean.len() {
            return Err(Error::Input(
                "normalizer names/mean/std lengths differ".into(),
            ));
        }
        if self.std.iter().any(|s| !(s.is_finite() && *s > 0.0))
            || self.mean.iter().any(|m| !m.is_finite())
        {
            return Err(Error::Input(
                "normalizer statistics must be finite with std > 0".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_row_example() {
        let n = Normalizer::fit(&["a"], &[vec![0.0], vec![2.0]]).unwrap();
        assert_eq!(n.mean, vec![1.0]);
        assert_eq!(n.std, vec![1.0]);
        assert_eq!(n.apply(&[0.0]), vec![-1.0]);
        assert_eq!(n.apply(&[2.0]), vec![1.0]);
    }

    #[test]
    fn constant_column_is_named() {
        let err =
            Normalizer::fit(&["time_s", "x_m"], &[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap_err();
        assert!(err.to_string().contains("time_s"), "{err}");
        assert!(Normalizer::fit(&["a"], &[vec![1.0]]).is_err());
    }

    #[test]
    fn standardised_data_recovers_unit_statistics() {
        let rows: Vec<Vec<f64>> = [-1.0, 1.0, -1.0, 1.0].iter().map(|&v| vec![v]).collect();
        let n = Normalizer::fit(&["z"], &rows).unwrap();
        assert!(n.mean[0].abs() < 1e-15);
        assert!((n.std[0] - 1.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn round_trip(rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 2..30)) {
            prop_assume!((0..3).all(|k| rows.iter().any(|r| (r[k] - rows[0][k]).abs() > 1e-3)));
            let n = Normalizer::fit(&["a", "b", "c"], &rows).unwrap();
            for r in &rows {
                let back = n.invert(&n.apply(r));
                for (a, b) in back.iter().zip(r) {
                    prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
                }
            }
        }
    }
}
