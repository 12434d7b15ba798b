//! Temperature-dependent thermophysical properties of the slab.
//!
//! Conductivity and volumetric heat capacity are polynomials in the reduced
//! temperature `u = T / 298.15 K`:
//!
//! ```text
//! K(T)    = k_ref      · Σ a_i u^i
//! ρc_p(T) = rho_cp_ref · Σ b_i u^i
//! ```
//!
//! The coefficient vectors sum to one so that both laws return their
//! reference value at 298.15 K. The Kirchhoff variable
//! `θ(T) = (1/k_ref) ∫_{298.15}^{T} K(T') dT'` turns the nonlinear diffusion
//! operator `∂/∂x (K ∂T/∂x)` into `k_ref ∂²θ/∂x²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reference temperature of the property polynomials, K.
pub const T_REF: f64 = 298.15;
/// Lower bound of the temperature range where the property laws are trusted, K.
pub const T_MIN: f64 = 250.0;
/// Upper bound of the temperature range where the property laws are trusted, K.
pub const T_MAX: f64 = 450.0;

const COEFF_SUM_TOL: f64 = 1e-12;
const INVERSE_TOL: f64 = 1e-12;
const INVERSE_MAX_ITERS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialModel {
    /// Thermal conductivity at 298.15 K, W/(m·K).
    pub k_ref: f64,
    /// Dimensionless coefficients of the conductivity polynomial.
    pub k_coeffs: Vec<f64>,
    /// Volumetric heat capacity at 298.15 K, J/(m³·K).
    pub rho_cp_ref: f64,
    /// Dimensionless coefficients of the heat-capacity polynomial.
    pub rho_cp_coeffs: Vec<f64>,
}

impl Default for MaterialModel {
    /// Constant-property "reference" medium: the PMMA conductivity with an
    /// effective volumetric heat capacity of 2100 J/(m³·K), so a 0.1 m slab
    /// settles within roughly 40 s.
    fn default() -> Self {
        Self {
            k_ref: 0.19,
            k_coeffs: vec![1.0],
            rho_cp_ref: 2100.0,
            rho_cp_coeffs: vec![1.0],
        }
    }
}

impl MaterialModel {
    /// Builds and validates a model.
    pub fn new(
        k_ref: f64,
        k_coeffs: Vec<f64>,
        rho_cp_ref: f64,
        rho_cp_coeffs: Vec<f64>,
    ) -> Result<Self> {
        let model = Self {
            k_ref,
            k_coeffs,
            rho_cp_ref,
            rho_cp_coeffs,
        };
        model.validate()?;
        Ok(model)
    }

    /// Constant properties with the given reference values.
    pub fn constant(k_ref: f64, rho_cp_ref: f64) -> Result<Self> {
        Self::new(k_ref, vec![1.0], rho_cp_ref, vec![1.0])
    }

    /// Representative literature values for PMMA (not fitted data):
    /// k = 0.19 W/(m·K), ρc_p = 1.7e6 J/(m³·K), constant.
    pub fn pmma_default() -> Self {
        Self {
            k_ref: 0.19,
            k_coeffs: vec![1.0],
            rho_cp_ref: 1.7e6,
            rho_cp_coeffs: vec![1.0],
        }
    }

    /// Looks up a named preset.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "pmma-default" => Some(Self::pmma_default()),
            "reference" => Some(Self::default()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_ref > 0.0 && self.k_ref.is_finite()) {
            return Err(Error::config(
                "material.k_ref",
                format!("must be positive, got {}", self.k_ref),
            ));
        }
        if !(self.rho_cp_ref > 0.0 && self.rho_cp_ref.is_finite()) {
            return Err(Error::config(
                "material.rho_cp_ref",
                format!("must be positive, got {}", self.rho_cp_ref),
            ));
        }
        check_coeffs("material.k_coeffs", &self.k_coeffs)?;
        check_coeffs("material.rho_cp_coeffs", &self.rho_cp_coeffs)?;
        // Positivity over the valid range, checked on a dense sample.
        for i in 0..=2000 {
            let t = T_MIN + (T_MAX - T_MIN) * i as f64 / 2000.0;
            let u = t / T_REF;
            if poly(&self.k_coeffs, u) <= 0.0 {
                return Err(Error::config(
                    "material.k_coeffs",
                    format!("conductivity is not positive at {t} K"),
                ));
            }
            if poly(&self.rho_cp_coeffs, u) <= 0.0 {
                return Err(Error::config(
                    "material.rho_cp_coeffs",
                    format!("heat capacity is not positive at {t} K"),
                ));
            }
        }
        Ok(())
    }

    /// Thermal conductivity K(T), W/(m·K).
    pub fn conductivity(&self, t: f64) -> Result<f64> {
        check_range(t)?;
        Ok(self.conductivity_unchecked(t))
    }

    /// Volumetric heat capacity ρc_p(T), J/(m³·K).
    pub fn volumetric_heat_capacity(&self, t: f64) -> Result<f64> {
        check_range(t)?;
        Ok(self.volumetric_heat_capacity_unchecked(t))
    }

    /// Kirchhoff transform θ(T), in kelvin-equivalent units. θ(298.15 K) = 0.
    pub fn kirchhoff_theta(&self, t: f64) -> Result<f64> {
        check_range(t)?;
        Ok(self.theta_unchecked(t))
    }

    /// dθ/dT = K(T)/k_ref.
    pub fn kirchhoff_slope(&self, t: f64) -> Result<f64> {
        check_range(t)?;
        Ok(poly(&self.k_coeffs, t / T_REF))
    }

    /// Inverts the Kirchhoff transform.
    pub fn kirchhoff_inverse(&self, theta: f64) -> Result<f64> {
        self.kirchhoff_inverse_from(theta, T_REF + theta)
    }

    /// Inverts the Kirchhoff transform starting Newton's method at `guess`.
    ///
    /// If `guess` already maps exactly onto `theta` it is returned unchanged.
    pub fn kirchhoff_inverse_from(&self, theta: f64, guess: f64) -> Result<f64> {
        let (lo_theta, hi_theta) = self.theta_range();
        if !(theta >= lo_theta && theta <= hi_theta) {
            return Err(Error::Domain {
                what: "Kirchhoff variable",
                value: theta,
            });
        }
        let (mut lo, mut hi) = (T_MIN, T_MAX);
        let mut t = if (T_MIN..=T_MAX).contains(&guess) {
            guess
        } else {
            0.5 * (T_MIN + T_MAX)
        };
        for _ in 0..INVERSE_MAX_ITERS {
            let residual = self.theta_unchecked(t) - theta;
            if residual == 0.0 {
                return Ok(t);
            }
            if residual > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let slope = poly(&self.k_coeffs, t / T_REF);
            let mut next = t - residual / slope;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let step = (next - t).abs();
            t = next;
            if step < INVERSE_TOL {
                return Ok(t);
            }
        }
        Err(Error::Convergence {
            what: "Kirchhoff inverse".into(),
            iterations: INVERSE_MAX_ITERS,
            residual: (self.theta_unchecked(t) - theta).abs(),
        })
    }

    /// Image of the valid temperature range under θ.
    pub fn theta_range(&self) -> (f64, f64) {
        (self.theta_unchecked(T_MIN), self.theta_unchecked(T_MAX))
    }

    pub(crate) fn conductivity_unchecked(&self, t: f64) -> f64 {
        self.k_ref * poly(&self.k_coeffs, t / T_REF)
    }

    pub(crate) fn volumetric_heat_capacity_unchecked(&self, t: f64) -> f64 {
        self.rho_cp_ref * poly(&self.rho_cp_coeffs, t / T_REF)
    }

    fn theta_unchecked(&self, t: f64) -> f64 {
        // ∫ u^i dT = T_REF · u^{i+1} / (i+1)
        let u = t / T_REF;
        let mut sum = 0.0;
        let mut u_pow = u;
        for (i, a) in self.k_coeffs.iter().enumerate() {
            sum += a * (u_pow - 1.0) / (i + 1) as f64;
            u_pow *= u;
        }
        T_REF * sum
    }
}

fn check_range(t: f64) -> Result<()> {
    if (T_MIN..=T_MAX).contains(&t) {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "temperature",
            value: t,
        })
    }
}

fn check_coeffs(key: &str, coeffs: &[f64]) -> Result<()> {
    if coeffs.is_empty() {
        return Err(Error::config(key, "must not be empty"));
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::config(key, "coefficients must be finite"));
    }
    let sum: f64 = coeffs.iter().sum();
    if (sum - 1.0).abs() > COEFF_SUM_TOL {
        return Err(Error::config(
            key,
            format!("coefficients must sum to 1, got {sum}"),
        ));
    }
    Ok(())
}

/// Horner evaluation of Σ c_i u^i.
fn poly(coeffs: &[f64], u: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c)
}
