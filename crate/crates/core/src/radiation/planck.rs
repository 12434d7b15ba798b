//! Blackbody spectral intensity and its band integrals.

use crate::error::{Error, Result};
use crate::radiation::quadrature::gauss_legendre;

/// First radiation constant, W·m².
pub const C1: f64 = 1.19e-16;
/// Second radiation constant, m·K.
pub const C2: f64 = 1.44e-2;

/// Gauss–Legendre points used inside each panel of [`band_emission`].
const PANEL_ORDER: usize = 8;

/// Spectral blackbody intensity `C1 / (λ⁵ (exp(C2/(λT)) − 1))`, W/(m²·m·sr).
pub fn planck_intensity(lambda: f64, t: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain {
            what: "wavelength",
            value: lambda,
        });
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain {
            what: "temperature",
            value: t,
        });
    }
    Ok(planck_unchecked(lambda, t))
}

#[inline]
pub(crate) fn planck_unchecked(lambda: f64, t: f64) -> f64 {
    let x = C2 / (lambda * t);
    let l5 = lambda.powi(5);
    if x > 700.0 {
        // exp(x) − 1 == exp(x) in double precision here
        C1 * (-x).exp() / l5
    } else {
        C1 / (l5 * x.exp_m1())
    }
}

/// Band-integrated blackbody intensity `∫ I_b(λ, T) dλ` over `[lambda_lo, lambda_hi]`,
/// W/(m²·sr).
///
/// Composite Gauss–Legendre with `n_sub` panels. Panels are spaced
/// geometrically in λ, which keeps them matched to the Planck curve across
/// several decades.
pub fn band_emission(lambda_lo: f64, lambda_hi: f64, t: f64, n_sub: usize) -> Result<f64> {
    if n_sub < 2 {
        return Err(Error::config(
            "radiation.n_sub",
            format!("must be at least 2, got {n_sub}"),
        ));
    }
    if lambda_lo == lambda_hi {
        return Ok(0.0);
    }
    planck_intensity(lambda_lo, t)?;
    planck_intensity(lambda_hi, t)?;
    if lambda_hi < lambda_lo {
        return Err(Error::Domain {
            what: "band upper wavelength",
            value: lambda_hi,
        });
    }
    Ok(BandIntegrator::new(lambda_lo, lambda_hi, n_sub).integrate(t))
}

/// Precomputed wavelength nodes and weights for repeated band integrals.
#[derive(Debug, Clone)]
pub(crate) struct BandIntegrator {
    nodes: Vec<(f64, f64)>,
}

impl BandIntegrator {
    pub(crate) fn new(lambda_lo: f64, lambda_hi: f64, n_sub: usize) -> Self {
        if lambda_lo >= lambda_hi {
            return Self { nodes: Vec::new() };
        }
        let rule = gauss_legendre(PANEL_ORDER);
        let ratio = (lambda_hi / lambda_lo).powf(1.0 / n_sub as f64);
        let mut nodes = Vec::with_capacity(n_sub * PANEL_ORDER);
        let mut a = lambda_lo;
        for p in 0..n_sub {
            let b = if p + 1 == n_sub { lambda_hi } else { a * ratio };
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (x, w) in rule.iter() {
                nodes.push((mid + half * x, half * w));
            }
            a = b;
        }
        Self { nodes }
    }

    pub(crate) fn integrate(&self, t: f64) -> f64 {
        self.nodes
            .iter()
            .map(|&(lambda, w)| w * planck_unchecked(lambda, t))
            .sum()
    }
}

/// Total blackbody intensity `∫₀^∞ I_b dλ = π⁴ C1 T⁴ / (15 C2⁴)`, W/(m²·sr).
pub fn total_intensity(t: f64) -> f64 {
    std::f64::consts::PI.powi(4) * C1 * t.powi(4) / (15.0 * C2.powi(4))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn spectral_value_at_ten_microns() {
        // x = 4.8, I = 1.19e-16 / (1e-25 · (e^4.8 − 1))
        let expected = 1.19e-16 / (1e-25 * (4.8f64.exp() - 1.0));
        let v = planck_intensity(1e-5, 300.0).unwrap();
        assert_relative_eq!(v, expected, max_relative = 1e-14);
        assert!((v - 9.874e6).abs() / 9.874e6 < 1e-3);
    }

    #[test]
    fn peak_wavelength_follows_wien() {
        // golden-section search for the maximum
        let f = |l: f64| planck_unchecked(l, 300.0);
        let (mut a, mut b) = (1e-6, 5e-5);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if f(c) > f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let peak = 0.5 * (a + b);
        assert!((peak - 9.66e-6).abs() < 0.01e-6, "{peak}");
        assert_relative_eq!(
            peak,
            C2 / (4.965_114_231_744_276 * 300.0),
            max_relative = 1e-6
        );
    }

    #[test]
    fn hotter_is_brighter() {
        assert!(planck_intensity(1e-5, 400.0).unwrap() > planck_intensity(1e-5, 300.0).unwrap());
    }

    #[test]
    fn domain_errors() {
        assert!(planck_intensity(0.0, 300.0).is_err());
        assert!(planck_intensity(1e-5, -1.0).is_err());
        assert!(band_emission(1e-6, 2e-6, 0.0, 4).is_err());
        assert!(band_emission(1e-6, 2e-6, 300.0, 1).is_err());
    }

    #[test]
    fn large_exponent_is_finite_and_positive() {
        // C2/(λT) = 700
        let lambda = C2 / (700.0 * 300.0);
        let v = planck_intensity(lambda, 300.0).unwrap();
        assert!(v.is_finite() && v > 0.0);
        let v = planck_intensity(lambda * 0.999, 300.0).unwrap();
        assert!(v.is_finite() && v > 0.0);
    }

    #[test]
    fn zero_width_band() {
        assert_eq!(band_emission(5e-6, 5e-6, 350.0, 8).unwrap(), 0.0);
    }

    #[test]
    fn band_self_convergence() {
        let coarse = band_emission(1e-6, 2e-5, 350.0, 8).unwrap();
        let fine = band_emission(1e-6, 2e-5, 350.0, 16).unwrap();
        assert!(((coarse - fine) / fine).abs() < 1e-10, "{coarse} {fine}");
    }

    #[test]
    fn wide_band_recovers_total_intensity() {
        let band = band_emission(1e-7, 1e-3, 300.0, 64).unwrap();
        let total = total_intensity(300.0);
        assert!((band / total - 1.0).abs() < 1e-4, "{}", band / total);
        // σ/π from the constants is within the rounding of C1, C2
        let sigma = total * std::f64::consts::PI / 300f64.powi(4);
        assert!((sigma - 5.670_374e-8).abs() / 5.670_374e-8 < 0.01);
    }
}
