//! Quasi-steady discrete-ordinates transport on the slab.
//!
//! For each spectral band and direction cosine μ the intensity obeys
//! `μ dI/dx = −β I + J` with `J = κ I_b(T) + (σ_s/2) Σ_k w_k I_k`. Each cell is
//! integrated exactly for a source varying linearly between its two nodes,
//! so pure attenuation is reproduced to round-off and smooth sources converge
//! at second order. Positive μ is marched from `x = 0`, negative μ from `x = E`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{derivative, Grid1D};
use crate::radiation::planck::BandIntegrator;
use crate::radiation::quadrature::OrdinateSet;

/// One wavelength band with grey, direction-independent properties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralBand {
    /// Lower wavelength bound, m.
    pub lambda_lo: f64,
    /// Upper wavelength bound, m.
    pub lambda_hi: f64,
    /// Extinction coefficient, 1/m.
    pub beta: f64,
    /// Scattering albedo σ_s/β.
    #[serde(default)]
    pub albedo: f64,
}

impl SpectralBand {
    pub fn new(lambda_lo: f64, lambda_hi: f64, beta: f64, albedo: f64) -> Self {
        Self {
            lambda_lo,
            lambda_hi,
            beta,
            albedo,
        }
    }

    /// Absorption coefficient κ = β (1 − albedo), 1/m.
    pub fn kappa(&self) -> f64 {
        self.beta * (1.0 - self.albedo)
    }

    /// Scattering coefficient σ_s = β · albedo, 1/m.
    pub fn sigma_s(&self) -> f64 {
        self.beta * self.albedo
    }
}

/// Placeholder PMMA-like bands over 0.5–50 µm: nearly transparent in the
/// near infrared, increasingly opaque at longer wavelengths. These are not
/// measured data.
pub fn default_bands() -> Vec<SpectralBand> {
    vec![
        SpectralBand::new(0.5e-6, 2.5e-6, 1.25, 0.0),
        SpectralBand::new(2.5e-6, 6.0e-6, 25.0, 0.0),
        SpectralBand::new(6.0e-6, 15.0e-6, 75.0, 0.0),
        SpectralBand::new(15.0e-6, 50.0e-6, 187.5, 0.0),
    ]
}

pub fn validate_bands(bands: &[SpectralBand]) -> Result<()> {
    if bands.is_empty() {
        return Err(Error::config(
            "radiation.bands",
            "at least one band is required",
        ));
    }
    for (j, b) in bands.iter().enumerate() {
        let key = format!("radiation.bands[{j}]");
        if !(b.lambda_lo > 0.0 && b.lambda_lo < b.lambda_hi && b.lambda_hi.is_finite()) {
            return Err(Error::config(key, "requires 0 < lambda_lo < lambda_hi"));
        }
        if !(b.beta >= 0.0 && b.beta.is_finite()) {
            return Err(Error::config(
                key,
                format!("beta must be non-negative, got {}", b.beta),
            ));
        }
        if !(0.0..=1.0).contains(&b.albedo) {
            return Err(Error::config(
                key,
                format!("albedo must lie in [0, 1], got {}", b.albedo),
            ));
        }
        if j > 0 {
            let prev = &bands[j - 1];
            if (b.lambda_lo - prev.lambda_hi).abs() > 1e-12 * b.lambda_lo {
                return Err(Error::config(
                    key,
                    "bands must be contiguous and ordered by wavelength",
                ));
            }
        }
    }
    Ok(())
}

/// Band-integrated intensities `I[band][direction][node]`, W/(m²·sr).
///
/// Direction `d < n` is `+μ_d`, direction `n + k` is `−μ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityField {
    pub intensity: Vec<Vec<Vec<f64>>>,
    /// Source iterations used by the scattering bands (1 when nothing scatters).
    pub scatter_iterations: usize,
}

impl IntensityField {
    pub fn n_bands(&self) -> usize {
        self.intensity.len()
    }

    /// Incident radiation `Σ_d w_d I_d` of one band at every node.
    pub fn angular_sum(&self, band: usize, ordinates: &OrdinateSet) -> Vec<f64> {
        let dirs = &self.intensity[band];
        let n_nodes = dirs[0].len();
        let mut g = vec![0.0; n_nodes];
        for (d, values) in dirs.iter().enumerate() {
            let w = ordinates.weight(d);
            for (gi, v) in g.iter_mut().zip(values) {
                *gi += w * v;
            }
        }
        g
    }
}

/// Black boundary walls at the two faces, per band, W/(m²·sr).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryIntensity {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

/// Spectral bands, angular quadrature and iteration controls for the sweep.
#[derive(Debug, Clone)]
pub struct RadiationModel {
    bands: Vec<SpectralBand>,
    ordinates: OrdinateSet,
    scatter_tol: f64,
    max_scatter_iters: usize,
    integrators: Vec<BandIntegrator>,
}

impl RadiationModel {
    pub fn new(
        bands: Vec<SpectralBand>,
        ordinates: OrdinateSet,
        n_sub: usize,
        scatter_tol: f64,
        max_scatter_iters: usize,
    ) -> Result<Self> {
        validate_bands(&bands)?;
        if n_sub < 2 {
            return Err(Error::config(
                "radiation.n_sub",
                format!("must be at least 2, got {n_sub}"),
            ));
        }
        if !(scatter_tol > 0.0) {
            return Err(Error::config("radiation.scatter_tol", "must be positive"));
        }
        if max_scatter_iters == 0 {
            return Err(Error::config(
                "radiation.max_scatter_iters",
                "must be at least 1",
            ));
        }
        let integrators = bands
            .iter()
            .map(|b| BandIntegrator::new(b.lambda_lo, b.lambda_hi, n_sub))
            .collect();
        Ok(Self {
            bands,
            ordinates,
            scatter_tol,
            max_scatter_iters,
            integrators,
        })
    }

    pub fn bands(&self) -> &[SpectralBand] {
        &self.bands
    }

    pub fn ordinates(&self) -> &OrdinateSet {
        &self.ordinates
    }

    /// Band-integrated Planck intensity of every band at temperature `t`.
    pub fn band_intensities(&self, t: f64) -> Result<Vec<f64>> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Domain {
                what: "temperature",
                value: t,
            });
        }
        Ok(self.integrators.iter().map(|b| b.integrate(t)).collect())
    }

    /// Solves the transport problem for a temperature profile with black
    /// walls at `t_left` (x = 0) and `t_right` (x = E).
    pub fn sweep_intensity(
        &self,
        grid: &Grid1D,
        temperature: &[f64],
        t_left: f64,
        t_right: f64,
    ) -> Result<IntensityField> {
        grid.check_len("temperature profile", temperature.len())?;
        let mut emission = vec![vec![0.0; grid.n_nodes()]; self.bands.len()];
        for (i, &t) in temperature.iter().enumerate() {
            for (j, v) in self.band_intensities(t)?.into_iter().enumerate() {
                emission[j][i] = v;
            }
        }
        let boundary = BoundaryIntensity {
            left: self.band_intensities(t_left)?,
            right: self.band_intensities(t_right)?,
        };
        self.sweep_with_emission(grid, &emission, &boundary)
    }

    /// Transport sweep for prescribed blackbody emission `emission[band][node]`
    /// (the medium emits `κ · emission`) and prescribed wall intensities.
    pub fn sweep_with_emission(
        &self,
        grid: &Grid1D,
        emission: &[Vec<f64>],
        boundary: &BoundaryIntensity,
    ) -> Result<IntensityField> {
        let n_bands = self.bands.len();
        for (context, len) in [
            ("emission bands", emission.len()),
            ("left boundary bands", boundary.left.len()),
            ("right boundary bands", boundary.right.len()),
        ] {
            if len != n_bands {
                return Err(Error::Dimension {
                    context,
                    expected: n_bands,
                    actual: len,
                });
            }
        }
        for e in emission {
            grid.check_len("emission profile", e.len())?;
        }

        let n_nodes = grid.n_nodes();
        let n_dirs = 2 * self.ordinates.len();
        let mut intensity = Vec::with_capacity(n_bands);
        let mut max_iters = 1;
        for (j, band) in self.bands.iter().enumerate() {
            let cells: Vec<CellCoefficients> = (0..self.ordinates.len())
                .map(|k| CellCoefficients::new(band.beta, grid.dx() / self.ordinates.mu()[k]))
                .collect();
            let kappa = band.kappa();
            let sigma = band.sigma_s();
            let mut dirs = vec![vec![0.0; n_nodes]; n_dirs];
            let mut source: Vec<f64> = emission[j].iter().map(|e| kappa * e).collect();
            if sigma == 0.0 {
                self.march_all(
                    &cells,
                    &source,
                    boundary.left[j],
                    boundary.right[j],
                    &mut dirs,
                );
                intensity.push(dirs);
                continue;
            }
            // Source iteration on the isotropic in-scattering term.
            let mut incident: Vec<f64> = emission[j].iter().map(|e| 2.0 * e).collect();
            let mut converged = false;
            let mut residual = f64::INFINITY;
            let mut iter = 0;
            while iter < self.max_scatter_iters {
                iter += 1;
                for ((s, e), g) in source.iter_mut().zip(&emission[j]).zip(&incident) {
                    *s = kappa * e + 0.5 * sigma * g;
                }
                self.march_all(
                    &cells,
                    &source,
                    boundary.left[j],
                    boundary.right[j],
                    &mut dirs,
                );
                let mut next = vec![0.0; n_nodes];
                for (d, values) in dirs.iter().enumerate() {
                    let w = self.ordinates.weight(d);
                    for (g, v) in next.iter_mut().zip(values) {
                        *g += w * v;
                    }
                }
                let scale = next.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let change = next
                    .iter()
                    .zip(&incident)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                residual = if scale > 0.0 { change / scale } else { change };
                incident = next;
                if residual < self.scatter_tol {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::Convergence {
                    what: format!("scattering source iteration in band {j}"),
                    iterations: iter,
                    residual,
                });
            }
            max_iters = max_iters.max(iter);
            intensity.push(dirs);
        }
        Ok(IntensityField {
            intensity,
            scatter_iterations: max_iters,
        })
    }

    fn march_all(
        &self,
        cells: &[CellCoefficients],
        source: &[f64],
        left: f64,
        right: f64,
        dirs: &mut [Vec<f64>],
    ) {
        let n = self.ordinates.len();
        let (forward, backward) = dirs.split_at_mut(n);
        for (k, c) in cells.iter().enumerate() {
            let out = &mut forward[k];
            out[0] = left;
            for i in 0..source.len() - 1 {
                out[i + 1] =
                    out[i] * c.attenuation + c.upstream * source[i] + c.downstream * source[i + 1];
            }
            let out = &mut backward[k];
            let last = source.len() - 1;
            out[last] = right;
            for i in (1..=last).rev() {
                out[i - 1] =
                    out[i] * c.attenuation + c.upstream * source[i] + c.downstream * source[i - 1];
            }
        }
    }
}

/// Exact cell propagator for a linearly varying source along a path of
/// length `s` with extinction β: `I_out = a·I_in + u·J_in + d·J_out`.
#[derive(Debug, Clone, Copy)]
struct CellCoefficients {
    attenuation: f64,
    upstream: f64,
    downstream: f64,
}

impl CellCoefficients {
    fn new(beta: f64, path: f64) -> Self {
        let tau = beta * path;
        let (attenuation, up, down) = if tau < 1e-3 {
            let t2 = tau * tau;
            (
                (-tau).exp(),
                0.5 - tau / 3.0 + t2 / 8.0 - t2 * tau / 30.0,
                0.5 - tau / 6.0 + t2 / 24.0 - t2 * tau / 120.0,
            )
        } else {
            let e = (-tau).exp();
            let phi = -(-tau).exp_m1() / tau;
            (e, (phi - e) / tau, (1.0 - phi) / tau)
        };
        Self {
            attenuation,
            upstream: path * up,
            downstream: path * down,
        }
    }
}

/// Net radiative flux `q_r(x) = 2π Σ_bands Σ_d w_d μ_d I_d`, W/m², positive
/// toward increasing x.
pub fn radiative_flux(field: &IntensityField, ordinates: &OrdinateSet) -> Result<Vec<f64>> {
    let n = ordinates.len();
    let first = field
        .intensity
        .first()
        .ok_or_else(|| Error::Input("intensity field has no bands".into()))?;
    if first.len() != 2 * n {
        return Err(Error::Dimension {
            context: "intensity directions",
            expected: 2 * n,
            actual: first.len(),
        });
    }
    let n_nodes = first[0].len();
    let mut q = vec![0.0; n_nodes];
    for dirs in &field.intensity {
        if dirs.len() != 2 * n {
            return Err(Error::Dimension {
                context: "intensity directions",
                expected: 2 * n,
                actual: dirs.len(),
            });
        }
        for k in 0..n {
            let wm = ordinates.weights()[k] * ordinates.mu()[k];
            let (fwd, bwd) = (&dirs[k], &dirs[n + k]);
            if fwd.len() != n_nodes || bwd.len() != n_nodes {
                return Err(Error::Dimension {
                    context: "intensity nodes",
                    expected: n_nodes,
                    actual: fwd.len().min(bwd.len()),
                });
            }
            for i in 0..n_nodes {
                q[i] += wm * (fwd[i] - bwd[i]);
            }
        }
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    q.iter_mut().for_each(|v| *v *= two_pi);
    Ok(q)
}

/// Volumetric radiative source `S_r = −dq_r/dx`, W/m³.
pub fn radiative_source(q_r: &[f64], grid: &Grid1D) -> Result<Vec<f64>> {
    if q_r.len() < 3 {
        return Err(Error::Input(format!(
            "radiative source needs at least 3 nodes, got {}",
            q_r.len()
        )));
    }
    grid.check_len("radiative flux", q_r.len())?;
    Ok(derivative(q_r, grid.dx()).into_iter().map(|d| -d).collect())
}
