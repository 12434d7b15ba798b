//! Backward-Euler advance of `ρc_p ∂T/∂t = ∂/∂x (K ∂T/∂x) + S_r` with
//! Dirichlet faces.
//!
//! The diffusion term is written as `k_ref ∂²θ/∂x²` in the Kirchhoff variable
//! θ, so each Picard iterate is a linear tridiagonal solve for the increment
//! `δθ`. Within an iterate ρc_p and the slope `dT/dθ = k_ref/K` are frozen at
//! the previous temperature estimate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{derivative, Grid1D};
use crate::material::MaterialModel;

/// What the heated face does once the ramp is over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AfterRamp {
    /// Fall back to `base_T` (the front face steps down at `ramp_end`).
    #[default]
    Reset,
    /// Hold the peak value `ramp_rate · ramp_end + base_T`.
    Hold,
}

/// Front-face temperature `f(t)` and the fixed back-face temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySchedule {
    /// K/s
    pub ramp_rate: f64,
    /// s
    pub ramp_end: f64,
    #[serde(rename = "base_T")]
    pub base_t: f64,
    #[serde(rename = "T_E")]
    pub t_e: f64,
    #[serde(default)]
    pub after_ramp: AfterRamp,
}

impl Default for BoundarySchedule {
    fn default() -> Self {
        Self {
            ramp_rate: 50.0,
            ramp_end: 1.0,
            base_t: 300.0,
            t_e: 300.0,
            after_ramp: AfterRamp::Reset,
        }
    }
}

impl BoundarySchedule {
    /// Fixed faces: `front` at x = 0 and `back` at x = E for all t.
    pub fn held(front: f64, back: f64) -> Self {
        Self {
            ramp_rate: 0.0,
            ramp_end: 0.0,
            base_t: front,
            t_e: back,
            after_ramp: AfterRamp::Hold,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.ramp_rate.is_finite() {
            return Err(Error::config("bc.ramp_rate", "must be finite"));
        }
        if !(self.ramp_end >= 0.0 && self.ramp_end.is_finite()) {
            return Err(Error::config("bc.ramp_end", "must be non-negative"));
        }
        if !(self.base_t > 0.0 && self.base_t.is_finite()) {
            return Err(Error::config("bc.base_T", "must be positive"));
        }
        if !(self.t_e > 0.0 && self.t_e.is_finite()) {
            return Err(Error::config("bc.T_E", "must be positive"));
        }
        Ok(())
    }

    /// Front-face temperature at time `t`.
    pub fn boundary_temperature(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain {
                what: "time",
                value: t,
            });
        }
        Ok(if t <= self.ramp_end {
            self.ramp_rate * t + self.base_t
        } else {
            match self.after_ramp {
                AfterRamp::Reset => self.base_t,
                AfterRamp::Hold => self.ramp_rate * self.ramp_end + self.base_t,
            }
        })
    }
}

/// Temperature profile at one time level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThermalState {
    /// s
    pub t: f64,
    /// K, one value per node
    pub temperature: Vec<f64>,
}

impl ThermalState {
    pub fn uniform(t: f64, value: f64, n_nodes: usize) -> Self {
        Self {
            t,
            temperature: vec![value; n_nodes],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardSettings {
    /// Max node change between iterates, K.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for PicardSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub iterations: usize,
    /// Max node change of the last Picard iterate, K.
    pub residual: f64,
}

/// Implicit conduction solver for one material, grid and boundary schedule.
#[derive(Debug, Clone)]
pub struct ConductionSolver {
    pub model: MaterialModel,
    pub grid: Grid1D,
    pub schedule: BoundarySchedule,
    pub picard: PicardSettings,
}

impl ConductionSolver {
    pub fn new(model: MaterialModel, grid: Grid1D, schedule: BoundarySchedule) -> Self {
        Self {
            model,
            grid,
            schedule,
            picard: PicardSettings::default(),
        }
    }

    /// Advances `state` by `dt` with the radiative source `s_r` (W/m³) held
    /// fixed over the step.
    pub fn implicit_step(
        &self,
        state: &ThermalState,
        s_r: &[f64],
        dt: f64,
    ) -> Result<ThermalState> {
        self.implicit_step_with_stats(state, s_r, dt)
            .map(|(s, _)| s)
    }

    pub fn implicit_step_with_stats(
        &self,
        state: &ThermalState,
        s_r: &[f64],
        dt: f64,
    ) -> Result<(ThermalState, StepStats)> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain {
                what: "time step",
                value: dt,
            });
        }
        let grid = &self.grid;
        grid.check_len("thermal state", state.temperature.len())?;
        grid.check_len("radiative source", s_r.len())?;
        let model = &self.model;
        let n = grid.n_nodes();
        let m = n - 2;
        let inv_dx2 = 1.0 / (grid.dx() * grid.dx());
        let t_new = state.t + dt;

        let old = &state.temperature;
        let mut temp = old.clone();
        temp[0] = self.schedule.boundary_temperature(t_new)?;
        temp[n - 1] = self.schedule.t_e;

        let mut theta = vec![0.0; n];
        let mut lower = vec![-inv_dx2; m];
        let mut upper = vec![-inv_dx2; m];
        let mut diag = vec![0.0; m];
        let mut rhs = vec![0.0; m];
        lower[0] = 0.0;
        upper[m - 1] = 0.0;

        let mut residual = f64::INFINITY;
        for iter in 1..=self.picard.max_iters {
            for (th, &t) in theta.iter_mut().zip(&temp) {
                *th = model.kirchhoff_theta(t)?;
            }
            for r in 0..m {
                let i = r + 1;
                let rho_cp = model.volumetric_heat_capacity_unchecked(temp[i]);
                let k = model.conductivity_unchecked(temp[i]);
                diag[r] = rho_cp / (k * dt) + 2.0 * inv_dx2;
                rhs[r] = s_r[i] / model.k_ref
                    + rho_cp / (model.k_ref * dt) * (old[i] - temp[i])
                    + (theta[i + 1] - 2.0 * theta[i] + theta[i - 1]) * inv_dx2;
            }
            let delta = solve_tridiagonal(&lower, &diag, &upper, &rhs)?;
            residual = 0.0;
            for (r, d) in delta.iter().enumerate() {
                let i = r + 1;
                let next = model.kirchhoff_inverse_from(theta[i] + d, temp[i])?;
                residual = residual.max((next - temp[i]).abs());
                temp[i] = next;
            }
            if residual < self.picard.tol {
                return Ok((
                    ThermalState {
                        t: t_new,
                        temperature: temp,
                    },
                    StepStats {
                        iterations: iter,
                        residual,
                    },
                ));
            }
        }
        Err(Error::Convergence {
            what: "Picard iteration".into(),
            iterations: self.picard.max_iters,
            residual,
        })
    }

    /// Conductive flux `q_c = −K(T) dT/dx`, W/m².
    pub fn conductive_flux(&self, state: &ThermalState) -> Result<Vec<f64>> {
        conductive_flux(&self.model, state, &self.grid)
    }

    /// Energy bookkeeping of one step, using the fluxes the scheme itself
    /// exchanges through the two boundary half-cells.
    pub fn energy_balance(
        &self,
        old: &ThermalState,
        new: &ThermalState,
        s_r: &[f64],
        dt: f64,
    ) -> Result<EnergyBalance> {
        let grid = &self.grid;
        grid.check_len("old state", old.temperature.len())?;
        grid.check_len("new state", new.temperature.len())?;
        grid.check_len("radiative source", s_r.len())?;
        let model = &self.model;
        let n = grid.n_nodes();
        let dx = grid.dx();
        let mut stored = 0.0;
        let mut source = 0.0;
        let mut source_abs = 0.0;
        for i in 1..n - 1 {
            let rho_cp = model.volumetric_heat_capacity(new.temperature[i])?;
            stored += rho_cp * (new.temperature[i] - old.temperature[i]) * dx;
            source += s_r[i] * dx;
            source_abs += s_r[i].abs() * dx;
        }
        let theta = |i: usize| model.kirchhoff_theta(new.temperature[i]);
        let q_in = -model.k_ref * (theta(1)? - theta(0)?) / dx;
        let q_out = -model.k_ref * (theta(n - 1)? - theta(n - 2)?) / dx;
        let inflow = dt * (q_in - q_out + source);
        let scale = stored
            .abs()
            .max(dt * (q_in.abs() + q_out.abs() + source_abs));
        Ok(EnergyBalance {
            stored,
            inflow,
            scale,
        })
    }
}

/// Stored energy versus net inflow over one step, J/m².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBalance {
    pub stored: f64,
    pub inflow: f64,
    /// Magnitude of the gross exchanges, used to normalise the residual.
    pub scale: f64,
}

impl EnergyBalance {
    pub fn relative_residual(&self) -> f64 {
        if self.scale == 0.0 {
            0.0
        } else {
            (self.stored - self.inflow).abs() / self.scale
        }
    }
}

/// Conductive flux `q_c = −K(T) dT/dx` with second-order differences, W/m².
pub fn conductive_flux(
    model: &MaterialModel,
    state: &ThermalState,
    grid: &Grid1D,
) -> Result<Vec<f64>> {
    grid.check_len("thermal state", state.temperature.len())?;
    let grad = derivative(&state.temperature, grid.dx());
    state
        .temperature
        .iter()
        .zip(grad)
        .map(|(&t, g)| Ok(-model.conductivity(t)? * g))
        .collect()
}

/// Thomas algorithm for a tridiagonal system. `lower[0]` and
/// `upper[n-1]` are ignored.
pub fn solve_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let n = diag.len();
    if lower.len() != n || upper.len() != n || rhs.len() != n {
        return Err(Error::Dimension {
            context: "tridiagonal system",
            expected: n,
            actual: lower.len().min(upper.len()).min(rhs.len()),
        });
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = diag[0];
    for i in 0..n {
        if i > 0 {
            pivot = diag[i] - lower[i] * c[i - 1];
        }
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::Input(format!(
                "singular tridiagonal system at row {i}"
            )));
        }
        c[i] = if i + 1 < n { upper[i] / pivot } else { 0.0 };
        d[i] = if i == 0 {
            rhs[0] / pivot
        } else {
            (rhs[i] - lower[i] * d[i - 1]) / pivot
        };
    }
    let mut x = d;
    for i in (0..n.saturating_sub(1)).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn solver(model: MaterialModel, n: usize, schedule: BoundarySchedule) -> ConductionSolver {
        ConductionSolver::new(model, Grid1D::new(0.1, n).unwrap(), schedule)
    }

    #[test]
    fn boundary_schedule_examples() {
        let s = BoundarySchedule::default();
        assert_eq!(s.boundary_temperature(0.0).unwrap(), 300.0);
        assert_eq!(s.boundary_temperature(1.0).unwrap(), 350.0);
        assert_eq!(s.boundary_temperature(5.0).unwrap(), 300.0);
        assert!(s.boundary_temperature(-0.1).is_err());
        let hold = BoundarySchedule {
            after_ramp: AfterRamp::Hold,
            ..s
        };
        assert_eq!(hold.boundary_temperature(5.0).unwrap(), 350.0);
        assert_eq!(hold.boundary_temperature(0.5).unwrap(), 325.0);
    }

    #[test]
    fn thomas_matches_dense_solution() {
        let lower = [0.0, -1.0, -1.0, -1.0];
        let diag = [4.0, 4.0, 4.0, 4.0];
        let upper = [-1.0, -1.0, -1.0, 0.0];
        let x_true = [1.0, -2.0, 0.5, 3.0];
        let mut rhs = [0.0; 4];
        for i in 0..4 {
            rhs[i] = diag[i] * x_true[i];
            if i > 0 {
                rhs[i] += lower[i] * x_true[i - 1];
            }
            if i < 3 {
                rhs[i] += upper[i] * x_true[i + 1];
            }
        }
        let x = solve_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();
        for (a, b) in x.iter().zip(x_true) {
            assert_relative_eq!(*a, b, epsilon = 1e-14);
        }
        assert!(solve_tridiagonal(&[0.0], &[0.0], &[0.0], &[1.0]).is_err());
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let model = MaterialModel::new(0.2, vec![0.6, 0.4], 1.7e6, vec![0.7, 0.3]).unwrap();
        let s = solver(model, 41, BoundarySchedule::held(300.0, 300.0));
        let state = ThermalState::uniform(0.0, 300.0, 41);
        let next = s.implicit_step(&state, &[0.0; 41], 0.5).unwrap();
        assert_eq!(next.temperature, state.temperature);
        assert_eq!(next.t, 0.5);
    }

    #[test]
    fn long_run_reaches_linear_profile() {
        let model = MaterialModel::constant(0.2, 1.7e6).unwrap();
        let s = solver(model, 51, BoundarySchedule::held(350.0, 300.0));
        let mut state = ThermalState::uniform(0.0, 300.0, 51);
        for _ in 0..50 {
            state = s.implicit_step(&state, &[0.0; 51], 1e7).unwrap();
        }
        for (x, t) in s.grid.x().iter().zip(&state.temperature) {
            assert!((t - (350.0 - 50.0 / 0.1 * x)).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_properties_match_direct_temperature_stepping() {
        // Oracle: backward Euler written directly in T.
        let k = 0.2;
        let rc = 1.0e5;
        let model = MaterialModel::constant(k, rc).unwrap();
        let n = 31;
        let s = solver(model, n, BoundarySchedule::held(340.0, 300.0));
        let dx = s.grid.dx();
        let dt = 0.7;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let old: Vec<f64> = (0..n).map(|_| rng.gen_range(300.0..340.0)).collect();
        let src: Vec<f64> = (0..n).map(|_| rng.gen_range(-500.0..500.0)).collect();
        let state = ThermalState {
            t: 0.0,
            temperature: old.clone(),
        };
        let got = s.implicit_step(&state, &src, dt).unwrap();

        let r = k * dt / (rc * dx * dx);
        let m = n - 2;
        let lower = vec![-r; m];
        let upper = vec![-r; m];
        let diag = vec![1.0 + 2.0 * r; m];
        let mut rhs: Vec<f64> = (1..n - 1).map(|i| old[i] + dt * src[i] / rc).collect();
        rhs[0] += r * 340.0;
        rhs[m - 1] += r * 300.0;
        let direct = solve_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();
        for (a, b) in got.temperature[1..n - 1].iter().zip(&direct) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    /// Explicit Euler with many substeps on the same semi-discrete system,
    /// frozen at the initial ρc_p(T) and K(T).
    fn explicit_oracle(s: &ConductionSolver, old: &[f64], dt: f64, substeps: usize) -> Vec<f64> {
        let n = old.len();
        let h = dt / substeps as f64;
        let dx2 = s.grid.dx() * s.grid.dx();
        let mut t = old.to_vec();
        t[0] = s.schedule.t_e;
        t[n - 1] = s.schedule.t_e;
        for _ in 0..substeps {
            let theta: Vec<f64> = t
                .iter()
                .map(|&v| s.model.kirchhoff_theta(v).unwrap())
                .collect();
            let mut next = t.clone();
            for i in 1..n - 1 {
                let rc = s.model.volumetric_heat_capacity(t[i]).unwrap();
                next[i] = t[i]
                    + h * s.model.k_ref * (theta[i + 1] - 2.0 * theta[i] + theta[i - 1])
                        / (dx2 * rc);
            }
            t = next;
        }
        t
    }

    #[test]
    fn one_step_agrees_with_explicit_oracle_to_first_order() {
        let model = MaterialModel::new(0.2, vec![0.6, 0.4], 1.7e6, vec![0.8, 0.2]).unwrap();
        let n = 21;
        let s = solver(model, n, BoundarySchedule::held(300.0, 300.0));
        let old: Vec<f64> = s
            .grid
            .x()
            .iter()
            .map(|x| 300.0 + 40.0 * (std::f64::consts::PI * x / 0.1).sin())
            .collect();
        let state = ThermalState {
            t: 0.0,
            temperature: old.clone(),
        };
        let mut errs = Vec::new();
        for dt in [200.0, 100.0, 50.0] {
            let implicit = s.implicit_step(&state, &vec![0.0; n], dt).unwrap();
            let reference = explicit_oracle(&s, &old, dt, 1000);
            let err = implicit
                .temperature
                .iter()
                .zip(&reference)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            errs.push(err);
        }
        // local error is O(dt²): halving dt cuts it by ≈ 4
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!(ratio > 3.0 && ratio < 5.0, "ratio {ratio}, errors {errs:?}");
        }
    }

    #[test]
    fn maximum_principle_without_source() {
        let model = MaterialModel::new(0.2, vec![0.6, 0.4], 1.0e5, vec![1.0]).unwrap();
        let n = 41;
        let s = solver(model, n, BoundarySchedule::held(320.0, 300.0));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut state = ThermalState {
            t: 0.0,
            temperature: (0..n).map(|_| rng.gen_range(290.0..330.0)).collect(),
        };
        let lo = state.temperature.iter().cloned().fold(300.0, f64::min);
        let hi = state.temperature.iter().cloned().fold(320.0, f64::max);
        for _ in 0..20 {
            state = s.implicit_step(&state, &vec![0.0; n], 5.0).unwrap();
            assert!(state
                .temperature
                .iter()
                .all(|&t| t >= lo - 1e-9 && t <= hi + 1e-9));
        }
    }

    #[test]
    fn energy_balance_closes() {
        let model = MaterialModel::new(0.2, vec![0.5, 0.5], 1.0e5, vec![0.7, 0.3]).unwrap();
        let n = 51;
        let mut s = solver(model, n, BoundarySchedule::held(360.0, 300.0));
        s.picard.tol = 1e-11;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let src: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2000.0)).collect();
        let mut state = ThermalState::uniform(0.0, 300.0, n);
        for _ in 0..10 {
            let next = s.implicit_step(&state, &src, 2.0).unwrap();
            let bal = s.energy_balance(&state, &next, &src, 2.0).unwrap();
            assert!(bal.relative_residual() < 1e-6, "{bal:?}");
            state = next;
        }
    }

    #[test]
    fn picard_failure_is_reported() {
        let model = MaterialModel::new(0.2, vec![0.2, 0.8], 1.0e5, vec![0.2, 0.8]).unwrap();
        let mut s = solver(model, 21, BoundarySchedule::held(400.0, 300.0));
        s.picard.max_iters = 1;
        s.picard.tol = 1e-14;
        let state = ThermalState::uniform(0.0, 300.0, 21);
        let err = s.implicit_step(&state, &vec![0.0; 21], 50.0).unwrap_err();
        assert!(
            matches!(err, Error::Convergence { iterations: 1, .. }),
            "{err}"
        );
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = solver(MaterialModel::default(), 11, BoundarySchedule::default());
        let state = ThermalState::uniform(0.0, 300.0, 11);
        assert!(s.implicit_step(&state, &[0.0; 11], 0.0).is_err());
        assert!(s.implicit_step(&state, &[0.0; 10], 0.1).is_err());
        let short = ThermalState::uniform(0.0, 300.0, 9);
        assert!(s.implicit_step(&short, &[0.0; 11], 0.1).is_err());
    }

    #[test]
    fn conductive_flux_examples() {
        let grid = Grid1D::new(0.1, 11).unwrap();
        let model = MaterialModel::constant(0.2, 1.0e6).unwrap();
        let flat = ThermalState::uniform(0.0, 320.0, 11);
        assert!(conductive_flux(&model, &flat, &grid)
            .unwrap()
            .iter()
            .all(|&q| q == 0.0));

        let linear = ThermalState {
            t: 0.0,
            temperature: grid.x().iter().map(|x| 350.0 - 500.0 * x).collect(),
        };
        for q in conductive_flux(&model, &linear, &grid).unwrap() {
            assert_relative_eq!(q, 100.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn conductive_flux_of_quadratic_profile() {
        let grid = Grid1D::new(0.1, 21).unwrap();
        let model = MaterialModel::new(0.2, vec![0.5, 0.5], 1.0e6, vec![1.0]).unwrap();
        let profile = |x: f64| 350.0 - 300.0 * x - 2000.0 * x * x;
        let state = ThermalState {
            t: 0.0,
            temperature: grid.x().iter().map(|&x| profile(x)).collect(),
        };
        let q = conductive_flux(&model, &state, &grid).unwrap();
        // central differences are exact for a quadratic profile
        for (i, &x) in grid.x().iter().enumerate().skip(1).take(19) {
            let grad = -300.0 - 4000.0 * x;
            let expected = -model.conductivity(profile(x)).unwrap() * grad;
            assert!(
                (q[i] - expected).abs() < 1e-9 * expected.abs(),
                "{} vs {}",
                q[i],
                expected
            );
        }
    }
}
