//! Time loop coupling the radiation sweep to the implicit conduction step.
//!
//! Each step solves radiation from the latest temperature iterate, advances
//! conduction with that source, and repeats until two successive iterates
//! differ by less than `coupling.tol` at every node.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::conduction::{
    AfterRamp, BoundarySchedule, ConductionSolver, PicardSettings, ThermalState,
};
use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::material::MaterialModel;
use crate::radiation::{
    default_bands, radiative_flux, radiative_source, OrdinateSet, RadiationModel, SpectralBand,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub length_m: f64,
    pub n_nodes: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            length_m: 0.1,
            n_nodes: 201,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    pub dt_s: f64,
    pub t_end_s: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            dt_s: 0.05,
            t_end_s: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadiationConfig {
    pub enabled: bool,
    pub bands: Vec<SpectralBand>,
    pub n_ordinates: usize,
    /// Gauss–Legendre panels per band for the Planck integral.
    pub n_sub: usize,
    pub scatter_tol: f64,
    pub max_scatter_iters: usize,
}

impl Default for RadiationConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            bands: default_bands(),
            n_ordinates: 8,
            n_sub: 8,
            scatter_tol: 1e-8,
            max_scatter_iters: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CouplingConfig {
    /// K
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iters: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Snapshot times, s.
    pub snapshots: Vec<f64>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            snapshots: vec![1.0, 5.0, 10.0, 50.0, 100.0],
        }
    }
}

/// Controls for steady-state detection on the sampled temperature history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SteadyConfig {
    /// Sampling interval of the history, s.
    pub interval_s: f64,
    /// Samples per window.
    pub window: usize,
    /// K
    pub eps: f64,
}

impl Default for SteadyConfig {
    fn default() -> Self {
        Self {
            interval_s: 1.0,
            window: 5,
            eps: 0.05,
        }
    }
}

/// Material given either inline or by preset name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaterialSpec {
    Preset(String),
    Inline(MaterialModel),
}

impl Default for MaterialSpec {
    fn default() -> Self {
        MaterialSpec::Inline(MaterialModel::default())
    }
}

impl MaterialSpec {
    pub fn resolve(&self) -> Result<MaterialModel> {
        match self {
            MaterialSpec::Preset(name) => MaterialModel::preset(name)
                .ok_or_else(|| Error::config("material", format!("unknown preset `{name}`"))),
            MaterialSpec::Inline(m) => {
                m.validate()?;
                Ok(m.clone())
            }
        }
    }
}

fn default_bc() -> BoundarySchedule {
    BoundarySchedule {
        after_ramp: AfterRamp::Hold,
        ..BoundarySchedule::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub bc: BoundarySchedule,
    pub material: MaterialSpec,
    pub radiation: RadiationConfig,
    pub coupling: CouplingConfig,
    pub picard: PicardSettings,
    pub output: OutputConfig,
    pub steady: SteadyConfig,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            time: TimeConfig::default(),
            bc: default_bc(),
            material: MaterialSpec::default(),
            radiation: RadiationConfig::default(),
            coupling: CouplingConfig::default(),
            picard: PicardSettings::default(),
            output: OutputConfig::default(),
            steady: SteadyConfig::default(),
        }
    }
}

impl SimulationConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        Self::from_value(value)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        let config: Self =
            serde_json::from_value(value).map_err(|e| Error::config("config", e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        Grid1D::new(self.grid.length_m, self.grid.n_nodes)?;
        let dt = self.time.dt_s;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::config(
                "time.dt_s",
                format!("must be positive, got {dt}"),
            ));
        }
        if !(self.time.t_end_s >= dt && self.time.t_end_s.is_finite()) {
            return Err(Error::config(
                "time.t_end_s",
                "must be at least one time step",
            ));
        }
        self.bc.validate()?;
        self.material.resolve()?;
        self.radiation_model()?;
        if !(self.coupling.tol > 0.0) {
            return Err(Error::config("coupling.tol", "must be positive"));
        }
        if self.coupling.max_iters == 0 {
            return Err(Error::config("coupling.max_iters", "must be at least 1"));
        }
        if !(self.picard.tol > 0.0) {
            return Err(Error::config("picard.tol", "must be positive"));
        }
        if self.picard.max_iters == 0 {
            return Err(Error::config("picard.max_iters", "must be at least 1"));
        }
        for &s in &self.output.snapshots {
            if !(s >= 0.0 && s <= self.time.t_end_s) {
                return Err(Error::config(
                    "output.snapshots",
                    format!("snapshot time {s} outside [0, {}]", self.time.t_end_s),
                ));
            }
        }
        if self.steady.window < 2 {
            return Err(Error::config("steady.window", "must be at least 2"));
        }
        if !(self.steady.interval_s > 0.0) {
            return Err(Error::config("steady.interval_s", "must be positive"));
        }
        if !(self.steady.eps > 0.0) {
            return Err(Error::config("steady.eps", "must be positive"));
        }
        Ok(())
    }

    pub fn radiation_model(&self) -> Result<RadiationModel> {
        let r = &self.radiation;
        RadiationModel::new(
            r.bands.clone(),
            OrdinateSet::gauss(r.n_ordinates)?,
            r.n_sub,
            r.scatter_tol,
            r.max_scatter_iters,
        )
    }

    fn n_steps(&self) -> usize {
        (self.time.t_end_s / self.time.dt_s).round() as usize
    }
}

/// Profiles recorded at one snapshot time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub temperature: Vec<f64>,
    pub q_cond: Vec<f64>,
    pub q_rad: Vec<f64>,
    pub q_total: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub steps: usize,
    pub total_coupling_iterations: usize,
    pub max_coupling_iterations: usize,
    pub max_picard_iterations: usize,
    pub max_scatter_iterations: usize,
    /// Largest relative energy-balance residual over all steps.
    pub max_energy_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    pub x: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub steady_state_time: Option<f64>,
    pub diagnostics: Diagnostics,
}

/// Radiative flux and source for a temperature profile, or zeros when
/// radiation is disabled.
struct RadiationStage {
    model: Option<RadiationModel>,
}

struct RadiationOutput {
    q_rad: Vec<f64>,
    s_rad: Vec<f64>,
    scatter_iterations: usize,
}

impl RadiationStage {
    fn solve(
        &self,
        grid: &Grid1D,
        temperature: &[f64],
        t_left: f64,
        t_right: f64,
    ) -> Result<RadiationOutput> {
        let n = grid.n_nodes();
        match &self.model {
            None => Ok(RadiationOutput {
                q_rad: vec![0.0; n],
                s_rad: vec![0.0; n],
                scatter_iterations: 0,
            }),
            Some(model) => {
                let field = model.sweep_intensity(grid, temperature, t_left, t_right)?;
                let q_rad = radiative_flux(&field, model.ordinates())?;
                let s_rad = radiative_source(&q_rad, grid)?;
                Ok(RadiationOutput {
                    q_rad,
                    s_rad,
                    scatter_iterations: field.scatter_iterations,
                })
            }
        }
    }
}

fn at_step(step: usize, err: Error) -> Error {
    match err {
        Error::Convergence {
            what,
            iterations,
            residual,
        } => Error::Convergence {
            what: format!("{what} at step {step}"),
            iterations,
            residual,
        },
        Error::Domain { what, value } => {
            Error::Input(format!("{what} out of domain ({value}) at step {step}"))
        }
        other => other,
    }
}

/// Runs the coupled transient from the uniform initial state `T(x, 0) = T_E`.
pub fn run_simulation(config: &SimulationConfig) -> Result<SimulationResult> {
    config.validate()?;
    let grid = Grid1D::new(config.grid.length_m, config.grid.n_nodes)?;
    let model = config.material.resolve()?;
    let mut conduction = ConductionSolver::new(model, grid.clone(), config.bc.clone());
    conduction.picard = config.picard;
    let radiation = RadiationStage {
        model: if config.radiation.enabled {
            Some(config.radiation_model()?)
        } else {
            None
        },
    };

    let dt = config.time.dt_s;
    let n_steps = config.n_steps();
    let n = grid.n_nodes();
    let t_e = config.bc.t_e;

    let mut snapshot_steps: Vec<usize> = config
        .output
        .snapshots
        .iter()
        .map(|&s| ((s / dt).round() as usize).min(n_steps))
        .collect();
    snapshot_steps.sort_unstable();
    snapshot_steps.dedup();
    let history_stride = ((config.steady.interval_s / dt).round() as usize).max(1);

    let mut state = ThermalState::uniform(0.0, t_e, n);
    let mut snapshots = Vec::with_capacity(snapshot_steps.len());
    let mut history: Vec<(f64, Vec<f64>)> = vec![(0.0, state.temperature.clone())];
    let mut diagnostics = Diagnostics::default();
    let mut next_snapshot = 0;

    let record = |step: usize, state: &ThermalState, snapshots: &mut Vec<Snapshot>| -> Result<()> {
        let left = config.bc.boundary_temperature(state.t)?;
        let rad = radiation
            .solve(&grid, &state.temperature, left, t_e)
            .map_err(|e| at_step(step, e))?;
        let q_cond = conduction
            .conductive_flux(state)
            .map_err(|e| at_step(step, e))?;
        let q_total = q_cond.iter().zip(&rad.q_rad).map(|(a, b)| a + b).collect();
        snapshots.push(Snapshot {
            t: state.t,
            temperature: state.temperature.clone(),
            q_cond,
            q_rad: rad.q_rad,
            q_total,
        });
        Ok(())
    };

    while next_snapshot < snapshot_steps.len() && snapshot_steps[next_snapshot] == 0 {
        record(0, &state, &mut snapshots)?;
        next_snapshot += 1;
    }

    for step in 1..=n_steps {
        let t_new = step as f64 * dt;
        let left = config.bc.boundary_temperature(t_new)?;
        let mut iterate = state.temperature.clone();
        iterate[0] = left;
        iterate[n - 1] = t_e;
        let mut accepted = None;
        let mut change = f64::INFINITY;
        for c in 1..=config.coupling.max_iters {
            let rad = radiation
                .solve(&grid, &iterate, left, t_e)
                .map_err(|e| at_step(step, e))?;
            diagnostics.max_scatter_iterations = diagnostics
                .max_scatter_iterations
                .max(rad.scatter_iterations);
            let (next, stats) = conduction
                .implicit_step_with_stats(&state, &rad.s_rad, dt)
                .map_err(|e| at_step(step, e))?;
            diagnostics.max_picard_iterations =
                diagnostics.max_picard_iterations.max(stats.iterations);
            change = next
                .temperature
                .iter()
                .zip(&iterate)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            iterate.clone_from(&next.temperature);
            let done = radiation.model.is_none() || change < config.coupling.tol;
            if done {
                diagnostics.total_coupling_iterations += c;
                diagnostics.max_coupling_iterations = diagnostics.max_coupling_iterations.max(c);
                let balance = conduction.energy_balance(&state, &next, &rad.s_rad, dt)?;
                diagnostics.max_energy_residual = diagnostics
                    .max_energy_residual
                    .max(balance.relative_residual());
                accepted = Some(next);
                break;
            }
        }
        state = accepted.ok_or_else(|| Error::Convergence {
            what: format!("radiation-conduction coupling at step {step}"),
            iterations: config.coupling.max_iters,
            residual: change,
        })?;
        // keep the nominal time exact rather than accumulating dt
        state.t = t_new;
        diagnostics.steps = step;

        if step % history_stride == 0 || step == n_steps {
            history.push((state.t, state.temperature.clone()));
        }
        while next_snapshot < snapshot_steps.len() && snapshot_steps[next_snapshot] == step {
            record(step, &state, &mut snapshots)?;
            next_snapshot += 1;
        }
    }

    let steady_state_time = detect_steady_state(&history, config.steady.window, config.steady.eps);
    Ok(SimulationResult {
        x: grid.x().to_vec(),
        snapshots,
        steady_state_time,
        diagnostics,
    })
}

/// Earliest sample time after which every window of `window` consecutive
/// samples changes each node by less than `eps` (max − min over the window).
/// Returns `None` when even the last window fails or the history is shorter
/// than one window.
pub fn detect_steady_state(history: &[(f64, Vec<f64>)], window: usize, eps: f64) -> Option<f64> {
    let window = window.max(2);
    if history.len() < window {
        return None;
    }
    let n_windows = history.len() - window + 1;
    let spread = |start: usize| -> f64 {
        let block = &history[start..start + window];
        let nodes = block[0].1.len();
        let mut worst = 0.0f64;
        for i in 0..nodes {
            let (lo, hi) = block
                .iter()
                .map(|(_, t)| t[i])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                });
            worst = worst.max(hi - lo);
        }
        worst
    };
    let mut earliest = None;
    for start in (0..n_windows).rev() {
        if spread(start) < eps {
            earliest = Some(start);
        } else {
            break;
        }
    }
    earliest.map(|s| history[s].0)
}
