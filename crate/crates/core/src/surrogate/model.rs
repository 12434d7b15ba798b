use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lstm::{forward_sequence, LstmParams};
use super::normalize::Normalizer;
use super::reduce::mahalanobis_reduce;
use super::train::{init_params, train_bptt, LossRecord, Sequence, TrainHyper};
use crate::error::{Error, Result};
use crate::io::DatasetRow;

pub const INPUT_FEATURES: [&str; 2] = ["time_s", "x_m"];
pub const TARGET_FEATURES: [&str; 3] = ["temperature_K", "q_rad_W_m2", "q_cond_W_m2"];
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateConfig {
    pub hidden_size: usize,
    /// Maximum sequence length; each profile is cut into consecutive windows.
    pub window: usize,
    pub train_fraction: f64,
    /// Mahalanobis separation applied to the training rows; 0 keeps all.
    pub mahalanobis_tau: f64,
    pub split: SplitMode,
    pub hyper: TrainHyper,
}

/// Parameters that reproduce a train/test partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub train_fraction: f64,
    pub seed: u64,
}

/// How windows are assigned to the train and test sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    /// Earliest windows train, latest test.
    Chronological,
    /// Seeded permutation of the windows.
    Shuffled,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            hidden_size: 32,
            window: 16,
            train_fraction: 0.8,
            mahalanobis_tau: 0.0,
            split: SplitMode::Shuffled,
            hyper: TrainHyper::default(),
        }
    }
}

impl SurrogateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_size == 0 {
            return Err(Error::config("surrogate.hidden_size", "must be positive"));
        }
        if self.window == 0 {
            return Err(Error::config("surrogate.window", "must be positive"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::config(
                "surrogate.train_fraction",
                format!("must be in (0, 1], got {}", self.train_fraction),
            ));
        }
        if !(self.mahalanobis_tau >= 0.0) {
            return Err(Error::config("surrogate.mahalanobis_tau", "must be >= 0"));
        }
        self.hyper.validate()
    }
}

fn inputs_of(r: &DatasetRow) -> [f64; 2] {
    [r.t, r.x]
}

fn targets_of(r: &DatasetRow) -> [f64; 3] {
    [r.temperature, r.q_rad, r.q_cond]
}

/// Row indices grouped by profile `(t, run_id)` in chronological order, each
/// group sorted by position.
fn profile_groups(rows: &[DatasetRow], subset: &[usize]) -> Vec<Vec<usize>> {
    let mut idx = subset.to_vec();
    idx.sort_by(|&a, &b| {
        let (ra, rb) = (&rows[a], &rows[b]);
        ra.t.total_cmp(&rb.t)
            .then(ra.run_id.cmp(&rb.run_id))
            .then(ra.x.total_cmp(&rb.x))
            .then(a.cmp(&b))
    });
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in idx {
        let same = groups.last().is_some_and(|g| {
            let r = &rows[g[0]];
            r.t.to_bits() == rows[i].t.to_bits() && r.run_id == rows[i].run_id
        });
        if same {
            groups.last_mut().unwrap().push(i);
        } else {
            groups.push(vec![i]);
        }
    }
    groups
}

/// Row indices of each profile cut into consecutive windows of at most
/// `window` rows, in chronological order.
pub fn profile_windows(rows: &[DatasetRow], window: usize) -> Vec<Vec<usize>> {
    let all: Vec<usize> = (0..rows.len()).collect();
    profile_groups(rows, &all)
        .iter()
        .flat_map(|g| g.chunks(window.max(1)).map(<[usize]>::to_vec))
        .collect()
}

/// Divides windows into train and test. `fraction` of them (rounded, at
/// least one, and leaving at least one for testing when possible) train.
pub fn split_windows(
    windows: &[Vec<usize>],
    fraction: f64,
    mode: SplitMode,
    seed: u64,
) -> Result<(Vec<Vec<usize>>, Vec<Vec<usize>>)> {
    let n = windows.len();
    if n == 0 {
        return Err(Error::Input("dataset is empty".into()));
    }
    let mut n_train = ((fraction * n as f64).round() as usize).clamp(1, n);
    if n >= 2 && fraction < 1.0 {
        n_train = n_train.min(n - 1);
    }
    let mut order: Vec<usize> = (0..n).collect();
    if mode == SplitMode::Shuffled {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(2);
        order.shuffle(&mut rng);
    }
    let (train, test) = order.split_at(n_train);
    let pick = |ids: &[usize]| {
        let mut ids = ids.to_vec();
        ids.sort_unstable();
        ids.into_iter()
            .map(|k| windows[k].clone())
            .collect::<Vec<_>>()
    };
    Ok((pick(train), pick(test)))
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub loss_curve: Vec<LossRecord>,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    /// Training rows left after Mahalanobis reduction.
    pub reduced_rows: usize,
    pub dropped_inputs: Vec<String>,
}

/// Anything that maps dataset rows to `(T, q_r, q_c)` predictions.
pub trait Predictor {
    fn predict(&self, rows: &[DatasetRow]) -> Result<Vec<[f64; 3]>>;
}

/// Returns the ground truth carried in the rows.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityPredictor;

impl Predictor for IdentityPredictor {
    fn predict(&self, rows: &[DatasetRow]) -> Result<Vec<[f64; 3]>> {
        Ok(rows.iter().map(targets_of).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Surrogate {
    pub params: LstmParams,
    /// Input columns actually fed to the network, a subset of
    /// [`INPUT_FEATURES`] in that order.
    pub input_features: Vec<String>,
    pub input_normalizer: Normalizer,
    pub target_normalizer: Normalizer,
    pub window: usize,
    pub split: SplitSpec,
}

impl Surrogate {
    /// Splits, normalises, windows and trains. Input columns that are constant
    /// over the training rows carry no information and are dropped; a
    /// constant target is an error.
    pub fn fit(rows: &[DatasetRow], config: &SurrogateConfig) -> Result<(Self, TrainReport)> {
        config.validate()?;
        let windows = profile_windows(rows, config.window);
        let (mut train_windows, test_windows) = split_windows(
            &windows,
            config.train_fraction,
            config.split,
            config.hyper.seed,
        )?;
        if config.mahalanobis_tau > 0.0 {
            let flat: Vec<usize> = train_windows.concat();
            let features: Vec<Vec<f64>> = flat
                .iter()
                .map(|&i| {
                    let r = &rows[i];
                    vec![r.t, r.x, r.temperature, r.q_rad, r.q_cond]
                })
                .collect();
            let mut keep = vec![false; rows.len()];
            for k in mahalanobis_reduce(&features, config.mahalanobis_tau)? {
                keep[flat[k]] = true;
            }
            train_windows = train_windows
                .into_iter()
                .map(|w| w.into_iter().filter(|&i| keep[i]).collect::<Vec<_>>())
                .filter(|w| !w.is_empty())
                .collect();
        }
        let train_rows: Vec<usize> = train_windows.concat();
        let test_rows: Vec<usize> = test_windows.concat();
        if train_rows.len() < 2 {
            return Err(Error::Input("need at least 2 training rows".into()));
        }

        let mut input_features = Vec::new();
        let mut dropped = Vec::new();
        for (k, name) in INPUT_FEATURES.iter().enumerate() {
            let first = inputs_of(&rows[train_rows[0]])[k];
            if train_rows.iter().all(|&i| inputs_of(&rows[i])[k] == first) {
                dropped.push(name.to_string());
            } else {
                input_features.push(name.to_string());
            }
        }
        if input_features.is_empty() {
            return Err(Error::Input(
                "every input feature is constant over the training rows".into(),
            ));
        }
        let names: Vec<&str> = input_features.iter().map(String::as_str).collect();
        let mask = input_mask(&input_features)?;
        let raw_inputs: Vec<Vec<f64>> = train_rows
            .iter()
            .map(|&i| select(&inputs_of(&rows[i]), &mask))
            .collect();
        let input_normalizer = Normalizer::fit(&names, &raw_inputs)?;
        let raw_targets: Vec<Vec<f64>> = train_rows
            .iter()
            .map(|&i| targets_of(&rows[i]).to_vec())
            .collect();
        let target_normalizer = Normalizer::fit(&TARGET_FEATURES, &raw_targets)?;

        let mut model = Self {
            params: LstmParams::zeros(config.hidden_size, mask.len(), TARGET_FEATURES.len()),
            input_features,
            input_normalizer,
            target_normalizer,
            window: config.window,
            split: SplitSpec {
                mode: config.split,
                train_fraction: config.train_fraction,
                seed: config.hyper.seed,
            },
        };
        let train_seqs = model.sequences(rows, &train_windows)?;
        let test_seqs = model.sequences(rows, &test_windows)?;
        let init = init_params(
            config.hidden_size,
            mask.len(),
            TARGET_FEATURES.len(),
            &config.hyper,
        );
        let (params, loss_curve) = train_bptt(init, &train_seqs, &test_seqs, &config.hyper)?;
        model.params = params;
        let reduced_rows = train_rows.len();
        Ok((
            model,
            TrainReport {
                loss_curve,
                train_rows,
                test_rows,
                reduced_rows,
                dropped_inputs: dropped,
            },
        ))
    }

    fn sequences(&self, rows: &[DatasetRow], windows: &[Vec<usize>]) -> Result<Vec<Sequence>> {
        let mask = input_mask(&self.input_features)?;
        let seq = |w: &Vec<usize>| Sequence {
            inputs: w
                .iter()
                .map(|&i| {
                    self.input_normalizer
                        .apply(&select(&inputs_of(&rows[i]), &mask))
                })
                .collect(),
            targets: w
                .iter()
                .map(|&i| self.target_normalizer.apply(&targets_of(&rows[i])))
                .collect(),
        };
        Ok(windows.iter().map(seq).collect())
    }

    /// Train and test rows of `rows` under the partition used in training.
    pub fn split_rows(&self, rows: &[DatasetRow]) -> Result<(Vec<usize>, Vec<usize>)> {
        let windows = profile_windows(rows, self.window);
        let (train, test) = split_windows(
            &windows,
            self.split.train_fraction,
            self.split.mode,
            self.split.seed,
        )?;
        Ok((train.concat(), test.concat()))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            window: self.window,
            split: self.split,
            input_features: self.input_features.clone(),
            target_features: TARGET_FEATURES.iter().map(|s| s.to_string()).collect(),
            input_normalizer: self.input_normalizer.clone(),
            target_normalizer: self.target_normalizer.clone(),
            params: self.params.clone(),
        }
    }

    pub fn from_checkpoint(c: Checkpoint) -> Result<Self> {
        if c.format_version != CHECKPOINT_VERSION {
            return Err(Error::Input(format!(
                "unsupported checkpoint format_version {} (expected {CHECKPOINT_VERSION})",
                c.format_version
            )));
        }
        c.params.validate()?;
        c.input_normalizer.validate()?;
        c.target_normalizer.validate()?;
        input_mask(&c.input_features)?;
        if c.target_features != TARGET_FEATURES {
            return Err(Error::Input(format!(
                "checkpoint targets {:?} do not match {:?}",
                c.target_features, TARGET_FEATURES
            )));
        }
        if c.input_normalizer.names != c.input_features
            || c.target_normalizer.names != c.target_features
        {
            return Err(Error::Input(
                "checkpoint normalizer names do not match its features".into(),
            ));
        }
        if c.params.input_size != c.input_features.len()
            || c.params.output_size != TARGET_FEATURES.len()
        {
            return Err(Error::Input(
                "checkpoint network shape does not match its features".into(),
            ));
        }
        if c.window == 0 {
            return Err(Error::Input("checkpoint window must be positive".into()));
        }
        Ok(Self {
            params: c.params,
            input_features: c.input_features,
            input_normalizer: c.input_normalizer,
            target_normalizer: c.target_normalizer,
            window: c.window,
            split: c.split,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(&self.to_checkpoint())?;
        s.push('\n');
        Ok(s)
    }

    /// Checks `format_version` before anything else so an incompatible file
    /// is reported as such rather than as a schema error.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        match value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
        {
            Some(v) if v == u64::from(CHECKPOINT_VERSION) => {}
            Some(v) => {
                return Err(Error::Input(format!(
                    "unsupported checkpoint format_version {v} (expected {CHECKPOINT_VERSION})"
                )))
            }
            None => return Err(Error::Input("checkpoint has no format_version".into())),
        }
        Self::from_checkpoint(serde_json::from_value(value)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

impl Predictor for Surrogate {
    /// Predictions in physical units, in the order of `rows`.
    fn predict(&self, rows: &[DatasetRow]) -> Result<Vec<[f64; 3]>> {
        let windows = profile_windows(rows, self.window);
        let mut out = vec![[0.0; 3]; rows.len()];
        for (idx, seq) in windows.iter().zip(self.sequences(rows, &windows)?) {
            let ys = forward_sequence(&self.params, &seq.inputs)?;
            for (&i, y) in idx.iter().zip(ys) {
                let phys = self.target_normalizer.invert(&y);
                out[i] = [phys[0], phys[1], phys[2]];
            }
        }
        Ok(out)
    }
}

fn input_mask(features: &[String]) -> Result<Vec<usize>> {
    let mut mask = Vec::with_capacity(features.len());
    for f in features {
        let k = INPUT_FEATURES
            .iter()
            .position(|n| n == f)
            .ok_or_else(|| Error::Input(format!("unknown input feature `{f}`")))?;
        if mask.last().is_some_and(|&prev| prev >= k) {
            return Err(Error::Input(format!(
                "input features out of order: {features:?}"
            )));
        }
        mask.push(k);
    }
    if mask.is_empty() {
        return Err(Error::Input("no input features".into()));
    }
    Ok(mask)
}

fn select(values: &[f64], mask: &[usize]) -> Vec<f64> {
    mask.iter().map(|&k| values[k]).collect()
}

/// On-disk model layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub window: usize,
    pub split: SplitSpec,
    pub input_features: Vec<String>,
    pub target_features: Vec<String>,
    pub input_normalizer: Normalizer,
    pub target_normalizer: Normalizer,
    #[serde(flatten)]
    pub params: LstmParams,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(times: &[f64], n_x: usize) -> Vec<DatasetRow> {
        let mut out = Vec::new();
        for &t in times {
            for k in 0..n_x {
                let x = k as f64 / (n_x - 1) as f64 * 0.1;
                out.push(DatasetRow {
                    run_id: 0,
                    t,
                    x,
                    temperature: 300.0 + 50.0 * (1.0 - x / 0.1) * (1.0 - (-t / 10.0).exp()),
                    q_rad: 40.0 + 10.0 * (x * 30.0).sin(),
                    q_cond: 100.0 - 200.0 * x + t,
                });
            }
        }
        out
    }

    #[test]
    fn windows_cover_every_row_once() {
        let r = rows(&[2.0, 1.0], 37);
        let w = profile_windows(&r, 16);
        let lens: Vec<usize> = w.iter().map(Vec::len).collect();
        assert_eq!(lens, vec![16, 16, 5, 16, 16, 5]);
        assert!(w[..3].iter().flatten().all(|&i| r[i].t == 1.0));
        assert!(w
            .iter()
            .all(|w| w.windows(2).all(|p| r[p[0]].x < r[p[1]].x)));
        let mut seen: Vec<usize> = w.concat();
        seen.sort_unstable();
        assert_eq!(seen, (0..r.len()).collect::<Vec<_>>());
    }

    #[test]
    fn split_modes() {
        let r = rows(&[5.0, 1.0, 10.0, 50.0, 100.0], 4);
        let w = profile_windows(&r, 4);
        let (train, test) = split_windows(&w, 0.8, SplitMode::Chronological, 42).unwrap();
        assert_eq!((train.len(), test.len()), (4, 1));
        assert!(test.concat().iter().all(|&i| r[i].t == 100.0));

        let (a, b) = split_windows(&w, 0.8, SplitMode::Shuffled, 42).unwrap();
        assert_eq!((a.len(), b.len()), (4, 1));
        assert_eq!(
            split_windows(&w, 0.8, SplitMode::Shuffled, 42).unwrap(),
            (a.clone(), b.clone())
        );
        let mut all = [a, b].concat();
        all.sort();
        let mut expect = w.clone();
        expect.sort();
        assert_eq!(all, expect);

        let (train, test) = split_windows(&w[..1], 0.8, SplitMode::Shuffled, 1).unwrap();
        assert_eq!((train.len(), test.len()), (1, 0));
        assert!(split_windows(&[], 0.8, SplitMode::Shuffled, 1).is_err());
    }

    #[test]
    fn constant_time_input_is_dropped() {
        let r = rows(&[3.0], 20);
        let config = SurrogateConfig {
            hidden_size: 4,
            hyper: TrainHyper {
                epochs: 1,
                ..TrainHyper::default()
            },
            ..SurrogateConfig::default()
        };
        let (m, report) = Surrogate::fit(&r, &config).unwrap();
        assert_eq!(m.input_features, vec!["x_m"]);
        assert_eq!(report.dropped_inputs, vec!["time_s"]);
        assert_eq!(m.params.input_size, 1);
        assert_eq!(m.predict(&r).unwrap().len(), 20);
    }

    #[test]
    fn constant_target_is_rejected() {
        let mut r = rows(&[1.0, 2.0], 10);
        r.iter_mut().for_each(|row| row.q_rad = 0.0);
        let err = Surrogate::fit(&r, &SurrogateConfig::default()).unwrap_err();
        assert!(err.to_string().contains("q_rad_W_m2"), "{err}");
    }

    #[test]
    fn checkpoint_round_trip_and_version_check() {
        let r = rows(&[1.0, 2.0, 3.0], 10);
        let config = SurrogateConfig {
            hidden_size: 5,
            hyper: TrainHyper {
                epochs: 3,
                ..TrainHyper::default()
            },
            ..SurrogateConfig::default()
        };
        let (m, _) = Surrogate::fit(&r, &config).unwrap();
        let text = m.to_json().unwrap();
        let back = Surrogate::from_json(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.predict(&r).unwrap(), m.predict(&r).unwrap());
        assert_eq!(back.to_json().unwrap(), text);

        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["format_version"], 1);
        assert_eq!(v["hidden_size"], 5);
        assert!(v["W_f"]["data"].is_array());
        v["format_version"] = 2.into();
        let err = Surrogate::from_json(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("format_version"), "{err}");
        v["format_version"] = 1.into();
        v["W_y"]["rows"] = 2.into();
        assert!(Surrogate::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn prediction_order_follows_rows() {
        let r = rows(&[1.0, 2.0], 12);
        let config = SurrogateConfig {
            hidden_size: 4,
            window: 5,
            hyper: TrainHyper {
                epochs: 2,
                ..TrainHyper::default()
            },
            ..SurrogateConfig::default()
        };
        let (m, _) = Surrogate::fit(&r, &config).unwrap();
        let p = m.predict(&r).unwrap();
        let mut reversed = r.clone();
        reversed.reverse();
        let mut q = m.predict(&reversed).unwrap();
        q.reverse();
        assert_eq!(p, q);
        assert_eq!(
            IdentityPredictor.predict(&r).unwrap()[3],
            [r[3].temperature, r[3].q_rad, r[3].q_cond]
        );
    }

    #[test]
    fn split_rows_reproduces_training_partition() {
        let r = rows(&[1.0, 2.0, 4.0, 8.0], 20);
        let config = SurrogateConfig {
            hidden_size: 3,
            window: 8,
            hyper: TrainHyper {
                epochs: 1,
                ..TrainHyper::default()
            },
            ..SurrogateConfig::default()
        };
        let (m, report) = Surrogate::fit(&r, &config).unwrap();
        let back = Surrogate::from_json(&m.to_json().unwrap()).unwrap();
        let (train, test) = back.split_rows(&r).unwrap();
        assert_eq!(train, report.train_rows);
        assert_eq!(test, report.test_rows);
        assert_eq!(train.len() + test.len(), r.len());
    }

    #[test]
    fn training_is_deterministic() {
        let r = rows(&[1.0, 2.0, 4.0], 9);
        let config = SurrogateConfig {
            hidden_size: 4,
            hyper: TrainHyper {
                epochs: 20,
                ..TrainHyper::default()
            },
            ..SurrogateConfig::default()
        };
        let (a, _) = Surrogate::fit(&r, &config).unwrap();
        let (b, _) = Surrogate::fit(&r, &config).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }
}
