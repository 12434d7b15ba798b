use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use thermoflux_core::evaluation::{
    evaluate_series, pearson_matrix, r_squared, BinarizeRule, MetricsReport,
};
use thermoflux_core::io::{
    emit_dataset, fmt_f64, read_dataset_csv, read_profile_csv, write_dataset_csv,
    write_profile_csv, DatasetRow,
};
use thermoflux_core::simulation::{run_simulation, SimulationConfig};
use thermoflux_core::surrogate::{
    IdentityPredictor, Predictor, Surrogate, SurrogateConfig, TARGET_FEATURES,
};
use thermoflux_core::{Error, Result};

use crate::manifest::Run;
use crate::output::Staged;
use crate::sweep::{expand, parse_axis, set_key};
use crate::{Options, Toggle};

const THREADS_ENV: &str = "THERMOFLUX_THREADS";

fn require<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| Error::config(flag, "this command requires the option"))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

/// Config document with command-line overrides applied, before validation.
fn simulation_document(opts: &Options, run: &mut Run) -> Result<Value> {
    let mut doc = match &opts.config {
        Some(path) => {
            run.input(path);
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            // parse through the typed config so defaults are filled in
            SimulationConfig::from_json_str(&text)?.to_value()
        }
        None => SimulationConfig::default().to_value(),
    };
    if let Some(toggle) = opts.radiation {
        set_key(
            &mut doc,
            "radiation.enabled",
            Value::Bool(toggle == Toggle::On),
        )?;
    }
    Ok(doc)
}

pub fn simulate(opts: &Options) -> Result<()> {
    let mut run = Run::start("simulate");
    let doc = simulation_document(opts, &mut run)?;
    let config = SimulationConfig::from_value(doc.clone())?;
    let result = run_simulation(&config)?;

    let mut staged = Staged::new(&opts.out)?;
    staged.write("profile.csv", |w| write_profile_csv(&result, w))?;
    run.finish(staged, &doc)?;

    let d = &result.diagnostics;
    match result.steady_state_time {
        Some(t) => println!("steady state at t = {t} s"),
        None => println!("steady state not reached"),
    }
    println!(
        "{} steps, max coupling iterations {}, max energy residual {:.3e}",
        d.steps, d.max_coupling_iterations, d.max_energy_residual
    );
    Ok(())
}

fn sweep_threads() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Error::config(
                THREADS_ENV,
                format!("must be a positive integer, got `{v}`"),
            )),
        },
    }
}

pub fn dataset(opts: &Options) -> Result<()> {
    let mut run = Run::start("dataset");
    let base = simulation_document(opts, &mut run)?;
    let axes = opts
        .sweep
        .iter()
        .map(|s| parse_axis(s))
        .collect::<Result<Vec<_>>>()?;
    let docs = expand(&base, &axes)?;
    let configs = docs
        .iter()
        .map(|d| SimulationConfig::from_value(d.clone()))
        .collect::<Result<Vec<_>>>()?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = sweep_threads()? {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Input(format!("cannot start worker pool: {e}")))?;
    // collect keeps sweep order whatever order the runs finish in
    let results: Vec<Result<_>> = pool.install(|| configs.par_iter().map(run_simulation).collect());

    let mut rows = Vec::new();
    for (run_id, r) in results.into_iter().enumerate() {
        let r = r.map_err(|e| match e {
            Error::Convergence {
                what,
                iterations,
                residual,
            } => Error::Convergence {
                what: format!("{what} (sweep run {run_id})"),
                iterations,
                residual,
            },
            other => other,
        })?;
        rows.extend(emit_dataset(&r, run_id)?);
    }

    let mut staged = Staged::new(&opts.out)?;
    staged.write("dataset.csv", |w| write_dataset_csv(&rows, true, w))?;
    run.finish(staged, &Value::Array(docs))?;
    println!("{} runs, {} rows", configs.len(), rows.len());
    Ok(())
}

fn surrogate_config(opts: &Options, run: &mut Run) -> Result<SurrogateConfig> {
    let mut config = match &opts.config {
        Some(path) => {
            run.input(path);
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::config("surrogate config", e.to_string()))?
        }
        None => SurrogateConfig::default(),
    };
    if let Some(seed) = opts.seed {
        config.hyper.seed = seed;
    }
    if let Some(lr) = opts.lr {
        config.hyper.lr = lr;
    }
    if let Some(epochs) = opts.epochs {
        config.hyper.epochs = epochs;
    }
    config.validate()?;
    Ok(config)
}

fn load_dataset(opts: &Options, run: &mut Run) -> Result<Vec<DatasetRow>> {
    let path = require(&opts.dataset, "--dataset")?;
    run.input(path);
    let rows = read_dataset_csv(open(path)?)?;
    if rows.is_empty() {
        return Err(Error::Input(format!("{}: no data rows", path.display())));
    }
    Ok(rows)
}

fn load_model(opts: &Options, run: &mut Run) -> Result<Surrogate> {
    let path = require(&opts.model, "--model")?;
    run.input(path);
    Surrogate::load(path)
}

fn optional(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn train(opts: &Options) -> Result<()> {
    let mut run = Run::start("train");
    let config = surrogate_config(opts, &mut run)?;
    let rows = load_dataset(opts, &mut run)?;
    let (model, report) = Surrogate::fit(&rows, &config)?;

    let mut staged = Staged::new(&opts.out)?;
    staged.write_str("model.json", &model.to_json()?)?;
    staged.write("loss.csv", |w| {
        let mut text = String::from("epoch,train_mse,test_mse\n");
        for r in &report.loss_curve {
            text.push_str(&format!(
                "{},{},{}\n",
                r.epoch,
                fmt_f64(r.train_mse),
                optional(r.test_mse)
            ));
        }
        w.write_all(text.as_bytes())
            .map_err(|e| Error::io("loss.csv", e))
    })?;
    run.finish(staged, &serde_json::to_value(&config)?)?;

    let last = report
        .loss_curve
        .last()
        .expect("curve has the initial entry");
    println!(
        "{} train rows, {} test rows; epoch {}: train_mse {:.4e}, test_mse {}",
        report.train_rows.len(),
        report.test_rows.len(),
        last.epoch,
        last.train_mse,
        last.test_mse.map_or("n/a".into(), |v| format!("{v:.4e}"))
    );
    if !report.dropped_inputs.is_empty() {
        println!(
            "constant inputs dropped: {}",
            report.dropped_inputs.join(", ")
        );
    }
    Ok(())
}

pub fn predict(opts: &Options) -> Result<()> {
    let mut run = Run::start("predict");
    let model = load_model(opts, &mut run)?;
    let rows = load_dataset(opts, &mut run)?;
    let pred = model.predict(&rows)?;
    let out: Vec<DatasetRow> = rows
        .iter()
        .zip(&pred)
        .map(|(r, p)| DatasetRow {
            temperature: p[0],
            q_rad: p[1],
            q_cond: p[2],
            ..*r
        })
        .collect();
    let mut staged = Staged::new(&opts.out)?;
    staged.write("predictions.csv", |w| write_dataset_csv(&out, true, w))?;
    run.finish(staged, &serde_json::to_value(model.to_checkpoint())?)?;
    println!("{} rows predicted", out.len());
    Ok(())
}

#[derive(Serialize)]
struct SplitReport {
    n_rows: usize,
    metrics: BTreeMap<&'static str, MetricsReport>,
    r_squared: BTreeMap<&'static str, Option<f64>>,
}

fn column(rows: &[DatasetRow], k: usize) -> Vec<f64> {
    rows.iter()
        .map(|r| [r.t, r.x, r.temperature, r.q_rad, r.q_cond][k])
        .collect()
}

pub fn evaluate(opts: &Options) -> Result<()> {
    let mut run = Run::start("evaluate");
    let model = load_model(opts, &mut run)?;
    let rows = load_dataset(opts, &mut run)?;
    let pred = model.predict(&rows)?;
    let (train, test) = model.split_rows(&rows)?;
    let all: Vec<usize> = (0..rows.len()).collect();
    let rule = BinarizeRule::default();

    let mut staged = Staged::new(&opts.out)?;
    let mut splits = BTreeMap::new();
    for (name, idx) in [("all", &all), ("train", &train), ("test", &test)] {
        if idx.is_empty() {
            continue;
        }
        let mut report = SplitReport {
            n_rows: idx.len(),
            metrics: BTreeMap::new(),
            r_squared: BTreeMap::new(),
        };
        for (k, target) in TARGET_FEATURES.iter().enumerate() {
            let p: Vec<f64> = idx.iter().map(|&i| pred[i][k]).collect();
            let y: Vec<f64> = idx.iter().map(|&i| column(&rows, 2 + k)[i]).collect();
            let (metrics, roc) = evaluate_series(&p, &y, rule)?;
            if let Some(roc) = roc {
                staged.write(&format!("roc_{name}_{target}.csv"), |w| roc.write_csv(w))?;
            }
            report.metrics.insert(target, metrics);
            report.r_squared.insert(target, r_squared(&p, &y).ok());
        }
        splits.insert(name, report);
    }

    // constant columns (e.g. time in a single-snapshot dataset) have no
    // correlation and are left out of the matrix
    let names = [
        "time_s",
        "x_m",
        "temperature_K",
        "q_rad_W_m2",
        "q_cond_W_m2",
    ];
    let columns: Vec<Vec<f64>> = (0..names.len()).map(|k| column(&rows, k)).collect();
    let (kept, dropped): (Vec<usize>, Vec<usize>) =
        (0..names.len()).partition(|&k| columns[k].iter().any(|&v| v != columns[k][0]));
    let named: Vec<(&str, &[f64])> = kept
        .iter()
        .map(|&k| (names[k], columns[k].as_slice()))
        .collect();
    if named.len() >= 2 && rows.len() >= 2 {
        let corr = pearson_matrix(&named)?;
        staged.write("correlation.csv", |w| corr.write_csv(w))?;
    }

    let doc = json!({
        "binarization": rule,
        "units": {"temperature_K": "K", "q_rad_W_m2": "W/m^2", "q_cond_W_m2": "W/m^2"},
        "correlation_dropped": dropped.iter().map(|&k| names[k]).collect::<Vec<_>>(),
        "splits": splits,
    });
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    staged.write_str("metrics.json", &text)?;
    run.finish(staged, &serde_json::to_value(model.to_checkpoint())?)?;

    for (name, r) in &splits {
        let m = &r.metrics["temperature_K"];
        println!(
            "{name}: T rmse {:.4} K, mae {:.4} K, r2 {}",
            m.rmse,
            m.mae,
            r.r_squared["temperature_K"].map_or("n/a".into(), |v| format!("{v:.5}"))
        );
    }
    Ok(())
}

pub fn compare(opts: &Options) -> Result<()> {
    let mut run = Run::start("compare");
    let profile_path = require(&opts.profile, "--profile")?;
    run.input(profile_path);
    let profile = read_profile_csv(open(profile_path)?)?;
    let rows: Vec<DatasetRow> = profile
        .iter()
        .map(|p| DatasetRow {
            run_id: 0,
            t: p.t,
            x: p.x,
            temperature: p.temperature,
            q_rad: p.q_rad,
            q_cond: p.q_cond,
        })
        .collect();

    let model_path = require(&opts.model, "--model")?;
    let (pred, config) = if model_path == Path::new("identity") {
        (IdentityPredictor.predict(&rows)?, json!("identity"))
    } else {
        let model = load_model(opts, &mut run)?;
        (
            model.predict(&rows)?,
            serde_json::to_value(model.to_checkpoint())?,
        )
    };

    let mut max_err = 0.0f64;
    let mut sum_err = 0.0;
    let mut text = String::from("time_s,x_m,T_numeric,T_lstm,abs_err\n");
    for (r, p) in rows.iter().zip(&pred) {
        let err = (p[0] - r.temperature).abs();
        max_err = max_err.max(err);
        sum_err += err;
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(r.t),
            fmt_f64(r.x),
            fmt_f64(r.temperature),
            fmt_f64(p[0]),
            fmt_f64(err)
        ));
    }
    let mut staged = Staged::new(&opts.out)?;
    staged.write_str("comparison.csv", &text)?;
    run.finish(staged, &config)?;
    let mean_err = if rows.is_empty() {
        0.0
    } else {
        sum_err / rows.len() as f64
    };
    println!(
        "{} rows, max abs err {max_err:.6e} K, mean abs err {mean_err:.6e} K",
        rows.len()
    );
    Ok(())
}
