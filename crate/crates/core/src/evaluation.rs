//! Regression errors, Pearson correlation, and thresholded classification
//! metrics with ROC analysis.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::fmt_f64;

fn check_pair(pred: &[f64], truth: &[f64]) -> Result<()> {
    if pred.is_empty() || truth.is_empty() {
        return Err(Error::Input("empty series".into()));
    }
    if pred.len() != truth.len() {
        return Err(Error::Input(format!(
            "series lengths differ: {} predictions vs {} truths",
            pred.len(),
            truth.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Regression {
    pub rmse: f64,
    pub mae: f64,
}

pub fn regression_metrics(pred: &[f64], truth: &[f64]) -> Result<Regression> {
    check_pair(pred, truth)?;
    let n = pred.len() as f64;
    let (sq, abs) = pred.iter().zip(truth).fold((0.0, 0.0), |(s, a), (p, y)| {
        let e = p - y;
        (s + e * e, a + e.abs())
    });
    Ok(Regression {
        rmse: (sq / n).sqrt(),
        mae: abs / n,
    })
}

/// Coefficient of determination `1 - SS_res / SS_tot`.
pub fn r_squared(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth)?;
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|y| (y - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Input(
            "r_squared undefined for a constant truth series".into(),
        ));
    }
    let ss_res: f64 = pred.iter().zip(truth).map(|(p, y)| (p - y).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Sample Pearson correlation; `None` when either series is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    /// Header row and first column carry the variable names.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let mut header = vec![String::new()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for (name, row) in self.names.iter().zip(&self.values) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(|&v| fmt_f64(v)));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<correlation csv>", e))?;
        Ok(())
    }
}

pub fn pearson_matrix(columns: &[(&str, &[f64])]) -> Result<CorrelationMatrix> {
    let n = columns.first().map_or(0, |c| c.1.len());
    if n < 2 {
        return Err(Error::Input(format!(
            "correlation needs at least 2 samples, got {n}"
        )));
    }
    if let Some((name, c)) = columns.iter().find(|c| c.1.len() != n) {
        return Err(Error::Input(format!(
            "column `{name}` has {} samples, expected {n}",
            c.len()
        )));
    }
    for (name, c) in columns {
        if c.iter().all(|&v| v == c[0]) {
            return Err(Error::config(*name, "column is constant"));
        }
    }
    let d = columns.len();
    let mut values = vec![vec![0.0; d]; d];
    for i in 0..d {
        values[i][i] = 1.0;
        for j in i + 1..d {
            let r = pearson(columns[i].1, columns[j].1)
                .ok_or_else(|| Error::config(columns[i].0, "column has zero variance"))?;
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix {
        names: columns.iter().map(|c| c.0.to_string()).collect(),
        values,
    })
}

/// Rule turning a continuous series into labels `value >= threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinarizeRule {
    Threshold(f64),
    /// Threshold at this quantile (linear interpolation between order
    /// statistics) of the reference series.
    Quantile(f64),
}

impl Default for BinarizeRule {
    fn default() -> Self {
        BinarizeRule::Quantile(0.5)
    }
}

pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Input("quantile of an empty series".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::config(
            "binarize.quantile",
            format!("must be in [0, 1], got {q}"),
        ));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    Ok(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

impl BinarizeRule {
    pub fn resolve(&self, reference: &[f64]) -> Result<f64> {
        match *self {
            BinarizeRule::Threshold(t) => Ok(t),
            BinarizeRule::Quantile(q) => quantile(reference, q),
        }
    }
}

/// Labels `value >= threshold`, the threshold resolved from `series` itself.
pub fn binarize(series: &[f64], rule: BinarizeRule) -> Result<Vec<bool>> {
    let t = rule.resolve(series)?;
    Ok(series.iter().map(|&v| v >= t).collect())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl Confusion {
    /// Predicted positive when `score >= threshold`.
    pub fn at_threshold(scores: &[f64], labels: &[bool], threshold: f64) -> Self {
        let mut c = Confusion::default();
        for (&s, &l) in scores.iter().zip(labels) {
            match (s >= threshold, l) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn acc(&self) -> Option<f64> {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn tpr(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn fpr(&self) -> Option<f64> {
        ratio(self.fp, self.fp + self.tn)
    }

    pub fn ppv(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn tnr(&self) -> Option<f64> {
        ratio(self.tn, self.tn + self.fp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Roc {
    /// From `(0, 0)` at threshold `+inf` down to `(1, 1)` at the lowest score.
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

impl Roc {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["threshold", "fpr", "tpr"])?;
        for p in &self.points {
            w.write_record([p.threshold, p.fpr, p.tpr].map(fmt_f64))?;
        }
        w.flush().map_err(|e| Error::io("<roc csv>", e))?;
        Ok(())
    }
}

/// ROC over every distinct score taken as a threshold, ties grouped. The area
/// is accumulated with integer counts so it equals the pair statistic
/// `P(score_pos > score_neg) + ½ P(tie)` exactly.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Roc> {
    if scores.len() != labels.len() {
        return Err(Error::Input(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Input("scores contain NaN".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count() as u64;
    let n_neg = labels.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Input(format!(
            "ROC needs both classes ({n_pos} positive, {n_neg} negative)"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0u64, 0u64);
    // twice the trapezoid area in units of one (pos, neg) pair
    let mut area2: u128 = 0;
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        let (tp0, fp0) = (tp, fp);
        while k < order.len() && scores[order[k]] == s {
            if labels[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        area2 += u128::from(fp - fp0) * u128::from(tp + tp0);
        points.push(RocPoint {
            threshold: s,
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
        });
    }
    let auc = area2 as f64 / (2 * u128::from(n_pos) * u128::from(n_neg)) as f64;
    Ok(Roc { points, auc })
}

/// Classification metrics at one operating threshold plus the ROC. The ROC
/// is an error for single-class truth while the confusion counts are still
/// returned.
pub fn confusion_and_roc(
    scores: &[f64],
    labels: &[bool],
    threshold: f64,
) -> Result<(Confusion, Result<Roc>)> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(Error::Input(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    Ok((
        Confusion::at_threshold(scores, labels, threshold),
        roc_curve(scores, labels),
    ))
}

/// Per-target report. Undefined rates (empty denominators) are `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub rmse: f64,
    pub mae: f64,
    pub acc: Option<f64>,
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
    pub ppv: Option<f64>,
    pub tnr: Option<f64>,
    pub auc: Option<f64>,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub threshold: f64,
}

/// Regression errors in the units of the series, plus classification of
/// `pred` against labels from `truth`, both binarised at the threshold the
/// rule resolves on `truth`.
pub fn evaluate_series(
    pred: &[f64],
    truth: &[f64],
    rule: BinarizeRule,
) -> Result<(MetricsReport, Option<Roc>)> {
    let reg = regression_metrics(pred, truth)?;
    let threshold = rule.resolve(truth)?;
    let labels: Vec<bool> = truth.iter().map(|&v| v >= threshold).collect();
    let (c, roc) = confusion_and_roc(pred, &labels, threshold)?;
    let roc = roc.ok();
    Ok((
        MetricsReport {
            rmse: reg.rmse,
            mae: reg.mae,
            acc: c.acc(),
            tpr: c.tpr(),
            fpr: c.fpr(),
            ppv: c.ppv(),
            tnr: c.tnr(),
            auc: roc.as_ref().map(|r| r.auc),
            tp: c.tp,
            fp: c.fp,
            tn: c.tn,
            fn_: c.fn_,
            threshold,
        },
        roc,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pair_statistic(scores: &[f64], labels: &[bool]) -> f64 {
        let mut twice = 0u64;
        let mut pairs = 0u64;
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li && !lj {
                    pairs += 1;
                    if scores[i] > scores[j] {
                        twice += 2;
                    } else if scores[i] == scores[j] {
                        twice += 1;
                    }
                }
            }
        }
        twice as f64 / (2 * pairs) as f64
    }

    #[test]
    fn regression_examples() {
        let y = [1.0, -2.0, 3.5];
        assert_eq!(
            regression_metrics(&y, &y).unwrap(),
            Regression {
                rmse: 0.0,
                mae: 0.0
            }
        );
        let shifted: Vec<f64> = y.iter().map(|v| v + 1.0).collect();
        let r = regression_metrics(&shifted, &y).unwrap();
        assert!((r.rmse - 1.0).abs() < 1e-15 && (r.mae - 1.0).abs() < 1e-15);
        let r = regression_metrics(&[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert!((r.rmse - 12.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(r.mae, 3.5);
        assert!(regression_metrics(&[1.0], &[1.0, 2.0]).is_err());
        assert!(regression_metrics(&[], &[]).is_err());
    }

    #[test]
    fn r_squared_examples() {
        let y = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(r_squared(&y, &y).unwrap(), 1.0);
        // predicting the mean gives zero
        assert!(r_squared(&[2.5; 4], &y).unwrap().abs() < 1e-15);
        assert!(r_squared(&y, &[1.0; 4]).is_err());
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0];
        let y = [1.0, 2.0, 4.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let m = pearson_matrix(&[("x", &x), ("y", &y), ("neg", &neg)]).unwrap();
        assert_eq!(m.values[0][0], 1.0);
        // 3 / sqrt(2 · 14/3) = 0.98198..., i.e. 0.981 truncated to 3 d.p.
        assert_eq!((m.values[0][1] * 1000.0).floor() / 1000.0, 0.981);
        assert!((m.values[0][1] - 3.0 / (2.0f64 * 14.0 / 3.0).sqrt()).abs() < 1e-14);
        assert!((m.values[0][2] + 1.0).abs() < 1e-15, "{}", m.values[0][2]);
        assert_eq!(m.values[1][0], m.values[0][1]);
        let err = pearson_matrix(&[("x", &x), ("flat", &[2.0, 2.0, 2.0])]).unwrap_err();
        assert!(err.to_string().contains("flat"), "{err}");
        assert!(pearson_matrix(&[("x", &[1.0])]).is_err());
    }

    #[test]
    fn correlation_csv_layout() {
        let x = [1.0, 2.0, 3.0];
        let y = [3.0, 1.0, 2.0];
        let m = pearson_matrix(&[("t", &x), ("x", &y)]).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], ",t,x");
        assert!(lines[1].starts_with("t,1.0000000000000000e0,"));
        assert!(lines[2].starts_with("x,"));
        assert!(lines[2].ends_with(",1.0000000000000000e0"));
    }

    #[test]
    fn binarize_examples() {
        assert_eq!(
            binarize(&[1.0, 2.0, 3.0, 4.0], BinarizeRule::Quantile(0.5)).unwrap(),
            vec![false, false, true, true]
        );
        assert_eq!(quantile(&[4.0, 1.0, 3.0, 2.0], 0.5).unwrap(), 2.5);
        assert!(binarize(&[1.0, 2.0], BinarizeRule::Threshold(0.0))
            .unwrap()
            .iter()
            .all(|&b| b));
        assert!(binarize(&[1.0, 5.0], BinarizeRule::Threshold(6.0))
            .unwrap()
            .iter()
            .all(|&b| !b));
        assert!(quantile(&[1.0], 1.5).is_err());
    }

    #[test]
    fn confusion_fixtures() {
        let (c, roc) =
            confusion_and_roc(&[0.9, 0.8, 0.4, 0.3], &[true, true, false, false], 0.5).unwrap();
        assert_eq!(
            c,
            Confusion {
                tp: 2,
                fp: 0,
                tn: 2,
                fn_: 0
            }
        );
        assert_eq!(c.acc(), Some(1.0));
        assert_eq!(roc.unwrap().auc, 1.0);

        let (c, roc) =
            confusion_and_roc(&[0.9, 0.4, 0.8, 0.3], &[true, false, false, true], 0.5).unwrap();
        assert_eq!(
            c,
            Confusion {
                tp: 1,
                fp: 1,
                tn: 1,
                fn_: 1
            }
        );
        assert_eq!(c.acc(), Some(0.5));
        assert_eq!(roc.unwrap().auc, 0.5);

        let (c, roc) = confusion_and_roc(&[0.2, 0.7], &[true, true], 0.5).unwrap();
        assert_eq!(
            c,
            Confusion {
                tp: 1,
                fp: 0,
                tn: 0,
                fn_: 1
            }
        );
        assert_eq!(c.fpr(), None);
        assert!(roc.is_err());
    }

    #[test]
    fn roc_with_ties_and_endpoints() {
        let scores = [0.5, 0.5, 0.5, 0.1];
        let labels = [true, false, true, false];
        let roc = roc_curve(&scores, &labels).unwrap();
        assert_eq!(roc.points.len(), 3);
        assert_eq!((roc.points[0].fpr, roc.points[0].tpr), (0.0, 0.0));
        assert_eq!((roc.points[1].fpr, roc.points[1].tpr), (0.5, 1.0));
        assert_eq!((roc.points[2].fpr, roc.points[2].tpr), (1.0, 1.0));
        assert_eq!(roc.auc, 0.75);
        assert_eq!(roc.auc, pair_statistic(&scores, &labels));
    }

    #[test]
    fn auc_equals_pair_statistic_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..50 {
            let n = rng.gen_range(2..=100);
            // coarse grid so ties are common
            let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..20) as f64 / 4.0).collect();
            let mut labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
            labels[0] = true;
            labels[1] = false;
            let roc = roc_curve(&scores, &labels).unwrap();
            assert_eq!(roc.auc, pair_statistic(&scores, &labels));
        }
    }

    #[test]
    fn perfect_predictor_report() {
        let truth: Vec<f64> = (0..20).map(|k| (k as f64 * 0.37).sin()).collect();
        let (rep, roc) = evaluate_series(&truth, &truth, BinarizeRule::default()).unwrap();
        assert_eq!((rep.rmse, rep.mae), (0.0, 0.0));
        assert_eq!(rep.acc, Some(1.0));
        assert_eq!(rep.auc, Some(1.0));
        assert_eq!(rep.tp + rep.fp + rep.tn + rep.fn_, 20);
        assert!(roc.is_some());
        let json = serde_json::to_value(&rep).unwrap();
        for key in [
            "rmse", "mae", "acc", "tpr", "fpr", "ppv", "tnr", "auc", "tp", "fp", "tn", "fn",
        ] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    proptest! {
        #[test]
        fn pearson_affine_invariance(
            data in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..40),
            a in 0.1f64..10.0,
            b in -50.0f64..50.0,
        ) {
            let x: Vec<f64> = data.iter().map(|d| d.0).collect();
            let y: Vec<f64> = data.iter().map(|d| d.1).collect();
            let r = pearson(&x, &y);
            prop_assume!(r.is_some());
            let r = r.unwrap();
            let xs: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            prop_assert!((pearson(&xs, &y).unwrap() - r).abs() < 1e-12);
            let xn: Vec<f64> = x.iter().map(|v| -v).collect();
            prop_assert!((pearson(&xn, &y).unwrap() + r).abs() < 1e-12);
        }

        #[test]
        fn threshold_sweep_is_monotone(
            data in prop::collection::vec((0u8..10, any::<bool>()), 2..60),
        ) {
            let scores: Vec<f64> = data.iter().map(|d| d.0 as f64).collect();
            let labels: Vec<bool> = data.iter().map(|d| d.1).collect();
            let mut prev: Option<Confusion> = None;
            for t in 0..=11 {
                let c = Confusion::at_threshold(&scores, &labels, t as f64);
                prop_assert_eq!(c.total(), scores.len());
                if let Some(p) = prev {
                    prop_assert!(c.tp <= p.tp && c.fp <= p.fp);
                }
                prev = Some(c);
            }
            if labels.iter().any(|&l| l) && labels.iter().any(|&l| !l) {
                let roc = roc_curve(&scores, &labels).unwrap();
                prop_assert!((0.0..=1.0).contains(&roc.auc));
                prop_assert!(roc.points.windows(2).all(|w| w[0].fpr <= w[1].fpr && w[0].tpr <= w[1].tpr));
                prop_assert_eq!(roc.auc, pair_statistic(&scores, &labels));
            }
        }
    }
}
