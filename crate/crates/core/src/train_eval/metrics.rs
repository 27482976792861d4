use std::fmt;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Regression metrics of one evaluation run.
///
/// `accuracy` is `None` when the truth has zero norm; `r2` and
/// `explained_variance` are `None` when the truth has zero variance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsReport {
    pub rmse: f64,
    pub mae: f64,
    pub accuracy: Option<f64>,
    pub r2: Option<f64>,
    pub explained_variance: Option<f64>,
}

impl MetricsReport {
    /// Values in CSV column order: rmse, mae, accuracy, r2, var.
    pub fn csv_fields(&self) -> [String; 5] {
        [
            fmt_value(Some(self.rmse)),
            fmt_value(Some(self.mae)),
            fmt_value(self.accuracy),
            fmt_value(self.r2),
            fmt_value(self.explained_variance),
        ]
    }
}

/// Shortest round-trip text, or `n/a` for an undefined metric.
pub fn fmt_value(v: Option<f64>) -> String {
    match v {
        Some(x) => x.to_string(),
        None => "n/a".to_string(),
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4}"));
        write!(
            f,
            "RMSE {:.4}  MAE {:.4}  Accuracy {}  R2 {}  var {}",
            self.rmse,
            self.mae,
            opt(self.accuracy),
            opt(self.r2),
            opt(self.explained_variance)
        )
    }
}

/// RMSE, MAE, Frobenius accuracy, R² and explained variance over all entries.
pub fn evaluate(y_true: &Tensor, y_pred: &Tensor) -> Result<MetricsReport> {
    if y_true.shape() != y_pred.shape() {
        return Err(Error::shape("evaluate", y_true.shape(), y_pred.shape()));
    }
    evaluate_slices(y_true.as_slice(), y_pred.as_slice())
}

pub fn evaluate_slices(y_true: &[f64], y_pred: &[f64]) -> Result<MetricsReport> {
    if y_true.len() != y_pred.len() {
        return Err(Error::shape(
            "evaluate",
            (y_true.len(), 1),
            (y_pred.len(), 1),
        ));
    }
    if y_true.is_empty() {
        return Err(Error::Contract("evaluate needs at least one value".into()));
    }
    let count = y_true.len() as f64;
    let resid: Vec<f64> = y_true.iter().zip(y_pred).map(|(t, p)| t - p).collect();

    let sse: f64 = resid.iter().map(|r| r * r).sum();
    let rmse = (sse / count).sqrt();
    let mae = resid.iter().map(|r| r.abs()).sum::<f64>() / count;

    let truth_norm = y_true.iter().map(|t| t * t).sum::<f64>().sqrt();
    let accuracy = (truth_norm > 0.0).then(|| 1.0 - sse.sqrt() / truth_norm);

    let mean_true = y_true.iter().sum::<f64>() / count;
    let ss_tot: f64 = y_true.iter().map(|t| (t - mean_true).powi(2)).sum();
    let mean_resid = resid.iter().sum::<f64>() / count;
    let ss_resid_centered: f64 = resid.iter().map(|r| (r - mean_resid).powi(2)).sum();
    let (r2, explained_variance) = if ss_tot > 0.0 {
        (
            Some(1.0 - sse / ss_tot),
            Some(1.0 - ss_resid_centered / ss_tot),
        )
    } else {
        (None, None)
    };

    Ok(MetricsReport {
        rmse,
        mae,
        accuracy,
        r2,
        explained_variance,
    })
}
