use super::metrics::MetricsReport;
use super::train::{evaluate_model, SplitDataset, TrainConfig};
use crate::data::{add_noise, FeatureMatrix, NoiseKind, NoiseScaling, NoiseSpec};
use crate::error::Result;
use crate::exec::{map_ordered, ExecMode};
use crate::graph::RoadGraph;
use crate::model::ModelParams;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerturbRow {
    pub kind: NoiseKind,
    pub param: f64,
    pub metrics: MetricsReport,
}

/// Clean test metrics plus one row per grid point of `kind`.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbReport {
    pub clean: MetricsReport,
    pub rows: Vec<PerturbRow>,
}

impl PerturbReport {
    /// `kind,param,rmse,mae,accuracy,r2,var`
    pub fn to_csv(&self) -> String {
        let mut s = String::from("kind,param,rmse,mae,accuracy,r2,var\n");
        for r in &self.rows {
            s.push_str(&format!("{},{}", r.kind.name(), r.param));
            for f in r.metrics.csv_fields() {
                s.push(',');
                s.push_str(&f);
            }
            s.push('\n');
        }
        s
    }

    /// Largest `|acc − acc_clean| / |acc_clean|` over the sweep.
    pub fn max_relative_accuracy_change(&self) -> Option<f64> {
        let clean = self.clean.accuracy?;
        self.rows
            .iter()
            .map(|r| r.metrics.accuracy.map(|a| (a - clean).abs() / clean.abs()))
            .try_fold(0.0f64, |acc, v| v.map(|v| acc.max(v)))
    }
}

/// Evaluates trained `params` on the test split of noisy copies of `normalized`,
/// one copy per grid value of `kind`, all drawn with the same `seed`.
#[allow(clippy::too_many_arguments)]
pub fn perturbation_sweep(
    graph: &RoadGraph,
    params: &ModelParams,
    normalized: &FeatureMatrix,
    config: &TrainConfig,
    kind: NoiseKind,
    scaling: NoiseScaling,
    seed: u64,
    mode: ExecMode,
) -> Result<PerturbReport> {
    let clean_data = SplitDataset::prepare(normalized, config)?;
    let clean = evaluate_model(graph, params, &clean_data.test, config.chunk_size, mode)?;

    let grid = kind.grid();
    let rows = map_ordered(mode, &grid, |&param| -> Result<PerturbRow> {
        let spec = NoiseSpec::new(kind, param, seed)?.with_scaling(scaling);
        let noisy = add_noise(normalized, &spec)?;
        let data = SplitDataset::prepare(&noisy, config)?;
        // inner work stays sequential: the sweep itself is the parallel axis
        let metrics = evaluate_model(
            graph,
            params,
            &data.test,
            config.chunk_size,
            ExecMode::Sequential,
        )?;
        Ok(PerturbRow {
            kind,
            param,
            metrics,
        })
    });
    Ok(PerturbReport {
        clean,
        rows: rows.into_iter().collect::<Result<_>>()?,
    })
}
