use std::collections::BTreeSet;
use std::fmt;

use super::metrics::{fmt_value, MetricsReport};
use super::train::{evaluate_model, train, SplitDataset, TrainConfig, TrainOutcome};
use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::exec::{map_ordered, ExecMode};
use crate::graph::RoadGraph;
use crate::model::ModelKind;

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    /// Column label; the model name, suffixed when a model appears more than once.
    pub label: String,
    pub model: ModelKind,
    pub horizon: usize,
    pub metrics: MetricsReport,
}

/// Test metrics per model and horizon.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

const METRIC_NAMES: [&str; 5] = ["RMSE", "MAE", "Accuracy", "R2", "var"];

impl ComparisonTable {
    pub fn get(&self, label: &str, horizon: usize) -> Option<&MetricsReport> {
        self.rows
            .iter()
            .find(|r| r.label == label && r.horizon == horizon)
            .map(|r| &r.metrics)
    }

    fn labels(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for r in &self.rows {
            if !seen.contains(&r.label.as_str()) {
                seen.push(r.label.as_str());
            }
        }
        seen
    }

    fn horizons(&self) -> Vec<usize> {
        self.rows
            .iter()
            .map(|r| r.horizon)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// One row per (horizon, metric), one column per model.
    pub fn to_csv(&self) -> String {
        let labels = self.labels();
        let mut s = format!("horizon,metric,{}\n", labels.join(","));
        for h in self.horizons() {
            for (mi, name) in METRIC_NAMES.iter().enumerate() {
                s.push_str(&format!("{h},{name}"));
                for l in &labels {
                    let cell = self
                        .get(l, h)
                        .map_or_else(String::new, |m| m.csv_fields()[mi].clone());
                    s.push(',');
                    s.push_str(&cell);
                }
                s.push('\n');
            }
        }
        s
    }
}

impl fmt::Display for ComparisonTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels = self.labels();
        write!(f, "{:>8} {:<9}", "horizon", "metric")?;
        for l in &labels {
            write!(f, " {l:>10}")?;
        }
        writeln!(f)?;
        for h in self.horizons() {
            for (mi, name) in METRIC_NAMES.iter().enumerate() {
                write!(f, "{h:>8} {name:<9}")?;
                for l in &labels {
                    let cell = self.get(l, h).map_or("".to_string(), |m| {
                        let v = [
                            Some(m.rmse),
                            Some(m.mae),
                            m.accuracy,
                            m.r2,
                            m.explained_variance,
                        ][mi];
                        v.map_or_else(|| fmt_value(None), |x| format!("{x:.4}"))
                    });
                    write!(f, " {cell:>10}")?;
                }
                writeln!(f)?;
            }
        }
        Ok(())
    }
}

/// Trains every configuration on the same normalized matrix and tabulates
/// test metrics. Independent runs may execute in parallel.
pub fn compare_models(
    configs: &[TrainConfig],
    graph: &RoadGraph,
    normalized: &FeatureMatrix,
    mode: ExecMode,
) -> Result<(ComparisonTable, Vec<TrainOutcome>)> {
    if configs.is_empty() {
        return Err(Error::Contract("no models to compare".into()));
    }
    let outcomes = map_ordered(
        mode,
        configs,
        |cfg| -> Result<(MetricsReport, TrainOutcome)> {
            let data = SplitDataset::prepare(normalized, cfg)?;
            let outcome = train(cfg, graph, &data)?;
            let metrics =
                evaluate_model(graph, &outcome.params, &data.test, cfg.chunk_size, cfg.exec)?;
            Ok((metrics, outcome))
        },
    );

    let mut table = ComparisonTable::default();
    let mut runs = Vec::with_capacity(configs.len());
    for (cfg, r) in configs.iter().zip(outcomes) {
        let (metrics, outcome) = r?;
        let base = cfg.model_kind.name();
        let repeats = table
            .rows
            .iter()
            .filter(|row| row.model == cfg.model_kind && row.horizon == cfg.horizon_t)
            .count();
        let label = if repeats == 0 {
            base.to_string()
        } else {
            format!("{base}#{}", repeats + 1)
        };
        table.rows.push(ComparisonRow {
            label,
            model: cfg.model_kind,
            horizon: cfg.horizon_t,
            metrics,
        });
        runs.push(outcome);
    }
    Ok((table, runs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_traffic;

    fn setup() -> (RoadGraph, FeatureMatrix, TrainConfig) {
        let (graph, raw) = synth_traffic(4, 160, 2).unwrap();
        let cfg = TrainConfig {
            epochs: 2,
            hidden_units: 4,
            history_n: 3,
            eval_every: 1,
            ..TrainConfig::default()
        };
        (graph, raw.normalize().unwrap(), cfg)
    }

    #[test]
    fn single_model_single_horizon() {
        let (graph, fm, cfg) = setup();
        let cfg = TrainConfig {
            model_kind: ModelKind::Ha,
            ..cfg
        };
        let (table, runs) = compare_models(&[cfg], &graph, &fm, ExecMode::Sequential).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert_eq!(runs.len(), 1);
        let csv = table.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "horizon,metric,ha");
        assert_eq!(lines.len(), 1 + 5);
        assert!(lines[1].starts_with("1,RMSE,"));
        assert!(table.to_string().contains("Accuracy"));
    }

    #[test]
    fn repeated_models_get_distinct_labels() {
        let (graph, fm, cfg) = setup();
        let configs = [
            TrainConfig {
                model_kind: ModelKind::Gcn,
                ..cfg.clone()
            },
            TrainConfig {
                model_kind: ModelKind::Gcn,
                seed: 4,
                ..cfg.clone()
            },
            TrainConfig {
                model_kind: ModelKind::Gcn,
                horizon_t: 2,
                ..cfg
            },
        ];
        let (table, _) = compare_models(&configs, &graph, &fm, ExecMode::Parallel).unwrap();
        let labels: Vec<&str> = table.rows.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, ["gcn", "gcn#2", "gcn"]);
        assert!(table.get("gcn", 2).is_some());
        assert_eq!(table.to_csv().lines().count(), 1 + 2 * 5);
    }

    #[test]
    fn modes_agree() {
        let (graph, fm, cfg) = setup();
        let configs = [
            TrainConfig {
                model_kind: ModelKind::Gru,
                ..cfg.clone()
            },
            TrainConfig {
                model_kind: ModelKind::Tgcn,
                ..cfg
            },
        ];
        let (a, _) = compare_models(&configs, &graph, &fm, ExecMode::Sequential).unwrap();
        let (b, _) = compare_models(&configs, &graph, &fm, ExecMode::Parallel).unwrap();
        assert_eq!(a, b);
        assert!(compare_models(&[], &graph, &fm, ExecMode::Sequential).is_err());
    }
}
