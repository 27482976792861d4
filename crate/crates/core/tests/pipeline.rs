use a3tgcn::csvio::write_matrix;
use a3tgcn::data::{load_speed_matrix, synth_traffic};
use a3tgcn::graph::load_adjacency;
use a3tgcn::model::{predict, Checkpoint, ModelKind};
use a3tgcn::train_eval::{evaluate_model, train, SplitDataset, TrainConfig};
use a3tgcn::{Error, ExecMode};

#[test]
fn csv_to_checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (graph, raw) = synth_traffic(5, 240, 9).unwrap();
    let adj_path = dir.path().join("adj.csv");
    let speed_path = dir.path().join("speed.csv");
    write_matrix(&adj_path, graph.adjacency()).unwrap();
    write_matrix(&speed_path, raw.values()).unwrap();
    let before = (
        std::fs::read(&adj_path).unwrap(),
        std::fs::read(&speed_path).unwrap(),
    );

    let graph = load_adjacency(&adj_path).unwrap();
    let speeds = load_speed_matrix(&speed_path, &graph).unwrap();
    assert_eq!(speeds.values(), raw.values());
    let normalized = speeds.normalize().unwrap();

    let cfg = TrainConfig {
        model_kind: ModelKind::A3tgcn,
        epochs: 4,
        hidden_units: 6,
        history_n: 4,
        horizon_t: 2,
        eval_every: 2,
        ..TrainConfig::default()
    };
    let data = SplitDataset::prepare(&normalized, &cfg).unwrap();
    let out = train(&cfg, &graph, &data).unwrap();

    let ckpt_path = dir.path().join("model.ckpt");
    Checkpoint::new(out.params.clone())
        .with_meta("scale_max", normalized.scale_max().unwrap())
        .save(&ckpt_path)
        .unwrap();
    let loaded = Checkpoint::load(&ckpt_path).unwrap();
    assert_eq!(loaded.params, out.params);
    assert_eq!(loaded.meta_f64("scale_max"), normalized.scale_max());

    let (window, _) = data.test.batch(&[0, 1]);
    assert_eq!(
        predict(&graph, &out.params, &window).unwrap(),
        predict(&graph, &loaded.params, &window).unwrap()
    );

    // the best history row is what the returned parameters score
    let best = out.history.best().unwrap().metrics;
    let again = evaluate_model(
        &graph,
        &loaded.params,
        &data.test,
        cfg.chunk_size,
        ExecMode::Sequential,
    )
    .unwrap();
    assert_eq!(best, again);

    let after = (
        std::fs::read(&adj_path).unwrap(),
        std::fs::read(&speed_path).unwrap(),
    );
    assert_eq!(before, after);
}

#[test]
fn speed_matrix_must_match_the_graph() {
    let dir = tempfile::tempdir().unwrap();
    let (graph, raw) = synth_traffic(5, 120, 1).unwrap();
    let (_, other) = synth_traffic(6, 120, 1).unwrap();
    let speed_path = dir.path().join("speed.csv");
    write_matrix(&speed_path, other.values()).unwrap();
    assert!(matches!(
        load_speed_matrix(&speed_path, &graph),
        Err(Error::Contract(_))
    ));
    write_matrix(&speed_path, raw.values()).unwrap();
    assert!(load_speed_matrix(&speed_path, &graph).is_ok());
}
