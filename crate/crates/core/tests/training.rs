//! End-to-end training behaviour on the oracle-constructed task.

use blm_core::lexicon::Structure;
use blm_core::nn::ModelKind;
use blm_core::train::{train, SyntheticConfig, SyntheticTask, TrainConfig};

#[test]
fn training_loss_falls_over_the_first_five_epochs() {
    let task = SyntheticTask::new(SyntheticConfig { dim: 64, ..SyntheticConfig::default() });
    let tr = task.examples("train", 100, Structure::Base, 0).unwrap();
    let va = task.examples("val", 50, Structure::Base, 0).unwrap();
    for model in [ModelKind::Cnn, ModelKind::Ffnn] {
        let config = TrainConfig { dim: 64, epochs: 5, batch_size: 10, model, ..TrainConfig::default() };
        let (_, history) = train(&config, 42, &tr, &va).unwrap();
        let losses: Vec<f64> = history.epochs.iter().map(|e| e.train_loss).collect();
        assert_eq!(losses.len(), 5);
        assert!(losses.windows(2).all(|w| w[1] < w[0]), "{model}: {losses:?}");
    }
}
