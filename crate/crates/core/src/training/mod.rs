//! Training regimes: ANN pre-training, traditional SNN training over all `T`
//! steps, period-partitioned training with crafted input noise, and the same
//! loop with Gaussian noise.

mod config;
mod optim;
mod trainer;

pub use config::{LrSchedule, TrainConfig, TrainMode};
pub use optim::Sgd;
pub use trainer::{
    accuracy, gradient_storage_report, train, train_ann, train_snn_gaussian, train_snn_hire,
    train_snn_traditional, EpochStats, NoiseState, PeriodEvent, TrainHook, TrainReport,
};
