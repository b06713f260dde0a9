//! Small end-to-end training stack: Gaussian-blob classification data, a
//! one-hidden-layer perceptron (or plain softmax regression) stored as one
//! flat parameter vector, and an epoch loop driven by unified momentum with
//! either a fixed schedule or the drop scheduler.

pub mod dataset;
pub mod model;
pub mod train;

pub use dataset::{BlobSpec, SyntheticDataset};
pub use model::{Layers, MlpModel, MinibatchObjective};
pub use train::{train, Scheduler, TrainConfig, TrainOutput, TrainRecord};
