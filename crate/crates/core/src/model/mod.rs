//! Pluggable segmentation backbone, class-weighted loss, Adam and the
//! training loop.

mod adam;
mod backbone;
mod field;
mod loss;
mod train;

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPSILON};
pub use backbone::{predict_page, Backbone, WindowClassifier, DEFAULT_WINDOW, PARAMS_MAGIC};
pub use field::ClassField;
pub use loss::{
    class_counts, class_frequencies, class_weights, weighted_ce_loss, ClassWeights, PROB_FLOOR,
    REFERENCE_CLASS_DISTRIBUTION,
};
pub use train::{should_stop, train, train_backbone, EpochRecord, TrainConfig, TrainLog};
