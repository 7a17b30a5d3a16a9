//! Class-weighted objective, Adam, the mini-batch training loop and a
//! synthetic trigger-word corpus.

mod adam;
mod loss;
mod synth;
mod trainer;

pub use adam::{adam_update, AdamConfig, AdamState, Moments};
pub use loss::{
    auto_class_weights, class_weights_from_counts, ratio_to_f64, weighted_cross_entropy, ClassWeights,
    LossOutput, PROB_FLOOR,
};
pub use synth::{
    base_lexicon, generate_corpus, is_trigger, make_synthetic_corpus, SynthConfig, LEXICON_SIZE, TRIGGER_WORDS,
};
pub use trainer::{
    batch_gradient, predict_all, train, EpochRecord, MetricSummary, TrainConfig, TrainReport, TrainState,
    Trainer,
};

#[cfg(test)]
mod tests;
