//! FiLM-conditioned command policy, its exact gradients, Adam and the
//! two-stage training loop.

mod ablation;
mod adam;
mod checkpoint;
mod encoder;
mod features;
mod network;
mod train;

pub use ablation::{
    data_ablation, heldout_mse, nested_subsets, AblationConfig, AblationRow, AblationTable,
    ABLATION_SCHEMA, ABLATION_VERSION,
};
pub use adam::{adam_step, adam_update, AdamConfig};
pub use checkpoint::{Checkpoint, CHECKPOINT_SCHEMA, CHECKPOINT_VERSION};
pub use encoder::{cosine, encode_instruction, tokenize, InstructionEmbedding, DEFAULT_EMBED_DIM};
pub use features::{Detection, ObservationBlock, ObservationFeature, Slot, DEFAULT_SLOTS};
pub use network::{
    backward_raw, forward_raw, policy_backward, policy_forward, AdamState, ForwardCache, Layout,
    PolicyConfig, PolicyParams,
};
pub use train::{
    batch_gradient, sample_batch, train, LOSS_SCHEMA, LOSS_VERSION, BatchIndex, LossCurve, LossRow, ObjectSamples,
    PromptSample, Stage, TrainConfig, TrainOutcome, TrainingSet,
};
