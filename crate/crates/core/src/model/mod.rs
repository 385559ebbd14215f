//! Explicit and cluster-mediated scoring, the training objective, and the
//! parameter container.

pub mod checkpoint;
pub mod forward;
pub mod gradcheck;
pub mod loss;
pub mod params;
pub mod scorer;
pub mod variant;

pub use checkpoint::Checkpoint;
pub use forward::{
    cluster_separation_loss, combined_scores, explicit_scores, implicit_scores,
    item_cluster_affinity, item_cluster_assignment, mlp_forward, structure_loss,
    user_cluster_preference,
};
pub use gradcheck::{check_gradients, GradCheckOptions, GradCheckReport};
pub use loss::{total_loss, LossGraph};
pub use params::{CcbieParams, Mlp, ModelShape, BLOCK_NAMES};
pub use scorer::{score_pairs, Scorer};
pub use variant::{VariantConfig, VariantMode};
