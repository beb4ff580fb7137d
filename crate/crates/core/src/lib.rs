//! Query-only adversarial attacks against no-reference image quality scorers.
//!
//! An attack perturbs an image within an ℓ∞ ball of radius ρ so that a
//! black-box scorer's prediction moves as far as possible toward the extreme
//! opposite the clean prediction. The scorer is only ever queried; see
//! [`QualityOracle`] for the contract and [`wire`] for attaching external
//! models.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`). The aliases
//! below fix `f64`, which is what the command line tools use.

pub mod attack;
pub mod error;
pub mod image;
pub mod loss;
pub mod metrics;
pub mod oracle;
pub mod scalar;
pub mod wire;

pub use attack::{run_attack, Attack, AttackConfig, AttackResult, PatchMode, TraceEntry};
pub use error::{Error, Result};
pub use image::{load_image, save_image, DeltaTensor, ImageTensor, Shape};
pub use loss::{bidirectional_loss, mse_loss, LossKind};
pub use metrics::{plcc, rgo, srcc, ScorePair};
pub use oracle::{
    calibrate_logistic, counting_wrapper, BuiltinScorer, CountingOracle, LogisticMapping,
    QualityOracle, ScoreBounds,
};
pub use scalar::{Pixel, Scalar};

pub type Image = ImageTensor<f64>;
pub type Image32 = ImageTensor<f32>;
pub type Delta = DeltaTensor<f64>;
pub type Bounds = ScoreBounds<f64>;
pub type Config = AttackConfig<f64>;
pub type Outcome = AttackResult<f64>;
pub type Mapping = LogisticMapping<f64>;
pub type Pair = ScorePair<f64>;
