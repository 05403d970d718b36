//! The quantized pose autoencoder.
//!
//! Every encoder head sees the whole flattened pose and emits one
//! `d_code`-vector. Heads are grouped per body part, plus one group of
//! global ("embodied") heads. Each vector is quantized against its group's
//! codebook; symmetric parts point at the same codebook. Each part has its
//! own decoder whose input is that part's quantized vectors followed by the
//! global quantized vectors, and whose output is the raw quaternions of the
//! part's joints. Part outputs are canonicalized and reassembled into a pose.

mod latent;
mod layout;
mod loss;
mod net;
mod ops;

pub use ops::escalated_error;

pub use latent::{ContinuousLatent, LatentCode};
pub use layout::{BODY_PARTS, CodebookSpec, GlobalSpec, HiddenSpec, PartLayout, PartSpec};
pub use loss::{model_gradient_check, FrozenQuantization, LossOutput, ModelGrads};
pub use net::QPoserModel;
