//! Static hand-gesture recognition: frame acquisition, motion gating,
//! PCA and neural-network classifiers, and the gesture database.

pub mod acquisition;
pub mod imaging;
pub mod linalg;
pub mod motiongate;
pub mod nn;
pub mod pca;
pub mod pipeline;
pub mod ranking;
pub mod store;
pub mod synth;
pub mod tokenizer;

pub use imaging::{BinaryImage, GradientImage, GrayImage};
pub use ranking::{Match, RankedMatches};
pub use store::{Profile, SavedModel};
