//! Ultrasound tongue-imaging voice activity detection and
//! articulatory-to-acoustic mapping, end to end on a synthetic parallel
//! corpus: a deterministic neural engine with verified backprop, audio
//! framing/mel analysis/MCD, an energy+ZCR voice activity detector,
//! audio/ultrasound alignment, the speech/silence image classifier and the
//! two spectral-regression networks, plus the evaluation suite.

pub mod error;
pub mod nn;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
