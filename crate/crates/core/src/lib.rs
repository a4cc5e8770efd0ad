//! Link-level simulation of non-orthogonal affine frequency division
//! multiplexing (nAFDM): chirp-subcarrier modulation with a compression factor
//! `alpha = N/N'`, doubly selective channels, MMSE and soft iterative
//! detection, and a deterministic Monte-Carlo BER/SE harness.

pub mod afm;
pub mod channel;
pub mod detect;
mod error;
pub mod ici;
pub mod modem;
pub mod qam;
pub mod sim;

pub use afm::{CMat, CVec};
pub use channel::{ChannelRealization, GainModel, Path};
pub use detect::{DetectorConfig, SoftIdOutput, SoftState};
pub use error::{Error, Result};
pub use ici::{correlation_matrix, truncate_correlation, CorrelationMatrix};
pub use modem::{Alpha, Modem, Preset, WaveformConfig};
pub use qam::{Constellation, QamOrder};

