//! Audio framing, mel analysis, mel-cepstra, MCD and Griffin-Lim
//! resynthesis. Everything here is a pure function of its inputs.

mod frame;
mod griffin_lim;
mod mcd;
mod mel;

pub use frame::{frame_signal, FrameMatrix, WindowKind};
pub use griffin_lim::{griffin_lim, GriffinLimConfig};
pub use mcd::mcd;
pub use mel::{
    mel_cepstra, mel_filterbank, melspectrogram, standardize, MelConfig, MelFilterbank,
};

use crate::error::{Error, Result};

/// Mono audio: samples in `[-1, 1]` with a sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Waveform> {
        if samples.is_empty() {
            return Err(Error::validation("waveform must be nonempty"));
        }
        if sample_rate == 0 {
            return Err(Error::validation("sample rate must be positive"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("waveform samples".to_string()));
        }
        Ok(Waveform {
            samples,
            sample_rate,
        })
    }

    #[inline]
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    #[inline]
    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn rms(&self) -> f64 {
        (self.samples.iter().map(|v| v * v).sum::<f64>() / self.samples.len() as f64).sqrt()
    }
}

/// Per-band standardization statistics of a mel track.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MelStats {
    pub mean: Vec<f64>,
    pub stddev: Vec<f64>,
}

/// Per-frame log-mel vectors at a fixed frame rate. `stats` is present
/// exactly when the track is in the standardized domain, and holds the
/// statistics that were applied.
#[derive(Debug, Clone, PartialEq)]
pub struct MelTrack {
    frames: Vec<f64>,
    n_mels: usize,
    fps: f64,
    stats: Option<MelStats>,
}

impl MelTrack {
    pub fn from_frames(frames: Vec<f64>, n_mels: usize, fps: f64) -> Result<MelTrack> {
        if n_mels == 0 || frames.len() % n_mels != 0 {
            return Err(Error::dimension(
                "bands",
                format!("{} values do not tile into {n_mels}-band frames", frames.len()),
            ));
        }
        if fps <= 0.0 {
            return Err(Error::validation("fps must be positive"));
        }
        Ok(MelTrack {
            frames,
            n_mels,
            fps,
            stats: None,
        })
    }

    pub(crate) fn with_stats(mut self, stats: Option<MelStats>) -> MelTrack {
        self.stats = stats;
        self
    }

    #[inline]
    pub fn n_frames(&self) -> usize {
        self.frames.len() / self.n_mels
    }

    #[inline]
    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    #[inline]
    pub fn fps(&self) -> f64 {
        self.fps
    }

    #[inline]
    pub fn frame(&self, i: usize) -> &[f64] {
        &self.frames[i * self.n_mels..(i + 1) * self.n_mels]
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.frames
    }

    pub fn is_standardized(&self) -> bool {
        self.stats.is_some()
    }

    pub fn stats(&self) -> Option<&MelStats> {
        self.stats.as_ref()
    }

    /// Inverse of [`standardize`] using the stored statistics.
    pub fn destandardize(&self) -> Result<MelTrack> {
        let stats = self.stats.as_ref().ok_or_else(|| {
            Error::validation("track is not standardized; nothing to invert")
        })?;
        let mut frames = self.frames.clone();
        for row in frames.chunks_mut(self.n_mels) {
            for (b, v) in row.iter_mut().enumerate() {
                *v = *v * stats.stddev[b] + stats.mean[b];
            }
        }
        Ok(MelTrack {
            frames,
            n_mels: self.n_mels,
            fps: self.fps,
            stats: None,
        })
    }
}

/// Mel-cepstral coefficient track, `c0..cD` per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CepstraTrack {
    frames: Vec<f64>,
    n_coeffs: usize,
}

impl CepstraTrack {
    pub fn from_frames(frames: Vec<f64>, n_coeffs: usize) -> Result<CepstraTrack> {
        if n_coeffs < 2 {
            return Err(Error::validation("need at least c0 and c1"));
        }
        if frames.len() % n_coeffs != 0 {
            return Err(Error::dimension(
                "coeffs",
                format!("{} values do not tile into {n_coeffs}-coefficient frames", frames.len()),
            ));
        }
        if frames.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("cepstra".to_string()));
        }
        Ok(CepstraTrack { frames, n_coeffs })
    }

    #[inline]
    pub fn n_frames(&self) -> usize {
        self.frames.len() / self.n_coeffs
    }

    #[inline]
    pub fn n_coeffs(&self) -> usize {
        self.n_coeffs
    }

    #[inline]
    pub fn frame(&self, i: usize) -> &[f64] {
        &self.frames[i * self.n_coeffs..(i + 1) * self.n_coeffs]
    }
}
