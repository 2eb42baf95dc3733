use super::Waveform;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Hann,
    Rect,
}

impl WindowKind {
    /// Periodic window of length `n`.
    pub fn coefficients(&self, n: usize) -> Vec<f64> {
        match self {
            WindowKind::Rect => vec![1.0; n],
            WindowKind::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

/// Row-major matrix of windowed signal frames.
#[derive(Debug, Clone)]
pub struct FrameMatrix {
    pub data: Vec<f64>,
    pub frame_len: usize,
    pub n_frames: usize,
    pub hop: usize,
}

impl FrameMatrix {
    pub fn frame(&self, i: usize) -> &[f64] {
        &self.data[i * self.frame_len..(i + 1) * self.frame_len]
    }
}

/// Splits a waveform into hopped frames, dropping the trailing partial
/// frame: `n_frames = floor((N - frame_len) / hop) + 1`. A signal shorter
/// than one frame yields an empty matrix, not an error.
pub fn frame_signal(
    w: &Waveform,
    frame_ms: f64,
    hop_samples: usize,
    window: WindowKind,
) -> Result<FrameMatrix> {
    let frame_len = (frame_ms / 1000.0 * w.sample_rate() as f64).round() as usize;
    if frame_len == 0 || hop_samples == 0 {
        return Err(Error::validation(
            "frame length and hop must be at least one sample",
        ));
    }
    let n = w.len();
    if n < frame_len {
        return Ok(FrameMatrix {
            data: Vec::new(),
            frame_len,
            n_frames: 0,
            hop: hop_samples,
        });
    }
    let n_frames = (n - frame_len) / hop_samples + 1;
    let coeffs = window.coefficients(frame_len);
    let mut data = Vec::with_capacity(n_frames * frame_len);
    for f in 0..n_frames {
        let start = f * hop_samples;
        data.extend(
            w.samples()[start..start + frame_len]
                .iter()
                .zip(&coeffs)
                .map(|(&s, &c)| s * c),
        );
    }
    Ok(FrameMatrix {
        data,
        frame_len,
        n_frames,
        hop: hop_samples,
    })
}
