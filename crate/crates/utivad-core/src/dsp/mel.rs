use super::{CepstraTrack, MelStats, MelTrack, Waveform, WindowKind};
use crate::error::{Error, Result};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// HTK mel scale.
pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filterbank over FFT bin centers (peak height 1).
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    /// `n_mels x n_bins`, row-major.
    pub weights: Vec<f64>,
    pub n_mels: usize,
    pub n_bins: usize,
    /// Peak frequency of each filter in Hz.
    pub centers_hz: Vec<f64>,
}

pub fn mel_filterbank(
    n_mels: usize,
    n_fft: usize,
    sample_rate: u32,
    fmin: f64,
    fmax: f64,
) -> Result<MelFilterbank> {
    let nyquist = sample_rate as f64 / 2.0;
    if fmax > nyquist {
        return Err(Error::validation(format!(
            "fmax {fmax} exceeds Nyquist {nyquist}"
        )));
    }
    if fmin < 0.0 || fmin >= fmax || n_mels == 0 {
        return Err(Error::validation("need 0 <= fmin < fmax and n_mels >= 1"));
    }
    let n_bins = n_fft / 2 + 1;
    let mel_lo = hz_to_mel(fmin);
    let mel_hi = hz_to_mel(fmax);
    // n_mels + 2 boundary points; filter k rises over [k, k+1], falls over
    // [k+1, k+2].
    let points_hz: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64))
        .collect();
    let bin_hz = sample_rate as f64 / n_fft as f64;
    let mut weights = vec![0.0; n_mels * n_bins];
    for k in 0..n_mels {
        let (lo, mid, hi) = (points_hz[k], points_hz[k + 1], points_hz[k + 2]);
        for b in 0..n_bins {
            let f = b as f64 * bin_hz;
            let w = if f > lo && f <= mid {
                (f - lo) / (mid - lo)
            } else if f > mid && f < hi {
                (hi - f) / (hi - mid)
            } else {
                0.0
            };
            weights[k * n_bins + b] = w;
        }
    }
    Ok(MelFilterbank {
        weights,
        n_mels,
        n_bins,
        centers_hz: points_hz[1..=n_mels].to_vec(),
    })
}

/// Mel-spectrogram analysis parameters. The hop is tied to the ultrasound
/// frame rate (`hop = round(sample_rate / fps)`) so mel frames pair 1:1
/// with ultrasound frames.
#[derive(Debug, Clone)]
pub struct MelConfig {
    pub fps: f64,
    pub n_fft: usize,
    pub n_mels: usize,
    pub fmin: f64,
    pub fmax: Option<f64>,
    pub log_floor: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        MelConfig {
            fps: 81.5,
            n_fft: 512,
            n_mels: 80,
            fmin: 0.0,
            fmax: None,
            log_floor: 1e-10,
        }
    }
}

/// Log-mel spectrogram with frames centered at `k * hop` (zero-padded
/// edges), `n_frames = floor(N / hop) + 1`, natural log with a floor clamp.
pub fn melspectrogram(w: &Waveform, cfg: &MelConfig) -> Result<MelTrack> {
    let sr = w.sample_rate();
    let fmax = cfg.fmax.unwrap_or(sr as f64 / 2.0);
    let fb = mel_filterbank(cfg.n_mels, cfg.n_fft, sr, cfg.fmin, fmax)?;
    if cfg.fps <= 0.0 {
        return Err(Error::validation("fps must be positive"));
    }
    let hop = (sr as f64 / cfg.fps).round() as usize;
    if hop == 0 || cfg.n_fft < hop {
        return Err(Error::validation(format!(
            "need n_fft >= hop ({} < {hop})",
            cfg.n_fft
        )));
    }

    let n_fft = cfg.n_fft;
    let n_bins = n_fft / 2 + 1;
    let n_frames = w.len() / hop + 1;
    let window = WindowKind::Hann.coefficients(n_fft);
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n_fft);

    let mut frames = Vec::with_capacity(n_frames * cfg.n_mels);
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    let mut power = vec![0.0f64; n_bins];
    let half = (n_fft / 2) as isize;
    for k in 0..n_frames {
        let center = (k * hop) as isize;
        for (i, b) in buf.iter_mut().enumerate() {
            let idx = center - half + i as isize;
            let s = if idx >= 0 && (idx as usize) < w.len() {
                w.samples()[idx as usize]
            } else {
                0.0
            };
            *b = Complex::new(s * window[i], 0.0);
        }
        fft.process(&mut buf);
        for (b, p) in power.iter_mut().enumerate() {
            *p = buf[b].norm_sqr();
        }
        for m in 0..cfg.n_mels {
            let row = &fb.weights[m * n_bins..(m + 1) * n_bins];
            let e: f64 = row.iter().zip(&power).map(|(&wv, &pv)| wv * pv).sum();
            frames.push(e.max(cfg.log_floor).ln());
        }
    }
    MelTrack::from_frames(frames, cfg.n_mels, cfg.fps)
}

/// Per-band zero-mean/unit-variance transform. With `stats = None` the
/// statistics are computed from `m` itself (training split); otherwise the
/// provided statistics are applied. Zero-variance bands are floored at
/// 1e-8 with a warning.
pub fn standardize(m: &MelTrack, stats: Option<&MelStats>) -> Result<MelTrack> {
    if m.is_standardized() {
        return Err(Error::validation("track is already standardized"));
    }
    if m.n_frames() == 0 {
        return Err(Error::validation("cannot standardize an empty track"));
    }
    let n_mels = m.n_mels();
    let stats = match stats {
        Some(s) => {
            if s.mean.len() != n_mels || s.stddev.len() != n_mels {
                return Err(Error::dimension(
                    "bands",
                    format!("stats cover {} bands, track has {n_mels}", s.mean.len()),
                ));
            }
            s.clone()
        }
        None => {
            let n = m.n_frames() as f64;
            let mut mean = vec![0.0; n_mels];
            let mut var = vec![0.0; n_mels];
            for i in 0..m.n_frames() {
                for (b, &v) in m.frame(i).iter().enumerate() {
                    mean[b] += v;
                }
            }
            mean.iter_mut().for_each(|v| *v /= n);
            for i in 0..m.n_frames() {
                for (b, &v) in m.frame(i).iter().enumerate() {
                    var[b] += (v - mean[b]) * (v - mean[b]);
                }
            }
            let stddev: Vec<f64> = var
                .iter()
                .enumerate()
                .map(|(b, &v)| {
                    let s = (v / n).sqrt();
                    if s < 1e-8 {
                        eprintln!("warning: mel band {b} has (near-)zero variance; flooring stddev");
                        1e-8
                    } else {
                        s
                    }
                })
                .collect();
            MelStats { mean, stddev }
        }
    };
    let mut frames = m.values().to_vec();
    for row in frames.chunks_mut(n_mels) {
        for (b, v) in row.iter_mut().enumerate() {
            *v = (*v - stats.mean[b]) / stats.stddev[b];
        }
    }
    Ok(MelTrack::from_frames(frames, n_mels, m.fps())?.with_stats(Some(stats)))
}

/// Mel-cepstra via the orthonormal DCT-II over the log-mel bands, keeping
/// `c0..c(n_coeffs-1)`. Input must be in the raw log domain.
pub fn mel_cepstra(m: &MelTrack, n_coeffs: usize) -> Result<CepstraTrack> {
    if m.is_standardized() {
        return Err(Error::validation(
            "mel track must be destandardized before taking cepstra",
        ));
    }
    let n = m.n_mels();
    if n_coeffs > n {
        return Err(Error::dimension(
            "coeffs",
            format!("cannot keep {n_coeffs} coefficients from {n} bands"),
        ));
    }
    // Precomputed orthonormal DCT-II basis, n_coeffs x n.
    let mut basis = vec![0.0; n_coeffs * n];
    for k in 0..n_coeffs {
        let scale = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        for j in 0..n {
            basis[k * n + j] = scale
                * (std::f64::consts::PI * k as f64 * (2.0 * j as f64 + 1.0) / (2.0 * n as f64))
                    .cos();
        }
    }
    let mut out = Vec::with_capacity(m.n_frames() * n_coeffs);
    for i in 0..m.n_frames() {
        let x = m.frame(i);
        for k in 0..n_coeffs {
            let row = &basis[k * n..(k + 1) * n];
            out.push(row.iter().zip(x).map(|(&b, &v)| b * v).sum());
        }
    }
    CepstraTrack::from_frames(out, n_coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, secs: f64, sr: u32, amp: f64) -> Waveform {
        let n = (secs * sr as f64) as usize;
        Waveform::new(
            (0..n)
                .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / sr as f64).sin())
                .collect(),
            sr,
        )
        .unwrap()
    }

    #[test]
    fn filterbank_covers_all_interior_bins() {
        let fb = mel_filterbank(80, 512, 16000, 0.0, 8000.0).unwrap();
        let n_bins = fb.n_bins;
        for b in 1..n_bins - 1 {
            let covered = (0..fb.n_mels).any(|m| fb.weights[m * n_bins + b] > 0.0);
            assert!(covered, "bin {b} uncovered");
        }
        // Nonnegative with contiguous support; adjacent filters overlap.
        for m in 0..fb.n_mels {
            let row = &fb.weights[m * n_bins..(m + 1) * n_bins];
            assert!(row.iter().all(|&w| w >= 0.0));
            let first = row.iter().position(|&w| w > 0.0).unwrap();
            let last = n_bins - 1 - row.iter().rev().position(|&w| w > 0.0).unwrap();
            assert!(row[first..=last].iter().all(|&w| w > 0.0));
            if m + 1 < fb.n_mels {
                let next = &fb.weights[(m + 1) * n_bins..(m + 2) * n_bins];
                let overlap = (0..n_bins).any(|b| row[b] > 0.0 && next[b] > 0.0);
                assert!(overlap, "filters {m} and {} disjoint", m + 1);
            }
        }
    }

    #[test]
    fn fmax_beyond_nyquist_rejected() {
        assert!(mel_filterbank(80, 512, 16000, 0.0, 9000.0).is_err());
    }

    #[test]
    fn silence_maps_to_log_floor() {
        let w = Waveform::new(vec![0.0; 16000], 16000).unwrap();
        let cfg = MelConfig::default();
        let m = melspectrogram(&w, &cfg).unwrap();
        let expect = cfg.log_floor.ln();
        assert!(m.values().iter().all(|&v| (v - expect).abs() < 1e-12));
    }

    #[test]
    fn sine_peaks_at_nearest_mel_band() {
        let w = sine(1000.0, 1.0, 16000, 0.5);
        let m = melspectrogram(&w, &MelConfig::default()).unwrap();
        let fb = mel_filterbank(80, 512, 16000, 0.0, 8000.0).unwrap();
        let expect_band = fb
            .centers_hz
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - 1000.0_f64).abs().partial_cmp(&(b.1 - 1000.0).abs()).unwrap()
            })
            .unwrap()
            .0;
        // Use a mid-signal frame to avoid edge padding.
        let mid = m.frame(m.n_frames() / 2);
        let got = mid
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert!(
            (got as isize - expect_band as isize).abs() <= 1,
            "argmax band {got}, filterbank-center oracle {expect_band}"
        );
    }

    #[test]
    fn frame_count_tracks_duration() {
        // sr 16000, fps 81.5 -> hop 196; 2 s -> floor(32000/196)+1 = 164.
        let w = sine(440.0, 2.0, 16000, 0.3);
        let m = melspectrogram(&w, &MelConfig::default()).unwrap();
        assert_eq!(m.n_frames(), 164);
        let n_uti = (2.0_f64 * 81.5).round() as isize;
        assert!((m.n_frames() as isize - n_uti).abs() <= 1);
    }

    #[test]
    fn analysis_is_deterministic() {
        let w = sine(333.0, 0.7, 16000, 0.4);
        let a = melspectrogram(&w, &MelConfig::default()).unwrap();
        let b = melspectrogram(&w, &MelConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn standardize_roundtrip() {
        let w = sine(700.0, 0.5, 16000, 0.4);
        let m = melspectrogram(&w, &MelConfig::default()).unwrap();
        let s = standardize(&m, None).unwrap();
        assert!(s.is_standardized());
        let back = s.destandardize().unwrap();
        let max_err = m
            .values()
            .iter()
            .zip(back.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_err < 1e-10, "round-trip error {max_err}");
    }

    #[test]
    fn standardize_own_stats_is_zero_mean_unit_var() {
        let w = sine(700.0, 0.5, 16000, 0.4);
        let m = melspectrogram(&w, &MelConfig::default()).unwrap();
        let s = standardize(&m, None).unwrap();
        let n = s.n_frames() as f64;
        for b in 0..s.n_mels() {
            let mean: f64 = (0..s.n_frames()).map(|i| s.frame(i)[b]).sum::<f64>() / n;
            let var: f64 = (0..s.n_frames()).map(|i| (s.frame(i)[b] - mean).powi(2)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-10);
            assert!((var - 1.0).abs() < 1e-8, "band {b} var {var}");
        }
    }

    #[test]
    fn constant_band_floors_stddev_to_zero_output() {
        let frames = vec![3.5; 8 * 4]; // 8 frames, 4 constant bands
        let m = MelTrack::from_frames(frames, 4, 81.5).unwrap();
        let s = standardize(&m, None).unwrap();
        assert!(s.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dct_of_constant_is_c0_only() {
        let n = 80;
        let v = 2.5;
        let m = MelTrack::from_frames(vec![v; n], n, 81.5).unwrap();
        let c = mel_cepstra(&m, 13).unwrap();
        assert!((c.frame(0)[0] - v * (n as f64).sqrt()).abs() < 1e-10);
        for k in 1..13 {
            assert!(c.frame(0)[k].abs() < 1e-10);
        }
    }

    #[test]
    fn dct_orthogonality_picks_out_matching_basis() {
        let n = 80;
        let k_target = 5;
        let profile: Vec<f64> = (0..n)
            .map(|j| {
                (std::f64::consts::PI * k_target as f64 * (2.0 * j as f64 + 1.0) / (2.0 * n as f64))
                    .cos()
            })
            .collect();
        let m = MelTrack::from_frames(profile, n, 81.5).unwrap();
        let c = mel_cepstra(&m, 13).unwrap();
        for k in 0..13 {
            if k == k_target {
                assert!(c.frame(0)[k].abs() > 1.0);
            } else {
                assert!(c.frame(0)[k].abs() < 1e-10, "leakage at {k}");
            }
        }
    }

    #[test]
    fn dct_matches_direct_summation_oracle() {
        let n = 80;
        let profile: Vec<f64> = (0..n).map(|j| ((j * 37 % 113) as f64 / 113.0) - 0.5).collect();
        let m = MelTrack::from_frames(profile.clone(), n, 81.5).unwrap();
        let c = mel_cepstra(&m, 13).unwrap();
        for k in 0..13 {
            let scale = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
            let mut s = 0.0;
            for (j, &x) in profile.iter().enumerate() {
                s += x * (std::f64::consts::PI * k as f64 * (2.0 * j as f64 + 1.0)
                    / (2.0 * n as f64))
                    .cos();
            }
            assert!((c.frame(0)[k] - scale * s).abs() < 1e-10);
        }
    }

    #[test]
    fn cepstra_require_raw_domain() {
        let w = sine(700.0, 0.5, 16000, 0.4);
        let m = melspectrogram(&w, &MelConfig::default()).unwrap();
        let s = standardize(&m, None).unwrap();
        assert!(mel_cepstra(&s, 13).is_err());
    }
}
