use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::channels::{apply_channel_unchecked, ChannelConfig, SourceModel};
use crate::error::{check_nonneg, Error, Result};
use crate::photostat::samplers::{binomial_unchecked, poisson_unchecked};
use crate::photostat::{CountPair, RandomStream};

/// Camera and acquisition parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameConfig {
    /// Superpixels per region of interest.
    pub roi_pixels: usize,
    /// Detected probe photons per frame without the sample.
    pub mean_photons_per_region: f64,
    /// Mean dark counts per pixel per frame (Poisson).
    pub dark_mean: f64,
    /// Gaussian read noise per pixel per frame, in counts.
    pub read_noise_sigma: f64,
    pub frames_per_run: usize,
    pub runs: usize,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            roi_pixels: 64,
            mean_photons_per_region: 5e5,
            dark_mean: 2.0,
            read_noise_sigma: 5.0,
            frames_per_run: 200,
            runs: 10,
        }
    }
}

impl FrameConfig {
    pub fn validate(&self) -> Result<()> {
        if self.roi_pixels == 0 {
            return Err(Error::InvalidArgument("roi_pixels must be positive".into()));
        }
        if !(self.mean_photons_per_region.is_finite() && self.mean_photons_per_region > 0.0) {
            return Err(Error::InvalidArgument("mean_photons_per_region must be positive".into()));
        }
        check_nonneg("dark_mean", self.dark_mean)?;
        check_nonneg("read_noise_sigma", self.read_noise_sigma)?;
        if self.frames_per_run < 2 {
            return Err(Error::InvalidArgument("frames_per_run must be at least 2".into()));
        }
        if self.runs == 0 {
            return Err(Error::InvalidArgument("runs must be positive".into()));
        }
        Ok(())
    }
}

/// Pixel values of the three regions of one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub region_p: Vec<f64>,
    pub region_r: Vec<f64>,
    pub region_r_displaced: Vec<f64>,
}

/// Background-corrected region sums before rounding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawSums {
    pub probe: f64,
    pub reference: f64,
    pub displaced: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorrectedFrames {
    /// Probe and correlated reference counts.
    pub pairs: Vec<CountPair>,
    /// Probe and displaced reference counts.
    pub displaced: Vec<CountPair>,
    pub raw: Vec<RawSums>,
}

/// `src` rescaled so that the detected probe mean without the sample is
/// `fcfg.mean_photons_per_region`.
pub fn source_for_frame(src: &SourceModel, cfg: &ChannelConfig, fcfg: &FrameConfig) -> Result<SourceModel> {
    if cfg.eta_p.is_nan() || cfg.eta_p <= 0.0 {
        return Err(Error::InvalidArgument("eta_p must be positive to target a detected mean".into()));
    }
    src.with_probe_mean(fcfg.mean_photons_per_region / cfg.eta_p)
}

/// One frame: a correlated pair from `src` through `cfg`, spread uniformly
/// over the ROI pixels, plus dark counts and read noise. The displaced
/// region receives the reference arm of an independent pair.
pub fn generate_frame(
    src: &SourceModel,
    cfg: &ChannelConfig,
    fcfg: &FrameConfig,
    rng: &mut RandomStream,
) -> Result<Frame> {
    src.validate()?;
    cfg.validate()?;
    fcfg.validate()?;
    Ok(frame_unchecked(src, cfg, fcfg, rng))
}

pub(crate) fn frame_unchecked(
    src: &SourceModel,
    cfg: &ChannelConfig,
    fcfg: &FrameConfig,
    rng: &mut RandomStream,
) -> Frame {
    let pair = apply_channel_unchecked(src.sample(rng), cfg, rng);
    let other = apply_channel_unchecked(src.sample(rng), cfg, rng);
    Frame {
        region_p: region(pair.n_p, fcfg, rng),
        region_r: region(pair.n_r, fcfg, rng),
        region_r_displaced: region(other.n_r, fcfg, rng),
    }
}

/// A frame with the light blocked.
pub fn generate_dark_frame(fcfg: &FrameConfig, rng: &mut RandomStream) -> Frame {
    Frame {
        region_p: region(0, fcfg, rng),
        region_r: region(0, fcfg, rng),
        region_r_displaced: region(0, fcfg, rng),
    }
}

fn region(photons: u64, fcfg: &FrameConfig, rng: &mut RandomStream) -> Vec<f64> {
    let mut pixels = spread(photons, fcfg.roi_pixels, rng);
    if fcfg.dark_mean > 0.0 {
        for px in pixels.iter_mut() {
            *px += poisson_unchecked(fcfg.dark_mean, rng) as f64;
        }
    }
    if fcfg.read_noise_sigma > 0.0 {
        let normal = Normal::new(0.0, fcfg.read_noise_sigma).expect("validated read noise");
        for px in pixels.iter_mut() {
            *px += normal.sample(rng);
        }
    }
    pixels
}

/// Uniform multinomial partition of `photons` over `pixels` cells.
fn spread(photons: u64, pixels: usize, rng: &mut RandomStream) -> Vec<f64> {
    let mut out = Vec::with_capacity(pixels);
    let mut left = photons;
    for i in 0..pixels {
        let remaining_cells = (pixels - i) as f64;
        let k = if i + 1 == pixels { left } else { binomial_unchecked(left, 1.0 / remaining_cells, rng) };
        left -= k;
        out.push(k as f64);
    }
    out
}

/// Mean background per pixel from dark frames.
pub fn estimate_background(dark_frames: &[Frame]) -> f64 {
    let (sum, count) = dark_frames
        .iter()
        .flat_map(|f| f.region_p.iter().chain(&f.region_r).chain(&f.region_r_displaced))
        .fold((0.0, 0usize), |(s, n), &v| (s + v, n + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Integrate each region, subtract `background` per pixel, clamp at zero
/// and round to photon counts. The unrounded sums are kept in `raw`.
pub fn integrate_and_correct(frames: &[Frame], background: f64) -> Result<CorrectedFrames> {
    let Some(first) = frames.first() else {
        return Ok(CorrectedFrames::default());
    };
    let size = first.region_p.len();
    let mut out = CorrectedFrames {
        pairs: Vec::with_capacity(frames.len()),
        displaced: Vec::with_capacity(frames.len()),
        raw: Vec::with_capacity(frames.len()),
    };
    for (i, f) in frames.iter().enumerate() {
        let sizes = [f.region_p.len(), f.region_r.len(), f.region_r_displaced.len()];
        if sizes.iter().any(|&s| s != size) {
            return Err(Error::Shape(format!(
                "frame {i} has region sizes {sizes:?}, expected {size} pixels each"
            )));
        }
        let offset = background * size as f64;
        let corrected = |px: &[f64]| px.iter().sum::<f64>() - offset;
        let raw = RawSums {
            probe: corrected(&f.region_p),
            reference: corrected(&f.region_r),
            displaced: corrected(&f.region_r_displaced),
        };
        let count = |x: f64| x.max(0.0).round() as u64;
        out.pairs.push(CountPair::new(count(raw.probe), count(raw.reference)));
        out.displaced.push(CountPair::new(count(raw.probe), count(raw.displaced)));
        out.raw.push(raw);
    }
    Ok(out)
}
