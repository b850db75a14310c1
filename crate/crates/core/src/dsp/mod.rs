//! Processing steps 1-4: channel estimation, delay-Doppler maps, static
//! background removal, CA-CFAR detection and off-grid refinement.

mod background;
mod cfar;
mod cluster;
mod estimate;
mod export;
mod map;
mod refine;

use serde::{Deserialize, Serialize};

pub use background::{background_step, BackgroundFilter};
pub use cfar::{cfar_alpha, cfar_detect, CfarConfig, CfarHit};
pub use cluster::cluster_hits;
pub use estimate::{estimate_channel, ChannelEstimate, Pilot};
pub use export::{read_detections_csv, write_detections_csv, write_map_csv, write_map_pgm, DETECTIONS_HEADER};
pub use map::{form_map, DelayDopplerMap, MapFormer};
pub use refine::{parabolic_offset, refine_peak, Detection};

use crate::channel::StreamInfo;
use crate::error::{Error, Result};
use num_complex::Complex64;
use std::sync::Arc;

/// Periodic (DFT-even) Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 * (1.0 - (std::f64::consts::TAU * i as f64 / n as f64).cos()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DspConfig {
    /// Snapshots per coherent processing interval.
    pub cpi_len: usize,
    /// Exponential background forgetting factor.
    pub beta_bg: f64,
    pub notch_halfwidth_bins: usize,
    pub cfar: CfarConfig,
    pub pilot: Pilot,
}

impl Default for DspConfig {
    fn default() -> Self {
        DspConfig {
            cpi_len: 128,
            beta_bg: 0.9,
            notch_halfwidth_bins: 1,
            cfar: CfarConfig::default(),
            pilot: Pilot::Unit,
        }
    }
}

impl DspConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cpi_len < 8 {
            return Err(Error::Config("cpi_len must be >= 8".into()));
        }
        if !(0.0..1.0).contains(&self.beta_bg) {
            return Err(Error::Config("beta_bg must lie in [0, 1)".into()));
        }
        self.cfar.validate()
    }

    /// Offset from CPI start to the CPI centre, the epoch the estimates refer to.
    pub fn epoch_offset_s(&self, snapshot_rate_hz: f64) -> f64 {
        (self.cpi_len as f64 - 1.0) / (2.0 * snapshot_rate_hz)
    }
}

/// Output of one CPI on one link.
#[derive(Debug, Clone)]
pub struct CpiOutput {
    pub detections: Vec<Detection>,
    /// Background-subtracted, notched map that CFAR ran on.
    pub residual: DelayDopplerMap,
}

/// Stateful per-link chain: estimate, map, background, notch, CFAR, cluster, refine.
pub struct LinkProcessor {
    link: usize,
    cfg: DspConfig,
    former: Arc<MapFormer>,
    pilot: Vec<Complex64>,
    background: BackgroundFilter,
}

impl LinkProcessor {
    pub fn new(link: usize, cfg: DspConfig, former: Arc<MapFormer>) -> Result<Self> {
        cfg.validate()?;
        let pilot = cfg.pilot.spectrum(former.n_delay());
        Ok(LinkProcessor {
            link,
            background: BackgroundFilter::new(cfg.beta_bg),
            cfg,
            former,
            pilot,
        })
    }

    /// Per-link processors sharing one map former.
    pub fn for_stream(info: &StreamInfo, cfg: &DspConfig) -> Result<Vec<LinkProcessor>> {
        cfg.validate()?;
        let former = Arc::new(MapFormer::new(
            info.n_subcarriers,
            cfg.cpi_len,
            info.bandwidth_hz,
            info.snapshot_rate_hz,
        )?);
        (0..info.n_links())
            .map(|l| LinkProcessor::new(l, cfg.clone(), former.clone()))
            .collect()
    }

    /// Processes one CPI of received spectra (`cpi_len` vectors, one per snapshot).
    pub fn process(&mut self, cpi_start_s: f64, received: &[&[Complex64]]) -> Result<CpiOutput> {
        let estimates = received
            .iter()
            .map(|rx| estimate_channel(rx, &self.pilot).map(|e| e.values))
            .collect::<Result<Vec<_>>>()?;
        let rows: Vec<&[Complex64]> = estimates.iter().map(Vec::as_slice).collect();
        let map = self.former.form(self.link, cpi_start_s, &rows)?;
        let mut residual = self.background.step(&map)?;
        residual.notch_zero_doppler(self.cfg.notch_halfwidth_bins);
        let hits = cfar_detect(&residual, &self.cfg.cfar);
        let peaks = cluster_hits(&hits, residual.n_delay, residual.n_doppler);
        let detections = peaks.iter().map(|p| refine_peak(&residual, p)).collect();
        Ok(CpiOutput { detections, residual })
    }
}
