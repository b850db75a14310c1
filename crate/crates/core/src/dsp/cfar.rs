use serde::{Deserialize, Serialize};

use super::map::DelayDopplerMap;
use crate::error::{Error, Result};

/// 2-D cell-averaging CFAR geometry, half-widths per axis as (delay, Doppler).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CfarConfig {
    pub guard: [usize; 2],
    pub train: [usize; 2],
    pub pfa: f64,
}

impl Default for CfarConfig {
    fn default() -> Self {
        CfarConfig { guard: [1, 1], train: [4, 4], pfa: 1e-3 }
    }
}

impl CfarConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.pfa > 0.0 && self.pfa < 1.0) {
            return Err(Error::Config(format!("pfa must lie in (0, 1), got {}", self.pfa)));
        }
        if self.train == [0, 0] {
            return Err(Error::Config("CFAR needs at least one training cell".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfarHit {
    pub delay_idx: usize,
    pub doppler_idx: usize,
    pub power: f64,
    pub threshold: f64,
    /// Mean power of the training cells.
    pub noise_mean: f64,
}

/// Threshold multiplier for `n` exponentially distributed training cells.
pub fn cfar_alpha(n: usize, pfa: f64) -> f64 {
    let n = n as f64;
    n * (pfa.powf(-1.0 / n) - 1.0)
}

struct Integral {
    cols: usize,
    sum: Vec<f64>,
}

impl Integral {
    fn new(map: &DelayDopplerMap) -> Self {
        let (rows, cols) = (map.n_delay, map.n_doppler);
        let w = cols + 1;
        let mut sum = vec![0.0; (rows + 1) * w];
        for k in 0..rows {
            let mut run = 0.0;
            for m in 0..cols {
                run += map.power(k, m);
                sum[(k + 1) * w + m + 1] = sum[k * w + m + 1] + run;
            }
        }
        Integral { cols, sum }
    }

    /// Sum over rows `r0..r1`, columns `c0..c1` (half-open).
    fn rect(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> f64 {
        let w = self.cols + 1;
        self.sum[r1 * w + c1] - self.sum[r0 * w + c1] - self.sum[r1 * w + c0] + self.sum[r0 * w + c0]
    }
}

fn span(center: usize, half: usize, len: usize) -> (usize, usize) {
    (center.saturating_sub(half), (center + half + 1).min(len))
}

/// Cells whose power exceeds `alpha * mean(training ring)`. Edge windows are
/// clipped and `alpha` is recomputed for the remaining cell count.
pub fn cfar_detect(map: &DelayDopplerMap, cfg: &CfarConfig) -> Vec<CfarHit> {
    let ii = Integral::new(map);
    let mut alphas = std::collections::HashMap::new();
    let mut hits = Vec::new();
    for k in 0..map.n_delay {
        let (ok0, ok1) = span(k, cfg.guard[0] + cfg.train[0], map.n_delay);
        let (ik0, ik1) = span(k, cfg.guard[0], map.n_delay);
        for m in 0..map.n_doppler {
            let power = map.power(k, m);
            if power == 0.0 {
                continue;
            }
            let (om0, om1) = span(m, cfg.guard[1] + cfg.train[1], map.n_doppler);
            let (im0, im1) = span(m, cfg.guard[1], map.n_doppler);
            let n = (ok1 - ok0) * (om1 - om0) - (ik1 - ik0) * (im1 - im0);
            if n == 0 {
                continue;
            }
            let total = ii.rect(ok0, ok1, om0, om1) - ii.rect(ik0, ik1, im0, im1);
            let noise_mean = total.max(0.0) / n as f64;
            let alpha = *alphas.entry(n).or_insert_with(|| cfar_alpha(n, cfg.pfa));
            let threshold = alpha * noise_mean;
            if power > threshold {
                hits.push(CfarHit { delay_idx: k, doppler_idx: m, power, threshold, noise_mean });
            }
        }
    }
    hits
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn alpha_reference_value() {
        assert!((cfar_alpha(16, 1e-3) - 8.639).abs() < 5e-4);
        // independent closed form: pfa = (1 + alpha / N)^-N
        let a = cfar_alpha(80, 1e-4);
        assert!(((1.0 + a / 80.0).powi(-80) - 1e-4).abs() < 1e-12);
    }

    fn brute_mean(map: &DelayDopplerMap, cfg: &CfarConfig, k: usize, m: usize) -> (f64, usize) {
        let (mut s, mut n) = (0.0, 0);
        for kk in 0..map.n_delay {
            for mm in 0..map.n_doppler {
                let dk = kk.abs_diff(k);
                let dm = mm.abs_diff(m);
                let outer = dk <= cfg.guard[0] + cfg.train[0] && dm <= cfg.guard[1] + cfg.train[1];
                let inner = dk <= cfg.guard[0] && dm <= cfg.guard[1];
                if outer && !inner {
                    s += map.power(kk, mm);
                    n += 1;
                }
            }
        }
        (s / n as f64, n)
    }

    #[test]
    fn integral_image_matches_brute_force_including_edges() {
        let mut map = DelayDopplerMap::zeros(0, 0.0, 1.0, 1.0, 9, 13);
        for (i, v) in map.data.iter_mut().enumerate() {
            *v = Complex64::new(((i * 37) % 11) as f64 + 0.5, 0.0);
        }
        map.data[4 * 13 + 6] = Complex64::new(1e3, 0.0);
        let cfg = CfarConfig { guard: [1, 2], train: [2, 3], pfa: 1e-2 };
        let hits = cfar_detect(&map, &cfg);
        let mut expected = Vec::new();
        for k in 0..9 {
            for m in 0..13 {
                let (mean, n) = brute_mean(&map, &cfg, k, m);
                if map.power(k, m) > cfar_alpha(n, cfg.pfa) * mean {
                    expected.push((k, m, mean));
                }
            }
        }
        assert_eq!(hits.len(), expected.len());
        for (h, e) in hits.iter().zip(&expected) {
            assert_eq!((h.delay_idx, h.doppler_idx), (e.0, e.1));
            assert!((h.noise_mean - e.2).abs() < 1e-9 * e.2);
        }
        assert!(hits.iter().any(|h| (h.delay_idx, h.doppler_idx) == (4, 6)));
    }

    #[test]
    fn corner_cell_uses_clipped_count() {
        let map = DelayDopplerMap::zeros(0, 0.0, 1.0, 1.0, 16, 16);
        let cfg = CfarConfig::default();
        let (_, n) = brute_mean(&map, &cfg, 0, 0);
        assert_eq!(n, 6 * 6 - 2 * 2);
    }

    #[test]
    fn invalid_config() {
        assert!(CfarConfig { pfa: 0.0, ..Default::default() }.validate().is_err());
        assert!(CfarConfig { train: [0, 0], ..Default::default() }.validate().is_err());
    }
}
