use serde::{Deserialize, Serialize};

use super::cfar::CfarHit;
use super::map::DelayDopplerMap;

/// Vertex offset of the parabola through `(-1, ym1), (0, y0), (1, yp1)`,
/// clamped to `[-0.5, 0.5]`. A flat or non-finite triple gives 0.
pub fn parabolic_offset(ym1: f64, y0: f64, yp1: f64) -> f64 {
    let den = 2.0 * (ym1 - 2.0 * y0 + yp1);
    let d = (ym1 - yp1) / den;
    if d.is_finite() {
        // + 0.0 turns a symmetric triple's -0 into 0
        d.clamp(-0.5, 0.5) + 0.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub link: usize,
    pub cpi_start_s: f64,
    pub delay_s: f64,
    pub doppler_hz: f64,
    pub snr_db: f64,
    /// False when the peak sat on an edge or next to an empty cell.
    #[serde(default = "yes")]
    pub delay_refined: bool,
    #[serde(default = "yes")]
    pub doppler_refined: bool,
}

fn yes() -> bool {
    true
}

fn db(p: f64) -> f64 {
    10.0 * p.log10()
}

/// Returns (offset, vertex gain in dB) along one axis, or None when a
/// neighbour is missing or empty.
fn axis(prev: Option<f64>, y0: f64, next: Option<f64>) -> Option<(f64, f64)> {
    let (a, b) = (prev?, next?);
    if a <= 0.0 || b <= 0.0 {
        return None;
    }
    let (ym1, yc, yp1) = (db(a), db(y0), db(b));
    let d = parabolic_offset(ym1, yc, yp1);
    Some((d, (yp1 - ym1) / 2.0 * d / 2.0))
}

/// Off-grid delay/Doppler and SNR of a CFAR peak by per-axis log-domain
/// parabolic interpolation.
pub fn refine_peak(map: &DelayDopplerMap, peak: &CfarHit) -> Detection {
    let (k, m) = (peak.delay_idx, peak.doppler_idx);
    let p0 = map.power(k, m);
    let get = |kk: Option<usize>, mm: Option<usize>| match (kk, mm) {
        (Some(kk), Some(mm)) if kk < map.n_delay && mm < map.n_doppler => Some(map.power(kk, mm)),
        _ => None,
    };
    let dk = axis(get(k.checked_sub(1), Some(m)), p0, get(Some(k + 1), Some(m)));
    let dm = axis(get(Some(k), m.checked_sub(1)), p0, get(Some(k), Some(m + 1)));
    let (off_k, gain_k) = dk.unwrap_or((0.0, 0.0));
    let (off_m, gain_m) = dm.unwrap_or((0.0, 0.0));
    Detection {
        link: map.link,
        cpi_start_s: map.cpi_start_s,
        delay_s: map.delay_of(k as f64 + off_k),
        doppler_hz: map.doppler_of(m as f64 + off_m),
        snr_db: db(p0) + gain_k + gain_m - db(peak.noise_mean),
        delay_refined: dk.is_some(),
        doppler_refined: dm.is_some(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn reference_triples() {
        assert!((parabolic_offset(1.0, 4.0, 3.0) - 0.25).abs() < 1e-15);
        assert_eq!(parabolic_offset(3.0, 5.0, 3.0), 0.0);
        assert_eq!(parabolic_offset(2.0, 2.0, 2.0), 0.0);
        assert_eq!(parabolic_offset(0.0, 1.0, 100.0), -0.5);
    }

    #[test]
    fn antisymmetric() {
        for &(a, b, c) in &[(1.0, 4.0, 3.0), (-2.0, 0.5, -1.0), (0.1, 0.3, 0.2)] {
            assert!((parabolic_offset(a, b, c) + parabolic_offset(c, b, a)).abs() < 1e-15);
        }
    }

    fn map_with(cells: &[(usize, usize, f64)]) -> DelayDopplerMap {
        let mut map = DelayDopplerMap::zeros(2, 0.5, 20e-9, 10.0, 8, 8);
        for v in map.data.iter_mut() {
            *v = Complex64::new(0.01, 0.0);
        }
        for &(k, m, a) in cells {
            map.data[k * 8 + m] = Complex64::new(a, 0.0);
        }
        map
    }

    #[test]
    fn gaussian_peak_is_recovered_exactly() {
        // log-domain parabola is exact for a Gaussian
        let (k0, m0, s) = (3.3, 4.8, 0.9);
        let mut map = DelayDopplerMap::zeros(0, 0.0, 20e-9, 10.0, 8, 8);
        for k in 0..8 {
            for m in 0..8 {
                let r2 = (k as f64 - k0).powi(2) + (m as f64 - m0).powi(2);
                map.data[k * 8 + m] = Complex64::new((-r2 / (2.0 * s * s)).exp(), 0.0);
            }
        }
        let hit = CfarHit { delay_idx: 3, doppler_idx: 5, power: map.power(3, 5), threshold: 0.0, noise_mean: 1e-3 };
        let d = refine_peak(&map, &hit);
        assert!((d.delay_s - k0 * 20e-9).abs() < 1e-18);
        assert!((d.doppler_hz - (m0 - 4.0) * 10.0).abs() < 1e-9);
        assert!((d.snr_db - 30.0).abs() < 1e-9);
        assert!(d.delay_refined && d.doppler_refined);
    }

    #[test]
    fn edge_and_empty_neighbours_stay_on_grid() {
        let mut map = map_with(&[(0, 3, 1.0), (0, 4, 0.5)]);
        map.data[2] = Complex64::default();
        let hit = CfarHit { delay_idx: 0, doppler_idx: 3, power: 1.0, threshold: 0.0, noise_mean: 0.01 };
        let d = refine_peak(&map, &hit);
        assert!(!d.delay_refined);
        assert!(!d.doppler_refined);
        assert_eq!(d.delay_s, 0.0);
        assert_eq!(d.doppler_hz, -10.0);
        assert_eq!(d.link, 2);
    }
}
