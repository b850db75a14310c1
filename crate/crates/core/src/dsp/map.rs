use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::hann;
use crate::error::{Error, Result};

/// Complex delay-Doppler map of one link over one CPI.
///
/// `data[k * n_doppler + m]` holds delay bin `k` (delay `k * delay_bin_s`) and
/// Doppler bin `m` (Doppler `(m - n_doppler / 2) * doppler_bin_hz`).
#[derive(Debug, Clone, PartialEq)]
pub struct DelayDopplerMap {
    pub link: usize,
    pub cpi_start_s: f64,
    pub delay_bin_s: f64,
    pub doppler_bin_hz: f64,
    pub n_delay: usize,
    pub n_doppler: usize,
    pub data: Vec<Complex64>,
}

impl DelayDopplerMap {
    pub fn zeros(link: usize, cpi_start_s: f64, delay_bin_s: f64, doppler_bin_hz: f64, n_delay: usize, n_doppler: usize) -> Self {
        DelayDopplerMap {
            link,
            cpi_start_s,
            delay_bin_s,
            doppler_bin_hz,
            n_delay,
            n_doppler,
            data: vec![Complex64::default(); n_delay * n_doppler],
        }
    }

    pub fn zero_doppler_bin(&self) -> usize {
        self.n_doppler / 2
    }

    pub fn at(&self, k: usize, m: usize) -> Complex64 {
        self.data[k * self.n_doppler + m]
    }

    pub fn power(&self, k: usize, m: usize) -> f64 {
        self.at(k, m).norm_sqr()
    }

    pub fn delay_of(&self, k: f64) -> f64 {
        k * self.delay_bin_s
    }

    pub fn doppler_of(&self, m: f64) -> f64 {
        (m - self.zero_doppler_bin() as f64) * self.doppler_bin_hz
    }

    pub fn same_shape(&self, other: &DelayDopplerMap) -> bool {
        self.n_delay == other.n_delay && self.n_doppler == other.n_doppler
    }

    /// Index of the strongest cell.
    pub fn peak(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, v) in self.data.iter().enumerate() {
            if v.norm_sqr() > self.data[best].norm_sqr() {
                best = i;
            }
        }
        (best / self.n_doppler, best % self.n_doppler)
    }

    pub fn peak_power(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max)
    }

    /// Zeroes the Doppler columns within `halfwidth` bins of zero Doppler.
    pub fn notch_zero_doppler(&mut self, halfwidth: usize) {
        let z = self.zero_doppler_bin();
        let lo = z.saturating_sub(halfwidth);
        let hi = (z + halfwidth).min(self.n_doppler - 1);
        for k in 0..self.n_delay {
            for m in lo..=hi {
                self.data[k * self.n_doppler + m] = Complex64::default();
            }
        }
    }
}

/// Reusable FFT plans and windows for K-subcarrier, M-snapshot maps.
pub struct MapFormer {
    n_delay: usize,
    n_doppler: usize,
    delay_bin_s: f64,
    doppler_bin_hz: f64,
    window_delay: Vec<f64>,
    window_doppler: Vec<f64>,
    scale: f64,
    ifft: Arc<dyn Fft<f64>>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for MapFormer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MapFormer")
            .field("n_delay", &self.n_delay)
            .field("n_doppler", &self.n_doppler)
            .finish()
    }
}

impl MapFormer {
    pub fn new(n_subcarriers: usize, cpi_len: usize, bandwidth_hz: f64, snapshot_rate_hz: f64) -> Result<Self> {
        if n_subcarriers < 2 || cpi_len < 2 {
            return Err(Error::Size("map needs at least 2 subcarriers and 2 snapshots".into()));
        }
        let mut planner = FftPlanner::new();
        let window_delay = hann(n_subcarriers);
        let window_doppler = hann(cpi_len);
        // coherent window gains: a unit on-bin path peaks at magnitude 1
        let scale = 1.0 / (window_delay.iter().sum::<f64>() * window_doppler.iter().sum::<f64>());
        Ok(MapFormer {
            n_delay: n_subcarriers,
            n_doppler: cpi_len,
            delay_bin_s: 1.0 / bandwidth_hz,
            doppler_bin_hz: snapshot_rate_hz / cpi_len as f64,
            window_delay,
            window_doppler,
            scale,
            ifft: planner.plan_fft_inverse(n_subcarriers),
            fft: planner.plan_fft_forward(cpi_len),
        })
    }

    pub fn n_delay(&self) -> usize {
        self.n_delay
    }

    pub fn n_doppler(&self) -> usize {
        self.n_doppler
    }

    /// Noise power per map cell relative to the per-sample noise power.
    pub fn noise_gain(&self) -> f64 {
        let e = |w: &[f64]| w.iter().map(|x| x * x).sum::<f64>();
        self.scale * self.scale * e(&self.window_delay) * e(&self.window_doppler)
    }

    /// Windowed inverse DFT across subcarriers, then windowed DFT across slow time.
    pub fn form(&self, link: usize, cpi_start_s: f64, snapshots: &[&[Complex64]]) -> Result<DelayDopplerMap> {
        let (kk, mm) = (self.n_delay, self.n_doppler);
        if snapshots.len() != mm {
            return Err(Error::Size(format!("CPI has {} snapshots, expected {mm}", snapshots.len())));
        }
        if let Some(bad) = snapshots.iter().find(|s| s.len() != kk) {
            return Err(Error::Size(format!("snapshot has {} subcarriers, expected {kk}", bad.len())));
        }
        // delay transform, stored slow-time-major
        let mut profiles = vec![Complex64::default(); mm * kk];
        for (s, h) in snapshots.iter().enumerate() {
            let row = &mut profiles[s * kk..(s + 1) * kk];
            for (k, v) in row.iter_mut().enumerate() {
                *v = h[k] * self.window_delay[k];
            }
            self.ifft.process(row);
        }
        let mut map = DelayDopplerMap::zeros(link, cpi_start_s, self.delay_bin_s, self.doppler_bin_hz, kk, mm);
        let mut col = vec![Complex64::default(); mm];
        let half = mm / 2;
        for k in 0..kk {
            for s in 0..mm {
                col[s] = profiles[s * kk + k] * (self.window_doppler[s] * self.scale);
            }
            self.fft.process(&mut col);
            let out = &mut map.data[k * mm..(k + 1) * mm];
            for (m, o) in out.iter_mut().enumerate() {
                *o = col[(m + mm - half) % mm];
            }
        }
        Ok(map)
    }
}

/// One-shot map formation.
pub fn form_map(
    snapshots: &[&[Complex64]],
    bandwidth_hz: f64,
    snapshot_rate_hz: f64,
) -> Result<DelayDopplerMap> {
    let k = snapshots.first().map(|s| s.len()).unwrap_or(0);
    MapFormer::new(k, snapshots.len(), bandwidth_hz, snapshot_rate_hz)?.form(0, 0.0, snapshots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{subcarrier_offsets, synthesize_paths, PathComponent, PathKind};
    use std::f64::consts::TAU;

    fn cpi(k: usize, m: usize, paths: &[(f64, Complex64, f64)], rate: f64) -> Vec<Vec<Complex64>> {
        // (delay, amplitude, doppler): Doppler applied as a slow-time phasor
        let off = subcarrier_offsets(k, 50e6);
        (0..m)
            .map(|s| {
                let p: Vec<_> = paths
                    .iter()
                    .map(|&(d, a, nu)| PathComponent {
                        delay_s: d,
                        amplitude: a * Complex64::from_polar(1.0, TAU * nu * s as f64 / rate),
                        kind: PathKind::Target,
                    })
                    .collect();
                synthesize_paths(&p, 3e9, &off)
            })
            .collect()
    }

    fn refs(v: &[Vec<Complex64>]) -> Vec<&[Complex64]> {
        v.iter().map(Vec::as_slice).collect()
    }

    #[test]
    fn on_bin_static_path_unit_peak() {
        let data = cpi(64, 16, &[(12.0 / 50e6, Complex64::new(1.0, 0.0), 0.0)], 1000.0);
        let map = form_map(&refs(&data), 50e6, 1000.0).unwrap();
        assert_eq!(map.peak(), (12, 8));
        assert!((map.at(12, 8).norm() - 1.0).abs() < 0.01);
    }

    #[test]
    fn zero_input_zero_map() {
        let data = vec![vec![Complex64::default(); 32]; 8];
        let map = form_map(&refs(&data), 50e6, 1000.0).unwrap();
        assert!(map.data.iter().all(|v| *v == Complex64::default()));
    }

    #[test]
    fn ragged_input_is_size_error() {
        let mut data = vec![vec![Complex64::default(); 32]; 8];
        data[3].pop();
        assert!(matches!(form_map(&refs(&data), 50e6, 1000.0), Err(Error::Size(_))));
    }

    #[test]
    fn moving_path_lands_on_its_doppler_bin() {
        let rate = 1000.0;
        let nu = 5.0 * rate / 32.0;
        let data = cpi(64, 32, &[(20.0 / 50e6, Complex64::new(0.5, 0.2), nu)], rate);
        let map = form_map(&refs(&data), 50e6, rate).unwrap();
        assert_eq!(map.peak(), (20, 16 + 5));
        assert!((map.doppler_of(21.0) - nu).abs() < 1e-9);
    }

    #[test]
    fn map_formation_is_linear() {
        let x = cpi(32, 8, &[(3.3 / 50e6, Complex64::new(1.0, 0.5), 40.0)], 1000.0);
        let y = cpi(32, 8, &[(7.1 / 50e6, Complex64::new(-0.3, 2.0), -120.0)], 1000.0);
        let (a, b) = (Complex64::new(0.7, -1.1), Complex64::new(2.0, 0.3));
        let z: Vec<Vec<Complex64>> = x
            .iter()
            .zip(&y)
            .map(|(xs, ys)| xs.iter().zip(ys).map(|(p, q)| a * p + b * q).collect())
            .collect();
        let fx = form_map(&refs(&x), 50e6, 1000.0).unwrap();
        let fy = form_map(&refs(&y), 50e6, 1000.0).unwrap();
        let fz = form_map(&refs(&z), 50e6, 1000.0).unwrap();
        let scale = fz.peak_power().sqrt();
        for i in 0..fz.data.len() {
            assert!((fz.data[i] - (a * fx.data[i] + b * fy.data[i])).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn notch_examples() {
        let data = cpi(
            32,
            16,
            &[(5.0 / 50e6, Complex64::new(1.0, 0.0), 0.0), (12.0 / 50e6, Complex64::new(1.0, 0.0), 10.0 * 1000.0 / 16.0)],
            1000.0,
        );
        let map = form_map(&refs(&data), 50e6, 1000.0).unwrap();
        let mut notched = map.clone();
        notched.notch_zero_doppler(1);
        for m in 0..16 {
            assert!(notched.at(5, m).norm() < 1e-12, "static row must vanish");
        }
        assert_eq!(notched.at(12, 18), map.at(12, 18));
        let mut narrow = map.clone();
        narrow.notch_zero_doppler(0);
        for k in 0..32 {
            assert_eq!(narrow.at(k, 8), Complex64::default());
            assert_eq!(narrow.at(k, 7), map.at(k, 7));
            assert_eq!(narrow.at(k, 9), map.at(k, 9));
        }
    }
}
