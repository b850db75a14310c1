use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::dsp::hann;
use crate::error::{Error, Result};

/// Short-time power spectrum of a slow-time series.
///
/// `power[i * n_doppler + j]` is the power of column `i` (window centred at
/// `time_axis_s[i]`) at Doppler `doppler_axis_hz[j]`. Power is `|X_k|^2 / L`
/// for a length-`L` Hann-windowed DFT, so each column sums to
/// `sum_n w_n^2 |x_n|^2` (Parseval).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub time_axis_s: Vec<f64>,
    pub doppler_axis_hz: Vec<f64>,
    pub power: Vec<f64>,
}

impl Spectrogram {
    pub fn n_time(&self) -> usize {
        self.time_axis_s.len()
    }

    pub fn n_doppler(&self) -> usize {
        self.doppler_axis_hz.len()
    }

    pub fn column(&self, i: usize) -> &[f64] {
        let n = self.n_doppler();
        &self.power[i * n..(i + 1) * n]
    }

    pub fn time_step_s(&self) -> f64 {
        if self.n_time() > 1 {
            self.time_axis_s[1] - self.time_axis_s[0]
        } else {
            0.0
        }
    }

    pub fn doppler_step_hz(&self) -> f64 {
        self.doppler_axis_hz[1] - self.doppler_axis_hz[0]
    }

    /// Doppler of the strongest bin in each column.
    pub fn peak_track_hz(&self) -> Vec<f64> {
        (0..self.n_time())
            .map(|i| {
                let col = self.column(i);
                let j = argmax(col);
                self.doppler_axis_hz[j]
            })
            .collect()
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Hann-windowed STFT of `series` sampled at `rate_hz`, zero-centred Doppler axis.
pub fn spectrogram(series: &[Complex64], rate_hz: f64, window_len: usize, hop: usize) -> Result<Spectrogram> {
    if window_len < 2 {
        return Err(Error::Config("spectrogram window_len must be >= 2".into()));
    }
    if hop == 0 {
        return Err(Error::Config("spectrogram hop must be >= 1".into()));
    }
    if series.len() < window_len {
        return Err(Error::Size(format!(
            "series of {} samples is shorter than the {}-sample window",
            series.len(),
            window_len
        )));
    }
    let w = hann(window_len);
    let fft = FftPlanner::new().plan_fft_forward(window_len);
    let n_cols = (series.len() - window_len) / hop + 1;
    let half = window_len / 2;
    let mut power = Vec::with_capacity(n_cols * window_len);
    let mut time_axis_s = Vec::with_capacity(n_cols);
    let mut buf = vec![Complex64::default(); window_len];
    for c in 0..n_cols {
        let start = c * hop;
        for (n, b) in buf.iter_mut().enumerate() {
            *b = series[start + n] * w[n];
        }
        fft.process(&mut buf);
        for m in 0..window_len {
            // fftshift: output index m holds DFT bin (m - half) mod L
            let k = (m + window_len - half) % window_len;
            power.push(buf[k].norm_sqr() / window_len as f64);
        }
        time_axis_s.push((start as f64 + (window_len - 1) as f64 / 2.0) / rate_hz);
    }
    let doppler_axis_hz = (0..window_len)
        .map(|m| (m as f64 - half as f64) * rate_hz / window_len as f64)
        .collect();
    Ok(Spectrogram {
        time_axis_s,
        doppler_axis_hz,
        power,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlashRateConfig {
    /// A bin is occupied when it exceeds the spectrogram median by this much.
    pub threshold_db: f64,
    /// Minimum normalised autocorrelation at the chosen lag.
    pub min_correlation: f64,
}

impl Default for FlashRateConfig {
    fn default() -> Self {
        FlashRateConfig {
            threshold_db: 10.0,
            min_correlation: 0.3,
        }
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    let mid = v.len() / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    *m
}

/// Per-column count of Doppler bins above `median + threshold_db` (median over the whole spectrogram).
pub fn occupancy(spec: &Spectrogram, threshold_db: f64) -> Vec<f64> {
    let level = median(&spec.power) * 10f64.powf(threshold_db / 10.0);
    (0..spec.n_time())
        .map(|i| spec.column(i).iter().filter(|&&p| p > level).count() as f64)
        .collect()
}

pub fn flash_rate(spec: &Spectrogram) -> Result<f64> {
    flash_rate_with(spec, &FlashRateConfig::default())
}

/// Blade-flash repetition rate from the autocorrelation of bandwidth occupancy.
pub fn flash_rate_with(spec: &Spectrogram, cfg: &FlashRateConfig) -> Result<f64> {
    let n = spec.n_time();
    if n < 9 || spec.time_step_s() <= 0.0 {
        return Err(Error::InsufficientData(format!(
            "spectrogram has {n} columns; flash-rate estimation needs at least 9"
        )));
    }
    let occ = occupancy(spec, cfg.threshold_db);
    let mean = occ.iter().sum::<f64>() / n as f64;
    let d: Vec<f64> = occ.iter().map(|o| o - mean).collect();
    let r0: f64 = d.iter().map(|x| x * x).sum();
    if r0 <= 0.0 {
        return Err(Error::InsufficientPeriodicity("occupancy is constant".into()));
    }
    let max_lag = n / 3;
    let r: Vec<f64> = (0..=max_lag + 1)
        .map(|l| d[..n - l].iter().zip(&d[l..]).map(|(a, b)| a * b).sum::<f64>() / r0)
        .collect();
    let Some(first_neg) = (1..=max_lag).find(|&l| r[l] <= 0.0) else {
        return Err(Error::InsufficientPeriodicity(
            "occupancy autocorrelation never decorrelates; the spectrogram may span fewer than 3 flash periods".into(),
        ));
    };
    let mut best = first_neg;
    for l in first_neg..=max_lag {
        if r[l] > r[best] {
            best = l;
        }
    }
    if best == max_lag && r[max_lag + 1] > r[max_lag] {
        return Err(Error::InsufficientData(
            "spectrogram spans fewer than 3 flash periods".into(),
        ));
    }
    if r[best] < cfg.min_correlation {
        return Err(Error::InsufficientPeriodicity(format!(
            "autocorrelation peak {:.3} below {:.3}",
            r[best], cfg.min_correlation
        )));
    }
    let lag = best as f64 + crate::dsp::parabolic_offset(r[best - 1], r[best], r[best + 1]);
    Ok(1.0 / (lag * spec.time_step_s()))
}

/// Best-fitting single sinusoidal Doppler trace `A sin(2 pi t / T + phi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinusoidTrace {
    pub period_s: f64,
    pub amplitude_hz: f64,
    pub phase_rad: f64,
    /// Mean normalised column power along the fitted curve.
    pub score: f64,
}

/// Fits one sinusoid to the spectrogram ridge by maximising the normalised
/// power collected along the curve, over periods in `period_range_s`.
///
/// With several identical blades every blade traces the same sinusoid shifted
/// in phase, so the fitted period is the rotation period even though the
/// magnitude spectrogram itself repeats faster.
pub fn trace_period(spec: &Spectrogram, period_range_s: (f64, f64)) -> Result<SinusoidTrace> {
    let (t_lo, t_hi) = period_range_s;
    if !(t_lo > 0.0 && t_hi > t_lo) {
        return Err(Error::Config("trace period range must satisfy 0 < min < max".into()));
    }
    let n = spec.n_time();
    let span = spec.time_axis_s.last().copied().unwrap_or(0.0) - spec.time_axis_s.first().copied().unwrap_or(0.0);
    if n < 9 || span < 2.0 * t_hi {
        return Err(Error::InsufficientData(
            "spectrogram must span at least two of the longest candidate periods".into(),
        ));
    }
    let nd = spec.n_doppler();
    let mut norm = vec![0.0; spec.power.len()];
    let mut any = false;
    for i in 0..n {
        let col = spec.column(i);
        let s: f64 = col.iter().sum();
        if s > 0.0 {
            any = true;
            for j in 0..nd {
                norm[i * nd + j] = col[j] / s;
            }
        }
    }
    if !any {
        return Err(Error::InsufficientPeriodicity("spectrogram is empty".into()));
    }

    // envelope: largest |Doppler| within 10 dB of each column maximum
    let mut a0: f64 = 0.0;
    for i in 0..n {
        let col = spec.column(i);
        let peak = col.iter().cloned().fold(0.0, f64::max);
        if peak <= 0.0 {
            continue;
        }
        for (j, &p) in col.iter().enumerate() {
            if p >= 0.1 * peak {
                a0 = a0.max(spec.doppler_axis_hz[j].abs());
            }
        }
    }
    if a0 <= 0.0 {
        return Err(Error::InsufficientPeriodicity("no Doppler excursion".into()));
    }

    let nu0 = spec.doppler_axis_hz[0];
    let dnu = spec.doppler_step_hz();
    let t0 = spec.time_axis_s[0];
    // mean normalised power along the curve of frequency f over columns `cols`
    let score = |f: f64, phase: f64, amp: f64, cols: &[usize]| -> f64 {
        let mut acc = 0.0;
        for &i in cols {
            let nu = amp * (TAU * f * (spec.time_axis_s[i] - t0) + phase).sin();
            let x = (nu - nu0) / dnu;
            let j = x.floor();
            let frac = x - j;
            let j = j as isize;
            if j >= 0 && (j as usize) + 1 < nd {
                let j = j as usize;
                acc += norm[i * nd + j] * (1.0 - frac) + norm[i * nd + j + 1] * frac;
            }
        }
        acc / cols.len() as f64
    };
    let search = |freqs: &[f64], phases: &[f64], amps: &[f64], cols: &[usize], best: &mut (f64, f64, f64, f64)| {
        for &f in freqs {
            for &ph in phases {
                for &a in amps {
                    let s = score(f, ph, a, cols);
                    if s > best.3 {
                        *best = (f, ph, a, s);
                    }
                }
            }
        }
    };
    let lin = |lo: f64, hi: f64, k: usize| -> Vec<f64> {
        (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect()
    };
    // keep at least 8 columns per shortest period so the subsampled curve cannot alias
    let max_stride = ((t_lo / (8.0 * spec.time_step_s())).floor() as usize).max(1);
    let subsample = |upto: usize, max: usize| -> Vec<usize> {
        let stride = upto.div_ceil(max).clamp(1, max_stride);
        (0..upto).step_by(stride).collect()
    };

    // coarse pass on a short stretch, uniform in frequency: a frequency error
    // df drifts the phase by 2 pi df span, so the step scales with 1 / span
    let coarse_span = span.min(4.0 * t_hi);
    let coarse_n = spec.time_axis_s.iter().take_while(|t| **t - t0 <= coarse_span).count();
    let coarse_cols = subsample(coarse_n, 256);
    let (f_lo, f_hi) = (1.0 / t_hi, 1.0 / t_lo);
    let df = 1.0 / (16.0 * coarse_span);
    let n_freq = (((f_hi - f_lo) / df).ceil() as usize + 1).max(2);
    let phases: Vec<f64> = (0..32).map(|i| TAU * i as f64 / 32.0).collect();
    let mut best = (f_lo, 0.0, a0, f64::NEG_INFINITY);
    search(&lin(f_lo, f_hi, n_freq), &phases, &lin(0.6 * a0, 1.05 * a0, 6), &coarse_cols, &mut best);

    // refine on the whole spectrogram
    let cols = subsample(n, 2048);
    let mut df = (f_hi - f_lo) / (n_freq - 1) as f64;
    let mut dph = TAU / 32.0;
    let mut da = 0.09 * a0;
    best.3 = score(best.0, best.1, best.2, &cols);
    for _ in 0..6 {
        let c = best;
        search(
            &lin((c.0 - df).max(f_lo), (c.0 + df).min(f_hi), 11),
            &lin(c.1 - dph, c.1 + dph, 11),
            &lin(c.2 - da, c.2 + da, 7),
            &cols,
            &mut best,
        );
        df /= 4.0;
        dph /= 4.0;
        da /= 3.0;
    }
    let mut best = SinusoidTrace { period_s: 1.0 / best.0, amplitude_hz: best.2, phase_rad: best.1, score: best.3 };
    best.phase_rad = best.phase_rad.rem_euclid(TAU);
    if best.phase_rad > PI {
        best.phase_rad -= TAU;
    }
    Ok(best)
}
