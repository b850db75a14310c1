use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::assoc::associate;
use super::kalman::KalmanState;
use crate::dsp::Detection;
use crate::error::{Error, Result};

/// Chi-square quantile used as the association gate.
pub fn chi2_gate(probability: f64, dof: f64) -> f64 {
    ChiSquared::new(dof).expect("positive dof").inverse_cdf(probability)
}

fn default_gate() -> f64 {
    chi2_gate(0.99, 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    pub carrier_hz: f64,
    /// White-noise acceleration density on delay, s^2/s^3.
    pub q_process: f64,
    /// Measurement covariance of (delay s, Doppler Hz).
    pub r_meas: [[f64; 2]; 2],
    /// Squared Mahalanobis gate.
    pub gate_threshold: f64,
    /// (M, N): confirm after M hits within the last N updates.
    pub confirm_m_of_n: (usize, usize),
    pub delete_after_misses: usize,
    /// CPI spacing. Inferred from the detection times when absent.
    pub cpi_period_s: Option<f64>,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        let sd = 5e-9;
        let sn = 2.0;
        // about 1 m/s^2 of bistatic range acceleration
        let a = 1.0 / crate::SPEED_OF_LIGHT;
        TrackerConfig {
            carrier_hz: 3e9,
            q_process: a * a,
            r_meas: [[sd * sd, 0.0], [0.0, sn * sn]],
            gate_threshold: default_gate(),
            confirm_m_of_n: (3, 5),
            delete_after_misses: 5,
            cpi_period_s: None,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let (m, n) = self.confirm_m_of_n;
        if !(self.gate_threshold > 0.0) {
            return Err(Error::Config("gate_threshold must be > 0".into()));
        }
        if m == 0 || m > n {
            return Err(Error::Config(format!("confirm M-of-N needs 0 < M <= N, got ({m}, {n})")));
        }
        if self.delete_after_misses == 0 {
            return Err(Error::Config("delete_after_misses must be >= 1".into()));
        }
        if !(self.carrier_hz > 0.0) || !(self.q_process >= 0.0) {
            return Err(Error::Config("carrier_hz must be > 0 and q_process >= 0".into()));
        }
        if let Some(p) = self.cpi_period_s {
            if !(p > 0.0) {
                return Err(Error::Config("cpi_period_s must be > 0".into()));
            }
        }
        Ok(())
    }

    pub fn r_matrix(&self) -> Matrix2<f64> {
        let r = self.r_meas;
        Matrix2::new(r[0][0], r[0][1], r[1][0], r[1][1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Coasting,
    Deleted,
}

impl fmt::Display for TrackStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrackStatus::Tentative => "tentative",
            TrackStatus::Confirmed => "confirmed",
            TrackStatus::Coasting => "coasting",
            TrackStatus::Deleted => "deleted",
        })
    }
}

impl FromStr for TrackStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tentative" => Ok(TrackStatus::Tentative),
            "confirmed" => Ok(TrackStatus::Confirmed),
            "coasting" => Ok(TrackStatus::Coasting),
            "deleted" => Ok(TrackStatus::Deleted),
            other => Err(Error::Data(format!("unknown track status {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub id: u64,
    pub filter: KalmanState,
    pub status: TrackStatus,
    /// Hit (true) / miss history of the last N updates, newest last.
    pub hits: VecDeque<bool>,
    pub consecutive_misses: usize,
    pub ever_confirmed: bool,
    pub last_update_s: f64,
}

/// Snapshot of a confirmed or coasting track after one step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackReport {
    pub t_s: f64,
    pub link: usize,
    pub track_id: u64,
    pub status: TrackStatus,
    pub delay_s: f64,
    pub doppler_hz: f64,
}

/// Per-link multi-target tracker over (delay, Doppler) measurements.
#[derive(Debug, Clone)]
pub struct Tracker {
    link: usize,
    cfg: TrackerConfig,
    r: Matrix2<f64>,
    tracks: Vec<TrackState>,
    next_id: u64,
    last_t: Option<f64>,
}

impl Tracker {
    pub fn new(link: usize, cfg: TrackerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Tracker { link, r: cfg.r_matrix(), cfg, tracks: Vec::new(), next_id: 0, last_t: None })
    }

    /// Track ids start at `first_id`; use disjoint ranges to keep ids unique across links.
    pub fn with_first_id(mut self, first_id: u64) -> Self {
        self.next_id = first_id;
        self
    }

    pub fn tracks(&self) -> &[TrackState] {
        &self.tracks
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    /// Predict, associate, update and run the M-of-N automaton for the
    /// detections of one CPI at time `t`.
    pub fn step(&mut self, t: f64, detections: &[Detection]) -> Result<Vec<TrackReport>> {
        if let Some(last) = self.last_t {
            if t < last {
                return Err(Error::Ordering(format!("tracker time went from {last} to {t}")));
            }
        }
        let dt = self.last_t.map_or(0.0, |last| t - last);
        self.last_t = Some(t);
        let fc = self.cfg.carrier_hz;
        let z: Vec<Vector2<f64>> = detections.iter().map(|d| Vector2::new(d.delay_s, d.doppler_hz)).collect();

        for tr in &mut self.tracks {
            tr.filter = tr.filter.predict(dt, self.cfg.q_process);
        }
        let cost = self
            .tracks
            .iter()
            .map(|tr| z.iter().map(|zj| tr.filter.innovation(*zj, &self.r, fc).map(|i| i.d2)).collect())
            .collect::<Result<Vec<Vec<f64>>>>()?;
        let assignment = associate(&cost, z.len(), self.cfg.gate_threshold);

        let (m, n) = self.cfg.confirm_m_of_n;
        for (tr, det) in self.tracks.iter_mut().zip(&assignment.track_to_detection) {
            match det {
                Some(j) => {
                    tr.filter = tr.filter.update(z[*j], &self.r, fc)?.0;
                    push_history(&mut tr.hits, true, n);
                    tr.consecutive_misses = 0;
                    tr.last_update_s = t;
                    if tr.ever_confirmed || tr.hits.iter().filter(|h| **h).count() >= m {
                        tr.ever_confirmed = true;
                        tr.status = TrackStatus::Confirmed;
                    } else {
                        tr.status = TrackStatus::Tentative;
                    }
                }
                None => {
                    push_history(&mut tr.hits, false, n);
                    tr.consecutive_misses += 1;
                    tr.status = if tr.consecutive_misses >= self.cfg.delete_after_misses {
                        TrackStatus::Deleted
                    } else {
                        TrackStatus::Coasting
                    };
                }
            }
        }
        // deleted tracks get one last report before they go
        let mut reports: Vec<TrackReport> =
            self.tracks.iter().filter(|tr| tr.ever_confirmed && tr.status == TrackStatus::Deleted).map(|tr| self.report(t, tr)).collect();
        self.tracks.retain(|tr| tr.status != TrackStatus::Deleted);

        for &j in &assignment.unassigned_detections {
            let mut hits = VecDeque::with_capacity(n);
            hits.push_back(true);
            let ever_confirmed = m == 1;
            self.tracks.push(TrackState {
                id: self.next_id,
                filter: KalmanState::from_measurement(z[j], &self.r, fc),
                status: if ever_confirmed { TrackStatus::Confirmed } else { TrackStatus::Tentative },
                hits,
                consecutive_misses: 0,
                ever_confirmed,
                last_update_s: t,
            });
            self.next_id += 1;
        }

        reports.extend(self.tracks.iter().filter(|tr| tr.ever_confirmed).map(|tr| self.report(t, tr)));
        Ok(reports)
    }

    fn report(&self, t: f64, tr: &TrackState) -> TrackReport {
        TrackReport {
            t_s: t,
            link: self.link,
            track_id: tr.id,
            status: tr.status,
            delay_s: tr.filter.delay_s(),
            doppler_hz: tr.filter.doppler_hz(self.cfg.carrier_hz),
        }
    }
}

fn push_history(h: &mut VecDeque<bool>, hit: bool, n: usize) {
    h.push_back(hit);
    while h.len() > n {
        h.pop_front();
    }
}
