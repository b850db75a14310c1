//! Scoring of detections, tracks and position fixes against ground truth.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dsp::Detection;
use crate::error::{Error, Result};
use crate::scenario::{bistatic_doppler, bistatic_range, Vec3, SPEED_OF_LIGHT};
use crate::sounding_io::{interpolate_ground_truth, records_for, DatasetMeta, GroundTruthRecord};
use crate::tracking::{PositionFix, TrackReport};

/// Matching gate in bins, plus the grid the bins refer to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchGate {
    pub delay_bins: f64,
    pub doppler_bins: f64,
    pub delay_bin_s: f64,
    pub doppler_bin_hz: f64,
    /// CPI spacing, used to pair detections and truth of the same CPI.
    pub cpi_period_s: f64,
}

impl MatchGate {
    /// Default 1 x 1 bin gate.
    pub fn unit(delay_bin_s: f64, doppler_bin_hz: f64, cpi_period_s: f64) -> Self {
        MatchGate { delay_bins: 1.0, doppler_bins: 1.0, delay_bin_s, doppler_bin_hz, cpi_period_s }
    }

    fn cpi(&self, t: f64) -> i64 {
        (t / self.cpi_period_s).round() as i64
    }

    /// Normalized squared distance, or None outside the gate.
    fn distance(&self, dtau: f64, dnu: f64) -> Option<f64> {
        let a = dtau / self.delay_bin_s;
        let b = dnu / self.doppler_bin_hz;
        (a.abs() <= self.delay_bins && b.abs() <= self.doppler_bins).then_some(a * a + b * b)
    }
}

/// Expected (delay, Doppler) of one target on one link for one CPI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthPoint {
    pub link: usize,
    pub cpi_start_s: f64,
    pub target_id: String,
    pub delay_s: f64,
    pub doppler_hz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Match {
    pub link: usize,
    pub cpi_start_s: f64,
    pub target_id: String,
    pub delay_err_s: f64,
    pub doppler_err_hz: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchResult {
    pub matches: Vec<Match>,
    pub misses: Vec<TruthPoint>,
    pub false_alarms: Vec<Detection>,
}

/// Per-CPI truth for every link and target of a dataset, at the CPI centre
/// epoch `cpi_start + epoch_offset_s`. Targets outside the unambiguous delay
/// span are left out.
pub fn truth_points(
    meta: &DatasetMeta,
    gt: &[GroundTruthRecord],
    cpi_len: usize,
    epoch_offset_s: f64,
) -> Result<Vec<TruthPoint>> {
    let ids: BTreeSet<&str> = gt.iter().map(|r| r.target_id.as_str()).collect();
    let per_target: Vec<(String, Vec<GroundTruthRecord>)> =
        ids.iter().map(|id| (id.to_string(), records_for(gt, id))).collect();
    let nodes = meta
        .links
        .iter()
        .map(|l| {
            let pos = |id: &str| {
                meta.fixed_position(id)
                    .ok_or_else(|| Error::Data(format!("node {id} has no fixed position in the dataset")))
            };
            Ok((pos(&l.tx_id)?, pos(&l.rx_id)?))
        })
        .collect::<Result<Vec<(Vec3, Vec3)>>>()?;
    let max_delay = meta.n_subcarriers as f64 / meta.bandwidth_hz;
    let n_cpi = meta.n_snapshots / cpi_len;
    let mut out = Vec::new();
    for c in 0..n_cpi {
        let start = (c * cpi_len) as f64 / meta.snapshot_rate_hz;
        for (link, (tx, rx)) in nodes.iter().enumerate() {
            for (id, recs) in &per_target {
                let (p, v) = interpolate_ground_truth(recs, start + epoch_offset_s)?;
                let delay_s = bistatic_range(tx, rx, &p) / SPEED_OF_LIGHT;
                if delay_s >= max_delay {
                    continue;
                }
                let doppler_hz = bistatic_doppler(tx, rx, &p, &v, meta.carrier_hz)?;
                out.push(TruthPoint { link, cpi_start_s: start, target_id: id.clone(), delay_s, doppler_hz });
            }
        }
    }
    Ok(out)
}

/// One-to-one, closest-first matching of detections to truth per link and CPI.
pub fn match_detections(detections: &[Detection], truth: &[TruthPoint], gate: &MatchGate) -> MatchResult {
    let mut det_groups: BTreeMap<(usize, i64), Vec<&Detection>> = BTreeMap::new();
    for d in detections {
        det_groups.entry((d.link, gate.cpi(d.cpi_start_s))).or_default().push(d);
    }
    let mut truth_groups: BTreeMap<(usize, i64), Vec<&TruthPoint>> = BTreeMap::new();
    for t in truth {
        truth_groups.entry((t.link, gate.cpi(t.cpi_start_s))).or_default().push(t);
    }
    let keys: BTreeSet<(usize, i64)> = det_groups.keys().chain(truth_groups.keys()).copied().collect();
    let mut out = MatchResult::default();
    for key in keys {
        let dets = det_groups.get(&key).map(Vec::as_slice).unwrap_or(&[]);
        let tps = truth_groups.get(&key).map(Vec::as_slice).unwrap_or(&[]);
        let mut pairs = Vec::new();
        for (i, d) in dets.iter().enumerate() {
            for (j, t) in tps.iter().enumerate() {
                if let Some(dist) = gate.distance(d.delay_s - t.delay_s, d.doppler_hz - t.doppler_hz) {
                    pairs.push((dist, i, j));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut det_used = vec![false; dets.len()];
        let mut truth_used = vec![false; tps.len()];
        for (_, i, j) in pairs {
            if det_used[i] || truth_used[j] {
                continue;
            }
            det_used[i] = true;
            truth_used[j] = true;
            out.matches.push(Match {
                link: key.0,
                cpi_start_s: tps[j].cpi_start_s,
                target_id: tps[j].target_id.clone(),
                delay_err_s: dets[i].delay_s - tps[j].delay_s,
                doppler_err_hz: dets[i].doppler_hz - tps[j].doppler_hz,
            });
        }
        out.false_alarms.extend(dets.iter().zip(&det_used).filter(|(_, u)| !**u).map(|(d, _)| (*d).clone()));
        out.misses.extend(tps.iter().zip(&truth_used).filter(|(_, u)| !**u).map(|(t, _)| (*t).clone()));
    }
    out
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn rmse(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for v in values {
        s += v * v;
        n += 1;
    }
    (n > 0).then(|| (s / n as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    pub link: usize,
    pub matches: usize,
    pub misses: usize,
    pub false_alarms: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub delay_rmse_s: Option<f64>,
    pub doppler_rmse_hz: Option<f64>,
    pub false_alarms_per_map: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackMetrics {
    pub link: usize,
    pub confirmed_tracks: usize,
    /// Tracks whose reports mostly fall outside the gate of every truth point.
    pub false_tracks: usize,
    pub delay_rmse_s: Option<f64>,
    pub doppler_rmse_hz: Option<f64>,
    /// Fraction of truth CPIs covered by a gated track report.
    pub coverage: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub detections: Vec<DetectionMetrics>,
    pub tracks: Vec<TrackMetrics>,
    pub n_fixes: usize,
    pub position_rmse_m: Option<f64>,
}

/// Inputs to [`summarize`] beyond the detection matches.
#[derive(Debug, Clone, Default)]
pub struct EvalInputs<'a> {
    pub n_links: usize,
    /// Number of maps (CPIs) processed per link.
    pub n_maps: usize,
    pub tracks: &'a [TrackReport],
    pub truth: &'a [TruthPoint],
    pub fixes: &'a [PositionFix],
    pub ground_truth: &'a [GroundTruthRecord],
    pub epoch_offset_s: f64,
}

fn detection_metrics(link: usize, m: &MatchResult, n_maps: usize) -> DetectionMetrics {
    let matches: Vec<&Match> = m.matches.iter().filter(|x| x.link == link).collect();
    let misses = m.misses.iter().filter(|x| x.link == link).count();
    let false_alarms = m.false_alarms.iter().filter(|x| x.link == link).count();
    DetectionMetrics {
        link,
        matches: matches.len(),
        misses,
        false_alarms,
        precision: ratio(matches.len(), matches.len() + false_alarms),
        recall: ratio(matches.len(), matches.len() + misses),
        delay_rmse_s: rmse(matches.iter().map(|x| x.delay_err_s)),
        doppler_rmse_hz: rmse(matches.iter().map(|x| x.doppler_err_hz)),
        false_alarms_per_map: ratio(false_alarms, n_maps),
    }
}

fn track_metrics(link: usize, inp: &EvalInputs<'_>, gate: &MatchGate) -> TrackMetrics {
    let mut by_track: BTreeMap<u64, Vec<&TrackReport>> = BTreeMap::new();
    for r in inp.tracks.iter().filter(|r| r.link == link) {
        by_track.entry(r.track_id).or_default().push(r);
    }
    let mut truth: BTreeMap<i64, Vec<&TruthPoint>> = BTreeMap::new();
    for t in inp.truth.iter().filter(|t| t.link == link) {
        truth.entry(gate.cpi(t.cpi_start_s)).or_default().push(t);
    }
    let mut errors = Vec::new();
    let mut covered = BTreeSet::new();
    let mut false_tracks = 0;
    for reports in by_track.values() {
        let mut gated = 0;
        for r in reports {
            let cpi = gate.cpi(r.t_s);
            let best = truth.get(&cpi).into_iter().flatten().filter_map(|t| {
                let (dt, dn) = (r.delay_s - t.delay_s, r.doppler_hz - t.doppler_hz);
                gate.distance(dt, dn).map(|d| (d, dt, dn))
            });
            if let Some((_, dt, dn)) = best.min_by(|a, b| a.0.total_cmp(&b.0)) {
                gated += 1;
                errors.push((dt, dn));
                covered.insert(cpi);
            }
        }
        if 2 * gated < reports.len() {
            false_tracks += 1;
        }
    }
    TrackMetrics {
        link,
        confirmed_tracks: by_track.len(),
        false_tracks,
        delay_rmse_s: rmse(errors.iter().map(|e| e.0)),
        doppler_rmse_hz: rmse(errors.iter().map(|e| e.1)),
        coverage: ratio(covered.len(), truth.len()),
    }
}

/// Position error of each fix against the nearest target at the fix epoch.
pub fn fix_errors(fixes: &[PositionFix], gt: &[GroundTruthRecord], epoch_offset_s: f64) -> Result<Vec<f64>> {
    let ids: BTreeSet<&str> = gt.iter().map(|r| r.target_id.as_str()).collect();
    let per_target: Vec<Vec<GroundTruthRecord>> = ids.iter().map(|id| records_for(gt, id)).collect();
    fixes
        .iter()
        .map(|f| {
            let mut best = f64::INFINITY;
            for recs in &per_target {
                let (p, _) = interpolate_ground_truth(recs, f.t_s + epoch_offset_s)?;
                best = best.min((f.position - p).norm());
            }
            Ok(best)
        })
        .collect()
}

pub fn summarize(matches: &MatchResult, inputs: &EvalInputs<'_>, gate: &MatchGate) -> Result<EvalReport> {
    let position_rmse_m = if inputs.ground_truth.is_empty() {
        None
    } else {
        rmse(fix_errors(inputs.fixes, inputs.ground_truth, inputs.epoch_offset_s)?.into_iter())
    };
    Ok(EvalReport {
        detections: (0..inputs.n_links).map(|l| detection_metrics(l, matches, inputs.n_maps)).collect(),
        tracks: (0..inputs.n_links).map(|l| track_metrics(l, inputs, gate)).collect(),
        n_fixes: inputs.fixes.len(),
        position_rmse_m,
    })
}

fn opt(v: Option<f64>, scale: f64, prec: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{:.*}", prec, x * scale))
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "link  match  miss  fa  precision  recall  delay_rmse_ns  doppler_rmse_hz  fa/map")?;
        for d in &self.detections {
            writeln!(
                f,
                "{:>4}  {:>5}  {:>4}  {:>2}  {:>9}  {:>6}  {:>13}  {:>15}  {:>6}",
                d.link,
                d.matches,
                d.misses,
                d.false_alarms,
                opt(d.precision, 1.0, 3),
                opt(d.recall, 1.0, 3),
                opt(d.delay_rmse_s, 1e9, 2),
                opt(d.doppler_rmse_hz, 1.0, 2),
                opt(d.false_alarms_per_map, 1.0, 3),
            )?;
        }
        writeln!(f, "link  confirmed  false  coverage  delay_rmse_ns  doppler_rmse_hz")?;
        for t in &self.tracks {
            writeln!(
                f,
                "{:>4}  {:>9}  {:>5}  {:>8}  {:>13}  {:>15}",
                t.link,
                t.confirmed_tracks,
                t.false_tracks,
                opt(t.coverage, 1.0, 3),
                opt(t.delay_rmse_s, 1e9, 2),
                opt(t.doppler_rmse_hz, 1.0, 2),
            )?;
        }
        write!(f, "fixes {}  position_rmse_m {}", self.n_fixes, opt(self.position_rmse_m, 1.0, 3))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gate() -> MatchGate {
        MatchGate::unit(20e-9, 8.0, 0.128)
    }

    fn det(link: usize, t: f64, delay: f64, doppler: f64) -> Detection {
        Detection {
            link,
            cpi_start_s: t,
            delay_s: delay,
            doppler_hz: doppler,
            snr_db: 20.0,
            delay_refined: true,
            doppler_refined: true,
        }
    }

    fn tp(link: usize, t: f64, delay: f64, doppler: f64) -> TruthPoint {
        TruthPoint { link, cpi_start_s: t, target_id: "uav".into(), delay_s: delay, doppler_hz: doppler }
    }

    #[test]
    fn exact_detection_matches_with_zero_error() {
        let m = match_detections(&[det(0, 0.0, 1e-6, 30.0)], &[tp(0, 0.0, 1e-6, 30.0)], &gate());
        assert_eq!(m.matches.len(), 1);
        assert_eq!(m.matches[0].delay_err_s, 0.0);
        assert_eq!(m.matches[0].doppler_err_hz, 0.0);
    }

    #[test]
    fn missing_detection_is_a_miss() {
        let m = match_detections(&[], &[tp(0, 0.128, 1e-6, 30.0)], &gate());
        assert_eq!(m.misses.len(), 1);
        assert!(m.matches.is_empty());
    }

    #[test]
    fn closer_detection_wins() {
        let dets = [det(0, 0.0, 1e-6 + 15e-9, 30.0), det(0, 0.0, 1e-6 + 5e-9, 32.0)];
        let m = match_detections(&dets, &[tp(0, 0.0, 1e-6, 30.0)], &gate());
        assert_eq!(m.matches.len(), 1);
        assert!((m.matches[0].delay_err_s - 5e-9).abs() < 1e-18);
        assert_eq!(m.false_alarms.len(), 1);
        assert_eq!(m.false_alarms[0].delay_s, dets[0].delay_s);
    }

    #[test]
    fn summary_of_perfect_and_empty_inputs() {
        let truth = vec![tp(0, 0.0, 1e-6, 30.0), tp(0, 0.128, 1.01e-6, 30.0)];
        let dets: Vec<_> = truth.iter().map(|t| det(0, t.cpi_start_s, t.delay_s, t.doppler_hz)).collect();
        let inputs = EvalInputs { n_links: 1, n_maps: 2, truth: &truth, ..Default::default() };
        let r = summarize(&match_detections(&dets, &truth, &gate()), &inputs, &gate()).unwrap();
        assert_eq!(r.detections[0].precision, Some(1.0));
        assert_eq!(r.detections[0].recall, Some(1.0));
        assert_eq!(r.detections[0].delay_rmse_s, Some(0.0));
        let r = summarize(&match_detections(&[], &truth, &gate()), &inputs, &gate()).unwrap();
        assert_eq!(r.detections[0].recall, Some(0.0));
        assert_eq!(r.detections[0].precision, None);
        assert_eq!(r.detections[0].delay_rmse_s, None);
        assert_eq!(r.position_rmse_m, None);
    }

    #[test]
    fn scripted_mixture() {
        // three matches with delay errors 3, 4, 12 ns, one false alarm, one miss
        let truth: Vec<_> = (0..4).map(|i| tp(0, i as f64 * 0.128, 1e-6, 50.0)).collect();
        let dets = vec![
            det(0, 0.0, 1e-6 + 3e-9, 50.0),
            det(0, 0.128, 1e-6 - 4e-9, 50.0),
            det(0, 0.256, 1e-6 + 12e-9, 50.0),
            det(0, 0.256, 2e-6, -100.0),
        ];
        let m = match_detections(&dets, &truth, &gate());
        let inputs = EvalInputs { n_links: 1, n_maps: 4, truth: &truth, ..Default::default() };
        let r = summarize(&m, &inputs, &gate()).unwrap();
        let d = &r.detections[0];
        assert_eq!((d.matches, d.misses, d.false_alarms), (3, 1, 1));
        assert_eq!(d.precision, Some(0.75));
        assert_eq!(d.recall, Some(0.75));
        let expected = ((9.0 + 16.0 + 144.0) / 3.0f64).sqrt() * 1e-9;
        assert!((d.delay_rmse_s.unwrap() - expected).abs() < 1e-18);
        assert_eq!(d.false_alarms_per_map, Some(0.25));
    }
}
