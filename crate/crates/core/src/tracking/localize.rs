use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{bistatic_range, BoxSpec, Vec3};

/// One bistatic range observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BistaticMeasurement {
    pub tx: Vec3,
    pub rx: Vec3,
    pub range_m: f64,
}

impl BistaticMeasurement {
    pub fn baseline_m(&self) -> f64 {
        (self.tx - self.rx).norm()
    }

    /// Observation from an absolute delay, after removing a link's calibrated offset.
    pub fn from_delay(tx: Vec3, rx: Vec3, delay_s: f64, offset_s: f64) -> Self {
        BistaticMeasurement { tx, rx, range_m: crate::SPEED_OF_LIGHT * (delay_s - offset_s) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocalizeConfig {
    pub max_iterations: usize,
    pub step_tolerance_m: f64,
    /// Grid-search bounds for the initial guess.
    pub search_box: Option<BoxSpec>,
    /// Grid points per axis of the initial search.
    pub grid_points: usize,
}

impl Default for LocalizeConfig {
    fn default() -> Self {
        LocalizeConfig { max_iterations: 50, step_tolerance_m: 1e-6, search_box: None, grid_points: 21 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionFix {
    pub t_s: f64,
    pub position: Vec3,
    /// RMS range residual at the solution.
    pub residual_m: f64,
    pub n_links: usize,
    pub iterations: usize,
}

fn sse(meas: &[BistaticMeasurement], p: &Vec3) -> f64 {
    meas.iter().map(|m| (m.range_m - bistatic_range(&m.tx, &m.rx, p)).powi(2)).sum()
}

fn unit_or_zero(v: Vec3) -> Vec3 {
    let n = v.norm();
    if n > 1e-12 {
        v / n
    } else {
        Vec3::zeros()
    }
}

/// Coarse grid search for the best-fitting point inside `bbox`.
pub fn grid_search(meas: &[BistaticMeasurement], bbox: &BoxSpec, points: usize) -> Vec3 {
    let n = points.max(2);
    let axis = |i: usize, d: usize| bbox.min[d] + (bbox.max[d] - bbox.min[d]) * i as f64 / (n - 1) as f64;
    let mut best = (f64::INFINITY, bbox.min);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let p = Vec3::new(axis(i, 0), axis(j, 1), axis(k, 2));
                let e = sse(meas, &p);
                if e < best.0 {
                    best = (e, p);
                }
            }
        }
    }
    best.1
}

/// Least-squares position from bistatic ranges by damped Gauss-Newton.
pub fn localize(meas: &[BistaticMeasurement], initial: Option<Vec3>, cfg: &LocalizeConfig) -> Result<PositionFix> {
    if meas.len() < 3 {
        return Err(Error::InsufficientData(format!("localization needs >= 3 links, got {}", meas.len())));
    }
    if meas.iter().all(|m| m.range_m - m.baseline_m() <= 1e-6 * m.baseline_m().max(1.0)) {
        return Err(Error::Degenerate("every range equals its baseline; the target lies on all baselines".into()));
    }
    let mut p = match (initial, &cfg.search_box) {
        (Some(p), _) => p,
        (None, Some(b)) => grid_search(meas, b, cfg.grid_points),
        (None, None) => {
            // centroid of the nodes lifted by the mean excess range
            let c = meas.iter().map(|m| (m.tx + m.rx) * 0.5).sum::<Vec3>() / meas.len() as f64;
            let lift = meas.iter().map(|m| (m.range_m - m.baseline_m()).max(0.0)).sum::<f64>() / meas.len() as f64;
            c + Vec3::new(0.0, 0.0, 0.5 * lift)
        }
    };
    let mut cost = sse(meas, &p);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iterations {
        iterations += 1;
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vec3::zeros();
        for m in meas {
            let row = unit_or_zero(p - m.tx) + unit_or_zero(p - m.rx);
            let r = m.range_m - bistatic_range(&m.tx, &m.rx, &p);
            jtj += row * row.transpose();
            jtr += row * r;
        }
        let eig = SymmetricEigen::new(jtj);
        let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
        if !(hi > 0.0) || lo <= 1e-12 * hi {
            return Err(Error::Degenerate(format!(
                "normal equations are singular at {p:?} (eigenvalues {lo:e}..{hi:e})"
            )));
        }
        let step = jtj.cholesky().map(|c| c.solve(&jtr)).ok_or_else(|| {
            Error::Degenerate("normal equations are not positive definite".into())
        })?;
        // halve the step until the cost does not increase
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let cand = p + step * scale;
            let c = sse(meas, &cand);
            if c <= cost {
                accepted = Some((cand, c));
                break;
            }
            scale *= 0.5;
        }
        let Some((cand, c)) = accepted else {
            converged = true;
            break;
        };
        let moved = (cand - p).norm();
        p = cand;
        cost = c;
        if moved < cfg.step_tolerance_m {
            converged = true;
            break;
        }
    }
    let residual_m = (cost / meas.len() as f64).sqrt();
    if !converged {
        return Err(Error::NotConverged { iterations, residual_m });
    }
    Ok(PositionFix { t_s: 0.0, position: p, residual_m, n_links: meas.len(), iterations })
}
