use num_complex::Complex64;

use super::map::DelayDopplerMap;
use crate::error::{Error, Result};

/// One exponential-average update: returns `(residual, new_state)`.
///
/// `residual = z - state`, `new_state = beta * state + (1 - beta) * z`.
pub fn background_step(state: &[Complex64], z: &[Complex64], beta: f64) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    if state.len() != z.len() {
        return Err(Error::Size(format!(
            "background state has {} cells, map has {}",
            state.len(),
            z.len()
        )));
    }
    let residual = z.iter().zip(state).map(|(z, s)| z - s).collect();
    let next = z.iter().zip(state).map(|(z, s)| s * beta + z * (1.0 - beta)).collect();
    Ok((residual, next))
}

/// Per-link static background estimate, starting from an all-zero state.
#[derive(Debug, Clone)]
pub struct BackgroundFilter {
    beta: f64,
    state: Option<Vec<Complex64>>,
}

impl BackgroundFilter {
    pub fn new(beta: f64) -> Self {
        BackgroundFilter { beta, state: None }
    }

    pub fn state(&self) -> Option<&[Complex64]> {
        self.state.as_deref()
    }

    pub fn reset(&mut self) {
        self.state = None;
    }

    pub fn step(&mut self, map: &DelayDopplerMap) -> Result<DelayDopplerMap> {
        let state = self.state.get_or_insert_with(|| vec![Complex64::default(); map.data.len()]);
        let (residual, next) = background_step(state, &map.data, self.beta)?;
        *state = next;
        Ok(DelayDopplerMap { data: residual, ..map.clone() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map_of(v: Vec<Complex64>) -> DelayDopplerMap {
        let n = v.len();
        DelayDopplerMap { data: v, ..DelayDopplerMap::zeros(0, 0.0, 1e-8, 1.0, 1, n) }
    }

    #[test]
    fn constant_input_decays_geometrically() {
        let z = vec![Complex64::new(3.0, -1.0), Complex64::new(0.5, 2.0)];
        let beta: f64 = 0.9;
        let mut f = BackgroundFilter::new(beta);
        for n in 0..60 {
            let r = f.step(&map_of(z.clone())).unwrap();
            for (r, z) in r.data.iter().zip(&z) {
                assert!((r - z * beta.powi(n)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn step_change_decays_geometrically() {
        let beta = 0.9;
        let mut f = BackgroundFilter::new(beta);
        for n in 0..30 {
            let r = f.step(&map_of(vec![Complex64::new(1.0, 0.0)])).unwrap();
            assert!((r.data[0].re - beta.powi(n)).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_mismatch() {
        let mut f = BackgroundFilter::new(0.5);
        f.step(&map_of(vec![Complex64::default(); 3])).unwrap();
        assert!(matches!(f.step(&map_of(vec![Complex64::default(); 4])), Err(Error::Size(_))));
    }

    #[test]
    fn explicit_step() {
        let (r, s) = background_step(&[Complex64::new(1.0, 0.0)], &[Complex64::new(3.0, 0.0)], 0.75).unwrap();
        assert_eq!(r[0], Complex64::new(2.0, 0.0));
        assert_eq!(s[0], Complex64::new(1.5, 0.0));
    }
}
