//! Rotor micro-Doppler: slow-time series of the drone's delay cell, its
//! spectrogram, the fitted blade trace period and the blade flash rate.

use isac_radar::channel::{delay_gate, subcarrier_offsets, synthesize_link};
use isac_radar::scenario::bistatic_range;
use isac_radar::scenarios::rotor_scene;
use isac_radar::signature::{flash_rate, spectrogram, trace_period};
use isac_radar::{Scenario, SPEED_OF_LIGHT};
use num_complex::Complex64;

fn main() -> isac_radar::Result<()> {
    let cfg = rotor_scene(50.0, 2, 1.0);
    let scn = Scenario::new(cfg.clone(), None)?;
    let offsets = subcarrier_offsets(cfg.n_subcarriers, cfg.bandwidth_hz);
    let (tx, rx) = scn.link_positions(0, 0.0);
    let delay = bistatic_range(&tx, &rx, &scn.targets[0].trajectory.position_at(0.0)) / SPEED_OF_LIGHT;

    let mut series = (0..cfg.n_snapshots())
        .map(|i| Ok(delay_gate(&synthesize_link(&scn, 0, i, &offsets)?, &offsets, cfg.carrier_hz, delay)))
        .collect::<isac_radar::Result<Vec<Complex64>>>()?;
    // drop the static body and direct path
    let mean = series.iter().sum::<Complex64>() / series.len() as f64;
    series.iter_mut().for_each(|v| *v -= mean);

    let spec = spectrogram(&series, cfg.snapshot_rate_hz, 64, 8)?;
    let trace = trace_period(&spec, (0.005, 0.1))?;
    let flash = flash_rate(&spec)?;
    println!("spectrogram {} x {} (time x Doppler)", spec.n_time(), spec.n_doppler());
    println!(
        "trace period {:.3} ms, amplitude {:.0} Hz, flash rate {:.2} Hz",
        trace.period_s * 1e3,
        trace.amplitude_hz,
        flash
    );
    Ok(())
}
