use isac_radar::channel::{delay_gate, subcarrier_offsets, synthesize_link};
use isac_radar::scenario::bistatic_range;
use isac_radar::scenarios::rotor_scene;
use isac_radar::signature::{flash_rate, spectrogram, trace_period, Spectrogram};
use isac_radar::{Scenario, SPEED_OF_LIGHT};
use num_complex::Complex64;

fn rotor_spectrogram(rotation_hz: f64, n_blades: usize, amplitude: f64) -> Spectrogram {
    let cfg = rotor_scene(rotation_hz, n_blades, 0.5);
    let scn = Scenario::new(cfg.clone(), None).unwrap();
    let offsets = subcarrier_offsets(cfg.n_subcarriers, cfg.bandwidth_hz);
    let (tx, rx) = scn.link_positions(0, 0.0);
    let delay = bistatic_range(&tx, &rx, &scn.targets[0].trajectory.position_at(0.0)) / SPEED_OF_LIGHT;
    let mut series: Vec<Complex64> = (0..cfg.n_snapshots())
        .map(|i| delay_gate(&synthesize_link(&scn, 0, i, &offsets).unwrap(), &offsets, cfg.carrier_hz, delay) * amplitude)
        .collect();
    let mean = series.iter().sum::<Complex64>() / series.len() as f64;
    series.iter_mut().for_each(|v| *v -= mean);
    spectrogram(&series, cfg.snapshot_rate_hz, 64, 8).unwrap()
}

/// A single tip sweeps through zero Doppler twice per turn, so its
/// occupancy repeats at twice the rotation rate.
#[test]
fn single_tip_flashes_twice_per_turn() {
    let spec = rotor_spectrogram(50.0, 1, 1.0);
    let rate = flash_rate(&spec).unwrap();
    assert!((rate - 100.0).abs() < 2.0, "flash rate {rate}");
    let trace = trace_period(&spec, (0.005, 0.1)).unwrap();
    assert!((trace.period_s - 0.02).abs() < 4e-4, "trace period {}", trace.period_s);
}

#[test]
fn flash_rate_ignores_amplitude_scale() {
    let a = flash_rate(&rotor_spectrogram(40.0, 2, 1.0)).unwrap();
    let b = flash_rate(&rotor_spectrogram(40.0, 2, 1e3)).unwrap();
    assert!((a - b).abs() < 1e-9);
    assert!((a - 80.0).abs() < 1.6, "flash rate {a}");
}
