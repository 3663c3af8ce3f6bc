//! Quadrature spectrum over detection phase and frequency, and where it
//! drops below the shot-noise level.

use osq::{build_map, measured_spectra, FrequencyGrid, SystemParams};

fn main() -> osq::Result<()> {
    let p = SystemParams::reproduction();
    let grid = FrequencyGrid::linspace_hz(50e3, 170e3, 1024)?;
    let detected = measured_spectra(&grid, &p, false)?;
    let map = build_map(&detected, p.sigma_theta_sq, 181)?;

    let hz = grid.hz();
    let below: usize = map.values.iter().flatten().filter(|&&v| v < 1.0).count();
    println!(
        "{} of {} map cells below shot noise",
        below,
        map.values.len() * hz.len()
    );
    // coarse text rendering: '-' below 1, '+' above 1.02, '.' in between
    for (row, phi) in map.values.iter().zip(&map.phases).step_by(12) {
        let line: String = row
            .iter()
            .step_by(17)
            .map(|&v| if v < 1.0 { '-' } else if v > 1.02 { '+' } else { '.' })
            .collect();
        println!("φ = {phi:5.2}  {line}");
    }
    println!("          50 kHz {:>50}", "170 kHz");

    for (j, (row, v)) in map.column_min().into_iter().enumerate().step_by(128) {
        println!("{:7.1} kHz: min {v:.4} at φ = {:.2}", hz[j] / 1e3, map.phases[row]);
    }
    Ok(())
}
