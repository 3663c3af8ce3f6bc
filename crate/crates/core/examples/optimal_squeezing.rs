//! Optimal quadrature spectrum with and without phase noise, its
//! sub-shot-noise bands, and the effect of removing detection losses.

use osq::{measured_spectra, optimal_spectrum, output_spectra, FrequencyGrid, SystemParams};

fn main() -> osq::Result<()> {
    let grid = FrequencyGrid::linspace_hz(20e3, 250e3, 4001)?;
    for delta_khz in [-120.0, -115.0, -110.0] {
        let p = SystemParams::reproduction().with_delta_hz(delta_khz * 1e3);
        let detected = measured_spectra(&grid, &p, false)?;
        println!("Δ/2π = {delta_khz} kHz");
        for (label, sigma_sq) in [("with phase noise", p.sigma_theta_sq), ("without", 0.0)] {
            let opt = optimal_spectrum(&detected, sigma_sq);
            let (i, v) = opt.min().expect("non-empty grid");
            println!("  {label:<17} min {v:.4} at {:.1} kHz", grid.hz()[i] / 1e3);
            for b in opt.bands(1.0).bands {
                println!(
                    "    band {:6.1}–{:6.1} kHz, min {:.4}, φ = {:.2} rad",
                    b.f_low_hz / 1e3,
                    b.f_high_hz / 1e3,
                    b.min_value,
                    b.argmin_phase.unwrap_or(f64::NAN)
                );
            }
        }
        // lossless detection: the output field itself
        let ideal = optimal_spectrum(&output_spectra(&grid, &p)?, p.sigma_theta_sq);
        let (_, v) = ideal.min().expect("non-empty grid");
        println!("  lossless detection: min {v:.4} (depth {:.3})", 1.0 - v);
    }
    Ok(())
}
