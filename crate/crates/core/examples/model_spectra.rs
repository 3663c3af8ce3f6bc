//! Detected output spectra of the two-mode system at the reproduction
//! parameters, printed at a few frequencies and written as CSV.
//!
//! Usage: `cargo run --example model_spectra -- [out.csv]`

use osq::{measured_spectra, FrequencyGrid, SystemParams};

fn main() -> osq::Result<()> {
    let p = SystemParams::reproduction();
    let grid = FrequencyGrid::linspace_hz(50e3, 170e3, 2048)?;
    let ideal = measured_spectra(&grid, &p, false)?;
    let jittered = measured_spectra(&grid, &p, true)?;

    println!("η_eff = {:.2}, σ² = {} rad²", p.eta_eff(), p.sigma_theta_sq);
    println!("{:>9}  {:>8} {:>8} {:>8}   {:>8} {:>8} {:>8}", "f (kHz)", "S_QQ", "S_PP", "S_QP", "S_QQ~", "S_PP~", "S_QP~");
    let hz = grid.hz();
    for i in (0..grid.len()).step_by(128) {
        println!(
            "{:>9.2}  {:>8.4} {:>8.4} {:>8.4}   {:>8.4} {:>8.4} {:>8.4}",
            hz[i] / 1e3,
            ideal.s_qq[i],
            ideal.s_pp[i],
            ideal.s_qp[i],
            jittered.s_qq[i],
            jittered.s_pp[i],
            jittered.s_qp[i]
        );
    }
    println!("(~ : averaged over detection-phase jitter)");

    if let Some(path) = std::env::args().nth(1) {
        jittered.write_csv(std::fs::File::create(&path)?)?;
        println!("wrote {path}");
    }
    Ok(())
}
