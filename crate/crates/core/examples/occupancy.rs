//! Mechanical displacement spectra and phonon occupancies across detuning.

use osq::{mechanical_spectra, occupancy, occupancy_grid, FrequencyGrid, Mode, SystemParams};

fn main() -> osq::Result<()> {
    println!("{:>10} {:>8} {:>8}", "Δ/2π (kHz)", "n_x", "n_y");
    for delta_khz in [-125.0, -120.0, -115.0, -110.0, -105.0] {
        let p = SystemParams::reproduction().with_delta_hz(delta_khz * 1e3);
        let grid = occupancy_grid(&p);
        let nx = occupancy(&grid, &p, Mode::X)?;
        let ny = occupancy(&grid, &p, Mode::Y)?;
        println!("{delta_khz:>10.1} {:>8.3} {:>8.3}", nx.n, ny.n);
    }

    let p = SystemParams::reproduction();
    let grid = FrequencyGrid::linspace_hz(90.0013e3, 140e3, 2000)?;
    let m = mechanical_spectra(&grid, &p)?;
    let hz = grid.hz();
    for mode in [Mode::X, Mode::Y] {
        let s = m.mode(mode);
        let (i, peak) = s
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        println!("S_{mode:?}{mode:?} peak {peak:.3e} /Hz at {:.2} kHz", hz[i] / 1e3);
    }
    Ok(())
}
