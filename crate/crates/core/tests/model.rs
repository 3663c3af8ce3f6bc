mod common;

use std::f64::consts::TAU;

use common::{langevin_solve, rel};
use osq::model::{input_response, thermal_drive};
use osq::{
    apply_efficiency, mechanical_spectra, output_spectra, transfer_functions, FrequencyGrid,
    SystemParams,
};
use proptest::prelude::*;

fn measured_system() -> SystemParams {
    SystemParams::reproduction()
}

#[test]
fn output_spectra_match_langevin_solve() {
    for p in [measured_system(), {
        let mut q = measured_system();
        q.gamma_x = 0.0;
        q.gamma_y = 0.0;
        q
    }] {
        let grid = FrequencyGrid::linspace_hz(1.03e3, 400.7e3, 1000).unwrap();
        let s = output_spectra(&grid, &p).unwrap();
        for (i, &w) in grid.omegas().iter().enumerate() {
            let (qq, pp, qp) = langevin_solve(w, &p).spectra();
            let scale = qq.max(pp);
            assert!(rel(s.s_qq[i], qq, 0.0) < 1e-10, "qq at {w}");
            assert!(rel(s.s_pp[i], pp, 0.0) < 1e-10, "pp at {w}");
            assert!((s.s_qp[i] - qp).abs() < 1e-10 * scale, "qp at {w}");
        }
    }
}

#[test]
fn each_transfer_function_matches_langevin_solve() {
    let p = measured_system();
    for f in [110e3, 80e3, 150e3, 5e3, 300e3] {
        let w = TAU * f;
        let t = transfer_functions(w, &p).unwrap();
        let o = langevin_solve(w, &p);
        let close = |a: num_complex::Complex64, b: common::C| {
            (a.re - b.re).hypot(a.im - b.im) <= 1e-11 * b.norm().max(1e-3)
        };
        assert!(close(t.b_q_pos, o.q_from_a), "B_Q at {f}");
        assert!(close(t.b_q_neg.conj(), o.q_from_adag), "B_Q*(-w) at {f}");
        assert!(close(t.b_p_pos, o.p_from_a), "B_P at {f}");
        assert!(close(t.b_p_neg.conj(), o.p_from_adag), "B_P*(-w) at {f}");
        // thermal path: coefficient of ξ_x is 𝒜 · 2 g_x χ_x √Γ_x
        let cx = osq::mech_susceptibility(w, p.omega_x).unwrap();
        let weight = 2.0 * p.g_x * cx * p.gamma_x.sqrt();
        assert!(close(t.a_q * weight, o.q[0]), "A_Q at {f}");
        assert!(close(t.a_p * weight, o.p[0]), "A_P at {f}");
        let r = input_response(w, &p).unwrap();
        for k in 0..4 {
            assert!(close(r.q[k], o.q[k]) && close(r.p[k], o.p[k]), "input {k} at {f}");
        }
    }
}

#[test]
fn mechanical_spectra_match_langevin_solve() {
    let p = measured_system();
    let grid = FrequencyGrid::linspace_hz(0.77e3, 399.1e3, 1000).unwrap();
    let m = mechanical_spectra(&grid, &p).unwrap();
    for (i, &w) in grid.omegas().iter().enumerate() {
        let o = langevin_solve(w, &p);
        assert!(rel(m.s_xx[i], o.s_xx(), 0.0) < 1e-10, "xx at {w}");
        assert!(rel(m.s_yy[i], o.s_yy(), 0.0) < 1e-10, "yy at {w}");
    }
}

#[test]
fn hybridized_spectra_are_split() {
    let p = measured_system();
    let grid = FrequencyGrid::linspace_hz(50.013e3, 200.013e3, 6001).unwrap();
    let s = output_spectra(&grid, &p).unwrap();
    // local maxima rising above a tenth of the tallest one
    let peaks = |v: &[f64]| {
        let top = v.iter().cloned().fold(f64::MIN, f64::max);
        let base = v.iter().cloned().fold(f64::MAX, f64::min);
        (1..v.len() - 1)
            .filter(|&i| v[i] > v[i - 1] && v[i] > v[i + 1] && v[i] - base > 0.1 * (top - base))
            .count()
    };
    assert!(peaks(&s.s_pp) >= 2, "s_pp peaks {}", peaks(&s.s_pp));
    let m = mechanical_spectra(&grid, &p).unwrap();
    // strong mixing pulls both displacement maxima between the bare frequencies
    let hz = grid.hz();
    for v in [&m.s_xx, &m.s_yy] {
        let imax = (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
        assert!(hz[imax] > 109e3 && hz[imax] < 121e3, "peak at {}", hz[imax]);
    }
}

#[test]
fn thermal_drive_weight() {
    let p = measured_system();
    let w = TAU * 90e3;
    let cx = osq::mech_susceptibility(w, p.omega_x).unwrap();
    let cy = osq::mech_susceptibility(w, p.omega_y).unwrap();
    let expect = 4.0 * (p.g_x.powi(2) * cx * cx * p.gamma_x + p.g_y.powi(2) * cy * cy * p.gamma_y);
    assert!(rel(thermal_drive(w, &p).unwrap(), expect, 0.0) < 1e-14);
}

#[test]
fn grid_on_pole_is_rejected() {
    let p = measured_system();
    let grid = FrequencyGrid::new(vec![1.0, p.omega_y, 2.0 * p.omega_y]).unwrap();
    assert!(matches!(output_spectra(&grid, &p), Err(osq::Error::Pole { .. })));
    assert!(mechanical_spectra(&grid, &p).is_err());
}

fn params_strategy() -> impl Strategy<Value = SystemParams> {
    (
        -200e3..50e3f64,
        10e3..150e3f64,
        0.05..1.0f64,
        any::<bool>(),
        0.0..40e3f64,
        0.0..40e3f64,
        0.0..5e3f64,
    )
        .prop_map(|(delta, kappa, eta, het, gx, gy, gamma)| {
            let mut p = SystemParams::reproduction();
            p.delta = TAU * delta;
            p.kappa = TAU * kappa;
            p.eta = eta;
            p.heterodyne_penalty = het;
            p.g_x = TAU * gx;
            p.g_y = TAU * gy;
            p.gamma_x = TAU * gamma;
            p.gamma_y = TAU * 0.7 * gamma;
            p
        })
}

fn stable(p: &SystemParams) -> bool {
    // red-detuned or weakly coupled draws only; heating-instability regions have no stationary spectrum
    p.delta < 0.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn shot_noise_limit_for_random_draws(p in params_strategy()) {
        let p = p.decoupled();
        let grid = FrequencyGrid::linspace_hz(1e3, 500e3, 512).unwrap();
        let s = apply_efficiency(&output_spectra(&grid, &p).unwrap(), &p);
        for b in s.bins() {
            prop_assert!((b.qq - 1.0).abs() < 1e-12 && (b.pp - 1.0).abs() < 1e-12 && b.qp.abs() < 1e-12);
        }
    }

    #[test]
    fn evenness_for_random_draws(p in params_strategy(), f0 in 1e3..50e3f64) {
        let grid = FrequencyGrid::linspace_hz(f0, f0 + 300e3, 97).unwrap();
        prop_assume!(grid.check_poles(&p).is_ok());
        let a = output_spectra(&grid, &p).unwrap();
        let b = output_spectra(&grid.negated(), &p).unwrap();
        let n = grid.len();
        for i in 0..n {
            let (u, v) = (a.bin(i), b.bin(n - 1 - i));
            let scale = u.qq.max(u.pp);
            prop_assert!((u.qq - v.qq).abs() <= 1e-12 * scale);
            prop_assert!((u.pp - v.pp).abs() <= 1e-12 * scale);
            prop_assert!((u.qp - v.qp).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn detection_floor_for_random_draws(p in params_strategy()) {
        let grid = FrequencyGrid::linspace_hz(1.1e3, 400.1e3, 256).unwrap();
        prop_assume!(grid.check_poles(&p).is_ok());
        let s = apply_efficiency(&output_spectra(&grid, &p).unwrap(), &p);
        let floor = 1.0 - p.eta_eff();
        for b in s.bins() {
            prop_assert!(b.qq >= floor - 1e-12 && b.pp >= floor - 1e-12);
        }
    }

    #[test]
    fn covariance_is_physical(p in params_strategy()) {
        // symmetrized spectra of a Gaussian field obey det V ≥ 1 in vacuum units
        prop_assume!(stable(&p));
        let grid = FrequencyGrid::linspace_hz(1.3e3, 300.3e3, 128).unwrap();
        prop_assume!(grid.check_poles(&p).is_ok());
        let s = output_spectra(&grid, &p).unwrap();
        for b in s.bins() {
            prop_assert!(b.qq * b.pp - b.qp * b.qp >= 1.0 - 1e-9 * b.qq * b.pp);
        }
    }

    #[test]
    fn heating_enters_linearly(p in params_strategy(), c in 0.1..5.0f64) {
        let grid = FrequencyGrid::linspace_hz(2.1e3, 300.1e3, 64).unwrap();
        prop_assume!(grid.check_poles(&p).is_ok());
        let mut cold = p;
        cold.gamma_x = 0.0;
        cold.gamma_y = 0.0;
        let mut hot = p;
        hot.gamma_x *= c;
        hot.gamma_y *= c;
        let s0 = output_spectra(&grid, &cold).unwrap();
        let s1 = output_spectra(&grid, &p).unwrap();
        let sc = output_spectra(&grid, &hot).unwrap();
        for i in 0..grid.len() {
            let (a, b, d) = (s0.bin(i), s1.bin(i), sc.bin(i));
            let scale = d.qq.max(d.pp);
            prop_assert!(((d.qq - a.qq) - c * (b.qq - a.qq)).abs() <= 1e-9 * scale);
            prop_assert!(((d.pp - a.pp) - c * (b.pp - a.pp)).abs() <= 1e-9 * scale);
            prop_assert!(((d.qp - a.qp) - c * (b.qp - a.qp)).abs() <= 1e-9 * scale);
        }
    }
}
