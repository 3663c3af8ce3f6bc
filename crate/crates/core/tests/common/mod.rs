//! Shared test oracles. Nothing here calls into the closed-form model.
#![allow(dead_code)]

use nalgebra::{Complex, SMatrix};
use osq::SystemParams;

pub type C = Complex<f64>;
type M4 = SMatrix<C, 4, 4>;

const I: C = Complex { re: 0.0, im: 1.0 };

/// Responses of the output quadratures, intracavity quadratures and positions
/// to the unit real inputs `(ξ_x, ξ_y, q_in, p_in)`, with
/// `a_in = (q_in + i p_in)/2` and `a_in† = (q_in − i p_in)/2`.
pub struct LangevinSolution {
    pub q: [C; 4],
    pub p: [C; 4],
    pub x: [C; 4],
    pub y: [C; 4],
    /// Response of `Q` to a unit `a_in` alone (ℬ_Q(ω)) and to a unit `a_in†` alone (ℬ_Q*(−ω)).
    pub q_from_a: C,
    pub q_from_adag: C,
    pub p_from_a: C,
    pub p_from_adag: C,
}

fn chi_mech(w: f64, om: f64) -> f64 {
    om / (om * om - w * w)
}

fn chi_cav(w: f64, delta: f64, kappa: f64) -> C {
    C::new(1.0, 0.0) / (-I * (delta + w) + kappa / 2.0)
}

/// Solves the frequency-domain Langevin system for `(Q_c, P_c, x, y)` by LU
/// decomposition, one right-hand side per input, then applies input-output
/// relations.
pub fn langevin_solve(w: f64, p: &SystemParams) -> LangevinSolution {
    let cx = chi_mech(w, p.omega_x);
    let cy = chi_mech(w, p.omega_y);
    let a = chi_cav(w, p.delta, p.kappa);
    let b = chi_cav(-w, p.delta, p.kappa).conj();
    let sk = p.kappa.sqrt();
    let r = |v: f64| C::new(v, 0.0);
    let zero = r(0.0);
    let one = r(1.0);
    let m = M4::new(
        one, zero, -I * (a - b) * p.g_x, -I * (a - b) * p.g_y,
        zero, one, -(a + b) * p.g_x, -(a + b) * p.g_y,
        r(-2.0 * cx * p.g_x), zero, one, zero,
        r(-2.0 * cy * p.g_y), zero, zero, one,
    );
    // optical drive for given (a_in, a_in†) amplitudes
    let optical = |amp: C, amp_dag: C| [sk * (a * amp + b * amp_dag), I * sk * (-a * amp + b * amp_dag)];
    let half = r(0.5);
    let sources: [(C, C); 6] = [
        (zero, zero),
        (zero, zero),
        (half, half),
        (I * 0.5, -I * 0.5),
        (one, zero),
        (zero, one),
    ];
    let mut rhs = SMatrix::<C, 4, 6>::zeros();
    for (k, &(amp, amp_dag)) in sources.iter().enumerate() {
        let o = optical(amp, amp_dag);
        rhs[(0, k)] = o[0];
        rhs[(1, k)] = o[1];
    }
    rhs[(2, 0)] = r(2.0 * cx * p.gamma_x.sqrt());
    rhs[(3, 1)] = r(2.0 * cy * p.gamma_y.sqrt());
    let sol = m.lu().solve(&rhs).expect("nonsingular Langevin system");
    let out = |k: usize| {
        let (amp, amp_dag) = sources[k];
        let q = sk * sol[(0, k)] - (amp + amp_dag);
        let pq = sk * sol[(1, k)] - I * (-amp + amp_dag);
        (q, pq)
    };
    let mut q = [zero; 4];
    let mut pq = [zero; 4];
    let mut x = [zero; 4];
    let mut y = [zero; 4];
    for k in 0..4 {
        (q[k], pq[k]) = out(k);
        x[k] = sol[(2, k)];
        y[k] = sol[(3, k)];
    }
    let (q_from_a, p_from_a) = out(4);
    let (q_from_adag, p_from_adag) = out(5);
    LangevinSolution {
        q,
        p: pq,
        x,
        y,
        q_from_a,
        q_from_adag,
        p_from_a,
        p_from_adag,
    }
}

impl LangevinSolution {
    /// Symmetrized `(S_QQ, S_PP, S_QP)` from the per-input responses.
    pub fn spectra(&self) -> (f64, f64, f64) {
        let qq = self.q.iter().map(|z| z.norm_sqr()).sum();
        let pp = self.p.iter().map(|z| z.norm_sqr()).sum();
        let qp = self.q.iter().zip(&self.p).map(|(u, v)| (u.conj() * v).re).sum();
        (qq, pp, qp)
    }

    pub fn s_xx(&self) -> f64 {
        self.x.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn s_yy(&self) -> f64 {
        self.y.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Relative difference scaled by the larger of the two magnitudes and `floor`.
pub fn rel(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Fraction of bins where `|data − model| ≤ 3 stderr`.
pub fn within_3sigma(data: &[f64], model: &[f64], stderr: &[f64]) -> f64 {
    assert_eq!(data.len(), model.len());
    let ok = data
        .iter()
        .zip(model)
        .zip(stderr)
        .filter(|((d, m), s)| (*d - *m).abs() <= 3.0 * **s)
        .count();
    ok as f64 / data.len() as f64
}

/// Per-bin average of `segments` independent cross-periodograms of a
/// Gaussian pair with covariance `(qq, pp, qp)`, with standard errors from
/// their scatter. Stands in for a Welch estimate without synthesizing a record.
pub fn periodogram_surrogate(
    cov: &[(f64, f64, f64)],
    segments: usize,
    seed: u64,
) -> ([Vec<f64>; 3], [Vec<f64>; 3]) {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = cov.len();
    let mut mean = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut se = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for (i, &(qq, pp, qp)) in cov.iter().enumerate() {
        let l11 = qq.sqrt();
        let l21 = qp / l11;
        let l22 = (pp - l21 * l21).sqrt();
        let mut s = [0.0; 3];
        let mut s2 = [0.0; 3];
        for _ in 0..segments {
            let mut g = || -> f64 { StandardNormal.sample(&mut rng) };
            let (a, b, x, y) = (g(), g(), g(), g());
            let (qr, qi) = (l11 * a, l11 * b);
            let (pr, pi) = (l21 * a + l22 * x, l21 * b + l22 * y);
            let v = [
                0.5 * (qr * qr + qi * qi),
                0.5 * (pr * pr + pi * pi),
                0.5 * (qr * pr + qi * pi),
            ];
            for k in 0..3 {
                s[k] += v[k];
                s2[k] += v[k] * v[k];
            }
        }
        let m = segments as f64;
        for k in 0..3 {
            mean[k][i] = s[k] / m;
            se[k][i] = ((s2[k] / m - mean[k][i].powi(2)) / (m - 1.0)).sqrt();
        }
    }
    (mean, se)
}
