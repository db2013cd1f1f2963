//! Hand-typed oracles shared by the integration tests. The expressions here
//! are written out independently of the builtin system definitions.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tmpinn::systems::OdeSystem;

pub const G: f64 = 9.81;

/// Right-hand side of each builtin; `p` is the full parameter vector
/// (sampled parameters followed by derived ones).
pub fn hand_rhs(name: &str, x: &[f64], p: &[f64]) -> Vec<f64> {
    match name {
        "duffing" => {
            let (x, y, d) = (x[0], x[1], p[0]);
            vec![y, x - x * x * x - d * y]
        }
        "pendulum" => {
            let (th, w, b, l) = (x[0], x[1], p[0], p[1]);
            vec![w, -b * w - G / l * th.sin()]
        }
        "lotka_volterra" => {
            let (x, y) = (x[0], x[1]);
            let (a, b, c, d) = (p[0], p[1], p[2], p[3]);
            vec![a * x - b * x * y, -c * y + d * x * y]
        }
        "rikitake" => {
            let (x, y, z, mu, h) = (x[0], x[1], x[2], p[0], p[1]);
            vec![-mu * x + y * z, -mu * y + x * (z - h), 1.0 - x * y]
        }
        "lorenz" => {
            let (x, y, z, s, r, b) = (x[0], x[1], x[2], p[0], p[1], p[2]);
            vec![s * (y - x), x * (r - z) - y, x * y - b * z]
        }
        "sir" => {
            let (s, i, b, g, n) = (x[0], x[1], p[0], p[1], p[2]);
            vec![-i * s * b / n, i * s * b / n - i * g, i * g]
        }
        "seir" => {
            let (s, e, i, r) = (x[0], x[1], x[2], x[3]);
            let (mu, beta, sigma, gamma, alpha, omega, n) = (p[0], p[1], p[2], p[3], p[4], p[5], p[6]);
            vec![
                mu * (n - s) - beta * s * i / n + omega * r,
                beta * s * i / n - (sigma + mu) * e,
                sigma * e - (mu + gamma + alpha) * i,
                gamma * i - (mu + omega) * r,
            ]
        }
        "cdo" => {
            let (delta, mu) = (p[0], p[1]);
            let xs = [x[0], x[2], x[4], x[6]];
            let ys = [x[1], x[3], x[5], x[7]];
            let coupling = [
                xs[1] - 2.0 * xs[0] + xs[3],
                xs[2] - 2.0 * xs[1] + xs[0],
                xs[3] - 2.0 * xs[2] + xs[1],
                xs[0] - 2.0 * xs[3] + xs[2],
            ];
            (0..4)
                .flat_map(|k| [ys[k], mu * (1.0 - xs[k] * xs[k]) * ys[k] - xs[k] + delta * coupling[k]])
                .collect()
        }
        "mmek" => {
            let (km, delta) = (0.5, 0.1);
            let mut out = vec![p[0] / (km + 1.0) - delta * x[0]];
            for i in 1..6 {
                out.push(p[i] * x[i - 1] / (km + x[i - 1]) - delta * x[i]);
            }
            out
        }
        other => panic!("no hand oracle for {other}"),
    }
}

/// Hand-derived second time derivatives in expanded, factored form.
pub fn hand_f2(name: &str, x: &[f64], p: &[f64]) -> Vec<f64> {
    match name {
        "duffing" => {
            let (x, y, d) = (x[0], x[1], p[0]);
            vec![x - x.powi(3) - d * y, (1.0 - 3.0 * x * x) * y - d * (x - x.powi(3) - d * y)]
        }
        "pendulum" => {
            let (th, w, b, l) = (x[0], x[1], p[0], p[1]);
            vec![
                -G * th.sin() / l - b * w,
                -G * w * th.cos() / l - b * (-G * th.sin() / l - b * w),
            ]
        }
        "lotka_volterra" => {
            let (x, y) = (x[0], x[1]);
            let (a, b, c, d) = (p[0], p[1], p[2], p[3]);
            vec![
                -x * (x * y * d - y * c) * b + (x * a - x * y * b) * (a - y * b),
                (x * a - x * y * b) * y * d + (x * y * d - y * c) * (x * d - c),
            ]
        }
        "lorenz" => {
            let (xv, yv, zv, s, r, b) = (x[0], x[1], x[2], p[0], p[1], p[2]);
            let d = hand_rhs("lorenz", x, p);
            let (xd, yd, zd) = (d[0], d[1], d[2]);
            vec![s * (yd - xd), xd * (r - zv) + xv * (-zd) - yd, xd * yv + xv * yd - b * zd]
        }
        "sir" => {
            let (s, i, b, g, n) = (x[0], x[1], p[0], p[1], p[2]);
            let k = i * s * b / n - i * g;
            let l = b * b * i * i * s / (n * n);
            vec![-k * s * b / n + l, -l + k * (-n * g + s * b) / n, k * g]
        }
        other => panic!("no hand-derived second derivative for {other}"),
    }
}

/// SIR second derivative with the sign of the leading term of its first
/// component flipped; a transcription slip the oracle must catch.
pub fn sir_f2_sign_slip(x: &[f64], p: &[f64]) -> Vec<f64> {
    let (s, i, b, g, n) = (x[0], x[1], p[0], p[1], p[2]);
    let k = i * s * b / n - i * g;
    let l = b * b * i * i * s / (n * n);
    vec![k * s * b / n + l, -l + k * (-n * g + s * b) / n, k * g]
}

/// Third time derivative of the Duffing `y` component, factored by hand.
pub fn duffing_f3_y(x: &[f64], p: &[f64]) -> f64 {
    let (x, y, d) = (x[0], x[1], p[0]);
    y * (-d * (1.0 - 3.0 * x * x) - 6.0 * x * y) + (d * d - 3.0 * x * x + 1.0) * (-d * y - x.powi(3) + x)
}

/// Uniform point of the system's sampling box with its full parameters.
pub fn random_point(system: &OdeSystem, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut u = |[lo, hi]: [f64; 2]| lo + (hi - lo) * rng.random::<f64>();
    let x: Vec<f64> = system.state_bounds().iter().map(|b| u(*b)).collect();
    let theta: Vec<f64> = system.param_bounds().iter().map(|b| u(*b)).collect();
    let params = system.full_params(&x, &theta).unwrap();
    (x, theta, params)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `|a − b| ≤ max(rel · max(|a|, |b|), floor)`.
pub fn close(a: f64, b: f64, rel: f64, floor: f64) -> bool {
    (a - b).abs() <= (rel * a.abs().max(b.abs())).max(floor)
}
