//! Outcome profile of an ideal QPE readout for a single eigenvalue.

use std::f64::consts::PI;

use crate::circuits::QpeSettings;

/// Below this `|sin(π d / N)|` the closed form is replaced by the direct sum.
const SINGULAR: f64 = 1e-7;

/// `|1/N Σ_k exp(2πi k d / N)|^2` for a real offset `d`.
pub fn fejer(d: f64, n: usize) -> f64 {
    let nf = n as f64;
    let den = (PI * d / nf).sin();
    if den.abs() > SINGULAR {
        let num = (PI * d).sin();
        (num * num) / (nf * nf * den * den)
    } else {
        let (mut re, mut im) = (0.0, 0.0);
        for k in 0..n {
            let (s, c) = (2.0 * PI * k as f64 * d / nf).sin_cos();
            re += c;
            im += s;
        }
        (re * re + im * im) / (nf * nf)
    }
}

/// Probability of reading `j` when the system sits in an eigenstate with energy `eps`.
pub fn qpe_kernel(eps: f64, s: &QpeSettings) -> Vec<f64> {
    let mut out = vec![0.0; s.n_val()];
    kernel_into(eps, s.e_orig(), s.t0, &mut out);
    out
}

pub(crate) fn kernel_into(eps: f64, e_orig: f64, t0: f64, out: &mut [f64]) {
    let n = out.len();
    let x = ((eps - e_orig) * t0).rem_euclid(n as f64);
    for (j, p) in out.iter_mut().enumerate() {
        *p = fejer(x - j as f64, n);
    }
}
