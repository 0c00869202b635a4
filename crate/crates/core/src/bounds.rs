//! Closed-form evaluators for the rate and redundancy bounds. All logs are base 2.

use std::f64::consts::{E, LOG2_E, PI};

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::channel::SymbolSeq;
use crate::error::{Error, Result};
use crate::srccode::lz78_compress;

/// Lower end of the bracket used to invert `g`.
pub const G_INV_LO: f64 = 1e-15;
const G_INV_TOL: f64 = 1e-12;

pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param(format!("probability {p} outside [0, 1]")));
    }
    let term = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    Ok(term(p) + term(1.0 - p))
}

fn h(p: f64) -> f64 {
    binary_entropy(p).expect("probability checked by caller")
}

/// Error-penalized rate `max(0, (1-eps) R - h(eps)/k)`.
///
/// The expression lower-bounds the normalized mutual information between
/// sent and decoded messages, which cannot be negative; a binary code with
/// `eps = 1/2` therefore scores exactly 0 rather than `-1/2`.
pub fn effective_rate(r: f64, eps: f64, block_len: usize) -> f64 {
    ((1.0 - eps) * r - h(eps.clamp(0.0, 1.0)) / block_len as f64).max(0.0)
}

/// `(1 - rho78(z)) log2 q`, a finite-`n` proxy for the finite-state
/// compressibility bound on iterated-block rates. Can be negative at small
/// `n` where LZ78 expands.
pub fn cifb_upper(z: &SymbolSeq) -> Result<f64> {
    let (_, rho) = lz78_compress(z)?;
    Ok((1.0 - rho) * z.alphabet().log2())
}

/// Largest rate an iterated `k`-block code with average error `eps` can
/// have when the collapsed noise has entropy `h_collapsed` bits:
/// `(log2 q - H/k + h(eps)/k) / (1 - eps)`.
pub fn fano_rate_bound(k: usize, q: u16, eps: f64, h_collapsed: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::param(format!("epsilon {eps} outside [0, 1)")));
    }
    let kf = k as f64;
    Ok(((q as f64).log2() - h_collapsed / kf + h(eps) / kf) / (1.0 - eps))
}

/// `(n, k, q)` with `tau = q^k / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RedundancyParams {
    pub n: f64,
    pub k: usize,
    pub q: u16,
}

impl RedundancyParams {
    pub fn new(n: f64, k: usize, q: u16) -> Result<Self> {
        if n.is_nan() || n < 1.0 || k == 0 || q < 2 {
            return Err(Error::param(format!(
                "need n >= 1, k >= 1, q >= 2; got n={n}, k={k}, q={q}"
            )));
        }
        Ok(RedundancyParams { n, k, q })
    }

    pub fn log_q(&self) -> f64 {
        (self.q as f64).log2()
    }

    pub fn tau(&self) -> f64 {
        (self.k as f64 * self.log_q() - self.n.log2()).exp2()
    }
}

/// Lower bound on the minimax redundancy.
pub fn delta_minus(n: f64, k: usize, q: u16) -> Result<f64> {
    let p = RedundancyParams::new(n, k, q)?;
    let (tau, lq, kf) = (p.tau(), p.log_q(), k as f64);
    Ok(if tau > q as f64 / kf {
        // guard against log2 landing a hair below an integer
        ((kf * tau).log2() / lq + 1e-12).floor() * lq / (2.0 * kf)
    } else {
        lq / (2.0 * q as f64) * tau
    })
}

/// The KT mixture's penalty `(tau/2) log2(1/tau) + (k tau^2/4 + tau + k/n) log2 e`;
/// defined only for `tau <= 1`.
pub fn delta_pi(n: f64, k: usize, q: u16) -> Result<f64> {
    let p = RedundancyParams::new(n, k, q)?;
    let (tau, kf) = (p.tau(), k as f64);
    if tau > 1.0 {
        return Err(Error::param(format!("tau = q^k/n = {tau} exceeds 1")));
    }
    Ok(tau / 2.0 * (1.0 / tau).log2() + (kf * tau * tau / 4.0 + tau + kf / n) * LOG2_E)
}

/// `4 sqrt(log2 q log2(n^2 q) / n)`.
pub fn delta_star(n: f64, q: u16) -> f64 {
    let lq = (q as f64).log2();
    4.0 * (lq * (2.0 * n.log2() + lq) / n).sqrt()
}

/// Upper bound on the minimax redundancy; defined only for `tau <= 1`.
pub fn delta_plus(n: f64, k: usize, q: u16) -> Result<f64> {
    let p = RedundancyParams::new(n, k, q)?;
    let tau = p.tau();
    if tau > 1.0 {
        return Err(Error::param(format!("tau = q^k/n = {tau} exceeds 1")));
    }
    let kf = k as f64;
    Ok(tau / 2.0 * (1.0 / tau).log2()
        + (kf * tau * tau / 4.0 + tau) * LOG2_E
        + delta_star(n, q)
        + kf / n * (E * q as f64).log2())
}

/// `g(tau) = tau log2(1/tau)`, increasing on `(0, 1/e]`.
pub fn g(tau: f64) -> f64 {
    if tau <= 0.0 {
        0.0
    } else {
        -tau * tau.log2()
    }
}

/// Inverse of `g` on its increasing branch, by bisection. `None` when `y`
/// is outside `(g(1e-15), g(1/e)]`.
pub fn g_inv(y: f64) -> Option<f64> {
    let hi0 = 1.0 / E;
    if !(y > g(G_INV_LO) && y <= g(hi0)) {
        return None;
    }
    let (mut lo, mut hi) = (G_INV_LO, hi0);
    while hi - lo > G_INV_TOL {
        let mid = 0.5 * (lo + hi);
        if g(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NStar {
    pub lower: f64,
    /// `f64::INFINITY` when `upper_unbounded`.
    pub upper: f64,
    /// The `g^-1` argument was not positive, so no finite `n` is guaranteed.
    pub upper_unbounded: bool,
    /// The `g^-1` argument exceeded `g(1/e)` and `T` was clamped to `1/e`.
    pub saturated: bool,
}

/// Bounds on the smallest horizon for which the redundancy is below `delta`.
pub fn n_star_bounds(k: usize, delta: f64, q: u16) -> Result<NStar> {
    if k == 0 || delta.is_nan() || delta <= 0.0 || q < 2 {
        return Err(Error::param(format!(
            "need k >= 1, delta > 0, q >= 2; got k={k}, delta={delta}, q={q}"
        )));
    }
    let (kf, lq) = (k as f64, (q as f64).log2());
    let lower = (kf * lq * (1.0 - 2.0 * delta)).exp2() * kf / q as f64;
    let arg = (delta - 12.0 * (-kf * lq / 2.0).exp2()) * lq / 3.0;
    let qk = (kf * lq).exp2();
    if arg <= 0.0 {
        return Ok(NStar {
            lower,
            upper: f64::INFINITY,
            upper_unbounded: true,
            saturated: false,
        });
    }
    let (t, saturated) = match g_inv(arg) {
        Some(t) => (t, false),
        None if arg > g(1.0 / E) => (1.0 / E, true),
        None => (G_INV_LO, false),
    };
    Ok(NStar {
        lower,
        upper: qk / t.min(1.0 / kf),
        upper_unbounded: false,
        saturated,
    })
}

/// `C_m = log2(Gamma(1/2)^m / Gamma(m/2))` and the Shtarkov redundancy
/// `r_lk = ((m-1)/2) log2(l/(2 pi)) + C_m + (m^2/(4l) + m/2) log2 e`.
pub fn shtarkov_terms(l: u64, m: u64) -> Result<(f64, f64)> {
    if l == 0 || m < 2 {
        return Err(Error::param(format!(
            "need l >= 1 and m >= 2; got l={l}, m={m}"
        )));
    }
    let (lf, mf) = (l as f64, m as f64);
    let c_m = (mf * ln_gamma(0.5) - ln_gamma(mf / 2.0)) * LOG2_E;
    let r = (mf - 1.0) / 2.0 * (lf / (2.0 * PI)).log2()
        + c_m
        + (mf * mf / (4.0 * lf) + mf / 2.0) * LOG2_E;
    Ok((c_m, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Alphabet;
    use approx::assert_abs_diff_eq;

    #[test]
    fn entropy_values() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_abs_diff_eq!(
            binary_entropy(0.25).unwrap(),
            0.811_278_124_459_132_8,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            1.0 - binary_entropy(0.11).unwrap(),
            0.500_08,
            epsilon = 1e-5
        );
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.1).is_err());
    }

    #[test]
    fn effective_rate_values() {
        assert_eq!(effective_rate(1.0, 0.5, 1), 0.0);
        assert_eq!(effective_rate(0.7, 0.0, 3), 0.7);
        let expect = 0.45 - binary_entropy(0.1).unwrap() / 10.0;
        assert_abs_diff_eq!(effective_rate(0.5, 0.1, 10), expect, epsilon = 1e-15);
        assert_abs_diff_eq!(effective_rate(0.5, 0.1, 10), 0.4031, epsilon = 1e-4);
    }

    #[test]
    fn fano_values() {
        assert_eq!(fano_rate_bound(4, 2, 0.0, 4.0).unwrap(), 0.0);
        assert_eq!(fano_rate_bound(4, 2, 0.0, 0.0).unwrap(), 1.0);
        assert!(fano_rate_bound(4, 2, 1.0, 0.0).is_err());
    }

    #[test]
    fn cifb_proxy() {
        let a = Alphabet::binary();
        let zeros = SymbolSeq::zeros(a, 1 << 16);
        assert!(cifb_upper(&zeros).unwrap() > 0.95);
        let alt = SymbolSeq::new(a, (0..1 << 16).map(|i| (i % 2) as u8).collect()).unwrap();
        assert!(cifb_upper(&alt).unwrap() > 0.9);
        assert!(cifb_upper(&SymbolSeq::empty(a)).is_err());
    }

    #[test]
    fn delta_minus_examples() {
        assert_abs_diff_eq!(
            delta_minus(2f64.powi(25), 20, 2).unwrap(),
            1.0 / 128.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            delta_minus(2f64.powi(15), 20, 2).unwrap(),
            9.0 / 40.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn delta_plus_example() {
        let n = 2f64.powi(20);
        let tau = 2f64.powi(-10);
        let expect = tau / 2.0 * 10.0
            + (10.0 * tau * tau / 4.0 + tau) * LOG2_E
            + 4.0 * (41.0 / n).sqrt()
            + 10.0 / n * (E * 2.0).log2();
        assert_abs_diff_eq!(delta_plus(n, 10, 2).unwrap(), expect, epsilon = 1e-15);
        assert_abs_diff_eq!(delta_plus(n, 10, 2).unwrap(), 0.031331, epsilon = 1e-6);
        assert!(delta_plus(1000.0, 10, 2).is_err());
        assert!(delta_plus(2f64.powi(40), 10, 2).unwrap() < 1e-4);
    }

    #[test]
    fn n_star_examples() {
        let s = n_star_bounds(20, 0.01, 2).unwrap();
        assert_abs_diff_eq!(s.lower, 10.0 * 2f64.powf(19.6), epsilon = 1e-3);
        assert!((s.lower / 7.94e6 - 1.0).abs() < 0.01);
        // delta large enough: T clamps at 1/e > 1/k, so n_upper = k q^k
        let s = n_star_bounds(20, 2.0, 2).unwrap();
        assert!(s.saturated);
        assert_abs_diff_eq!(s.upper, 20.0 * 2f64.powi(20), epsilon = 1e-6);
        let s = n_star_bounds(4, 0.01, 2).unwrap();
        assert!(s.upper_unbounded && s.upper.is_infinite());
    }

    #[test]
    fn g_inverse_round_trip() {
        for i in 1..=1000 {
            let y = g(1.0 / E) * i as f64 / 1000.0;
            let t = g_inv(y).unwrap();
            assert!((g(t) - y).abs() < 1e-9, "y={y}");
            assert!(t <= 1.0 / E);
        }
        assert!(g_inv(0.0).is_none());
        assert!(g_inv(0.6).is_none());
    }

    #[test]
    fn shtarkov_values() {
        let (c2, r) = shtarkov_terms(1, 2).unwrap();
        assert_abs_diff_eq!(c2, PI.log2(), epsilon = 1e-12);
        let expect = 0.5 * (1.0 / (2.0 * PI)).log2() + PI.log2() + 2.0 * LOG2_E;
        assert_abs_diff_eq!(r, expect, epsilon = 1e-12);
        assert!(shtarkov_terms(0, 2).is_err());
        assert!(shtarkov_terms(1, 1).is_err());
        // large m stays finite through log-gamma
        assert!(shtarkov_terms(10, 1 << 20).unwrap().1.is_finite());
    }
}
