//! Rate bookkeeping: the termination threshold, block-size choice and the
//! guaranteed rate floor.

use serde::Serialize;

/// Default cap on bits per rateless block.
pub const K_CAP: u32 = 16;

/// `log2 q - L_T / n`; negative for incompressible noise at small `n`.
pub fn r_emp(l_t: f64, n: usize, q: u16) -> f64 {
    (q as f64).log2() - l_t / n as f64
}

/// Guaranteed rate of an error-free session that used `k_bits` per block:
/// `(K/n) ((n log2 q - L_T) / (K + log2 q + log2(n/eps) + dmax) - 1)`.
pub fn rate_floor(l_t: f64, n: usize, q: u16, k_bits: u32, eps: f64, dmax: f64) -> f64 {
    let nf = n as f64;
    let lq = (q as f64).log2();
    let k = k_bits as f64;
    (k / nf) * ((nf * lq - l_t) / (k + lq + (nf / eps).log2() + dmax) - 1.0)
}

/// Rate overhead `3 sqrt((log2 q / n)(log2(nq/eps) + dmax))` of the lemma-optimal block size.
pub fn delta_n(n: usize, q: u16, eps: f64, dmax: f64) -> f64 {
    let nf = n as f64;
    let lq = (q as f64).log2();
    3.0 * ((lq / nf) * ((nf * q as f64 / eps).log2() + dmax)).sqrt()
}

/// `ceil(sqrt(a/b))`, the minimizer (up to rounding) of `a/K + bK`.
pub fn lemma_k(a: f64, b: f64) -> u64 {
    (a / b).sqrt().ceil().max(1.0) as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct KChoice {
    pub k: u32,
    pub uncapped: u64,
    pub capped: bool,
}

/// Block size minimizing the rate overhead, limited to `cap`.
pub fn choose_k(n: usize, q: u16, eps: f64, dmax: f64, cap: u32) -> KChoice {
    let lq = (q as f64).log2();
    let a = lq * ((q as f64 * n as f64 / eps).log2() + dmax);
    let b = 1.0 / n as f64;
    let uncapped = lemma_k(a, b);
    KChoice {
        k: uncapped.min(cap as u64) as u32,
        uncapped,
        capped: uncapped > cap as u64,
    }
}

/// The per-symbol termination test for a block that started after `j`
/// symbols and has now seen `i - j` of its own.
#[derive(Debug, Clone, Copy)]
pub struct Threshold {
    log_q: f64,
    offset: f64,
    floored: bool,
}

impl Threshold {
    pub fn new(n: usize, q: u16, k_bits: u32, eps: f64, floored: bool) -> Self {
        Threshold {
            log_q: (q as f64).log2(),
            offset: (n as f64 / eps).log2() + k_bits as f64,
            floored,
        }
    }

    /// Largest admissible `L_T(hyp) - L_S(prefix)` after `u` block symbols.
    #[inline]
    pub fn at(&self, u: usize) -> f64 {
        let t = u as f64 * self.log_q - self.offset;
        if self.floored {
            t.floor()
        } else {
            t
        }
    }

    #[inline]
    pub fn passes(&self, excess: f64, u: usize) -> bool {
        excess <= self.at(u)
    }

    /// Smallest `u >= 1` at which `excess` could pass.
    pub fn first_pass(&self, excess: f64) -> usize {
        let guess = ((excess + self.offset) / self.log_q).ceil();
        let mut u = if guess.is_finite() && guess > 1.0 {
            guess as usize
        } else {
            1
        };
        while u > 1 && self.passes(excess, u - 1) {
            u -= 1;
        }
        while !self.passes(excess, u) {
            u += 1;
        }
        u
    }
}

/// [`Threshold`] tabulated for `u` in `0..=len`; `u = 0` never passes.
#[derive(Debug, Clone)]
pub struct ThresholdTable {
    values: Vec<f64>,
}

impl ThresholdTable {
    pub fn new(threshold: &Threshold, len: usize) -> Self {
        let mut values: Vec<f64> = (0..=len).map(|u| threshold.at(u)).collect();
        values[0] = f64::NEG_INFINITY;
        ThresholdTable { values }
    }

    #[inline]
    pub fn passes(&self, excess: f64, u: usize) -> bool {
        excess <= self.values[u]
    }

    /// Smallest `u` at which `excess` passes, or `len + 1` if none does.
    #[inline]
    pub fn first_pass(&self, excess: f64) -> usize {
        self.values.partition_point(|&t| t < excess)
    }
}

/// `L_T(hyp) - L_S(prefix) <= floor((i-j) log2 q - log2(n/eps) - K)`, floor
/// dropped when `floored` is false.
#[allow(clippy::too_many_arguments)]
pub fn termination_check(
    l_t_hyp: f64,
    l_s_prefix: f64,
    i: usize,
    j: usize,
    k_bits: u32,
    n: usize,
    eps: f64,
    q: u16,
    floored: bool,
) -> bool {
    debug_assert!(i > j);
    Threshold::new(n, q, k_bits, eps, floored).passes(l_t_hyp - l_s_prefix, i - j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn empirical_rate() {
        assert_eq!(r_emp(0.0, 4096, 2), 1.0);
        assert_eq!(r_emp(4096.0, 4096, 2), 0.0);
        assert_eq!(r_emp(1024.0, 4096, 2), 0.75);
    }

    #[test]
    fn floor_example() {
        let f = rate_floor(500.0, 1 << 15, 2, 14, 0.05, 46.0);
        let lq_ne = (32768.0f64 / 0.05).log2();
        let expect = (14.0 / 32768.0) * (32268.0 / (14.0 + 1.0 + lq_ne + 46.0) - 1.0);
        assert_abs_diff_eq!(f, expect, epsilon = 1e-15);
        assert_abs_diff_eq!(f, 0.1712, epsilon = 1e-3);
        assert!(rate_floor(32768.0, 1 << 15, 2, 14, 0.05, 46.0) < 0.0);
    }

    #[test]
    fn overhead_example_and_decay() {
        assert_abs_diff_eq!(
            delta_n(4096, 2, 0.05, 40.0),
            3.0 * (57.3219 / 4096.0f64).sqrt(),
            epsilon = 1e-4
        );
        assert_abs_diff_eq!(delta_n(4096, 2, 0.05, 40.0), 0.3549, epsilon = 1e-4);
        assert!(delta_n(1 << 20, 2, 0.05, 61.0) < delta_n(1 << 12, 2, 0.05, 37.0));
    }

    #[test]
    fn k_choice() {
        assert_eq!(lemma_k(3.0, 3.0), 1);
        assert_eq!(lemma_k(100.0, 1.0), 10);
        let c = choose_k(4096, 2, 0.05, 40.0, K_CAP);
        assert_eq!(
            c,
            KChoice {
                k: 16,
                uncapped: 485,
                capped: true
            }
        );
        let c = choose_k(4096, 2, 0.05, 40.0, 1000);
        assert!(!c.capped);
        assert_eq!(c.k, 485);
    }

    #[test]
    fn first_symbol_never_terminates() {
        assert!(!termination_check(0.0, 0.0, 1, 0, 12, 4096, 0.05, 2, true));
        let th = Threshold::new(4096, 2, 12, 0.05, true);
        // zero growth passes exactly at ceil(log2(n/eps) + K)
        let u0 = (((4096.0f64 / 0.05).log2() + 12.0) / 1.0).ceil() as usize;
        assert!(!th.passes(0.0, u0 - 1));
        assert!(th.passes(0.0, u0));
        assert_eq!(th.first_pass(0.0), u0);
    }

    #[test]
    fn table_agrees_with_formula() {
        for floored in [true, false] {
            let th = Threshold::new(3000, 3, 9, 0.05, floored);
            let table = ThresholdTable::new(&th, 3000);
            for e in 0..500 {
                let excess = e as f64 * 1.3 - 2.0;
                let u = th.first_pass(excess);
                assert_eq!(table.first_pass(excess), u.min(3001));
                for v in 1..=3000 {
                    assert_eq!(table.passes(excess, v), th.passes(excess, v));
                }
            }
        }
    }

    #[test]
    fn first_pass_is_minimal() {
        for floored in [true, false] {
            for q in [2u16, 3, 4, 7] {
                let th = Threshold::new(5000, q, 10, 0.03, floored);
                for e in 0..300 {
                    let excess = e as f64 * 0.37;
                    let u = th.first_pass(excess);
                    assert!(th.passes(excess, u));
                    assert!(u == 1 || !th.passes(excess, u - 1));
                }
            }
        }
    }
}
