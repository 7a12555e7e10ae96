//! Rough information capacities, in bits or decimal digits.

/// Bits addressable by `n_t` tables of `n_c` binary comparisons.
pub fn capacity(n_t: u64, n_c: u64) -> u128 {
    n_t as u128 * n_c as u128
}

/// `log10(n!)`: decimal digits needed to name an ordering of `n` latencies.
pub fn factorial_capacity(n: u64) -> f64 {
    libm::lgamma(n as f64 + 1.0) / std::f64::consts::LN_10
}

/// `n * log10(m)`: decimal digits of `n` values quantised to `m` levels.
pub fn binned_capacity(n: u64, m: u64) -> f64 {
    n as f64 * (m as f64).log10()
}
