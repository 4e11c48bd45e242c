//! Bernoulli base dynamics: the two-sided full shift on `S` symbols with an
//! i.i.d. symbol law, realised through finite orbit windows.
//!
//! Symbols are drawn from ChaCha8 (`rand_chacha`) used as a counter-based
//! generator: the symbol at index `j` is a pure function of `(seed, j)`. It is
//! obtained by seeding ChaCha8 with `seed`, selecting stream [`ORBIT_STREAM`],
//! positioning the keystream at word `2 * (j + 2^62)` and reading one `u64`.
//! The top 53 bits give a uniform in `[0, 1)` which is mapped through the
//! cumulative symbol law. Windows of different lengths therefore agree on
//! their overlap, and the sequence is identical on every platform.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// ChaCha stream reserved for base symbols. Monte-Carlo consumers use other streams.
pub const ORBIT_STREAM: u64 = 0;

const INDEX_OFFSET: i128 = 1 << 62;

/// The ergodic base `(θ, ℙ)`: full shift with Bernoulli law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseSystem {
    probabilities: Vec<f64>,
}

impl BaseSystem {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(invalid("symbol_probabilities", "alphabet must be non-empty"));
        }
        if probabilities.iter().any(|p| !p.is_finite() || !(0.0..=1.0).contains(p)) {
            return Err(invalid("symbol_probabilities", "every entry must lie in [0, 1]"));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(
                "symbol_probabilities",
                format!("probabilities sum to {total}, expected 1"),
            ));
        }
        Ok(Self { probabilities })
    }

    /// Single-symbol base, i.e. a deterministic fiber map.
    pub fn deterministic() -> Self {
        Self {
            probabilities: vec![1.0],
        }
    }

    pub fn uniform(alphabet_size: usize) -> Result<Self> {
        if alphabet_size == 0 {
            return Err(invalid("alphabet_size", "must be positive"));
        }
        Self::new(vec![1.0 / alphabet_size as f64; alphabet_size])
    }

    pub fn alphabet_size(&self) -> usize {
        self.probabilities.len()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    fn symbol_for_uniform(&self, u: f64) -> usize {
        let mut acc = 0.0;
        let last = self.probabilities.len() - 1;
        for (s, p) in self.probabilities.iter().enumerate() {
            acc += p;
            if u < acc && *p > 0.0 {
                return s;
            }
        }
        // u landed in the rounding gap above the last partial sum
        (0..=last).rev().find(|&s| self.probabilities[s] > 0.0).unwrap_or(last)
    }
}

/// Uniform in `[0,1)` from the top 53 bits of a `u64`.
pub(crate) fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// ChaCha8 generator for `(seed, stream)`; used for per-block Monte-Carlo seeds.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A finite two-sided window of base symbols, indices `-past..=future`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaseOrbit {
    symbols: Vec<usize>,
    past: usize,
    seed: u64,
}

impl BaseOrbit {
    /// Builds an orbit from explicit symbols; `symbols[past]` is the origin.
    pub fn from_symbols(symbols: Vec<usize>, past: usize) -> Result<Self> {
        if symbols.is_empty() || past >= symbols.len() {
            return Err(invalid("symbols", "origin must lie inside a non-empty window"));
        }
        Ok(Self { symbols, past, seed: 0 })
    }

    /// Constant orbit of one symbol, for deterministic fibers.
    pub fn constant(symbol: usize, past: usize, future: usize) -> Self {
        Self {
            symbols: vec![symbol; past + future + 1],
            past,
            seed: 0,
        }
    }

    pub fn past(&self) -> usize {
        self.past
    }

    pub fn future(&self) -> usize {
        self.symbols.len() - self.past - 1
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn lo(&self) -> i64 {
        -(self.past as i64)
    }

    pub fn hi(&self) -> i64 {
        self.future() as i64
    }

    pub fn contains(&self, j: i64) -> bool {
        (self.lo()..=self.hi()).contains(&j)
    }

    /// Symbol labelling the fiber at `θ^j(w)`.
    pub fn symbol_at(&self, j: i64) -> Result<usize> {
        if !self.contains(j) {
            return Err(Error::OutOfWindow {
                index: j,
                lo: self.lo(),
                hi: self.hi(),
            });
        }
        Ok(self.symbols[(j + self.past as i64) as usize])
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    /// Plain-text rendering (one character per symbol, base 36).
    pub fn to_symbol_string(&self) -> String {
        self.symbols
            .iter()
            .map(|&s| std::char::from_digit((s % 36) as u32, 36).unwrap_or('?'))
            .collect()
    }

    /// `(1/n) Σ_{j<n} values[symbol_at(j)]`.
    pub fn birkhoff_average(&self, values: &[f64], n: usize) -> Result<f64> {
        if n == 0 {
            return Err(invalid("n", "must be positive"));
        }
        if n - 1 > self.future() {
            return Err(Error::OutOfWindow {
                index: n as i64 - 1,
                lo: self.lo(),
                hi: self.hi(),
            });
        }
        let mut sum = 0.0;
        for j in 0..n {
            let s = self.symbol_at(j as i64)?;
            sum += *values
                .get(s)
                .ok_or_else(|| invalid("values", format!("no entry for symbol {s}")))?;
        }
        Ok(sum / n as f64)
    }
}

/// Draws the window `-past..=future` with i.i.d. symbols; deterministic in `seed`.
pub fn sample_orbit(base: &BaseSystem, seed: u64, past: usize, future: usize) -> Result<BaseOrbit> {
    if past + future < 1 {
        return Err(invalid("past + future", "window must contain at least two indices"));
    }
    let mut rng = stream_rng(seed, ORBIT_STREAM);
    let symbols = (-(past as i64)..=future as i64)
        .map(|j| {
            rng.set_word_pos(2 * (j as i128 + INDEX_OFFSET) as u128);
            base.symbol_for_uniform(unit_f64(rng.next_u64()))
        })
        .collect();
    Ok(BaseOrbit { symbols, past, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_letter_alphabet() {
        let base = BaseSystem::uniform(1).unwrap();
        let orbit = sample_orbit(&base, 17, 2, 2).unwrap();
        assert_eq!(orbit.symbols(), &[0; 5]);
    }

    #[test]
    fn degenerate_law() {
        let base = BaseSystem::new(vec![1.0, 0.0]).unwrap();
        let orbit = sample_orbit(&base, 3, 0, 10).unwrap();
        assert!(orbit.symbols().iter().all(|&s| s == 0));
    }

    #[test]
    fn empirical_frequency_within_three_sigma() {
        let base = BaseSystem::uniform(2).unwrap();
        let n = 100_000;
        let orbit = sample_orbit(&base, 2024, 0, n).unwrap();
        let ones = (0..n as i64).filter(|&j| orbit.symbol_at(j).unwrap() == 1).count() as f64;
        // binomial(n, 1/2): sd of the frequency is 0.5/sqrt(n)
        let sd = 0.5 / (n as f64).sqrt();
        assert!((ones / n as f64 - 0.5).abs() <= 3.0 * sd);
    }

    #[test]
    fn zero_length_window_rejected() {
        let base = BaseSystem::uniform(2).unwrap();
        assert!(sample_orbit(&base, 1, 0, 0).is_err());
    }

    #[test]
    fn symbol_at_bounds() {
        let orbit = BaseOrbit::from_symbols(vec![1, 0, 1, 1], 1).unwrap();
        assert_eq!(orbit.symbol_at(0).unwrap(), 0);
        assert_eq!(orbit.symbol_at(1).unwrap(), 1);
        assert_eq!(orbit.symbol_at(-1).unwrap(), 1);
        assert!(matches!(orbit.symbol_at(-2), Err(Error::OutOfWindow { .. })));
        assert!(orbit.symbol_at(3).is_err());
    }

    #[test]
    fn window_overlap_is_consistent() {
        let base = BaseSystem::new(vec![0.3, 0.7]).unwrap();
        let short = sample_orbit(&base, 9, 3, 20).unwrap();
        let long = sample_orbit(&base, 9, 10, 50).unwrap();
        for j in -3..=20 {
            assert_eq!(short.symbol_at(j).unwrap(), long.symbol_at(j).unwrap());
        }
    }

    #[test]
    fn birkhoff_average_cases() {
        let base = BaseSystem::uniform(2).unwrap();
        let orbit = sample_orbit(&base, 5, 0, 10_000).unwrap();
        assert_eq!(orbit.birkhoff_average(&[1.5, 1.5], 37).unwrap(), 1.5);
        let table = [2f64.ln(), 3f64.ln()];
        let s0 = orbit.symbol_at(0).unwrap();
        assert_eq!(orbit.birkhoff_average(&table, 1).unwrap(), table[s0]);
        let avg = orbit.birkhoff_average(&table, 10_000).unwrap();
        // sd of one term is (ln3 - ln2)/2 ≈ 0.203; 0.02 is ~10 standard errors
        assert!((avg - 0.5 * (2f64.ln() + 3f64.ln())).abs() < 0.02);
        assert!(orbit.birkhoff_average(&table, 10_002).is_err());
    }
}
