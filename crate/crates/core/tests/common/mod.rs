//! Shared helpers for the integration suites.

use smocksim::pattern::{parse_pattern, Pattern};
use std::path::PathBuf;

pub fn repo_path(relative: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(relative)
}

pub fn load_pattern(relative: &str) -> Pattern {
    let path = repo_path(relative);
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()));
    parse_pattern(&text).unwrap_or_else(|e| panic!("invalid pattern {relative}: {e}"))
}

/// The patterns shipped in `patterns/`.
pub fn bundled_patterns() -> Vec<(&'static str, Pattern)> {
    vec![
        ("zigzag", load_pattern("patterns/zigzag.json")),
        ("arrow", load_pattern("patterns/arrow.json")),
        ("canadian_box", load_pattern("patterns/canadian_box.json")),
    ]
}

pub fn wave_fixture() -> Pattern {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/wave.json");
    let text = std::fs::read_to_string(path).unwrap();
    parse_pattern(&text).unwrap()
}

/// Small deterministic generator for randomized oracles.
#[allow(dead_code)] // not every suite draws random inputs
pub struct Lcg(pub u64);

#[allow(dead_code)]
impl Lcg {
    pub fn next_unit(&mut self) -> f64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in [lo, hi).
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_unit()
    }
}
