//! Atom counting and binomial confidence limits for state detection.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{ensure_finite, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountEstimate {
    pub n_initial: f64,
    pub n_final: f64,
    pub p3: f64,
    /// Set when more atoms are counted after the sequence than before, which
    /// fluorescence counting noise allows.
    pub final_exceeds_initial: bool,
}

/// Atom numbers N = (C − C_backgr)/C_1atom and the survival ratio P₃.
pub fn p3_from_counts(c_init: f64, c_final: f64, c_backgr: f64, c_1atom: f64) -> Result<CountEstimate> {
    for (name, v) in [
        ("c_init", c_init),
        ("c_final", c_final),
        ("c_backgr", c_backgr),
        ("c_1atom", c_1atom),
    ] {
        ensure_finite(name, v)?;
    }
    if c_1atom <= 0.0 {
        return Err(Error::invalid("c_1atom", "single-atom count rate must be positive"));
    }
    let n_initial = (c_init - c_backgr) / c_1atom;
    if n_initial <= 0.0 {
        return Err(Error::invalid("c_init", "initial atom number must be positive"));
    }
    let n_final = (c_final - c_backgr) / c_1atom;
    Ok(CountEstimate {
        n_initial,
        n_final,
        p3: n_final / n_initial,
        final_exceeds_initial: n_final > n_initial,
    })
}

/// Exact binomial interval from beta quantiles at (1 ∓ confidence)/2.
pub fn clopper_pearson(successes: u64, trials: u64, confidence: f64) -> Result<(f64, f64)> {
    if trials == 0 || successes > trials {
        return Err(Error::invalid("successes", "need 0 ≤ k ≤ n and n > 0"));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::invalid("confidence", "must lie in (0, 1)"));
    }
    let (k, n) = (successes as f64, trials as f64);
    let tail = (1.0 - confidence) / 2.0;
    let beta = |a: f64, b: f64| Beta::new(a, b).map_err(|e| Error::invalid("beta", e.to_string()));
    let lower = if successes == 0 {
        0.0
    } else {
        beta(k, n - k + 1.0)?.inverse_cdf(tail)
    };
    let upper = if successes == trials {
        1.0
    } else {
        beta(k + 1.0, n - k)?.inverse_cdf(1.0 - tail)
    };
    Ok((lower, upper))
}
