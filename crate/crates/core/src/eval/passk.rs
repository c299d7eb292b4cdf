use serde::{Deserialize, Serialize};

use super::EvalError;

/// Largest integer every smaller integer of which is exact in an `f64`.
const EXACT_F64: u64 = 1 << 53;

/// How a group of attempts is scored at budget `k`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PassAtKMode {
    /// Expected success over all k-subsets of the attempts.
    #[default]
    Unbiased,
    /// Success among the first k attempts by index.
    FirstK,
}

/// Binomial coefficient, `None` when it overflows `u64`.
pub fn binomial(n: u64, k: u64) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c.checked_mul((n - i) as u128)? / (i + 1) as u128;
        if c > u64::MAX as u128 {
            return None;
        }
    }
    Some(c as u64)
}

/// Unbiased pass@k estimate `1 - C(n-c, k) / C(n, k)`.
///
/// When both binomials are exact in an `f64` the result is the correctly
/// rounded value of the rational `(C(n,k) - C(n-c,k)) / C(n,k)`. Larger inputs
/// use the product form `1 - prod_{i=n-c+1..=n} (1 - k/i)`.
pub fn pass_at_k(n: u64, c: u64, k: u64) -> Result<f64, EvalError> {
    if k == 0 || k > n {
        return Err(EvalError::Domain(format!("pass@k needs 1 <= k <= n, got n={n}, k={k}")));
    }
    if c > n {
        return Err(EvalError::Domain(format!("pass@k needs c <= n, got n={n}, c={c}")));
    }
    if n - c < k {
        return Ok(1.0);
    }
    if let (Some(total), Some(miss)) = (binomial(n, k), binomial(n - c, k)) {
        if total < EXACT_F64 {
            return Ok((total - miss) as f64 / total as f64);
        }
    }
    let mut miss = 1.0f64;
    for i in (n - c + 1)..=n {
        miss *= 1.0 - k as f64 / i as f64;
    }
    Ok(1.0 - miss)
}

/// 1.0 when any of the first `k` outcomes succeeded.
pub fn pass_at_k_first(outcomes: &[bool], k: usize) -> Result<f64, EvalError> {
    if k == 0 || k > outcomes.len() {
        return Err(EvalError::Domain(format!(
            "pass@k needs 1 <= k <= n, got n={}, k={k}",
            outcomes.len()
        )));
    }
    Ok(if outcomes[..k].iter().any(|&s| s) { 1.0 } else { 0.0 })
}

/// Scores one instance's attempts (in attempt order) under `mode`.
pub fn score(outcomes: &[bool], k: usize, mode: PassAtKMode) -> Result<f64, EvalError> {
    match mode {
        PassAtKMode::Unbiased => {
            let c = outcomes.iter().filter(|&&s| s).count();
            pass_at_k(outcomes.len() as u64, c as u64, k as u64)
        }
        PassAtKMode::FirstK => pass_at_k_first(outcomes, k),
    }
}
