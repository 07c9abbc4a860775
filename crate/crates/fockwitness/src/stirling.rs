//! Exact integer combinatorics connecting photon-number powers and
//! normally ordered ladder monomials.
//!
//! Two triangles are maintained, both computed with checked `i128`
//! arithmetic so silent wrap-around is impossible:
//!
//! * Stirling numbers of the second kind `S(n, k)`, which expand powers of
//!   the number operator in normally ordered form:
//!   `(a†a)^n = Σ_k S(n, k) a†^k a^k`.
//! * Signed Stirling numbers of the first kind `s(n, k)`, which expand the
//!   falling factorial in plain powers:
//!   `a†^m a^m = (a†a)(a†a − 1)⋯(a†a − m + 1) = Σ_k s(m, k) (a†a)^k`.
//!
//! The two triangles are inverse to each other, which the tests check
//! exactly. The first-kind triangle also converts measured photon counts
//! into unbiased single-shot estimates of normally ordered moments via the
//! falling factorial `(j)_m`.

use crate::error::{Error, Result};

/// Precomputed triangles of both Stirling kinds up to a maximum order.
#[derive(Debug, Clone)]
pub struct StirlingTable {
    max_order: usize,
    /// `second[n][k] = S(n, k)`, second kind.
    second: Vec<Vec<i128>>,
    /// `first_signed[n][k] = s(n, k)`, signed first kind.
    first_signed: Vec<Vec<i128>>,
}

impl StirlingTable {
    /// Build both triangles for orders `0..=max_order`.
    ///
    /// Fails with [`Error::Overflow`] if an entry would exceed `i128`
    /// (first-kind entries grow like `(n-1)!`, so this happens near
    /// `max_order ≈ 35`; physical use stays far below that).
    pub fn new(max_order: usize) -> Result<Self> {
        let mut second = Vec::with_capacity(max_order + 1);
        let mut first_signed = Vec::with_capacity(max_order + 1);
        second.push(vec![1i128]);
        first_signed.push(vec![1i128]);
        for n in 1..=max_order {
            let mut s2 = vec![0i128; n + 1];
            let mut s1 = vec![0i128; n + 1];
            for k in 1..=n {
                let s2_up = second[n - 1].get(k).copied().unwrap_or(0);
                let s2_diag = second[n - 1][k - 1];
                // S(n, k) = k·S(n−1, k) + S(n−1, k−1)
                let term = (k as i128)
                    .checked_mul(s2_up)
                    .and_then(|t| t.checked_add(s2_diag))
                    .ok_or_else(|| overflow("S", n, k))?;
                s2[k] = term;

                let s1_up = first_signed[n - 1].get(k).copied().unwrap_or(0);
                let s1_diag = first_signed[n - 1][k - 1];
                // s(n, k) = s(n−1, k−1) − (n−1)·s(n−1, k)
                let term = ((n - 1) as i128)
                    .checked_mul(s1_up)
                    .and_then(|t| s1_diag.checked_sub(t))
                    .ok_or_else(|| overflow("s", n, k))?;
                s1[k] = term;
            }
            second.push(s2);
            first_signed.push(s1);
        }
        Ok(Self {
            max_order,
            second,
            first_signed,
        })
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// Stirling number of the second kind `S(n, k)`.
    pub fn second(&self, n: usize, k: usize) -> Result<i128> {
        self.check(n)?;
        Ok(self.second[n].get(k).copied().unwrap_or(0))
    }

    /// Signed Stirling number of the first kind `s(n, k)`.
    pub fn first_signed(&self, n: usize, k: usize) -> Result<i128> {
        self.check(n)?;
        Ok(self.first_signed[n].get(k).copied().unwrap_or(0))
    }

    fn check(&self, n: usize) -> Result<()> {
        if n > self.max_order {
            return Err(Error::InvalidParameter(format!(
                "order {n} exceeds table maximum {}",
                self.max_order
            )));
        }
        Ok(())
    }
}

fn overflow(kind: &str, n: usize, k: usize) -> Error {
    Error::Overflow(format!("Stirling {kind}({n}, {k}) exceeds i128"))
}

/// Convenience accessor for a single second-kind number `S(n, k)`.
pub fn stirling(n: usize, k: usize) -> Result<i128> {
    Ok(StirlingTable::new(n)?.second[n].get(k).copied().unwrap_or(0))
}

/// Convenience accessor for a single signed first-kind number `s(n, k)`.
pub fn stirling_first(n: usize, k: usize) -> Result<i128> {
    Ok(StirlingTable::new(n)?.first_signed[n]
        .get(k)
        .copied()
        .unwrap_or(0))
}

/// Coefficients expanding a pair of normally ordered number-moments in
/// plain number-operator powers:
///
/// `⟨a†^m a^m b†^n b^n⟩ = Σ_{k,l} C[k][l] ⟨(a†a)^k (b†b)^l⟩`
/// with `C[k][l] = s(m, k)·s(n, l)`.
#[derive(Debug, Clone)]
pub struct NumberMomentCoeffs {
    pub m: usize,
    pub n: usize,
    coeffs: Vec<Vec<i128>>,
}

impl NumberMomentCoeffs {
    /// `C[k][l]`; zero outside `k ≤ m, l ≤ n`.
    pub fn coeff(&self, k: usize, l: usize) -> i128 {
        self.coeffs
            .get(k)
            .and_then(|row| row.get(l))
            .copied()
            .unwrap_or(0)
    }

    pub fn rows(&self) -> &[Vec<i128>] {
        &self.coeffs
    }
}

/// Expand `a†^m a^m b†^n b^n` over products of number-operator powers.
pub fn number_moment_decomposition(m: usize, n: usize) -> Result<NumberMomentCoeffs> {
    let table = StirlingTable::new(m.max(n))?;
    let mut coeffs = vec![vec![0i128; n + 1]; m + 1];
    for (k, row) in coeffs.iter_mut().enumerate() {
        for (l, slot) in row.iter_mut().enumerate() {
            let a = table.first_signed(m, k)?;
            let b = table.first_signed(n, l)?;
            *slot = a
                .checked_mul(b)
                .ok_or_else(|| overflow("s·s", m.max(n), k.max(l)))?;
        }
    }
    Ok(NumberMomentCoeffs { m, n, coeffs })
}

/// Coefficients of `(a†a)^n = Σ_k S(n, k) a†^k a^k` (index = `k`).
pub fn normal_order_coeffs(n: usize) -> Result<Vec<i128>> {
    Ok(StirlingTable::new(n)?.second[n].clone())
}

/// Coefficients of `(x)_m = Σ_k s(m, k) x^k` (index = `k`).
pub fn falling_factorial_coeffs(m: usize) -> Result<Vec<i128>> {
    Ok(StirlingTable::new(m)?.first_signed[m].clone())
}

/// Exact falling factorial `(j)_m = j (j−1) ⋯ (j−m+1)`.
///
/// This is the unbiased single-shot estimate of `⟨a†^m a^m⟩` evaluated at a
/// measured photon count `j`.
pub fn falling_factorial(j: u64, m: usize) -> Result<i128> {
    let mut acc: i128 = 1;
    for i in 0..m as u64 {
        if i >= j {
            return Ok(0);
        }
        acc = acc
            .checked_mul((j - i) as i128)
            .ok_or_else(|| Error::Overflow(format!("falling factorial ({j})_{m} exceeds i128")))?;
    }
    Ok(acc)
}
