//! Coin operators for the two-state and lazy walks, and the eigenbasis of
//! the lazy coin in which initial coin states are usually written.

use ndarray::{array, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::linalg::{inner, norm_sqr, unitarity_deviation, C64, ONE, ZERO};

pub const UNITARITY_TOL: f64 = 1e-12;
pub(crate) const NORMALIZATION_TOL: f64 = 1e-10;

/// Coin basis index of the "left" direction. Right is `dim - 1`; stay is 1 for `dim == 3`.
pub const LEFT: usize = 0;
pub const STAY: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum CoinParams {
    TwoState { rho: f64 },
    Lazy { rho: f64, alpha: f64 },
}

impl CoinParams {
    pub fn rho(&self) -> f64 {
        match *self {
            CoinParams::TwoState { rho } | CoinParams::Lazy { rho, .. } => rho,
        }
    }
}

/// A `d × d` unitary coin, basis `(L, R)` or `(L, S, R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoinOperator {
    pub(crate) params: CoinParams,
    pub(crate) matrix: Array2<C64>,
}

impl CoinOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn params(&self) -> CoinParams {
        self.params
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    /// Index of the `R` component.
    pub fn right(&self) -> usize {
        self.dim() - 1
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        crate::linalg::matvec(&self.matrix, v)
    }

    /// `(ρ, α)` for the lazy family.
    pub fn lazy_params(&self) -> Result<(f64, f64)> {
        match self.params {
            CoinParams::Lazy { rho, alpha } => Ok((rho, alpha)),
            CoinParams::TwoState { .. } => Err(Error::DimensionMismatch {
                expected: 3,
                found: 2,
            }),
        }
    }
}

/// Two-state coin `[[ρ, √(1-ρ²)], [√(1-ρ²), -ρ]]`, `0 < ρ ≤ 1`.
///
/// `ρ = 1` is admitted: the coin is then diagonal and the walker moves
/// ballistically to the sink.
pub fn build_coin2(rho: f64) -> Result<CoinOperator> {
    check_range("rho", rho, rho > 0.0 && rho <= 1.0, "0 < rho <= 1")?;
    let s = (1.0 - rho * rho).max(0.0).sqrt();
    let matrix = array![
        [C64::new(rho, 0.0), C64::new(s, 0.0)],
        [C64::new(s, 0.0), C64::new(-rho, 0.0)]
    ];
    Ok(CoinOperator {
        params: CoinParams::TwoState { rho },
        matrix,
    })
}

/// Lazy-walk coin with a `2N`-fold degenerate eigenvalue 1 on the ring.
/// `0 < ρ < 1`, `α` is taken modulo `2π`.
pub fn build_coin3(rho: f64, alpha: f64) -> Result<CoinOperator> {
    check_range("rho", rho, rho > 0.0 && rho < 1.0, "0 < rho < 1")?;
    check_range("alpha", alpha, true, "finite")?;
    let r2 = rho * rho;
    let off = rho * (2.0 - 2.0 * r2).sqrt();
    let e = C64::from_polar(1.0, alpha);
    let ec = e.conj();
    let re = |x: f64| C64::new(x, 0.0);
    let matrix = array![
        [re(-r2), re(off), ec * (1.0 - r2)],
        [re(off), re(2.0 * r2 - 1.0), ec * off],
        [e * (1.0 - r2), e * off, re(-r2)]
    ];
    Ok(CoinOperator {
        params: CoinParams::Lazy { rho, alpha },
        matrix,
    })
}

impl CoinOperator {
    pub fn unitarity_deviation(&self) -> f64 {
        unitarity_deviation(&self.matrix)
    }
}

/// Eigenvectors of the lazy coin: `C σ⁺ = σ⁺`, `C σ₁⁻ = -σ₁⁻`, `C σ₂⁻ = -σ₂⁻`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoinEigenbasis {
    pub sigma_plus: [C64; 3],
    pub sigma1_minus: [C64; 3],
    pub sigma2_minus: [C64; 3],
}

impl CoinEigenbasis {
    pub fn vectors(&self) -> [&[C64; 3]; 3] {
        [&self.sigma_plus, &self.sigma1_minus, &self.sigma2_minus]
    }

    /// `h₊ σ⁺ + h₁ σ₁⁻ + h₂ σ₂⁻`.
    pub fn compose(&self, h: CoinDecomposition) -> [C64; 3] {
        std::array::from_fn(|i| {
            h.h_plus * self.sigma_plus[i] + h.h1 * self.sigma1_minus[i] + h.h2 * self.sigma2_minus[i]
        })
    }
}

pub fn coin_eigenbasis(coin: &CoinOperator) -> Result<CoinEigenbasis> {
    let (rho, alpha) = coin.lazy_params()?;
    let e = C64::from_polar(1.0, alpha);
    let a = ((1.0 - rho * rho) / 2.0).sqrt();
    let b = (1.0 - rho * rho).sqrt();
    let r = C64::new(rho, 0.0);
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    Ok(CoinEigenbasis {
        sigma_plus: [C64::new(a, 0.0), r, e * a],
        sigma1_minus: [r * s2, C64::new(-b, 0.0), e * (rho * s2)],
        sigma2_minus: [C64::new(s2, 0.0), ZERO, -e * s2],
    })
}

/// Amplitudes of a coin state in the lazy-coin eigenbasis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoinDecomposition {
    pub h_plus: C64,
    pub h1: C64,
    pub h2: C64,
}

impl CoinDecomposition {
    pub fn weights(&self) -> (f64, f64, f64) {
        (self.h_plus.norm_sqr(), self.h1.norm_sqr(), self.h2.norm_sqr())
    }
}

pub(crate) fn check_normalized(v: &[C64]) -> Result<()> {
    let n2 = norm_sqr(v);
    if (n2 - 1.0).abs() > NORMALIZATION_TOL || !n2.is_finite() {
        return Err(Error::NotNormalized(n2));
    }
    Ok(())
}

pub fn decompose_coin_state(psi: &[C64], basis: &CoinEigenbasis) -> Result<CoinDecomposition> {
    if psi.len() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            found: psi.len(),
        });
    }
    check_normalized(psi)?;
    Ok(CoinDecomposition {
        h_plus: inner(&basis.sigma_plus, psi),
        h1: inner(&basis.sigma1_minus, psi),
        h2: inner(&basis.sigma2_minus, psi),
    })
}

/// Standard-basis coin state `|L⟩`, `|S⟩` or `|R⟩` of dimension `dim`.
pub fn basis_coin_state(dim: usize, index: usize) -> Vec<C64> {
    let mut v = vec![ZERO; dim];
    v[index] = ONE;
    v
}
