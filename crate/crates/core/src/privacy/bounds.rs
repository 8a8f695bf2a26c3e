//! Scalar pieces of the privacy accountant.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Entrywise sensitivity constant `d_ℓ = V_max² √d_max / p_min`.
pub fn sensitivity_d(v_max: f64, d_max: usize, p_min: f64) -> Result<f64> {
    if !(p_min > 0.0) {
        return Err(Error::UnboundedSensitivity { p_min });
    }
    Ok(v_max * v_max * (d_max as f64).sqrt() / p_min)
}

/// Largest condition number accepted by [`precision_sum`].
pub const MAX_CONDITION: f64 = 1e12;

/// `γ = Σ_{t,t'} |[Σ⁻¹]_{tt'}|`.
pub fn precision_sum<T: Real>(sigma: &DMatrix<T>) -> Result<f64> {
    let s = sigma.map(|x| x.as_f64());
    let eig = s.clone().symmetric_eigenvalues();
    let lo = eig.min();
    let hi = eig.max();
    if !(lo > 0.0) || hi / lo > MAX_CONDITION {
        return Err(Error::IllConditioned {
            condition: if lo > 0.0 { hi / lo } else { f64::INFINITY },
        });
    }
    let inv = s.cholesky().ok_or(Error::IllConditioned { condition: f64::INFINITY })?.inverse();
    Ok(inv.iter().map(|x| x.abs()).sum())
}

/// Uniform whitened-shift bound `ψ̄ = κ r √(Σ_ℓ d_ℓ² γ_ℓ)`.
pub fn psi_bar(kappa: f64, r: f64, classes: &[(f64, f64)]) -> f64 {
    kappa * r * classes.iter().map(|(d, g)| d * d * g).sum::<f64>().sqrt()
}

/// Tail factor of a `χ²_{nT}` variable: `P(‖z‖ > τ) ≤ δ`.
pub fn chi2_tail_tau(n: usize, horizon: usize, delta: f64) -> f64 {
    let k = (n * horizon) as f64;
    let l = (1.0 / delta).ln();
    (k + 2.0 * (k * l).sqrt() + 2.0 * l).sqrt()
}

/// Per-class inputs of the injection-term bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassTerm {
    pub d: f64,
    pub gamma: f64,
    pub size: usize,
    /// `1ᵀ Σ 1`.
    pub one_sigma_one: f64,
}

impl ClassTerm {
    /// `d √(γ |C|) √(1ᵀΣ1)`, the class's share of the linear bias.
    pub fn linear_bias(&self) -> f64 {
        self.d * (self.gamma * self.size as f64).sqrt() * self.one_sigma_one.sqrt()
    }
}

/// Bound on the injection term:
/// `ψ̄τ + ψ̄²/2 + κr Σ_ℓ d_ℓ √(γ_ℓ|C_ℓ|) √(1ᵀΣ_ℓ1)`.
pub fn term1_bound(psi_bar: f64, tau: f64, kappa: f64, r: f64, classes: &[ClassTerm]) -> f64 {
    psi_bar * tau + 0.5 * psi_bar * psi_bar + kappa * r * classes.iter().map(ClassTerm::linear_bias).sum::<f64>()
}

/// Geometric constant `C_⋆ = √2 (1 + √n V_max / V_min)`.
pub fn c_star(n: usize, v_min: f64, v_max: f64) -> f64 {
    std::f64::consts::SQRT_2 * (1.0 + (n as f64).sqrt() * v_max / v_min)
}

/// Admissibility parameter `α = ‖M̃⁻¹‖_⋆ C_⋆ κ r`.
pub fn alpha_param(m_tilde_star: f64, n: usize, v_min: f64, v_max: f64, kappa: f64, r: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    m_tilde_star * c_star(n, v_min, v_max) * kappa * r
}

pub fn is_admissible(alpha: f64) -> bool {
    alpha < 0.25
}

/// Bound on the Jacobian term `Λ̄_II = T√n α(2+α) / (2(1−4α))`.
pub fn term2_bound(alpha: f64, n: usize, horizon: usize) -> Result<f64> {
    if !is_admissible(alpha) {
        return Err(Error::Inadmissible { alpha });
    }
    Ok(horizon as f64 * (n as f64).sqrt() * alpha * (2.0 + alpha) / (2.0 * (1.0 - 4.0 * alpha)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sensitivity_examples() {
        assert_eq!(sensitivity_d(1.0, 1, 1.0).unwrap(), 1.0);
        assert!((sensitivity_d(1.05, 4, 0.1).unwrap() - 22.05).abs() < 1e-12);
        let a = sensitivity_d(1.05, 4, 0.2).unwrap();
        assert!((a - 11.025).abs() < 1e-12);
        assert!(matches!(sensitivity_d(1.0, 1, 0.0), Err(Error::UnboundedSensitivity { .. })));
    }

    #[test]
    fn precision_sum_examples() {
        assert!((precision_sum(&DMatrix::<f64>::identity(3, 3)).unwrap() - 3.0).abs() < 1e-12);
        assert!((precision_sum(&(DMatrix::<f64>::identity(3, 3) * 2.0)).unwrap() - 1.5).abs() < 1e-12);
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        assert!((precision_sum(&s).unwrap() - 4.0).abs() < 1e-12);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0 + 1e-14]);
        assert!(matches!(precision_sum(&bad), Err(Error::IllConditioned { .. })));
    }

    #[test]
    fn psi_and_tau() {
        assert_eq!(psi_bar(1.0, 0.0, &[(2.0, 3.0)]), 0.0);
        assert!((psi_bar(1.0, 0.1, &[(2.0, 3.0)]) - 0.12f64.sqrt()).abs() < 1e-15);
        assert!((psi_bar(2.0, 0.1, &[(2.0, 3.0)]) - 2.0 * 0.12f64.sqrt()).abs() < 1e-15);
        assert!((chi2_tail_tau(2, 2, (-1f64).exp()) - 10f64.sqrt()).abs() < 1e-12);
        assert!((chi2_tail_tau(3, 5, 1.0 - 1e-15) - 15f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn term_two_examples() {
        assert_eq!(term2_bound(0.0, 1, 1).unwrap(), 0.0);
        assert!((term2_bound(0.1, 1, 1).unwrap() - 0.175).abs() < 1e-12);
        assert!(matches!(term2_bound(0.25, 1, 1), Err(Error::Inadmissible { .. })));
        let a = 1e-7;
        assert!((term2_bound(a, 4, 3).unwrap() / (3.0 * 2.0 * a) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn alpha_example() {
        assert!((c_star(1, 0.95, 1.05) - 2.977_291_710_3).abs() < 1e-9);
        let a = alpha_param(1.0, 1, 0.95, 1.05, 1.0, 0.05);
        assert!((a - 0.148_864_585_5).abs() < 1e-9);
        assert!(is_admissible(a));
        assert!(!is_admissible(0.25));
        assert_eq!(alpha_param(1.0, 1, 0.95, 1.05, 1.0, 0.0), 0.0);
    }
}
