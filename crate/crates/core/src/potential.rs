//! External confining potential and its magnetic field.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PotentialForm {
    /// `psi_ext(x) = c0 / (x (1 - x))^gamma`
    #[default]
    InverseDistance,
    /// No external field (free plasma).
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalPotential {
    pub form: PotentialForm,
    pub c0: f64,
    pub gamma: f64,
    pub enforce_blowup: bool,
}

impl Default for ExternalPotential {
    fn default() -> Self {
        Self {
            form: PotentialForm::InverseDistance,
            c0: 1.0,
            gamma: 1.0,
            enforce_blowup: true,
        }
    }
}

/// `min(x, 1 - x)`
#[inline]
pub fn dist_to_boundary(x: f64) -> f64 {
    x.min(1.0 - x)
}

impl ExternalPotential {
    pub fn free() -> Self {
        Self {
            form: PotentialForm::Zero,
            c0: 1.0,
            gamma: 1.0,
            enforce_blowup: false,
        }
    }

    pub fn is_confining(&self) -> bool {
        self.form == PotentialForm::InverseDistance && self.enforce_blowup
    }

    #[inline]
    fn pow_gamma(&self, y: f64) -> f64 {
        if self.gamma == 1.0 {
            y
        } else if self.gamma == 2.0 {
            y * y
        } else {
            y.powf(self.gamma)
        }
    }

    /// `psi_ext(x)` without domain checks; infinite at the walls.
    #[inline]
    pub fn psi(&self, x: f64) -> f64 {
        match self.form {
            PotentialForm::Zero => 0.0,
            PotentialForm::InverseDistance => self.c0 / self.pow_gamma(x * (1.0 - x)),
        }
    }

    /// `B_ext(x) = psi_ext'(x)` without domain checks.
    #[inline]
    pub fn b_ext(&self, x: f64) -> f64 {
        match self.form {
            PotentialForm::Zero => 0.0,
            PotentialForm::InverseDistance => {
                let q = x * (1.0 - x);
                self.c0 * self.gamma * (2.0 * x - 1.0) / (self.pow_gamma(q) * q)
            }
        }
    }

    /// `(psi_ext(x), B_ext(x))` for `0 < x < 1`.
    pub fn eval(&self, x: f64) -> Result<(f64, f64)> {
        if !(x > 0.0 && x < 1.0) {
            return Err(Error::Domain(format!(
                "external potential evaluated at x = {x}, outside the open interval (0, 1)"
            )));
        }
        Ok((self.psi(x), self.b_ext(x)))
    }

    /// `sup |psi_ext|` over `[a, 1 - a]`, `0 < a <= 1/2`.
    pub fn sup_abs_symmetric(&self, a: f64) -> f64 {
        match self.form {
            PotentialForm::Zero => 0.0,
            // |psi| is symmetric and decreasing towards the midpoint.
            PotentialForm::InverseDistance => self.psi(a.min(0.5)).abs(),
        }
    }

    /// Pointwise form of the blow-up hypothesis:
    /// `|psi(x)| d^gamma + d^gamma / c0 - c0`, nonnegative when it holds.
    pub fn blowup_margin(&self, x: f64) -> f64 {
        let d = self.pow_gamma(dist_to_boundary(x));
        self.psi(x).abs() * d + d / self.c0 - self.c0
    }
}

/// Closed-form evaluation of the external potential.
pub fn eval_potential(pot: &ExternalPotential, x: f64) -> Result<(f64, f64)> {
    pot.eval(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_values() {
        let pot = ExternalPotential::default();
        let (psi, b) = eval_potential(&pot, 0.5).unwrap();
        assert_eq!(psi, 4.0);
        assert_eq!(b, 0.0);
    }

    #[test]
    fn quarter_point_against_finite_difference() {
        let pot = ExternalPotential::default();
        let (psi, b) = eval_potential(&pot, 0.25).unwrap();
        assert!((psi - 16.0 / 3.0).abs() < 1e-14);
        assert!((b - (-0.5 / 0.03515625)).abs() < 1e-12);
        let h = 1e-6;
        let fd = (pot.psi(0.25 + h) - pot.psi(0.25 - h)) / (2.0 * h);
        assert!(((b - fd) / b).abs() < 1e-6);
    }

    #[test]
    fn derivative_matches_finite_difference_for_general_gamma() {
        for &(c0, gamma) in &[(1.0, 1.0), (0.5, 2.0), (2.0, 0.7)] {
            let pot = ExternalPotential {
                c0,
                gamma,
                ..Default::default()
            };
            for i in 1..20 {
                let x = 0.05 * i as f64;
                let h = 1e-6;
                let fd = (pot.psi(x + h) - pot.psi(x - h)) / (2.0 * h);
                let b = pot.b_ext(x);
                let scale = b.abs().max(1.0);
                assert!((b - fd).abs() / scale < 1e-6, "c0={c0} gamma={gamma} x={x}");
            }
        }
    }

    #[test]
    fn walls_are_a_domain_error() {
        let pot = ExternalPotential::default();
        assert!(matches!(pot.eval(0.0), Err(Error::Domain(_))));
        assert!(matches!(pot.eval(1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn blowup_near_wall() {
        let pot = ExternalPotential::default();
        for x in [1e-2, 1e-3] {
            assert!(pot.psi(x) >= 1.0 / x - 1.0);
            assert!(pot.blowup_margin(x) >= 0.0);
        }
    }

    #[test]
    fn distance() {
        assert_eq!(dist_to_boundary(0.5), 0.5);
        assert_eq!(dist_to_boundary(0.1), 0.1);
        assert!((dist_to_boundary(0.9) - 0.1).abs() < 1e-15);
    }
}
