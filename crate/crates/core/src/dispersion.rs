//! Permittivity models of the inclusion material.
//!
//! Every model here depends on `omega` only through `lambda = omega^2`, so all
//! evaluation is done in `lambda` and the `omega` forms follow from the chain
//! rule. Frequencies and permittivities are dimensionless.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative distance in `lambda` to a real pole below which evaluation is
/// refused.
pub const POLE_GUARD: f64 = 1e-8;

/// One oscillator `xi^2 / (eta^2 - omega^2 - i omega gamma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzTerm {
    pub xi2: f64,
    pub eta2: f64,
    #[serde(default)]
    pub gamma: f64,
}

impl LorentzTerm {
    pub const fn new(xi2: f64, eta2: f64, gamma: f64) -> Self {
        LorentzTerm { xi2, eta2, gamma }
    }

    pub const fn lossless(xi2: f64, eta2: f64) -> Self {
        LorentzTerm::new(xi2, eta2, 0.0)
    }
}

/// Pole/residue pair `(A, B)` of the causality-preserving model, stored as
/// real and imaginary parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CausalPair {
    pub a_re: f64,
    pub a_im: f64,
    pub b_re: f64,
    pub b_im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DispersionModel {
    /// `eps = value`.
    Constant { value: f64 },
    /// Lossless Lorentz model `alpha + sum xi^2 / (eta^2 - omega^2)`.
    SimplifiedDl { alpha: f64, terms: Vec<LorentzTerm> },
    /// Real part of the damped Drude-Lorentz model.
    RealDl { alpha: f64, terms: Vec<LorentzTerm> },
    /// Real part of the causality-preserving model with unit background.
    RealCp { pairs: Vec<CausalPair> },
}

/// Diagonal realization `A = diag(eta^2)`, `b_l = xi_l eta_l` of the strictly
/// proper part of a lossless Lorentz model, with `Xi = sum xi^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub xi: f64,
}

impl Realization {
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// `b^T (A - lambda I)^{-1} b`.
    pub fn transfer(&self, lambda: f64) -> Result<f64> {
        let mut s = 0.0;
        for (&a, &b) in self.a.iter().zip(&self.b) {
            guard_pole(lambda, a)?;
            s += b * b / (a - lambda);
        }
        Ok(s)
    }

    /// `max eta^2 - min eta^2`, the positivity bound for the companion shift.
    pub fn shift_bound(&self) -> f64 {
        if self.a.is_empty() {
            return 0.0;
        }
        let max = self.a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = self.a.iter().cloned().fold(f64::INFINITY, f64::min);
        max - min
    }

    pub fn min_pole(&self) -> Option<f64> {
        self.a.iter().cloned().reduce(f64::min)
    }
}

/// `lambda * eps(lambda)` together with its split into the polynomial part
/// `lambda alpha - Xi` and the strictly proper part `sum xi^2 eta^2/(eta^2 - lambda)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaWeight {
    pub total: f64,
    pub polynomial: f64,
    pub proper: f64,
}

fn guard_pole(lambda: f64, pole: f64) -> Result<()> {
    if (lambda - pole).abs() <= POLE_GUARD * pole.abs().max(1.0) {
        return Err(Error::NearPole { lambda, pole });
    }
    Ok(())
}

/// Refuses denominators `q` that vanish relative to `scale^2`.
fn guard_denominator(lambda: f64, q: f64, pole: f64, scale: f64) -> Result<()> {
    let s = POLE_GUARD * scale.abs().max(1.0);
    if q.abs() <= s * s {
        return Err(Error::NearPole { lambda, pole });
    }
    Ok(())
}

impl DispersionModel {
    pub fn constant(value: f64) -> Self {
        DispersionModel::Constant { value }
    }

    /// Lossless Lorentz model; strengths and resonances must be non-negative.
    pub fn simplified_dl(alpha: f64, terms: Vec<LorentzTerm>) -> Result<Self> {
        for t in &terms {
            if !(t.xi2 >= 0.0 && t.eta2 >= 0.0 && t.xi2.is_finite() && t.eta2.is_finite()) {
                return Err(Error::Config(format!(
                    "lossless Lorentz terms need finite xi2, eta2 >= 0, got {t:?}"
                )));
            }
        }
        Ok(DispersionModel::SimplifiedDl {
            alpha,
            terms: terms.into_iter().map(|t| LorentzTerm::lossless(t.xi2, t.eta2)).collect(),
        })
    }

    /// Real part of the damped model. Fitted material data may carry negative
    /// oscillator strengths, so only finiteness is required.
    pub fn real_dl(alpha: f64, terms: Vec<LorentzTerm>) -> Result<Self> {
        for t in &terms {
            if !(t.xi2.is_finite() && t.eta2.is_finite() && t.gamma.is_finite()) {
                return Err(Error::Config(format!("non-finite Lorentz term {t:?}")));
            }
        }
        Ok(DispersionModel::RealDl { alpha, terms })
    }

    pub fn real_cp(pairs: Vec<CausalPair>) -> Self {
        DispersionModel::RealCp { pairs }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DispersionModel::Constant { .. } => "constant",
            DispersionModel::SimplifiedDl { .. } => "simplified_dl",
            DispersionModel::RealDl { .. } => "real_dl",
            DispersionModel::RealCp { .. } => "real_cp",
        }
    }

    /// `eps(omega)`.
    pub fn eval(&self, omega: f64) -> Result<f64> {
        self.eval_sq(omega * omega)
    }

    /// `d eps / d omega`.
    pub fn eval_domega(&self, omega: f64) -> Result<f64> {
        Ok(2.0 * omega * self.deriv_sq(omega * omega)?)
    }

    /// `eps` as a function of `lambda = omega^2`.
    pub fn eval_sq(&self, lambda: f64) -> Result<f64> {
        Ok(self.eval_with_deriv(lambda)?.0)
    }

    /// `d eps / d lambda`.
    pub fn deriv_sq(&self, lambda: f64) -> Result<f64> {
        Ok(self.eval_with_deriv(lambda)?.1)
    }

    /// `(eps(lambda), eps'(lambda))` in one pass.
    pub fn eval_with_deriv(&self, lambda: f64) -> Result<(f64, f64)> {
        match self {
            DispersionModel::Constant { value } => Ok((*value, 0.0)),
            DispersionModel::SimplifiedDl { alpha, terms } => {
                let (mut e, mut d) = (*alpha, 0.0);
                for t in terms {
                    guard_pole(lambda, t.eta2)?;
                    let r = 1.0 / (t.eta2 - lambda);
                    e += t.xi2 * r;
                    d += t.xi2 * r * r;
                }
                Ok((e, d))
            }
            DispersionModel::RealDl { alpha, terms } => {
                let (mut e, mut d) = (*alpha, 0.0);
                for t in terms {
                    let dd = t.eta2 - lambda;
                    let g2 = t.gamma * t.gamma;
                    let q = dd * dd + g2 * lambda;
                    guard_denominator(lambda, q, t.eta2, t.eta2)?;
                    e += t.xi2 * dd / q;
                    // d/dl [D/Q] = (-Q - D (-2D + g^2)) / Q^2 = (D^2 - g^2 eta^2) / Q^2
                    d += t.xi2 * (dd * dd - g2 * t.eta2) / (q * q);
                }
                Ok((e, d))
            }
            DispersionModel::RealCp { pairs } => {
                let (mut e, mut d) = (1.0, 0.0);
                for p in pairs {
                    let b2 = p.b_re * p.b_re + p.b_im * p.b_im;
                    let re_ab = p.a_re * p.b_re + p.a_im * p.b_im;
                    let im_ab = p.a_im * p.b_im;
                    let s = lambda - b2;
                    let n = 2.0 * s * re_ab - 4.0 * lambda * im_ab;
                    let q = s * s + 4.0 * lambda * p.b_im * p.b_im;
                    guard_denominator(lambda, q, b2, b2)?;
                    let dn = 2.0 * re_ab - 4.0 * im_ab;
                    let dq = 2.0 * s + 4.0 * p.b_im * p.b_im;
                    e += n / q;
                    d += (dn * q - n * dq) / (q * q);
                }
                Ok((e, d))
            }
        }
    }

    /// Real poles in `lambda`, where known in closed form.
    pub fn poles(&self) -> Vec<f64> {
        match self {
            DispersionModel::SimplifiedDl { terms, .. } => terms.iter().map(|t| t.eta2).collect(),
            DispersionModel::RealDl { terms, .. } => {
                terms.iter().filter(|t| t.gamma == 0.0).map(|t| t.eta2).collect()
            }
            _ => Vec::new(),
        }
    }

    /// Diagonal realization of a lossless Lorentz model.
    pub fn realize(&self) -> Result<Realization> {
        match self {
            DispersionModel::SimplifiedDl { terms, .. } => Ok(Realization {
                a: terms.iter().map(|t| t.eta2).collect(),
                b: terms.iter().map(|t| (t.xi2 * t.eta2).sqrt()).collect(),
                xi: terms.iter().map(|t| t.xi2).sum(),
            }),
            _ => Err(Error::WrongModel {
                expected: "simplified_dl",
            }),
        }
    }

    /// Constant part `alpha` of a lossless Lorentz model.
    pub fn alpha(&self) -> Result<f64> {
        match self {
            DispersionModel::SimplifiedDl { alpha, .. } | DispersionModel::RealDl { alpha, .. } => Ok(*alpha),
            DispersionModel::Constant { value } => Ok(*value),
            DispersionModel::RealCp { .. } => Err(Error::WrongModel {
                expected: "lorentz-type",
            }),
        }
    }

    /// `lambda eps(lambda)` in direct and split form.
    pub fn lambda_weight(&self, lambda: f64) -> Result<LambdaWeight> {
        let (alpha, terms) = match self {
            DispersionModel::SimplifiedDl { alpha, terms } => (*alpha, terms),
            _ => {
                return Err(Error::WrongModel {
                    expected: "simplified_dl",
                })
            }
        };
        let total = lambda * self.eval_sq(lambda)?;
        let xi: f64 = terms.iter().map(|t| t.xi2).sum();
        let proper: f64 = terms.iter().map(|t| t.xi2 * t.eta2 / (t.eta2 - lambda)).sum();
        Ok(LambdaWeight {
            total,
            polynomial: lambda * alpha - xi,
            proper,
        })
    }
}

/// Two-term lossless model of the second experiment.
pub fn two_term_lorentz() -> DispersionModel {
    DispersionModel::SimplifiedDl {
        alpha: 2.0,
        terms: vec![LorentzTerm::lossless(98.6960, 55.2698), LorentzTerm::lossless(197.3921, 63.1655)],
    }
}

/// Real Drude-Lorentz fit of 66% porous silicon.
pub fn porous_silicon() -> DispersionModel {
    const XI2: [f64; 7] = [416.6166, 352.7054, -339.9124, 492.5687, -19.6143, -527.5597, 98.0101];
    const ETA2: [f64; 7] = [92.1086, 71.6269, 71.4552, 227.8301, 47.4923, 93.5605, 121.3762];
    const GAMMA: [f64; 7] = [2.7820, 0.9597, 0.9500, 13.1508, 9.2697, 3.2624, 2.2712];
    DispersionModel::RealDl {
        alpha: 1.143,
        terms: (0..7).map(|l| LorentzTerm::new(XI2[l], ETA2[l], GAMMA[l])).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_model() {
        let m = DispersionModel::constant(8.0);
        assert_eq!(m.eval(3.7).unwrap(), 8.0);
        assert_eq!(m.eval_domega(3.7).unwrap(), 0.0);
    }

    #[test]
    fn two_term_static_value() {
        let expected = 2.0 + 98.6960 / 55.2698 + 197.3921 / 63.1655;
        assert_relative_eq!(two_term_lorentz().eval(0.0).unwrap(), expected, max_relative = 1e-15);
        assert!((expected - 6.9107).abs() < 1e-4);
    }

    #[test]
    fn single_term_derivative_by_hand() {
        let m = DispersionModel::simplified_dl(0.0, vec![LorentzTerm::lossless(1.0, 4.0)]).unwrap();
        assert_relative_eq!(m.eval_domega(1.0).unwrap(), 2.0 / 9.0, max_relative = 1e-15);
    }

    #[test]
    fn realization_of_two_term_model() {
        let r = two_term_lorentz().realize().unwrap();
        assert_relative_eq!(r.xi, 296.0881, max_relative = 1e-15);
        assert!((r.b[0] - 73.857).abs() < 1e-3 && (r.b[1] - 111.662).abs() < 1e-3);
        let direct = 98.6960 * 55.2698 / (55.2698 - 10.0) + 197.3921 * 63.1655 / (63.1655 - 10.0);
        assert_relative_eq!(r.transfer(10.0).unwrap(), direct, max_relative = 1e-12);
        assert!(matches!(porous_silicon().realize(), Err(Error::WrongModel { .. })));
    }

    #[test]
    fn lambda_weight_split() {
        let m = two_term_lorentz();
        let w0 = m.lambda_weight(0.0).unwrap();
        assert_eq!(w0.total, 0.0);
        assert_relative_eq!(w0.polynomial + w0.proper, 0.0, epsilon = 1e-12);
        let w = m.lambda_weight(10.0).unwrap();
        assert_relative_eq!(w.total, w.polynomial + w.proper, max_relative = 1e-12);
        let alpha = 3.0;
        let one = DispersionModel::simplified_dl(alpha, vec![LorentzTerm::lossless(1.0, 1.0)]).unwrap();
        let w = one.lambda_weight(0.5).unwrap();
        assert_relative_eq!(w.total, 0.5 * alpha + 1.0, max_relative = 1e-15);
        assert_relative_eq!(w.polynomial + w.proper, 0.5 * alpha + 1.0, max_relative = 1e-15);
    }

    #[test]
    fn pole_guard_triggers() {
        let m = two_term_lorentz();
        assert!(matches!(m.eval_sq(55.2698), Err(Error::NearPole { .. })));
        assert!(m.eval_sq(55.2698 * (1.0 + 1e-6)).is_ok());
        let undamped = DispersionModel::real_dl(1.0, vec![LorentzTerm::lossless(1.0, 4.0)]).unwrap();
        assert!(matches!(undamped.eval_sq(4.0), Err(Error::NearPole { .. })));
    }

    #[test]
    fn negative_strengths_rejected_for_lossless() {
        assert!(DispersionModel::simplified_dl(1.0, vec![LorentzTerm::lossless(-1.0, 1.0)]).is_err());
        assert!(porous_silicon().eval(3.0).is_ok());
    }

    #[test]
    fn cp_closed_form_matches_complex_sum() {
        let p = CausalPair {
            a_re: 0.7,
            a_im: -0.4,
            b_re: 2.5,
            b_im: -0.3,
        };
        let m = DispersionModel::real_cp(vec![p]);
        let a = num_complex::Complex64::new(p.a_re, p.a_im);
        let b = num_complex::Complex64::new(p.b_re, p.b_im);
        for omega in [0.3, 1.1, 2.0, 4.2] {
            let w = num_complex::Complex64::new(omega, 0.0);
            let full = 1.0 + a / (w - b) - a.conj() / (w + b.conj());
            assert_relative_eq!(m.eval(omega).unwrap(), full.re, max_relative = 1e-12);
        }
    }

    #[test]
    fn config_round_trip() {
        let m = porous_silicon();
        let s = toml::to_string(&m).unwrap();
        let back: DispersionModel = toml::from_str(&s).unwrap();
        assert_eq!(m, back);
    }
}
