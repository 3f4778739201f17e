//! Closed-form evaluators: the critical-window location and the probability
//! tail bounds used for comparison against simulated data. Natural
//! logarithms throughout.

use crate::error::{Error, Result};

/// The critical-window formula
/// `f(l, lambda) = 1/2 - (1/2) sqrt(ln l / l) + lambda ln ln l / sqrt(l ln l)`.
pub fn critical_formula(ell: u64, lambda: f64) -> Result<f64> {
    if ell < 3 {
        return Err(Error::DomainError(format!(
            "critical formula needs l >= 3, got {ell}"
        )));
    }
    let l = ell as f64;
    let ln_l = l.ln();
    Ok(0.5 - 0.5 * (ln_l / l).sqrt() + lambda * ln_l.ln() / (l * ln_l).sqrt())
}

/// A probability tail bound in closed form.
#[derive(Clone, Debug)]
pub enum TailBound {
    /// `Pr[|Bin(d,p) - dp| >= t] <= 2 exp(-2 t^2 / d)`
    ChernoffAdditive { d: u64, t: f64 },
    /// `Pr[Bin(d,p) >= b d p] <= (e/b)^(b d p)`
    ChernoffMultiplicative { d: u64, p: f64, b: f64 },
    /// Leading-order normal tail `exp(-f^2/2) / (f sqrt(2 pi))`
    NormalTail { f: f64 },
    /// For `Y = sum_i i X_i` with `X_i ~ Bin(d_i, p)`:
    /// `Pr[Y >= E Y + tau] <= exp(-2 tau^2 / D)` with `D = sum_i i^2 d_i`
    HoeffdingWeighted { degrees: Vec<u64>, tau: f64 },
}

pub fn tail_bound(bound: &TailBound) -> Result<f64> {
    match bound {
        TailBound::ChernoffAdditive { d, t } => {
            if *d < 1 || *t < 0.0 {
                return Err(Error::DomainError("need d >= 1 and t >= 0".into()));
            }
            Ok(2.0 * (-2.0 * t * t / *d as f64).exp())
        }
        TailBound::ChernoffMultiplicative { d, p, b } => {
            if *d < 1 || !(0.0..1.0).contains(p) || *p <= 0.0 || *b < 1.0 {
                return Err(Error::DomainError("need d >= 1, 0 < p < 1, b >= 1".into()));
            }
            let exponent = b * *d as f64 * p;
            Ok((std::f64::consts::E / b).powf(exponent))
        }
        TailBound::NormalTail { f } => {
            if *f <= 0.0 {
                return Err(Error::DomainError("need f > 0".into()));
            }
            Ok((-f * f / 2.0).exp() / (f * (2.0 * std::f64::consts::PI).sqrt()))
        }
        TailBound::HoeffdingWeighted { degrees, tau } => {
            if degrees.is_empty() || *tau <= 0.0 {
                return Err(Error::DomainError("need k >= 1 degrees and tau > 0".into()));
            }
            let dk: f64 = degrees
                .iter()
                .enumerate()
                .map(|(idx, &d)| ((idx + 1) * (idx + 1)) as f64 * d as f64)
                .sum();
            Ok((-2.0 * tau * tau / dk).exp())
        }
    }
}

/// `Pr[Bin(n, p) >= m]`, summed exactly in double precision.
pub fn binomial_tail_at_least(n: u32, m: u32, p: f64) -> f64 {
    if m == 0 {
        return 1.0;
    }
    if m > n {
        return 0.0;
    }
    let mut total = 0.0;
    for j in m..=n {
        let mut coeff = 1.0f64;
        for i in 0..j.min(n - j) {
            coeff = coeff * (n - i) as f64 / (i + 1) as f64;
        }
        total += coeff * p.powi(j as i32) * (1.0 - p).powi((n - j) as i32);
    }
    total.min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critical_formula_value() {
        // direct evaluation: 1/2 - (1/2) sqrt(ln 100 / 100)
        let f = critical_formula(100, 0.0).unwrap();
        assert!((f - 0.392_701_698_685_532_6).abs() < 1e-12, "{f}");
        assert!(critical_formula(2, 0.0).is_err());
    }

    #[test]
    fn critical_formula_monotone_in_lambda() {
        // window endpoints stay ordered below 1/2 across small dimensions
        for ell in (3u64..=16).chain([100, 4096]) {
            let lo = critical_formula(ell, -0.25).unwrap();
            let mid = critical_formula(ell, 0.0).unwrap();
            let hi = critical_formula(ell, 0.5).unwrap();
            assert!(lo < mid && mid < hi, "window endpoints out of order at {ell}");
            assert!(hi < 0.5);
        }
    }

    #[test]
    fn chernoff_additive_values() {
        let v = tail_bound(&TailBound::ChernoffAdditive { d: 100, t: 10.0 }).unwrap();
        assert!((v - 2.0 * (-2.0f64).exp()).abs() < 1e-12); // 0.270671...
        assert!((v - 0.270_670_566_473_225_4).abs() < 1e-12);
        let vacuous = tail_bound(&TailBound::ChernoffAdditive { d: 5, t: 0.0 }).unwrap();
        assert_eq!(vacuous, 2.0);
    }

    #[test]
    fn hoeffding_weighted_value() {
        let v = tail_bound(&TailBound::HoeffdingWeighted { degrees: vec![100], tau: 10.0 })
            .unwrap();
        assert!((v - (-2.0f64).exp()).abs() < 1e-12); // 0.135335...
        assert!((v - 0.135_335_283_236_612_7).abs() < 1e-12);
    }

    #[test]
    fn multiplicative_and_normal_forms() {
        let v = tail_bound(&TailBound::ChernoffMultiplicative { d: 10, p: 0.1, b: std::f64::consts::E })
            .unwrap();
        assert!((v - 1.0).abs() < 1e-12); // (e/e)^(e) = 1
        let n = tail_bound(&TailBound::NormalTail { f: 2.0 }).unwrap();
        let expected = (-2.0f64).exp() / (2.0 * (2.0 * std::f64::consts::PI).sqrt());
        assert!((n - expected).abs() < 1e-15);
        assert!(tail_bound(&TailBound::NormalTail { f: 0.0 }).is_err());
    }

    #[test]
    fn binomial_tail_small_cases() {
        // Bin(2, 1/2) >= 1: 3/4
        assert!((binomial_tail_at_least(2, 1, 0.5) - 0.75).abs() < 1e-12);
        // Bin(4, 1/2) >= 2: 11/16
        assert!((binomial_tail_at_least(4, 2, 0.5) - 11.0 / 16.0).abs() < 1e-12);
        assert_eq!(binomial_tail_at_least(4, 0, 0.3), 1.0);
        assert_eq!(binomial_tail_at_least(4, 5, 0.3), 0.0);
    }
}
