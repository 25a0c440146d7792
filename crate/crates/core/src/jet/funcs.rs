//! Elementary functions lifted to jets.
//!
//! Each function builds the univariate Taylor coefficients of the outer map
//! at the jet's value part and composes them with the nilpotent part via
//! [`Jet::apply_univariate`]. Domain violations (log of a non-positive value,
//! fractional power of a non-positive base, ...) are reported as errors, never
//! as NaN coefficients.

use super::Jet;
use crate::error::{Error, Result};

impl Jet {
    pub fn exp(&self) -> Jet {
        let v = self.value().exp();
        let mut g = Vec::with_capacity(self.order() + 1);
        let mut c = v;
        for k in 0..=self.order() {
            g.push(c);
            c /= (k + 1) as f64;
        }
        self.apply_univariate(&g)
    }

    pub fn ln(&self) -> Result<Jet> {
        let v = self.value();
        if v <= 0.0 {
            return Err(Error::domain("ln", format!("value part {v} is not positive")));
        }
        // ln(v + s) = ln v + sum_{k>=1} (-1)^(k-1) s^k / (k v^k)
        let mut g = Vec::with_capacity(self.order() + 1);
        g.push(v.ln());
        let mut vk = v;
        let mut sign = 1.0;
        for k in 1..=self.order() {
            g.push(sign / (k as f64 * vk));
            vk *= v;
            sign = -sign;
        }
        Ok(self.apply_univariate(&g))
    }

    pub fn sqrt(&self) -> Result<Jet> {
        if self.value() <= 0.0 {
            return Err(Error::domain(
                "sqrt",
                format!("value part {} is not positive", self.value()),
            ));
        }
        self.powr(1, 2)
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        // d^k sin = sin shifted by k*pi/2: sin, cos, -sin, -cos, ...
        let cycle = [s, c, -s, -c];
        let mut g = Vec::with_capacity(self.order() + 1);
        let mut fact = 1.0;
        for k in 0..=self.order() {
            if k > 0 {
                fact *= k as f64;
            }
            g.push(cycle[k % 4] / fact);
        }
        self.apply_univariate(&g)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let mut g = Vec::with_capacity(self.order() + 1);
        let mut fact = 1.0;
        for k in 0..=self.order() {
            if k > 0 {
                fact *= k as f64;
            }
            g.push(cycle[k % 4] / fact);
        }
        self.apply_univariate(&g)
    }

    /// Integer power by binary exponentiation. Valid for any base when
    /// `n >= 0`; negative exponents require a nonzero value part.
    pub fn powi(&self, n: i64) -> Result<Jet> {
        if n < 0 {
            return self.recip()?.powi(-n);
        }
        let mut acc = Jet::constant(self.dim(), self.order(), 1.0);
        let mut base = self.clone();
        let mut e = n as u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        Ok(acc)
    }

    /// Rational power `num/den` (`den > 0`). Integer exponents reduce to
    /// [`Jet::powi`]; genuinely fractional exponents require a positive value
    /// part.
    pub fn powr(&self, num: i64, den: i64) -> Result<Jet> {
        assert!(den > 0, "powr denominator must be positive");
        let g = gcd(num.unsigned_abs(), den as u64) as i64;
        let (num, den) = (num / g, den / g);
        if den == 1 {
            return self.powi(num);
        }
        let v = self.value();
        if v <= 0.0 {
            return Err(Error::domain(
                "powr",
                format!("fractional power {num}/{den} of non-positive value part {v}"),
            ));
        }
        let r = num as f64 / den as f64;
        // g_k = binom(r, k) v^(r - k)
        let mut g = Vec::with_capacity(self.order() + 1);
        let mut binom = 1.0;
        for k in 0..=self.order() {
            if k > 0 {
                binom *= (r - (k as f64 - 1.0)) / k as f64;
            }
            g.push(binom * v.powf(r - k as f64));
        }
        Ok(self.apply_univariate(&g))
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    if a == 0 {
        return b.max(1);
    }
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn ln_jet_coefficients_at_two() {
        // ln(2 + s) = ln 2 + s/2 - s^2/8 + s^3/24
        let x = Jet::variable(1, 3, 0, 2.0);
        let j = x.ln().unwrap();
        assert!(close(j.coeffs()[0], 2.0f64.ln(), 1e-15));
        assert!(close(j.coeffs()[1], 0.5, 1e-15));
        assert!(close(j.coeffs()[2], -0.125, 1e-15));
        assert!(close(j.coeffs()[3], 1.0 / 24.0, 1e-15));
    }

    #[test]
    fn exp_matches_derivatives() {
        let x = Jet::variable(1, 4, 0, 0.3);
        let j = x.exp();
        let e = 0.3f64.exp();
        for k in 0..=4usize {
            let expected = e / (1..=k).map(|i| i as f64).product::<f64>().max(1.0);
            assert!(close(j.coeffs()[k], expected, 1e-14), "k={k}");
        }
    }

    #[test]
    fn sin_cos_derivative_cycle() {
        let x = Jet::variable(1, 4, 0, 0.7);
        let s = x.sin();
        let c = x.cos();
        assert!(close(s.deriv(&[1]), 0.7f64.cos(), 1e-14));
        assert!(close(s.deriv(&[2]), -0.7f64.sin(), 1e-14));
        assert!(close(c.deriv(&[1]), -0.7f64.sin(), 1e-14));
        assert!(close(c.deriv(&[3]), 0.7f64.sin(), 1e-14));
    }

    #[test]
    fn integer_power_handles_zero_base() {
        let x = Jet::variable(1, 3, 0, 0.0);
        let j = x.powi(2).unwrap();
        assert_eq!(j.coeffs(), &[0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn fractional_power_of_negative_base_errors() {
        let x = Jet::variable(1, 3, 0, -1.0);
        assert!(x.powr(1, 2).is_err());
        assert!(x.powi(3).is_ok());
    }

    #[test]
    fn division_by_zero_value_errors() {
        let x = Jet::variable(2, 3, 0, 0.0);
        let one = Jet::constant(2, 3, 1.0);
        assert!(one.try_div(&x).is_err());
    }

    #[test]
    fn sqrt_squares_back() {
        let x = Jet::variable(1, 5, 0, 1.7);
        let r = x.sqrt().unwrap();
        let back = r.mul(&r);
        for (a, b) in back.coeffs().iter().zip(x.coeffs()) {
            assert!(close(*a, *b, 1e-14));
        }
    }
}
