//! Truncated polynomials with integer coefficients.
//!
//! Every tree weight on a uniform kernel is `w^{|T|}` with `w = z·D₀`, so
//! weighted sums over finite tree families are polynomials in `w` whose
//! coefficients count trees by edge number.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Poly(pub Vec<i128>);

impl Poly {
    pub fn zero() -> Poly {
        Poly(Vec::new())
    }

    pub fn monomial(deg: usize, c: i128) -> Poly {
        let mut v = vec![0; deg + 1];
        v[deg] = c;
        Poly(v)
    }

    pub fn add_term(&mut self, deg: usize, c: i128) {
        if self.0.len() <= deg {
            self.0.resize(deg + 1, 0);
        }
        self.0[deg] += c;
    }

    pub fn add(&mut self, other: &Poly) {
        for (k, &c) in other.0.iter().enumerate() {
            if c != 0 {
                self.add_term(k, c);
            }
        }
    }

    pub fn scale(&self, c: i128) -> Poly {
        Poly(self.0.iter().map(|x| x * c).collect())
    }

    /// Product with terms above degree `cap` dropped.
    pub fn mul_trunc(&self, other: &Poly, cap: usize) -> Poly {
        let mut out = vec![0i128; (self.0.len() + other.0.len()).min(cap + 2).saturating_sub(1)];
        for (i, &a) in self.0.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in other.0.iter().enumerate() {
                if i + j > cap {
                    break;
                }
                out[i + j] += a * b;
            }
        }
        Poly(out).trimmed()
    }

    pub fn trimmed(mut self) -> Poly {
        while self.0.last() == Some(&0) {
            self.0.pop();
        }
        self
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn coeff(&self, k: usize) -> i128 {
        self.0.get(k).copied().unwrap_or(0)
    }

    pub fn eval(&self, w: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for &c in self.0.iter().rev() {
            acc = acc * w + BigRational::from_integer(BigInt::from(c));
        }
        acc
    }

    /// Smallest coefficient of `other − self` over degrees `0..=cap`.
    pub fn min_gap_to(&self, other: &Poly, cap: usize) -> i128 {
        (0..=cap).map(|k| other.coeff(k) - self.coeff(k)).min().unwrap_or(0)
    }

    pub fn equal_upto(&self, other: &Poly, cap: usize) -> bool {
        (0..=cap).all(|k| self.coeff(k) == other.coeff(k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_evaluation() {
        let a = Poly(vec![1, 1]);
        let sq = a.mul_trunc(&a, 10);
        assert_eq!(sq, Poly(vec![1, 2, 1]));
        assert_eq!(a.mul_trunc(&a, 1), Poly(vec![1, 2]));
        let half = BigRational::new(1.into(), 2.into());
        assert_eq!(sq.eval(&half), BigRational::new(9.into(), 4.into()));
    }
}
