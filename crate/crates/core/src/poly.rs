//! Dense univariate polynomials over an exact ring, used for pairing
//! values in a formal variable s and for fraction-free elimination over
//! integer polynomials.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Zero};

/// Coefficients in ascending degree with no trailing zeros.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Poly<T> {
    coeffs: Vec<T>,
}

impl<T: Zero + Clone> Poly<T> {
    pub fn from_coeffs(mut coeffs: Vec<T>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn constant(c: T) -> Self {
        Poly::from_coeffs(vec![c])
    }

    /// c * s^deg
    pub fn monomial(c: T, deg: usize) -> Self {
        if c.is_zero() {
            return Poly::zero();
        }
        let mut coeffs = vec![T::zero(); deg + 1];
        coeffs[deg] = c;
        Poly { coeffs }
    }

    /// The variable s.
    pub fn var() -> Self
    where
        T: One,
    {
        Poly::monomial(T::one(), 1)
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    /// Coefficient of s^i (zero beyond the degree).
    pub fn coeff(&self, i: usize) -> T {
        self.coeffs.get(i).cloned().unwrap_or_else(T::zero)
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn leading(&self) -> Option<&T> {
        self.coeffs.last()
    }

    pub fn map<U: Zero + Clone>(&self, f: impl Fn(&T) -> U) -> Poly<U> {
        Poly::from_coeffs(self.coeffs.iter().map(f).collect())
    }

    /// Horner evaluation at x.
    pub fn eval(&self, x: &T) -> T
    where
        T: Mul<Output = T> + Add<Output = T>,
    {
        let mut acc = T::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x.clone() + c.clone();
        }
        acc
    }

    /// Multiply by s^k.
    pub fn shift(&self, k: usize) -> Self {
        if self.coeffs.is_empty() {
            return Poly::zero();
        }
        let mut coeffs = vec![T::zero(); k];
        coeffs.extend(self.coeffs.iter().cloned());
        Poly { coeffs }
    }
}

impl<T: Zero + Clone> Zero for Poly<T> {
    fn zero() -> Self {
        Poly { coeffs: vec![] }
    }

    fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }
}

impl<T: Zero + One + Clone + PartialEq> One for Poly<T> {
    fn one() -> Self {
        Poly::constant(T::one())
    }

    fn is_one(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0].is_one()
    }
}

impl<T: Zero + Clone> Add for Poly<T> {
    type Output = Poly<T>;

    fn add(self, rhs: Poly<T>) -> Poly<T> {
        let (mut long, short) = if self.coeffs.len() >= rhs.coeffs.len() {
            (self.coeffs, rhs.coeffs)
        } else {
            (rhs.coeffs, self.coeffs)
        };
        for (i, c) in short.into_iter().enumerate() {
            let sum = long[i].clone() + c;
            long[i] = sum;
        }
        Poly::from_coeffs(long)
    }
}

impl<T: Zero + Clone + Neg<Output = T>> Sub for Poly<T> {
    type Output = Poly<T>;

    fn sub(self, rhs: Poly<T>) -> Poly<T> {
        self + (-rhs)
    }
}

impl<T: Zero + Clone + Neg<Output = T>> Neg for Poly<T> {
    type Output = Poly<T>;

    fn neg(self) -> Poly<T> {
        Poly { coeffs: self.coeffs.into_iter().map(Neg::neg).collect() }
    }
}

impl<T> Mul for Poly<T>
where
    T: Zero + Clone + Mul<Output = T>,
{
    type Output = Poly<T>;

    fn mul(self, rhs: Poly<T>) -> Poly<T> {
        if self.coeffs.is_empty() || rhs.coeffs.is_empty() {
            return Poly::zero();
        }
        let mut out = vec![T::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                let prod = a.clone() * b.clone();
                let sum = out[i + j].clone() + prod;
                out[i + j] = sum;
            }
        }
        Poly::from_coeffs(out)
    }
}

impl<T> Poly<T>
where
    T: Zero + Clone + Mul<Output = T> + Neg<Output = T> + PartialEq,
{
    /// Exact polynomial division: returns q with self = q * d, or None when
    /// no such quotient exists over the coefficient ring. `coeff_div` must
    /// perform exact coefficient division (None on non-divisibility).
    pub fn exact_div_by(
        &self,
        d: &Poly<T>,
        coeff_div: impl Fn(&T, &T) -> Option<T>,
    ) -> Option<Poly<T>> {
        if d.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(Poly::zero());
        }
        let (dn, dd) = (self.coeffs.len() - 1, d.coeffs.len() - 1);
        if dn < dd {
            return None;
        }
        let mut rem = self.coeffs.clone();
        let mut q = vec![T::zero(); dn - dd + 1];
        let dlead = &d.coeffs[dd];
        for k in (0..q.len()).rev() {
            let top = rem[k + dd].clone();
            if top.is_zero() {
                continue;
            }
            let qk = coeff_div(&top, dlead)?;
            for (i, dc) in d.coeffs.iter().enumerate() {
                let sub = qk.clone() * dc.clone();
                let cur = rem[k + i].clone();
                rem[k + i] = cur + (-sub);
            }
            q[k] = qk;
        }
        if rem.iter().all(Zero::is_zero) {
            Some(Poly::from_coeffs(q))
        } else {
            None
        }
    }
}

impl<T: fmt::Display + Zero> fmt::Display for Poly<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match i {
                0 => write!(f, "{c}")?,
                1 => write!(f, "({c})*s")?,
                _ => write!(f, "({c})*s^{i}")?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Int;
    use num_integer::Integer;

    fn p(v: &[i64]) -> Poly<Int> {
        Poly::from_coeffs(v.iter().map(|&x| Int::from(x)).collect())
    }

    fn int_div(a: &Int, b: &Int) -> Option<Int> {
        let (q, r) = a.div_rem(b);
        r.is_zero().then_some(q)
    }

    #[test]
    fn arithmetic() {
        let a = p(&[1, 2]);
        let b = p(&[3, 0, 1]);
        assert_eq!(a.clone() + b.clone(), p(&[4, 2, 1]));
        assert_eq!(a.clone() * b.clone(), p(&[3, 6, 1, 2]));
        assert_eq!(b.clone() - b.clone(), Poly::zero());
        assert_eq!(a.eval(&Int::from(10)), Int::from(21));
    }

    #[test]
    fn trailing_zeros_normalized() {
        assert_eq!(p(&[1, 0, 0]), p(&[1]));
        assert_eq!(p(&[0, 0]), Poly::zero());
        assert_eq!(p(&[5]).degree(), Some(0));
        assert_eq!(Poly::<Int>::zero().degree(), None);
    }

    #[test]
    fn exact_division() {
        let a = p(&[-1, 0, 0, 0, 1]); // s^4 - 1
        let d = p(&[-1, 0, 1]); // s^2 - 1
        assert_eq!(a.exact_div_by(&d, int_div), Some(p(&[1, 0, 1])));
        let nd = p(&[1, 1]);
        assert_eq!(p(&[1, 0, 1]).exact_div_by(&nd, int_div), None);
        // Exactness must hold over the coefficients too.
        assert_eq!(p(&[2, 2]).exact_div_by(&p(&[2]), int_div), Some(p(&[1, 1])));
        assert_eq!(p(&[1, 2]).exact_div_by(&p(&[2]), int_div), None);
    }

    #[test]
    fn display_reads_descending() {
        assert_eq!(p(&[4, -1, 0, 2]).to_string(), "(2)*s^3 + (-1)*s + 4");
        assert_eq!(Poly::<Int>::zero().to_string(), "0");
    }
}
