//! Exact rational scalars. Every coefficient in the crate is a `Rat`; no
//! floating point is used anywhere.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Rat = BigRational;

pub fn rat_i64(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_zero() -> Rat {
    Rat::zero()
}

pub fn rat_one() -> Rat {
    Rat::one()
}

pub fn factorial(n: u32) -> Rat {
    let mut acc = BigInt::one();
    for k in 2..=n as u64 {
        acc *= k;
    }
    Rat::from_integer(acc)
}

pub fn binomial(n: u32, k: u32) -> Rat {
    if k > n {
        return Rat::zero();
    }
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for j in 0..k as u64 {
        num *= n as u64 - j;
        den *= j + 1;
    }
    Rat::new(num, den)
}

/// Odd double factorial (2k-1)!!, with (-1)!! = 1.
pub fn odd_double_factorial(k: i64) -> Rat {
    let mut acc = BigInt::one();
    let mut m = 2 * k - 1;
    while m >= 2 {
        acc *= m;
        m -= 2;
    }
    Rat::from_integer(acc)
}

/// Renders as `p` or `p/q`, the exact text format used by all serializers.
pub fn rat_to_string(x: &Rat) -> String {
    if x.denom().is_one() {
        format!("{}", x.numer())
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn rat_from_str(s: &str) -> Option<Rat> {
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.parse().ok()?;
            let q: BigInt = q.parse().ok()?;
            if q.is_zero() {
                return None;
            }
            Some(Rat::new(p, q))
        }
        None => {
            let p: BigInt = s.parse().ok()?;
            Some(Rat::from_integer(p))
        }
    }
}

pub fn is_negative(x: &Rat) -> bool {
    x.is_negative()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorials_and_binomials() {
        assert_eq!(factorial(0), rat_i64(1));
        assert_eq!(factorial(5), rat_i64(120));
        assert_eq!(binomial(7, 3), rat_i64(35));
        assert_eq!(binomial(3, 7), rat_i64(0));
        assert_eq!(odd_double_factorial(0), rat_i64(1));
        assert_eq!(odd_double_factorial(1), rat_i64(1));
        assert_eq!(odd_double_factorial(3), rat_i64(15));
    }

    #[test]
    fn string_round_trip() {
        for s in ["3", "-7/12", "0", "1/24"] {
            let x = rat_from_str(s).unwrap();
            assert_eq!(rat_to_string(&x), s);
        }
    }
}
