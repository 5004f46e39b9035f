#![allow(dead_code)]

use num_bigint::BigInt;
use padic_cf::{Rational, Threshold};

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

/// `p^e` for any integer `e`.
pub fn ppow(p: u64, e: i64) -> Rational {
    let mag = Rational::from_integer(BigInt::from(p).pow(e.unsigned_abs() as u32));
    if e >= 0 {
        mag
    } else {
        mag.recip()
    }
}

/// Mass of the one-dimensional branches of `T_l` with `iota > p^e`.
///
/// `k = 0, v in J_j` has `iota = p^(2j)` and mass `(p-1) p^-j`;
/// `k >= 1, v in J_l` has `iota = p^(k+2l)` and mass `(p-1) p^(-l-k)`.
/// Both tails are geometric.
pub fn tail_1d(p: u64, l: Threshold, e: i64) -> Rational {
    match l {
        Threshold::Infinite => ppow(p, -(e / 2)),
        Threshold::Finite(l) => {
            let l = l as i64;
            // k = 0 classes with 2j > e, j <= l
            let first_j = e / 2 + 1;
            let low = if first_j <= l {
                ppow(p, -(first_j - 1)) - ppow(p, -l)
            } else {
                Rational::from_integer(0.into())
            };
            // k >= max(1, e - 2l + 1)
            let k0 = (e - 2 * l + 1).max(1);
            low + ppow(p, -l - k0 + 1)
        }
    }
}

/// Mass of the `T_{inf,m}` branches with `iota > p^e`: every branch at
/// pivot valuation `D` has `iota = p^((m+1)D)`, `(p-1) p^(mD)` of them.
pub fn tail_jacobi_perron(p: u64, m: usize, e: i64) -> Rational {
    ppow(p, -(e / (m as i64 + 1)))
}
