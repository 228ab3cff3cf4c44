//! Exact arithmetic in ℤ[ζ_M], the value domain of every character and class
//! function in the workbench. Elements are integer coordinate vectors modulo
//! the M-th cyclotomic polynomial Φ_M, so the reduced form is canonical and
//! equality is coefficient equality.

use crate::error::{Error, Result};
use smallvec::SmallVec;

type C = SmallVec<[i64; 8]>;

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct CycInt {
    pub c: C,
}

pub struct CycCtx {
    pub m: u64,
    pub phi: usize,
    /// Φ_M, monic, length phi+1
    pub cyclo_poly: Vec<i64>,
    /// X^k mod Φ_M for 0 ≤ k < max(M, 2·phi−1)
    pow_rows: Vec<Vec<i64>>,
}

impl CycCtx {
    pub fn new(m: u64) -> CycCtx {
        assert!(m >= 1);
        let cyclo_poly = cyclotomic_poly(m);
        let phi = cyclo_poly.len() - 1;
        let rows_needed = (m as usize).max(2 * phi);
        let mut pow_rows: Vec<Vec<i64>> = Vec::with_capacity(rows_needed);
        for k in 0..rows_needed {
            if k < phi {
                let mut r = vec![0i64; phi];
                r[k] = 1;
                pow_rows.push(r);
            } else {
                // X^k = X·X^{k-1} reduced by Φ (X^phi = −(lower part of Φ))
                let prev = pow_rows[k - 1].clone();
                let mut r = vec![0i64; phi];
                r[1..phi].copy_from_slice(&prev[..phi - 1]);
                let top = prev[phi - 1];
                if top != 0 {
                    for j in 0..phi {
                        r[j] -= top * cyclo_poly[j];
                    }
                }
                pow_rows.push(r);
            }
        }
        CycCtx {
            m,
            phi,
            cyclo_poly,
            pow_rows,
        }
    }

    pub fn zero(&self) -> CycInt {
        CycInt {
            c: std::iter::repeat(0).take(self.phi).collect(),
        }
    }
    pub fn from_int(&self, n: i64) -> CycInt {
        let mut z = self.zero();
        z.c[0] = n;
        z
    }
    /// ζ_M^k (k taken mod M); zeta(0) = 1.
    pub fn zeta(&self, k: i64) -> CycInt {
        let kk = k.rem_euclid(self.m as i64) as usize;
        CycInt {
            c: self.pow_rows[kk].iter().copied().collect(),
        }
    }
    pub fn is_zero(&self, z: &CycInt) -> bool {
        z.c.iter().all(|&v| v == 0)
    }
    pub fn add(&self, a: &CycInt, b: &CycInt) -> CycInt {
        let mut c = a.c.clone();
        for (t, v) in c.iter_mut().zip(b.c.iter()) {
            *t += v;
        }
        CycInt { c }
    }
    pub fn add_assign(&self, a: &mut CycInt, b: &CycInt) {
        for (t, v) in a.c.iter_mut().zip(b.c.iter()) {
            *t += v;
        }
    }
    pub fn sub(&self, a: &CycInt, b: &CycInt) -> CycInt {
        let mut c = a.c.clone();
        for (t, v) in c.iter_mut().zip(b.c.iter()) {
            *t -= v;
        }
        CycInt { c }
    }
    pub fn neg(&self, a: &CycInt) -> CycInt {
        CycInt {
            c: a.c.iter().map(|&v| -v).collect(),
        }
    }
    pub fn scale(&self, a: &CycInt, n: i64) -> CycInt {
        CycInt {
            c: a.c.iter().map(|&v| v * n).collect(),
        }
    }
    pub fn mul(&self, a: &CycInt, b: &CycInt) -> CycInt {
        let phi = self.phi;
        let mut prod = vec![0i64; 2 * phi - 1];
        for i in 0..phi {
            let av = a.c[i];
            if av == 0 {
                continue;
            }
            for j in 0..phi {
                prod[i + j] += av * b.c[j];
            }
        }
        let mut out = self.zero();
        for (k, &v) in prod.iter().enumerate() {
            if v == 0 {
                continue;
            }
            if k < phi {
                out.c[k] += v;
            } else {
                let row = &self.pow_rows[k];
                for j in 0..phi {
                    out.c[j] += v * row[j];
                }
            }
        }
        out
    }
    /// Multiply by ζ_M^k (cheap shift through the power table).
    pub fn mul_zeta(&self, a: &CycInt, k: i64) -> CycInt {
        let kk = k.rem_euclid(self.m as i64) as usize;
        let mut out = self.zero();
        for (i, &v) in a.c.iter().enumerate() {
            if v == 0 {
                continue;
            }
            let row = &self.pow_rows[(i + kk) % self.m as usize];
            for j in 0..self.phi {
                out.c[j] += v * row[j];
            }
        }
        out
    }
    /// Complex conjugation ζ ↦ ζ^{−1}.
    pub fn conj(&self, a: &CycInt) -> CycInt {
        let m = self.m as usize;
        let mut out = self.zero();
        for (i, &v) in a.c.iter().enumerate() {
            if v == 0 {
                continue;
            }
            let row = &self.pow_rows[(m - i) % m];
            for j in 0..self.phi {
                out.c[j] += v * row[j];
            }
        }
        out
    }
    pub fn as_integer(&self, a: &CycInt) -> Result<i64> {
        if a.c[1..].iter().any(|&v| v != 0) {
            return Err(Error::NotAnInteger);
        }
        Ok(a.c[0])
    }
    pub fn div_exact(&self, a: &CycInt, n: i64) -> Result<CycInt> {
        assert!(n != 0);
        let mut c = a.c.clone();
        for v in c.iter_mut() {
            if *v % n != 0 {
                return Err(Error::InexactDivision);
            }
            *v /= n;
        }
        Ok(CycInt { c })
    }

    pub fn format(&self, a: &CycInt) -> String {
        if self.is_zero(a) {
            return "0".to_string();
        }
        let mut parts = Vec::new();
        for (i, &v) in a.c.iter().enumerate() {
            if v == 0 {
                continue;
            }
            let term = if i == 0 {
                format!("{v}")
            } else if i == 1 {
                format!("{v}*z{}", self.m)
            } else {
                format!("{v}*z{}^{i}", self.m)
            };
            parts.push(term);
        }
        parts.join(" + ").replace("+ -", "- ")
    }
}

/// Φ_M by the recursive quotient of X^M − 1 by the Φ_d for proper divisors d.
fn cyclotomic_poly(m: u64) -> Vec<i64> {
    if m == 1 {
        return vec![-1, 1];
    }
    let mut num = vec![0i64; m as usize + 1];
    num[0] = -1;
    num[m as usize] = 1;
    let mut acc = num;
    for d in 1..m {
        if m % d == 0 {
            let phi_d = cyclotomic_poly(d);
            acc = int_poly_div_exact(&acc, &phi_d);
        }
    }
    acc
}

/// Exact division of integer polynomials (panics on nonzero remainder,
/// which cannot happen for cyclotomic quotients).
fn int_poly_div_exact(a: &[i64], b: &[i64]) -> Vec<i64> {
    let mut r: Vec<i64> = a.to_vec();
    let db = b.len() - 1;
    assert_eq!(b[db], 1, "divisor must be monic");
    let dq = r.len() - 1 - db;
    let mut q = vec![0i64; dq + 1];
    for k in (0..=dq).rev() {
        let c = r[k + db];
        q[k] = c;
        if c != 0 {
            for i in 0..=db {
                r[k + i] -= c * b[i];
            }
        }
    }
    assert!(r.iter().all(|&v| v == 0), "inexact cyclotomic division");
    q
}

/// Exact rational with a small reduced representation.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Rat {
    pub num: i64,
    pub den: u64,
}

impl Rat {
    pub fn new(num: i64, den: u64) -> Rat {
        assert!(den != 0);
        let g = gcd_u64(num.unsigned_abs(), den);
        if g <= 1 {
            return Rat { num, den };
        }
        Rat {
            num: num / g as i64,
            den: den / g,
        }
    }
    pub fn integer(n: i64) -> Rat {
        Rat { num: n, den: 1 }
    }
    pub fn is_integer(&self) -> bool {
        self.den == 1
    }
    pub fn as_integer(&self) -> Result<i64> {
        if self.den == 1 {
            Ok(self.num)
        } else {
            Err(Error::NotAnInteger)
        }
    }
}

impl std::fmt::Display for Rat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

fn gcd_u64(a: u64, b: u64) -> u64 {
    let (mut a, mut b) = (a, b);
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cyclotomic_polys_known() {
        assert_eq!(cyclotomic_poly(1), vec![-1, 1]);
        assert_eq!(cyclotomic_poly(2), vec![1, 1]);
        assert_eq!(cyclotomic_poly(3), vec![1, 1, 1]);
        assert_eq!(cyclotomic_poly(4), vec![1, 0, 1]);
        assert_eq!(cyclotomic_poly(6), vec![1, -1, 1]);
        assert_eq!(cyclotomic_poly(12), vec![1, 0, -1, 0, 1]);
        // φ(72) = 24
        assert_eq!(cyclotomic_poly(72).len() - 1, 24);
    }

    #[test]
    fn zeta_basics() {
        let cx = CycCtx::new(24);
        assert_eq!(cx.zeta(0), cx.from_int(1));
        // ζ_M^k · ζ_M^{M−k} = 1
        for k in 0..24 {
            let z = cx.mul(&cx.zeta(k), &cx.zeta(24 - k));
            assert_eq!(cx.as_integer(&z).unwrap(), 1);
        }
        // 1 + ζ_3 + ζ_3² = 0 inside ℤ[ζ_24] (ζ_3 = ζ_24^8)
        let s = cx.add(&cx.add(&cx.zeta(0), &cx.zeta(8)), &cx.zeta(16));
        assert!(cx.is_zero(&s));
        // full p-th root sum vanishes
        let cx3 = CycCtx::new(3);
        let mut s = cx3.zero();
        for k in 0..3 {
            s = cx3.add(&s, &cx3.zeta(k));
        }
        assert_eq!(cx3.as_integer(&s).unwrap(), 0);
        // ζ_p alone is not an integer
        assert!(cx3.as_integer(&cx3.zeta(1)).is_err());
        // 5·1 is
        assert_eq!(cx3.as_integer(&cx3.scale(&cx3.zeta(0), 5)).unwrap(), 5);
    }

    #[test]
    fn conjugation_is_inverse_root() {
        let cx = CycCtx::new(72);
        for k in 0..72 {
            assert_eq!(cx.conj(&cx.zeta(k)), cx.zeta(-k));
        }
    }

    proptest! {
        #[test]
        fn ring_axioms(av in proptest::collection::vec(-5i64..6, 8),
                       bv in proptest::collection::vec(-5i64..6, 8),
                       cv in proptest::collection::vec(-5i64..6, 8)) {
            let cx = CycCtx::new(24);
            let lift = |v: &Vec<i64>| {
                let mut z = cx.zero();
                for (i, &x) in v.iter().enumerate() { z.c[i] = x; }
                z
            };
            let (a, b, c) = (lift(&av), lift(&bv), lift(&cv));
            prop_assert_eq!(cx.mul(&a, &b), cx.mul(&b, &a));
            prop_assert_eq!(cx.mul(&cx.mul(&a, &b), &c), cx.mul(&a, &cx.mul(&b, &c)));
            prop_assert_eq!(cx.mul(&a, &cx.add(&b, &c)),
                            cx.add(&cx.mul(&a, &b), &cx.mul(&a, &c)));
            // conjugation is a ring automorphism and an involution
            prop_assert_eq!(cx.conj(&cx.conj(&a)), a.clone());
            prop_assert_eq!(cx.conj(&cx.mul(&a, &b)), cx.mul(&cx.conj(&a), &cx.conj(&b)));
            prop_assert_eq!(cx.conj(&cx.add(&a, &b)), cx.add(&cx.conj(&a), &cx.conj(&b)));
        }
    }

    #[test]
    fn rat_reduces() {
        let r = Rat::new(6, 4);
        assert_eq!(r, Rat { num: 3, den: 2 });
        assert!(Rat::new(8, 4).is_integer());
        assert_eq!(Rat::new(-9, 3).as_integer().unwrap(), -3);
    }
}
