//! Sparse multivariate polynomials with pluggable coefficient rings.
//!
//! Terms are kept sorted in descending graded-lexicographic order with no
//! zero coefficients, so the representation is canonical and serialization
//! is deterministic.

use smallvec::SmallVec;
use std::cmp::Ordering;

/// Exponent vector.  Compared by total degree first, then lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mono(pub SmallVec<[u16; 12]>);

impl Mono {
    pub fn unit(nvars: usize) -> Self {
        Mono(std::iter::repeat(0).take(nvars).collect())
    }

    pub fn var(nvars: usize, v: usize) -> Self {
        let mut m = Self::unit(nvars);
        m.0[v] = 1;
        m
    }

    pub fn var_pow(nvars: usize, v: usize, e: u16) -> Self {
        let mut m = Self::unit(nvars);
        m.0[v] = e;
        m
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&e| e as u32).sum()
    }

    pub fn mul(&self, o: &Mono) -> Mono {
        Mono(
            self.0
                .iter()
                .zip(&o.0)
                .map(|(&a, &b)| a.checked_add(b).expect("exponent overflow"))
                .collect(),
        )
    }

    pub fn pow(&self, k: u16) -> Mono {
        Mono(self.0.iter().map(|&a| a.checked_mul(k).expect("exponent overflow")).collect())
    }

    pub fn is_unit(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }
}

impl Ord for Mono {
    fn cmp(&self, o: &Self) -> Ordering {
        self.degree().cmp(&o.degree()).then_with(|| self.0.cmp(&o.0))
    }
}

impl PartialOrd for Mono {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Coefficient ring interface; implementations carry the modulus/context.
pub trait CoeffRing {
    type Elem: Clone + PartialEq + std::fmt::Debug;
    fn c_zero(&self) -> Self::Elem;
    fn c_one(&self) -> Self::Elem;
    fn c_is_zero(&self, a: &Self::Elem) -> bool;
    fn c_add(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn c_sub(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn c_mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn c_neg(&self, a: &Self::Elem) -> Self::Elem;
    fn c_to_string(&self, a: &Self::Elem) -> String;
}

impl CoeffRing for crate::padic::BaseContext {
    type Elem = crate::padic::PadicScalar;
    fn c_zero(&self) -> Self::Elem {
        self.zero()
    }
    fn c_one(&self) -> Self::Elem {
        self.one()
    }
    fn c_is_zero(&self, a: &Self::Elem) -> bool {
        self.is_zero(a)
    }
    fn c_add(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem {
        self.add(a, b)
    }
    fn c_sub(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem {
        self.sub(a, b)
    }
    fn c_mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem {
        self.mul(a, b)
    }
    fn c_neg(&self, a: &Self::Elem) -> Self::Elem {
        self.neg(a)
    }
    fn c_to_string(&self, a: &Self::Elem) -> String {
        self.scalar_to_string(a)
    }
}

/// Exact integers, for the characteristic-zero modules.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IntRing;

impl CoeffRing for IntRing {
    type Elem = num_bigint::BigInt;
    fn c_zero(&self) -> Self::Elem {
        num_bigint::BigInt::from(0)
    }
    fn c_one(&self) -> Self::Elem {
        num_bigint::BigInt::from(1)
    }
    fn c_is_zero(&self, a: &Self::Elem) -> bool {
        use num_traits::Zero;
        a.is_zero()
    }
    fn c_add(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem {
        a + b
    }
    fn c_sub(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem {
        a - b
    }
    fn c_mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem {
        a * b
    }
    fn c_neg(&self, a: &Self::Elem) -> Self::Elem {
        -a
    }
    fn c_to_string(&self, a: &Self::Elem) -> String {
        a.to_string()
    }
}

/// Sparse polynomial: terms sorted descending, no zero coefficients.
#[derive(Debug)]
pub struct MPoly<R: CoeffRing> {
    pub nvars: usize,
    pub terms: Vec<(Mono, R::Elem)>,
}

impl<R: CoeffRing> Clone for MPoly<R> {
    fn clone(&self) -> Self {
        MPoly { nvars: self.nvars, terms: self.terms.clone() }
    }
}

impl<R: CoeffRing> PartialEq for MPoly<R> {
    fn eq(&self, o: &Self) -> bool {
        self.nvars == o.nvars && self.terms == o.terms
    }
}

impl<R: CoeffRing> Eq for MPoly<R> where R::Elem: Eq {}

impl<R: CoeffRing> MPoly<R> {
    pub fn zero(nvars: usize) -> Self {
        MPoly { nvars, terms: vec![] }
    }

    pub fn constant(nvars: usize, ring: &R, c: R::Elem) -> Self {
        if ring.c_is_zero(&c) {
            Self::zero(nvars)
        } else {
            MPoly { nvars, terms: vec![(Mono::unit(nvars), c)] }
        }
    }

    pub fn one(nvars: usize, ring: &R) -> Self {
        Self::constant(nvars, ring, ring.c_one())
    }

    pub fn var(nvars: usize, ring: &R, v: usize) -> Self {
        MPoly { nvars, terms: vec![(Mono::var(nvars, v), ring.c_one())] }
    }

    pub fn monomial(nvars: usize, m: Mono, c: R::Elem) -> Self {
        MPoly { nvars, terms: vec![(m, c)] }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.len() <= 1 && self.terms.iter().all(|(m, _)| m.is_unit())
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|(m, _)| m.degree()).max().unwrap_or(0)
    }

    /// Collect raw (monomial, coefficient) pairs into canonical form.
    pub fn from_raw(nvars: usize, ring: &R, mut raw: Vec<(Mono, R::Elem)>) -> Self {
        raw.sort_unstable_by(|a, b| b.0.cmp(&a.0));
        let mut terms: Vec<(Mono, R::Elem)> = Vec::with_capacity(raw.len());
        for (m, c) in raw {
            match terms.last_mut() {
                Some((lm, lc)) if *lm == m => {
                    *lc = ring.c_add(lc, &c);
                }
                _ => terms.push((m, c)),
            }
        }
        terms.retain(|(_, c)| !ring.c_is_zero(c));
        MPoly { nvars, terms }
    }

    pub fn add(&self, o: &Self, ring: &R) -> Self {
        let mut out = Vec::with_capacity(self.terms.len() + o.terms.len());
        let (mut i, mut j) = (0, 0);
        while i < self.terms.len() && j < o.terms.len() {
            match self.terms[i].0.cmp(&o.terms[j].0) {
                Ordering::Greater => {
                    out.push(self.terms[i].clone());
                    i += 1;
                }
                Ordering::Less => {
                    out.push(o.terms[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    let c = ring.c_add(&self.terms[i].1, &o.terms[j].1);
                    if !ring.c_is_zero(&c) {
                        out.push((self.terms[i].0.clone(), c));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.terms[i..]);
        out.extend_from_slice(&o.terms[j..]);
        MPoly { nvars: self.nvars, terms: out }
    }

    pub fn neg(&self, ring: &R) -> Self {
        MPoly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), ring.c_neg(c))).collect(),
        }
    }

    pub fn sub(&self, o: &Self, ring: &R) -> Self {
        self.add(&o.neg(ring), ring)
    }

    pub fn mul(&self, o: &Self, ring: &R) -> Self {
        if self.is_zero() || o.is_zero() {
            return Self::zero(self.nvars);
        }
        let mut raw = Vec::with_capacity(self.terms.len() * o.terms.len());
        for (ma, ca) in &self.terms {
            for (mb, cb) in &o.terms {
                let c = ring.c_mul(ca, cb);
                if !ring.c_is_zero(&c) {
                    raw.push((ma.mul(mb), c));
                }
            }
        }
        Self::from_raw(self.nvars, ring, raw)
    }

    pub fn mul_scalar(&self, c: &R::Elem, ring: &R) -> Self {
        let terms: Vec<_> = self
            .terms
            .iter()
            .filter_map(|(m, a)| {
                let v = ring.c_mul(a, c);
                if ring.c_is_zero(&v) {
                    None
                } else {
                    Some((m.clone(), v))
                }
            })
            .collect();
        MPoly { nvars: self.nvars, terms }
    }

    pub fn mul_mono(&self, m: &Mono) -> Self {
        MPoly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(t, c)| (t.mul(m), c.clone())).collect(),
        }
    }

    pub fn pow(&self, e: u32, ring: &R) -> Self {
        let mut r = Self::one(self.nvars, ring);
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                r = r.mul(&base, ring);
            }
            e >>= 1;
            if e > 0 {
                let sq = base.mul(&base, ring);
                base = sq;
            }
        }
        r
    }

    pub fn map_coeffs<F: Fn(&R::Elem) -> R::Elem>(&self, ring: &R, f: F) -> Self {
        let terms: Vec<_> = self
            .terms
            .iter()
            .filter_map(|(m, c)| {
                let v = f(c);
                if ring.c_is_zero(&v) {
                    None
                } else {
                    Some((m.clone(), v))
                }
            })
            .collect();
        MPoly { nvars: self.nvars, terms }
    }

    /// Evaluate at a point (one ring element per variable).
    pub fn eval(&self, point: &[R::Elem], ring: &R) -> R::Elem {
        let mut maxe = vec![0u16; self.nvars];
        for (m, _) in &self.terms {
            for (v, &e) in m.0.iter().enumerate() {
                maxe[v] = maxe[v].max(e);
            }
        }
        let mut pows: Vec<Vec<R::Elem>> = Vec::with_capacity(self.nvars);
        for v in 0..self.nvars {
            let mut pv = vec![ring.c_one()];
            for k in 1..=maxe[v] as usize {
                let prev = pv[k - 1].clone();
                pv.push(ring.c_mul(&prev, &point[v]));
            }
            pows.push(pv);
        }
        let mut acc = ring.c_zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (v, &e) in m.0.iter().enumerate() {
                if e > 0 {
                    t = ring.c_mul(&t, &pows[v][e as usize]);
                }
            }
            acc = ring.c_add(&acc, &t);
        }
        acc
    }

    /// Substitute each variable by a polynomial (in a possibly different
    /// variable set), with coefficients mapped through `cmap`.
    pub fn subst<F: Fn(&R::Elem) -> R::Elem>(
        &self,
        images: &[MPoly<R>],
        out_nvars: usize,
        ring: &R,
        cmap: F,
    ) -> MPoly<R> {
        let mut maxe = vec![0u16; self.nvars];
        for (m, _) in &self.terms {
            for (v, &e) in m.0.iter().enumerate() {
                maxe[v] = maxe[v].max(e);
            }
        }
        let mut pows: Vec<Vec<MPoly<R>>> = Vec::with_capacity(self.nvars);
        for v in 0..self.nvars {
            let mut pv = vec![MPoly::one(out_nvars, ring)];
            for k in 1..=maxe[v] as usize {
                let prev = pv[k - 1].clone();
                pv.push(prev.mul(&images[v], ring));
            }
            pows.push(pv);
        }
        let mut acc = MPoly::zero(out_nvars);
        for (m, c) in &self.terms {
            let mut t = MPoly::constant(out_nvars, ring, cmap(c));
            for (v, &e) in m.0.iter().enumerate() {
                if e > 0 {
                    t = t.mul(&pows[v][e as usize], ring);
                }
            }
            acc = acc.add(&t, ring);
        }
        acc
    }

    pub fn to_string_with(&self, names: &[String], ring: &R) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut parts = Vec::with_capacity(self.terms.len());
        for (m, c) in &self.terms {
            let mut factors: Vec<String> = Vec::new();
            let cs = ring.c_to_string(c);
            if cs != "1" || m.is_unit() {
                factors.push(cs);
            }
            for (v, &e) in m.0.iter().enumerate() {
                if e == 1 {
                    factors.push(names[v].clone());
                } else if e > 1 {
                    factors.push(format!("{}^{}", names[v], e));
                }
            }
            parts.push(factors.join("*"));
        }
        parts.join(" + ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::BaseContext;

    #[test]
    fn graded_lex_order() {
        let a = Mono(smallvec::smallvec![1, 0, 0, 1]); // x11 x22
        let b = Mono(smallvec::smallvec![0, 1, 1, 0]); // x12 x21
        assert!(a > b);
        let c = Mono(smallvec::smallvec![3, 0, 0, 0]);
        assert!(c > a); // higher degree wins
    }

    #[test]
    fn arithmetic_basics() {
        let ctx = BaseContext::rational(5, 2).unwrap();
        let x = MPoly::var(2, &ctx, 0);
        let y = MPoly::var(2, &ctx, 1);
        let f = x.add(&y, &ctx);
        let f5 = f.pow(5, &ctx);
        // (x+y)^5 has all 6 terms mod 25 (binomials vanish only mod 5)
        assert_eq!(f5.num_terms(), 6);
        let g = f.mul(&f, &ctx);
        let g_direct = x.mul(&x, &ctx).add(&y.mul(&y, &ctx), &ctx).add(
            &x.mul(&y, &ctx).mul_scalar(&ctx.from_u64(2), &ctx),
            &ctx,
        );
        assert_eq!(g, g_direct);
        assert!(f.sub(&f, &ctx).is_zero());
    }

    #[test]
    fn eval_and_subst_agree() {
        let ctx = BaseContext::rational(7, 3).unwrap();
        let x = MPoly::var(2, &ctx, 0);
        let y = MPoly::var(2, &ctx, 1);
        let f = x.pow(3, &ctx).add(&y.mul_scalar(&ctx.from_u64(4), &ctx), &ctx);
        let imgs = vec![y.pow(2, &ctx), x.add(&MPoly::one(2, &ctx), &ctx)];
        let g = f.subst(&imgs, 2, &ctx, |c| c.clone());
        let pt = [ctx.from_u64(3), ctx.from_u64(5)];
        let lhs = g.eval(&pt, &ctx);
        let img_pt = [imgs[0].eval(&pt, &ctx), imgs[1].eval(&pt, &ctx)];
        let rhs = f.eval(&img_pt, &ctx);
        assert_eq!(lhs, rhs);
    }
}
