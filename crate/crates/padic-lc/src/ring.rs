//! Exact arithmetic in `O[x, det(x)^-1] mod p^N` and its relatives.
//!
//! Elements are stored as a polynomial numerator together with a power of
//! the denominator generator (`det(x)` over `GL_n`, `alpha^2 + beta^2` on
//! the complexified `GL_1`, `z_1 ... z_n` on the torus).  Representations
//! are not canonical but equality testing is exact: the generator reduces
//! to a nonzero element of a domain mod p, hence is a non-zerodivisor mod
//! `p^N`, so cross-multiplied numerators can be compared directly.

use crate::error::{EngineError, Result};
use crate::padic::{BaseContext, PadicScalar};
use crate::poly::{CoeffRing, MPoly, Mono};

pub type Poly = MPoly<BaseContext>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RingMode {
    /// `O[x_{ij}, det(x)^-1]`, `n x n` matrix of indeterminates.
    Gl { n: usize },
    /// `O[alpha, beta, (alpha^2+beta^2)^-1]`.
    Conformal,
    /// `O[z_1, ..., z_n, (z_1...z_n)^-1]`.
    Torus { n: usize },
}

/// Coordinate ring context; all element operations live here.
#[derive(Debug, Clone)]
pub struct CoordRing {
    pub base: BaseContext,
    pub mode: RingMode,
    pub nvars: usize,
    pub names: Vec<String>,
    det: Poly,
}

/// Element `num * det^(-det_exp)` of the localized ring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingElem {
    pub num: Poly,
    pub det_exp: u32,
}

impl CoordRing {
    pub fn gl(base: BaseContext, n: usize) -> Self {
        let nvars = n * n;
        let names = (0..n)
            .flat_map(|i| (0..n).map(move |j| format!("x{}{}", i + 1, j + 1)))
            .collect();
        let det = det_of_vars(&base, n);
        CoordRing { base, mode: RingMode::Gl { n }, nvars, names, det }
    }

    pub fn conformal(base: BaseContext) -> Self {
        let names = vec!["a".to_string(), "b".to_string()];
        let a = Poly::var(2, &base, 0);
        let b = Poly::var(2, &base, 1);
        let det = a.mul(&a, &base).add(&b.mul(&b, &base), &base);
        CoordRing { base, mode: RingMode::Conformal, nvars: 2, names, det }
    }

    pub fn torus(base: BaseContext, n: usize) -> Self {
        let names = (0..n).map(|i| format!("z{}", i + 1)).collect();
        let m = Mono(std::iter::repeat(1u16).take(n).collect());
        let det = Poly::monomial(n, m, base.one());
        CoordRing { base, mode: RingMode::Torus { n }, nvars: n, names, det }
    }

    pub fn matrix_dim(&self) -> usize {
        match self.mode {
            RingMode::Gl { n } => n,
            RingMode::Conformal => 2,
            RingMode::Torus { n } => n,
        }
    }

    pub fn det_poly(&self) -> &Poly {
        &self.det
    }

    pub fn same_ring(&self, other: &CoordRing) -> bool {
        self.base == other.base && self.mode == other.mode
    }

    pub fn lower_precision(&self, drop: u32) -> Result<CoordRing> {
        let base = self.base.lower(drop)?;
        Ok(match self.mode {
            RingMode::Gl { n } => CoordRing::gl(base, n),
            RingMode::Conformal => CoordRing::conformal(base),
            RingMode::Torus { n } => CoordRing::torus(base, n),
        })
    }

    pub fn reduce_from(&self, e: &RingElem) -> RingElem {
        let num = Poly {
            nvars: e.num.nvars,
            terms: e
                .num
                .terms
                .iter()
                .filter_map(|(m, c)| {
                    let r = self.base.reduce_from(c);
                    if self.base.is_zero(&r) {
                        None
                    } else {
                        Some((m.clone(), r))
                    }
                })
                .collect(),
        };
        RingElem { num, det_exp: e.det_exp }
    }

    // ------------------------------ constructors ------------------------------

    pub fn zero(&self) -> RingElem {
        RingElem { num: Poly::zero(self.nvars), det_exp: 0 }
    }

    pub fn one(&self) -> RingElem {
        RingElem { num: Poly::one(self.nvars, &self.base), det_exp: 0 }
    }

    pub fn from_scalar(&self, c: PadicScalar) -> RingElem {
        RingElem { num: Poly::constant(self.nvars, &self.base, c), det_exp: 0 }
    }

    pub fn from_u64(&self, v: u64) -> RingElem {
        self.from_scalar(self.base.from_u64(v))
    }

    pub fn from_i64(&self, v: i64) -> RingElem {
        self.from_scalar(self.base.from_i64(v))
    }

    pub fn var(&self, v: usize) -> RingElem {
        RingElem { num: Poly::var(self.nvars, &self.base, v), det_exp: 0 }
    }

    /// Variable index of `x_{ij}` (0-based i, j) in `Gl` mode.
    pub fn xv(&self, i: usize, j: usize) -> usize {
        let RingMode::Gl { n } = self.mode else { panic!("xv outside Gl mode") };
        i * n + j
    }

    pub fn det_elem(&self) -> RingElem {
        RingElem { num: self.det.clone(), det_exp: 0 }
    }

    pub fn det_inv_elem(&self) -> RingElem {
        RingElem { num: Poly::one(self.nvars, &self.base), det_exp: 1 }
    }

    // ------------------------------ arithmetic ------------------------------

    pub fn add(&self, a: &RingElem, b: &RingElem) -> RingElem {
        let k = a.det_exp.max(b.det_exp);
        let an = self.scale_to(a, k);
        let bn = self.scale_to(b, k);
        RingElem { num: an.add(&bn, &self.base), det_exp: k }
    }

    pub fn sub(&self, a: &RingElem, b: &RingElem) -> RingElem {
        self.add(a, &self.neg(b))
    }

    pub fn neg(&self, a: &RingElem) -> RingElem {
        RingElem { num: a.num.neg(&self.base), det_exp: a.det_exp }
    }

    fn scale_to(&self, a: &RingElem, k: u32) -> Poly {
        let mut num = a.num.clone();
        for _ in a.det_exp..k {
            num = num.mul(&self.det, &self.base);
        }
        num
    }

    pub fn mul(&self, a: &RingElem, b: &RingElem) -> RingElem {
        RingElem { num: a.num.mul(&b.num, &self.base), det_exp: a.det_exp + b.det_exp }
    }

    pub fn mul_scalar(&self, a: &RingElem, c: &PadicScalar) -> RingElem {
        RingElem { num: a.num.mul_scalar(c, &self.base), det_exp: a.det_exp }
    }

    pub fn mul_u64(&self, a: &RingElem, v: u64) -> RingElem {
        self.mul_scalar(a, &self.base.from_u64(v))
    }

    pub fn pow(&self, a: &RingElem, e: u32) -> RingElem {
        let mut r = self.one();
        let mut base = a.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                r = self.mul(&r, &base);
            }
            e >>= 1;
            if e > 0 {
                base = self.mul(&base, &base);
            }
        }
        r
    }

    pub fn is_zero(&self, a: &RingElem) -> bool {
        a.num.is_zero()
    }

    /// Exact equality in the localization, by cross-multiplying det powers.
    pub fn equals(&self, a: &RingElem, b: &RingElem) -> bool {
        let k = a.det_exp.max(b.det_exp);
        self.scale_to(a, k) == self.scale_to(b, k)
    }

    /// Minimum p-adic valuation over the numerator coefficients.
    pub fn val_p(&self, a: &RingElem) -> u32 {
        a.num.terms.iter().map(|(_, c)| self.base.val_p(c)).min().unwrap_or(self.base.prec)
    }

    /// Exact division by p^k (canonical zero-filled quotient, valid mod
    /// p^(N-k)); errors if some coefficient is not divisible.
    pub fn div_p_exact(&self, a: &RingElem, k: u32) -> Result<RingElem> {
        let mut terms = Vec::with_capacity(a.num.terms.len());
        for (m, c) in &a.num.terms {
            let q = self.base.div_p_exact(c, k)?;
            if !self.base.is_zero(&q) {
                terms.push((m.clone(), q));
            }
        }
        Ok(RingElem { num: Poly { nvars: a.num.nvars, terms }, det_exp: a.det_exp })
    }

    // ------------------------------ units ------------------------------

    /// Invert a unit.  A unit must reduce mod p to `c * det^e` for a unit
    /// constant c; this is verified by repeated exact division by the
    /// denominator generator over the residue field.  The inverse is the
    /// geometric series `c^-1 det^(k-e) sum_{i<N} (-p g)^i` where
    /// `f = c det^(e-k) (1 + p g)`.
    pub fn invert_unit(&self, f: &RingElem) -> Result<RingElem> {
        if f.num.is_zero() {
            return Err(EngineError::NotAUnit("zero element".into()));
        }
        let (c, e) = self.residue_unit_factor(&f.num)?;
        let c_lift = PadicScalar { c: c.c.clone() };
        // u := (num - c det^e) / p
        let cde = self.det.pow(e, &self.base).mul_scalar(&c_lift, &self.base);
        let diff = f.num.sub(&cde, &self.base);
        let g_num = RingElem { num: diff, det_exp: e };
        let g = self.div_p_exact(&g_num, 1)?; // g = (num - c det^e)/p * det^-e, times c^-1 below
        let c_inv = self.base.inv(&c_lift)?;
        let g = self.mul_scalar(&g, &c_inv);
        // series sum_{i<N} (-p g)^i by Horner
        let minus_pg = self.mul_scalar(&self.neg(&g), &self.base.from_u64(self.base.p));
        let mut series = self.one();
        for _ in 1..self.base.prec {
            series = self.add(&self.mul(&series, &minus_pg), &self.one());
        }
        let mut inv = self.mul_scalar(&series, &c_inv);
        // multiply by det^(k - e)
        if f.det_exp >= e {
            let d = self.pow(&self.det_elem(), f.det_exp - e);
            inv = self.mul(&inv, &d);
        } else {
            inv.det_exp += e - f.det_exp;
        }
        debug_assert!(self.equals(&self.mul(f, &inv), &self.one()));
        Ok(inv)
    }

    /// Residue factorization `num mod p = c * det^e`; errors when the
    /// residue is not of that shape.
    fn residue_unit_factor(&self, num: &Poly) -> Result<(PadicScalar, u32)> {
        let rp = if self.base.prec == 1 { self.base.clone() } else { self.base.lower(self.base.prec - 1)? };
        let mut r = Poly {
            nvars: num.nvars,
            terms: num
                .terms
                .iter()
                .filter_map(|(m, c)| {
                    let c = rp.reduce_from(c);
                    if rp.is_zero(&c) {
                        None
                    } else {
                        Some((m.clone(), c))
                    }
                })
                .collect(),
        };
        let det_p = Poly {
            nvars: self.det.nvars,
            terms: self.det.terms.iter().map(|(m, c)| (m.clone(), rp.reduce_from(c))).collect(),
        };
        let mut e = 0u32;
        loop {
            if r.is_zero() {
                return Err(EngineError::NotAUnit("residue vanishes mod p".into()));
            }
            if r.is_constant() {
                let c = r.terms[0].1.clone();
                return Ok((c, e));
            }
            r = exact_div_poly(&r, &det_p, &rp).ok_or_else(|| {
                EngineError::NotAUnit(format!(
                    "residue is not c*det^e: stuck at {} efactors",
                    e
                ))
            })?;
            e += 1;
        }
    }

    // ------------------------------ reductions ------------------------------

    /// Evaluate at the identity matrix (alpha=1, beta=0 in conformal mode,
    /// all z_i = 1 on the torus).  The denominator generator evaluates to 1.
    pub fn eval_at_identity(&self, a: &RingElem) -> PadicScalar {
        let point = self.identity_point();
        a.num.eval(&point, &self.base)
    }

    fn identity_point(&self) -> Vec<PadicScalar> {
        match self.mode {
            RingMode::Gl { n } => (0..n * n)
                .map(|v| if v / n == v % n { self.base.one() } else { self.base.zero() })
                .collect(),
            RingMode::Conformal => vec![self.base.one(), self.base.zero()],
            RingMode::Torus { n } => (0..n).map(|_| self.base.one()).collect(),
        }
    }

    /// Residue of the element modulo `(p, x - 1)`.
    pub fn reduce_mod_p_and_x1(&self, a: &RingElem) -> PadicScalar {
        let v = self.eval_at_identity(a);
        PadicScalar { c: v.c.iter().map(|&x| x % self.base.p).collect() }
    }

    /// Reduce a `Gl` element modulo the center ideal: substitute a scalar
    /// matrix `x = z * 1_n`.  `det(x)` maps to `z^n`.
    pub fn to_center(&self, target: &CoordRing, a: &RingElem) -> RingElem {
        let RingMode::Gl { n } = self.mode else { panic!("to_center outside Gl mode") };
        let mut raw = Vec::new();
        'terms: for (m, c) in &a.num.terms {
            let mut deg = 0u16;
            for i in 0..n {
                for j in 0..n {
                    let e = m.0[i * n + j];
                    if i != j && e > 0 {
                        continue 'terms;
                    }
                    if i == j {
                        deg += e;
                    }
                }
            }
            raw.push((Mono::var_pow(1, 0, deg), c.clone()));
        }
        let num = Poly::from_raw(1, &target.base, raw);
        RingElem { num, det_exp: a.det_exp * n as u32 }
    }

    /// Reduce a `Gl` element modulo the torus ideal: kill off-diagonal
    /// variables, send `x_{ii}` to `z_i`.  `det(x)` maps to `z_1...z_n`.
    pub fn to_torus(&self, target: &CoordRing, a: &RingElem) -> RingElem {
        let RingMode::Gl { n } = self.mode else { panic!("to_torus outside Gl mode") };
        let mut raw = Vec::new();
        'terms: for (m, c) in &a.num.terms {
            let mut zm = Mono::unit(n);
            for i in 0..n {
                for j in 0..n {
                    let e = m.0[i * n + j];
                    if i != j && e > 0 {
                        continue 'terms;
                    }
                    if i == j {
                        zm.0[i] = e;
                    }
                }
            }
            raw.push((zm, c.clone()));
        }
        let num = Poly::from_raw(n, &target.base, raw);
        RingElem { num, det_exp: a.det_exp }
    }

    /// Restrict a `GL_2` element to the complexified `GL_1`:
    /// `x11, x22 -> alpha`, `x12 -> beta`, `x21 -> -beta`; `det(x)` maps to
    /// the conformal denominator generator, so det exponents carry over.
    pub fn restrict_conformal(&self, target: &CoordRing, a: &RingElem) -> RingElem {
        assert!(matches!(self.mode, RingMode::Gl { n: 2 }), "restriction needs GL_2");
        assert!(matches!(target.mode, RingMode::Conformal));
        let al = Poly::var(2, &target.base, 0);
        let be = Poly::var(2, &target.base, 1);
        let images = vec![al.clone(), be.clone(), be.neg(&target.base), al];
        let num = a.num.subst(&images, 2, &target.base, |c| c.clone());
        RingElem { num, det_exp: a.det_exp }
    }

    /// Normal form of a conformal element in `O[alpha,beta]/(alpha^2+beta^2-1)`:
    /// the denominator generator is 1 there, and `beta^2` rewrites to
    /// `1 - alpha^2`.  Result has beta-degree at most 1.
    pub fn reduce_unit_circle(&self, a: &RingElem) -> Poly {
        assert!(matches!(self.mode, RingMode::Conformal));
        let one_minus_a2 = Poly::one(2, &self.base)
            .sub(&Poly::var(2, &self.base, 0).pow(2, &self.base), &self.base);
        let mut acc = Poly::zero(2);
        for (m, c) in &a.num.terms {
            let (ea, eb) = (m.0[0], m.0[1]);
            let (q, r) = (eb / 2, eb % 2);
            let mut t = Poly::monomial(
                2,
                Mono(smallvec::smallvec![ea, r]),
                c.clone(),
            );
            if q > 0 {
                t = t.mul(&one_minus_a2.pow(q as u32, &self.base), &self.base);
            }
            acc = acc.add(&t, &self.base);
        }
        acc
    }

    // ------------------------------ display ------------------------------

    pub fn elem_to_string(&self, a: &RingElem) -> String {
        let s = a.num.to_string_with(&self.names, &self.base);
        if a.det_exp == 0 {
            s
        } else {
            format!("({}) * det^-{}", s, a.det_exp)
        }
    }

    /// Truncated display for report witnesses.
    pub fn elem_to_string_truncated(&self, a: &RingElem, max_terms: usize) -> String {
        if a.num.terms.len() <= max_terms {
            return self.elem_to_string(a);
        }
        let head = Poly { nvars: a.num.nvars, terms: a.num.terms[..max_terms].to_vec() };
        let s = head.to_string_with(&self.names, &self.base);
        format!(
            "({} + ...[{} more terms]) * det^-{}",
            s,
            a.num.terms.len() - max_terms,
            a.det_exp
        )
    }
}

/// `det` of the `n x n` matrix of variables, by cofactor expansion.
fn det_of_vars(base: &BaseContext, n: usize) -> Poly {
    let nv = n * n;
    let elems: Vec<Poly> = (0..nv).map(|v| Poly::var(nv, base, v)).collect();
    det_poly_rec(&elems, (0..n).collect::<Vec<_>>().as_slice(), (0..n).collect::<Vec<_>>().as_slice(), n, base)
}

fn det_poly_rec(
    elems: &[Poly],
    rows: &[usize],
    cols: &[usize],
    n: usize,
    base: &BaseContext,
) -> Poly {
    if rows.len() == 1 {
        return elems[rows[0] * n + cols[0]].clone();
    }
    let mut acc = Poly::zero(elems[0].nvars);
    let sub_rows: Vec<usize> = rows[1..].to_vec();
    for (k, &c) in cols.iter().enumerate() {
        let sub_cols: Vec<usize> =
            cols.iter().copied().filter(|&cc| cc != c).collect();
        let minor = det_poly_rec(elems, &sub_rows, &sub_cols, n, base);
        let term = elems[rows[0] * n + c].mul(&minor, base);
        acc = if k % 2 == 0 { acc.add(&term, base) } else { acc.sub(&term, base) };
    }
    acc
}

/// Exact division of multivariate polynomials over the residue ring
/// (single-divisor reduction; sound becauses one polynomial is a Groebner
/// basis of its principal ideal).  Returns None if not divisible.
fn exact_div_poly(a: &Poly, d: &Poly, base: &BaseContext) -> Option<Poly> {
    let lead = &d.terms[0];
    let lead_inv = base.inv(&lead.1).ok()?;
    let mut r = a.clone();
    let mut q_terms: Vec<(Mono, PadicScalar)> = Vec::new();
    while !r.is_zero() {
        let (rm, rc) = &r.terms[0];
        // divide leading monomials
        let mut qm = Mono::unit(rm.0.len());
        for (k, (&e1, &e2)) in rm.0.iter().zip(&lead.0 .0).enumerate() {
            if e1 < e2 {
                return None;
            }
            qm.0[k] = e1 - e2;
        }
        let qc = base.mul(rc, &lead_inv);
        let t = Poly::monomial(r.nvars, qm.clone(), qc.clone());
        r = r.sub(&t.mul(d, base), base);
        q_terms.push((qm, qc));
    }
    Some(Poly::from_raw(a.nvars, base, q_terms))
}

// =============================== matrices ===============================

/// Square matrix over the coordinate ring, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingMatrix {
    pub n: usize,
    pub e: Vec<RingElem>,
}

impl RingMatrix {
    pub fn zero(ring: &CoordRing, n: usize) -> Self {
        RingMatrix { n, e: vec![ring.zero(); n * n] }
    }

    pub fn identity(ring: &CoordRing, n: usize) -> Self {
        let mut m = Self::zero(ring, n);
        for i in 0..n {
            m.e[i * n + i] = ring.one();
        }
        m
    }

    /// The matrix of coordinate variables `x = (x_{ij})`.
    pub fn x_matrix(ring: &CoordRing) -> Self {
        match ring.mode {
            RingMode::Gl { n } => {
                let mut m = Self::zero(ring, n);
                for i in 0..n {
                    for j in 0..n {
                        m.e[i * n + j] = ring.var(ring.xv(i, j));
                    }
                }
                m
            }
            RingMode::Conformal => {
                let a = ring.var(0);
                let b = ring.var(1);
                RingMatrix { n: 2, e: vec![a.clone(), b.clone(), ring.neg(&b), a] }
            }
            RingMode::Torus { n } => {
                let mut m = Self::zero(ring, n);
                for i in 0..n {
                    m.e[i * n + i] = ring.var(i);
                }
                m
            }
        }
    }

    pub fn from_scalars(ring: &CoordRing, n: usize, vals: &[PadicScalar]) -> Self {
        RingMatrix { n, e: vals.iter().map(|v| ring.from_scalar(v.clone())).collect() }
    }

    pub fn at(&self, i: usize, j: usize) -> &RingElem {
        &self.e[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: RingElem) {
        self.e[i * self.n + j] = v;
    }

    pub fn add(&self, o: &Self, ring: &CoordRing) -> Self {
        RingMatrix {
            n: self.n,
            e: self.e.iter().zip(&o.e).map(|(a, b)| ring.add(a, b)).collect(),
        }
    }

    pub fn sub(&self, o: &Self, ring: &CoordRing) -> Self {
        RingMatrix {
            n: self.n,
            e: self.e.iter().zip(&o.e).map(|(a, b)| ring.sub(a, b)).collect(),
        }
    }

    pub fn neg(&self, ring: &CoordRing) -> Self {
        RingMatrix { n: self.n, e: self.e.iter().map(|a| ring.neg(a)).collect() }
    }

    pub fn mul(&self, o: &Self, ring: &CoordRing) -> Self {
        let n = self.n;
        let mut out = Self::zero(ring, n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = ring.zero();
                for k in 0..n {
                    acc = ring.add(&acc, &ring.mul(self.at(i, k), o.at(k, j)));
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    pub fn transpose(&self, _ring: &CoordRing) -> Self {
        let n = self.n;
        let mut e = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                e.push(self.at(j, i).clone());
            }
        }
        RingMatrix { n, e }
    }

    pub fn scale(&self, c: &RingElem, ring: &CoordRing) -> Self {
        RingMatrix { n: self.n, e: self.e.iter().map(|a| ring.mul(a, c)).collect() }
    }

    pub fn scale_scalar(&self, c: &PadicScalar, ring: &CoordRing) -> Self {
        RingMatrix { n: self.n, e: self.e.iter().map(|a| ring.mul_scalar(a, c)).collect() }
    }

    /// Entrywise p-th power `m^(p) = (m_{ij}^p)`.
    pub fn entrywise_pth_power(&self, ring: &CoordRing) -> Self {
        let p = ring.base.p as u32;
        RingMatrix { n: self.n, e: self.e.iter().map(|a| ring.pow(a, p)).collect() }
    }

    pub fn map<F: Fn(&RingElem) -> RingElem>(&self, f: F) -> Self {
        RingMatrix { n: self.n, e: self.e.iter().map(f).collect() }
    }

    pub fn det(&self, ring: &CoordRing) -> RingElem {
        let rows: Vec<usize> = (0..self.n).collect();
        det_elem_rec(&self.e, &rows, &rows, self.n, ring)
    }

    /// Adjugate matrix (transpose of cofactors).
    pub fn adjugate(&self, ring: &CoordRing) -> Self {
        let n = self.n;
        if n == 1 {
            return RingMatrix { n: 1, e: vec![ring.one()] };
        }
        let mut out = Self::zero(ring, n);
        for i in 0..n {
            for j in 0..n {
                let rows: Vec<usize> = (0..n).filter(|&r| r != j).collect();
                let cols: Vec<usize> = (0..n).filter(|&c| c != i).collect();
                let minor = det_elem_rec(&self.e, &rows, &cols, n, ring);
                let sign = (i + j) % 2 == 1;
                out.set(i, j, if sign { ring.neg(&minor) } else { minor });
            }
        }
        out
    }

    /// Inverse via adjugate and unit inversion of the determinant.
    pub fn inverse(&self, ring: &CoordRing) -> Result<Self> {
        let det = self.det(ring);
        let det_inv = ring.invert_unit(&det)?;
        Ok(self.adjugate(ring).scale(&det_inv, ring))
    }

    pub fn equals(&self, o: &Self, ring: &CoordRing) -> bool {
        self.e.iter().zip(&o.e).all(|(a, b)| ring.equals(a, b))
    }

    pub fn is_congruent_identity_mod_p(&self, ring: &CoordRing) -> bool {
        let id = Self::identity(ring, self.n);
        self.e
            .iter()
            .zip(&id.e)
            .all(|(a, b)| ring.val_p(&ring.sub(a, b)) >= 1)
    }
}

fn det_elem_rec(
    elems: &[RingElem],
    rows: &[usize],
    cols: &[usize],
    n: usize,
    ring: &CoordRing,
) -> RingElem {
    if rows.len() == 1 {
        return elems[rows[0] * n + cols[0]].clone();
    }
    let mut acc = ring.zero();
    let sub_rows: Vec<usize> = rows[1..].to_vec();
    for (k, &c) in cols.iter().enumerate() {
        let sub_cols: Vec<usize> = cols.iter().copied().filter(|&cc| cc != c).collect();
        let minor = det_elem_rec(elems, &sub_rows, &sub_cols, n, ring);
        let term = ring.mul(&elems[rows[0] * n + c], &minor);
        acc = if k % 2 == 0 { ring.add(&acc, &term) } else { ring.sub(&acc, &term) };
    }
    acc
}

// =============================== substitution ===============================

/// Base-ring component of a substitution: identity or a power of the base
/// Frobenius.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseMap {
    Identity,
    FrobeniusPow(u32),
}

impl BaseMap {
    pub fn apply(&self, base: &BaseContext, c: &PadicScalar) -> PadicScalar {
        match self {
            BaseMap::Identity => c.clone(),
            BaseMap::FrobeniusPow(k) => {
                let mut r = c.clone();
                for _ in 0..*k {
                    r = base.frobenius(&r);
                }
                r
            }
        }
    }

    pub fn compose(&self, o: &BaseMap) -> BaseMap {
        match (self, o) {
            (BaseMap::Identity, x) | (x, BaseMap::Identity) => *x,
            (BaseMap::FrobeniusPow(a), BaseMap::FrobeniusPow(b)) => BaseMap::FrobeniusPow(a + b),
        }
    }
}

/// Images of the variables split as `x_v^p + p r_v`; this holds for every
/// Frobenius lift and enables mod-p^N expansion without forming huge
/// intermediate powers.
#[derive(Debug, Clone)]
pub struct UnipotentImages {
    pub p: u16,
    pub rs: Vec<RingElem>,
}

/// Ring endomorphism of the localized ring: a base-ring map plus one image
/// per variable.  The image of the denominator generator must be a unit
/// (checked at construction).
#[derive(Debug, Clone)]
pub struct SubstitutionMap {
    pub base_map: BaseMap,
    pub images: Vec<RingElem>,
    pub det_image: RingElem,
    pub det_image_inv: RingElem,
    pub unipotent: Option<UnipotentImages>,
}

impl SubstitutionMap {
    pub fn new(ring: &CoordRing, base_map: BaseMap, images: Vec<RingElem>) -> Result<Self> {
        let det_image = subst_poly_elem(ring, ring.det_poly(), &images, BaseMap::Identity);
        let det_image_inv = ring.invert_unit(&det_image)?;
        let unipotent = detect_unipotent(ring, &images);
        Ok(SubstitutionMap { base_map, images, det_image, det_image_inv, unipotent })
    }

    pub fn identity(ring: &CoordRing) -> Self {
        let images: Vec<RingElem> = (0..ring.nvars).map(|v| ring.var(v)).collect();
        Self::new(ring, BaseMap::Identity, images).expect("identity map is valid")
    }

    /// Apply the homomorphism to an element.
    pub fn apply(&self, ring: &CoordRing, f: &RingElem) -> RingElem {
        let num_image = if let Some(uni) = &self.unipotent {
            apply_unipotent(ring, &f.num, uni, self.base_map)
        } else {
            subst_poly_elem(ring, &f.num, &self.images, self.base_map)
        };
        if f.det_exp == 0 {
            return num_image;
        }
        ring.mul(&num_image, &ring.pow(&self.det_image_inv, f.det_exp))
    }

    /// Composition: `(self . other)(f) = self(other(f))`.
    pub fn compose(&self, ring: &CoordRing, other: &SubstitutionMap) -> Result<SubstitutionMap> {
        let images: Vec<RingElem> =
            other.images.iter().map(|im| self.apply(ring, im)).collect();
        SubstitutionMap::new(ring, self.base_map.compose(&other.base_map), images)
    }
}

/// Naive substitution of a polynomial with ring-element images.
pub fn subst_poly_elem(
    ring: &CoordRing,
    f: &Poly,
    images: &[RingElem],
    base_map: BaseMap,
) -> RingElem {
    let mut maxe = vec![0u16; f.nvars];
    for (m, _) in &f.terms {
        for (v, &e) in m.0.iter().enumerate() {
            maxe[v] = maxe[v].max(e);
        }
    }
    let mut pows: Vec<Vec<RingElem>> = Vec::with_capacity(f.nvars);
    for v in 0..f.nvars {
        let mut pv = vec![ring.one()];
        for k in 1..=maxe[v] as usize {
            let prev = pv[k - 1].clone();
            pv.push(ring.mul(&prev, &images[v]));
        }
        pows.push(pv);
    }
    let mut acc = ring.zero();
    for (m, c) in &f.terms {
        let mut t = ring.from_scalar(base_map.apply(&ring.base, c));
        for (v, &e) in m.0.iter().enumerate() {
            if e > 0 {
                t = ring.mul(&t, &pows[v][e as usize]);
            }
        }
        acc = ring.add(&acc, &t);
    }
    acc
}

/// Check whether every image satisfies `image_v = x_v^p + p r_v`, the shape
/// of a Frobenius lift on the coordinates.
fn detect_unipotent(ring: &CoordRing, images: &[RingElem]) -> Option<UnipotentImages> {
    let p = ring.base.p;
    if p > u16::MAX as u64 {
        return None;
    }
    let mut rs = Vec::with_capacity(images.len());
    for (v, im) in images.iter().enumerate() {
        let xvp = RingElem {
            num: Poly::monomial(
                im.num.nvars,
                Mono::var_pow(im.num.nvars, v, p as u16),
                ring.base.one(),
            ),
            det_exp: 0,
        };
        let rest = ring.sub(im, &xvp);
        let r = ring.div_p_exact(&rest, 1).ok()?;
        rs.push(r);
    }
    Some(UnipotentImages { p: p as u16, rs })
}

/// Substitution for Frobenius-lift-shaped images, expanded to order
/// `prec - 1` in the `r` directions:
/// `phi(f) = sum_{|e| < N} p^{|e|} (prod_v r_v^{e_v}) *
///           sum_a phi0(c_a) (prod_v binom(a_v, e_v)) x^{p (a - e)}`.
fn apply_unipotent(
    ring: &CoordRing,
    f: &Poly,
    uni: &UnipotentImages,
    base_map: BaseMap,
) -> RingElem {
    let order = ring.base.prec - 1;
    let nv = f.nvars;
    let active: Vec<usize> = (0..nv).filter(|&v| !ring.is_zero(&uni.rs[v])).collect();
    // multi-indices over active variables, total order <= prec - 1
    let mut multis: Vec<Vec<(usize, u16)>> = vec![vec![]];
    {
        let mut frontier: Vec<Vec<(usize, u16)>> = vec![vec![]];
        for _ in 0..order {
            let mut next = Vec::new();
            for m in &frontier {
                let start = m.last().map(|&(v, _)| v).unwrap_or(0);
                for &v in active.iter().filter(|&&v| v >= start) {
                    let mut nm = m.clone();
                    match nm.last_mut() {
                        Some(last) if last.0 == v => last.1 += 1,
                        _ => nm.push((v, 1)),
                    }
                    next.push(nm);
                }
            }
            multis.extend(next.iter().cloned());
            frontier = next;
        }
    }

    let base = &ring.base;
    let mut acc = ring.zero();
    for e in &multis {
        let total: u32 = e.iter().map(|&(_, k)| k as u32).sum();
        if total >= ring.base.prec {
            continue;
        }
        // inner polynomial: sum_a phi0(c_a) prod binom(a_v, e_v) x^{p(a-e)}
        let mut raw: Vec<(Mono, PadicScalar)> = Vec::new();
        'terms: for (m, c) in &f.terms {
            let mut coef = base_map.apply(base, c);
            for &(v, k) in e {
                let b = binom_u64(m.0[v] as u64, k as u64) % base.modulus;
                if b == 0 {
                    continue 'terms;
                }
                coef = base.mul_u64(&coef, b);
            }
            if base.is_zero(&coef) {
                continue;
            }
            let mut big = Mono::unit(nv);
            for (v, &av) in m.0.iter().enumerate() {
                let ev = e.iter().find(|&&(w, _)| w == v).map(|&(_, k)| k).unwrap_or(0);
                big.0[v] = (av - ev).checked_mul(uni.p).expect("exponent overflow");
            }
            raw.push((big, coef));
        }
        if raw.is_empty() {
            continue;
        }
        let inner = RingElem { num: Poly::from_raw(nv, base, raw), det_exp: 0 };
        let mut term = inner;
        for &(v, k) in e {
            term = ring.mul(&term, &ring.pow(&uni.rs[v], k as u32));
        }
        let mut pk = 1u64;
        for _ in 0..total {
            pk = (pk as u128 * base.p as u128 % base.modulus as u128) as u64;
        }
        term = ring.mul_u64(&term, pk);
        acc = ring.add(&acc, &term);
    }
    acc
}

fn binom_u64(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r as u64
}
