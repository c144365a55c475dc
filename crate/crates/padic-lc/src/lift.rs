//! Frobenius lifts on the completed coordinate ring as first-class values.
//!
//! A lift on `GL_n` is determined by a matrix `Lambda = 1 mod p` via
//! `x -> x^{(p)} Lambda`; on the complexified `GL_1` it is given by images
//! of `alpha, beta` directly.  Either way the underlying substitution map
//! sends every coordinate to its p-th power plus p times a correction,
//! which is the shape the fast substitution path expects.

use crate::error::{EngineError, Result};
use crate::ring::{BaseMap, CoordRing, RingElem, RingMatrix, SubstitutionMap};

#[derive(Debug, Clone)]
pub struct FrobeniusLift {
    /// Present for lifts of the form `x -> x^{(p)} Lambda`.
    pub lambda: Option<RingMatrix>,
    pub map: SubstitutionMap,
}

/// The two closed-subscheme ideals used for horizontality checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HorizontalIdeal {
    /// `(x11 - x22, x12 + x21)` cutting the complexified `GL_1` in `GL_2`.
    Gl1c,
    /// `(alpha^2 + beta^2 - 1)` cutting the complexified unitary group.
    UnitCircle,
}

impl FrobeniusLift {
    /// Lift `x -> x^{(p)} Lambda` from a matrix `Lambda = 1 mod p`.
    pub fn from_lambda(ring: &CoordRing, lambda: RingMatrix) -> Result<Self> {
        if !lambda.is_congruent_identity_mod_p(ring) {
            return Err(EngineError::InvalidInput(
                "Lambda is not congruent to the identity mod p".into(),
            ));
        }
        let xp = RingMatrix::x_matrix(ring).entrywise_pth_power(ring);
        let phi_x = xp.mul(&lambda, ring);
        let map = SubstitutionMap::new(ring, BaseMap::FrobeniusPow(1), phi_x.e.clone())?;
        debug_assert!(map.unipotent.is_some());
        Ok(FrobeniusLift { lambda: Some(lambda), map })
    }

    /// The trivial lift `x -> x^{(p)}`.
    pub fn trivial(ring: &CoordRing) -> Self {
        let n = ring.matrix_dim();
        Self::from_lambda(ring, RingMatrix::identity(ring, n)).expect("identity is a valid Lambda")
    }

    /// Lift from explicit coordinate images (conformal mode); each image
    /// must be congruent to the p-th power of its variable mod p.
    pub fn from_images(ring: &CoordRing, images: Vec<RingElem>) -> Result<Self> {
        for (v, im) in images.iter().enumerate() {
            let xvp = ring.pow(&ring.var(v), ring.base.p as u32);
            if !ring.is_zero(&ring.sub(im, &xvp)) && ring.val_p(&ring.sub(im, &xvp)) == 0 {
                return Err(EngineError::InvalidInput(format!(
                    "image of variable {v} is not x^p mod p"
                )));
            }
        }
        let map = SubstitutionMap::new(ring, BaseMap::FrobeniusPow(1), images)?;
        Ok(FrobeniusLift { lambda: None, map })
    }

    pub fn apply(&self, ring: &CoordRing, f: &RingElem) -> RingElem {
        self.map.apply(ring, f)
    }

    /// `L1(L2(f))`.
    pub fn compose_apply(
        l1: &FrobeniusLift,
        l2: &FrobeniusLift,
        ring: &CoordRing,
        f: &RingElem,
    ) -> RingElem {
        l1.apply(ring, &l2.apply(ring, f))
    }

    /// The attached p-derivation `(phi(f) - f^p)/p`, valid at precision N-1.
    pub fn p_derivation(&self, ring: &CoordRing, f: &RingElem) -> Result<RingElem> {
        if ring.base.prec < 2 {
            return Err(EngineError::PrecisionUnderflow { needed: 2, have: ring.base.prec });
        }
        let fp = ring.pow(f, ring.base.p as u32);
        let diff = ring.sub(&self.apply(ring, f), &fp);
        ring.div_p_exact(&diff, 1)
    }

    /// Does the lift send the ideal into itself?  Membership is decided by
    /// the parametrization of the zero locus (`Gl1c`) or by normal forms in
    /// the quotient (`UnitCircle`); only these two ideal shapes arise.
    pub fn check_horizontal(&self, ring: &CoordRing, ideal: HorizontalIdeal) -> Result<bool> {
        match ideal {
            HorizontalIdeal::Gl1c => {
                if ring.matrix_dim() != 2 || !matches!(ring.mode, crate::ring::RingMode::Gl { .. })
                {
                    return Err(EngineError::UnsupportedIdeal(
                        "Gl1c ideal lives in the GL_2 coordinate ring".into(),
                    ));
                }
                let conf = CoordRing::conformal(ring.base.clone());
                let g1 = ring.sub(&ring.var(ring.xv(0, 0)), &ring.var(ring.xv(1, 1)));
                let g2 = ring.add(&ring.var(ring.xv(0, 1)), &ring.var(ring.xv(1, 0)));
                for g in [g1, g2] {
                    let img = self.apply(ring, &g);
                    if !conf.is_zero(&ring.restrict_conformal(&conf, &img)) {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            HorizontalIdeal::UnitCircle => {
                if !matches!(ring.mode, crate::ring::RingMode::Conformal) {
                    return Err(EngineError::UnsupportedIdeal(
                        "unit-circle ideal lives in the conformal coordinate ring".into(),
                    ));
                }
                let rel = ring.sub(&ring.det_elem(), &ring.one());
                let img = self.apply(ring, &rel);
                Ok(ring.reduce_unit_circle(&img).is_zero())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::BaseContext;
    use crate::ring::RingMode;

    fn gl2(p: u64, prec: u32) -> CoordRing {
        CoordRing::gl(BaseContext::rational(p, prec).unwrap(), 2)
    }

    #[test]
    fn trivial_lift_and_rejection() {
        let r = gl2(3, 2);
        let l0 = FrobeniusLift::trivial(&r);
        // phi_0(det) = det(x^{(p)})
        let xp = RingMatrix::x_matrix(&r).entrywise_pth_power(&r);
        assert!(r.equals(&l0.apply(&r, &r.det_elem()), &xp.det(&r)));
        // Lambda not congruent 1 mod p is rejected
        let mut bad = RingMatrix::identity(&r, 2);
        bad.set(0, 0, r.add(&r.one(), &r.var(0)));
        assert!(FrobeniusLift::from_lambda(&r, bad).is_err());
    }

    #[test]
    fn lambda_one_plus_pe_derivation() {
        // Lambda = 1 + pE gives delta(x) = x^{(p)} E
        let r = gl2(3, 3);
        let mut e_mat = RingMatrix::zero(&r, 2);
        e_mat.set(0, 0, r.var(r.xv(1, 1)));
        e_mat.set(0, 1, r.from_u64(2));
        e_mat.set(1, 0, r.var(r.xv(0, 1)));
        e_mat.set(1, 1, r.det_inv_elem());
        let lambda =
            RingMatrix::identity(&r, 2).add(&e_mat.scale_scalar(&r.base.from_u64(3), &r), &r);
        let l = FrobeniusLift::from_lambda(&r, lambda).unwrap();
        let xp = RingMatrix::x_matrix(&r).entrywise_pth_power(&r);
        let expect = xp.mul(&e_mat, &r);
        for i in 0..2 {
            for j in 0..2 {
                let d = l.p_derivation(&r, &r.var(r.xv(i, j))).unwrap();
                assert!(r.equals(&d, expect.at(i, j)));
            }
        }
        // trivial lift: delta_0(x) = 0
        let l0 = FrobeniusLift::trivial(&r);
        let d = l0.p_derivation(&r, &r.var(0)).unwrap();
        assert!(r.is_zero(&d));
        // delta(1) = 0
        let d = l.p_derivation(&r, &r.one()).unwrap();
        assert!(r.is_zero(&d));
    }

    #[test]
    fn lift_is_endomorphism_reducing_to_frobenius() {
        let r = gl2(5, 2);
        let mut e_mat = RingMatrix::zero(&r, 2);
        e_mat.set(0, 1, r.var(2));
        e_mat.set(1, 1, r.one());
        let lambda =
            RingMatrix::identity(&r, 2).add(&e_mat.scale_scalar(&r.base.from_u64(5), &r), &r);
        let l = FrobeniusLift::from_lambda(&r, lambda).unwrap();
        let mut state = 7u64;
        let mut rnd = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            state >> 33
        };
        for _ in 0..25 {
            let f = r.add(
                &r.mul_u64(
                    &r.mul(&r.var((rnd() % 4) as usize), &r.var((rnd() % 4) as usize)),
                    rnd(),
                ),
                &r.mul_u64(&r.det_inv_elem(), rnd()),
            );
            let g = r.add(&r.var((rnd() % 4) as usize), &r.from_u64(rnd()));
            // homomorphism
            let lhs = l.apply(&r, &r.mul(&f, &g));
            let rhs = r.mul(&l.apply(&r, &f), &l.apply(&r, &g));
            assert!(r.equals(&lhs, &rhs));
            let lhs = l.apply(&r, &r.add(&f, &g));
            let rhs = r.add(&l.apply(&r, &f), &l.apply(&r, &g));
            assert!(r.equals(&lhs, &rhs));
            // Frobenius mod p
            let fp = r.pow(&f, 5);
            let diff = r.sub(&l.apply(&r, &f), &fp);
            assert!(r.is_zero(&diff) || r.val_p(&diff) >= 1);
        }
        // constants map through the base Frobenius (identity on Z_p)
        let c = r.from_u64(17);
        assert!(r.equals(&l.apply(&r, &c), &c));
    }

    #[test]
    fn product_axiom_for_ring_derivation() {
        let r = gl2(3, 3);
        let mut e_mat = RingMatrix::zero(&r, 2);
        e_mat.set(1, 0, r.var(0));
        let lambda =
            RingMatrix::identity(&r, 2).add(&e_mat.scale_scalar(&r.base.from_u64(3), &r), &r);
        let l = FrobeniusLift::from_lambda(&r, lambda).unwrap();
        let lo = r.lower_precision(1).unwrap();
        let p = 3u32;
        let f = r.add(&r.var(0), &r.mul_u64(&r.var(3), 2));
        let g = r.mul(&r.var(1), &r.var(2));
        let df = lo.reduce_from(&l.p_derivation(&r, &f).unwrap());
        let dg = lo.reduce_from(&l.p_derivation(&r, &g).unwrap());
        let dfg = lo.reduce_from(&l.p_derivation(&r, &r.mul(&f, &g)).unwrap());
        let fp = lo.reduce_from(&r.pow(&f, p));
        let gp = lo.reduce_from(&r.pow(&g, p));
        let mut rhs = lo.add(&lo.mul(&fp, &dg), &lo.mul(&gp, &df));
        rhs = lo.add(&rhs, &lo.mul_u64(&lo.mul(&df, &dg), 3));
        assert!(lo.equals(&dfg, &rhs));
    }

    #[test]
    fn trivial_lift_preserves_gl1c() {
        let r = gl2(3, 2);
        assert!(matches!(r.mode, RingMode::Gl { n: 2 }));
        let l0 = FrobeniusLift::trivial(&r);
        assert!(l0.check_horizontal(&r, HorizontalIdeal::Gl1c).unwrap());
    }

    #[test]
    fn compose_apply_associates() {
        let r = gl2(3, 2);
        let l0 = FrobeniusLift::trivial(&r);
        let mut e_mat = RingMatrix::zero(&r, 2);
        e_mat.set(0, 0, r.var(1));
        let lam = RingMatrix::identity(&r, 2).add(&e_mat.scale_scalar(&r.base.from_u64(3), &r), &r);
        let l1 = FrobeniusLift::from_lambda(&r, lam).unwrap();
        let f = r.add(&r.var(0), &r.det_inv_elem());
        let a = l0.apply(&r, &FrobeniusLift::compose_apply(&l1, &l0, &r, &f));
        let b = FrobeniusLift::compose_apply(&l0, &l1, &r, &l0.apply(&r, &f));
        assert!(r.equals(&a, &b));
    }
}
