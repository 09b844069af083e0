//! Upper half-plane geometry, reduction to the standard fundamental domain of
//! `PSL(2,Z)` with coset bookkeeping, distances on `Γ\H`, invariant sampling
//! and exact ball measures.
//!
//! A point of `Γ\H` is a pair `(coset, z)` with `z` in the standard domain
//! `F = {|Re z| ≤ ½, |z| ≥ 1}`; it names the orbit `Γ·A_c·z`, where `A_c` is
//! any representative of the coset `c ∈ Γ\PSL(2,Z)`. Moving `z` by an integer
//! matrix `B` and replacing `c` by `c·B⁻¹` names the same point.
//!
//! Distances are reported in Teichmüller units, half the curvature `−1`
//! distance, so the diagonal flow has unit speed.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::orbit::CosetAction;
use crate::scalar::Real;

/// Steps after which [`reduce`] gives up.
pub const REDUCTION_GUARD: usize = 10_000;

/// Default connecting-word length for quotient distances.
pub const DEFAULT_WORD_LENGTH: usize = 6;

const Y_FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct HPoint<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> HPoint<T> {
    pub fn new(x: T, y: T) -> Result<Self> {
        if !(y > T::zero()) || !x.is_finite() || !y.is_finite() {
            return Err(Error::Degenerate(format!("({x}, {y}) is not in the upper half-plane")));
        }
        Ok(Self { x, y })
    }

    pub fn i() -> Self {
        Self { x: T::zero(), y: T::one() }
    }

    /// Membership in the standard domain, within [`Real::tolerance`].
    pub fn in_standard_domain(&self) -> bool {
        let tol = T::tolerance();
        let half = T::lit(0.5);
        self.x.abs() <= half + tol && self.x * self.x + self.y * self.y >= T::one() - tol
    }
}

/// A real 2×2 matrix of determinant one, compared projectively.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mobius<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
}

impl<T: Real> Mobius<T> {
    pub fn new(a: T, b: T, c: T, d: T) -> Result<Self> {
        let m = Self { a, b, c, d };
        if (m.det() - T::one()).abs() > T::tolerance() {
            return Err(Error::Degenerate(format!("determinant {} ≠ 1", m.det())));
        }
        Ok(m)
    }

    pub fn identity() -> Self {
        Self { a: T::one(), b: T::zero(), c: T::zero(), d: T::one() }
    }

    /// Geodesic flow matrix `g_t = diag(e^t, e^{−t})`.
    pub fn diagonal(t: T) -> Self {
        Self { a: t.exp(), b: T::zero(), c: T::zero(), d: (-t).exp() }
    }

    pub fn translation(b: T) -> Self {
        Self { a: T::one(), b, c: T::zero(), d: T::one() }
    }

    /// `[[cos α, −sin α], [sin α, cos α]]`
    pub fn rotation(alpha: T) -> Self {
        let (s, c) = alpha.sin_cos();
        Self { a: c, b: -s, c: s, d: c }
    }

    pub fn det(&self) -> T {
        self.a * self.d - self.b * self.c
    }

    pub fn mul(&self, o: &Self) -> Self {
        Self {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    pub fn inverse(&self) -> Self {
        Self { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    /// Rescales to determinant one.
    pub fn normalized(&self) -> Self {
        let s = self.det().sqrt().recip();
        Self { a: self.a * s, b: self.b * s, c: self.c * s, d: self.d * s }
    }

    /// Equality up to sign, entrywise within tolerance.
    pub fn projective_eq(&self, o: &Self) -> bool {
        let tol = T::tolerance();
        let close = |s: T| {
            (self.a - s * o.a).abs() <= tol
                && (self.b - s * o.b).abs() <= tol
                && (self.c - s * o.c).abs() <= tol
                && (self.d - s * o.d).abs() <= tol
        };
        close(T::one()) || close(-T::one())
    }

    pub fn apply(&self, p: HPoint<T>) -> Result<HPoint<T>> {
        // (a z + b)/(c z + d) with z = x + iy
        let den_re = self.c * p.x + self.d;
        let den_im = self.c * p.y;
        let den = den_re * den_re + den_im * den_im;
        let num_re = self.a * p.x + self.b;
        let num_im = self.a * p.y;
        let x = (num_re * den_re + num_im * den_im) / den;
        let y = p.y * self.det() / den;
        if !(y.as_f64() > Y_FLOOR) || !x.is_finite() {
            return Err(Error::Degenerate("Möbius image left the upper half-plane".into()));
        }
        Ok(HPoint { x, y })
    }

    /// The point `M·i`, assuming determinant one.
    #[inline]
    pub fn base_point(&self) -> HPoint<T> {
        let den = self.c * self.c + self.d * self.d;
        HPoint { x: (self.a * self.c + self.b * self.d) / den, y: den.recip() }
    }

    fn from_int(m: &IntMobius) -> Self {
        Self { a: T::lit(m.a as f64), b: T::lit(m.b as f64), c: T::lit(m.c as f64), d: T::lit(m.d as f64) }
    }
}

/// Curvature `−1` distance.
pub fn hyp_dist<T: Real>(p: HPoint<T>, q: HPoint<T>) -> T {
    let dx = p.x - q.x;
    let dy = p.y - q.y;
    let two = T::lit(2.0);
    two * ((dx * dx + dy * dy).sqrt() / (two * (p.y * q.y).sqrt())).asinh()
}

/// Teichmüller distance on the disk: half of [`hyp_dist`].
pub fn teich_dist<T: Real>(p: HPoint<T>, q: HPoint<T>) -> T {
    hyp_dist(p, q) / T::lit(2.0)
}

/// Hyperbolic area of the standard domain of `PSL(2,Z)`.
pub fn modular_area<T: Real>() -> T {
    T::PI() / T::lit(3.0)
}

/// Reduces `p` into the standard domain, pushing the moves through the coset
/// action. Returns the new coset and the reduced point.
pub fn reduce<T: Real>(action: &CosetAction, coset: usize, p: HPoint<T>) -> Result<(usize, HPoint<T>)> {
    let half = T::lit(0.5);
    let (mut c, mut x, mut y) = (coset, p.x, p.y);
    for _ in 0..REDUCTION_GUARD {
        if x > half || x < -half {
            let k = x.round();
            x = x - k;
            c = action.t_pow(c, k.to_i64().ok_or_else(|| Error::Degenerate("translation overflow".into()))?);
        } else {
            let r2 = x * x + y * y;
            if r2 < T::one() {
                x = -x / r2;
                y = y / r2;
                c = action.s(c);
                if !(y.as_f64() > Y_FLOOR) {
                    return Err(Error::Degenerate("point fell onto the real axis".into()));
                }
            } else {
                return Ok((c, HPoint { x, y }));
            }
        }
    }
    Err(Error::ReductionGuard(REDUCTION_GUARD))
}

/// Reduces a frame `M` (base point `M·i`) by left multiplication with integer
/// matrices; the coset absorbs the inverse moves. Renormalizes the determinant.
pub fn reduce_frame<T: Real>(action: &CosetAction, coset: usize, m: Mobius<T>) -> Result<(usize, Mobius<T>)> {
    let half = T::lit(0.5);
    let mut m = m.normalized();
    let mut c = coset;
    for _ in 0..REDUCTION_GUARD {
        let z = m.base_point();
        if z.x > half || z.x < -half {
            let k = z.x.round();
            m.a = m.a - k * m.c;
            m.b = m.b - k * m.d;
            c = action.t_pow(c, k.to_i64().ok_or_else(|| Error::Degenerate("translation overflow".into()))?);
        } else if z.x * z.x + z.y * z.y < T::one() {
            m = Mobius { a: -m.c, b: -m.d, c: m.a, d: m.b };
            c = action.s(c);
            if !(z.y.as_f64() > Y_FLOOR) {
                return Err(Error::Degenerate("frame fell onto the real axis".into()));
            }
        } else {
            return Ok((c, m));
        }
    }
    Err(Error::ReductionGuard(REDUCTION_GUARD))
}

/// A point of the unit tangent bundle `Γ\PSL(2,R)`: coset, reduced base point
/// and the direction of the unit tangent vector, measured counterclockwise
/// from the upward vertical, in `[0, 2π)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuotientPoint<T> {
    pub coset: usize,
    pub z: HPoint<T>,
    pub theta: T,
}

impl<T: Real> QuotientPoint<T> {
    /// Frame matrix `n_x a_y k` with `k` rotating the upward direction to `theta`.
    pub fn frame(&self) -> Mobius<T> {
        let sy = self.z.y.sqrt();
        let na = Mobius { a: sy, b: self.z.x / sy, c: T::zero(), d: sy.recip() };
        na.mul(&Mobius::rotation(-self.theta / T::lit(2.0)))
    }

    /// Inverse of [`QuotientPoint::frame`]; the frame need not be reduced.
    pub fn from_frame(coset: usize, m: &Mobius<T>) -> Self {
        let alpha = m.c.atan2(m.d);
        let two_pi = T::lit(2.0) * T::PI();
        let mut theta = (-T::lit(2.0) * alpha) % two_pi;
        if theta < T::zero() {
            theta = theta + two_pi;
        }
        if theta >= two_pi {
            theta = T::zero();
        }
        Self { coset, z: m.base_point(), theta }
    }

    /// The spherical part `(coset, z)`.
    pub fn position(&self) -> (usize, HPoint<T>) {
        (self.coset, self.z)
    }

    /// CSV row `coset,x,y,theta` with 17 significant digits.
    pub fn csv_row(&self) -> String {
        format!("{},{:.16e},{:.16e},{:.16e}", self.coset, self.z.x.as_f64(), self.z.y.as_f64(), self.theta.as_f64())
    }
}

/// Integer matrix in `PSL(2,Z)`, sign-normalized so `c > 0`, or `c = 0, d > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct IntMobius {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl IntMobius {
    pub const IDENTITY: Self = Self { a: 1, b: 0, c: 0, d: 1 };
    pub const T: Self = Self { a: 1, b: 1, c: 0, d: 1 };
    pub const T_INV: Self = Self { a: 1, b: -1, c: 0, d: 1 };
    pub const S: Self = Self { a: 0, b: -1, c: 1, d: 0 };

    fn normalized(self) -> Self {
        if self.c < 0 || (self.c == 0 && self.d < 0) {
            Self { a: -self.a, b: -self.b, c: -self.c, d: -self.d }
        } else {
            self
        }
    }

    pub fn mul(&self, o: &Self) -> Self {
        Self {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
        .normalized()
    }

    pub fn inverse(&self) -> Self {
        Self { a: self.d, b: -self.b, c: -self.c, d: self.a }.normalized()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Gen {
    T,
    TInv,
    S,
}

/// All elements of `PSL(2,Z)` expressible as words of length `≤ L` in
/// `T, T⁻¹, S`, with their right action on cosets.
#[derive(Clone, Debug)]
pub struct WordBall {
    elements: Vec<IntMobius>,
    word_len: Vec<u8>,
    /// `perms[e * n_cosets + c] = c·g_e`
    perms: Vec<u32>,
    n_cosets: usize,
    max_len: usize,
}

impl WordBall {
    pub fn new(action: &CosetAction, max_len: usize) -> Result<Self> {
        if max_len < 1 {
            return Err(Error::Config("connecting-word length must be at least 1".into()));
        }
        let n = action.len();
        let mut elements = vec![IntMobius::IDENTITY];
        let mut word_len = vec![0u8];
        let mut perms: Vec<u32> = (0..n as u32).collect();
        let mut seen: HashMap<IntMobius, usize> = HashMap::from([(IntMobius::IDENTITY, 0)]);
        let mut frontier = vec![0usize];
        for len in 1..=max_len {
            let mut next = Vec::new();
            for &e in &frontier {
                for gen in [Gen::T, Gen::TInv, Gen::S] {
                    let (mat, step): (IntMobius, fn(&CosetAction, usize) -> usize) = match gen {
                        Gen::T => (IntMobius::T, CosetAction::t),
                        Gen::TInv => (IntMobius::T_INV, CosetAction::t_inv),
                        Gen::S => (IntMobius::S, CosetAction::s),
                    };
                    let g = elements[e].mul(&mat);
                    let perm: Vec<u32> = (0..n).map(|c| step(action, perms[e * n + c] as usize) as u32).collect();
                    match seen.get(&g) {
                        Some(&other) => {
                            if perms[other * n..(other + 1) * n] != perm[..] {
                                return Err(Error::Relation(format!("two words for {g:?} act differently on cosets")));
                            }
                        }
                        None => {
                            seen.insert(g, elements.len());
                            next.push(elements.len());
                            elements.push(g);
                            word_len.push(len as u8);
                            perms.extend(perm);
                        }
                    }
                }
            }
            frontier = next;
        }
        Ok(Self { elements, word_len, perms, n_cosets: n, max_len })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn element(&self, e: usize) -> IntMobius {
        self.elements[e]
    }

    pub fn word_len(&self, e: usize) -> usize {
        self.word_len[e] as usize
    }

    #[inline]
    pub fn act(&self, e: usize, coset: usize) -> usize {
        self.perms[e * self.n_cosets + coset] as usize
    }
}

/// The invariant probability measure on a Teichmüller curve: normalized
/// hyperbolic area on `Γ\H` (lifted to the unit tangent bundle).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurveMeasure<T> {
    pub projective_index: usize,
    /// Hyperbolic area of `Γ\H`.
    pub covolume: T,
}

impl<T: Real> CurveMeasure<T> {
    pub fn new(projective_index: usize) -> Self {
        Self { projective_index, covolume: T::lit(projective_index as f64) * modular_area::<T>() }
    }

    /// `4π sinh²(r) / covolume`: area of a hyperbolic disk of radius `2r`,
    /// normalized. Exact only while the ball is embedded.
    pub fn disk_fraction(&self, r: T) -> T {
        let s = r.sinh();
        T::lit(4.0) * T::PI() * s * s / self.covolume
    }

    /// Measure of the Teichmüller ball of radius `r`, for `0 < r ≤ r_emb`.
    pub fn ball_measure(&self, r: T, r_emb: T) -> Result<T> {
        if !(r > T::zero()) || r > r_emb {
            return Err(Error::OutOfRange { radius: r.as_f64(), bound: r_emb.as_f64() });
        }
        Ok(self.disk_fraction(r))
    }

    /// Inverse of [`CurveMeasure::disk_fraction`].
    pub fn radius_for_measure(&self, p: T) -> T {
        (p * self.covolume / (T::lit(4.0) * T::PI())).sqrt().asinh()
    }
}

/// Hyperbolic structure of a Teichmüller curve `Γ\H`.
#[derive(Clone, Debug)]
pub struct CurveGeometry<T> {
    action: CosetAction,
    ball: WordBall,
    measure: CurveMeasure<T>,
}

impl<T: Real> CurveGeometry<T> {
    pub fn new(action: CosetAction, word_length: usize) -> Result<Self> {
        let ball = WordBall::new(&action, word_length)?;
        let measure = CurveMeasure::new(action.len());
        Ok(Self { action, ball, measure })
    }

    pub fn action(&self) -> &CosetAction {
        &self.action
    }

    pub fn ball(&self) -> &WordBall {
        &self.ball
    }

    pub fn measure(&self) -> CurveMeasure<T> {
        self.measure
    }

    pub fn n_cosets(&self) -> usize {
        self.action.len()
    }

    pub fn reduce(&self, coset: usize, p: HPoint<T>) -> Result<(usize, HPoint<T>)> {
        reduce(&self.action, coset, p)
    }

    /// Teichmüller distance between two reduced positions: half the minimum
    /// hyperbolic distance over connecting words in the ball.
    pub fn quotient_dist(&self, u: (usize, HPoint<T>), w: (usize, HPoint<T>)) -> T {
        let mut best = T::infinity();
        for e in 0..self.ball.len() {
            if self.ball.act(e, u.0) != w.0 {
                continue;
            }
            let g = Mobius::<T>::from_int(&self.ball.element(e));
            let Ok(gw) = g.apply(w.1) else { continue };
            let d = hyp_dist(u.1, gw);
            if d < best {
                best = d;
            }
        }
        best / T::lit(2.0)
    }

    /// Exact sample from the invariant probability measure, with the number of
    /// rejection-loop attempts it took.
    pub fn haar_sample_counted<R: Rng + ?Sized>(&self, rng: &mut R) -> (QuotientPoint<T>, u32) {
        let y_min = 3f64.sqrt() / 2.0;
        let coset = rng.gen_range(0..self.n_cosets());
        let mut attempts = 0;
        let (x, y) = loop {
            attempts += 1;
            let x: f64 = rng.gen::<f64>() - 0.5;
            // 1 − u ∈ (0, 1]
            let u: f64 = 1.0 - rng.gen::<f64>();
            let y = y_min / u;
            if x * x + y * y >= 1.0 {
                break (x, y);
            }
        };
        let theta = rng.gen::<f64>() * std::f64::consts::TAU;
        (QuotientPoint { coset, z: HPoint { x: T::lit(x), y: T::lit(y) }, theta: T::lit(theta) }, attempts)
    }

    pub fn haar_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> QuotientPoint<T> {
        self.haar_sample_counted(rng).0
    }

    /// Prepares fast distance queries to a fixed reduced center.
    pub fn center(&self, coset: usize, z: HPoint<T>) -> Result<Center<T>> {
        Center::new(self, coset, z)
    }
}

/// A fixed center `X₀` with its lifts grouped by coset.
#[derive(Clone, Debug)]
pub struct Center<T> {
    coset: usize,
    z: HPoint<T>,
    /// `lifts[c]`: points `g·z₀` for ball elements with `c·g = c₀`.
    lifts: Vec<Vec<HPoint<T>>>,
    r_emb: T,
}

impl<T: Real> Center<T> {
    fn new(geom: &CurveGeometry<T>, coset: usize, z: HPoint<T>) -> Result<Self> {
        if coset >= geom.n_cosets() {
            return Err(Error::Config(format!("center coset {coset} out of range")));
        }
        let (rc, rz) = geom.reduce(coset, z)?;
        if rc != coset || (rz.x - z.x).abs() > T::tolerance() || (rz.y - z.y).abs() > T::tolerance() {
            return Err(Error::Config("center must lie in the standard domain".into()));
        }
        let ball = geom.ball();
        let mut lifts = vec![Vec::new(); geom.n_cosets()];
        let mut min_self = T::infinity();
        for e in 0..ball.len() {
            let g = Mobius::<T>::from_int(&ball.element(e));
            let Ok(p) = g.apply(z) else { continue };
            for (c, bucket) in lifts.iter_mut().enumerate() {
                if ball.act(e, c) == coset {
                    bucket.push(p);
                }
            }
            if e != 0 && ball.act(e, coset) == coset {
                let d = teich_dist(z, p);
                if d < min_self {
                    min_self = d;
                }
            }
        }
        if !(min_self > T::tolerance()) {
            return Err(Error::Config("center is an orbifold point; no embedded ball".into()));
        }
        Ok(Self { coset, z, lifts, r_emb: min_self / T::lit(2.0) })
    }

    pub fn coset(&self) -> usize {
        self.coset
    }

    pub fn z(&self) -> HPoint<T> {
        self.z
    }

    /// Radius below which Teichmüller balls about the center are embedded.
    pub fn r_emb(&self) -> T {
        self.r_emb
    }

    pub fn lifts(&self, coset: usize) -> &[HPoint<T>] {
        &self.lifts[coset]
    }

    /// Teichmüller distance from a reduced position to the center.
    #[inline]
    pub fn distance(&self, coset: usize, z: HPoint<T>) -> T {
        // sinh(d_H / 2) = |z − p| / (2 √(y y_p)); minimize |z − p|² / y_p
        let mut best = T::infinity();
        for p in &self.lifts[coset] {
            let dx = z.x - p.x;
            let dy = z.y - p.y;
            let q = (dx * dx + dy * dy) / p.y;
            if q < best {
                best = q;
            }
        }
        (best / (T::lit(4.0) * z.y)).sqrt().asinh()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbit::enumerate_orbit;
    use crate::origami::Origami;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn torus() -> CurveGeometry<f64> {
        CurveGeometry::new(CosetAction::trivial(), DEFAULT_WORD_LENGTH).unwrap()
    }

    fn l3() -> CurveGeometry<f64> {
        let a = enumerate_orbit(&Origami::l3()).unwrap().coset_action().unwrap();
        CurveGeometry::new(a, DEFAULT_WORD_LENGTH).unwrap()
    }

    /// Classical reduction by repeated `z ↦ z − round(x)` and `z ↦ −1/z`,
    /// written on complex numbers without coset bookkeeping.
    fn classical_reduce(mut x: f64, mut y: f64) -> (f64, f64) {
        loop {
            x -= x.round();
            let r2 = x * x + y * y;
            if r2 >= 1.0 {
                return (x, y);
            }
            x = -x / r2;
            y /= r2;
        }
    }

    #[test]
    fn mobius_basics() {
        let p = HPoint::new(0.3, 1.7).unwrap();
        assert_eq!(Mobius::identity().apply(p).unwrap(), p);
        let q = Mobius::<f64>::diagonal(1.0).apply(HPoint::i()).unwrap();
        assert!((q.x).abs() < 1e-15 && (q.y - 1f64.exp().powi(2)).abs() < 1e-12);
        let r = Mobius::translation(1.0).apply(HPoint::i()).unwrap();
        assert_eq!((r.x, r.y), (1.0, 1.0));
        assert!(Mobius::new(1.0, 1.0, 1.0, 1.0).is_err());
        let m = Mobius::new(2.0, 1.0, 1.0, 1.0).unwrap();
        let neg = Mobius { a: -2.0, b: -1.0, c: -1.0, d: -1.0 };
        assert!(m.projective_eq(&neg));
        assert!(m.mul(&m.inverse()).projective_eq(&Mobius::identity()));
        let far = Mobius { a: 0.0, b: -1.0, c: 1.0, d: 0.0 };
        assert!(far.apply(HPoint { x: 1e160, y: 1e-200 }).is_err());
    }

    #[test]
    fn distances() {
        let i = HPoint::i();
        assert!((hyp_dist(i, HPoint::new(0.0, 2.0).unwrap()) - 2f64.ln()).abs() < 1e-12);
        assert_eq!(hyp_dist(i, i), 0.0);
        let p = HPoint::new(1.0, 1.0).unwrap();
        assert!((hyp_dist(i, p) - 1.5f64.acosh()).abs() < 1e-12);
    }

    #[test]
    fn distance_matches_geodesic_length_integral() {
        // length of the geodesic from i to 1+i: a circular arc centred at ½
        // with radius √5/2; integrate |dz|/y numerically along it
        let r = 5f64.sqrt() / 2.0;
        // angles of 1+i and i seen from the centre
        let t1 = (1.0f64 / r).asin();
        let t0 = std::f64::consts::PI - t1;
        let n = 200_000;
        let h = (t0 - t1) / n as f64;
        let mut len = 0.0;
        for k in 0..n {
            let t = t1 + (k as f64 + 0.5) * h;
            let y = r * t.sin();
            len += r * h / y;
        }
        assert!((len - 1.5f64.acosh()).abs() < 1e-8, "{len}");
    }

    #[test]
    fn reduce_basics() {
        let g = torus();
        let p = HPoint::new(0.1, 1.3).unwrap();
        assert_eq!(g.reduce(0, p).unwrap(), (0, p));
        let l = l3();
        for c in 0..3 {
            let (c1, z1) = l.reduce(c, HPoint::new(0.7, 0.4).unwrap()).unwrap();
            let (c2, z2) = l.reduce(l.action().t_inv(c), HPoint::new(1.7, 0.4).unwrap()).unwrap();
            assert_eq!(c1, c2);
            assert!((z1.x - z2.x).abs() < 1e-12 && (z1.y - z2.y).abs() < 1e-12);
            assert!(z1.in_standard_domain());
        }
    }

    #[test]
    fn reduce_matches_classical_on_torus() {
        let g = torus();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let x: f64 = rng.gen_range(-20.0..20.0);
            let y: f64 = 10f64.powf(rng.gen_range(-4.0..2.0));
            let (_, z) = g.reduce(0, HPoint::new(x, y).unwrap()).unwrap();
            let (ex, ey) = classical_reduce(x, y);
            assert!((z.x - ex).abs() < 1e-9 && (z.y - ey).abs() < 1e-9);
        }
    }

    #[test]
    fn frame_round_trip_and_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = l3();
        for _ in 0..1000 {
            let q = g.haar_sample(&mut rng);
            let m = q.frame();
            assert!((m.det() - 1.0).abs() < 1e-12);
            let back = QuotientPoint::from_frame(q.coset, &m);
            assert!((back.z.x - q.z.x).abs() < 1e-12 && (back.z.y - q.z.y).abs() < 1e-12);
            let dt = (back.theta - q.theta).abs();
            assert!(dt < 1e-9 || (dt - std::f64::consts::TAU).abs() < 1e-9);
            // tangent of t ↦ M g_t · i at t = 0 points along theta
            let eps = 1e-6;
            let ahead = m.mul(&Mobius::diagonal(eps)).base_point();
            let (vx, vy) = (ahead.x - q.z.x, ahead.y - q.z.y);
            let ang = (-vx).atan2(vy).rem_euclid(std::f64::consts::TAU);
            let da = (ang - q.theta).abs();
            assert!(da < 1e-4 || (da - std::f64::consts::TAU).abs() < 1e-4, "{ang} vs {}", q.theta);
        }
    }

    #[test]
    fn word_ball_is_closed_under_inverse() {
        let g = l3();
        let ball = g.ball();
        let all: std::collections::HashSet<_> = (0..ball.len()).map(|e| ball.element(e)).collect();
        for e in 0..ball.len() {
            assert!(all.contains(&ball.element(e).inverse()));
        }
    }

    #[test]
    fn quotient_distance_examples() {
        let g = torus();
        let u = (0, HPoint::new(0.0, 2.0).unwrap());
        assert_eq!(g.quotient_dist(u, u), 0.0);
        let d = g.quotient_dist((0, HPoint::new(0.0, 1.2).unwrap()), u);
        assert!((d - 0.5 * (2.0f64 / 1.2).ln()).abs() < 1e-12);
        let w = (0, HPoint::new(0.0, 2.0).unwrap());
        assert!((g.quotient_dist((0, HPoint::new(0.0, 1.0).unwrap()), w) - 0.5 * 2f64.ln()).abs() < 1e-12);
        assert!(matches!(CurveGeometry::<f64>::new(CosetAction::trivial(), 0), Err(Error::Config(_))));
    }

    #[test]
    fn quotient_distance_stable_in_word_length() {
        for base in [torus(), l3()] {
            let longer = CurveGeometry::<f64>::new(base.action().clone(), DEFAULT_WORD_LENGTH + 2).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            for _ in 0..2000 {
                let u = base.haar_sample(&mut rng).position();
                let w = base.haar_sample(&mut rng).position();
                if u.1.y > 3.0 || w.1.y > 3.0 {
                    continue;
                }
                let a = base.quotient_dist(u, w);
                let b = longer.quotient_dist(u, w);
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn center_distance_agrees_with_quotient_distance() {
        for g in [torus(), l3()] {
            let c = g.center(0, HPoint::new(0.0, 2.0).unwrap()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            for _ in 0..5000 {
                let p = g.haar_sample(&mut rng).position();
                let a = c.distance(p.0, p.1);
                let b = g.quotient_dist(p, (0, c.z()));
                assert!((a - b).abs() < 1e-9 * (1.0 + b), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn embedded_radius_on_torus() {
        let g = torus();
        let c = g.center(0, HPoint::new(0.0, 2.0).unwrap()).unwrap();
        // nearest translate of 2i is 1 + 2i
        assert!((c.r_emb() - 0.25 * 1.125f64.acosh()).abs() < 1e-12);
        assert!(g.center(0, HPoint::i()).is_err());
        assert!(g.center(0, HPoint::new(0.0, 0.5).unwrap()).is_err());
    }

    #[test]
    fn ball_measure_properties() {
        let m = CurveMeasure::<f64>::new(1);
        let r_emb = 0.12;
        for r in [1e-3, 1e-4, 1e-5] {
            let ratio = m.ball_measure(r, r_emb).unwrap() / (r * r);
            assert!((ratio - 4.0 * std::f64::consts::PI / m.covolume).abs() < 1e-4);
        }
        let half = (m.covolume / (8.0 * std::f64::consts::PI)).sqrt().asinh();
        assert!((m.disk_fraction(half) - 0.5).abs() < 1e-12);
        assert!(m.ball_measure(0.2, r_emb).is_err());
        assert!(m.ball_measure(0.0, r_emb).is_err());
        let mut prev = 0.0;
        for k in 1..=100 {
            let v = m.ball_measure(r_emb * k as f64 / 100.0, r_emb).unwrap();
            assert!(v > prev);
            prev = v;
        }
        for p in [1e-6, 0.01, 0.1] {
            assert!((m.disk_fraction(m.radius_for_measure(p)) - p).abs() < 1e-12 * (1.0 + p));
        }
    }

    #[test]
    fn haar_sampler_acceptance_rate() {
        let g = torus();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let attempts: u64 = (0..n).map(|_| g.haar_sample_counted(&mut rng).1 as u64).sum();
        let rate = n as f64 / attempts as f64;
        let expected = (std::f64::consts::PI / 3.0) / (2.0 / 3f64.sqrt());
        assert!((rate - expected).abs() < 0.01, "{rate}");
    }

    #[test]
    fn haar_mean_inverse_height_matches_quadrature() {
        // ∫_F (1/y) dx dy / y² divided by area(F), by midpoint quadrature in
        // (x, s = 1/y) where the measure becomes dx ds
        let (nx, ns) = (2000, 2000);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..nx {
            let x = -0.5 + (i as f64 + 0.5) / nx as f64;
            let smax = 1.0 / (1.0 - x * x).sqrt();
            let h = smax / ns as f64;
            for j in 0..ns {
                let s = (j as f64 + 0.5) * h;
                num += s * h / nx as f64;
                den += h / nx as f64;
            }
        }
        let exact = num / den;
        assert!((den - std::f64::consts::PI / 3.0).abs() < 1e-6);
        let g = l3();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let vals: Vec<f64> = (0..n).map(|_| 1.0 / g.haar_sample(&mut rng).z.y).collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - exact).abs() < 3.0 * se, "{mean} vs {exact} ± {se}");
    }

    #[test]
    fn f32_geometry() {
        let a = enumerate_orbit(&Origami::l3()).unwrap().coset_action().unwrap();
        let g = CurveGeometry::<f32>::new(a, 4).unwrap();
        let (_, z) = g.reduce(0, HPoint::new(3.3f32, 0.05).unwrap()).unwrap();
        assert!(z.in_standard_domain());
        assert!((hyp_dist(HPoint::<f32>::i(), HPoint::new(0.0, 2.0).unwrap()) - 2f32.ln()).abs() < 1e-6);
    }
}
