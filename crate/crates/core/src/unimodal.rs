//! Quasi-quadratic maps f = h∘φ, φ(x) = x², and the combinatorial hunt for
//! the Fibonacci parameter.
//!
//! The critical point sits at the origin in the internal coordinates; other
//! conventions are an affine change of variables away.

use rug::{Complex, Float};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::PrecisionContext;

/// Fibonacci cutting times S_0 = 1, S_1 = 2, S_{k+1} = S_k + S_{k-1}.
pub fn fibonacci_times(count: usize) -> Vec<u64> {
    let mut s = Vec::with_capacity(count);
    if count > 0 {
        s.push(1u64);
    }
    if count > 1 {
        s.push(2u64);
    }
    while s.len() < count {
        let n = s.len();
        s.push(s[n - 1] + s[n - 2]);
    }
    s
}

/// The diffeomorphism h in f = h∘φ, together with the family parameter t.
///
/// `Quadratic` is h(y) = y + t, giving exactly f(x) = x² + t.
/// `ScaledQuadratic` is h(y) = s·y + t (affine conjugates of the quadratic).
/// `CubicPerturbed` is h_ε(y) = t − y + ε·y³, a genuinely nonlinear h with
/// h' < 0, giving f(x) = t − x² + ε·x⁶.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Family {
    Quadratic,
    ScaledQuadratic { scale: f64 },
    CubicPerturbed { epsilon: f64 },
}

impl Family {
    pub fn instantiate(&self, t: Float) -> UnimodalMap {
        let bits = t.prec();
        UnimodalMap {
            family: self.clone(),
            t,
            bits,
        }
    }

    pub fn instantiate_f64(&self, t: f64, ctx: &PrecisionContext) -> UnimodalMap {
        self.instantiate(ctx.float(t))
    }

    /// Search range sweeping from a tame map to the Chebyshev-like end.
    pub fn parameter_range(&self) -> (f64, f64) {
        match self {
            Family::Quadratic => (-2.0, -1.0),
            Family::ScaledQuadratic { scale } => (-2.0 / scale, -1.0 / scale),
            Family::CubicPerturbed { .. } => (1.0, 2.0),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Quadratic => "quadratic",
            Family::ScaledQuadratic { .. } => "scaled-quadratic",
            Family::CubicPerturbed { .. } => "cubic",
        }
    }
}

/// A unimodal map f = h∘φ with critical point c = 0.
#[derive(Clone, Debug)]
pub struct UnimodalMap {
    pub family: Family,
    pub t: Float,
    pub bits: u32,
}

impl UnimodalMap {
    pub fn critical_point(&self) -> Float {
        Float::with_val(self.bits, 0)
    }

    /// h applied to y = φ(x).
    pub fn h(&self, y: &Float) -> Float {
        match &self.family {
            Family::Quadratic => y.clone() + &self.t,
            Family::ScaledQuadratic { scale } => {
                let mut v = y.clone();
                v *= *scale;
                v += &self.t;
                v
            }
            Family::CubicPerturbed { epsilon } => {
                // t - y + eps*y^3
                let mut y3 = y.clone();
                y3.square_mut();
                y3 *= y;
                y3 *= *epsilon;
                y3 -= y;
                y3 += &self.t;
                y3
            }
        }
    }

    pub fn h_prime(&self, y: &Float) -> Float {
        match &self.family {
            Family::Quadratic => Float::with_val(self.bits, 1),
            Family::ScaledQuadratic { scale } => Float::with_val(self.bits, *scale),
            Family::CubicPerturbed { epsilon } => {
                let mut v = y.clone();
                v.square_mut();
                v *= 3.0 * *epsilon;
                v -= 1;
                v
            }
        }
    }

    /// Inverse of the monotone h on the dynamically relevant range.
    pub fn h_inverse(&self, w: &Float) -> Result<Float> {
        match &self.family {
            Family::Quadratic => Ok(w.clone() - &self.t),
            Family::ScaledQuadratic { scale } => {
                let mut v = w.clone();
                v -= &self.t;
                v /= *scale;
                Ok(v)
            }
            Family::CubicPerturbed { .. } => {
                // Newton on h(y) - w = 0; h is strictly decreasing here.
                let mut y = self.t.clone() - w;
                for _ in 0..200 {
                    let hy = self.h(&y);
                    let mut residual = hy - w;
                    let dp = self.h_prime(&y);
                    residual /= &dp;
                    let step_mag = residual.clone().abs();
                    y -= residual;
                    if step_mag < Float::with_val(self.bits, 2f64.powi(-(self.bits as i32) + 4))
                    {
                        return Ok(y);
                    }
                }
                Err(Error::Divergence { steps: 200 })
            }
        }
    }

    pub fn eval(&self, x: &Float) -> Float {
        let mut y = x.clone();
        y.square_mut();
        self.h(&y)
    }

    /// Derivative f'(x) = h'(x²)·2x.
    pub fn derivative(&self, x: &Float) -> Float {
        let mut y = x.clone();
        y.square_mut();
        let mut d = self.h_prime(&y);
        d *= x;
        d *= 2;
        d
    }

    /// Natural entire extension (all supported h are polynomials).
    /// The Ahlfors–Beurling extension lives in the `complexext` module.
    pub fn eval_complex(&self, z: &Complex) -> Complex {
        let mut y = z.clone();
        y.square_mut();
        match &self.family {
            Family::Quadratic => y + &self.t,
            Family::ScaledQuadratic { scale } => {
                y *= *scale;
                y += &self.t;
                y
            }
            Family::CubicPerturbed { epsilon } => {
                let mut y3 = y.clone();
                y3.square_mut();
                y3 *= &y;
                y3 *= *epsilon;
                y3 -= &y;
                y3 += &self.t;
                y3
            }
        }
    }

    /// f(c) = h(0).
    pub fn critical_value(&self) -> Float {
        self.h(&Float::with_val(self.bits, 0))
    }

    /// Radius of the c-symmetric interval used for escape tests.
    pub fn dynamical_radius(&self) -> Float {
        let mut r = self.critical_value();
        r.abs_mut();
        r *= 1.0 + 1e-9;
        r
    }

    /// Checked evaluation on the dynamical interval.
    pub fn eval_checked(&self, x: &Float) -> Result<Float> {
        let r = self.dynamical_radius();
        if x.clone().abs() > r {
            return Err(Error::OrbitEscaped { time: 0 });
        }
        Ok(self.eval(x))
    }

    /// The orientation-reversing fixed point α with f'(α) < -1.
    ///
    /// It sits on the side of the critical point where f is decreasing:
    /// x < 0 when h is increasing, x > 0 when h is decreasing.
    pub fn alpha(&self) -> Result<Float> {
        let decreasing_side_positive = match &self.family {
            Family::Quadratic | Family::ScaledQuadratic { .. } => false,
            Family::CubicPerturbed { .. } => true,
        };
        let r = self.dynamical_radius();
        // Bracket f(x) - x = 0 on the decreasing side.
        let probe = |s: f64| -> Float {
            let mut x = r.clone();
            x *= s;
            if !decreasing_side_positive {
                x = -x;
            }
            let mut v = self.eval(&x);
            v -= &x;
            v
        };
        let mut lo_s = 1e-6;
        let mut hi_s = 1.0;
        let f_lo = probe(lo_s);
        let mut f_hi = probe(hi_s);
        // Extend slightly if the far end has not crossed yet.
        let mut tries = 0;
        while f_lo.is_sign_positive() == f_hi.is_sign_positive() && tries < 8 {
            hi_s *= 1.3;
            f_hi = probe(hi_s);
            tries += 1;
        }
        if f_lo.is_sign_positive() == f_hi.is_sign_positive() {
            return Err(Error::NotFibonacciRegime);
        }
        let lo_sign = f_lo.is_sign_positive();
        for _ in 0..(self.bits as usize + 16) {
            let mid_s = 0.5 * (lo_s + hi_s);
            let f_mid = probe(mid_s);
            if f_mid.is_sign_positive() == lo_sign {
                lo_s = mid_s;
            } else {
                hi_s = mid_s;
            }
        }
        let mut x = r.clone();
        x *= 0.5 * (lo_s + hi_s);
        if !decreasing_side_positive {
            x = -x;
        }
        // Newton polish.
        for _ in 0..64 {
            let mut num = self.eval(&x);
            num -= &x;
            let mut den = self.derivative(&x);
            den -= 1;
            num /= &den;
            x -= num;
        }
        let d = self.derivative(&x);
        if !(d < -1.0) {
            return Err(Error::NotFibonacciRegime);
        }
        Ok(x)
    }

    /// Critical orbit [c, f(c), ..., f^n(c)] with escape checking.
    pub fn orbit(&self, n: usize) -> Result<Vec<Float>> {
        let bound = self.dynamical_radius();
        let mut orbit = Vec::with_capacity(n + 1);
        let mut x = Float::with_val(self.bits, 0);
        orbit.push(x.clone());
        for j in 1..=n {
            x = self.eval(&x);
            if x.clone().abs() > bound {
                return Err(Error::OrbitEscaped { time: j as u64 });
            }
            orbit.push(x.clone());
        }
        Ok(orbit)
    }

    /// Scan t = 1..N recording every strict new minimum of |f^t(c) - c|.
    pub fn closest_returns(&self, n: u64) -> Result<ClosestReturnRecord> {
        let bound = self.dynamical_radius();
        let mut times = Vec::new();
        let mut distances = Vec::new();
        let mut best: Option<Float> = None;
        let mut x = Float::with_val(self.bits, 0);
        for time in 1..=n {
            x = self.eval(&x);
            if x.clone().abs() > bound {
                return Err(Error::OrbitEscaped { time });
            }
            let d = x.clone().abs();
            let improved = match &best {
                None => true,
                Some(b) => d < *b,
            };
            if improved {
                times.push(time);
                distances.push(d.clone());
                best = Some(d);
            }
        }
        Ok(ClosestReturnRecord { times, distances })
    }
}

/// Closest-return bookkeeping: strictly increasing times, strictly
/// decreasing distances.
#[derive(Clone, Debug)]
pub struct ClosestReturnRecord {
    pub times: Vec<u64>,
    pub distances: Vec<Float>,
}

impl ClosestReturnRecord {
    pub fn distances_f64(&self) -> Vec<f64> {
        self.distances.iter().map(|d| d.to_f64()).collect()
    }
}

/// One bisection step of the parameter hunt, kept for the certificate.
#[derive(Clone, Debug, Serialize)]
pub struct BisectionStep {
    pub level: usize,
    pub side: &'static str,
    pub lo: f64,
    pub hi: f64,
    pub probe: f64,
    pub inside: bool,
}

/// Per-level window of parameters realizing the Fibonacci prefix.
#[derive(Clone, Debug, Serialize)]
pub struct LevelWindow {
    pub level: usize,
    pub cutting_time: u64,
    pub lo: f64,
    pub hi: f64,
    pub width: f64,
}

/// Reproducible record of the parameter search.
#[derive(Clone, Debug, Serialize, Default)]
pub struct SearchCertificate {
    pub windows: Vec<LevelWindow>,
    pub steps: Vec<BisectionStep>,
    pub final_width: f64,
}

/// Longest k such that the closest-return times of `map` start exactly with
/// S_0, ..., S_k (and contain nothing else) when iterated for S_k steps.
fn closest_return_score(map: &UnimodalMap, fib: &[u64], k: usize) -> usize {
    let horizon = fib[k];
    let bound = map.dynamical_radius();
    let mut x = Float::with_val(map.bits, 0);
    let mut best: Option<Float> = None;
    let mut matched: usize = 0; // number of S_j already seen
    for time in 1..=horizon {
        x = map.eval(&x);
        if x.clone().abs() > bound {
            return matched.saturating_sub(1);
        }
        let d = x.clone().abs();
        let improved = match &best {
            None => true,
            Some(b) => d < *b,
        };
        if improved {
            if matched > k || fib[matched] != time {
                return matched.saturating_sub(1);
            }
            matched += 1;
            best = Some(d);
        }
    }
    matched.saturating_sub(1)
}

/// Locate the Fibonacci parameter of a full family by nested window
/// refinement on the closest-return prefix.
///
/// Works level by level: inside the current window, a grid scan finds a
/// parameter whose prefix extends one more cutting time, then bisection
/// resolves the edges of the deeper window. The returned parameter is the
/// midpoint of the deepest window, resolved to 2^(-bits/2).
pub fn locate_fibonacci_parameter(
    family: &Family,
    depth: usize,
    ctx: &PrecisionContext,
) -> Result<(Float, SearchCertificate)> {
    if depth < 2 {
        return Err(Error::InvalidInput("depth must be at least 2".into()));
    }
    let fib = fibonacci_times(depth + 3);
    let (range_lo, range_hi) = family.parameter_range();
    let mut lo = ctx.float(range_lo);
    let mut hi = ctx.float(range_hi);
    let mut cert = SearchCertificate::default();
    let tol = ctx.float(2f64).pow_i32(-((ctx.bits / 2) as i32));

    let score_at = |t: &Float, k: usize| -> usize {
        let map = family.instantiate(t.clone());
        closest_return_score(&map, &fib, k)
    };

    for k in 2..=depth {
        // Grid scan for a parameter inside the level-k window.
        let mut grid = 33usize;
        let mut hit: Option<Float> = None;
        while hit.is_none() {
            let width = hi.clone() - &lo;
            for i in 0..grid {
                let mut t = width.clone();
                t *= (i as f64 + 0.5) / grid as f64;
                t += &lo;
                if score_at(&t, k) >= k {
                    hit = Some(t);
                    break;
                }
            }
            if hit.is_none() {
                if grid >= 2048 {
                    return Err(if k <= 4 {
                        Error::CombinatoricsUnreachable
                    } else {
                        Error::InsufficientPrecision {
                            depth: k,
                            bits: ctx.bits,
                        }
                    });
                }
                grid *= 4;
            }
        }
        let hit = hit.unwrap();

        // Resolve the window edges around the hit by monotone bisection on
        // the predicate "closest-return prefix reaches level k".
        let edge_tol = if k == depth {
            tol.clone()
        } else {
            let mut w = hi.clone() - &lo;
            w *= 1e-6;
            if w < tol {
                tol.clone()
            } else {
                w
            }
        };
        let refine_edge = |mut outside: Float,
                           mut inside: Float,
                           side: &'static str,
                           cert: &mut SearchCertificate|
         -> (Float, Float) {
            loop {
                let mut gap = inside.clone() - &outside;
                gap.abs_mut();
                if gap < edge_tol {
                    return (outside, inside);
                }
                let mut mid = inside.clone() + &outside;
                mid /= 2;
                let is_in = score_at(&mid, k) >= k;
                cert.steps.push(BisectionStep {
                    level: k,
                    side,
                    lo: outside.to_f64().min(inside.to_f64()),
                    hi: outside.to_f64().max(inside.to_f64()),
                    probe: mid.to_f64(),
                    inside: is_in,
                });
                if is_in {
                    inside = mid;
                } else {
                    outside = mid;
                }
            }
        };
        let (out_lo, in_lo) = refine_edge(lo.clone(), hit.clone(), "lo", &mut cert);
        let (out_hi, in_hi) = refine_edge(hi.clone(), hit.clone(), "hi", &mut cert);
        let _ = (in_lo, in_hi);
        lo = out_lo;
        hi = out_hi;
        if !(lo < hi) {
            return Err(Error::InsufficientPrecision {
                depth: k,
                bits: ctx.bits,
            });
        }
        let width = (hi.clone() - &lo).to_f64();
        cert.windows.push(LevelWindow {
            level: k,
            cutting_time: fib[k],
            lo: lo.to_f64(),
            hi: hi.to_f64(),
            width,
        });
        // A window thinner than the bisection tolerance cannot be
        // subdivided further at this precision.
        if k < depth {
            let w = hi.clone() - &lo;
            if w < tol {
                return Err(Error::InsufficientPrecision {
                    depth: k,
                    bits: ctx.bits,
                });
            }
        }
    }

    let mut t_star = hi.clone() + &lo;
    t_star /= 2;
    cert.final_width = (hi.clone() - &lo).to_f64();
    // Validate: the midpoint must reproduce the full prefix.
    if score_at(&t_star, depth) < depth {
        return Err(Error::InsufficientPrecision {
            depth,
            bits: ctx.bits,
        });
    }
    Ok((t_star, cert))
}

// rug::Float lacks pow_i32 as a method on owned values in some versions;
// small helper via exp2-style scaling.
trait PowI32 {
    fn pow_i32(self, e: i32) -> Float;
}

impl PowI32 for Float {
    fn pow_i32(self, e: i32) -> Float {
        let mut v = self;
        v = v.pow(e);
        v
    }
}

use rug::ops::Pow;

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> PrecisionContext {
        PrecisionContext::new(128)
    }

    #[test]
    fn quadratic_eval_trivia() {
        let c = ctx();
        let f = Family::Quadratic.instantiate_f64(-1.0, &c);
        assert_eq!(f.eval(&c.float(0.0)).to_f64(), -1.0);
        assert_eq!(f.eval(&c.float(-1.0)).to_f64(), 0.0);
        let g = Family::Quadratic.instantiate_f64(-1.8705286, &c);
        assert!((g.eval(&c.float(0.0)).to_f64() + 1.8705286).abs() < 1e-15);
    }

    #[test]
    fn real_and_complex_eval_agree() {
        let c = ctx();
        for fam in [
            Family::Quadratic,
            Family::ScaledQuadratic { scale: 2.0 },
            Family::CubicPerturbed { epsilon: 0.01 },
        ] {
            let t = match fam {
                Family::CubicPerturbed { .. } => 1.7,
                _ => -1.7,
            };
            let f = fam.instantiate_f64(t, &c);
            for x in [-0.9, -0.3, 0.0, 0.4, 1.1] {
                let real = f.eval(&c.float(x));
                let z = f.eval_complex(&c.complex(x, 0.0));
                let diff = (real.to_f64() - z.real().to_f64()).abs();
                assert!(diff < 1e-30, "family {:?} x {}", f.family, x);
                assert_eq!(z.imag().to_f64(), 0.0);
            }
        }
    }

    #[test]
    fn superattracting_two_cycle_returns_stall() {
        let c = ctx();
        let f = Family::Quadratic.instantiate_f64(-1.0, &c);
        let rec = f.closest_returns(10).unwrap();
        assert_eq!(rec.times, vec![1, 2]);
    }

    #[test]
    fn any_map_has_time_one_return() {
        let c = ctx();
        let f = Family::Quadratic.instantiate_f64(-1.3, &c);
        let rec = f.closest_returns(2).unwrap();
        assert!(rec.times.contains(&1));
    }

    #[test]
    fn escape_is_reported_with_time() {
        let c = ctx();
        let f = Family::Quadratic.instantiate_f64(-2.5, &c);
        match f.closest_returns(100) {
            Err(Error::OrbitEscaped { time }) => assert!(time >= 1),
            other => panic!("expected escape, got {:?}", other),
        }
    }

    #[test]
    fn alpha_of_basilica_is_closed_form() {
        let c = ctx();
        let f = Family::Quadratic.instantiate_f64(-1.0, &c);
        let alpha = f.alpha().unwrap();
        let expected = (1.0 - 5f64.sqrt()) / 2.0;
        assert!((alpha.to_f64() - expected).abs() < 1e-12);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let c = ctx();
        let f = Family::CubicPerturbed { epsilon: 0.01 }.instantiate_f64(1.8, &c);
        let x = c.float(0.7);
        let h = c.float(1e-12);
        let fd = (f.eval(&(x.clone() + &h)) - f.eval(&(x.clone() - &h))) / (c.float(2e-12));
        let an = f.derivative(&x);
        assert!((fd.to_f64() - an.to_f64()).abs() < 1e-9);
    }

    #[test]
    fn fibonacci_times_prefix() {
        assert_eq!(fibonacci_times(8), vec![1, 2, 3, 5, 8, 13, 21, 34]);
    }
}
