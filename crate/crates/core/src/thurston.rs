//! Thurston pull-back on ℝ-symmetric marked triples {γ, 0, a}, γ < 0,
//! with a = (1+√5)/2.

use rug::Float;

use crate::error::{Error, Result};
use crate::numerics::PrecisionContext;

/// Normalized Teichmüller coordinate of an ℝ-symmetric triple.
#[derive(Clone, Debug)]
pub struct MarkedTriple {
    pub gamma: Float,
}

impl MarkedTriple {
    pub fn new(gamma: Float) -> Result<Self> {
        if !(gamma < 0) {
            return Err(Error::TripleDegenerate {
                gamma: gamma.to_f64(),
            });
        }
        Ok(MarkedTriple { gamma })
    }
}

/// The quadratic polynomial p_γ fixing a and carrying 0 to γ:
/// p_γ(z) = ((a-γ)/a²)·z² + γ.
#[derive(Clone, Debug)]
pub struct PullbackPolynomial {
    pub gamma: Float,
    pub leading: Float,
}

impl PullbackPolynomial {
    pub fn new(gamma: &Float, ctx: &PrecisionContext) -> Self {
        let a = ctx.golden_ratio();
        let mut leading = a.clone() - gamma;
        let mut a2 = a;
        a2.square_mut();
        leading /= a2;
        PullbackPolynomial {
            gamma: gamma.clone(),
            leading,
        }
    }

    pub fn eval(&self, z: &Float) -> Float {
        let mut v = z.clone();
        v.square_mut();
        v *= &self.leading;
        v += &self.gamma;
        v
    }

    /// The negative root of p_γ(z) = 0.
    pub fn negative_root(&self) -> Float {
        let mut v = -self.gamma.clone();
        v /= &self.leading;
        v.sqrt_mut();
        -v
    }
}

/// One pull-back step: γ ↦ -a·sqrt(-γ/(a-γ)), the negative p_γ-preimage of γ.
pub fn thurston_step(t: &MarkedTriple, ctx: &PrecisionContext) -> Result<MarkedTriple> {
    if !(t.gamma < 0) {
        return Err(Error::TripleDegenerate {
            gamma: t.gamma.to_f64(),
        });
    }
    let a = ctx.golden_ratio();
    let mut v = -t.gamma.clone();
    let den = a.clone() - &t.gamma;
    v /= den;
    v.sqrt_mut();
    v *= &a;
    MarkedTriple::new(-v)
}

/// Fixed-point iteration record.
#[derive(Clone, Debug)]
pub struct ThurstonRun {
    pub fixed_point: MarkedTriple,
    pub steps: usize,
    /// Per-step contraction ratios |γ_{k+1}+1| / |γ_k+1|.
    pub rates: Vec<f64>,
    /// Trajectory γ_0, γ_1, ... including the final iterate.
    pub trajectory: Vec<Float>,
}

/// Iterate the pull-back until |γ_{k+1} - γ_k| < tol.
pub fn iterate_to_fixed_point(
    t0: &MarkedTriple,
    tol: &Float,
    ctx: &PrecisionContext,
) -> Result<ThurstonRun> {
    if !(tol.clone() > 0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let max_steps = 10_000usize;
    let mut gamma = t0.gamma.clone();
    let mut trajectory = vec![gamma.clone()];
    let mut rates = Vec::new();
    for step in 1..=max_steps {
        let next = thurston_step(&MarkedTriple::new(gamma.clone())?, ctx)?;
        let prev_err = (gamma.clone() + 1u32).abs();
        let next_err = (next.gamma.clone() + 1u32).abs();
        if prev_err != 0 {
            rates.push((next_err / prev_err).to_f64());
        }
        let delta = (next.gamma.clone() - &gamma).abs();
        gamma = next.gamma;
        trajectory.push(gamma.clone());
        if delta < *tol {
            return Ok(ThurstonRun {
                fixed_point: MarkedTriple::new(gamma)?,
                steps: step,
                rates,
                trajectory,
            });
        }
    }
    Err(Error::Divergence { steps: max_steps })
}

/// The contraction factor of the step map at the fixed point γ = -1 is
/// 1/(2a); used as the reference for the observed asymptotic rate.
pub fn fixed_point_contraction(ctx: &PrecisionContext) -> Float {
    let mut v = ctx.golden_ratio();
    v *= 2;
    v.recip_mut();
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> PrecisionContext {
        PrecisionContext::new(128)
    }

    #[test]
    fn golden_identity_holds() {
        let c = ctx();
        let a = c.golden_ratio();
        let mut a2 = a.clone();
        a2.square_mut();
        let residual = (a2 - &a - 1u32).abs().to_f64();
        assert!(residual < 1e-36);
    }

    #[test]
    fn gamma_minus_one_is_fixed() {
        let c = ctx();
        let t = MarkedTriple::new(c.float(-1.0)).unwrap();
        let t1 = thurston_step(&t, &c).unwrap();
        assert!((t1.gamma.clone() + 1u32).abs().to_f64() < 1e-36);
    }

    #[test]
    fn degenerate_triple_is_rejected() {
        let c = ctx();
        assert!(MarkedTriple::new(c.float(0.5)).is_err());
        assert!(MarkedTriple::new(c.float(0.0)).is_err());
    }

    #[test]
    fn pullback_polynomial_pins_marked_points() {
        let c = ctx();
        let gamma = c.float(-0.7);
        let p = PullbackPolynomial::new(&gamma, &c);
        let a = c.golden_ratio();
        assert!((p.eval(&a) - &a).abs().to_f64() < 1e-36);
        assert!((p.eval(&c.float(0.0)) - &gamma).abs().to_f64() < 1e-36);
    }

    #[test]
    fn step_agrees_with_polynomial_root() {
        let c = ctx();
        for g in [-0.1, -0.9, -2.5, -40.0] {
            let gamma = c.float(g);
            let step = thurston_step(&MarkedTriple::new(gamma.clone()).unwrap(), &c).unwrap();
            let root = PullbackPolynomial::new(&gamma, &c).negative_root();
            assert!((step.gamma - root).abs().to_f64() < 1e-30);
        }
    }
}
