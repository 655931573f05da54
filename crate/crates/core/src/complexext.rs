//! Complex extensions of quasi-quadratic maps, disk pull-backs, puzzle
//! pieces, the Julia set of z²-1 and the geometric diagnostics attached to
//! them.
//!
//! Two extension modes: exact conformal inverse branches when h is affine
//! (the pure quadratic map), and the Ahlfors-Beurling integral continuation
//! for genuinely nonlinear h. Complex pull-backs run in exact mode; the
//! Ahlfors-Beurling mode supports forward evaluation and the asymptotic
//! conformality scan.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rug::{Complex, Float};

use crate::error::{Error, Result};
use crate::numerics::{hausdorff_distance, PrecisionContext, Polyline, RealInterval};
use crate::renorm::Hierarchy;
use crate::unimodal::{Family, UnimodalMap};

/// Lens-shaped neighborhood D_θ(I) bounded by two ℝ-symmetric circle arcs
/// through ∂I meeting the real line at angle θ; θ = π/2 is the round disk
/// on diameter I.
#[derive(Clone, Debug)]
pub struct ThetaDomain {
    pub base: RealInterval,
    pub theta: f64,
}

impl ThetaDomain {
    pub fn new(base: RealInterval, theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta <= std::f64::consts::FRAC_PI_2) {
            return Err(Error::InvalidInput(
                "theta must lie in (0, pi/2]".into(),
            ));
        }
        Ok(ThetaDomain { base, theta })
    }

    /// Closed polyline tracing both arcs.
    pub fn boundary(&self, npts: usize) -> Result<Polyline> {
        if npts < 8 {
            return Err(Error::InvalidInput("need at least 8 points".into()));
        }
        let prec = self.base.lo().prec();
        let mid = self.base.midpoint();
        let half = self.base.length() / 2u32;
        let theta = self.theta;
        // Circle through the endpoints meeting ℝ at angle θ: center at
        // (mid, -k) with k = half/tanθ, radius half/sinθ. The upper arc runs
        // from the right endpoint to the left one; apex height half·tan(θ/2).
        let k = theta.cos() / theta.sin();
        let radius_f = 1.0 / theta.sin();
        let per_arc = npts / 2;
        let mut pts: Vec<Complex> = Vec::with_capacity(2 * per_arc);
        let phi_start = {
            // angle of the right endpoint as seen from the center (0, -k)
            (k).atan2(1.0)
        };
        let phi_end = std::f64::consts::PI - phi_start;
        for i in 0..per_arc {
            let phi = phi_start + (phi_end - phi_start) * i as f64 / per_arc as f64;
            let x = radius_f * phi.cos();
            let y = -k + radius_f * phi.sin();
            let mut zr = half.clone();
            zr *= x;
            zr += &mid;
            let mut zi = half.clone();
            zi *= y;
            pts.push(Complex::with_val(prec, (zr, zi)));
        }
        // Lower arc: mirror, from left endpoint back to the right.
        for i in 0..per_arc {
            let phi = phi_end - (phi_end - phi_start) * i as f64 / per_arc as f64;
            let x = radius_f * phi.cos();
            let y = -k + radius_f * phi.sin();
            let mut zr = half.clone();
            zr *= x;
            zr += &mid;
            let mut zi = half.clone();
            zi *= -y;
            pts.push(Complex::with_val(prec, (zr, zi)));
        }
        Polyline::new_closed(pts)
    }
}

/// Round disk D(I) boundary.
pub fn disk_boundary(base: &RealInterval, npts: usize) -> Result<Polyline> {
    ThetaDomain::new(base.clone(), std::f64::consts::FRAC_PI_2)?.boundary(npts)
}

/// A complex puzzle piece: closed ℝ-symmetric boundary with its real trace.
#[derive(Clone, Debug)]
pub struct PuzzlePiece {
    pub boundary: Polyline,
    pub base: RealInterval,
    pub level: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExtensionMode {
    Exact,
    AhlforsBeurling,
}

/// Complex extension of a quasi-quadratic map.
#[derive(Clone, Debug)]
pub struct ComplexExtension {
    pub map: UnimodalMap,
    pub mode: ExtensionMode,
    pub quad_rel_tol: f64,
}

impl ComplexExtension {
    pub fn new(map: UnimodalMap, mode: ExtensionMode) -> Result<Self> {
        if mode == ExtensionMode::Exact {
            match map.family {
                Family::Quadratic | Family::ScaledQuadratic { .. } => {}
                _ => {
                    return Err(Error::Unsupported(
                        "exact mode requires an affine diffeomorphism h".into(),
                    ))
                }
            }
        }
        Ok(ComplexExtension {
            map,
            mode,
            quad_rel_tol: 1e-12,
        })
    }

    pub fn eval(&self, z: &Complex) -> Result<Complex> {
        match self.mode {
            ExtensionMode::Exact => Ok(self.map.eval_complex(z)),
            ExtensionMode::AhlforsBeurling => {
                let mut w = z.clone();
                w.square_mut();
                let map = &self.map;
                ab_extend(|y| map.h(y), &w, self.quad_rel_tol)
            }
        }
    }

    /// h⁻¹ on the complex plane — affine h only.
    fn h_inverse_complex(&self, w: &Complex) -> Result<Complex> {
        match &self.map.family {
            Family::Quadratic => Ok(w.clone() - &self.map.t),
            Family::ScaledQuadratic { scale } => {
                let mut v = w.clone() - &self.map.t;
                v /= *scale;
                Ok(v)
            }
            _ => Err(Error::Unsupported(
                "complex inverse branches need exact mode (affine h)".into(),
            )),
        }
    }

    /// Pre-image of w through the monotone inverse branch on one side of
    /// the critical point. Pieces never cross the branch cut: their real
    /// trace stays on one side of the critical value, so the principal
    /// square root is globally valid on the piece.
    fn inverse_branch(&self, w: &Complex, sign: i8) -> Result<Complex> {
        let u = self.h_inverse_complex(w)?;
        let mut s = u.sqrt();
        if sign < 0 {
            s = -s;
        }
        Ok(s)
    }
}

/// Ahlfors-Beurling continuation of a real diffeomorphism h:
/// ĥ(x+iy) = (1/2y)∫_{x-y}^{x+y} h + (i/y)(∫_x^{x+y} h - ∫_{x-y}^x h),
/// extended to the lower half plane by conjugation symmetry.
pub fn ab_extend<H: Fn(&Float) -> Float>(h: H, z: &Complex, rel_tol: f64) -> Result<Complex> {
    let prec = z.real().prec();
    let x = Float::with_val(prec, z.real());
    let y = Float::with_val(prec, z.imag());
    if y == 0 {
        let hx = h(&x);
        return Ok(Complex::with_val(prec, (hx, 0)));
    }
    let ya = y.clone().abs();
    let left = x.clone() - &ya;
    let right = x.clone() + &ya;
    let i_right = simpson_adaptive(&h, &x, &right, rel_tol)?;
    let i_left = simpson_adaptive(&h, &left, &x, rel_tol)?;
    let mut u = i_right.clone() + &i_left;
    u /= &ya;
    u /= 2u32;
    let mut v = i_right - &i_left;
    v /= &ya;
    if y.is_sign_negative() {
        v = -v;
    }
    Ok(Complex::with_val(prec, (u, v)))
}

/// Adaptive Simpson quadrature at working precision.
fn simpson_adaptive<H: Fn(&Float) -> Float>(
    h: &H,
    a: &Float,
    b: &Float,
    rel_tol: f64,
) -> Result<Float> {
    let prec = a.prec();
    let simpson = |fa: &Float, fm: &Float, fb: &Float, width: &Float| -> Float {
        let mut s = fm.clone();
        s *= 4u32;
        s += fa;
        s += fb;
        s *= width;
        s /= 6u32;
        s
    };
    let fa = h(a);
    let fb = h(b);
    let mut m = a.clone() + b;
    m /= 2u32;
    let fm = h(&m);
    let width = b.clone() - a;
    let s0 = simpson(&fa, &fm, &fb, &width);
    let tol = {
        let mut t = s0.clone().abs();
        t += 1e-30;
        t *= rel_tol;
        t
    };

    struct Frame {
        a: Float,
        m: Float,
        b: Float,
        fa: Float,
        fm: Float,
        fb: Float,
        s: Float,
        tol: Float,
        depth: u32,
    }
    let mut stack = vec![Frame {
        a: a.clone(),
        m,
        b: b.clone(),
        fa,
        fm,
        fb,
        s: s0,
        tol,
        depth: 0,
    }];
    let mut total = Float::with_val(prec, 0);
    let mut worst_ratio = 0f64;
    while let Some(fr) = stack.pop() {
        let mut lm = fr.a.clone() + &fr.m;
        lm /= 2u32;
        let mut rm = fr.m.clone() + &fr.b;
        rm /= 2u32;
        let flm = h(&lm);
        let frm = h(&rm);
        let half_l = fr.m.clone() - &fr.a;
        let half_r = fr.b.clone() - &fr.m;
        let sl = simpson(&fr.fa, &flm, &fr.fm, &half_l);
        let sr = simpson(&fr.fm, &frm, &fr.fb, &half_r);
        let mut diff = sl.clone() + &sr;
        diff -= &fr.s;
        let err = diff.clone().abs();
        let fifteen_tol = fr.tol.clone() * 15u32;
        if err <= fifteen_tol || fr.depth >= 48 {
            if fr.depth >= 48 {
                let denom = fr.tol.to_f64().abs().max(1e-300);
                worst_ratio = worst_ratio.max(err.to_f64() / (15.0 * denom));
            }
            let mut leaf = sl + &sr;
            let mut corr = diff;
            corr /= 15u32;
            leaf += corr;
            total += leaf;
        } else {
            let mut half_tol = fr.tol.clone();
            half_tol /= 2u32;
            stack.push(Frame {
                a: fr.a,
                m: lm,
                b: fr.m.clone(),
                fa: fr.fa,
                fm: flm,
                fb: fr.fm.clone(),
                s: sl,
                tol: half_tol.clone(),
                depth: fr.depth + 1,
            });
            stack.push(Frame {
                a: fr.m,
                m: rm,
                b: fr.b,
                fa: fr.fm,
                fm: frm,
                fb: fr.fb,
                s: sr,
                tol: half_tol,
                depth: fr.depth + 1,
            });
        }
    }
    if worst_ratio > 1.0 {
        return Err(Error::QuadratureNonConvergence {
            achieved: worst_ratio * rel_tol,
        });
    }
    Ok(total)
}

/// Winding number of a closed polyline around a point (angle summation).
pub fn winding_number(pts: &[Complex], around: &Complex) -> i32 {
    let mut total = 0f64;
    let n = pts.len();
    let rel = |k: usize| -> (f64, f64) {
        let dre = Float::with_val(pts[k].real().prec(), pts[k].real()) - around.real();
        let dim = Float::with_val(pts[k].imag().prec(), pts[k].imag()) - around.imag();
        (dre.to_f64(), dim.to_f64())
    };
    let mut prev = rel(0);
    for k in 1..=n {
        let cur = rel(k % n);
        let cross = prev.0 * cur.1 - prev.1 * cur.0;
        let dot = prev.0 * cur.0 + prev.1 * cur.1;
        total += cross.atan2(dot);
        prev = cur;
    }
    (total / (2.0 * std::f64::consts::PI)).round() as i32
}

/// Is `p` inside the closed polyline (winding test on f64 coordinates)?
pub fn point_in_polyline(pts: &[[f64; 2]], p: [f64; 2]) -> bool {
    let mut total = 0f64;
    let n = pts.len();
    let mut prev = (pts[0][0] - p[0], pts[0][1] - p[1]);
    for k in 1..=n {
        let q = pts[k % n];
        let cur = (q[0] - p[0], q[1] - p[1]);
        let cross = prev.0 * cur.1 - prev.1 * cur.0;
        let dot = prev.0 * cur.0 + prev.1 * cur.1;
        total += cross.atan2(dot);
        prev = cur;
    }
    (total / (2.0 * std::f64::consts::PI)).round() as i32 != 0
}

fn edge_len(a: &Complex, b: &Complex) -> f64 {
    let dre = Float::with_val(a.real().prec(), a.real()) - b.real();
    let dim = Float::with_val(a.imag().prec(), a.imag()) - b.imag();
    dre.to_f64().hypot(dim.to_f64())
}

fn midpoint_c(a: &Complex, b: &Complex) -> Complex {
    let mut m = a.clone() + b;
    m /= 2u32;
    m
}

/// Map a closed boundary through `inv`, adaptively subdividing source edges
/// until every image edge is at most `max_edge` long.
fn map_boundary_adaptive<F: Fn(&Complex) -> Result<Complex> + Sync>(
    src: &[Complex],
    inv: &F,
    max_edge: f64,
    max_depth: u32,
) -> Result<Vec<Complex>> {
    let n = src.len();
    let images: Vec<Complex> = src
        .par_iter()
        .map(|w| inv(w))
        .collect::<Result<Vec<_>>>()?;
    let chunks: Vec<Vec<Complex>> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<Vec<Complex>> {
            let j = (i + 1) % n;
            let mut out = vec![images[i].clone()];
            subdivide_edge(
                &src[i],
                &src[j],
                &images[i],
                &images[j],
                inv,
                max_edge,
                max_depth,
                &mut out,
            )?;
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut flat = Vec::with_capacity(chunks.iter().map(|c| c.len()).sum());
    for c in chunks {
        flat.extend(c);
    }
    if flat.len() > 4_000_000 {
        return Err(Error::InvalidInput(
            "pull-back refinement budget exceeded".into(),
        ));
    }
    Ok(flat)
}

#[allow(clippy::too_many_arguments)]
fn subdivide_edge<F: Fn(&Complex) -> Result<Complex>>(
    a: &Complex,
    b: &Complex,
    ia: &Complex,
    ib: &Complex,
    inv: &F,
    max_edge: f64,
    depth: u32,
    out: &mut Vec<Complex>,
) -> Result<()> {
    if depth == 0 || edge_len(ia, ib) <= max_edge {
        return Ok(());
    }
    let m = midpoint_c(a, b);
    let im = inv(&m)?;
    subdivide_edge(a, &m, ia, &im, inv, max_edge, depth - 1, out)?;
    out.push(im.clone());
    subdivide_edge(&m, b, &im, ib, inv, max_edge, depth - 1, out)
}

/// How the final backward step of a pull-back behaves.
#[derive(Clone, Debug)]
pub enum LastStep {
    Monotone(i8),
    Fold,
}

/// The backward itinerary of a pull-back: monotone branch signs applied in
/// order, then the last step.
#[derive(Clone, Debug)]
pub struct PullbackPath {
    pub monotone_signs: Vec<i8>,
    pub last: LastStep,
    pub target_base: RealInterval,
    pub target_level: usize,
}

impl PullbackPath {
    /// The central-branch path at hierarchy level n: pull Δ over Iⁿ⁻¹ back
    /// to the piece over Iⁿ along the critical orbit.
    pub fn central(hier: &Hierarchy, n: usize) -> Self {
        let level = hier.level(n);
        let r = level.time_central;
        let signs: Vec<i8> = (1..r)
            .rev()
            .map(|j| {
                if hier.orbit[j as usize].is_sign_positive() {
                    1
                } else {
                    -1
                }
            })
            .collect();
        PullbackPath {
            monotone_signs: signs,
            last: LastStep::Fold,
            target_base: level.central.clone(),
            target_level: n,
        }
    }
}

/// Pull a puzzle piece back along a branch itinerary, applying inverse
/// branches pointwise to the boundary with adaptive refinement.
pub fn pull_back_piece(
    ext: &ComplexExtension,
    piece: &PuzzlePiece,
    path: &PullbackPath,
    max_edge: f64,
) -> Result<PuzzlePiece> {
    if ext.mode != ExtensionMode::Exact {
        return Err(Error::Unsupported(
            "complex pull-backs run in exact mode".into(),
        ));
    }
    let prec = ext.map.bits;
    let crit_value = Complex::with_val(prec, (ext.map.critical_value(), 0));
    let base_len = path.target_base.length().to_f64();
    let rel = (max_edge / base_len).max(1e-7);
    let mut cur: Vec<Complex> = piece.boundary.points.clone();

    let mut apply_monotone = |pts: &[Complex], sign: i8| -> Result<Vec<Complex>> {
        if winding_number(pts, &crit_value) != 0 {
            return Err(Error::CombinatoricsBroken {
                level: path.target_level,
                detail: "critical value inside a piece during a monotone pull-back \
                         (start level too small)"
                    .into(),
            });
        }
        let diam = polyline_diameter(pts);
        let step_edge = (rel * diam).max(1e-300);
        map_boundary_adaptive(pts, &|w| ext.inverse_branch(w, sign), step_edge, 14)
    };

    for &sign in &path.monotone_signs {
        cur = apply_monotone(&cur, sign)?;
    }

    let final_pts = match path.last {
        LastStep::Monotone(sign) => apply_monotone(&cur, sign)?,
        LastStep::Fold => {
            if winding_number(&cur, &crit_value) == 0 {
                return Err(Error::CombinatoricsBroken {
                    level: path.target_level,
                    detail: "folding step but the critical value is outside the piece".into(),
                });
            }
            let mut attempt = cur;
            let mut lifted = None;
            for _retry in 0..5 {
                match fold_lift(ext, &attempt)? {
                    Some(half) => {
                        lifted = Some(half);
                        break;
                    }
                    None => {
                        // Too coarse near the branch point: refine uniformly.
                        attempt = refine_uniform(&attempt);
                    }
                }
            }
            let half = lifted.ok_or(Error::CriticalCollision { retries: 5 })?;
            let mut full = Vec::with_capacity(half.len() * 2);
            full.extend(half.iter().cloned());
            full.extend(half.iter().map(|z| -z.clone()));
            full
        }
    };
    Ok(PuzzlePiece {
        boundary: Polyline::new_closed(final_pts)?,
        base: path.target_base.clone(),
        level: path.target_level,
    })
}

fn polyline_diameter(pts: &[Complex]) -> f64 {
    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for p in pts {
        let x = p.real().to_f64();
        let y = p.imag().to_f64();
        xmin = xmin.min(x);
        xmax = xmax.max(x);
        ymin = ymin.min(y);
        ymax = ymax.max(y);
    }
    (xmax - xmin).hypot(ymax - ymin)
}

fn refine_uniform(pts: &[Complex]) -> Vec<Complex> {
    let n = pts.len();
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        let j = (i + 1) % n;
        out.push(pts[i].clone());
        out.push(midpoint_c(&pts[i], &pts[j]));
    }
    out
}

/// Continuous square-root lift of a boundary winding once around the
/// critical value. Returns half of the folded boundary, or None when the
/// sampling is too coarse to track the branch.
fn fold_lift(ext: &ComplexExtension, pts: &[Complex]) -> Result<Option<Vec<Complex>>> {
    let n = pts.len();
    // Pre-images u = h⁻¹(w); the fold piece boundary is ±sqrt(u).
    let us: Vec<Complex> = pts
        .par_iter()
        .map(|w| ext.h_inverse_complex(w))
        .collect::<Result<Vec<_>>>()?;
    // Start where u is most clearly on the positive real side.
    let start = (0..n)
        .max_by(|&i, &j| {
            let a = us[i].real().to_f64();
            let b = us[j].real().to_f64();
            a.partial_cmp(&b).unwrap()
        })
        .unwrap();
    let mut half = Vec::with_capacity(n + 1);
    let first = us[start].clone().sqrt();
    let mut prev = first.clone();
    half.push(first.clone());
    for step in 1..=n {
        let k = (start + step) % n;
        if us[k].real().to_f64() == 0.0 && us[k].imag().to_f64() == 0.0 {
            return Ok(None); // vertex exactly on the critical value
        }
        let s = us[k].clone().sqrt();
        let d_pos = edge_len(&s, &prev);
        let neg = -s.clone();
        let d_neg = edge_len(&neg, &prev);
        let (chosen, d_min, d_max) = if d_pos <= d_neg {
            (s, d_pos, d_neg)
        } else {
            (neg, d_neg, d_pos)
        };
        if d_max > 0.0 && d_min / d_max > 0.5 {
            return Ok(None); // ambiguous branch choice: refine and retry
        }
        prev = chosen.clone();
        if step < n {
            half.push(chosen);
        } else {
            // Closure: after a full loop the lift must land on -start.
            let target = -first.clone();
            let err = edge_len(&chosen, &target);
            let scale = polyline_diameter(&half).max(1e-300);
            if err > 0.05 * scale {
                return Ok(None);
            }
        }
    }
    Ok(Some(half))
}

/// The nested puzzle pieces Δᵐ ⊃ Δᵐ⁺¹ ⊃ …: Δᵐ = D(Iᵐ) and each deeper
/// piece is the central-branch pull-back of the previous one.
pub fn puzzle_hierarchy(
    ext: &ComplexExtension,
    hier: &Hierarchy,
    m: usize,
    n_end: usize,
    budget: usize,
) -> Result<Vec<PuzzlePiece>> {
    if m < 1 || n_end <= m || n_end > hier.depth() {
        return Err(Error::InvalidInput(
            "need 1 <= m < n_end <= hierarchy depth".into(),
        ));
    }
    let npts0 = budget.clamp(64, 8192);
    let base_m = hier.level(m).central.clone();
    let disk = disk_boundary(&base_m, npts0)?;
    let mut pieces = vec![PuzzlePiece {
        boundary: disk,
        base: base_m,
        level: m,
    }];
    for n in (m + 1)..=n_end {
        let path = PullbackPath::central(hier, n);
        let max_edge = 8.0 * path.target_base.length().to_f64() / budget as f64;
        let next = pull_back_piece(ext, pieces.last().unwrap(), &path, max_edge)?;
        pieces.push(next);
    }
    Ok(pieces)
}

/// Affine copy of a piece with base T = [-a, a].
pub fn rescale_piece(piece: &PuzzlePiece, ctx: &PrecisionContext) -> Result<PuzzlePiece> {
    let a = ctx.golden_ratio();
    let mid = piece.base.midpoint();
    let half = piece.base.length() / 2u32;
    let scale = a.clone() / &half;
    let pts: Vec<Complex> = piece
        .boundary
        .points
        .iter()
        .map(|z| {
            let mut v = z.clone();
            v -= &mid;
            v *= &scale;
            v
        })
        .collect();
    Ok(PuzzlePiece {
        boundary: Polyline::with_params(pts, piece.boundary.params.clone(), true)?,
        base: RealInterval::new(-a.clone(), a)?,
        level: piece.level,
    })
}

/// Boundary points of the Julia set by random inverse iteration from the
/// repelling fixed point.
pub fn julia_inverse_points(c: (f64, f64), budget: usize, seed: u64) -> Vec<[f64; 2]> {
    use num_complex::Complex64;
    let c = Complex64::new(c.0, c.1);
    let disc = (Complex64::new(1.0, 0.0) - c * 4.0).sqrt();
    let z1 = (Complex64::new(1.0, 0.0) + disc) / 2.0;
    let z2 = (Complex64::new(1.0, 0.0) - disc) / 2.0;
    let mut z = if z1.norm() >= z2.norm() { z1 } else { z2 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let burn = 64usize;
    let mut out = Vec::with_capacity(budget);
    let mut produced = 0usize;
    let mut step = 0usize;
    while produced < budget {
        let mut s = (z - c).sqrt();
        if rng.gen::<bool>() {
            s = -s;
        }
        z = s;
        step += 1;
        if step > burn {
            out.push([z.re, z.im]);
            produced += 1;
        }
    }
    out
}

/// The repelling fixed point used to seed inverse iteration.
pub fn julia_repelling_fixed_point(c: (f64, f64)) -> (f64, f64) {
    use num_complex::Complex64;
    let c = Complex64::new(c.0, c.1);
    let disc = (Complex64::new(1.0, 0.0) - c * 4.0).sqrt();
    let z1 = (Complex64::new(1.0, 0.0) + disc) / 2.0;
    let z2 = (Complex64::new(1.0, 0.0) - disc) / 2.0;
    let z = if z1.norm() >= z2.norm() { z1 } else { z2 };
    (z.re, z.im)
}

/// Escape-time membership test for the filled Julia set of z² + c.
pub fn julia_membership(
    c: (f64, f64),
    escape_radius: f64,
    max_iters: u64,
) -> impl Fn([f64; 2]) -> bool {
    move |p: [f64; 2]| {
        let mut zr = p[0];
        let mut zi = p[1];
        let r2 = escape_radius * escape_radius;
        for _ in 0..max_iters {
            let nr = zr * zr - zi * zi + c.0;
            let ni = 2.0 * zr * zi + c.1;
            zr = nr;
            zi = ni;
            if zr * zr + zi * zi > r2 {
                return false;
            }
        }
        true
    }
}

#[derive(Clone, Debug)]
pub struct Figure1Row {
    pub level: usize,
    pub hausdorff: f64,
}

#[derive(Clone, Debug)]
pub struct Figure1Report {
    pub rows: Vec<Figure1Row>,
    /// Length of the longest strictly decreasing run ending at the deepest
    /// level.
    pub decreasing_tail: usize,
}

/// Hausdorff distances between rescaled piece boundaries and a Julia
/// boundary sample, with the monotone-trend bookkeeping.
pub fn figure1_report(
    rescaled: &[PuzzlePiece],
    julia: &[[f64; 2]],
) -> Result<Figure1Report> {
    if rescaled.len() < 2 {
        return Err(Error::InvalidInput("need at least 2 levels".into()));
    }
    let mut rows = Vec::with_capacity(rescaled.len());
    for piece in rescaled {
        let pts = piece.boundary.to_f64_points();
        let d = hausdorff_distance(&pts, julia)?;
        rows.push(Figure1Row {
            level: piece.level,
            hausdorff: d,
        });
    }
    let mut tail = 1usize;
    for w in rows.windows(2).rev() {
        if w[1].hausdorff < w[0].hausdorff {
            tail += 1;
        } else {
            break;
        }
    }
    Ok(Figure1Report {
        rows,
        decreasing_tail: tail,
    })
}

/// Quantitative record of one Lemma-1 style containment experiment.
#[derive(Clone, Debug)]
pub struct ContainmentRow {
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
    pub fold_cover_fraction: f64,
}

/// Pull D(Ĩⁿ) back through the central branch and measure the scaling β of
/// the smallest cocentric disk over Iⁿ⁺¹ containing the image.
pub fn lemma1_containment(
    ext: &ComplexExtension,
    hier: &Hierarchy,
    alpha: f64,
    n_from: usize,
    n_to: usize,
    npts: usize,
) -> Result<Vec<ContainmentRow>> {
    if n_to + 1 > hier.depth() {
        return Err(Error::InvalidInput(
            "need hierarchy depth one past n_to".into(),
        ));
    }
    let mut rows = Vec::new();
    for n in n_from..=n_to {
        let scaled = hier.level(n).central.scaled(alpha)?;
        let disk = disk_boundary(&scaled, npts)?;
        let piece = PuzzlePiece {
            boundary: disk,
            base: scaled,
            level: n,
        };
        let path = PullbackPath::central(hier, n + 1);
        let max_edge = 4.0 * path.target_base.length().to_f64() / npts as f64;
        let image = pull_back_piece(ext, &piece, &path, max_edge)?;
        let target = &hier.level(n + 1).central;
        let half = target.length().to_f64() / 2.0;
        let mut max_abs = 0f64;
        for z in &image.boundary.points {
            let x = z.real().to_f64();
            let y = z.imag().to_f64();
            max_abs = max_abs.max(x.hypot(y));
        }
        let beta = max_abs / half - 1.0;
        rows.push(ContainmentRow {
            n,
            alpha,
            beta,
            mu: hier.level(n).mu.to_f64(),
            fold_cover_fraction: hier.level(n + 1).fold_cover_fraction,
        });
    }
    Ok(rows)
}

/// A certified branch of the first-return map to Iⁿ.
#[derive(Clone, Debug)]
pub struct ReturnDomain {
    pub interval: RealInterval,
    pub time: u64,
    pub is_central: bool,
    pub signs: Vec<i8>,
    pub final_sign: i8,
}

/// Enumerate return domains of the first-return map to level-n central by a
/// grid scan with bisection-refined, forward-certified edges. The two
/// ω(c)-branches come straight from the hierarchy; the scan adds the
/// `keep_others` largest remaining branches (truncation parameter).
pub fn return_domains(
    hier: &Hierarchy,
    n: usize,
    keep_others: usize,
    grid: usize,
) -> Result<Vec<ReturnDomain>> {
    if n + 1 > hier.depth() {
        return Err(Error::InvalidInput(
            "need hierarchy depth one past n".into(),
        ));
    }
    let j = hier.level(n).central.clone();
    let deeper = hier.level(n + 1);
    let t_max = 40 * deeper.time_central;

    let first_return = |x: &Float| -> Option<u64> {
        let mut v = x.clone();
        for s in 1..=t_max {
            v = hier.map.eval(&v);
            if v.clone().abs() > hier.map.dynamical_radius() {
                return None;
            }
            if j.contains(&v) {
                return Some(s);
            }
        }
        None
    };

    // Exact branches from the hierarchy.
    let mut domains = vec![
        ReturnDomain {
            interval: deeper.central.clone(),
            time: deeper.time_central,
            is_central: true,
            signs: central_signs(hier, n + 1),
            final_sign: 0,
        },
        ReturnDomain {
            interval: deeper.side.clone(),
            time: deeper.time_side,
            is_central: false,
            signs: side_signs(hier, n + 1),
            final_sign: if hier.orbit[deeper.time_central as usize].is_sign_positive() {
                1
            } else {
                -1
            },
        },
    ];

    // Grid scan for the other branches.
    let len = j.length();
    let sample = |i: usize, m: usize| -> Float {
        let mut x = len.clone();
        x *= (i as f64 + 0.5) / m as f64;
        x += j.lo();
        x
    };
    let times: Vec<Option<u64>> = (0..grid)
        .into_par_iter()
        .map(|i| first_return(&sample(i, grid)))
        .collect();

    let mut candidates: Vec<(usize, usize, u64)> = Vec::new(); // [start, end) grid runs
    let mut run_start = 0usize;
    for i in 1..=grid {
        let boundary = i == grid || times[i] != times[run_start];
        if boundary {
            if let Some(tau) = times[run_start] {
                candidates.push((run_start, i, tau));
            }
            run_start = i;
        }
    }

    let exact_overlap = |iv: &RealInterval| -> bool {
        domains.iter().any(|d| {
            !(d.interval.hi() < iv.lo() || iv.hi() < d.interval.lo())
        })
    };

    let mut others: Vec<ReturnDomain> = Vec::new();
    for (a, b, tau) in candidates {
        // Refine the run to an interval with constant first-return time.
        let refine = |mut out_i: f64, mut in_i: f64| -> f64 {
            for _ in 0..60 {
                let mid = 0.5 * (out_i + in_i);
                let x = sample_frac(&j, mid);
                if first_return(&x) == Some(tau) {
                    in_i = mid;
                } else {
                    out_i = mid;
                }
            }
            in_i
        };
        let lo_frac = if a == 0 {
            (a as f64 + 0.5) / grid as f64
        } else {
            refine((a as f64 - 0.5) / grid as f64, (a as f64 + 0.5) / grid as f64)
        };
        let hi_frac = if b == grid {
            (b as f64 - 0.5) / grid as f64
        } else {
            refine((b as f64 - 0.5) / grid as f64, (b as f64 - 1.5) / grid as f64)
        };
        if !(lo_frac < hi_frac) {
            continue;
        }
        let lo = sample_frac(&j, lo_frac);
        let hi = sample_frac(&j, hi_frac);
        let iv = match RealInterval::new(lo, hi) {
            Ok(iv) => iv,
            Err(_) => continue,
        };
        if exact_overlap(&iv) {
            continue;
        }
        // Forward certification: endpoints land near the boundary of J.
        let tol = j.length() * 1e-4;
        let near_boundary = |x: &Float| -> bool {
            let img = hier.forward(x, tau);
            (img.clone() - j.lo()).abs() < tol || (img - j.hi()).abs() < tol
        };
        if !near_boundary(iv.lo()) || !near_boundary(iv.hi()) {
            continue;
        }
        let mid = iv.midpoint();
        if iv.contains(&hier.map.critical_point()) {
            continue; // the central branch is already included exactly
        }
        let mut signs = Vec::with_capacity(tau as usize);
        let mut v = mid.clone();
        let final_sign = if v.is_sign_positive() { 1 } else { -1 };
        let mut orbit_signs: Vec<i8> = Vec::with_capacity(tau as usize);
        for _ in 0..tau {
            orbit_signs.push(if v.is_sign_positive() { 1 } else { -1 });
            v = hier.map.eval(&v);
        }
        // Backward order: f^(tau-1)(mid) ... f(mid).
        for jx in (1..tau as usize).rev() {
            signs.push(orbit_signs[jx]);
        }
        others.push(ReturnDomain {
            interval: iv,
            time: tau,
            is_central: false,
            signs,
            final_sign,
        });
    }
    others.sort_by(|x, y| {
        y.interval
            .length()
            .partial_cmp(&x.interval.length())
            .unwrap()
    });
    others.truncate(keep_others);
    domains.extend(others);
    domains.sort_by(|x, y| x.interval.lo().partial_cmp(y.interval.lo()).unwrap());
    Ok(domains)
}

fn sample_frac(j: &RealInterval, frac: f64) -> Float {
    let mut x = j.length();
    x *= frac;
    x += j.lo();
    x
}

fn central_signs(hier: &Hierarchy, n: usize) -> Vec<i8> {
    let r = hier.level(n).time_central;
    (1..r)
        .rev()
        .map(|jx| {
            if hier.orbit[jx as usize].is_sign_positive() {
                1
            } else {
                -1
            }
        })
        .collect()
}

fn side_signs(hier: &Hierarchy, n: usize) -> Vec<i8> {
    let level = hier.level(n);
    let r = level.time_central as usize;
    let s = level.time_side as usize;
    (1..s)
        .rev()
        .map(|jx| {
            if hier.orbit[r + jx].is_sign_positive() {
                1
            } else {
                -1
            }
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct ChordArcReport {
    pub level: usize,
    pub n_disks: usize,
    pub chord_arc: f64,
    pub disjoint: bool,
    pub base_cover_fraction: f64,
}

/// Boundary of W = (D(Iⁿ) ∖ ∪ Δ¹ⱼ)⁺ assembled from the outer semicircle,
/// real gap segments and the upper arcs of the removed return disks; the
/// chord-arc constant is the max over sampled boundary pairs of
/// (shortest boundary arc length)/(chord length).
pub fn chord_arc_diagnostic(
    ext: &ComplexExtension,
    hier: &Hierarchy,
    n: usize,
    keep_others: usize,
    npts: usize,
) -> Result<ChordArcReport> {
    let j = hier.level(n).central.clone();
    let domains = return_domains(hier, n, keep_others, 4096)?;

    // Pull the disk D(Iⁿ) back along every return branch.
    let disk = disk_boundary(&j, npts.clamp(64, 4096))?;
    let piece = PuzzlePiece {
        boundary: disk,
        base: j.clone(),
        level: n,
    };
    let mut disks: Vec<PuzzlePiece> = Vec::with_capacity(domains.len());
    for d in &domains {
        let path = PullbackPath {
            monotone_signs: d.signs.clone(),
            last: if d.is_central {
                LastStep::Fold
            } else {
                LastStep::Monotone(d.final_sign)
            },
            target_base: d.interval.clone(),
            target_level: n + 1,
        };
        let max_edge = 4.0 * d.interval.length().to_f64() / npts as f64;
        disks.push(pull_back_piece(ext, &piece, &path, max_edge)?);
    }

    // Pairwise disjointness of the removed disks.
    for i in 0..disks.len() {
        for k in (i + 1)..disks.len() {
            if pieces_overlap(&disks[i], &disks[k]) {
                return Err(Error::DisjointnessViolated { i, j: k });
            }
        }
    }

    // Assemble Γ.
    let jlo = j.lo().to_f64();
    let jhi = j.hi().to_f64();
    let mut gamma: Vec<[f64; 2]> = Vec::new();
    let mut cursor = jlo;
    let mut order: Vec<usize> = (0..disks.len()).collect();
    order.sort_by(|&a, &b| {
        disks[a]
            .base
            .lo()
            .partial_cmp(disks[b].base.lo())
            .unwrap()
    });
    for &idx in &order {
        let d = &disks[idx];
        let arc = upper_arc(&d.boundary.to_f64_points());
        let (bl, bh) = d.base.to_f64();
        // Real segment up to the left anchor, then the bump.
        push_segment(&mut gamma, [cursor, 0.0], [bl, 0.0]);
        for p in arc.iter().rev() {
            gamma.push(*p);
        }
        cursor = bh;
    }
    push_segment(&mut gamma, [cursor, 0.0], [jhi, 0.0]);
    // Outer semicircle from jhi back to jlo.
    let mid = 0.5 * (jlo + jhi);
    let rad = 0.5 * (jhi - jlo);
    let m = npts.clamp(64, 4096) / 2;
    for i in 1..m {
        let phi = std::f64::consts::PI * i as f64 / m as f64;
        gamma.push([mid + rad * phi.cos(), mid * 0.0 + rad * phi.sin()]);
    }

    // Cumulative arclength and pair sampling.
    let nsamp = gamma.len();
    let mut cum = Vec::with_capacity(nsamp + 1);
    cum.push(0.0);
    for i in 0..nsamp {
        let a = gamma[i];
        let b = gamma[(i + 1) % nsamp];
        cum.push(cum[i] + (a[0] - b[0]).hypot(a[1] - b[1]));
    }
    let total = *cum.last().unwrap();
    let stride = (nsamp / 1400).max(1);
    let mut constant = 0f64;
    let scale_floor = 1e-6 * (jhi - jlo);
    let mut ia = 0;
    while ia < nsamp {
        let mut ib = ia + stride;
        while ib < nsamp {
            let a = gamma[ia];
            let b = gamma[ib];
            let chord = (a[0] - b[0]).hypot(a[1] - b[1]);
            if chord > scale_floor {
                let arc = (cum[ib] - cum[ia]).min(total - (cum[ib] - cum[ia]));
                constant = constant.max(arc / chord);
            }
            ib += stride;
        }
        ia += stride;
    }

    let covered: f64 = domains
        .iter()
        .map(|d| d.interval.length().to_f64())
        .sum();
    Ok(ChordArcReport {
        level: n,
        n_disks: disks.len(),
        chord_arc: constant,
        disjoint: true,
        base_cover_fraction: covered / (jhi - jlo),
    })
}

fn push_segment(out: &mut Vec<[f64; 2]>, a: [f64; 2], b: [f64; 2]) {
    let len = (a[0] - b[0]).hypot(a[1] - b[1]);
    let steps = ((len / 1e-3).ceil() as usize).clamp(1, 64);
    for i in 0..steps {
        let s = i as f64 / steps as f64;
        out.push([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
    }
}

/// Upper boundary of a closed ℝ-symmetric piece, ordered right-to-left.
fn upper_arc(pts: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut upper: Vec<[f64; 2]> = pts.iter().copied().filter(|p| p[1] >= 0.0).collect();
    upper.sort_by(|a, b| b[0].partial_cmp(&a[0]).unwrap());
    upper
}

fn pieces_overlap(a: &PuzzlePiece, b: &PuzzlePiece) -> bool {
    // Quick reject via real bases, then bounding circles, then winding.
    if a.base.hi() < b.base.lo() || b.base.hi() < a.base.lo() {
        let pa = a.boundary.to_f64_points();
        let pb = b.boundary.to_f64_points();
        let (ca, ra) = bounding_circle(&pa);
        let (cb, rb) = bounding_circle(&pb);
        let d = (ca[0] - cb[0]).hypot(ca[1] - cb[1]);
        if d > ra + rb {
            return false;
        }
        // Fine test: any vertex of one inside the other.
        let sample = |v: &Vec<[f64; 2]>| -> Vec<[f64; 2]> {
            v.iter().step_by((v.len() / 256).max(1)).copied().collect()
        };
        for p in sample(&pa) {
            if point_in_polyline(&pb, p) {
                return true;
            }
        }
        for p in sample(&pb) {
            if point_in_polyline(&pa, p) {
                return true;
            }
        }
        return false;
    }
    true
}

fn bounding_circle(pts: &[[f64; 2]]) -> ([f64; 2], f64) {
    let mut cx = 0.0;
    let mut cy = 0.0;
    for p in pts {
        cx += p[0];
        cy += p[1];
    }
    cx /= pts.len() as f64;
    cy /= pts.len() as f64;
    let mut r = 0.0f64;
    for p in pts {
        r = r.max((p[0] - cx).hypot(p[1] - cy));
    }
    ([cx, cy], r)
}

/// Finite-difference Wirtinger ratio |∂̄ĥ/∂ĥ| at heights above real points;
/// the log-log slope against y is the asymptotic-conformality diagnostic.
pub struct ConformalityReport {
    pub rows: Vec<(f64, f64)>,
    pub loglog_slope: f64,
}

pub fn ab_conformality_scan<H: Fn(&Float) -> Float + Sync>(
    h: H,
    xs: &[f64],
    ys: &[f64],
    ctx: &PrecisionContext,
    rel_tol: f64,
) -> Result<ConformalityReport> {
    let mut rows = Vec::with_capacity(ys.len());
    for &y in ys {
        let mut max_ratio = 0f64;
        for &x in xs {
            let delta = y * 1e-2;
            let at = |px: f64, py: f64| -> Result<Complex> {
                ab_extend(&h, &ctx.complex(px, py), rel_tol)
            };
            let fxp = at(x + delta, y)?;
            let fxm = at(x - delta, y)?;
            let fyp = at(x, y + delta)?;
            let fym = at(x, y - delta)?;
            let two_d = 2.0 * delta;
            let fx_re = (fxp.real().to_f64() - fxm.real().to_f64()) / two_d;
            let fx_im = (fxp.imag().to_f64() - fxm.imag().to_f64()) / two_d;
            let fy_re = (fyp.real().to_f64() - fym.real().to_f64()) / two_d;
            let fy_im = (fyp.imag().to_f64() - fym.imag().to_f64()) / two_d;
            // ∂ = (f_x - i f_y)/2, ∂̄ = (f_x + i f_y)/2 on u+iv.
            let dbar_re = 0.5 * (fx_re - fy_im);
            let dbar_im = 0.5 * (fx_im + fy_re);
            let d_re = 0.5 * (fx_re + fy_im);
            let d_im = 0.5 * (fx_im - fy_re);
            let ratio = dbar_re.hypot(dbar_im) / d_re.hypot(d_im);
            max_ratio = max_ratio.max(ratio);
        }
        rows.push((y, max_ratio));
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.0.ln(), r.1.ln())).collect();
    let slope = {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    };
    Ok(ConformalityReport {
        rows,
        loglog_slope: slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> PrecisionContext {
        PrecisionContext::new(128)
    }

    #[test]
    fn disk_boundary_is_unit_circle() {
        let c = ctx();
        let base = RealInterval::new(c.float(-1.0), c.float(1.0)).unwrap();
        let poly = disk_boundary(&base, 360).unwrap();
        for z in &poly.points {
            let r = z.real().to_f64().hypot(z.imag().to_f64());
            assert!((r - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn theta_domain_apex_and_angle() {
        let c = ctx();
        let base = RealInterval::new(c.float(-1.0), c.float(1.0)).unwrap();
        let theta = std::f64::consts::FRAC_PI_4;
        let poly = ThetaDomain::new(base, theta).unwrap().boundary(4000).unwrap();
        let apex = poly
            .points
            .iter()
            .map(|z| z.imag().to_f64())
            .fold(f64::NEG_INFINITY, f64::max);
        // apex height = tan(theta/2)
        assert!((apex - (theta / 2.0).tan()).abs() < 1e-4, "apex {}", apex);
        // measure the angle at +1 from the two nearest boundary points
        let mut pts = poly.to_f64_points();
        pts.sort_by(|a, b| {
            let da = (a[0] - 1.0).hypot(a[1]);
            let db = (b[0] - 1.0).hypot(b[1]);
            da.partial_cmp(&db).unwrap()
        });
        let p = pts
            .iter()
            .find(|p| p[1] > 1e-6 && (p[0] - 1.0).hypot(p[1]) > 1e-9)
            .unwrap();
        let ang = p[1].atan2(1.0 - p[0]);
        assert!(
            (ang - theta).abs() < 0.05,
            "angle at endpoint {} vs {}",
            ang,
            theta
        );
    }

    #[test]
    fn theta_domain_conjugation_symmetric() {
        let c = ctx();
        let base = RealInterval::new(c.float(0.3), c.float(1.7)).unwrap();
        let poly = ThetaDomain::new(base, 0.9).unwrap().boundary(256).unwrap();
        assert!(poly.conjugation_asymmetry() < 1e-12);
    }

    #[test]
    fn ab_extension_of_identity_is_identity() {
        let c = ctx();
        for (x, y) in [(0.3, 0.7), (-1.2, 0.01), (2.0, -0.5)] {
            let z = c.complex(x, y);
            let w = ab_extend(|t: &Float| t.clone(), &z, 1e-12).unwrap();
            assert!((w.real().to_f64() - x).abs() < 1e-11);
            assert!((w.imag().to_f64() - y).abs() < 1e-11);
        }
    }

    #[test]
    fn ab_extension_of_affine_is_affine() {
        let c = ctx();
        let z = c.complex(1.0, 1.0);
        let w = ab_extend(
            |t: &Float| {
                let mut v = t.clone();
                v *= 2;
                v += 3;
                v
            },
            &z,
            1e-12,
        )
        .unwrap();
        // 2z + 3 at z = 1 + i
        assert!((w.real().to_f64() - 5.0).abs() < 1e-10);
        assert!((w.imag().to_f64() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn julia_of_z_squared_is_unit_circle() {
        let pts = julia_inverse_points((0.0, 0.0), 2000, 7);
        for p in pts {
            assert!((p[0].hypot(p[1]) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn basilica_membership_trivia() {
        let member = julia_membership((-1.0, 0.0), 2.0, 512);
        assert!(member([0.0, 0.0]));
        assert!(member([-1.0, 0.0]));
        assert!(!member([2.0, 0.0]));
    }

    #[test]
    fn basilica_seed_is_golden_mean() {
        let (re, im) = julia_repelling_fixed_point((-1.0, 0.0));
        let a = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((re - a).abs() < 1e-12 && im.abs() < 1e-12);
    }

    #[test]
    fn winding_number_of_circle() {
        let c = ctx();
        let base = RealInterval::new(c.float(-1.0), c.float(1.0)).unwrap();
        let poly = disk_boundary(&base, 64).unwrap();
        assert_eq!(winding_number(&poly.points, &c.complex(0.0, 0.0)).abs(), 1);
        assert_eq!(winding_number(&poly.points, &c.complex(3.0, 0.0)), 0);
    }
}
