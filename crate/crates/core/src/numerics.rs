//! Precision-configurable arithmetic, interval and polyline primitives
//! shared by the dynamics modules.

use std::collections::HashMap;

use rug::{Complex, Float};

use crate::error::{Error, Result};

/// Run-wide numeric settings. Everything downstream inherits the working
/// mantissa precision from here.
#[derive(Clone, Debug)]
pub struct PrecisionContext {
    /// Working mantissa precision in bits. Must be at least 53.
    pub bits: u32,
    /// Escape radius for quadratic-like complex dynamics.
    pub escape_radius: f64,
    /// Iteration budget for escape-time membership tests.
    pub max_iters: u64,
}

impl PrecisionContext {
    pub fn new(bits: u32) -> Self {
        assert!(bits >= 53, "working precision must be at least 53 bits");
        PrecisionContext {
            bits,
            escape_radius: 2.0,
            max_iters: 1000,
        }
    }

    pub fn float(&self, v: f64) -> Float {
        Float::with_val(self.bits, v)
    }

    pub fn complex(&self, re: f64, im: f64) -> Complex {
        Complex::with_val(self.bits, (re, im))
    }

    /// The golden mean a = (1+sqrt(5))/2 at working precision.
    pub fn golden_ratio(&self) -> Float {
        let mut a = Float::with_val(self.bits, 5);
        a.sqrt_mut();
        a += 1;
        a /= 2;
        a
    }
}

impl Default for PrecisionContext {
    fn default() -> Self {
        PrecisionContext::new(128)
    }
}

/// Modulus of a multiprecision complex number.
pub fn cabs(z: &Complex) -> Float {
    let p = z.real().prec().max(z.imag().prec());
    let mut re = Float::with_val(p, z.real());
    re.square_mut();
    let mut im = Float::with_val(p, z.imag());
    im.square_mut();
    re += im;
    re.sqrt_mut();
    re
}

/// A nondegenerate open interval of the real line.
#[derive(Clone, Debug)]
pub struct RealInterval {
    lo: Float,
    hi: Float,
}

impl RealInterval {
    pub fn new(lo: Float, hi: Float) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::InvalidInput(format!(
                "degenerate interval [{}, {}]",
                lo.to_f64(),
                hi.to_f64()
            )));
        }
        Ok(RealInterval { lo, hi })
    }

    pub fn lo(&self) -> &Float {
        &self.lo
    }

    pub fn hi(&self) -> &Float {
        &self.hi
    }

    pub fn length(&self) -> Float {
        self.hi.clone() - &self.lo
    }

    pub fn midpoint(&self) -> Float {
        let mut m = self.hi.clone() + &self.lo;
        m /= 2;
        m
    }

    pub fn contains(&self, x: &Float) -> bool {
        self.lo < *x && *x < self.hi
    }

    /// Strict containment of another interval, both endpoints distinct.
    pub fn contains_interval(&self, other: &RealInterval) -> bool {
        self.lo < other.lo && other.hi < self.hi
    }

    /// Cocentric interval of length (1+alpha) times this one.
    pub fn scaled(&self, alpha: f64) -> Result<RealInterval> {
        let mid = self.midpoint();
        let mut half = self.length();
        half /= 2;
        half *= 1.0 + alpha;
        RealInterval::new(mid.clone() - &half, mid + &half)
    }

    pub fn to_f64(&self) -> (f64, f64) {
        (self.lo.to_f64(), self.hi.to_f64())
    }
}

/// A piecewise-linear curve in the complex plane with a boundary
/// parametrization in [0,1).
#[derive(Clone, Debug)]
pub struct Polyline {
    pub points: Vec<Complex>,
    pub params: Vec<f64>,
    pub closed: bool,
}

impl Polyline {
    pub fn new_closed(points: Vec<Complex>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::InvalidInput(
                "closed polyline needs at least 3 points".into(),
            ));
        }
        let n = points.len();
        let params = (0..n).map(|i| i as f64 / n as f64).collect();
        Ok(Polyline {
            points,
            params,
            closed: true,
        })
    }

    pub fn with_params(points: Vec<Complex>, params: Vec<f64>, closed: bool) -> Result<Self> {
        if points.len() != params.len() {
            return Err(Error::InvalidInput("points/params length mismatch".into()));
        }
        if closed && points.len() < 3 {
            return Err(Error::InvalidInput(
                "closed polyline needs at least 3 points".into(),
            ));
        }
        for w in params.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::InvalidInput(
                    "params must be strictly increasing".into(),
                ));
            }
        }
        if let (Some(first), Some(last)) = (params.first(), params.last()) {
            if *first < 0.0 || *last >= 1.0 {
                return Err(Error::InvalidInput("params must lie in [0,1)".into()));
            }
        }
        Ok(Polyline {
            points,
            params,
            closed,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of edges (wraps around when closed).
    pub fn edge_count(&self) -> usize {
        if self.closed {
            self.points.len()
        } else {
            self.points.len().saturating_sub(1)
        }
    }

    fn edge_len_f64(a: &Complex, b: &Complex) -> f64 {
        let dre = Float::with_val(a.real().prec(), a.real()) - b.real();
        let dim = Float::with_val(a.imag().prec(), a.imag()) - b.imag();
        let dre = dre.to_f64();
        let dim = dim.to_f64();
        dre.hypot(dim)
    }

    /// Subdivide every edge longer than `max_edge` by linear interpolation,
    /// re-interpolating params. Existing points are kept.
    pub fn refine(&self, max_edge: f64) -> Result<Polyline> {
        if max_edge <= 0.0 {
            return Err(Error::InvalidInput("max_edge must be positive".into()));
        }
        let n = self.points.len();
        let mut points = Vec::with_capacity(n * 2);
        let mut params = Vec::with_capacity(n * 2);
        let edge_count = self.edge_count();
        for i in 0..n {
            points.push(self.points[i].clone());
            params.push(self.params[i]);
            if i >= edge_count && !self.closed {
                break;
            }
            if i >= edge_count {
                break;
            }
            let j = (i + 1) % n;
            let a = &self.points[i];
            let b = &self.points[j];
            let len = Self::edge_len_f64(a, b);
            if len > max_edge {
                let pieces = (len / max_edge).ceil() as usize;
                let pa = self.params[i];
                let pb = if j == 0 {
                    self.params[0] + 1.0
                } else {
                    self.params[j]
                };
                for k in 1..pieces {
                    let s = k as f64 / pieces as f64;
                    let prec = a.real().prec().max(b.real().prec());
                    let mut p = Complex::with_val(prec, b);
                    p -= a;
                    p *= s;
                    p += a;
                    points.push(p);
                    let mut t = pa + s * (pb - pa);
                    if t >= 1.0 {
                        t -= 1.0;
                    }
                    params.push(t);
                }
            }
        }
        Ok(Polyline {
            points,
            params,
            closed: self.closed,
        })
    }

    pub fn to_f64_points(&self) -> Vec<[f64; 2]> {
        self.points
            .iter()
            .map(|z| [z.real().to_f64(), z.imag().to_f64()])
            .collect()
    }

    /// Maximum over vertices of the distance from the conjugate of the vertex
    /// to the vertex set. Zero for an exactly mirror-symmetric sample.
    pub fn conjugation_asymmetry(&self) -> f64 {
        let pts = self.to_f64_points();
        let grid = PointGrid::build(&pts);
        pts.iter()
            .map(|p| grid.nearest_distance([p[0], -p[1]]))
            .fold(0.0, f64::max)
    }
}

/// Hausdorff distance between two finite point sets.
///
/// Uses a uniform-grid nearest-neighbour index so that 1e5-point sets stay
/// fast; see the test oracle for the brute-force cross-check.
pub fn hausdorff_distance(a: &[[f64; 2]], b: &[[f64; 2]]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    let gb = PointGrid::build(b);
    let ga = PointGrid::build(a);
    let d_ab = a
        .iter()
        .map(|p| gb.nearest_distance(*p))
        .fold(0.0, f64::max);
    let d_ba = b
        .iter()
        .map(|p| ga.nearest_distance(*p))
        .fold(0.0, f64::max);
    Ok(d_ab.max(d_ba))
}

/// Uniform-grid point index for exact nearest-neighbour distance queries.
pub struct PointGrid {
    cell: f64,
    x0: f64,
    y0: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
    pts: Vec<[f64; 2]>,
}

impl PointGrid {
    pub fn build(pts: &[[f64; 2]]) -> Self {
        assert!(!pts.is_empty());
        let mut xmin = f64::INFINITY;
        let mut xmax = f64::NEG_INFINITY;
        let mut ymin = f64::INFINITY;
        let mut ymax = f64::NEG_INFINITY;
        for p in pts {
            xmin = xmin.min(p[0]);
            xmax = xmax.max(p[0]);
            ymin = ymin.min(p[1]);
            ymax = ymax.max(p[1]);
        }
        let extent = (xmax - xmin).max(ymax - ymin).max(1e-300);
        let cell = (extent / (pts.len() as f64).sqrt().max(1.0)).max(extent * 1e-9);
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in pts.iter().enumerate() {
            let key = (
                ((p[0] - xmin) / cell).floor() as i64,
                ((p[1] - ymin) / cell).floor() as i64,
            );
            cells.entry(key).or_default().push(i);
        }
        PointGrid {
            cell,
            x0: xmin,
            y0: ymin,
            cells,
            pts: pts.to_vec(),
        }
    }

    /// Exact distance from `q` to the nearest indexed point.
    pub fn nearest_distance(&self, q: [f64; 2]) -> f64 {
        let ci = ((q[0] - self.x0) / self.cell).floor() as i64;
        let cj = ((q[1] - self.y0) / self.cell).floor() as i64;
        let mut best = f64::INFINITY;
        let mut ring: i64 = 0;
        loop {
            let mut visited_any = false;
            for di in -ring..=ring {
                for dj in -ring..=ring {
                    if di.abs() != ring && dj.abs() != ring {
                        continue;
                    }
                    if let Some(ids) = self.cells.get(&(ci + di, cj + dj)) {
                        visited_any = true;
                        for &i in ids {
                            let p = self.pts[i];
                            let d = (p[0] - q[0]).hypot(p[1] - q[1]);
                            if d < best {
                                best = d;
                            }
                        }
                    }
                }
            }
            // Any point in an unvisited ring lies at least (ring)*cell away
            // from q's cell, so once best is below that bound we are done.
            if best <= ring as f64 * self.cell {
                return best;
            }
            ring += 1;
            // Guard: if we have wandered far beyond the populated area and
            // found something, stop; if nothing yet, keep expanding.
            if ring > 4 && best.is_finite() && best <= (ring - 1) as f64 * self.cell {
                return best;
            }
            if ring > 1_000_000 {
                // Degenerate geometry; fall back to a linear scan.
                let _ = visited_any;
                return self
                    .pts
                    .iter()
                    .map(|p| (p[0] - q[0]).hypot(p[1] - q[1]))
                    .fold(f64::INFINITY, f64::min);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> PrecisionContext {
        PrecisionContext::new(128)
    }

    fn square(ctx: &PrecisionContext) -> Polyline {
        let pts = vec![
            ctx.complex(0.0, 0.0),
            ctx.complex(1.0, 0.0),
            ctx.complex(1.0, 1.0),
            ctx.complex(0.0, 1.0),
        ];
        Polyline::new_closed(pts).unwrap()
    }

    #[test]
    fn refine_square_halves_edges() {
        let c = ctx();
        let p = square(&c).refine(0.5).unwrap();
        assert_eq!(p.len(), 8);
    }

    #[test]
    fn refine_is_identity_when_edges_short() {
        let c = ctx();
        let p = square(&c);
        let q = p.refine(2.0).unwrap();
        assert_eq!(q.len(), p.len());
    }

    #[test]
    fn refine_circle_point_budget() {
        let c = ctx();
        // Unit circle sampled at 4 points: a square with perimeter 4*sqrt(2).
        let pts = vec![
            c.complex(1.0, 0.0),
            c.complex(0.0, 1.0),
            c.complex(-1.0, 0.0),
            c.complex(0.0, -1.0),
        ];
        let p = Polyline::new_closed(pts).unwrap();
        let q = p.refine(0.1).unwrap();
        // Perimeter / max_edge lower bound: 4*sqrt(2)/0.1 > 56 >= 44.
        assert!(q.len() >= 44, "got {} points", q.len());
        // Every edge short enough.
        for i in 0..q.len() {
            let j = (i + 1) % q.len();
            let d = Polyline::edge_len_f64(&q.points[i], &q.points[j]);
            assert!(d <= 0.1 + 1e-12);
        }
    }

    #[test]
    fn refine_preserves_input_points() {
        let c = ctx();
        let p = square(&c);
        let q = p.refine(0.3).unwrap();
        for orig in &p.points {
            let found = q.points.iter().any(|z| {
                let d = Polyline::edge_len_f64(orig, z);
                d < 1e-30
            });
            assert!(found);
        }
    }

    #[test]
    fn refine_params_strictly_increasing() {
        let c = ctx();
        let q = square(&c).refine(0.21).unwrap();
        for w in q.params.windows(2) {
            assert!(w[0] < w[1]);
        }
        assert!(*q.params.last().unwrap() < 1.0);
    }

    #[test]
    fn hausdorff_trivial_cases() {
        let a = vec![[0.0, 0.0], [1.0, 0.0]];
        assert_eq!(hausdorff_distance(&a, &a).unwrap(), 0.0);
        let b = vec![[3.0, 4.0]];
        let d = hausdorff_distance(&[[0.0, 0.0]], &b).unwrap();
        assert!((d - 5.0).abs() < 1e-15);
    }

    #[test]
    fn hausdorff_empty_is_error() {
        let a: Vec<[f64; 2]> = vec![];
        let b = vec![[0.0, 0.0]];
        assert!(matches!(
            hausdorff_distance(&a, &b),
            Err(Error::EmptySet)
        ));
    }

    #[test]
    fn hausdorff_offset_circles() {
        // Two 1000-point samples of the unit circle with offset angles stay
        // within one arc step of each other.
        let n = 1000;
        let sample = |phase: f64| -> Vec<[f64; 2]> {
            (0..n)
                .map(|k| {
                    let t = 2.0 * std::f64::consts::PI * (k as f64 + phase) / n as f64;
                    [t.cos(), t.sin()]
                })
                .collect()
        };
        let a = sample(0.0);
        let b = sample(0.37);
        let d = hausdorff_distance(&a, &b).unwrap();
        let circumference = 2.0 * std::f64::consts::PI;
        assert!(d <= circumference / n as f64);
        // Brute-force oracle.
        let brute = |a: &[[f64; 2]], b: &[[f64; 2]]| -> f64 {
            let dir = |xs: &[[f64; 2]], ys: &[[f64; 2]]| {
                xs.iter()
                    .map(|p| {
                        ys.iter()
                            .map(|q| (p[0] - q[0]).hypot(p[1] - q[1]))
                            .fold(f64::INFINITY, f64::min)
                    })
                    .fold(0.0, f64::max)
            };
            dir(a, b).max(dir(b, a))
        };
        let db = brute(&a, &b);
        assert!((d - db).abs() < 1e-12, "grid {} vs brute {}", d, db);
    }

    #[test]
    fn interval_scaling_is_cocentric() {
        let c = ctx();
        let i = RealInterval::new(c.float(-1.0), c.float(3.0)).unwrap();
        let j = i.scaled(0.5).unwrap();
        assert!((j.length().to_f64() - 6.0).abs() < 1e-12);
        assert!((j.midpoint().to_f64() - 1.0).abs() < 1e-12);
    }
}
