//! Constructive conjugacy between two Fibonacci maps on their critical
//! sets, with quasi-symmetry, multiplier and smoothness diagnostics.
//!
//! The conjugacy is represented only on matched finite sets: points of the
//! critical orbit addressed by their itineraries through the return-map
//! tower. Two maps with the same combinatorics share the same codes, and
//! matching equal codes conjugates the dynamics on the matched sets.

use rug::Float;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::renorm::Hierarchy;

/// A critical-orbit point addressed by its walk through the return maps.
#[derive(Clone, Debug)]
pub struct CodedPoint {
    /// Index j of the point f^j(c) in the critical orbit.
    pub index: u64,
    pub point: Float,
    /// Per-level walk words: `words[k-1]` is the sequence of branch
    /// locations of the g_k-walk from c to this point, when the point lies
    /// on that walk ('C' central, 'S' side).
    pub words: Vec<Option<String>>,
}

impl CodedPoint {
    /// Canonical serialization: level words joined by '|', missing levels
    /// written as '-'.
    pub fn code(&self) -> String {
        self.words
            .iter()
            .map(|w| w.clone().unwrap_or_else(|| "-".into()))
            .collect::<Vec<_>>()
            .join("|")
    }
}

/// The walk of the critical point under the level-k return map: indices
/// visited and the branch symbol at each step.
fn level_walk(hier: &Hierarchy, k: usize, horizon: u64) -> Result<Vec<(u64, String)>> {
    let level = hier.level(k);
    let mut out = vec![(0u64, String::new())];
    let mut idx = 0u64;
    let mut word = String::new();
    loop {
        let x = &hier.orbit[idx as usize];
        let step = if level.central.contains(x) {
            level.time_central
        } else if level.side.contains(x) {
            level.time_side
        } else if idx == 0 {
            // c itself is always central
            level.time_central
        } else {
            return Err(Error::CombinatoricsBroken {
                level: k,
                detail: format!(
                    "g_{}-walk left its domain at orbit index {}",
                    k, idx
                ),
            });
        };
        let next = idx + step;
        if next >= horizon {
            return Ok(out);
        }
        let y = &hier.orbit[next as usize];
        let symbol = if level.central.contains(y) {
            'C'
        } else if level.side.contains(y) {
            'S'
        } else {
            return Err(Error::CombinatoricsBroken {
                level: k,
                detail: format!(
                    "g_{}-walk landed outside both branches at orbit index {}",
                    k, next
                ),
            });
        };
        word.push(symbol);
        out.push((next, word.clone()));
        idx = next;
    }
}

/// All critical-orbit points within the depth-n horizon S_{n+2} that lie on
/// the return-map walks, with their per-level codes.
pub fn coded_critical_set(hier: &Hierarchy, depth: usize) -> Result<Vec<CodedPoint>> {
    if depth > hier.depth() {
        return Err(Error::InvalidInput(
            "coded set depth exceeds hierarchy depth".into(),
        ));
    }
    let deepest = hier.level(depth);
    // S_{n+2} = time_central + time_side at the deepest level.
    let horizon = deepest.time_central + deepest.time_side;
    let mut by_index: std::collections::BTreeMap<u64, Vec<Option<String>>> =
        std::collections::BTreeMap::new();
    for k in 1..=depth {
        let walk = level_walk(hier, k, horizon)?;
        for (idx, word) in walk {
            let entry = by_index.entry(idx).or_insert_with(|| vec![None; depth]);
            entry[k - 1] = Some(word);
        }
    }
    let mut out = Vec::with_capacity(by_index.len());
    for (idx, words) in by_index {
        out.push(CodedPoint {
            index: idx,
            point: hier.orbit[idx as usize].clone(),
            words,
        });
    }
    Ok(out)
}

/// One matched pair of critical-orbit points.
#[derive(Clone, Debug, Serialize)]
pub struct MatchedPair {
    pub code: String,
    pub x: f64,
    pub xt: f64,
    #[serde(skip)]
    pub index: u64,
    #[serde(skip)]
    pub x_full: Option<Float>,
    #[serde(skip)]
    pub xt_full: Option<Float>,
}

/// Pair up the coded critical sets of two maps with equal combinatorics.
pub fn match_critical_sets(
    a: &Hierarchy,
    b: &Hierarchy,
    depth: usize,
) -> Result<Vec<MatchedPair>> {
    let ca = coded_critical_set(a, depth)?;
    let cb = coded_critical_set(b, depth)?;
    if ca.len() != cb.len() {
        // Find the first level whose walks disagree in length.
        for k in 1..=depth {
            let la = level_walk(a, k, u64::MAX.min(horizon_of(a, depth)))?;
            let lb = level_walk(b, k, u64::MAX.min(horizon_of(b, depth)))?;
            if la.len() != lb.len() {
                return Err(Error::CodeMismatch { level: k });
            }
        }
        return Err(Error::CodeMismatch { level: depth });
    }
    let mut pairs = Vec::with_capacity(ca.len());
    for (pa, pb) in ca.iter().zip(cb.iter()) {
        if pa.index != pb.index || pa.code() != pb.code() {
            let level = pa
                .words
                .iter()
                .zip(pb.words.iter())
                .position(|(wa, wb)| wa != wb)
                .map(|k| k + 1)
                .unwrap_or(depth);
            return Err(Error::CodeMismatch { level });
        }
        pairs.push(MatchedPair {
            code: pa.code(),
            x: pa.point.to_f64(),
            xt: pb.point.to_f64(),
            index: pa.index,
            x_full: Some(pa.point.clone()),
            xt_full: Some(pb.point.clone()),
        });
    }
    // The pairing of unimodal maps fixing orientation must be monotone.
    let mut sorted = pairs.clone();
    sorted.sort_by(|p, q| p.x.partial_cmp(&q.x).unwrap());
    for w in sorted.windows(2) {
        if !(w[0].xt < w[1].xt) {
            return Err(Error::CombinatoricsBroken {
                level: depth,
                detail: "matched pairing is not order-preserving".into(),
            });
        }
    }
    Ok(pairs)
}

fn horizon_of(h: &Hierarchy, depth: usize) -> u64 {
    let l = h.level(depth);
    l.time_central + l.time_side
}

/// Max normalized quasi-symmetry ratio per scale.
///
/// For near-symmetric triples x-t, x, x+t of matched points the raw ratio
/// |h(x+t)-h(x)| / |h(x)-h(x-t)| is normalized by the domain-side ratio, so
/// affine pairings score exactly 1 at every sampled triple.
#[derive(Clone, Debug, Serialize)]
pub struct QsEntry {
    pub scale: f64,
    pub max_ratio: f64,
}

pub fn qs_ratio_scan(pairs: &[MatchedPair], scales: &[f64]) -> Vec<QsEntry> {
    let mut sorted: Vec<&MatchedPair> = pairs.iter().collect();
    sorted.sort_by(|p, q| p.x.partial_cmp(&q.x).unwrap());
    let xs: Vec<f64> = sorted.iter().map(|p| p.x).collect();
    let mut out = Vec::new();
    for &scale in scales {
        let mut max_ratio: Option<f64> = None;
        for (i, p) in sorted.iter().enumerate() {
            let want_plus = p.x + scale;
            let want_minus = p.x - scale;
            let ip = nearest_index(&xs, want_plus);
            let im = nearest_index(&xs, want_minus);
            if ip == i || im == i || ip == im {
                continue;
            }
            let xp = &sorted[ip];
            let xm = &sorted[im];
            let dp = xp.x - p.x;
            let dm = p.x - xm.x;
            // Accept approximately symmetric triples only.
            if dp <= 0.0 || dm <= 0.0 {
                continue;
            }
            if (dp - scale).abs() > 0.25 * scale || (dm - scale).abs() > 0.25 * scale {
                continue;
            }
            let num = (xp.xt - p.xt).abs();
            let den = (p.xt - xm.xt).abs();
            if den == 0.0 || dm == 0.0 {
                continue;
            }
            let ratio = (num / den) / (dp / dm);
            let ratio = ratio.max(1.0 / ratio);
            max_ratio = Some(max_ratio.map_or(ratio, |m: f64| m.max(ratio)));
        }
        if let Some(m) = max_ratio {
            out.push(QsEntry {
                scale,
                max_ratio: m,
            });
        }
    }
    out
}

fn nearest_index(xs: &[f64], want: f64) -> usize {
    match xs.binary_search_by(|x| x.partial_cmp(&want).unwrap()) {
        Ok(i) => i,
        Err(i) => {
            if i == 0 {
                0
            } else if i >= xs.len() {
                xs.len() - 1
            } else if (xs[i] - want).abs() < (want - xs[i - 1]).abs() {
                i
            } else {
                i - 1
            }
        }
    }
}

/// Matched multipliers of corresponding periodic points.
#[derive(Clone, Debug, Serialize)]
pub struct MultiplierEntry {
    pub code: String,
    pub sigma: f64,
    pub sigma_t: f64,
}

#[derive(Clone, Debug)]
pub struct MultiplierTable {
    pub entries: Vec<MultiplierEntry>,
    /// τ = log|σ̃|/log|σ| for the fixed point α.
    pub tau: f64,
}

/// Compare the multipliers of the fixed point α and of every level's
/// side-branch fixed point.
pub fn multiplier_comparison(
    a: &Hierarchy,
    b: &Hierarchy,
    depth: usize,
) -> Result<MultiplierTable> {
    let mut entries = Vec::new();
    let alpha_a = a.map.alpha()?;
    let alpha_b = b.map.alpha()?;
    let sig_a = a.map.derivative(&alpha_a);
    let sig_b = b.map.derivative(&alpha_b);
    entries.push(MultiplierEntry {
        code: "alpha".into(),
        sigma: sig_a.to_f64(),
        sigma_t: sig_b.to_f64(),
    });
    let tau = sig_b.to_f64().abs().ln() / sig_a.to_f64().abs().ln();
    for n in 1..=depth.min(a.depth()).min(b.depth()) {
        let (_, sa) = a.branch_multipliers(n)?;
        let (_, sb) = b.branch_multipliers(n)?;
        if let (Some(sa), Some(sb)) = (sa, sb) {
            entries.push(MultiplierEntry {
                code: format!("side@{}", n),
                sigma: sa.to_f64(),
                sigma_t: sb.to_f64(),
            });
        }
    }
    Ok(MultiplierTable { entries, tau })
}

/// The §6-style smoothness tables: ratio distortion of nested matched
/// intervals, return-interval/multiplier consistency, and successive
/// difference quotients.
#[derive(Clone, Debug, Serialize)]
pub struct SmoothnessReport {
    /// (|I|, distortion) rows for nested matched interval pairs.
    pub ratio_distortion: Vec<(f64, f64)>,
    /// (|Iⁿ|, | (|Iⁿ|/|Iⁿ⁺¹₁|)/|σ_side| - 1 |) rows, map A then map B.
    pub return_multiplier: Vec<(f64, f64, f64)>,
    /// (ε_n, sup |ρ_n - ρ_{n+1}|) rows.
    pub rho_differences: Vec<(f64, f64)>,
    pub ratio_distortion_slope: f64,
    pub rho_slope: f64,
}

pub fn smoothness_diagnostic(
    pairs: &[MatchedPair],
    a: &Hierarchy,
    b: &Hierarchy,
    depth: usize,
) -> Result<SmoothnessReport> {
    let mut sorted: Vec<&MatchedPair> = pairs.iter().collect();
    sorted.sort_by(|p, q| p.x.partial_cmp(&q.x).unwrap());

    // (a) Eq.-(8)-style ratio distortion over nested matched intervals:
    // J = [x_i, x_{i+1}] inside I = [x_i, x_{i+2}].
    let mut ratio_distortion = Vec::new();
    for w in sorted.windows(3) {
        let (x0, x1, x2) = (w[0].x, w[1].x, w[2].x);
        let (y0, y1, y2) = (w[0].xt, w[1].xt, w[2].xt);
        let li = x2 - x0;
        let lj = x1 - x0;
        let hi = y2 - y0;
        let hj = y1 - y0;
        if li <= 0.0 || lj <= 0.0 || hi == 0.0 {
            continue;
        }
        let q = ((hj / lj) / (hi / li) - 1.0).abs();
        ratio_distortion.push((li, q));
    }

    // (b) Eq.-(9)-style identity per level for both maps.
    let mut return_multiplier = Vec::new();
    for n in 1..depth.min(a.depth()).min(b.depth()) {
        let quantity = |h: &Hierarchy| -> Result<Option<(f64, f64)>> {
            let parent = h.level(n).central.length().to_f64();
            let side = h.level(n + 1).side.length().to_f64();
            let (_, sigma) = h.branch_multipliers(n + 1)?;
            Ok(sigma.map(|s| {
                let q = ((parent / side) / s.to_f64().abs() - 1.0).abs();
                (parent, q)
            }))
        };
        if let (Some((la, qa)), Some((_, qb))) = (quantity(a)?, quantity(b)?) {
            return_multiplier.push((la, qa, qb));
        }
    }

    // (c) difference quotients ρ_n at scales ε_n = 2^{-n}.
    let xs: Vec<f64> = sorted.iter().map(|p| p.x).collect();
    let rho_at = |x: f64, eps: f64| -> Option<f64> {
        let ip = nearest_index(&xs, x + eps);
        let im = nearest_index(&xs, x - eps);
        if ip == im {
            return None;
        }
        let dp = xs[ip] - x;
        let dm = x - xs[im];
        if dp <= 0.0 || dm <= 0.0 {
            return None;
        }
        if (dp - eps).abs() > 0.4 * eps || (dm - eps).abs() > 0.4 * eps {
            return None;
        }
        let num = sorted[ip].xt - sorted[im].xt;
        let den = xs[ip] - xs[im];
        Some(num / den)
    };
    let mut rho_differences = Vec::new();
    for n in 1..=depth + 4 {
        let eps = 2f64.powi(-(n as i32));
        let eps_next = eps / 2.0;
        let mut sup: Option<f64> = None;
        for p in &sorted {
            if let (Some(r1), Some(r2)) = (rho_at(p.x, eps), rho_at(p.x, eps_next)) {
                let d = (r1 - r2).abs();
                sup = Some(sup.map_or(d, |s: f64| s.max(d)));
            }
        }
        if let Some(s) = sup {
            rho_differences.push((eps, s));
        }
    }

    let slope_of = |rows: &[(f64, f64)]| -> f64 {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.0 > 0.0 && r.1 > 0.0)
            .map(|r| (r.0.ln(), r.1.ln()))
            .collect();
        if pts.len() < 2 {
            return f64::NAN;
        }
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    };
    let ratio_distortion_slope = slope_of(&ratio_distortion);
    let rho_slope = slope_of(&rho_differences);

    Ok(SmoothnessReport {
        ratio_distortion,
        return_multiplier,
        rho_differences,
        ratio_distortion_slope,
        rho_slope,
    })
}

/// The JSON-facing conjugacy report.
#[derive(Clone, Debug, Serialize)]
pub struct ConjugacyReport {
    pub pairs: Vec<MatchedPair>,
    pub qs: Vec<QsEntry>,
    pub multipliers: Vec<MultiplierEntry>,
    pub tau: f64,
}

/// Full pipeline: match, scan at the natural scales |Iⁿ|, compare
/// multipliers.
pub fn conjugacy_report(a: &Hierarchy, b: &Hierarchy, depth: usize) -> Result<ConjugacyReport> {
    let pairs = match_critical_sets(a, b, depth)?;
    let scales: Vec<f64> = (1..=depth)
        .map(|n| a.level(n).central.length().to_f64())
        .collect();
    let qs = qs_ratio_scan(&pairs, &scales);
    let table = multiplier_comparison(a, b, depth)?;
    Ok(ConjugacyReport {
        pairs,
        qs,
        multipliers: table.entries,
        tau: table.tau,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_index_basics() {
        let xs = vec![0.0, 1.0, 2.0, 5.0];
        assert_eq!(nearest_index(&xs, -3.0), 0);
        assert_eq!(nearest_index(&xs, 0.9), 1);
        assert_eq!(nearest_index(&xs, 3.4), 2);
        assert_eq!(nearest_index(&xs, 9.0), 3);
    }
}
