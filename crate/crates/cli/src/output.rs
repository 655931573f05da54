//! Deterministic file emission: atomic writes, CSV tables, SVG figures.
//!
//! Formatting rules: f64 CSV/JSON values use Rust's shortest round-trip
//! formatting; SVG coordinates carry 9 significant digits.

use std::io::Write;
use std::path::Path;

use crate::CliError;

/// Write via a temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir).map_err(CliError::Io)?;
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp).map_err(CliError::Io)?;
        f.write_all(bytes).map_err(CliError::Io)?;
        f.sync_all().ok();
    }
    std::fs::rename(&tmp, path).map_err(CliError::Io)?;
    Ok(())
}

pub fn opt_f64(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{}", x),
        None => String::new(),
    }
}

/// 9-significant-digit fixed-point formatting for SVG coordinates.
pub fn sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (8 - mag).max(0) as usize;
    format!("{:.*}", decimals, x)
}

/// One closed path in SVG path-data syntax.
fn path_data(points: &[[f64; 2]]) -> String {
    let mut d = String::with_capacity(points.len() * 24);
    for (i, p) in points.iter().enumerate() {
        d.push(if i == 0 { 'M' } else { 'L' });
        d.push_str(&sig9(p[0]));
        d.push(' ');
        // SVG y grows downward; flip so the upper half-plane is on top.
        d.push_str(&sig9(-p[1]));
        d.push(' ');
    }
    d.push('Z');
    d
}

/// The figure-1 overlay: the deepest rescaled puzzle-piece boundary over a
/// Julia-set point cloud, view box [-a-0.2, a+0.2]².
pub fn figure1_svg(
    piece: &[[f64; 2]],
    julia: &[[f64; 2]],
    julia_cap: usize,
    half_extent: f64,
) -> String {
    let v = half_extent;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{} {} {} {}\">\n",
        sig9(-v),
        sig9(-v),
        sig9(2.0 * v),
        sig9(2.0 * v)
    ));
    svg.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"white\"/>\n",
        sig9(-v),
        sig9(-v),
        sig9(2.0 * v),
        sig9(2.0 * v)
    ));
    let step = (julia.len() / julia_cap.max(1)).max(1);
    for p in julia.iter().step_by(step) {
        svg.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"0.004\" fill=\"#20639b\"/>\n",
            sig9(p[0]),
            sig9(-p[1])
        ));
    }
    svg.push_str(&format!(
        "<path d=\"{}\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"0.008\"/>\n",
        path_data(piece)
    ));
    svg.push_str("</svg>\n");
    svg
}

/// CSV point list `re,im,level` for piece boundaries or Julia clouds.
pub fn points_csv(groups: &[(i64, &[[f64; 2]])]) -> String {
    let mut out = String::from("re,im,level\n");
    for (level, pts) in groups {
        for p in *pts {
            out.push_str(&format!("{},{},{}\n", p[0], p[1], level));
        }
    }
    out
}
