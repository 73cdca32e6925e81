//! NACA 4-digit sections, rigid section transforms, and linear lofting.

use crate::error::{Error, Result};

use super::SectionParams;

/// Closed-trailing-edge thickness polynomial, half-thickness at chord
/// fraction `x` for thickness ratio `t`. The -0.1036 quartic coefficient
/// makes the coefficients sum to zero at x = 1.
pub fn thickness_half_height(x: f64, t: f64) -> f64 {
    5.0 * t
        * (0.2969 * x.sqrt() - 0.1260 * x - 0.3516 * x * x + 0.2843 * x * x * x
            - 0.1036 * x * x * x * x)
}

/// Mean camber line of the 4-digit family: two parabolic arcs joined at the
/// camber position `p`. The rear arc is kept in factored form so it vanishes
/// exactly at x = 1.
pub fn camber_line(x: f64, m: f64, p: f64) -> f64 {
    if m == 0.0 {
        return 0.0;
    }
    if x <= p {
        m / (p * p) * (2.0 * p - x) * x
    } else {
        let q = 1.0 - p;
        m / (q * q) * (1.0 - x) * (x + 1.0 - 2.0 * p)
    }
}

/// Unit-chord closed 2D section polyline: `n_pts` points traversing the
/// upper surface from trailing edge to leading edge, then the lower surface
/// back to the trailing edge, at cosine-spaced chordwise stations. Surfaces
/// are offset vertically from the camber line, which keeps the polyline
/// simple even at extreme camber.
pub fn naca_section(m: f64, p: f64, t: f64, n_pts: usize) -> Result<Vec<[f64; 2]>> {
    if !(m.is_finite() && p.is_finite() && t.is_finite()) {
        return Err(Error::InvalidParameter("non-finite section parameter".into()));
    }
    if n_pts % 2 != 0 || n_pts < 8 {
        return Err(Error::InvalidParameter(format!(
            "pts_per_section must be even and >= 8, got {n_pts}"
        )));
    }
    if m != 0.0 && !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "camber position must lie in (0,1), got {p}"
        )));
    }

    let n_c = n_pts / 2;
    let stations: Vec<f64> = (0..n_c)
        .map(|k| 0.5 * (1.0 - (std::f64::consts::PI * k as f64 / (n_c - 1) as f64).cos()))
        .collect();

    let mut points = Vec::with_capacity(n_pts);
    // upper surface, trailing edge to leading edge
    for &x in stations.iter().rev() {
        points.push([x, camber_line(x, m, p) + thickness_half_height(x, t)]);
    }
    // lower surface, leading edge to trailing edge
    for &x in &stations {
        points.push([x, camber_line(x, m, p) - thickness_half_height(x, t)]);
    }
    // the thickness coefficients sum to zero only in decimal; share the
    // trailing-edge vertex so the loop closes bitwise
    let first = points[0];
    *points.last_mut().unwrap() = first;
    Ok(points)
}

/// Scales a unit-chord 2D section, applies twist, roll, yaw in that order,
/// and translates by the leading-edge position.
///
/// Axes: x chordwise, y spanwise, z vertical. The section plane is y = 0
/// with the 2D ordinate mapped to z. Twist rotates about +y, roll about +x,
/// yaw about +z, all right-handed; a positive twist therefore carries the
/// trailing edge toward -z.
pub fn transform_section(points: &[[f64; 2]], params: &SectionParams) -> Result<Vec<[f64; 3]>> {
    params.validate()?;
    let (st, ct) = params.twist.sin_cos();
    let (sr, cr) = params.roll.sin_cos();
    let (sy, cy) = params.yaw.sin_cos();
    let c = params.chord;
    let out = points
        .iter()
        .map(|&[u, v]| {
            // scale
            let (x0, y0, z0) = (c * u, 0.0, c * v);
            // twist about y
            let (x1, y1, z1) = (ct * x0 + st * z0, y0, -st * x0 + ct * z0);
            // roll about x
            let (x2, y2, z2) = (x1, cr * y1 - sr * z1, sr * y1 + cr * z1);
            // yaw about z
            let (x3, y3, z3) = (cy * x2 - sy * y2, sy * x2 + cy * y2, z2);
            [
                x3 + params.le_pos[0],
                y3 + params.le_pos[1],
                z3 + params.le_pos[2],
            ]
        })
        .collect();
    Ok(out)
}

/// Lofts transformed sections into a surface point grid.
///
/// Section `k` sits at normalized span `k / (n_sections - 1)`; the `n_span`
/// output stations are uniform on `[0, 1]` and each station blends the two
/// bracketing sections linearly, pointwise. The result is flattened
/// station-major, point-minor, with xyz innermost.
pub fn loft(sections: &[Vec<[f64; 3]>], n_span: usize) -> Result<Vec<f64>> {
    let n_sec = sections.len();
    if n_sec < 2 {
        return Err(Error::Shape(format!("loft needs >= 2 sections, got {n_sec}")));
    }
    let n_pts = sections[0].len();
    if sections.iter().any(|s| s.len() != n_pts) {
        return Err(Error::Shape("sections differ in point count".into()));
    }
    if n_span < n_sec {
        return Err(Error::Shape(format!(
            "n_span {n_span} smaller than section count {n_sec}"
        )));
    }

    let mut g = Vec::with_capacity(3 * n_pts * n_span);
    for i in 0..n_span {
        let s = i as f64 / (n_span - 1) as f64;
        // bracketing section pair
        let pos = s * (n_sec - 1) as f64;
        let k = (pos.floor() as usize).min(n_sec - 2);
        let w = pos - k as f64;
        let (lo, hi) = (&sections[k], &sections[k + 1]);
        for j in 0..n_pts {
            for d in 0..3 {
                g.push((1.0 - w) * lo[j][d] + w * hi[j][d]);
            }
        }
    }
    Ok(g)
}
