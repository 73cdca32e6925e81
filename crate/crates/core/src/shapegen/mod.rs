//! Synthetic forward parametric operator: normalized design variables to a
//! lofted surface point grid, plus Sobol sampling of the design box.
//!
//! Every section of the family is a NACA-4-digit-style airfoil with ten
//! parameters: max camber, camber position, thickness, chord, the three
//! leading-edge coordinates, and twist/roll/yaw. A configuration freezes
//! most entries at a baseline and exposes the rest as the normalized design
//! vector `u in [0,1]^M`.

mod naca;

pub use naca::{camber_line, loft, naca_section, thickness_half_height, transform_section};

use ndarray::Array1;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Number of parameters per section.
pub const PARAMS_PER_SECTION: usize = 10;

/// Slot names within a section's parameter block.
pub const PARAM_NAMES: [&str; PARAMS_PER_SECTION] = [
    "m", "p", "t", "chord", "le_x", "le_y", "le_z", "twist", "roll", "yaw",
];

/// Physical parameters of one transverse section.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionParams {
    pub max_camber: f64,
    pub camber_pos: f64,
    pub thickness: f64,
    pub chord: f64,
    pub le_pos: [f64; 3],
    pub twist: f64,
    pub roll: f64,
    pub yaw: f64,
}

impl SectionParams {
    pub(crate) fn from_slice(p: &[f64]) -> Self {
        SectionParams {
            max_camber: p[0],
            camber_pos: p[1],
            thickness: p[2],
            chord: p[3],
            le_pos: [p[4], p[5], p[6]],
            twist: p[7],
            roll: p[8],
            yaw: p[9],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.max_camber,
            self.camber_pos,
            self.thickness,
            self.chord,
            self.le_pos[0],
            self.le_pos[1],
            self.le_pos[2],
            self.twist,
            self.roll,
            self.yaw,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite section parameter".into()));
        }
        Ok(())
    }
}

/// Normalized design vector in `[0,1]^M`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignVector {
    values: Array1<f64>,
}

impl DesignVector {
    pub fn new(values: Array1<f64>) -> Result<Self> {
        if values.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidParameter(
                "design vector components must lie in [0,1]".into(),
            ));
        }
        Ok(DesignVector { values })
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::new(Array1::from_vec(values.to_vec()))
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One sampled geometry with its shape modification `d = g - g0`.
#[derive(Debug, Clone)]
pub struct ShapeSample {
    pub g: Array1<f64>,
    pub d: Array1<f64>,
    pub design: DesignVector,
    pub valid: bool,
}

/// Affine map from normalized to physical values. Errors on degenerate
/// bounds (`lower >= upper`).
pub fn denormalize(u_norm: &[f64], lower: &[f64], upper: &[f64]) -> Result<Vec<f64>> {
    check_bounds(lower, upper, u_norm.len())?;
    Ok(u_norm
        .iter()
        .zip(lower.iter().zip(upper))
        .map(|(&u, (&lo, &hi))| lo + u * (hi - lo))
        .collect())
}

/// Inverse of [`denormalize`].
pub fn normalize(physical: &[f64], lower: &[f64], upper: &[f64]) -> Result<Vec<f64>> {
    check_bounds(lower, upper, physical.len())?;
    Ok(physical
        .iter()
        .zip(lower.iter().zip(upper))
        .map(|(&x, (&lo, &hi))| (x - lo) / (hi - lo))
        .collect())
}

fn check_bounds(lower: &[f64], upper: &[f64], len: usize) -> Result<()> {
    if lower.len() != len || upper.len() != len {
        return Err(Error::Config(format!(
            "bounds length {}/{} does not match vector length {len}",
            lower.len(),
            upper.len()
        )));
    }
    for (i, (&lo, &hi)) in lower.iter().zip(upper).enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!(
                "degenerate bounds at entry {i}: [{lo}, {hi}]"
            )));
        }
    }
    Ok(())
}

/// Full description of the synthetic shape family.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub n_sections: usize,
    pub pts_per_section: usize,
    pub n_span: usize,
    /// Physical lower/upper bounds, `10 * n_sections` entries each.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Indices of the free entries; the rest stay at `u_base`.
    pub active: Vec<usize>,
    /// Baseline parameter vector, normalized, full length.
    pub u_base: Vec<f64>,
}

impl GeneratorConfig {
    /// Number of free design variables.
    pub fn m(&self) -> usize {
        self.active.len()
    }

    /// Geometric degrees of freedom of one sample.
    pub fn n_g(&self) -> usize {
        3 * self.pts_per_section * self.n_span
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_sections;
        if n < 2 {
            return Err(Error::Config(format!("n_sections must be >= 2, got {n}")));
        }
        if self.pts_per_section % 2 != 0 || self.pts_per_section < 8 {
            return Err(Error::Config(format!(
                "pts_per_section must be even and >= 8, got {}",
                self.pts_per_section
            )));
        }
        if self.n_span < n {
            return Err(Error::Config(format!(
                "n_span {} must be >= n_sections {n}",
                self.n_span
            )));
        }
        let total = PARAMS_PER_SECTION * n;
        check_bounds(&self.lower, &self.upper, total)?;
        if self.u_base.len() != total {
            return Err(Error::Config(format!(
                "u_base length {} does not match {total} parameters",
                self.u_base.len()
            )));
        }
        if self.u_base.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::Config("u_base entries must lie in [0,1]".into()));
        }
        if self.active.is_empty() {
            return Err(Error::Config("active mask selects no variables".into()));
        }
        let mut seen = vec![false; total];
        let mut last = None;
        for &idx in &self.active {
            if idx >= total {
                return Err(Error::Config(format!("active index {idx} out of range")));
            }
            if seen[idx] {
                return Err(Error::Config(format!("duplicate active index {idx}")));
            }
            if let Some(prev) = last {
                if idx < prev {
                    return Err(Error::Config("active indices must be sorted".into()));
                }
            }
            seen[idx] = true;
            last = Some(idx);
        }
        // Camber-position and thickness bounds must keep every reachable
        // section well defined.
        for s in 0..n {
            let b = s * PARAMS_PER_SECTION;
            if self.lower[b] < 0.0 {
                return Err(Error::Config(format!("section {s}: camber lower bound < 0")));
            }
            if self.lower[b + 1] <= 0.0 || self.upper[b + 1] >= 1.0 {
                return Err(Error::Config(format!(
                    "section {s}: camber-position bounds must lie inside (0,1)"
                )));
            }
            if self.lower[b + 2] <= 0.0 {
                return Err(Error::Config(format!("section {s}: thickness lower bound <= 0")));
            }
        }
        Ok(())
    }

    /// Stable text form used for hashing and manifests.
    pub fn canonical_string(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        writeln!(s, "n_sections={}", self.n_sections).unwrap();
        writeln!(s, "pts_per_section={}", self.pts_per_section).unwrap();
        writeln!(s, "n_span={}", self.n_span).unwrap();
        let join = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",");
        writeln!(s, "lower={}", join(&self.lower)).unwrap();
        writeln!(s, "upper={}", join(&self.upper)).unwrap();
        let act = self.active.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        writeln!(s, "active={act}").unwrap();
        writeln!(s, "u_base={}", join(&self.u_base)).unwrap();
        s
    }

    /// First 16 hex digits of the SHA-256 of the canonical form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_string().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Desk-scale default family: three sections, 28 points per section,
    /// 28 span stations (2352 geometric degrees of freedom) and ten free
    /// variables weighted toward the strongly nonlinear entries (rotations,
    /// camber position, chord). Bounds are wide enough to drive nonlinear
    /// variability but keep essentially every Sobol sample valid.
    pub fn desk_default() -> GeneratorConfig {
        // per-section physical bounds, [m, p, t, chord, le_x, le_y, le_z, twist, roll, yaw]
        let section_bounds: [([f64; 10], [f64; 10]); 3] = [
            (
                [0.0, 0.15, 0.07, 0.70, -0.05, -0.05, -0.30, -1.00, -0.55, -0.55],
                [0.09, 0.85, 0.18, 1.30, 0.05, 0.05, 0.30, 1.00, 0.55, 0.55],
            ),
            (
                [0.0, 0.15, 0.07, 0.45, 0.00, 0.40, -0.30, -1.00, -0.55, -0.55],
                [0.09, 0.85, 0.18, 1.15, 0.35, 0.70, 0.30, 1.00, 0.55, 0.55],
            ),
            (
                [0.0, 0.15, 0.07, 0.15, 0.10, 0.95, -0.30, -1.00, -0.55, -0.55],
                [0.09, 0.85, 0.18, 0.95, 0.70, 1.25, 0.30, 1.00, 0.55, 0.55],
            ),
        ];
        // physical baseline: cambered tapered wing with mild sweep
        let base_physical: [[f64; 10]; 3] = [
            [0.02, 0.40, 0.12, 1.00, 0.00, 0.00, 0.0, 0.0, 0.0, 0.0],
            [0.02, 0.40, 0.12, 0.80, 0.15, 0.55, 0.0, 0.0, 0.0, 0.0],
            [0.02, 0.40, 0.12, 0.50, 0.35, 1.10, 0.0, 0.0, 0.0, 0.0],
        ];
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        let mut phys = Vec::new();
        for s in 0..3 {
            lower.extend_from_slice(&section_bounds[s].0);
            upper.extend_from_slice(&section_bounds[s].1);
            phys.extend_from_slice(&base_physical[s]);
        }
        let u_base = normalize(&phys, &lower, &upper).expect("desk bounds are sane");
        GeneratorConfig {
            n_sections: 3,
            pts_per_section: 28,
            n_span: 28,
            lower,
            upper,
            // root m/t; mid p/chord/twist/roll; tip chord/le_z/twist/yaw
            active: vec![0, 2, 11, 13, 17, 18, 23, 26, 27, 29],
            u_base,
        }
    }
}

/// Forward operator with a cached baseline geometry.
pub struct Generator {
    cfg: GeneratorConfig,
    g0: Array1<f64>,
}

impl Generator {
    pub fn new(cfg: GeneratorConfig) -> Result<Self> {
        cfg.validate()?;
        let g0 = build_geometry(&cfg, &cfg.u_base.clone())?.0;
        Ok(Generator {
            cfg,
            g0: Array1::from_vec(g0),
        })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.cfg
    }

    pub fn baseline(&self) -> &Array1<f64> {
        &self.g0
    }

    /// Expands the free variables into the full normalized parameter vector.
    pub fn expand(&self, u: &DesignVector) -> Result<Vec<f64>> {
        if u.len() != self.cfg.m() {
            return Err(Error::Shape(format!(
                "design vector has {} entries, expected {}",
                u.len(),
                self.cfg.m()
            )));
        }
        let mut full = self.cfg.u_base.clone();
        for (&slot, &val) in self.cfg.active.iter().zip(u.values().iter()) {
            full[slot] = val;
        }
        Ok(full)
    }

    /// Evaluates the forward operator. Deterministic: the same design vector
    /// always produces the bit-identical geometry. A geometry that fails the
    /// validity check is still returned, flagged.
    pub fn generate(&self, u: &DesignVector) -> Result<ShapeSample> {
        let full = self.expand(u)?;
        let (g, sections2d, physical) = build_geometry(&self.cfg, &full)?;
        let valid = geometry_is_valid(&g, &sections2d, &physical, self.cfg.n_sections);
        let g = Array1::from_vec(g);
        // d is primary; g is re-derived from it so that d + g0 = g holds
        // bitwise, not merely to rounding
        let d = &g - &self.g0;
        let g = &d + &self.g0;
        Ok(ShapeSample {
            g,
            d,
            design: u.clone(),
            valid,
        })
    }

    /// Re-derives the validity flag of a sample from scratch.
    pub fn validity_check(&self, sample: &ShapeSample) -> Result<bool> {
        let full = self.expand(&sample.design)?;
        let (g, sections2d, physical) = build_geometry(&self.cfg, &full)?;
        Ok(geometry_is_valid(&g, &sections2d, &physical, self.cfg.n_sections))
    }
}

type BuiltGeometry = (Vec<f64>, Vec<Vec<[f64; 2]>>, Vec<f64>);

fn build_geometry(cfg: &GeneratorConfig, full_norm: &[f64]) -> Result<BuiltGeometry> {
    let physical = denormalize(full_norm, &cfg.lower, &cfg.upper)?;
    let mut sections2d = Vec::with_capacity(cfg.n_sections);
    let mut sections3d = Vec::with_capacity(cfg.n_sections);
    for s in 0..cfg.n_sections {
        let p = SectionParams::from_slice(&physical[s * PARAMS_PER_SECTION..(s + 1) * PARAMS_PER_SECTION]);
        let poly = naca_section(p.max_camber, p.camber_pos, p.thickness, cfg.pts_per_section)?;
        sections3d.push(transform_section(&poly, &p)?);
        sections2d.push(poly);
    }
    let g = loft(&sections3d, cfg.n_span)?;
    Ok((g, sections2d, physical))
}

fn geometry_is_valid(
    g: &[f64],
    sections2d: &[Vec<[f64; 2]>],
    physical: &[f64],
    n_sections: usize,
) -> bool {
    if g.iter().any(|x| !x.is_finite()) {
        return false;
    }
    for s in 0..n_sections {
        if physical[s * PARAMS_PER_SECTION + 3] <= 0.0 {
            return false;
        }
    }
    !sections2d.iter().any(|poly| polyline_self_intersects(poly))
}

/// Detects proper (strictly crossing) self-intersections of a closed
/// polyline. Shared endpoints of adjacent segments and zero-length segments
/// do not count.
pub fn polyline_self_intersects(points: &[[f64; 2]]) -> bool {
    let n = points.len();
    if n < 4 {
        return false;
    }
    let seg = |i: usize| (points[i], points[(i + 1) % n]);
    let degenerate = |(a, b): ([f64; 2], [f64; 2])| a == b;
    for i in 0..n {
        let si = seg(i);
        if degenerate(si) {
            continue;
        }
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue; // closure adjacency
            }
            let sj = seg(j);
            if degenerate(sj) {
                continue;
            }
            if segments_cross(si.0, si.1, sj.0, sj.1) {
                return true;
            }
        }
    }
    false
}

fn segments_cross(p1: [f64; 2], p2: [f64; 2], p3: [f64; 2], p4: [f64; 2]) -> bool {
    let orient = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| {
        (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    };
    let d1 = orient(p3, p4, p1);
    let d2 = orient(p3, p4, p2);
    let d3 = orient(p1, p2, p3);
    let d4 = orient(p1, p2, p4);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}
