//! Self-contained SVG emission for the sweep and report figures: line charts
//! (optionally log-scale) with horizontal rule lines, and histogram charts.
//! The source data rides along in an XML comment so every figure is
//! reproducible from the file alone.

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 34.0;
const MARGIN_B: f64 = 56.0;

const COLORS: [&str; 6] = ["#1f6fb4", "#d45500", "#2e8b57", "#8b2ed4", "#b41f2e", "#6b6b6b"];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
    /// Horizontal rules: (value, label, dash pattern).
    pub h_rules: Vec<(f64, String, &'static str)>,
    /// Comment stamped into the file header.
    pub comment: String,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let raw = (hi - lo) / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|&s| s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() * step;
    let mut ticks = Vec::new();
    let mut t = first;
    while t <= hi + 1e-9 * step {
        ticks.push(t);
        t += step;
    }
    ticks
}

fn log_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let lo_dec = lo.log10().floor() as i32;
    let hi_dec = hi.log10().ceil() as i32;
    (lo_dec..=hi_dec).map(|d| 10f64.powi(d)).collect()
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if a >= 1e4 || a < 1e-3 {
        format!("{v:.0e}")
    } else if a >= 1.0 {
        let s = format!("{v}");
        if s.len() > 6 { format!("{v:.2}") } else { s }
    } else {
        let s = format!("{v}");
        if s.len() > 6 { format!("{v:.4}") } else { s }
    }
}

impl LineChart {
    pub fn render(&self) -> String {
        let (px0, px1) = (MARGIN_L, WIDTH - MARGIN_R);
        let (py0, py1) = (HEIGHT - MARGIN_B, MARGIN_T);

        let xs: Vec<f64> = self.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).collect();
        let mut ys: Vec<f64> = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.1))
            .chain(self.h_rules.iter().map(|r| r.0))
            .collect();
        if self.log_y {
            ys.retain(|&y| y > 0.0);
        }
        let (x_lo, x_hi) = bounds(&xs, false);
        let (y_lo, y_hi) = bounds(&ys, self.log_y);

        let x_of = |x: f64| px0 + (x - x_lo) / (x_hi - x_lo).max(1e-300) * (px1 - px0);
        let y_of = |y: f64| {
            let t = if self.log_y {
                (y.max(1e-300).log10() - y_lo.log10()) / (y_hi.log10() - y_lo.log10()).max(1e-300)
            } else {
                (y - y_lo) / (y_hi - y_lo).max(1e-300)
            };
            py0 + t * (py1 - py0)
        };

        let mut svg = header(&self.comment);
        chrome(&mut svg, &self.title, &self.x_label, &self.y_label);

        // axes frame
        svg.push_str(&format!(
            "<rect x='{px0}' y='{py1}' width='{}' height='{}' fill='none' stroke='#333' stroke-width='1'/>\n",
            px1 - px0,
            py0 - py1
        ));

        // ticks
        for t in nice_ticks(x_lo, x_hi, 8) {
            let x = x_of(t);
            svg.push_str(&format!(
                "<line x1='{x:.2}' y1='{py0}' x2='{x:.2}' y2='{}' stroke='#333'/>\n",
                py0 + 4.0
            ));
            svg.push_str(&format!(
                "<text x='{x:.2}' y='{}' font-size='11' text-anchor='middle'>{}</text>\n",
                py0 + 17.0,
                fmt_tick(t)
            ));
        }
        let y_ticks = if self.log_y { log_ticks(y_lo, y_hi) } else { nice_ticks(y_lo, y_hi, 6) };
        for t in y_ticks {
            if t < y_lo * 0.999 || t > y_hi * 1.001 {
                continue;
            }
            let y = y_of(t);
            svg.push_str(&format!(
                "<line x1='{}' y1='{y:.2}' x2='{px0}' y2='{y:.2}' stroke='#333'/>\n",
                px0 - 4.0
            ));
            svg.push_str(&format!(
                "<text x='{}' y='{:.2}' font-size='11' text-anchor='end'>{}</text>\n",
                px0 - 7.0,
                y + 3.5,
                fmt_tick(t)
            ));
            svg.push_str(&format!(
                "<line x1='{px0}' y1='{y:.2}' x2='{px1}' y2='{y:.2}' stroke='#eee'/>\n"
            ));
        }

        // horizontal rules
        for (value, label, dash) in &self.h_rules {
            if *value < y_lo || *value > y_hi {
                continue;
            }
            let y = y_of(*value);
            svg.push_str(&format!(
                "<line x1='{px0}' y1='{y:.2}' x2='{px1}' y2='{y:.2}' stroke='#555' stroke-dasharray='{dash}'/>\n"
            ));
            svg.push_str(&format!(
                "<text x='{}' y='{:.2}' font-size='11' fill='#555' text-anchor='end'>{}</text>\n",
                px1 - 4.0,
                y - 4.0,
                esc(label)
            ));
        }

        // series
        for (i, s) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let pts: Vec<String> = s
                .points
                .iter()
                .filter(|p| !self.log_y || p.1 > 0.0)
                .map(|p| format!("{:.2},{:.2}", x_of(p.0), y_of(p.1)))
                .collect();
            if pts.len() > 1 {
                svg.push_str(&format!(
                    "<polyline points='{}' fill='none' stroke='{color}' stroke-width='2'/>\n",
                    pts.join(" ")
                ));
            }
            for p in &pts {
                let (x, y) = p.split_once(',').unwrap();
                svg.push_str(&format!("<circle cx='{x}' cy='{y}' r='3' fill='{color}'/>\n"));
            }
            // legend
            let ly = MARGIN_T + 16.0 * i as f64 + 8.0;
            svg.push_str(&format!(
                "<line x1='{}' y1='{ly:.2}' x2='{}' y2='{ly:.2}' stroke='{color}' stroke-width='3'/>\n",
                px1 - 130.0,
                px1 - 105.0
            ));
            svg.push_str(&format!(
                "<text x='{}' y='{:.2}' font-size='12'>{}</text>\n",
                px1 - 100.0,
                ly + 4.0,
                esc(&s.label)
            ));
        }

        svg.push_str("</svg>\n");
        svg
    }
}

#[derive(Debug, Clone)]
pub struct HistogramChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// (label, bin edges lo/hi, densities)
    pub series: Vec<(String, f64, f64, Vec<f64>)>,
    pub comment: String,
}

impl HistogramChart {
    pub fn render(&self) -> String {
        let (px0, px1) = (MARGIN_L, WIDTH - MARGIN_R);
        let (py0, py1) = (HEIGHT - MARGIN_B, MARGIN_T);
        let x_lo = self.series.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
        let x_hi = self.series.iter().map(|s| s.2).fold(f64::NEG_INFINITY, f64::max);
        let y_hi = self
            .series
            .iter()
            .flat_map(|s| s.3.iter().copied())
            .fold(0.0f64, f64::max)
            .max(1e-12)
            * 1.05;

        let x_of = |x: f64| px0 + (x - x_lo) / (x_hi - x_lo).max(1e-300) * (px1 - px0);
        let y_of = |y: f64| py0 + y / y_hi * (py1 - py0);

        let mut svg = header(&self.comment);
        chrome(&mut svg, &self.title, &self.x_label, &self.y_label);
        svg.push_str(&format!(
            "<rect x='{px0}' y='{py1}' width='{}' height='{}' fill='none' stroke='#333' stroke-width='1'/>\n",
            px1 - px0,
            py0 - py1
        ));
        for t in nice_ticks(x_lo, x_hi, 8) {
            let x = x_of(t);
            svg.push_str(&format!(
                "<line x1='{x:.2}' y1='{py0}' x2='{x:.2}' y2='{}' stroke='#333'/>\n<text x='{x:.2}' y='{}' font-size='11' text-anchor='middle'>{}</text>\n",
                py0 + 4.0,
                py0 + 17.0,
                fmt_tick(t)
            ));
        }
        for t in nice_ticks(0.0, y_hi, 6) {
            let y = y_of(t);
            svg.push_str(&format!(
                "<line x1='{}' y1='{y:.2}' x2='{px0}' y2='{y:.2}' stroke='#333'/>\n<text x='{}' y='{:.2}' font-size='11' text-anchor='end'>{}</text>\n",
                px0 - 4.0,
                px0 - 7.0,
                y + 3.5,
                fmt_tick(t)
            ));
        }

        // step outlines, one per method
        for (i, (label, lo, hi, dens)) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let width = (hi - lo) / dens.len() as f64;
            let mut d = format!("M {:.2} {:.2}", x_of(*lo), y_of(0.0));
            for (b, &v) in dens.iter().enumerate() {
                let x_left = x_of(lo + b as f64 * width);
                let x_right = x_of(lo + (b + 1) as f64 * width);
                let y = y_of(v);
                d.push_str(&format!(" L {x_left:.2} {y:.2} L {x_right:.2} {y:.2}"));
            }
            d.push_str(&format!(" L {:.2} {:.2}", x_of(*hi), y_of(0.0)));
            svg.push_str(&format!(
                "<path d='{d}' fill='{color}' fill-opacity='0.12' stroke='{color}' stroke-width='1.8'/>\n"
            ));
            let ly = MARGIN_T + 16.0 * i as f64 + 8.0;
            svg.push_str(&format!(
                "<line x1='{}' y1='{ly:.2}' x2='{}' y2='{ly:.2}' stroke='{color}' stroke-width='3'/>\n<text x='{}' y='{:.2}' font-size='12'>{}</text>\n",
                px1 - 170.0,
                px1 - 145.0,
                px1 - 140.0,
                ly + 4.0,
                esc(label)
            ));
        }
        svg.push_str("</svg>\n");
        svg
    }
}

fn bounds(values: &[f64], log: bool) -> (f64, f64) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if log {
        (lo * 0.8, hi * 1.25)
    } else {
        let pad = (hi - lo).max(1e-12) * 0.05;
        (lo - pad, hi + pad)
    }
}

fn header(comment: &str) -> String {
    format!(
        "<?xml version='1.0' encoding='UTF-8'?>\n<!-- {} -->\n<svg xmlns='http://www.w3.org/2000/svg' width='{WIDTH}' height='{HEIGHT}' viewBox='0 0 {WIDTH} {HEIGHT}'>\n<rect width='{WIDTH}' height='{HEIGHT}' fill='white'/>\n",
        esc(comment)
    )
}

fn chrome(svg: &mut String, title: &str, x_label: &str, y_label: &str) {
    svg.push_str(&format!(
        "<text x='{}' y='20' font-size='14' font-weight='bold' text-anchor='middle'>{}</text>\n",
        WIDTH / 2.0,
        esc(title)
    ));
    svg.push_str(&format!(
        "<text x='{}' y='{}' font-size='12' text-anchor='middle'>{}</text>\n",
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        HEIGHT - 14.0,
        esc(x_label)
    ));
    svg.push_str(&format!(
        "<text x='16' y='{}' font-size='12' text-anchor='middle' transform='rotate(-90 16 {})'>{}</text>\n",
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        esc(y_label)
    ));
}
