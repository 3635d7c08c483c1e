use std::fmt::Write as _;

use crate::{Error, Result};

// Chart geometry. All charts share an 800x800 canvas with a square plot
// area; every coordinate below is derived from these constants so the
// output is rigidly deterministic.
const CANVAS: f64 = 800.0;
const PLOT_X: f64 = 90.0;
const PLOT_Y: f64 = 70.0;
const PLOT_W: f64 = 560.0;
const PLOT_H: f64 = 560.0;
const LEGEND_X: f64 = 665.0;

/// Threat score levels drawn as iso-lines on the performance diagram.
const CSI_LEVELS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Frequency bias values drawn as rays from the origin.
const BIAS_LEVELS: [f64; 9] = [0.3, 0.5, 0.8, 1.0, 1.3, 2.0, 3.0, 5.0, 10.0];

/// Method colors: fixed assignments for the conventional method names,
/// then a palette cycled by first appearance.
const KNOWN_COLORS: [(&str, &str); 3] =
    [("pca", "#d62728"), ("cae", "#2ca02c"), ("imported", "#1f77b4")];
const PALETTE: [&str; 5] = ["#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// One marker on the performance diagram.
#[derive(Debug, Clone)]
pub struct DiagramPoint {
    /// Success ratio (x axis), in `[0, 1]`.
    pub sr: f64,
    /// Probability of detection (y axis), in `[0, 1]`.
    pub pod: f64,
    /// Event name; selects the marker symbol.
    pub event: String,
    /// Method name; selects the color.
    pub method: String,
}

/// Per-method score curves across a latent dimension sweep.
#[derive(Debug, Clone)]
pub struct SweepSeries {
    pub method: String,
    pub csi: Vec<Option<f64>>,
    pub pod: Vec<Option<f64>>,
    pub far: Vec<Option<f64>>,
}

/// Renders a performance diagram (success ratio against probability of
/// detection, threat score iso-lines, frequency bias rays) as an SVG
/// document. Symbols encode events, colors encode methods. Output is
/// byte-identical for identical input.
pub fn render_performance_diagram(title: &str, points: &[DiagramPoint]) -> Result<String> {
    for p in points {
        if !(0.0..=1.0).contains(&p.sr) || !(0.0..=1.0).contains(&p.pod) {
            return Err(Error::InvalidInput(format!(
                "point for {}/{} outside the unit square: sr={}, pod={}",
                p.method, p.event, p.sr, p.pod
            )));
        }
    }

    let mut svg = document_open();
    let _ = write!(
        svg,
        "<text x=\"{:.2}\" y=\"40.00\" text-anchor=\"middle\" font-size=\"22\" \
         font-family=\"sans-serif\">{}</text>",
        PLOT_X + PLOT_W / 2.0,
        escape_xml(title)
    );

    // Threat score iso-lines: pod = 1 / (1 + 1/csi - 1/sr).
    for &level in &CSI_LEVELS {
        let mut path = String::new();
        let steps = 200;
        let mut first = true;
        for i in 0..=steps {
            let sr = level + (1.0 - level) * i as f64 / steps as f64;
            if sr <= 0.0 {
                continue;
            }
            let pod = 1.0 / (1.0 + 1.0 / level - 1.0 / sr);
            if !(0.0..=1.0).contains(&pod) {
                continue;
            }
            let cmd = if first { 'M' } else { 'L' };
            first = false;
            let _ = write!(path, "{cmd}{:.2} {:.2} ", px(sr), py(pod));
        }
        let _ = write!(
            svg,
            "<path d=\"{}\" fill=\"none\" stroke=\"#bbbbbb\" stroke-width=\"1\"/>",
            path.trim_end()
        );
        // Each iso-line meets the right edge at pod = level.
        let _ = write!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" fill=\"#888888\" \
             font-family=\"sans-serif\">{:.1}</text>",
            px(1.0) + 6.0,
            py(level) + 4.0,
            level
        );
    }

    // Frequency bias rays pod = bias * sr, clipped to the unit square.
    for &bias in &BIAS_LEVELS {
        let (end_sr, end_pod) = if bias <= 1.0 { (1.0, bias) } else { (1.0 / bias, 1.0) };
        let _ = write!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" \
             stroke=\"#999999\" stroke-width=\"1\" stroke-dasharray=\"4 4\"/>",
            px(0.0),
            py(0.0),
            px(end_sr),
            py(end_pod)
        );
        let (lx, ly) = if bias <= 1.0 {
            (px(1.0) + 6.0, py(bias) - 8.0)
        } else {
            (px(1.0 / bias) - 8.0, py(1.0) - 6.0)
        };
        let _ = write!(
            svg,
            "<text x=\"{lx:.2}\" y=\"{ly:.2}\" font-size=\"11\" fill=\"#666666\" \
             font-family=\"sans-serif\">{bias}</text>"
        );
    }

    axes(&mut svg, "Success Ratio (1 - FAR)", "Probability of Detection");

    // Data points: symbol per event, color per method.
    let events = first_appearance(points.iter().map(|p| p.event.as_str()));
    let methods = first_appearance(points.iter().map(|p| p.method.as_str()));
    for p in points {
        let sym = events.iter().position(|e| e == &p.event).unwrap();
        let color = method_color(&methods, &p.method);
        let _ = write!(
            svg,
            "<g class=\"pt\" data-method=\"{}\" data-event=\"{}\">{}</g>",
            escape_xml(&p.method),
            escape_xml(&p.event),
            symbol(sym, px(p.sr), py(p.pod), color)
        );
    }

    // Legend: events (symbols) then methods (colors).
    let mut ly = PLOT_Y + 10.0;
    for (i, event) in events.iter().enumerate() {
        let _ = write!(
            svg,
            "<g>{}</g><text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\" \
             font-family=\"sans-serif\">{}</text>",
            symbol(i, LEGEND_X, ly - 4.0, "#444444"),
            LEGEND_X + 14.0,
            ly,
            escape_xml(event)
        );
        ly += 22.0;
    }
    ly += 10.0;
    for method in &methods {
        let color = method_color(&methods, method);
        let _ = write!(
            svg,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"12\" height=\"12\" fill=\"{}\"/>\
             <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\" font-family=\"sans-serif\">{}</text>",
            LEGEND_X - 6.0,
            ly - 14.0,
            color,
            LEGEND_X + 14.0,
            ly - 4.0,
            escape_xml(method)
        );
        ly += 22.0;
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Renders per-method score curves against latent dimension as an SVG
/// document. The x axis is logarithmic in the dimension with one tick per
/// entry. Line styles: detection solid, false alarm ratio dashed, threat
/// score dash-dot. Undefined values break the line.
pub fn render_sweep_chart(title: &str, dims: &[usize], series: &[SweepSeries]) -> Result<String> {
    if dims.is_empty() {
        return Err(Error::InvalidInput("empty dimension sweep".into()));
    }
    if dims.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("dimensions must be strictly increasing".into()));
    }
    if dims[0] == 0 {
        return Err(Error::InvalidInput("dimension 0 in sweep".into()));
    }
    for s in series {
        for (name, vs) in [("csi", &s.csi), ("pod", &s.pod), ("far", &s.far)] {
            if vs.len() != dims.len() {
                return Err(Error::InvalidInput(format!(
                    "{}-{name} series has {} values for {} dimensions",
                    s.method,
                    vs.len(),
                    dims.len()
                )));
            }
            if vs.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidInput(format!(
                    "{}-{name} series leaves [0, 1]",
                    s.method
                )));
            }
        }
    }

    // Horizontal position: log2 spacing, single dimension centered.
    let lo = (dims[0] as f64).log2();
    let hi = (dims[dims.len() - 1] as f64).log2();
    let xpos = |dim: usize| -> f64 {
        if hi > lo {
            PLOT_X + ((dim as f64).log2() - lo) / (hi - lo) * PLOT_W
        } else {
            PLOT_X + PLOT_W / 2.0
        }
    };

    let mut svg = document_open();
    let _ = write!(
        svg,
        "<text x=\"{:.2}\" y=\"40.00\" text-anchor=\"middle\" font-size=\"22\" \
         font-family=\"sans-serif\">{}</text>",
        PLOT_X + PLOT_W / 2.0,
        escape_xml(title)
    );
    axes(&mut svg, "Feature vector size", "Score");

    // Dimension ticks.
    for &dim in dims {
        let x = xpos(dim);
        let _ = write!(
            svg,
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" \
             stroke=\"#333333\" stroke-width=\"1\"/>\
             <text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"12\" \
             font-family=\"sans-serif\">{dim}</text>",
            PLOT_Y + PLOT_H,
            PLOT_Y + PLOT_H + 6.0,
            PLOT_Y + PLOT_H + 22.0
        );
    }

    let methods = first_appearance(series.iter().map(|s| s.method.as_str()));
    let line_styles: [(&str, &str, fn(&SweepSeries) -> &Vec<Option<f64>>); 3] = [
        ("pod", "", |s| &s.pod),
        ("far", "8 5", |s| &s.far),
        ("csi", "10 4 2 4", |s| &s.csi),
    ];
    for s in series {
        let color = method_color(&methods, &s.method);
        for (metric, dash, values) in &line_styles {
            let dash_attr = if dash.is_empty() {
                String::new()
            } else {
                format!(" stroke-dasharray=\"{dash}\"")
            };
            // Split into segments at undefined values.
            let mut segment: Vec<(f64, f64)> = Vec::new();
            let mut segments: Vec<Vec<(f64, f64)>> = Vec::new();
            for (i, v) in values(s).iter().enumerate() {
                match v {
                    Some(y) => segment.push((xpos(dims[i]), py(*y))),
                    None => {
                        if !segment.is_empty() {
                            segments.push(std::mem::take(&mut segment));
                        }
                    }
                }
            }
            if !segment.is_empty() {
                segments.push(segment);
            }
            for seg in &segments {
                let path: Vec<String> =
                    seg.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                let _ = write!(
                    svg,
                    "<polyline class=\"series\" data-method=\"{}\" data-metric=\"{metric}\" \
                     points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"{dash_attr}/>",
                    escape_xml(&s.method),
                    path.join(" ")
                );
                for (x, y) in seg {
                    let _ = write!(
                        svg,
                        "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3\" fill=\"{color}\"/>"
                    );
                }
            }
        }
    }

    // Legend: method colors and metric line styles.
    let mut ly = PLOT_Y + 10.0;
    for method in &methods {
        let color = method_color(&methods, method);
        let _ = write!(
            svg,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"12\" height=\"12\" fill=\"{color}\"/>\
             <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\" font-family=\"sans-serif\">{}</text>",
            LEGEND_X - 6.0,
            ly - 14.0,
            LEGEND_X + 14.0,
            ly - 4.0,
            escape_xml(method)
        );
        ly += 22.0;
    }
    ly += 10.0;
    for (metric, dash) in [("pod", ""), ("far", "8 5"), ("csi", "10 4 2 4")] {
        let dash_attr = if dash.is_empty() {
            String::new()
        } else {
            format!(" stroke-dasharray=\"{dash}\"")
        };
        let _ = write!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#333333\" \
             stroke-width=\"2\"{dash_attr}/>\
             <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\" font-family=\"sans-serif\">{metric}</text>",
            LEGEND_X - 6.0,
            ly - 8.0,
            LEGEND_X + 8.0,
            ly - 8.0,
            LEGEND_X + 14.0,
            ly - 4.0
        );
        ly += 22.0;
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}

// ─────────────────────── shared drawing helpers ───────────────────────

fn document_open() -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{c}\" height=\"{c}\" \
         viewBox=\"0 0 {c} {c}\">\
         <rect x=\"0\" y=\"0\" width=\"{c}\" height=\"{c}\" fill=\"#ffffff\"/>",
        c = CANVAS as u32
    )
}

/// Maps a unit x value into plot pixels.
fn px(x: f64) -> f64 {
    PLOT_X + x * PLOT_W
}

/// Maps a unit y value into plot pixels (origin bottom-left).
fn py(y: f64) -> f64 {
    PLOT_Y + (1.0 - y) * PLOT_H
}

/// Draws the plot frame, unit ticks every 0.2 on the y axis (and on the x
/// axis for unit-square charts), and axis captions.
fn axes(svg: &mut String, x_label: &str, y_label: &str) {
    let _ = write!(
        svg,
        "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" \
         stroke=\"#333333\" stroke-width=\"1.5\"/>",
        PLOT_X, PLOT_Y, PLOT_W, PLOT_H
    );
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let _ = write!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" \
             stroke=\"#333333\" stroke-width=\"1\"/>\
             <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-size=\"12\" \
             font-family=\"sans-serif\">{v:.1}</text>",
            PLOT_X - 6.0,
            PLOT_X,
            PLOT_X - 10.0,
            py(v) + 4.0,
            y = py(v)
        );
        if x_label.starts_with("Success") {
            let _ = write!(
                svg,
                "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" \
                 stroke=\"#333333\" stroke-width=\"1\"/>\
                 <text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"12\" \
                 font-family=\"sans-serif\">{v:.1}</text>",
                PLOT_Y + PLOT_H,
                PLOT_Y + PLOT_H + 6.0,
                PLOT_Y + PLOT_H + 22.0,
                x = px(v)
            );
        }
    }
    let _ = write!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"16\" \
         font-family=\"sans-serif\">{}</text>",
        PLOT_X + PLOT_W / 2.0,
        PLOT_Y + PLOT_H + 48.0,
        escape_xml(x_label)
    );
    let _ = write!(
        svg,
        "<text x=\"30.00\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"16\" \
         font-family=\"sans-serif\" transform=\"rotate(-90 30 {mid:.0})\">{}</text>",
        PLOT_Y + PLOT_H / 2.0,
        escape_xml(y_label),
        mid = PLOT_Y + PLOT_H / 2.0
    );
}

/// Marker shapes, cycled by event index: circle, square, triangle,
/// diamond, cross.
fn symbol(index: usize, x: f64, y: f64, color: &str) -> String {
    const R: f64 = 7.0;
    match index % 5 {
        0 => format!("<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"{R}\" fill=\"{color}\"/>"),
        1 => format!(
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{color}\"/>",
            x - R + 1.0,
            y - R + 1.0,
            2.0 * (R - 1.0),
            2.0 * (R - 1.0)
        ),
        2 => format!(
            "<polygon points=\"{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}\" fill=\"{color}\"/>",
            x,
            y - R,
            x - R,
            y + R - 1.0,
            x + R,
            y + R - 1.0
        ),
        3 => format!(
            "<polygon points=\"{:.2},{:.2} {:.2},{:.2} {:.2},{:.2} {:.2},{:.2}\" fill=\"{color}\"/>",
            x,
            y - R - 1.0,
            x + R + 1.0,
            y,
            x,
            y + R + 1.0,
            x - R - 1.0,
            y
        ),
        _ => format!(
            "<path d=\"M{:.2} {:.2} L{:.2} {:.2} M{:.2} {:.2} L{:.2} {:.2}\" \
             stroke=\"{color}\" stroke-width=\"3\" fill=\"none\"/>",
            x - R + 1.0,
            y - R + 1.0,
            x + R - 1.0,
            y + R - 1.0,
            x - R + 1.0,
            y + R - 1.0,
            x + R - 1.0,
            y - R + 1.0
        ),
    }
}

/// Distinct strings in order of first appearance.
fn first_appearance<'a>(items: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut seen: Vec<String> = Vec::new();
    for item in items {
        if !seen.iter().any(|s| s == item) {
            seen.push(item.to_string());
        }
    }
    seen
}

fn method_color(methods: &[String], method: &str) -> &'static str {
    if let Some(&(_, color)) = KNOWN_COLORS.iter().find(|(name, _)| *name == method) {
        return color;
    }
    // Unknown methods draw from the palette by first-appearance rank.
    let rank = methods
        .iter()
        .filter(|m| !KNOWN_COLORS.iter().any(|(name, _)| name == m))
        .position(|m| m == method)
        .unwrap_or(0);
    PALETTE[rank % PALETTE.len()]
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
        .replace('\'', "&apos;")
}

// ───────────────────────────── Tests ─────────────────────────────
