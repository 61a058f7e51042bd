//! Hand-written SVG charts, built only from the files a sweep leaves behind.

use std::fmt::Write;

use locnet::experiment::SccTrace;
use locnet::output::StatsRow;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

const W: f64 = 900.0;
const H: f64 = 520.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

fn colour(node: usize) -> &'static str {
    PALETTE[node % PALETTE.len()]
}

/// Vertical marker drawn on the in-degree chart.
#[derive(Debug, Clone, PartialEq)]
pub struct Marker {
    pub label: String,
    pub value: f64,
}

/// Maps data coordinates into the plot area.
struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        let span = if self.x1 == self.x0 { 1.0 } else { self.x1 - self.x0 };
        LEFT + (x - self.x0) / span * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        let span = if self.y1 == self.y0 { 1.0 } else { self.y1 - self.y0 };
        H - BOTTOM - (y - self.y0) / span * (H - TOP - BOTTOM)
    }
}

fn open(out: &mut String, title: &str) {
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{title}</text>"#, W / 2.0).unwrap();
}

fn x_axis(out: &mut String, f: &Frame, label: &str) {
    let y = H - BOTTOM;
    writeln!(out, r#"<line x1="{LEFT}" y1="{y}" x2="{}" y2="{y}" stroke="black"/>"#, W - RIGHT).unwrap();
    for k in 0..=5 {
        let v = f.x0 + (f.x1 - f.x0) * k as f64 / 5.0;
        let x = f.px(v);
        writeln!(out, r#"<line x1="{x:.2}" y1="{y}" x2="{x:.2}" y2="{}" stroke="black"/>"#, y + 5.0).unwrap();
        writeln!(out, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{v:.3}</text>"#, y + 20.0).unwrap();
    }
    writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{label}</text>"#,
        LEFT + (W - LEFT - RIGHT) / 2.0,
        H - 15.0
    )
    .unwrap();
}

fn legend(out: &mut String, n: usize) {
    for node in 0..n {
        let y = TOP + 10.0 + node as f64 * 20.0;
        let x = W - RIGHT + 20.0;
        writeln!(
            out,
            r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{}" stroke-width="3"/>"#,
            x + 25.0,
            colour(node)
        )
        .unwrap();
        writeln!(out, r#"<text x="{}" y="{}">node {}</text>"#, x + 32.0, y + 4.0, node + 1).unwrap();
    }
}

fn polyline(out: &mut String, pts: &[(f64, f64)], stroke: &str, width: f64) {
    if pts.is_empty() {
        return;
    }
    let d: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    writeln!(
        out,
        r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="{width}"/>"#,
        d.join(" ")
    )
    .unwrap();
}

/// Mean in-degree per node against the swept mass, with a ±std band.
pub fn in_degree_chart(rows: &[StatsRow], markers: &[Marker]) -> String {
    let n = rows.iter().map(|r| r.node).max().unwrap_or(0);
    let mut values: Vec<f64> = Vec::new();
    for r in rows {
        if !values.contains(&r.m4) {
            values.push(r.m4);
        }
    }
    let mut out = String::new();
    open(&mut out, "Mean in-degree per node (band: ±1 std)");
    let top = n.saturating_sub(1).max(1) as f64;
    let f = Frame {
        x0: values.first().copied().unwrap_or(0.0),
        x1: values.last().copied().unwrap_or(1.0),
        y0: 0.0,
        y1: top,
    };
    x_axis(&mut out, &f, "m4");
    writeln!(out, r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}" stroke="black"/>"#, H - BOTTOM).unwrap();
    for k in 0..=top as usize {
        let y = f.py(k as f64);
        writeln!(out, r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#, LEFT - 5.0).unwrap();
        writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{k}</text>"#, LEFT - 8.0, y + 4.0).unwrap();
    }
    writeln!(
        out,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">in-degree</text>"#,
        H / 2.0,
        H / 2.0
    )
    .unwrap();

    for node in 1..=n {
        let series: Vec<&StatsRow> = rows.iter().filter(|r| r.node == node).collect();
        if series.is_empty() {
            continue;
        }
        let c = colour(node - 1);
        let upper = series.iter().map(|r| (f.px(r.m4), f.py((r.mean + r.std).min(top))));
        let lower = series.iter().rev().map(|r| (f.px(r.m4), f.py((r.mean - r.std).max(0.0))));
        let band: Vec<String> = upper.chain(lower).map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        writeln!(out, r#"<polygon points="{}" fill="{c}" fill-opacity="0.15" stroke="none"/>"#, band.join(" ")).unwrap();
        let mean: Vec<(f64, f64)> = series.iter().map(|r| (f.px(r.m4), f.py(r.mean))).collect();
        polyline(&mut out, &mean, c, 1.8);
    }
    for (k, m) in markers.iter().enumerate() {
        let x = f.px(m.value);
        writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{}" stroke="black" stroke-dasharray="4 3"/>"#,
            H - BOTTOM
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{:.2}" y="{}" font-size="10">{} = {:.3}</text>"#,
            x + 3.0,
            TOP + 12.0 + 12.0 * k as f64,
            m.label,
            m.value
        )
        .unwrap();
    }
    legend(&mut out, n);
    out.push_str("</svg>\n");
    out
}

/// Vertical position of every node: components stacked in canonical order,
/// members packed tightly so that touching lines mark a shared component.
fn lane_positions(membership: &[usize]) -> Vec<f64> {
    const MEMBER_GAP: f64 = 1.0;
    const COMPONENT_GAP: f64 = 4.0;
    let mut order: Vec<usize> = (0..membership.len()).collect();
    order.sort_by_key(|&v| (membership[v], v));
    let mut pos = vec![0.0; membership.len()];
    let mut y = 0.0;
    for (k, &v) in order.iter().enumerate() {
        if k > 0 {
            y += if membership[v] == membership[order[k - 1]] { MEMBER_GAP } else { COMPONENT_GAP };
        }
        pos[v] = y;
    }
    pos
}

/// SCC membership of every node along the sweep for one initial condition.
pub fn scc_chart(trace: &SccTrace) -> String {
    let n = trace.membership.iter().flatten().map(Vec::len).max().unwrap_or(0);
    let lanes: Vec<Option<Vec<f64>>> = trace.membership.iter().map(|m| m.as_deref().map(lane_positions)).collect();
    let y_max = lanes.iter().flatten().flatten().copied().fold(1.0, f64::max);
    let mut out = String::new();
    open(&mut out, "Strongly connected components (touching lines share a component)");
    let f = Frame {
        x0: trace.values.first().copied().unwrap_or(0.0),
        x1: trace.values.last().copied().unwrap_or(1.0),
        y0: y_max + 1.0,
        y1: -1.0,
    };
    x_axis(&mut out, &f, "m4");
    for node in 0..n {
        let mut run: Vec<(f64, f64)> = Vec::new();
        for (v, lane) in trace.values.iter().zip(&lanes) {
            match lane {
                Some(pos) => run.push((f.px(*v), f.py(pos[node]))),
                None => {
                    polyline(&mut out, &run, colour(node), 3.0);
                    run.clear();
                }
            }
        }
        polyline(&mut out, &run, colour(node), 3.0);
    }
    legend(&mut out, n);
    out.push_str("</svg>\n");
    out
}
