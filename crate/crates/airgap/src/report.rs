//! Text tables for reports and SVG overlays of flown trajectories.

use std::fmt::Write;

use airgap_core::agents::TrajectoryRow;
use airgap_core::envgen::{EnvironmentInstance, ObstacleKind};
use airgap_core::qof::{GapReport, MetricSummary, QofReport};

use crate::mitigate::GapReportFile;

fn metric(m: Option<MetricSummary>) -> String {
    m.map_or("-".into(), |m| format!("{:.2} ± {:.2}", m.mean, m.std))
}

fn pct(v: Option<f64>) -> String {
    v.map_or("-".into(), |v| format!("{v:.2}"))
}

/// One row per labelled report.
pub fn qof_table(rows: &[(&str, &QofReport)]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<24} {:>9} {:>9} {:>18} {:>18} {:>18} {:>12}",
        "run", "episodes", "success%", "flight time (s)", "distance (m)", "energy (kJ)", "latency (ms)"
    );
    for (label, r) in rows {
        let _ = writeln!(
            s,
            "{:<24} {:>9} {:>9.2} {:>18} {:>18} {:>18} {:>12.2}",
            label,
            r.n_episodes,
            r.success_rate,
            metric(r.flight_time),
            metric(r.distance),
            metric(r.energy_kj),
            r.mean_latency_ms
        );
    }
    s
}

pub fn gap_table(rows: &[(&str, &GapReport)]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<28} {:>12} {:>12} {:>12} {:>12} {:>14}",
        "gap", "flight %", "distance %", "energy %", "latency %", "success (pts)"
    );
    for (label, g) in rows {
        let _ = writeln!(
            s,
            "{:<28} {:>12} {:>12} {:>12} {:>12} {:>14.2}",
            label,
            pct(g.flight_time_pct),
            pct(g.distance_pct),
            pct(g.energy_pct),
            pct(g.latency_pct),
            g.success_rate_points
        );
    }
    s
}

pub fn mitigation_table(m: &GapReportFile) -> String {
    let mut s = qof_table(&[
        ("mitigated / no latency", &m.mitigated_baseline),
        ("mitigated / target", &m.mitigated_target),
        ("control / no latency", &m.control_baseline),
        ("control / target", &m.control_target),
    ]);
    s.push('\n');
    s.push_str(&gap_table(&[
        ("perf gap (with mitigation)", &m.report.with_mitigation),
        ("perf gap (without mitigation)", &m.report.without_mitigation),
    ]));
    let _ = writeln!(
        s,
        "\nresponse latency {:.3} s, safe speed {:.2} m/s, applied limit {:.2} m/s, flight-time gap ratio {}",
        m.response_latency,
        m.v_cap,
        m.applied_speed_limit,
        pct(m.report.flight_time_ratio)
    );
    s
}

const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Top-down plot of one or more flights, optionally over the arena they
/// flew in.
pub fn trajectory_svg(instance: Option<&EnvironmentInstance>, runs: &[(&str, &[TrajectoryRow])]) -> String {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    let mut grow = |x: f64, y: f64| {
        lo = [lo[0].min(x), lo[1].min(y)];
        hi = [hi[0].max(x), hi[1].max(y)];
    };
    if let Some(inst) = instance {
        let (hx, hy) = (inst.config.half_length(), inst.config.half_width());
        grow(-hx, -hy);
        grow(hx, hy);
    }
    for (_, rows) in runs {
        for r in *rows {
            grow(r.x, r.y);
        }
    }
    if !lo[0].is_finite() {
        lo = [-1.0, -1.0];
        hi = [1.0, 1.0];
    }
    let margin = 1.0;
    let (w, h) = (hi[0] - lo[0] + 2.0 * margin, hi[1] - lo[1] + 2.0 * margin);
    let scale = 600.0 / w.max(h);
    // y up in world, down in SVG
    let px = |x: f64| (x - lo[0] + margin) * scale;
    let py = |y: f64| (hi[1] + margin - y) * scale;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.2} {:.2}">"#,
        w * scale,
        h * scale + 20.0 * runs.len() as f64,
        w * scale,
        h * scale + 20.0 * runs.len() as f64
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if let Some(inst) = instance {
        let (hx, hy) = (inst.config.half_length(), inst.config.half_width());
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
            px(-hx),
            py(hy),
            2.0 * hx * scale,
            2.0 * hy * scale
        );
        for o in &inst.obstacles {
            let (a, b) = (o.min_corner(), o.max_corner());
            let fill = if o.kind == ObstacleKind::Static { "#888" } else { "#e8a33d" };
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                px(a.x),
                py(b.y),
                (b.x - a.x) * scale,
                (b.y - a.y) * scale
            );
        }
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="none" stroke="green" stroke-dasharray="4"/>"#,
            px(inst.goal[0]),
            py(inst.goal[1]),
            inst.config.goal_radius * scale
        );
    }
    for (i, (label, rows)) in runs.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = rows.iter().map(|r| format!("{:.2},{:.2}", px(r.x), py(r.y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="8" y="{:.2}" font-family="sans-serif" font-size="14" fill="{color}">{}</text>"#,
            h * scale + 16.0 + 20.0 * i as f64,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
