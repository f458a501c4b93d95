//! Deterministic SVG reports: role-importance traces for the whole
//! network and per-node membership bands over time. No plotting
//! dependency; coordinates are laid out with fixed-precision formatting
//! so outputs are stable byte-for-byte and golden-file testable.

use std::fmt::Write as _;

use crate::dynamics::{NodeTrajectory, RoleImportanceSeries};

/// Role color palette, stable across all plots within a run.
pub const PALETTE: [&str; 12] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac", "#1f77b4", "#8c564b",
];

pub fn role_color(role: usize) -> &'static str {
    PALETTE[role % PALETTE.len()]
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct Canvas {
    body: String,
}

impl Canvas {
    fn new(width: f64, height: f64) -> Self {
        let mut body = String::new();
        writeln!(
            body,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">"
        )
        .unwrap();
        writeln!(
            body,
            "<rect x=\"0\" y=\"0\" width=\"{width:.0}\" height=\"{height:.0}\" fill=\"#ffffff\"/>"
        )
        .unwrap();
        Self { body }
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        writeln!(
            self.body,
            "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"{stroke}\" stroke-width=\"{width:.1}\"/>"
        )
        .unwrap();
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        writeln!(
            self.body,
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" fill=\"{fill}\"/>"
        )
        .unwrap();
    }

    fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, content: &str) {
        writeln!(
            self.body,
            "<text x=\"{x:.2}\" y=\"{y:.2}\" font-family=\"sans-serif\" font-size=\"{size:.0}\" text-anchor=\"{anchor}\">{}</text>",
            escape(content)
        )
        .unwrap();
    }

    fn polyline(&mut self, points: &[(f64, f64)], stroke: &str) {
        let mut path = String::new();
        for (i, (x, y)) in points.iter().enumerate() {
            if i > 0 {
                path.push(' ');
            }
            write!(path, "{x:.2},{y:.2}").unwrap();
        }
        writeln!(
            self.body,
            "<polyline points=\"{path}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"2.0\"/>"
        )
        .unwrap();
    }

    fn legend(&mut self, x: f64, mut y: f64, labels: &[String]) {
        for (k, label) in labels.iter().enumerate() {
            self.rect(x, y - 9.0, 12.0, 12.0, role_color(k));
            self.text(x + 18.0, y + 1.0, 12.0, "start", label);
            y += 20.0;
        }
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

/// One line per role over time; x is the timestep, y the relative role
/// importance. Legend entries come from the caller (typically the role's
/// dominant measure).
pub fn plot_network_dynamics(series: &RoleImportanceSeries, labels: &[String]) -> String {
    let (width, height) = (960.0, 480.0);
    let (left, right, top, bottom) = (64.0, 210.0, 28.0, 52.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;
    let t_max = series.t_max().max(1);
    let rank = series.rank();

    let data_max = series.values.iter().fold(0.0f64, |a, &b| a.max(b));
    let y_max = if data_max <= 1.0 {
        1.0
    } else {
        data_max.ceil()
    };

    let x_of = |t: usize| {
        if t_max == 1 {
            left + plot_w / 2.0
        } else {
            left + plot_w * (t as f64 / (t_max - 1) as f64)
        }
    };
    let y_of = |v: f64| top + plot_h * (1.0 - v / y_max);

    let mut c = Canvas::new(width, height);
    // Axes.
    c.line(left, top, left, top + plot_h, "#333333", 1.0);
    c.line(
        left,
        top + plot_h,
        left + plot_w,
        top + plot_h,
        "#333333",
        1.0,
    );
    // Y ticks.
    for i in 0..=4 {
        let v = y_max * i as f64 / 4.0;
        let y = y_of(v);
        c.line(left - 4.0, y, left, y, "#333333", 1.0);
        c.text(left - 8.0, y + 4.0, 11.0, "end", &format!("{v:.2}"));
    }
    // X ticks.
    let step = (t_max / 10).max(1);
    for t in (0..t_max).step_by(step) {
        let x = x_of(t);
        c.line(x, top + plot_h, x, top + plot_h + 4.0, "#333333", 1.0);
        c.text(
            x,
            top + plot_h + 18.0,
            11.0,
            "middle",
            &format!("{}", t + 1),
        );
    }
    c.text(left + plot_w / 2.0, height - 14.0, 12.0, "middle", "time");
    c.text(14.0, top + plot_h / 2.0, 12.0, "middle", "importance");

    for k in 0..rank {
        let points: Vec<(f64, f64)> = (0..t_max)
            .map(|t| (x_of(t), y_of(series.values[[t, k]])))
            .collect();
        c.polyline(&points, role_color(k));
    }

    let labels: Vec<String> = (0..rank)
        .map(|k| {
            labels
                .get(k)
                .cloned()
                .unwrap_or_else(|| format!("role {}", k + 1))
        })
        .collect();
    c.legend(left + plot_w + 24.0, top + 12.0, &labels);
    c.finish()
}

/// Per-node horizontal bands of role-colored stacked proportions over
/// time. Inactive timesteps render white.
pub fn plot_node_dynamics(
    trajs: &[NodeTrajectory],
    node_labels: &[String],
    role_labels: &[String],
) -> String {
    let t_max = trajs
        .iter()
        .map(|t| t.steps.len())
        .max()
        .unwrap_or(0)
        .max(1);
    let rank = trajs
        .iter()
        .flat_map(|t| t.steps.iter().flatten())
        .map(|row| row.len())
        .max()
        .unwrap_or(0);

    let band_h = 22.0;
    let gap = 6.0;
    let (left, right, top, bottom) = (96.0, 210.0, 28.0, 40.0);
    let plot_w = 960.0 - left - right;
    let height = top + bottom + trajs.len() as f64 * (band_h + gap);
    let cell_w = plot_w / t_max as f64;

    let mut c = Canvas::new(960.0, height.max(140.0));
    for (i, traj) in trajs.iter().enumerate() {
        let y0 = top + i as f64 * (band_h + gap);
        let label = node_labels
            .get(i)
            .cloned()
            .unwrap_or_else(|| format!("node {}", traj.node));
        c.text(left - 8.0, y0 + band_h / 2.0 + 4.0, 11.0, "end", &label);
        for (t, step) in traj.steps.iter().enumerate() {
            let x0 = left + t as f64 * cell_w;
            let Some(row) = step else {
                continue; // inactive: leave the background white
            };
            let sum: f64 = row.iter().sum();
            if sum <= 0.0 {
                continue;
            }
            let mut y = y0;
            for (k, &v) in row.iter().enumerate() {
                let h = band_h * (v / sum);
                if h > 0.0 {
                    c.rect(x0, y, cell_w, h, role_color(k));
                    y += h;
                }
            }
        }
        writeln!(
            c.body,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"#cccccc\" stroke-width=\"0.5\"/>",
            left, y0, plot_w, band_h
        )
        .unwrap();
    }
    // Time axis.
    let axis_y = top + trajs.len() as f64 * (band_h + gap) + 2.0;
    c.line(left, axis_y, left + plot_w, axis_y, "#333333", 1.0);
    let step = (t_max / 10).max(1);
    for t in (0..t_max).step_by(step) {
        let x = left + (t as f64 + 0.5) * cell_w;
        c.line(x, axis_y, x, axis_y + 4.0, "#333333", 1.0);
        c.text(x, axis_y + 18.0, 11.0, "middle", &format!("{}", t + 1));
    }

    let labels: Vec<String> = (0..rank)
        .map(|k| {
            role_labels
                .get(k)
                .cloned()
                .unwrap_or_else(|| format!("role {}", k + 1))
        })
        .collect();
    c.legend(left + plot_w + 24.0, top + 12.0, &labels);
    c.finish()
}
