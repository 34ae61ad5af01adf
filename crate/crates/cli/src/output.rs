//! Artifact writers. Everything here is a pure function of its inputs, so
//! reruns produce identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ellopt_core::homogenization::SweepRow;
use ellopt_core::relaxation::ExpansionTable;
use ellopt_core::Mesh;
use serde::Serialize;

use crate::error::CliError;

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Output(format!("{}: {e}", path.display()))
}

fn write_rows<R: Serialize>(path: &Path, rows: impl IntoIterator<Item = R>) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path).map_err(csv_err(path))?;
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(CliError::io(path.display().to_string()))
}

#[derive(Serialize)]
struct NodalRow {
    node: usize,
    x: f64,
    y: f64,
    value: f64,
}

/// `node,x,y,value` for a nodal field.
pub fn nodal_csv(path: &Path, mesh: &Mesh<f64>, values: &[f64]) -> Result<(), CliError> {
    write_rows(
        path,
        values.iter().enumerate().map(|(n, &value)| {
            let [x, y] = mesh.node(n);
            NodalRow { node: n, x, y, value }
        }),
    )
}

#[derive(Serialize)]
struct ExpansionCsvRow<'a> {
    alpha: f64,
    j_alpha: Option<f64>,
    first_order: Option<f64>,
    second_order: Option<f64>,
    second_order_limit: Option<f64>,
    j_bar: f64,
    j1: f64,
    error: Option<&'a str>,
}

pub fn expansion_csv(path: &Path, table: &ExpansionTable<f64>) -> Result<(), CliError> {
    write_rows(
        path,
        table.rows.iter().map(|r| ExpansionCsvRow {
            alpha: r.alpha,
            j_alpha: r.j_alpha,
            first_order: r.first_order,
            second_order: r.second_order,
            second_order_limit: r.second_order_limit,
            j_bar: table.j_bar,
            j1: table.j1,
            error: r.error.as_deref(),
        }),
    )
}

pub fn sweep_csv(path: &Path, rows: &[SweepRow<f64>]) -> Result<(), CliError> {
    write_rows(path, rows.iter().copied())
}

pub fn json<V: Serialize>(path: &Path, value: &V) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
    s.push('\n');
    fs::write(path, s).map_err(CliError::io(path.display().to_string()))
}

/// Blue to white to red in 256 steps.
fn colormap(k: u8) -> (u8, u8, u8) {
    let t = k as f64 / 255.0;
    let lerp = |a: f64, b: f64, s: f64| (a + (b - a) * s).round() as u8;
    if t < 0.5 {
        let s = t / 0.5;
        (lerp(33.0, 247.0, s), lerp(102.0, 247.0, s), lerp(172.0, 247.0, s))
    } else {
        let s = (t - 0.5) / 0.5;
        (lerp(247.0, 178.0, s), lerp(247.0, 24.0, s), lerp(247.0, 43.0, s))
    }
}

/// Per-element heatmap on the unit square, 512 px wide, with the value
/// range written under the plot.
pub fn heatmap_svg(path: &Path, mesh: &Mesh<f64>, per_element: &[f64], title: &str) -> Result<(), CliError> {
    const SIZE: f64 = 512.0;
    const PAD: f64 = 24.0;
    let (lo, hi) = per_element.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut s = String::new();
    let h = SIZE + 2.0 * PAD + 24.0;
    let w = SIZE + 2.0 * PAD;
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<title>{title}</title>"#);
    let _ = writeln!(s, r#"<g shape-rendering="crispEdges">"#);
    for (e, tri) in mesh.elements().iter().enumerate() {
        let k = (((per_element[e] - lo) / span) * 255.0).round().clamp(0.0, 255.0) as u8;
        let (r, g, b) = colormap(k);
        let pts: Vec<String> = tri
            .iter()
            .map(|&n| {
                let [x, y] = mesh.node(n);
                format!("{:.2},{:.2}", PAD + x * SIZE, PAD + (1.0 - y) * SIZE)
            })
            .collect();
        let _ = writeln!(s, r##"<polygon points="{}" fill="#{r:02x}{g:02x}{b:02x}" stroke="#{r:02x}{g:02x}{b:02x}" stroke-width="0.5"/>"##, pts.join(" "));
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<text x="{PAD}" y="{}" font-family="monospace" font-size="12">{title}  min {lo:e}  max {hi:e}</text>"#,
        SIZE + 2.0 * PAD + 8.0
    );
    let _ = writeln!(s, "</svg>");
    fs::write(path, s).map_err(CliError::io(path.display().to_string()))
}
