//! Minimal SVG line plots rendered straight from CSV text. Rendering is a
//! pure function of the CSV bytes and the requested columns, so replots
//! are byte-identical.

use std::collections::BTreeMap;

use anyhow::{bail, Context, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

pub struct PlotSpec<'a> {
    pub x_col: &'a str,
    pub y_col: &'a str,
    /// Optional column whose distinct values become separate series.
    pub group_col: Option<&'a str>,
    pub log_y: bool,
    pub title: &'a str,
}

/// Render a line plot of `y_col` against `x_col` from CSV text.
///
/// Rows sharing an x value within a series are averaged; series points are
/// sorted by x.
pub fn render_csv(csv: &str, spec: &PlotSpec) -> Result<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines
        .next()
        .context("empty csv")?
        .split(',')
        .collect();
    let col = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| *h == name)
            .with_context(|| format!("column '{name}' not in header {header:?}"))
    };
    let xi = col(spec.x_col)?;
    let yi = col(spec.y_col)?;
    let gi = spec.group_col.map(col).transpose()?;

    let mut series: BTreeMap<String, BTreeMap<String, (f64, usize, f64)>> = BTreeMap::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let x: f64 = fields
            .get(xi)
            .context("short row")?
            .parse()
            .with_context(|| format!("non-numeric x in row '{line}'"))?;
        let y: f64 = match fields.get(yi).context("short row")?.parse() {
            Ok(v) => v,
            Err(_) => continue, // rows without this metric
        };
        let key = gi
            .map(|g| fields.get(g).map(|s| s.to_string()).unwrap_or_default())
            .unwrap_or_default();
        let entry = series
            .entry(key)
            .or_default()
            .entry(format!("{x:024.9}"))
            .or_insert((x, 0, 0.0));
        entry.1 += 1;
        entry.2 += y;
    }
    if series.is_empty() {
        bail!("no plottable rows");
    }

    let mut all_points: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for (name, pts) in series {
        let mut v: Vec<(f64, f64)> = pts
            .into_values()
            .map(|(x, count, sum)| (x, sum / count as f64))
            .collect();
        v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        all_points.push((name, v));
    }

    let transform = |v: f64| if spec.log_y { v.max(1e-12).log10() } else { v };
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, pts) in &all_points {
        for &(x, y) in pts {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            let ty = transform(y);
            y_min = y_min.min(ty);
            y_max = y_max.max(ty);
        }
    }
    if x_max == x_min {
        x_max = x_min + 1.0;
    }
    if y_max == y_min {
        y_max = y_min + 1.0;
    }
    let sx = |x: f64| MARGIN + (x - x_min) / (x_max - x_min) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| {
        HEIGHT - MARGIN - (transform(y) - y_min) / (y_max - y_min) * (HEIGHT - 2.0 * MARGIN)
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        xml_escape(spec.title)
    ));
    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{m:.1}\" y1=\"{b:.1}\" x2=\"{r:.1}\" y2=\"{b:.1}\" stroke=\"black\"/>\n<line x1=\"{m:.1}\" y1=\"{t:.1}\" x2=\"{m:.1}\" y2=\"{b:.1}\" stroke=\"black\"/>\n",
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN
    ));
    for frac in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let xv = x_min + frac * (x_max - x_min);
        let yv = y_min + frac * (y_max - y_min);
        let y_label = if spec.log_y { format!("1e{yv:.2}") } else { format!("{yv:.3}") };
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{xv:.3}</text>\n",
            sx(xv),
            HEIGHT - MARGIN + 18.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{y_label}</text>\n",
            MARGIN - 6.0,
            HEIGHT - MARGIN - frac * (HEIGHT - 2.0 * MARGIN) + 4.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        HEIGHT - 12.0,
        xml_escape(spec.x_col)
    ));

    for (idx, (name, pts)) in all_points.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\" points=\"{}\"/>\n",
            path.join(" ")
        ));
        for &(x, y) in pts {
            svg.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.4\" fill=\"{color}\"/>\n",
                sx(x),
                sy(y)
            ));
        }
        let label = if name.is_empty() {
            spec.y_col.to_string()
        } else {
            format!("{} = {name}", spec.group_col.unwrap_or("group"))
        };
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">{}</text>\n",
            WIDTH - MARGIN - 150.0,
            MARGIN + 16.0 * idx as f64 + 4.0,
            xml_escape(&label)
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_is_pure_in_csv_bytes() {
        let csv = "x,y,g\n1,2.0,a\n2,3.0,a\n1,5.0,b\n2,4.0,b\n";
        let spec = PlotSpec {
            x_col: "x",
            y_col: "y",
            group_col: Some("g"),
            log_y: false,
            title: "test",
        };
        let a = render_csv(csv, &spec).unwrap();
        let b = render_csv(csv, &spec).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("polyline"));
        assert!(render_csv("x,y\n", &spec).is_err());
    }
}
