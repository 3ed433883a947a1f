//! Tab-separated tables and self-contained SVG figures.

use std::collections::BTreeMap;
use std::fmt::Write;

use flowloc_core::eval::{BoxStats, ComparisonRow, ConfusionMatrix, MetricsReport, Prediction};
use flowloc_core::vasculature::VascularGraph;

/// Region names by id, for axis labels.
pub fn region_names(g: &VascularGraph) -> BTreeMap<u32, String> {
    g.nodes().iter().map(|n| (n.id, n.name.clone())).collect()
}

fn name(names: &BTreeMap<u32, String>, id: u32) -> String {
    names.get(&id).cloned().unwrap_or_else(|| id.to_string())
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn accuracy_tsv(r: &MetricsReport) -> String {
    format!(
        "design\tprofile\tpredictions\tregion_accuracy\tmedian_point_error_cm\tpoint_estimate\n{}\t{}\t{}\t{}\t{}\t{}\n",
        r.design,
        r.profile,
        r.predictions,
        r.region_accuracy,
        r.overall.median,
        serde_json::to_value(r.point_estimate).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
    )
}

pub fn point_error_tsv(r: &MetricsReport, names: &BTreeMap<u32, String>) -> String {
    let mut s = String::from("region_id\tregion\tn\tmin\tq1\tmedian\tq3\tmax\n");
    let mut row = |id: String, label: String, b: &BoxStats| {
        let _ = writeln!(s, "{id}\t{label}\t{}\t{}\t{}\t{}\t{}\t{}", b.n, b.min, b.q1, b.median, b.q3, b.max);
    };
    for (&id, b) in &r.per_region {
        row(id.to_string(), name(names, id), b);
    }
    row("all".into(), "all".into(), &r.overall);
    s
}

pub fn confusion_tsv(c: &ConfusionMatrix, names: &BTreeMap<u32, String>) -> String {
    let mut s = String::from("truth\\predicted");
    for &l in &c.labels {
        s += "\t";
        s += &name(names, l);
    }
    s.push('\n');
    for (i, &l) in c.labels.iter().enumerate() {
        s += &name(names, l);
        for v in &c.counts[i] {
            let _ = write!(s, "\t{v}");
        }
        s.push('\n');
    }
    s
}

pub fn predictions_tsv(preds: &[Prediction]) -> String {
    let mut s = String::from("dataset\tprofile\tdesign\ttruth_region\tpredicted_region\tcorrect\ttruth_x\ttruth_y\ttruth_z\n");
    for p in preds {
        let l = &p.truth_location;
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            p.dataset.label(),
            p.profile,
            p.design,
            p.truth_region,
            p.predicted_region,
            p.is_correct(),
            l.x,
            l.y,
            l.z
        );
    }
    s
}

pub fn comparison_tsv(rows: &[ComparisonRow], baseline: &str, design: &str) -> String {
    let mut s = format!(
        "profile\t{baseline}_accuracy\t{design}_accuracy\t{baseline}_median_error_cm\t{design}_median_error_cm\t{design}_at_least_{baseline}\n"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.profile,
            r.baseline_accuracy,
            r.design_accuracy,
            r.baseline_median_error,
            r.design_median_error,
            r.design_at_least_baseline()
        );
    }
    s
}

/// Plain-text comparison table for terminals.
pub fn comparison_text(rows: &[ComparisonRow], baseline: &str, design: &str) -> String {
    let mut s = format!("{:<10} {:>10} {:>10} {:>12} {:>12}\n", "profile", baseline, design, "err base", "err design");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<10} {:>10.4} {:>10.4} {:>12.2} {:>12.2}",
            r.profile, r.baseline_accuracy, r.design_accuracy, r.baseline_median_error, r.design_median_error
        );
    }
    s
}

fn svg_open(w: f64, h: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

/// One box per truth region, point error in cm.
pub fn box_plot_svg(title: &str, per_region: &BTreeMap<u32, BoxStats>, names: &BTreeMap<u32, String>) -> String {
    let (left, top, bottom, step) = (60.0, 30.0, 110.0, 26.0);
    let plot_h = 300.0;
    let w = left + step * per_region.len().max(1) as f64 + 20.0;
    let h = top + plot_h + bottom;
    let ymax = per_region.values().map(|b| b.max).fold(1.0f64, f64::max) * 1.05;
    let y = |v: f64| top + plot_h - v / ymax * plot_h;
    let mut s = svg_open(w, h);
    let _ = writeln!(s, "<text x=\"{}\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">{}</text>", w / 2.0, esc(title));
    let _ = writeln!(s, "<line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{}\" stroke=\"black\"/>", top + plot_h);
    for k in 0..=4 {
        let v = ymax * k as f64 / 4.0;
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{v:.0}</text><line x1=\"{left}\" y1=\"{:.1}\" x2=\"{}\" y2=\"{:.1}\" stroke=\"#ddd\"/>",
            left - 4.0,
            y(v) + 4.0,
            y(v),
            w - 20.0,
            y(v)
        );
    }
    let _ = writeln!(s, "<text x=\"14\" y=\"{}\" transform=\"rotate(-90 14 {})\" text-anchor=\"middle\">point error (cm)</text>", top + plot_h / 2.0, top + plot_h / 2.0);
    for (i, (&id, b)) in per_region.iter().enumerate() {
        let cx = left + step * (i as f64 + 0.5);
        let hw = step * 0.3;
        let _ = writeln!(
            s,
            "<line x1=\"{cx:.1}\" y1=\"{:.1}\" x2=\"{cx:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"#8fb8de\" stroke=\"black\"/>\n<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\" stroke-width=\"2\"/>",
            y(b.min),
            y(b.max),
            cx - hw,
            y(b.q3),
            2.0 * hw,
            (y(b.q1) - y(b.q3)).max(0.5),
            cx - hw,
            y(b.median),
            cx + hw,
            y(b.median)
        );
        let ly = top + plot_h + 8.0;
        let _ = writeln!(s, "<text x=\"{cx:.1}\" y=\"{ly}\" transform=\"rotate(60 {cx:.1} {ly})\">{}</text>", esc(&name(names, id)));
    }
    s += "</svg>\n";
    s
}

/// Heat map of counts; rows truth, columns prediction.
pub fn confusion_svg(title: &str, c: &ConfusionMatrix, names: &BTreeMap<u32, String>) -> String {
    let n = c.labels.len();
    let (margin, cell) = (110.0, 16.0);
    let size = margin + cell * n as f64 + 10.0;
    let max = c.counts.iter().flatten().copied().max().unwrap_or(0).max(1) as f64;
    let mut s = svg_open(size, size + 20.0);
    let _ = writeln!(s, "<text x=\"{}\" y=\"16\" text-anchor=\"middle\" font-size=\"13\">{}</text>", size / 2.0, esc(title));
    let top = margin + 20.0;
    for (i, &l) in c.labels.iter().enumerate() {
        let label = esc(&name(names, l));
        let yy = top + cell * i as f64 + cell * 0.75;
        let xx = margin + cell * i as f64 + cell * 0.5;
        let _ = writeln!(s, "<text x=\"{}\" y=\"{yy:.1}\" text-anchor=\"end\" font-size=\"9\">{label}</text>", margin - 4.0);
        let _ = writeln!(s, "<text x=\"{xx:.1}\" y=\"{}\" transform=\"rotate(-60 {xx:.1} {})\" font-size=\"9\">{label}</text>", top - 4.0, top - 4.0);
        for (j, &v) in c.counts[i].iter().enumerate() {
            let shade = 255.0 - 200.0 * v as f64 / max;
            let _ = writeln!(
                s,
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{cell}\" height=\"{cell}\" fill=\"rgb({:.0},{:.0},255)\" stroke=\"#eee\"><title>{v}</title></rect>",
                margin + cell * j as f64,
                top + cell * i as f64,
                shade,
                shade
            );
        }
    }
    s += "</svg>\n";
    s
}

/// Grouped bars of region accuracy per profile.
pub fn comparison_svg(title: &str, rows: &[ComparisonRow], baseline: &str, design: &str) -> String {
    let (left, top, plot_h, group) = (50.0, 40.0, 240.0, 60.0);
    let w = left + group * rows.len().max(1) as f64 + 20.0;
    let h = top + plot_h + 50.0;
    let ymax = rows.iter().map(|r| r.baseline_accuracy.max(r.design_accuracy)).fold(0.1f64, f64::max) * 1.1;
    let y = |v: f64| top + plot_h - v / ymax * plot_h;
    let mut s = svg_open(w, h);
    let _ = writeln!(s, "<text x=\"{}\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">{}</text>", w / 2.0, esc(title));
    let _ = writeln!(
        s,
        "<rect x=\"{left}\" y=\"24\" width=\"10\" height=\"10\" fill=\"#bbbbbb\"/><text x=\"{}\" y=\"33\">{}</text><rect x=\"{}\" y=\"24\" width=\"10\" height=\"10\" fill=\"#3b75af\"/><text x=\"{}\" y=\"33\">{}</text>",
        left + 14.0,
        esc(baseline),
        left + 90.0,
        left + 104.0,
        esc(design)
    );
    let _ = writeln!(s, "<line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{}\" stroke=\"black\"/>", top + plot_h);
    for k in 0..=4 {
        let v = ymax * k as f64 / 4.0;
        let _ = writeln!(s, "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{v:.2}</text>", left - 4.0, y(v) + 4.0);
    }
    for (i, r) in rows.iter().enumerate() {
        let x0 = left + group * i as f64 + 10.0;
        for (k, (v, fill)) in [(r.baseline_accuracy, "#bbbbbb"), (r.design_accuracy, "#3b75af")].into_iter().enumerate() {
            let _ = writeln!(
                s,
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"18\" height=\"{:.1}\" fill=\"{fill}\"><title>{v}</title></rect>",
                x0 + 20.0 * k as f64,
                y(v),
                top + plot_h - y(v)
            );
        }
        let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\">{}</text>", x0 + 19.0, top + plot_h + 16.0, esc(&r.profile));
    }
    s += "</svg>\n";
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svgs_are_well_formed_enough() {
        let names = BTreeMap::from([(1, "a<b".to_string())]);
        let b = BoxStats { n: 3, min: 0.0, q1: 1.0, median: 2.0, q3: 3.0, max: 4.0 };
        let svg = box_plot_svg("t", &BTreeMap::from([(1, b)]), &names);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a&lt;b"));
        let c = ConfusionMatrix { labels: vec![1, 2], counts: vec![vec![2, 0], vec![1, 1]] };
        let svg = confusion_svg("c", &c, &names);
        assert_eq!(svg.matches("<rect x=").count(), 4);
        let tsv = confusion_tsv(&c, &names);
        assert_eq!(tsv.lines().nth(2).unwrap(), "2\t1\t1");
    }
}
