//! Just enough SVG for box plots, bar charts and scatter plots.

use std::fmt::Write;

pub const WIDTH: f64 = 720.0;
pub const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 90.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

pub fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// A document made of one or more side-by-side panels.
pub struct Document {
    width: f64,
    height: f64,
    body: String,
}

impl Document {
    pub fn new(panels: usize, title: &str, desc: &str) -> Self {
        let width = WIDTH * panels as f64;
        let mut body = String::new();
        let _ = write!(
            body,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{HEIGHT}\" \
             viewBox=\"0 0 {width} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n\
             <title>{}</title>\n<desc>{}</desc>\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
            esc(title),
            esc(desc)
        );
        Self {
            width,
            height: HEIGHT,
            body,
        }
    }

    pub fn finish(mut self) -> String {
        let _ = (self.width, self.height);
        self.body.push_str("</svg>\n");
        self.body
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        let _ = writeln!(
            self.body,
            "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"{stroke}\" stroke-width=\"{width}\"/>"
        );
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, opacity: f64) {
        let _ = writeln!(
            self.body,
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{fill}\" fill-opacity=\"{opacity}\" stroke=\"{fill}\"/>",
            w.max(0.5),
            h.max(0.5)
        );
    }

    fn circle(&mut self, x: f64, y: f64, r: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"{r}\" fill=\"{fill}\" fill-opacity=\"0.8\"/>"
        );
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, rotate: Option<f64>, s: &str) {
        let transform = rotate
            .map(|a| format!(" transform=\"rotate({a} {x:.2} {y:.2})\""))
            .unwrap_or_default();
        let _ = writeln!(
            self.body,
            "<text x=\"{x:.2}\" y=\"{y:.2}\" text-anchor=\"{anchor}\"{transform}>{}</text>",
            esc(s)
        );
    }
}

/// Linear or log10 value axis.
#[derive(Debug, Clone, Copy)]
pub struct Scale {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Scale {
    /// Fit a scale to the data; switches to log10 when positive data span
    /// more than two decades.
    pub fn fit(values: impl IntoIterator<Item = f64>, zero_based: bool) -> Self {
        let v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return Self {
                lo: 0.0,
                hi: 1.0,
                log: false,
            };
        }
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if min > 0.0 && max / min > 100.0 {
            return Self {
                lo: min.log10().floor(),
                hi: max.log10().ceil(),
                log: true,
            };
        }
        let lo = if zero_based { min.min(0.0) } else { min };
        let span = (max - lo).max(max.abs() * 1e-9).max(1e-12);
        Self {
            lo: if zero_based { lo } else { lo - 0.05 * span },
            hi: max + 0.05 * span,
            log: false,
        }
    }

    fn unit(&self, v: f64) -> f64 {
        let v = if self.log { v.max(1e-300).log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            return (self.lo as i32..=self.hi as i32)
                .map(|e| (10f64.powi(e), format!("1e{e}")))
                .collect();
        }
        let raw = (self.hi - self.lo) / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| *s >= raw)
            .unwrap_or(10.0 * mag);
        let mut t = (self.lo / step).ceil() * step;
        let mut out = Vec::new();
        while t <= self.hi + 1e-9 * step {
            out.push((t, format_tick(t)));
            t += step;
        }
        out
    }
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// One plotting area inside a document.
pub struct Panel<'a> {
    doc: &'a mut Document,
    x0: f64,
    y: Scale,
    x: Scale,
}

impl<'a> Panel<'a> {
    pub fn new(
        doc: &'a mut Document,
        index: usize,
        title: &str,
        x: Scale,
        y: Scale,
        x_label: &str,
        y_label: &str,
    ) -> Self {
        let x0 = WIDTH * index as f64;
        let mut p = Self { doc, x0, y, x };
        p.frame(title, x_label, y_label);
        p
    }

    fn left(&self) -> f64 {
        self.x0 + MARGIN_L
    }
    fn right(&self) -> f64 {
        self.x0 + WIDTH - MARGIN_R
    }
    fn top(&self) -> f64 {
        MARGIN_T
    }
    fn bottom(&self) -> f64 {
        HEIGHT - MARGIN_B
    }

    pub fn px(&self, v: f64) -> f64 {
        self.left() + self.x.unit(v) * (self.right() - self.left())
    }

    pub fn py(&self, v: f64) -> f64 {
        self.bottom() - self.y.unit(v) * (self.bottom() - self.top())
    }

    fn frame(&mut self, title: &str, x_label: &str, y_label: &str) {
        let (l, r, t, b) = (self.left(), self.right(), self.top(), self.bottom());
        self.doc.text((l + r) / 2.0, 22.0, "middle", None, title);
        self.doc.line(l, b, r, b, "black", 1.0);
        self.doc.line(l, t, l, b, "black", 1.0);
        for (v, label) in self.y.ticks() {
            let y = self.py(v);
            self.doc.line(l - 4.0, y, r, y, "#dddddd", 0.5);
            self.doc.text(l - 6.0, y + 4.0, "end", None, &label);
        }
        self.doc.text(
            self.x0 + 16.0,
            (t + b) / 2.0,
            "middle",
            Some(-90.0),
            y_label,
        );
        self.doc
            .text((l + r) / 2.0, HEIGHT - 10.0, "middle", None, x_label);
    }

    pub fn numeric_x_ticks(&mut self) {
        for (v, label) in self.x.ticks() {
            let x = self.px(v);
            let b = self.bottom();
            self.doc.line(x, b, x, b + 4.0, "black", 1.0);
            self.doc.text(x, b + 16.0, "middle", None, &label);
        }
    }

    /// Category slot centre for `i` of `n`.
    pub fn slot(&self, i: usize, n: usize) -> (f64, f64) {
        let w = (self.right() - self.left()) / n.max(1) as f64;
        (self.left() + w * (i as f64 + 0.5), w)
    }

    pub fn category_label(&mut self, i: usize, n: usize, label: &str) {
        let (cx, _) = self.slot(i, n);
        let b = self.bottom();
        self.doc.text(cx, b + 14.0, "end", Some(-30.0), label);
    }

    /// Box from q1 to q3, median bar, whiskers to min / max.
    pub fn boxplot(&mut self, cx: f64, width: f64, values: &[f64], fill: &str) {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return;
        }
        v.sort_by(f64::total_cmp);
        let q = |p| sewerbench::stats::quantile_sorted(&v, p);
        let (lo, q1, med, q3, hi) = (v[0], q(0.25), q(0.5), q(0.75), v[v.len() - 1]);
        let half = width / 2.0;
        let (ylo, yq1, ymed, yq3, yhi) = (
            self.py(lo),
            self.py(q1),
            self.py(med),
            self.py(q3),
            self.py(hi),
        );
        self.doc.line(cx, yhi, cx, yq3, "black", 1.0);
        self.doc.line(cx, yq1, cx, ylo, "black", 1.0);
        self.doc
            .line(cx - half / 2.0, yhi, cx + half / 2.0, yhi, "black", 1.0);
        self.doc
            .line(cx - half / 2.0, ylo, cx + half / 2.0, ylo, "black", 1.0);
        self.doc.rect(cx - half, yq3, width, yq1 - yq3, fill, 0.35);
        self.doc
            .line(cx - half, ymed, cx + half, ymed, "black", 2.0);
    }

    pub fn bar(&mut self, cx: f64, width: f64, value: f64, err: Option<(f64, f64)>, fill: &str) {
        let base = if self.y.log {
            10f64.powf(self.y.lo)
        } else {
            0.0f64.max(self.y.lo)
        };
        let (y0, y1) = (self.py(base), self.py(value));
        self.doc.rect(
            cx - width / 2.0,
            y1.min(y0),
            width,
            (y0 - y1).abs(),
            fill,
            0.7,
        );
        if let Some((lo, hi)) = err {
            let (a, b) = (self.py(lo), self.py(hi));
            self.doc.line(cx, a, cx, b, "black", 1.0);
            self.doc.line(cx - 4.0, a, cx + 4.0, a, "black", 1.0);
            self.doc.line(cx - 4.0, b, cx + 4.0, b, "black", 1.0);
        }
    }

    pub fn point(&mut self, x: f64, y: f64, fill: &str, label: Option<&str>) {
        let (px, py) = (self.px(x), self.py(y));
        self.doc.circle(px, py, 5.0, fill);
        if let Some(l) = label {
            self.doc.text(px + 7.0, py - 6.0, "start", None, l);
        }
    }

    pub fn legend(&mut self, entries: &[(&str, &str)]) {
        let x = self.right() - 150.0;
        for (i, (label, fill)) in entries.iter().enumerate() {
            let y = self.top() + 8.0 + 16.0 * i as f64;
            self.doc.rect(x, y - 9.0, 10.0, 10.0, fill, 0.7);
            self.doc.text(x + 14.0, y, "start", None, label);
        }
    }
}
