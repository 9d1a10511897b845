//! Static SVG charts built from the CSV sidecars the pipeline writes.

use crate::rng::derive_seed;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Elbow,
    ClusterScatter,
    ImportanceBars,
    ShapRankDots,
    ShapDependence,
}

impl PlotKind {
    pub const ALL: [PlotKind; 5] =
        [PlotKind::Elbow, PlotKind::ClusterScatter, PlotKind::ImportanceBars, PlotKind::ShapRankDots, PlotKind::ShapDependence];

    pub fn name(self) -> &'static str {
        match self {
            PlotKind::Elbow => "elbow",
            PlotKind::ClusterScatter => "cluster_scatter",
            PlotKind::ImportanceBars => "importance_bars",
            PlotKind::ShapRankDots => "shap_rank_dots",
            PlotKind::ShapDependence => "shap_dependence",
        }
    }
}

impl FromStr for PlotKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PlotKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<&str> = PlotKind::ALL.iter().map(|k| k.name()).collect();
            format!("unknown plot kind `{s}` (expected one of {})", names.join(", "))
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PlotError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("column `{0}` missing from input")]
    MissingColumn(String),
    #[error("line {line}: bad value `{value}` in column `{column}`")]
    BadValue { line: u64, column: String, value: String },
    #[error("no data rows")]
    Empty,
    #[error("cannot write {path}: {source}")]
    Write {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankPanel {
    pub class: String,
    /// Features by descending mean |attribution|.
    pub features: Vec<String>,
    /// Per feature: (attribution, feature value scaled to [0, 1]).
    pub dots: Vec<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DependencePanel {
    pub feature: String,
    pub class: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlotData {
    Elbow { points: Vec<(usize, f64)>, chosen_k: Option<usize> },
    ClusterScatter { groups: Vec<String>, points: Vec<(f64, f64, usize)>, centroids: Vec<(f64, f64)> },
    ImportanceBars { features: Vec<String>, mda: Vec<f64>, mda_sd: Vec<f64>, mdg: Vec<f64> },
    ShapRankDots { panels: Vec<RankPanel> },
    ShapDependence { panels: Vec<DependencePanel> },
}

/// Dependence panels default to this many features, ranked by mean |attribution|.
pub const DEPENDENCE_TOP: usize = 4;
/// Rows drawn per feature in the rank-dot chart.
const MAX_DOTS: usize = 400;

struct Table {
    index: BTreeMap<String, usize>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    fn read<R: Read>(r: R) -> Result<Self, PlotError> {
        let mut rdr = csv::Reader::from_reader(r);
        let index = rdr.headers()?.iter().enumerate().map(|(i, h)| (h.to_string(), i)).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            rows.push((rec.position().map_or(0, |p| p.line()), rec));
        }
        if rows.is_empty() {
            return Err(PlotError::Empty);
        }
        Ok(Self { index, rows })
    }

    fn col(&self, name: &str) -> Result<usize, PlotError> {
        self.index.get(name).copied().ok_or_else(|| PlotError::MissingColumn(name.into()))
    }

    fn num<T: FromStr>(&self, row: usize, col: usize, name: &str) -> Result<T, PlotError> {
        let (line, rec) = &self.rows[row];
        let v = &rec[col];
        v.parse().map_err(|_| PlotError::BadValue { line: *line, column: name.into(), value: v.into() })
    }

    fn str(&self, row: usize, col: usize) -> &str {
        &self.rows[row].1[col]
    }
}

struct LongRow {
    row: String,
    feature: String,
    class: String,
    value: f64,
    shap: f64,
}

fn read_long<R: Read>(r: R) -> Result<Vec<LongRow>, PlotError> {
    let t = Table::read(r)?;
    let (ri, fi, ci, vi, si) = (t.col("row")?, t.col("feature")?, t.col("class")?, t.col("value")?, t.col("shap")?);
    (0..t.rows.len())
        .map(|i| {
            Ok(LongRow {
                row: t.str(i, ri).to_string(),
                feature: t.str(i, fi).to_string(),
                class: t.str(i, ci).to_string(),
                value: t.num(i, vi, "value")?,
                shap: t.num(i, si, "shap")?,
            })
        })
        .collect()
}

/// Distinct values in order of first appearance.
fn first_seen<'a>(it: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for s in it {
        if !out.iter().any(|o| o == s) {
            out.push(s.to_string());
        }
    }
    out
}

/// Mean |attribution| per feature, summed in sorted order.
fn mean_abs(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().map(|x| x.abs()).collect();
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

fn order_by_importance(features: &[String], score: impl Fn(&str) -> f64) -> Vec<String> {
    let scores: Vec<f64> = features.iter().map(|f| score(f)).collect();
    let mut idx: Vec<usize> = (0..features.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.into_iter().map(|i| features[i].clone()).collect()
}

impl PlotData {
    pub fn kind(&self) -> PlotKind {
        match self {
            PlotData::Elbow { .. } => PlotKind::Elbow,
            PlotData::ClusterScatter { .. } => PlotKind::ClusterScatter,
            PlotData::ImportanceBars { .. } => PlotKind::ImportanceBars,
            PlotData::ShapRankDots { .. } => PlotKind::ShapRankDots,
            PlotData::ShapDependence { .. } => PlotKind::ShapDependence,
        }
    }

    /// Reads the CSV layout each kind expects:
    /// elbow `k,sse[,chosen]`; cluster_scatter `positive_rate,death_rate,label`
    /// (rows grouped by label in order of appearance); importance_bars
    /// `feature,mda_mean,mda_sd,mdg`; the SHAP kinds read the long format
    /// `row,feature,class,value,shap`. `features` restricts dependence panels.
    pub fn from_csv<R: Read>(kind: PlotKind, r: R, features: Option<&[String]>) -> Result<Self, PlotError> {
        match kind {
            PlotKind::Elbow => {
                let t = Table::read(r)?;
                let (k, sse) = (t.col("k")?, t.col("sse")?);
                let chosen = t.col("chosen").ok();
                let mut points = Vec::new();
                let mut chosen_k = None;
                for i in 0..t.rows.len() {
                    let kv: usize = t.num(i, k, "k")?;
                    points.push((kv, t.num(i, sse, "sse")?));
                    if chosen.is_some_and(|c| matches!(t.str(i, c), "1" | "true")) {
                        chosen_k = Some(kv);
                    }
                }
                Ok(PlotData::Elbow { points, chosen_k })
            }
            PlotKind::ClusterScatter => {
                let t = Table::read(r)?;
                let (x, y, l) = (t.col("positive_rate")?, t.col("death_rate")?, t.col("label")?);
                let groups = first_seen((0..t.rows.len()).map(|i| t.str(i, l)));
                let mut sums = vec![(0.0, 0.0, 0usize); groups.len()];
                let mut points = Vec::with_capacity(t.rows.len());
                for i in 0..t.rows.len() {
                    let g = groups.iter().position(|s| s == t.str(i, l)).expect("label was collected");
                    let (px, py): (f64, f64) = (t.num(i, x, "positive_rate")?, t.num(i, y, "death_rate")?);
                    sums[g].0 += px;
                    sums[g].1 += py;
                    sums[g].2 += 1;
                    points.push((px, py, g));
                }
                let centroids = sums.iter().map(|&(a, b, n)| (a / n as f64, b / n as f64)).collect();
                Ok(PlotData::ClusterScatter { groups, points, centroids })
            }
            PlotKind::ImportanceBars => {
                let t = Table::read(r)?;
                let (f, m, s, g) = (t.col("feature")?, t.col("mda_mean")?, t.col("mda_sd")?, t.col("mdg")?);
                let n = t.rows.len();
                Ok(PlotData::ImportanceBars {
                    features: (0..n).map(|i| t.str(i, f).to_string()).collect(),
                    mda: (0..n).map(|i| t.num(i, m, "mda_mean")).collect::<Result<_, _>>()?,
                    mda_sd: (0..n).map(|i| t.num(i, s, "mda_sd")).collect::<Result<_, _>>()?,
                    mdg: (0..n).map(|i| t.num(i, g, "mdg")).collect::<Result<_, _>>()?,
                })
            }
            PlotKind::ShapRankDots => {
                let long = read_long(r)?;
                let classes = first_seen(long.iter().map(|l| l.class.as_str()));
                let feats = first_seen(long.iter().map(|l| l.feature.as_str()));
                let rows = first_seen(long.iter().map(|l| l.row.as_str()));
                let keep: Vec<bool> = thin(rows.len());
                let row_pos: BTreeMap<&str, usize> = rows.iter().enumerate().map(|(i, r)| (r.as_str(), i)).collect();
                let mut panels = Vec::new();
                for c in &classes {
                    let mut by_feature: BTreeMap<&str, Vec<&LongRow>> = BTreeMap::new();
                    for l in long.iter().filter(|l| &l.class == c) {
                        by_feature.entry(l.feature.as_str()).or_default().push(l);
                    }
                    let score = |f: &str| by_feature.get(f).map_or(0.0, |v| mean_abs(&v.iter().map(|l| l.shap).collect::<Vec<_>>()));
                    let order = order_by_importance(&feats, score);
                    let dots = order
                        .iter()
                        .map(|f| {
                            let v = by_feature.get(f.as_str()).cloned().unwrap_or_default();
                            let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), l| (a.min(l.value), b.max(l.value)));
                            v.iter()
                                .filter(|l| keep[row_pos[l.row.as_str()]])
                                .map(|l| (l.shap, if hi > lo { (l.value - lo) / (hi - lo) } else { 0.5 }))
                                .collect()
                        })
                        .collect();
                    panels.push(RankPanel { class: c.clone(), features: order, dots });
                }
                Ok(PlotData::ShapRankDots { panels })
            }
            PlotKind::ShapDependence => {
                let long = read_long(r)?;
                let classes = first_seen(long.iter().map(|l| l.class.as_str()));
                let feats = first_seen(long.iter().map(|l| l.feature.as_str()));
                let chosen: Vec<String> = match features {
                    Some(f) => f.to_vec(),
                    None => {
                        let score = |f: &str| mean_abs(&long.iter().filter(|l| l.feature == f).map(|l| l.shap).collect::<Vec<_>>());
                        order_by_importance(&feats, score).into_iter().take(DEPENDENCE_TOP).collect()
                    }
                };
                let mut panels = Vec::new();
                for f in &chosen {
                    for c in &classes {
                        let points = long.iter().filter(|l| &l.feature == f && &l.class == c).map(|l| (l.value, l.shap)).collect();
                        panels.push(DependencePanel { feature: f.clone(), class: c.clone(), points });
                    }
                }
                Ok(PlotData::ShapDependence { panels })
            }
        }
    }
}

/// Evenly spaced subset of at most MAX_DOTS rows.
fn thin(n: usize) -> Vec<bool> {
    let mut keep = vec![false; n];
    if n <= MAX_DOTS {
        keep.iter_mut().for_each(|k| *k = true);
    } else {
        for i in 0..MAX_DOTS {
            keep[i * n / MAX_DOTS] = true;
        }
    }
    keep
}

const PALETTE: [&str; 10] =
    ["#d62728", "#ff7f0e", "#2ca02c", "#1f77b4", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn fmt_num(v: f64, step: f64) -> String {
    let decimals = if step > 0.0 { (-step.log10().floor()).max(0.0) as usize } else { 2 };
    let s = format!("{v:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| matches!(c, '0' | '.')) {
        s[1..].to_string()
    } else {
        s
    }
}

fn nice_step(span: f64, target: usize) -> f64 {
    if !(span > 0.0) || !span.is_finite() {
        return 1.0;
    }
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let m = if f <= 1.0 { 1.0 } else if f <= 2.0 { 2.0 } else if f <= 5.0 { 5.0 } else { 10.0 };
    m * mag
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if hi > lo {
        let pad = (hi - lo) * 0.05;
        (lo - pad, hi + pad)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn extent(v: impl Iterator<Item = f64>) -> (f64, f64) {
    v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)))
}

/// A plotting frame: pixel box plus data ranges.
struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    xr: (f64, f64),
    yr: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.x0 + (x - self.xr.0) / (self.xr.1 - self.xr.0) * self.w
    }

    fn py(&self, y: f64) -> f64 {
        self.y0 + self.h - (y - self.yr.0) / (self.yr.1 - self.yr.0) * self.h
    }
}

struct Svg {
    out: String,
}

impl Svg {
    fn new(w: f64, h: f64, title: &str) -> Self {
        let mut out = String::new();
        let _ = write!(
            out,
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">\n<title>{}</title>\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            esc(title)
        );
        let mut s = Self { out };
        s.text(w / 2.0, 24.0, title, 16.0, "middle", 0.0);
        s
    }

    fn text(&mut self, x: f64, y: f64, s: &str, size: f64, anchor: &str, rotate: f64) {
        let rot = if rotate != 0.0 { format!(" transform=\"rotate({rotate:.0} {x:.2} {y:.2})\"") } else { String::new() };
        let _ = writeln!(
            self.out,
            "<text x=\"{x:.2}\" y=\"{y:.2}\" font-size=\"{size}\" text-anchor=\"{anchor}\"{rot}>{}</text>",
            esc(s)
        );
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        let _ = writeln!(
            self.out,
            "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"{stroke}\" stroke-width=\"{width}\"/>"
        );
    }

    fn circle(&mut self, cx: f64, cy: f64, r: f64, fill: &str, extra: &str) {
        let _ = writeln!(self.out, "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"{r}\" fill=\"{fill}\"{extra}/>");
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(
            self.out,
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{fill}\"/>",
            w.max(0.0),
            h.max(0.0)
        );
    }

    fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str) {
        let p: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(self.out, "<polyline points=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"2\"/>", p.join(" "));
    }

    fn axes(&mut self, f: &Frame, x_label: &str, y_label: &str) {
        self.line(f.x0, f.y0 + f.h, f.x0 + f.w, f.y0 + f.h, "black", 1.0);
        self.line(f.x0, f.y0, f.x0, f.y0 + f.h, "black", 1.0);
        let xs = nice_step(f.xr.1 - f.xr.0, 6);
        let mut t = (f.xr.0 / xs).ceil() * xs;
        while t <= f.xr.1 + xs * 1e-9 {
            let x = f.px(t);
            self.line(x, f.y0 + f.h, x, f.y0 + f.h + 4.0, "black", 1.0);
            self.text(x, f.y0 + f.h + 16.0, &fmt_num(t, xs), 10.0, "middle", 0.0);
            t += xs;
        }
        let ys = nice_step(f.yr.1 - f.yr.0, 5);
        let mut t = (f.yr.0 / ys).ceil() * ys;
        while t <= f.yr.1 + ys * 1e-9 {
            let y = f.py(t);
            self.line(f.x0 - 4.0, y, f.x0, y, "black", 1.0);
            self.text(f.x0 - 6.0, y + 3.0, &fmt_num(t, ys), 10.0, "end", 0.0);
            t += ys;
        }
        self.text(f.x0 + f.w / 2.0, f.y0 + f.h + 34.0, x_label, 12.0, "middle", 0.0);
        self.text(f.x0 - 48.0, f.y0 + f.h / 2.0, y_label, 12.0, "middle", -90.0);
    }

    fn legend(&mut self, x: f64, y: f64, items: &[(String, String)]) {
        for (i, (label, color)) in items.iter().enumerate() {
            let yy = y + i as f64 * 16.0;
            self.rect(x, yy - 9.0, 10.0, 10.0, color);
            self.text(x + 14.0, yy, label, 11.0, "start", 0.0);
        }
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

/// Blue (low) to red (high).
fn gradient(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(30.0, 220.0), lerp(100.0, 40.0), lerp(220.0, 60.0))
}

fn elbow_svg(points: &[(usize, f64)], chosen: Option<usize>) -> String {
    let mut s = Svg::new(640.0, 440.0, "Elbow method");
    let xr = padded(extent(points.iter().map(|p| p.0 as f64)).0, extent(points.iter().map(|p| p.0 as f64)).1);
    let yr = padded(extent(points.iter().map(|p| p.1)).0, extent(points.iter().map(|p| p.1)).1);
    let f = Frame { x0: 80.0, y0: 50.0, w: 520.0, h: 320.0, xr, yr };
    s.axes(&f, "number of clusters k", "within-cluster sum of squares");
    let pts: Vec<(f64, f64)> = points.iter().map(|&(k, e)| (f.px(k as f64), f.py(e))).collect();
    s.polyline(&pts, PALETTE[3]);
    for (&(k, _), &(x, y)) in points.iter().zip(&pts) {
        if Some(k) == chosen {
            s.circle(x, y, 7.0, PALETTE[0], " class=\"chosen\" stroke=\"black\"");
        } else {
            s.circle(x, y, 4.0, PALETTE[3], " class=\"point\"");
        }
    }
    let mut items = vec![("SSE".to_string(), PALETTE[3].to_string())];
    if let Some(k) = chosen {
        items.push((format!("chosen k = {k}"), PALETTE[0].to_string()));
    }
    s.legend(480.0, 60.0, &items);
    s.finish()
}

fn scatter_svg(groups: &[String], points: &[(f64, f64, usize)], centroids: &[(f64, f64)]) -> String {
    let mut s = Svg::new(680.0, 460.0, "Counties by risk cluster");
    let (xl, xh) = extent(points.iter().map(|p| p.0));
    let (yl, yh) = extent(points.iter().map(|p| p.1));
    let f = Frame { x0: 90.0, y0: 50.0, w: 460.0, h: 330.0, xr: padded(xl, xh), yr: padded(yl, yh) };
    s.axes(&f, "positive rate", "death rate");
    for &(x, y, g) in points {
        s.circle(f.px(x), f.py(y), 2.5, PALETTE[g % PALETTE.len()], " fill-opacity=\"0.6\" class=\"point\"");
    }
    for (g, &(x, y)) in centroids.iter().enumerate() {
        let (cx, cy) = (f.px(x), f.py(y));
        s.line(cx - 7.0, cy - 7.0, cx + 7.0, cy + 7.0, "black", 3.0);
        s.line(cx - 7.0, cy + 7.0, cx + 7.0, cy - 7.0, "black", 3.0);
        s.circle(cx, cy, 3.0, PALETTE[g % PALETTE.len()], " class=\"centroid\"");
    }
    let mut items: Vec<(String, String)> =
        groups.iter().enumerate().map(|(g, n)| (n.clone(), PALETTE[g % PALETTE.len()].to_string())).collect();
    items.push(("× centroid".into(), "black".into()));
    s.legend(565.0, 70.0, &items);
    s.finish()
}

fn bars_panel(s: &mut Svg, x0: f64, title: &str, features: &[String], values: &[f64], err: Option<&[f64]>, color: &str) {
    let mut order: Vec<usize> = (0..features.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let hi = values.iter().enumerate().map(|(i, v)| v + err.map_or(0.0, |e| e[i])).fold(0.0, f64::max);
    let lo = values.iter().copied().fold(0.0, f64::min);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let (y0, row, w, label_w) = (60.0, 22.0, 200.0, 120.0);
    let px = |v: f64| x0 + label_w + (v - lo) / span * w;
    s.text(x0 + label_w + w / 2.0, y0 - 12.0, title, 13.0, "middle", 0.0);
    for (r, &j) in order.iter().enumerate() {
        let y = y0 + r as f64 * row;
        s.text(x0 + label_w - 6.0, y + 14.0, &features[j], 11.0, "end", 0.0);
        let (a, b) = (px(0.0), px(values[j]));
        s.rect(a.min(b), y + 4.0, (b - a).abs(), row - 8.0, color);
        if let Some(e) = err {
            let (l, h) = (px(values[j] - e[j]), px(values[j] + e[j]));
            s.line(l, y + row / 2.0, h, y + row / 2.0, "black", 1.0);
        }
    }
    let bottom = y0 + features.len() as f64 * row + 4.0;
    s.line(px(0.0), y0, px(0.0), bottom, "black", 1.0);
    s.line(x0 + label_w, bottom, x0 + label_w + w, bottom, "black", 1.0);
    let step = nice_step(span, 4);
    s.text(x0 + label_w, bottom + 14.0, &fmt_num(lo, step), 10.0, "middle", 0.0);
    s.text(x0 + label_w + w, bottom + 14.0, &fmt_num(hi.max(lo + span), step), 10.0, "middle", 0.0);
}

fn bars_svg(features: &[String], mda: &[f64], mda_sd: &[f64], mdg: &[f64]) -> String {
    let h = 120.0 + features.len() as f64 * 22.0;
    let mut s = Svg::new(720.0, h, "Feature importance");
    bars_panel(&mut s, 10.0, "Mean decrease accuracy", features, mda, Some(mda_sd), PALETTE[3]);
    bars_panel(&mut s, 370.0, "Mean decrease Gini", features, mdg, None, PALETTE[1]);
    s.legend(20.0, h - 24.0, &[("bar: mean, whisker: ±1 sd over repetitions".into(), PALETTE[3].into())]);
    s.finish()
}

fn rank_dots_svg(panels: &[RankPanel]) -> String {
    let nf = panels.iter().map(|p| p.features.len()).max().unwrap_or(0);
    let (pw, row) = (420.0, 26.0);
    let h = 130.0 + nf as f64 * row;
    let mut s = Svg::new(40.0 + pw * panels.len() as f64, h, "SHAP values by class");
    for (pi, p) in panels.iter().enumerate() {
        let (lo, hi) = extent(p.dots.iter().flatten().map(|d| d.0));
        let m = lo.abs().max(hi.abs()).max(1e-12);
        let f = Frame { x0: 20.0 + pi as f64 * pw + 140.0, y0: 60.0, w: pw - 170.0, h: nf as f64 * row, xr: (-m * 1.05, m * 1.05), yr: (0.0, nf as f64) };
        s.text(f.x0 + f.w / 2.0, 48.0, &format!("class {}", p.class), 13.0, "middle", 0.0);
        s.line(f.px(0.0), f.y0, f.px(0.0), f.y0 + f.h, "#999999", 1.0);
        for (r, (name, dots)) in p.features.iter().zip(&p.dots).enumerate() {
            let yc = f.y0 + (r as f64 + 0.5) * row;
            s.text(f.x0 - 8.0, yc + 4.0, name, 11.0, "end", 0.0);
            for (i, &(v, t)) in dots.iter().enumerate() {
                let jitter = (derive_seed(r as u64, pi as u64, i as u64) % 1000) as f64 / 1000.0 - 0.5;
                s.circle(f.px(v), yc + jitter * row * 0.6, 1.8, &gradient(t), "");
            }
        }
        let step = nice_step(2.0 * m, 4);
        let bottom = f.y0 + f.h;
        s.line(f.x0, bottom, f.x0 + f.w, bottom, "black", 1.0);
        for t in [-m, 0.0, m] {
            s.text(f.px(t), bottom + 14.0, &fmt_num(t, step), 10.0, "middle", 0.0);
        }
        s.text(f.x0 + f.w / 2.0, bottom + 32.0, "SHAP value (probability)", 11.0, "middle", 0.0);
    }
    s.legend(20.0, h - 30.0, &[("low feature value".into(), gradient(0.0)), ("high feature value".into(), gradient(1.0))]);
    s.finish()
}

fn dependence_svg(panels: &[DependencePanel]) -> String {
    let cols = panels.iter().map(|p| p.class.as_str()).collect::<std::collections::BTreeSet<_>>().len().max(1);
    let rows = panels.len().div_ceil(cols);
    let (pw, ph) = (300.0, 240.0);
    let mut s = Svg::new(pw * cols as f64 + 20.0, ph * rows as f64 + 50.0, "SHAP dependence");
    for (i, p) in panels.iter().enumerate() {
        let (r, c) = (i / cols, i % cols);
        let (xl, xh) = extent(p.points.iter().map(|q| q.0));
        let (yl, yh) = extent(p.points.iter().map(|q| q.1));
        let f = Frame {
            x0: 20.0 + c as f64 * pw + 60.0,
            y0: 50.0 + r as f64 * ph + 20.0,
            w: pw - 90.0,
            h: ph - 80.0,
            xr: padded(xl, xh),
            yr: padded(yl.min(0.0), yh.max(0.0)),
        };
        s.text(f.x0 + f.w / 2.0, f.y0 - 6.0, &format!("{} / class {}", p.feature, p.class), 12.0, "middle", 0.0);
        s.axes(&f, &p.feature, "SHAP value");
        s.line(f.x0, f.py(0.0), f.x0 + f.w, f.py(0.0), "#bbbbbb", 1.0);
        for &(x, y) in &p.points {
            s.circle(f.px(x), f.py(y), 1.8, PALETTE[c % PALETTE.len()], " fill-opacity=\"0.5\"");
        }
    }
    s.finish()
}

pub fn render_svg(data: &PlotData) -> String {
    match data {
        PlotData::Elbow { points, chosen_k } => elbow_svg(points, *chosen_k),
        PlotData::ClusterScatter { groups, points, centroids } => scatter_svg(groups, points, centroids),
        PlotData::ImportanceBars { features, mda, mda_sd, mdg } => bars_svg(features, mda, mda_sd, mdg),
        PlotData::ShapRankDots { panels } => rank_dots_svg(panels),
        PlotData::ShapDependence { panels } => dependence_svg(panels),
    }
}

/// Renders `data` and writes it to `path` via a `.partial` file.
pub fn render_plot(data: &PlotData, path: &Path) -> Result<(), PlotError> {
    super::report::write_atomic(path, render_svg(data).as_bytes()).map_err(|source| PlotError::Write { path: path.to_path_buf(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elbow_has_one_point_per_k_and_one_marker() {
        let csv = "k,sse,chosen\n1,10,0\n2,5,0\n3,2,1\n4,1.8,0\n5,1.7,0\n6,1.6,0\n7,1.5,0\n8,1.4,0\n9,1.3,0\n10,1.2,0\n";
        let d = PlotData::from_csv(PlotKind::Elbow, csv.as_bytes(), None).unwrap();
        let svg = render_svg(&d);
        assert_eq!(svg.matches("class=\"point\"").count(), 9);
        assert_eq!(svg.matches("class=\"chosen\"").count(), 1);
        assert!(svg.starts_with("<?xml") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn zero_importances_render() {
        let csv = "feature,mda_mean,mda_sd,mdg\na,0,0,0\nb,0,0,0\n";
        let d = PlotData::from_csv(PlotKind::ImportanceBars, csv.as_bytes(), None).unwrap();
        let svg = render_svg(&d);
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
        assert_eq!(svg.matches("width=\"0.00\"").count(), 4);
    }

    #[test]
    fn scatter_marks_centroids() {
        let csv = "positive_rate,death_rate,label\n0.1,0.01,High\n0.05,0.002,Low\n0.06,0.001,Low\n";
        let d = PlotData::from_csv(PlotKind::ClusterScatter, csv.as_bytes(), None).unwrap();
        let PlotData::ClusterScatter { groups, centroids, .. } = &d else { panic!() };
        assert_eq!(groups, &["High", "Low"]);
        assert!((centroids[1].0 - 0.055).abs() < 1e-12);
        assert_eq!(render_svg(&d).matches("class=\"centroid\"").count(), 2);
    }

    #[test]
    fn dependence_panels_per_feature_and_class() {
        let mut csv = String::from("row,feature,class,value,shap\n");
        for r in 0..5 {
            for f in ["a", "b"] {
                for c in ["High", "Low"] {
                    csv.push_str(&format!("{r},{f},{c},{r},{}\n", if f == "a" { 0.1 * r as f64 } else { 0.0 }));
                }
            }
        }
        let d = PlotData::from_csv(PlotKind::ShapDependence, csv.as_bytes(), None).unwrap();
        let PlotData::ShapDependence { panels } = &d else { panic!() };
        assert_eq!(panels.len(), 4);
        assert_eq!(panels[0].feature, "a");
        let d = PlotData::from_csv(PlotKind::ShapRankDots, csv.as_bytes(), None).unwrap();
        let PlotData::ShapRankDots { panels } = &d else { panic!() };
        assert_eq!(panels[0].features, vec!["a", "b"]);
        assert!(render_svg(&d).contains("class High"));
    }

    #[test]
    fn bad_number_names_the_column() {
        let e = PlotData::from_csv(PlotKind::Elbow, "k,sse\n1,abc\n".as_bytes(), None).unwrap_err();
        assert!(e.to_string().contains("sse"));
    }
}
