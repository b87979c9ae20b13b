//! SVG and CSV renditions of the evaluation results.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sewerbench::evaluate::{EvalRecord, ModelKey, TradeoffIndices};
use sewerbench::stats::{iqr, median, quantile};
use sewerbench::Result;

use crate::svg::{color, Document, Panel, Scale};

/// Provenance stamped into every report artifact.
#[derive(Debug, Clone)]
pub struct Stamp {
    pub config_hash: String,
    pub seed_base: u64,
}

impl Stamp {
    fn line(&self) -> String {
        format!(
            "config_hash={} seed_base={}",
            self.config_hash, self.seed_base
        )
    }
}

pub fn write_reports(
    dir: &Path,
    records: &[EvalRecord],
    indices: &TradeoffIndices,
    stamp: &Stamp,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let files = [
        ("mse_spread.svg", mse_spread_svg(records, stamp)),
        ("mse_spread.csv", mse_spread_csv(records, stamp)),
        ("peak_mse.svg", peak_svg(records, stamp)),
        ("peak_mse.csv", peak_csv(records, stamp)),
        ("mse_increase.svg", increase_svg(records, stamp)),
        ("mse_increase.csv", increase_csv(records, stamp)),
        ("tradeoff.svg", tradeoff_svg(indices, stamp)),
        ("tradeoff.csv", tradeoff_csv(indices, stamp)),
    ];
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}

type Groups = BTreeMap<ModelKey, Vec<f64>>;

fn clean_groups(records: &[EvalRecord], peak: bool) -> Groups {
    let mut g: Groups = BTreeMap::new();
    for r in records.iter().filter(|r| r.is_clean() && r.is_ok()) {
        let v = if peak { r.mse_peak } else { r.mse };
        if let Some(v) = v {
            g.entry(ModelKey::new(&r.model_type, r.mode))
                .or_default()
                .push(v);
        }
    }
    g
}

/// |perturbed - clean| per (model, error kind).
fn increase_groups(
    records: &[EvalRecord],
) -> BTreeMap<(ModelKey, String), Vec<(f64, &EvalRecord)>> {
    let clean: BTreeMap<(ModelKey, u64), f64> = records
        .iter()
        .filter(|r| r.is_clean())
        .filter_map(|r| Some(((ModelKey::new(&r.model_type, r.mode), r.seed), r.mse?)))
        .collect();
    let mut out: BTreeMap<(ModelKey, String), Vec<(f64, &EvalRecord)>> = BTreeMap::new();
    for r in records.iter().filter(|r| !r.is_clean() && r.is_ok()) {
        let key = ModelKey::new(&r.model_type, r.mode);
        if let (Some(m), Some(base)) = (r.mse, clean.get(&(key.clone(), r.seed))) {
            out.entry((key, r.error_kind.clone().unwrap_or_default()))
                .or_default()
                .push(((m - base).abs(), r));
        }
    }
    out
}

fn header(stamp: &Stamp) -> String {
    format!("# {}\n", stamp.line())
}

fn mse_spread_csv(records: &[EvalRecord], stamp: &Stamp) -> String {
    let mut s = header(stamp);
    s.push_str("model_type,mode,seed,mse,mse_peak\n");
    for r in records.iter().filter(|r| r.is_clean() && r.is_ok()) {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.model_type,
            r.mode.label(),
            r.seed,
            r.mse.unwrap_or(f64::NAN),
            r.mse_peak.map(|v| v.to_string()).unwrap_or_default()
        );
    }
    s
}

fn mse_spread_svg(records: &[EvalRecord], stamp: &Stamp) -> String {
    let groups = clean_groups(records, false);
    let mut doc = Document::new(1, "Clean test MSE across seeds", &stamp.line());
    let y = Scale::fit(groups.values().flatten().copied(), true);
    {
        let mut p = Panel::new(
            &mut doc,
            0,
            "Clean test MSE across seeds",
            Scale::fit([0.0, 1.0], true),
            y,
            "model",
            "MSE",
        );
        let n = groups.len();
        for (i, (k, v)) in groups.iter().enumerate() {
            let (cx, w) = p.slot(i, n);
            p.boxplot(cx, (w * 0.5).min(60.0), v, color(i));
            p.category_label(i, n, &k.to_string());
        }
    }
    doc.finish()
}

fn peak_csv(records: &[EvalRecord], stamp: &Stamp) -> String {
    let full = clean_groups(records, false);
    let peak = clean_groups(records, true);
    let mut s = header(stamp);
    s.push_str("model_type,mode,median_mse,iqr_mse,median_mse_peak,iqr_mse_peak\n");
    for (k, v) in &full {
        let p = peak.get(k).map(Vec::as_slice).unwrap_or(&[]);
        let fmt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            k.model_type,
            k.mode.label(),
            fmt(median(v)),
            fmt(iqr(v)),
            fmt(median(p)),
            fmt(iqr(p))
        );
    }
    s
}

fn peak_svg(records: &[EvalRecord], stamp: &Stamp) -> String {
    let full = clean_groups(records, false);
    let peak = clean_groups(records, true);
    let mut doc = Document::new(1, "MSE on all test steps and on peak events", &stamp.line());
    let y = Scale::fit(full.values().chain(peak.values()).flatten().copied(), true);
    {
        let mut p = Panel::new(
            &mut doc,
            0,
            "MSE on all test steps and on peak events",
            Scale::fit([0.0, 1.0], true),
            y,
            "model",
            "median MSE (IQR bars)",
        );
        let n = full.len();
        for (i, (k, v)) in full.iter().enumerate() {
            let (cx, w) = p.slot(i, n);
            let bw = (w * 0.35).min(40.0);
            for (j, series) in [Some(v), peak.get(k)].into_iter().enumerate() {
                if let Some(series) = series {
                    if let Some(m) = median(series) {
                        let err = quantile(series, 0.25).zip(quantile(series, 0.75));
                        let offset = if j == 0 { -bw / 2.0 } else { bw / 2.0 };
                        p.bar(cx + offset, bw, m, err, color(j));
                    }
                }
            }
            p.category_label(i, n, &k.to_string());
        }
        p.legend(&[("all steps", color(0)), ("peak events", color(1))]);
    }
    doc.finish()
}

fn increase_csv(records: &[EvalRecord], stamp: &Stamp) -> String {
    let mut s = header(stamp);
    s.push_str(
        "model_type,mode,seed,feature,error_kind,error_rate,effective_rate,abs_mse_increase\n",
    );
    for ((k, kind), cells) in increase_groups(records) {
        for (inc, r) in cells {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                k.model_type,
                k.mode.label(),
                r.seed,
                r.feature.as_deref().unwrap_or(""),
                kind,
                r.error_rate,
                r.effective_rate,
                inc
            );
        }
    }
    s
}

fn increase_svg(records: &[EvalRecord], stamp: &Stamp) -> String {
    let groups = increase_groups(records);
    let kinds: Vec<String> = {
        let mut k: Vec<String> = groups.keys().map(|(_, kind)| kind.clone()).collect();
        k.sort();
        k.dedup();
        k
    };
    let models: Vec<ModelKey> = {
        let mut m: Vec<ModelKey> = groups.keys().map(|(m, _)| m.clone()).collect();
        m.dedup();
        m
    };
    let mut doc = Document::new(1, "Absolute MSE increase under perturbation", &stamp.line());
    let y = Scale::fit(groups.values().flatten().map(|(v, _)| *v), true);
    {
        let mut p = Panel::new(
            &mut doc,
            0,
            "Absolute MSE increase under perturbation",
            Scale::fit([0.0, 1.0], true),
            y,
            "model",
            "|MSE perturbed - MSE clean|",
        );
        let n = models.len();
        for (i, m) in models.iter().enumerate() {
            let (cx, w) = p.slot(i, n);
            let bw = (w * 0.8 / kinds.len().max(1) as f64).min(40.0);
            for (j, kind) in kinds.iter().enumerate() {
                if let Some(cells) = groups.get(&(m.clone(), kind.clone())) {
                    let values: Vec<f64> = cells.iter().map(|(v, _)| *v).collect();
                    let offset = (j as f64 - (kinds.len() as f64 - 1.0) / 2.0) * bw;
                    p.boxplot(cx + offset, bw * 0.8, &values, color(j));
                }
            }
            p.category_label(i, n, &m.to_string());
        }
        let legend: Vec<(&str, &str)> = kinds
            .iter()
            .enumerate()
            .map(|(j, k)| (k.as_str(), color(j)))
            .collect();
        p.legend(&legend);
    }
    doc.finish()
}

fn tradeoff_csv(indices: &TradeoffIndices, stamp: &Stamp) -> String {
    let mut s = header(stamp);
    s.push_str("model_type,mode,median_mse,iqr_mse,median_mse_peak,inference_seconds,size_bytes,cci,mean_abs_increase,iqr_abs_increase,ri\n");
    let fmt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for m in &indices.models {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            m.model_type,
            m.mode.label(),
            m.median_mse,
            m.iqr_mse,
            fmt(m.median_mse_peak),
            fmt(m.inference_seconds),
            fmt(m.size_bytes),
            fmt(m.cci),
            fmt(m.mean_abs_increase),
            fmt(m.iqr_abs_increase),
            fmt(m.ri)
        );
    }
    s
}

fn tradeoff_svg(indices: &TradeoffIndices, stamp: &Stamp) -> String {
    let panels: [(&str, fn(&sewerbench::evaluate::ModelIndices) -> Option<f64>); 3] = [
        ("IQR of clean MSE", |m| Some(m.iqr_mse)),
        ("RI", |m| m.ri),
        ("CCI", |m| m.cci),
    ];
    let mut doc = Document::new(3, "Trade-offs against median MSE", &stamp.line());
    let x = Scale::fit(indices.models.iter().map(|m| m.median_mse), false);
    for (i, (name, get)) in panels.iter().enumerate() {
        let y = Scale::fit(indices.models.iter().filter_map(get), true);
        let mut p = Panel::new(
            &mut doc,
            i,
            &format!("MSE vs {name}"),
            x,
            y,
            "median clean MSE",
            name,
        );
        p.numeric_x_ticks();
        for (j, m) in indices.models.iter().enumerate() {
            if let Some(v) = get(m) {
                let label = format!("{}/{}", m.model_type, m.mode.label());
                p.point(m.median_mse, v, color(j), Some(&label));
            }
        }
    }
    doc.finish()
}
