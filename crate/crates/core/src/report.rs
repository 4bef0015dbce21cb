//! Text tables, CSV rows and the comparison against published baselines.

use std::fmt::Write as _;

use crate::metrics::{MetricRow, Scores};

pub const CSV_HEADER: &str = "corpus,config,class,precision,recall,iou,f1";

/// Published mean scores of the full system (both components enabled).
pub const REFERENCE_BOTH: Scores = Scores {
    precision: 0.981,
    recall: 0.980,
    iou: 0.963,
    f1: 0.980,
};

/// Published competitor scores: precision, recall, IoU, F1.
pub const COMPETITORS: [(&str, Scores); 6] = [
    ("FCN", scores(0.918, 0.916, 0.843, 0.904)),
    ("LRASPP", scores(0.930, 0.911, 0.854, 0.910)),
    ("PSPNet", scores(0.904, 0.910, 0.838, 0.899)),
    ("DeepLabV3", scores(0.918, 0.915, 0.842, 0.903)),
    ("DeepLabV3+", scores(0.958, 0.956, 0.920, 0.954)),
    ("MLA", scores(0.989, 0.995, 0.989, 0.995)),
];

const fn scores(precision: f64, recall: f64, iou: f64, f1: f64) -> Scores {
    Scores {
        precision,
        recall,
        iou,
        f1,
    }
}

const METRIC_NAMES: [&str; 4] = ["Prec", "Rec", "IoU", "F1"];

fn csv_line(out: &mut String, corpus: &str, config: &str, class: &str, s: &Scores) {
    let _ = writeln!(
        out,
        "{corpus},{config},{class},{:.6},{:.6},{:.6},{:.6}",
        s.precision, s.recall, s.iou, s.f1
    );
}

/// CSV rows (no header) for one evaluated corpus: every class, then both
/// weighted averages.
pub fn csv_rows(corpus: &str, config: &str, row: &MetricRow) -> String {
    let mut out = String::new();
    for entry in &row.classes {
        csv_line(&mut out, corpus, config, &entry.class, &entry.scores);
    }
    csv_line(&mut out, corpus, config, "weighted_all", &row.weighted_all);
    csv_line(
        &mut out,
        corpus,
        config,
        "weighted_foreground",
        &row.weighted_foreground,
    );
    out
}

/// CSV rows for a cross-corpus mean.
pub fn csv_mean_rows(config: &str, all: &Scores, foreground: &Scores) -> String {
    let mut out = String::new();
    csv_line(&mut out, "mean", config, "weighted_all", all);
    csv_line(&mut out, "mean", config, "weighted_foreground", foreground);
    out
}

/// One line of an ablation table: configuration name, per-corpus scores in
/// column order, and their mean.
#[derive(Clone, Debug, PartialEq)]
pub struct TableRow {
    pub config: String,
    pub corpora: Vec<Scores>,
    pub mean: Scores,
}

/// Fixed-width ablation table: per-corpus Prec/Rec/IoU/F1 then the mean,
/// with the published full-system mean as a footer.
pub fn render_ablation(corpora: &[String], rows: &[TableRow]) -> String {
    const NAME: usize = 22;
    let mut groups: Vec<&str> = corpora.iter().map(String::as_str).collect();
    groups.push("Mean");

    let mut out = String::new();
    let _ = write!(out, "{:NAME$}", "");
    for g in &groups {
        let _ = write!(out, " | {g:^27}");
    }
    out.push('\n');
    let _ = write!(out, "{:NAME$}", "");
    for _ in &groups {
        out.push_str(" |");
        for m in METRIC_NAMES {
            let _ = write!(out, " {m:>6}");
        }
    }
    out.push('\n');
    let width = out.lines().next().map_or(0, str::len);
    out.push_str(&"-".repeat(width));
    out.push('\n');
    for row in rows {
        let _ = write!(out, "{:NAME$}", row.config);
        for s in row.corpora.iter().chain(std::iter::once(&row.mean)) {
            out.push_str(" |");
            for v in s.as_array() {
                let _ = write!(out, " {v:>6.3}");
            }
        }
        out.push('\n');
    }
    out.push_str(&"-".repeat(width));
    out.push('\n');
    let r = REFERENCE_BOTH;
    let _ = writeln!(
        out,
        "published full system, DIVA-HisDB mean: Prec {:.3}  Rec {:.3}  IoU {:.3}  F1 {:.3}",
        r.precision, r.recall, r.iou, r.f1
    );
    trim_lines(&out)
}

fn trim_lines(text: &str) -> String {
    text.lines()
        .map(|l| format!("{}\n", l.trim_end()))
        .collect()
}

/// Rank of each entry per column, highest score first, ties sharing a rank.
fn competition_ranks(values: &[f64]) -> Vec<usize> {
    values
        .iter()
        .map(|v| 1 + values.iter().filter(|o| *o > v).count())
        .collect()
}

/// Our mean row against the embedded competitor scores. Per column, `*`
/// marks the best score and `_` the second best.
pub fn render_comparison(ours: &Scores) -> String {
    let mut names: Vec<&str> = COMPETITORS.iter().map(|(n, _)| *n).collect();
    names.push("Ours");
    let mut rows: Vec<[f64; 4]> = COMPETITORS.iter().map(|(_, s)| s.as_array()).collect();
    rows.push(ours.as_array());

    let ranks: Vec<Vec<usize>> = (0..4)
        .map(|col| competition_ranks(&rows.iter().map(|r| r[col]).collect::<Vec<_>>()))
        .collect();

    let mut out = String::new();
    let _ = write!(out, "{:12}", "");
    for m in ["Precision", "Recall", "IoU", "F1"] {
        let _ = write!(out, " {m:>10}");
    }
    out.push('\n');
    for (i, (name, vals)) in names.iter().zip(&rows).enumerate() {
        let _ = write!(out, "{name:12}");
        for (col, v) in vals.iter().enumerate() {
            let mark = match ranks[col][i] {
                1 => '*',
                2 => '_',
                _ => ' ',
            };
            let _ = write!(out, " {:>9.3}{mark}", v);
        }
        out.push('\n');
    }
    out.push_str("* best, _ second best. Competitor scores as published for DIVA-HisDB.\n");
    trim_lines(&out)
}

/// Rank of our row per column (1 = best) under the same ranking as
/// [`render_comparison`].
pub fn comparison_ranks(ours: &Scores) -> [usize; 4] {
    let o = ours.as_array();
    let mut r = [0; 4];
    for (col, slot) in r.iter_mut().enumerate() {
        *slot = 1 + COMPETITORS
            .iter()
            .filter(|(_, s)| s.as_array()[col] > o[col])
            .count();
    }
    r
}
