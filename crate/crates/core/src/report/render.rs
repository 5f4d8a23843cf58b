use std::collections::BTreeMap;
use std::fmt::Write;

use super::{Cell, ReportBundle, ReportError};

fn md_cell(c: &Cell) -> String {
    match c.value {
        Some(v) => format!("{v:.2} (n={})", c.n),
        None if c.n > 0 => format!("– (n={})", c.n),
        None => "–".into(),
    }
}

/// Human-readable tables, values rounded to two decimals.
pub fn to_markdown(b: &ReportBundle) -> String {
    let m = &b.metadata;
    let mut s = String::new();
    let _ = writeln!(s, "# Report: {}\n", m.plan);
    let _ = writeln!(s, "- model: `{}` via {}", m.model, m.provider);
    let _ = writeln!(
        s,
        "- temperature {}, max tokens {} (task) / {} (translation)",
        m.task_params.temperature, m.task_params.max_tokens, m.translation_params.max_tokens
    );
    let _ = writeln!(s, "- seed {}, quality threshold {}", m.seed, m.threshold);
    let _ = writeln!(s, "- mapping ledger sha256 `{}`", m.ledger_sha256);
    let _ = writeln!(s, "- BLEU: {}; ROUGE: {}", m.bleu, m.rouge);
    if !m.omitted_tasks.is_empty() {
        let _ = writeln!(s, "- not in this run: {}", m.omitted_tasks.join(", "));
    }
    let worst = m.invalid_rate.values().cloned().fold(0.0, f64::max);
    let _ = writeln!(s, "- highest INVALID rate of any condition: {worst:.4}");

    for t in b.tables() {
        let _ = writeln!(s, "\n## {}\n", t.title);
        let _ = writeln!(s, "| | {} |", t.columns.join(" | "));
        let _ = writeln!(s, "|---|{}", "---|".repeat(t.columns.len()));
        for r in &t.rows {
            let cells: Vec<String> = r.cells.iter().map(md_cell).collect();
            let _ = writeln!(s, "| {} | {} |", r.label, cells.join(" | "));
        }
        if t.rows.is_empty() {
            let _ = writeln!(s, "| (no rows) |{}", " |".repeat(t.columns.len()));
        }
        for note in &t.notes {
            let _ = writeln!(s, "\n{note}");
        }
    }
    s
}

/// Long format, one row per cell, full precision.
pub fn to_csv(b: &ReportBundle) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["table", "row", "column", "value", "n"])
        .unwrap();
    for t in b.tables() {
        for r in &t.rows {
            for (col, c) in t.columns.iter().zip(&r.cells) {
                let value = c.value.map(|v| v.to_string()).unwrap_or_default();
                w.write_record([
                    t.key.as_str(),
                    r.label.as_str(),
                    col.as_str(),
                    value.as_str(),
                    &c.n.to_string(),
                ])
                .unwrap();
            }
        }
    }
    String::from_utf8(w.into_inner().unwrap()).expect("csv is utf-8")
}

/// Reads [`to_csv`] output back into (table, row, column) → cell.
pub fn parse_csv(text: &str) -> Result<BTreeMap<(String, String, String), Cell>, ReportError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut out = BTreeMap::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| ReportError::Io(e.to_string()))?;
        let field = |i: usize| rec.get(i).unwrap_or_default().to_owned();
        let bad = |e: &dyn std::fmt::Display| ReportError::Io(format!("report csv: {e}"));
        let value = match field(3).as_str() {
            "" => None,
            v => Some(v.parse::<f64>().map_err(|e| bad(&e))?),
        };
        let n = field(4).parse::<usize>().map_err(|e| bad(&e))?;
        out.insert((field(0), field(1), field(2)), Cell { value, n });
    }
    Ok(out)
}
