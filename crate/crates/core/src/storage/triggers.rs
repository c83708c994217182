//! Trigger lists: one `<sample index> <label>` pair per line, labels
//! `target`, `nontarget` or `unknown`. Blank lines and `#` comments are
//! ignored; indices must be strictly increasing.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::erp_cov::Label;
use crate::error::{Error, Result};
use crate::preprocess::Trigger;

fn parse_label(s: &str) -> Option<Label> {
    match s.to_ascii_lowercase().as_str() {
        "target" | "1" => Some(Label::Target),
        "nontarget" | "non-target" | "0" => Some(Label::NonTarget),
        "unknown" | "2" => Some(Label::Unknown),
        _ => None,
    }
}

pub fn parse_triggers(text: &str) -> Result<Vec<Trigger>> {
    let mut out: Vec<Trigger> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fail = |why: &str| Error::Format(format!("trigger line {}: {why}: `{}`", i + 1, raw.trim()));
        let mut fields = line.split_whitespace();
        let (Some(idx), Some(lab), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(fail("expected `<index> <label>`"));
        };
        let index: usize = idx.parse().map_err(|_| fail("invalid sample index"))?;
        let label = parse_label(lab).ok_or_else(|| fail("invalid label"))?;
        if out.last().is_some_and(|prev| prev.index >= index) {
            return Err(fail("index is not after the previous trigger"));
        }
        out.push(Trigger::new(index, label));
    }
    Ok(out)
}

pub fn read_triggers(path: impl AsRef<Path>) -> Result<Vec<Trigger>> {
    let path = path.as_ref();
    parse_triggers(&fs::read_to_string(path)?).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn format_triggers(triggers: &[Trigger]) -> String {
    let mut out = String::new();
    for t in triggers {
        writeln!(out, "{} {}", t.index, t.label).expect("writing to a String");
    }
    out
}

pub fn write_triggers(triggers: &[Trigger], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_triggers(triggers))?;
    Ok(())
}
