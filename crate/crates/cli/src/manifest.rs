//! Tab-separated utterance lists: `id <TAB> posteriorgram path [<TAB> reference]`.
//!
//! Relative paths resolve against the manifest's directory. Blank lines and
//! lines starting with `#` are ignored.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{usage, CliError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub id: String,
    pub path: PathBuf,
    pub reference: Option<String>,
}

pub fn parse(text: &str, base: &Path) -> Result<Vec<Record>> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.splitn(3, '\t');
        let id = fields.next().unwrap_or_default().trim();
        let path = fields.next().map(str::trim).unwrap_or_default();
        if id.is_empty() || path.is_empty() {
            return Err(usage(format!("manifest line {}: expected id<TAB>path[<TAB>reference]", n + 1)));
        }
        if !seen.insert(id.to_string()) {
            return Err(usage(format!("manifest line {}: duplicate id {id}", n + 1)));
        }
        records.push(Record {
            id: id.to_string(),
            path: base.join(path),
            reference: fields.next().map(str::to_string),
        });
    }
    Ok(records)
}

pub fn load(path: &Path) -> Result<Vec<Record>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text, path.parent().unwrap_or(Path::new("")))
}

/// Renders records with paths made relative to `base` where possible.
pub fn render(records: &[Record], base: &Path) -> String {
    let mut out = String::new();
    for r in records {
        let path = r.path.strip_prefix(base).unwrap_or(&r.path);
        let _ = write!(out, "{}\t{}", r.id, path.display());
        if let Some(reference) = &r.reference {
            let _ = write!(out, "\t{reference}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_resolves() {
        let text = "# header\nu1\tpg/1.lpg\t|BOB] RAN\n\nu2\t/abs/2.lpg\n";
        let recs = parse(text, Path::new("/data")).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].path, Path::new("/data/pg/1.lpg"));
        assert_eq!(recs[0].reference.as_deref(), Some("|BOB] RAN"));
        assert_eq!(recs[1].path, Path::new("/abs/2.lpg"));
        assert_eq!(recs[1].reference, None);
        assert_eq!(render(&recs, Path::new("/data")), "u1\tpg/1.lpg\t|BOB] RAN\nu2\t/abs/2.lpg\n");
    }

    #[test]
    fn rejects_duplicates_and_short_lines() {
        assert_eq!(parse("a\tx\na\ty\n", Path::new("")).unwrap_err().code(), 2);
        assert_eq!(parse("lonely\n", Path::new("")).unwrap_err().code(), 2);
    }
}
