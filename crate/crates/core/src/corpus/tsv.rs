//! Minimal strict TSV helpers: no quoting, `\t` `\n` `\r` `\\` escapes.

use std::io::BufRead;

use super::{CorpusError, Result};

pub(crate) fn escape(field: &str) -> String {
    let mut out = String::with_capacity(field.len());
    for c in field.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

pub(crate) fn unescape(field: &str) -> String {
    let mut out = String::with_capacity(field.len());
    let mut chars = field.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

/// Yields `(line_number, fields)` for each data row after checking the header.
pub(crate) struct Rows<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    width: usize,
}

pub(crate) fn rows<R: BufRead>(reader: R, header: &str) -> Result<Rows<R>> {
    let mut lines = reader.lines();
    let first = match lines.next() {
        Some(line) => line.map_err(|e| CorpusError::io("<input>", e))?,
        None => String::new(),
    };
    let first = first.strip_suffix('\r').unwrap_or(&first).trim_start_matches('\u{feff}');
    if first != header {
        return Err(CorpusError::Header {
            expected: header.replace('\t', "\\t"),
            found: first.replace('\t', "\\t"),
        });
    }
    Ok(Rows {
        lines,
        line_no: 1,
        width: header.split('\t').count(),
    })
}

impl<R: BufRead> Iterator for Rows<R> {
    type Item = Result<(usize, Vec<String>)>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(e) => return Some(Err(CorpusError::io("<input>", e))),
            };
            self.line_no += 1;
            let line = line.strip_suffix('\r').unwrap_or(&line);
            if line.is_empty() {
                continue;
            }
            let fields: Vec<String> = line.split('\t').map(unescape).collect();
            if fields.len() != self.width {
                return Some(Err(CorpusError::ColumnCount {
                    row: self.line_no,
                    expected: self.width,
                    found: fields.len(),
                }));
            }
            return Some(Ok((self.line_no, fields)));
        }
    }
}

pub(crate) fn optional(field: String) -> Option<String> {
    if field.is_empty() {
        None
    } else {
        Some(field)
    }
}
