//! Tagged corpora as JSON lines:
//! `{"v":1,"tokens":[..],"pos":[..],"ne":[..],"summary":[..]}`.

use std::fs;
use std::io::Write;
use std::path::Path;

use headlamp_core::corpus::TaggedDocument;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    v: u32,
    tokens: Vec<String>,
    pos: Vec<String>,
    ne: Vec<bool>,
    summary: Vec<String>,
}

/// Parses corpus text; blank lines are skipped, errors carry 1-based line numbers.
pub fn parse(text: &str, path: &Path) -> Result<Vec<TaggedDocument>> {
    let mut docs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let at = |message: String| Error::Line { path: path.to_path_buf(), line: i + 1, message };
        let line: Line = serde_json::from_str(raw).map_err(|e| at(e.to_string()))?;
        if line.v != VERSION {
            return Err(at(format!("schema version {} not supported (expected {VERSION})", line.v)));
        }
        let doc = TaggedDocument { tokens: line.tokens, pos: line.pos, is_ne: line.ne, summary: line.summary };
        doc.validate().map_err(|e| at(e.to_string()))?;
        docs.push(doc);
    }
    Ok(docs)
}

pub fn read(path: &Path) -> Result<Vec<TaggedDocument>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text, path)
}

pub fn to_string(docs: &[TaggedDocument]) -> String {
    let mut out = String::new();
    for d in docs {
        let line = Line { v: VERSION, tokens: d.tokens.clone(), pos: d.pos.clone(), ne: d.is_ne.clone(), summary: d.summary.clone() };
        out.push_str(&serde_json::to_string(&line).expect("corpus line serializes"));
        out.push('\n');
    }
    out
}

pub fn write(path: &Path, docs: &[TaggedDocument]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(to_string(docs).as_bytes()).map_err(|e| Error::io(path, e))
}
