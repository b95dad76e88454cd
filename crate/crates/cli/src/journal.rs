use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{Context, Result};
use lari_core::io::write_atomic;
use serde_json::{Map, Value};

pub type Record = Map<String, Value>;

/// Records of a JSON-lines file; a missing file has none. Lines that do not
/// parse as objects (such as a half-written last line) are skipped.
pub fn read_records(path: &Path) -> Result<Vec<Record>> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e).with_context(|| format!("reading {}", path.display())),
    };
    Ok(text
        .lines()
        .filter_map(|l| match serde_json::from_str(l) {
            Ok(Value::Object(m)) => Some(m),
            _ => None,
        })
        .collect())
}

/// Append-only record log. Each record is written and flushed as soon as its
/// work item finishes; [`Journal::finish`] rewrites the file sorted by key.
pub struct Journal {
    path: PathBuf,
    file: Mutex<File>,
}

impl Journal {
    pub fn open(path: &Path) -> Result<Journal> {
        let mut file = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(path)
            .with_context(|| format!("opening {}", path.display()))?;
        let len = file.metadata()?.len();
        if len > 0 {
            let mut last = [0u8];
            file.seek(SeekFrom::Start(len - 1))?;
            file.read_exact(&mut last)?;
            if last[0] != b'\n' {
                file.write_all(b"\n")?;
            }
        }
        Ok(Journal {
            path: path.to_path_buf(),
            file: Mutex::new(file),
        })
    }

    pub fn append(&self, record: &Record) -> Result<()> {
        let mut line = serde_json::to_string(record)?;
        line.push('\n');
        let mut f = self.file.lock().expect("journal lock");
        f.write_all(line.as_bytes())?;
        f.flush()?;
        Ok(())
    }

    /// Keeps the last record per key, sorts by key and replaces the file.
    pub fn finish<K: Ord>(self, key: impl Fn(&Record) -> K) -> Result<Vec<Record>> {
        drop(self.file);
        let records = read_records(&self.path)?;
        let latest: BTreeMap<K, Record> = records.into_iter().map(|r| (key(&r), r)).collect();
        let records: Vec<Record> = latest.into_values().collect();
        write_atomic(&self.path, render_lines(&records).as_bytes())?;
        Ok(records)
    }
}

pub fn render_lines(records: &[Record]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("JSON object"));
        out.push('\n');
    }
    out
}

pub fn str_field<'a>(r: &'a Record, name: &str) -> &'a str {
    r.get(name).and_then(Value::as_str).unwrap_or("")
}
