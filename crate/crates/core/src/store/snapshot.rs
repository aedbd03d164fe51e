//! Line-delimited JSON snapshots: one record per line, tagged with `table`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{EntityRecord, KnowledgeStore, StoreConfig, StoreError, Table};

/// Write every row, tables in dependency order (referenced tables first),
/// rows sorted by key so identical stores produce identical files.
pub fn write_snapshot<W: Write>(store: &KnowledgeStore, mut out: W) -> Result<(), StoreError> {
    for table in Table::ALL {
        let mut rows: Vec<(String, &EntityRecord)> = store.records(table).map(|r| (r.key().0, r)).collect();
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        for (_, rec) in rows {
            serde_json::to_writer(&mut out, rec).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_snapshot<R: BufRead>(input: R, config: StoreConfig) -> Result<KnowledgeStore, StoreError> {
    let mut store = KnowledgeStore::new(config);
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EntityRecord =
            serde_json::from_str(&line).map_err(|e| StoreError::Snapshot { line: i + 1, message: e.to_string() })?;
        store.insert(rec).map_err(|e| StoreError::Snapshot { line: i + 1, message: e.to_string() })?;
    }
    Ok(store)
}

impl KnowledgeStore {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        let f = File::create(path)?;
        write_snapshot(self, BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>, config: StoreConfig) -> Result<Self, StoreError> {
        let f = File::open(path)?;
        read_snapshot(BufReader::new(f), config)
    }
}
