//! Append-only JSONL journals for labels and skips.
//!
//! Every write is flushed and fsync'd before it is acknowledged. On open the
//! label journal is compacted to the latest record per (pair, rater); a torn
//! final line from an interrupted write is dropped.

use std::collections::{BTreeSet, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use clonekit::evaluator::{latest_records, LabelRecord};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const LABELS_FILE: &str = "labels.jsonl";
pub const SKIPS_FILE: &str = "skips.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub pair_id: String,
    pub rater: String,
    pub timestamp: u64,
}

#[derive(Debug)]
pub struct Store {
    dir: PathBuf,
    labels_file: File,
    skips_file: File,
    labels: Vec<LabelRecord>,
    index: HashMap<(String, String), usize>,
    skips: BTreeSet<(String, String)>,
}

fn read_lines<T: DeserializeOwned>(path: &Path) -> std::io::Result<Vec<T>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    let lines: Vec<String> = BufReader::new(file).lines().collect::<Result<_, _>>()?;
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => out.push(r),
            Err(e) if i + 1 == lines.len() => log::warn!("{}: dropping torn last line: {e}", path.display()),
            Err(e) => {
                return Err(std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("{}:{}: {e}", path.display(), i + 1),
                ))
            }
        }
    }
    Ok(out)
}

fn append_line<T: Serialize>(file: &mut File, record: &T) -> std::io::Result<()> {
    let mut line = serde_json::to_vec(record)?;
    line.push(b'\n');
    file.write_all(&line)?;
    file.sync_data()
}

fn open_append(path: &Path) -> std::io::Result<File> {
    OpenOptions::new().create(true).append(true).open(path)
}

impl Store {
    pub fn open(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        let labels_path = dir.join(LABELS_FILE);
        let raw: Vec<LabelRecord> = read_lines(&labels_path)?;
        let labels = latest_records(&raw);
        let tmp = dir.join(format!("{LABELS_FILE}.tmp"));
        {
            let mut f = File::create(&tmp)?;
            for r in &labels {
                serde_json::to_writer(&mut f, r)?;
                f.write_all(b"\n")?;
            }
            f.sync_all()?;
        }
        std::fs::rename(&tmp, &labels_path)?;
        let skips_path = dir.join(SKIPS_FILE);
        let skips = read_lines::<SkipRecord>(&skips_path)?.into_iter().map(|s| (s.pair_id, s.rater)).collect();
        let index = labels.iter().enumerate().map(|(i, r)| ((r.pair_id.clone(), r.rater.clone()), i)).collect();
        Ok(Store {
            dir: dir.to_path_buf(),
            labels_file: open_append(&labels_path)?,
            skips_file: open_append(&skips_path)?,
            labels,
            index,
            skips,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Latest record per (pair, rater).
    pub fn labels(&self) -> &[LabelRecord] {
        &self.labels
    }

    pub fn has_label(&self, pair_id: &str, rater: &str) -> bool {
        self.index.contains_key(&(pair_id.to_string(), rater.to_string()))
    }

    pub fn has_skipped(&self, pair_id: &str, rater: &str) -> bool {
        self.skips.contains(&(pair_id.to_string(), rater.to_string()))
    }

    /// Durably record a label. Returns true when it replaced an earlier
    /// label by the same rater.
    pub fn put_label(&mut self, record: LabelRecord) -> std::io::Result<bool> {
        append_line(&mut self.labels_file, &record)?;
        let key = (record.pair_id.clone(), record.rater.clone());
        match self.index.get(&key) {
            Some(&i) => {
                self.labels[i] = record;
                Ok(true)
            }
            None => {
                self.index.insert(key, self.labels.len());
                self.labels.push(record);
                Ok(false)
            }
        }
    }

    pub fn put_skip(&mut self, record: SkipRecord) -> std::io::Result<()> {
        append_line(&mut self.skips_file, &record)?;
        self.skips.insert((record.pair_id, record.rater));
        Ok(())
    }

    pub fn skip_count(&self) -> usize {
        self.skips.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clonekit::evaluator::CloneLabel;

    fn rec(pair: &str, rater: &str, label: CloneLabel) -> LabelRecord {
        LabelRecord { pair_id: pair.into(), rater: rater.into(), label, timestamp: 1 }
    }

    #[test]
    fn overwrite_and_compaction() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut s = Store::open(dir.path()).unwrap();
            assert!(!s.put_label(rec("a:b", "r1", CloneLabel::Type1)).unwrap());
            assert!(s.put_label(rec("a:b", "r1", CloneLabel::Type2)).unwrap());
            assert_eq!(s.labels().len(), 1);
        }
        let raw = std::fs::read_to_string(dir.path().join(LABELS_FILE)).unwrap();
        assert_eq!(raw.lines().count(), 2);
        let s = Store::open(dir.path()).unwrap();
        assert_eq!(s.labels(), &[rec("a:b", "r1", CloneLabel::Type2)]);
        let raw = std::fs::read_to_string(dir.path().join(LABELS_FILE)).unwrap();
        assert_eq!(raw.lines().count(), 1);
    }

    #[test]
    fn torn_tail_is_dropped_but_corruption_is_not_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let good = serde_json::to_string(&rec("a:b", "r1", CloneLabel::Type3)).unwrap();
        std::fs::write(dir.path().join(LABELS_FILE), format!("{good}\n{{\"pair_id\":\"a:")).unwrap();
        assert_eq!(Store::open(dir.path()).unwrap().labels().len(), 1);
        std::fs::write(dir.path().join(LABELS_FILE), format!("garbage\n{good}\n")).unwrap();
        assert!(Store::open(dir.path()).is_err());
    }

    #[test]
    fn skips_persist() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut s = Store::open(dir.path()).unwrap();
            s.put_skip(SkipRecord { pair_id: "a:b".into(), rater: "r".into(), timestamp: 0 }).unwrap();
        }
        let s = Store::open(dir.path()).unwrap();
        assert!(s.has_skipped("a:b", "r"));
        assert!(!s.has_label("a:b", "r"));
    }
}
