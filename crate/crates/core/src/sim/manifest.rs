//! Line-delimited JSON manifests and on-disk datasets.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::mixture::MixtureExample;
use crate::audio::{read_wav, write_wav};
use crate::error::{Error, Result};
use crate::signal::Waveform;

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    manifest_version: u32,
    split: String,
}

/// One example. Paths are relative to the manifest's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleRecord {
    pub id: String,
    pub mixture_path: String,
    pub reference_paths: Vec<String>,
    pub enrollment_paths: Vec<String>,
    pub speaker_ids: Vec<String>,
    pub utterance_ids: Vec<String>,
    pub enrollment_ids: Vec<String>,
    pub n: usize,
    pub snr_db: Option<f64>,
    pub seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    pub split: String,
    pub records: Vec<ExampleRecord>,
}

/// Audio of one manifest record, read back from disk.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedExample {
    pub id: String,
    pub mixture: Waveform,
    pub references: Vec<Waveform>,
    pub enrollments: Vec<Waveform>,
    pub speaker_ids: Vec<String>,
}

impl LoadedExample {
    pub fn n_speakers(&self) -> usize {
        self.references.len()
    }
}

impl From<&MixtureExample> for LoadedExample {
    fn from(ex: &MixtureExample) -> Self {
        Self {
            id: format!("{:016x}", ex.meta.seed),
            mixture: ex.mixture.clone(),
            references: ex.references.clone(),
            enrollments: ex.enrollments.clone(),
            speaker_ids: ex.speaker_ids.clone(),
        }
    }
}

pub fn write_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let header = Header {
        manifest_version: MANIFEST_VERSION,
        split: manifest.split.clone(),
    };
    let mut write_line = |line: String| writeln!(w, "{line}").map_err(|e| Error::io(path, e));
    write_line(serde_json::to_string(&header)?)?;
    for r in &manifest.records {
        write_line(serde_json::to_string(r)?)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, message: String| Error::Manifest {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = BufReader::new(file).lines();
    let header: Header = match lines.next() {
        Some(l) => {
            let l = l.map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&l).map_err(|e| bad(1, format!("bad header: {e}")))?
        }
        None => return Err(bad(1, "missing header".into())),
    };
    if header.manifest_version != MANIFEST_VERSION {
        return Err(bad(
            1,
            format!(
                "manifest version {} (expected {MANIFEST_VERSION})",
                header.manifest_version
            ),
        ));
    }
    let mut records = Vec::new();
    for (i, l) in lines.enumerate() {
        let line_no = i + 2;
        let l = l.map_err(|e| Error::io(path, e))?;
        if l.trim().is_empty() {
            continue;
        }
        let r: ExampleRecord = serde_json::from_str(&l)
            .map_err(|e| bad(line_no, format!("malformed record: {e}")))?;
        if r.reference_paths.len() != r.n || r.speaker_ids.len() != r.n {
            return Err(bad(line_no, format!("record {} is inconsistent with n = {}", r.id, r.n)));
        }
        records.push(r);
    }
    Ok(Manifest {
        split: header.split,
        records,
    })
}

/// Writes every example's audio under `dir` plus `dir/manifest.jsonl`.
pub fn write_dataset(examples: &[MixtureExample], dir: &Path, split: &str) -> Result<Manifest> {
    let mut records = Vec::with_capacity(examples.len());
    for (i, ex) in examples.iter().enumerate() {
        let id = format!("{split}_{i:05}_n{}", ex.n_speakers());
        let rel = |name: String| format!("audio/{id}/{name}.wav");
        let mixture_path = rel("mixture".into());
        write_wav(&dir.join(&mixture_path), &ex.mixture)?;
        let mut reference_paths = Vec::new();
        for (k, r) in ex.references.iter().enumerate() {
            let p = rel(format!("ref{k}"));
            write_wav(&dir.join(&p), r)?;
            reference_paths.push(p);
        }
        let mut enrollment_paths = Vec::new();
        for (k, e) in ex.enrollments.iter().enumerate() {
            let p = rel(format!("enroll{k}"));
            write_wav(&dir.join(&p), e)?;
            enrollment_paths.push(p);
        }
        records.push(ExampleRecord {
            id,
            mixture_path,
            reference_paths,
            enrollment_paths,
            speaker_ids: ex.speaker_ids.clone(),
            utterance_ids: ex.meta.utterance_ids.clone(),
            enrollment_ids: ex.meta.enrollment_ids.clone(),
            n: ex.n_speakers(),
            snr_db: ex.snr_db,
            seed: ex.meta.seed,
        });
    }
    let manifest = Manifest {
        split: split.into(),
        records,
    };
    write_manifest(&manifest, &dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Directory a manifest's relative paths are resolved against.
pub fn manifest_base(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

impl ExampleRecord {
    pub fn load(&self, base: &Path) -> Result<LoadedExample> {
        let read_all = |paths: &[String]| -> Result<Vec<Waveform>> {
            paths.iter().map(|p| read_wav(&base.join(p))).collect()
        };
        Ok(LoadedExample {
            id: self.id.clone(),
            mixture: read_wav(&base.join(&self.mixture_path))?,
            references: read_all(&self.reference_paths)?,
            enrollments: read_all(&self.enrollment_paths)?,
            speaker_ids: self.speaker_ids.clone(),
        })
    }
}

impl Manifest {
    pub fn load_examples(&self, base: &Path) -> Result<Vec<LoadedExample>> {
        self.records.iter().map(|r| r.load(base)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(i: usize) -> ExampleRecord {
        ExampleRecord {
            id: format!("x{i}"),
            mixture_path: format!("audio/x{i}/mixture.wav"),
            reference_paths: vec!["a.wav".into(), "b.wav".into()],
            enrollment_paths: vec!["c.wav".into(), "d.wav".into()],
            speaker_ids: vec!["s1".into(), "s2".into()],
            utterance_ids: vec!["u1".into(), "u2".into()],
            enrollment_ids: vec!["u3".into(), "u4".into()],
            n: 2,
            snr_db: if i == 1 { None } else { Some(3.25 + i as f64) },
            seed: 1000 + i as u64,
        }
    }

    #[test]
    fn round_trips() {
        let dir = tempfile::tempdir().unwrap();
        for n in [0, 3] {
            let m = Manifest {
                split: "dev".into(),
                records: (0..n).map(record).collect(),
            };
            let p = dir.path().join(format!("m{n}.jsonl"));
            write_manifest(&m, &p).unwrap();
            assert_eq!(load_manifest(&p).unwrap(), m);
        }
    }

    #[test]
    fn truncated_record_names_its_line() {
        let dir = tempfile::tempdir().unwrap();
        let m = Manifest {
            split: "dev".into(),
            records: (0..3).map(record).collect(),
        };
        let p = dir.path().join("m.jsonl");
        write_manifest(&m, &p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        let cut = text.len() - 40;
        fs::write(&p, &text[..cut]).unwrap();
        match load_manifest(&p) {
            Err(Error::Manifest { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected a manifest error, got {other:?}"),
        }
    }
}
