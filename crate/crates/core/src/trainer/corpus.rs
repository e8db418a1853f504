use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crate::error::Error;
use crate::score_io::{align_pair, build_layout, parse_midi, parse_score_json, score_to_json, AlignedPair, OrchestraLayout, PianoRoll};

/// One piano score and its orchestration, as parts.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    pub name: String,
    pub piano: Vec<PianoRoll>,
    pub orchestra: Vec<PianoRoll>,
}

impl CorpusEntry {
    /// Binarized, padded state sequences under `layout`. Multi-part piano
    /// files are merged into a single keyboard part.
    pub fn align(&self, layout: &OrchestraLayout) -> Result<AlignedPair, Error> {
        let piano = PianoRoll::merge("piano", &self.piano)?;
        let (piano, orchestra) = align_pair(&piano, &self.orchestra, layout)?;
        Ok(AlignedPair {
            name: self.name.clone(),
            piano,
            orchestra,
        })
    }
}

#[derive(Debug)]
enum Source {
    Dir(BTreeMap<String, (PathBuf, PathBuf)>),
    Memory(BTreeMap<String, CorpusEntry>),
}

/// A set of named piano/orchestra pairs at one quantization, loaded lazily.
///
/// Every load is recorded, so callers can show which files a run touched.
#[derive(Debug)]
pub struct Corpus {
    source: Source,
    quantization: u32,
    access_log: Mutex<Vec<String>>,
}

const PIANO_SUFFIX: &str = ".piano";
const ORCH_SUFFIX: &str = ".orch";

impl Corpus {
    /// Indexes `dir` for `NAME.piano.{json,mid}` / `NAME.orch.{json,mid}`
    /// pairs without reading them.
    pub fn open(dir: impl AsRef<Path>, quantization: u32) -> Result<Self, Error> {
        let dir = dir.as_ref();
        if quantization == 0 {
            return Err(Error::Config("quantization must be at least 1".into()));
        }
        let mut piano = BTreeMap::new();
        let mut orch = BTreeMap::new();
        for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            let Some(ext) = path.extension().and_then(|e| e.to_str()) else { continue };
            if !matches!(ext, "json" | "mid" | "midi") {
                continue;
            }
            let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else { continue };
            if let Some(name) = stem.strip_suffix(PIANO_SUFFIX) {
                piano.insert(name.to_string(), path.clone());
            } else if let Some(name) = stem.strip_suffix(ORCH_SUFFIX) {
                orch.insert(name.to_string(), path.clone());
            }
        }
        let mut files = BTreeMap::new();
        for (name, p) in piano {
            match orch.remove(&name) {
                Some(o) => {
                    files.insert(name, (p, o));
                }
                None => log::warn!("`{name}` has a piano file but no orchestration; skipped"),
            }
        }
        for name in orch.keys() {
            log::warn!("`{name}` has an orchestration but no piano file; skipped");
        }
        if files.is_empty() {
            return Err(Error::Corpus(format!("no piano/orchestra pairs in {}", dir.display())));
        }
        Ok(Self {
            source: Source::Dir(files),
            quantization,
            access_log: Mutex::new(Vec::new()),
        })
    }

    pub fn in_memory(entries: Vec<CorpusEntry>, quantization: u32) -> Self {
        Self {
            source: Source::Memory(entries.into_iter().map(|e| (e.name.clone(), e)).collect()),
            quantization,
            access_log: Mutex::new(Vec::new()),
        }
    }

    pub fn quantization(&self) -> u32 {
        self.quantization
    }

    /// Pair names in sorted order.
    pub fn names(&self) -> Vec<String> {
        match &self.source {
            Source::Dir(m) => m.keys().cloned().collect(),
            Source::Memory(m) => m.keys().cloned().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.names().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Names loaded so far, in load order.
    pub fn access_log(&self) -> Vec<String> {
        self.access_log.lock().expect("access log lock").clone()
    }

    pub fn load(&self, name: &str) -> Result<CorpusEntry, Error> {
        self.access_log.lock().expect("access log lock").push(name.to_string());
        let entry = match &self.source {
            Source::Memory(m) => m
                .get(name)
                .cloned()
                .ok_or_else(|| Error::Corpus(format!("no pair named `{name}`")))?,
            Source::Dir(m) => {
                let (p, o) = m.get(name).ok_or_else(|| Error::Corpus(format!("no pair named `{name}`")))?;
                CorpusEntry {
                    name: name.to_string(),
                    piano: read_score(p, self.quantization)?,
                    orchestra: read_score(o, self.quantization)?,
                }
            }
        };
        if let Some(r) = entry.piano.iter().chain(&entry.orchestra).find(|r| r.quantization() != self.quantization) {
            return Err(Error::Corpus(format!(
                "`{name}` part `{}` is at Q={}, the corpus is read at Q={}",
                r.label(),
                r.quantization(),
                self.quantization
            )));
        }
        Ok(entry)
    }

    pub fn load_all(&self, names: &[String]) -> Result<Vec<CorpusEntry>, Error> {
        names.iter().map(|n| self.load(n)).collect()
    }
}

/// Reads a JSON or MIDI score; MIDI is quantized at `quantization`.
pub fn read_score(path: &Path, quantization: u32) -> Result<Vec<PianoRoll>, Error> {
    let is_midi = matches!(path.extension().and_then(|e| e.to_str()), Some("mid" | "midi"));
    if is_midi {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(parse_midi(&bytes, quantization).map_err(crate::score_io::ScoreError::from)?)
    } else {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(parse_score_json(&text)?)
    }
}

/// Writes each entry as `NAME.piano.json` and `NAME.orch.json` under `dir`.
pub fn write_corpus(dir: impl AsRef<Path>, entries: &[CorpusEntry]) -> Result<(), Error> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for e in entries {
        for (suffix, rolls) in [(PIANO_SUFFIX, &e.piano), (ORCH_SUFFIX, &e.orchestra)] {
            let path = dir.join(format!("{}{suffix}.json", e.name));
            std::fs::write(&path, score_to_json(rolls)?).map_err(|err| Error::io(&path, err))?;
        }
    }
    Ok(())
}

/// Layout over the orchestrations of `entries`.
pub fn layout_of(entries: &[CorpusEntry]) -> Result<OrchestraLayout, Error> {
    let rolls: Vec<Vec<PianoRoll>> = entries.iter().map(|e| e.orchestra.clone()).collect();
    Ok(build_layout(&rolls)?)
}

pub fn align_all(entries: &[CorpusEntry], layout: &OrchestraLayout) -> Result<Vec<AlignedPair>, Error> {
    entries.iter().map(|e| e.align(layout)).collect()
}
