//! Cycle-record corpora: binary record files indexed by a JSON manifest.

mod collect;
mod record;
pub mod synthetic;

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use collect::{collect_expert, collect_training, random_theta, ExpertRun};
pub use record::CycleRecord;
pub(crate) use record::Reader;

use crate::error::{Error, Result};

const FILE_MAGIC: &[u8; 8] = b"PIRLREC\x01";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::invalid("split", format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordFile {
    /// Relative to the manifest directory.
    pub path: String,
    pub split: Split,
    pub records: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Seeds {
    pub scenario: u64,
    pub planner: u64,
    pub collection: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub kind: String,
    pub sequential: bool,
    pub config_hash: String,
    pub seeds: Seeds,
    pub files: Vec<RecordFile>,
    /// Odometry CSVs, relative to the manifest directory.
    #[serde(default)]
    pub odometry: Vec<String>,
}

impl DatasetManifest {
    pub fn new(kind: &str, sequential: bool, config_hash: &str, seeds: Seeds) -> Self {
        Self {
            version: MANIFEST_VERSION,
            kind: kind.to_string(),
            sequential,
            config_hash: config_hash.to_string(),
            seeds,
            files: Vec::new(),
            odometry: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return Err(Error::format(
                "manifest",
                format!("unsupported version {}", self.version),
            ));
        }
        let mut paths: Vec<&str> = self.files.iter().map(|f| f.path.as_str()).collect();
        paths.sort_unstable();
        if paths.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("manifest", "a record file is listed twice"));
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let m: Self =
            serde_json::from_str(&text).map_err(|e| Error::format("manifest", e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::format("manifest", e.to_string()))?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn count(&self, split: Split) -> usize {
        self.files
            .iter()
            .filter(|f| f.split == split)
            .map(|f| f.records)
            .sum()
    }
}

/// Writes records to a record file.
pub fn write_records(path: &Path, records: &[CycleRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(FILE_MAGIC)?;
    for r in records {
        let bytes = r.encode()?;
        w.write_all(&(bytes.len() as u64).to_le_bytes())?;
        w.write_all(&bytes)?;
    }
    w.flush()?;
    Ok(())
}

/// Streaming reader over one record file.
pub struct RecordReader<R: Read> {
    inner: R,
    done: bool,
}

impl RecordReader<BufReader<File>> {
    pub fn open(path: &Path) -> Result<Self> {
        Self::new(BufReader::new(File::open(path)?))
    }
}

impl<R: Read> RecordReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        inner
            .read_exact(&mut magic)
            .map_err(|_| Error::format("record file", "missing header"))?;
        if &magic != FILE_MAGIC {
            return Err(Error::format("record file", "bad magic"));
        }
        Ok(Self { inner, done: false })
    }

    fn next_record(&mut self) -> Result<Option<CycleRecord>> {
        let mut len = [0u8; 8];
        let mut got = 0;
        while got < 8 {
            let n = self.inner.read(&mut len[got..])?;
            if n == 0 {
                break;
            }
            got += n;
        }
        if got == 0 {
            return Ok(None);
        }
        if got < 8 {
            return Err(Error::format("record file", "truncated length prefix"));
        }
        let mut buf = vec![0u8; u64::from_le_bytes(len) as usize];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| Error::format("record file", "truncated record"))?;
        CycleRecord::decode(&buf).map(Some)
    }
}

impl<R: Read> Iterator for RecordReader<R> {
    type Item = Result<CycleRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let r = self.next_record().transpose();
        if !matches!(r, Some(Ok(_))) {
            self.done = true;
        }
        r
    }
}

/// A dataset on disk: its manifest and directory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub dir: PathBuf,
}

impl Dataset {
    pub fn open(manifest_path: &Path) -> Result<Self> {
        let manifest = DatasetManifest::read(manifest_path)?;
        let dir = manifest_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        Ok(Self { manifest, dir })
    }

    /// Writes `splits` as one record file per split plus the manifest named
    /// `<name>.json` in `dir`.
    pub fn create(
        dir: &Path,
        name: &str,
        mut manifest: DatasetManifest,
        splits: &[(Split, &[CycleRecord])],
    ) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        manifest.files.clear();
        for (split, records) in splits {
            if manifest.sequential && records.windows(2).any(|w| w[1].cycle <= w[0].cycle) {
                return Err(Error::invalid(
                    "dataset",
                    "sequential records must have increasing cycle indices",
                ));
            }
            let file = format!("{name}-{}.rec", split.name());
            write_records(&dir.join(&file), records)?;
            manifest.files.push(RecordFile {
                path: file,
                split: *split,
                records: records.len(),
            });
        }
        manifest.write(&dir.join(format!("{name}.json")))?;
        Ok(Self {
            manifest,
            dir: dir.to_path_buf(),
        })
    }

    fn check_hash(&self, expected: Option<&str>) -> Result<()> {
        match expected {
            Some(h) if h != self.manifest.config_hash => Err(Error::IncompatibleDataset {
                manifest: self.manifest.config_hash.clone(),
                config: h.to_string(),
            }),
            _ => Ok(()),
        }
    }

    /// Streams the records of `split` in file order.
    pub fn stream(
        &self,
        split: Split,
        expected_hash: Option<&str>,
    ) -> Result<impl Iterator<Item = Result<CycleRecord>> + '_> {
        self.check_hash(expected_hash)?;
        let files: Vec<PathBuf> = self
            .manifest
            .files
            .iter()
            .filter(|f| f.split == split)
            .map(|f| self.dir.join(&f.path))
            .collect();
        let readers = files.into_iter().map(|p| RecordReader::open(&p));
        Ok(
            readers.flat_map(|r| -> Box<dyn Iterator<Item = Result<CycleRecord>>> {
                match r {
                    Ok(reader) => Box::new(reader),
                    Err(e) => Box::new(std::iter::once(Err(e))),
                }
            }),
        )
    }

    /// Loads all records of `split`, optionally shuffled with `shuffle_seed`.
    /// Shuffling a sequential dataset is rejected.
    pub fn load(
        &self,
        split: Split,
        expected_hash: Option<&str>,
        shuffle_seed: Option<u64>,
    ) -> Result<Vec<CycleRecord>> {
        if shuffle_seed.is_some() && self.manifest.sequential {
            return Err(Error::invalid(
                "dataset",
                "sequential splits cannot be shuffled",
            ));
        }
        let mut records = self
            .stream(split, expected_hash)?
            .collect::<Result<Vec<_>>>()?;
        if let Some(seed) = shuffle_seed {
            records.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        }
        Ok(records)
    }

    pub fn odometry_paths(&self) -> Vec<PathBuf> {
        self.manifest
            .odometry
            .iter()
            .map(|p| self.dir.join(p))
            .collect()
    }
}
