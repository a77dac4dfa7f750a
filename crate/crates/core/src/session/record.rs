//! Episode logs: one JSON header line, then one line per observation.
//!
//! ```text
//! {"type":"header","version":1,"config":{...}}
//! {"t":0,"action":null,"observation":{...},"world_hash":"9f3c..."}
//! {"t":1,"action":{...},"observation":{...},"world_hash":"..."}
//! ```

use std::fs::File;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Session, SessionConfig};
use crate::error::{Error, Result};
use crate::observation::{ActionCommand, ObservationFrame};

pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename = "header")]
struct Header {
    version: u32,
    config: SessionConfig,
}

#[derive(Debug, Serialize)]
struct EntryOut<'a> {
    t: u64,
    action: Option<&'a ActionCommand>,
    observation: &'a ObservationFrame,
    world_hash: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryIn {
    t: u64,
    action: Option<ActionCommand>,
    observation: serde_json::Value,
    world_hash: String,
}

pub struct Recorder {
    out: Box<dyn Write + Send>,
}

impl std::fmt::Debug for Recorder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Recorder")
    }
}

impl Recorder {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path)
            .map_err(|e| Error::Io(format!("cannot create {}: {e}", path.display())))?;
        Ok(Self::new(BufWriter::new(file)))
    }

    pub fn new<W: Write + Send + 'static>(out: W) -> Self {
        Self { out: Box::new(out) }
    }

    pub(super) fn header(&mut self, config: &SessionConfig) -> Result<()> {
        let header = Header {
            version: LOG_VERSION,
            config: SessionConfig {
                record: None,
                ..config.clone()
            },
        };
        let line = serde_json::to_string(&header).expect("header serializes");
        writeln!(self.out, "{line}")?;
        Ok(())
    }

    pub(super) fn step(
        &mut self,
        t: u64,
        action: Option<&ActionCommand>,
        observation: &ObservationFrame,
        world_hash: u64,
    ) -> Result<()> {
        let entry = EntryOut {
            t,
            action,
            observation,
            world_hash: format!("{world_hash:016x}"),
        };
        let line = serde_json::to_string(&entry).expect("entry serializes");
        writeln!(self.out, "{line}")?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

impl Drop for Recorder {
    fn drop(&mut self) {
        let _ = self.out.flush();
    }
}

/// Where a replay first disagreed with the log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    pub t: u64,
    pub field: &'static str,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayReport {
    /// Log entries checked, including t = 0.
    pub entries: u64,
    pub divergence: Option<Divergence>,
}

impl ReplayReport {
    pub fn verified(&self) -> bool {
        self.divergence.is_none()
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::LogParse {
        line,
        message: message.into(),
    }
}

/// Re-runs the logged actions from the logged config and compares every
/// observation and world hash. Stops at the first divergence.
pub fn replay<R: BufRead>(reader: R) -> Result<ReplayReport> {
    let mut lines = reader.lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| parse_err(1, "empty log"))?;
    let first = first.map_err(|e| parse_err(1, e.to_string()))?;
    let header: Header =
        serde_json::from_str(&first).map_err(|e| parse_err(1, format!("bad header: {e}")))?;
    if header.version != LOG_VERSION {
        return Err(parse_err(1, format!("unsupported log version {}", header.version)));
    }
    let mut session = Session::with_recorder(header.config, None)?;
    let mut entries = 0u64;
    let mut expected_t = 0u64;
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(|e| parse_err(lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: EntryIn =
            serde_json::from_str(&line).map_err(|e| parse_err(lineno, e.to_string()))?;
        if entry.t != expected_t {
            return Err(parse_err(
                lineno,
                format!("expected t={expected_t}, found t={}", entry.t),
            ));
        }
        let hash = u64::from_str_radix(&entry.world_hash, 16)
            .map_err(|e| parse_err(lineno, format!("world_hash: {e}")))?;
        let obs = match (entry.t, &entry.action) {
            (0, None) => session.observation().clone(),
            (0, Some(_)) => return Err(parse_err(lineno, "t=0 carries an action")),
            (_, Some(action)) => match session.step(action) {
                Ok(o) => o,
                Err(e) => {
                    return Ok(ReplayReport {
                        entries,
                        divergence: Some(Divergence {
                            t: entry.t,
                            field: "action",
                            detail: e.to_string(),
                        }),
                    })
                }
            },
            (_, None) => return Err(parse_err(lineno, "missing action")),
        };
        entries += 1;
        expected_t += 1;
        let got = serde_json::to_value(&obs).expect("observation serializes");
        if got != entry.observation {
            return Ok(ReplayReport {
                entries,
                divergence: Some(Divergence {
                    t: entry.t,
                    field: "observation",
                    detail: "observation differs from the log".into(),
                }),
            });
        }
        let actual = session.world().hash();
        if actual != hash {
            return Ok(ReplayReport {
                entries,
                divergence: Some(Divergence {
                    t: entry.t,
                    field: "world_hash",
                    detail: format!("log {hash:016x}, replay {actual:016x}"),
                }),
            });
        }
    }
    if entries == 0 {
        return Err(parse_err(2, "log has no entries"));
    }
    Ok(ReplayReport {
        entries,
        divergence: None,
    })
}
