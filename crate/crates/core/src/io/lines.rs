//! Versioned JSON Lines container: one header object carrying `format` and
//! `version`, then one JSON record per line.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct Envelope<H> {
    format: String,
    version: u32,
    #[serde(flatten)]
    header: H,
}

pub(crate) fn write_lines<W, H, R>(mut w: W, format: &str, version: u32, header: &H, records: &[R]) -> Result<()>
where
    W: Write,
    H: Serialize,
    R: Serialize,
{
    let env = Envelope {
        format: format.to_owned(),
        version,
        header,
    };
    serde_json::to_writer(&mut w, &env)?;
    w.write_all(b"\n")?;
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn read_lines<Rd, H, R>(r: Rd, format: &str, version: u32) -> Result<(H, Vec<R>)>
where
    Rd: BufRead,
    H: DeserializeOwned,
    R: DeserializeOwned,
{
    let mut lines = r
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()));
    let (_, first) = lines
        .next()
        .ok_or_else(|| Error::Format(format!("empty {format} file")))?;
    let env: Envelope<H> = serde_json::from_str(&first?).map_err(|e| Error::Format(format!("{format} header: {e}")))?;
    if env.format != format {
        return Err(Error::Format(format!(
            "expected format {format:?}, found {:?}",
            env.format
        )));
    }
    if env.version != version {
        return Err(Error::Format(format!("unsupported {format} version {}", env.version)));
    }
    let records = lines
        .map(|(i, l)| serde_json::from_str(&l?).map_err(|e| Error::Format(format!("{format} line {}: {e}", i + 1))))
        .collect::<Result<Vec<R>>>()?;
    Ok((env.header, records))
}
