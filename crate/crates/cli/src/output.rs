//! File emission. Floats carry 17 significant digits so that every value
//! parses back to the same bits and reruns are byte-identical.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde_json::{Map, Value};

use crate::config::RunConfig;
use crate::error::CliResult;

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// `x` rounded to `digits` significant digits in plain decimal notation.
pub fn sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> CliResult<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// `meta.json` with the effective configuration, tool version and wall time.
/// `extra` adds command-specific entries.
pub fn write_meta(dir: &Path, command: &str, cfg: &RunConfig, wall_seconds: f64, extra: Map<String, Value>) -> CliResult<()> {
    let config: Map<String, Value> = cfg.pairs().into_iter().map(|(k, v)| (k.to_string(), Value::String(v))).collect();
    let mut meta = Map::new();
    meta.insert("tool".into(), "hkfp".into());
    meta.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    meta.insert("command".into(), command.into());
    meta.insert("config".into(), Value::Object(config));
    meta.insert("wall_time_seconds".into(), wall_seconds.into());
    meta.extend(extra);
    let mut w = BufWriter::new(File::create(dir.join("meta.json"))?);
    serde_json::to_writer_pretty(&mut w, &Value::Object(meta)).map_err(std::io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    std::fs::write(dir.join("config.txt"), cfg.to_text())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_formats() {
        assert_eq!(num(0.5), "5.0000000000000000e-1");
        assert_eq!(num(0.1).parse::<f64>().unwrap(), 0.1);
        assert_eq!(sig(0.7285079183, 7), "0.7285079");
        assert_eq!(sig(4.367552612, 7), "4.367553");
        assert_eq!(sig(123.456, 2), "123");
        assert_eq!(sig(-0.0012345, 3), "-0.00123");
    }
}
