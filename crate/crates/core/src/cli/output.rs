use crate::error::{Error, Result};
use serde::Serialize;
use serde_json::ser::Formatter;
use sha2::{Digest, Sha256};
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

/// Floats with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Pretty JSON with every float written as `d.dddddddddddddddde±x`.
struct SigFormatter {
    indent: usize,
    has_value: bool,
    pretty: bool,
}

impl SigFormatter {
    fn newline<W: ?Sized + Write>(&self, w: &mut W) -> io::Result<()> {
        if !self.pretty {
            return Ok(());
        }
        w.write_all(b"\n")?;
        for _ in 0..self.indent {
            w.write_all(b"  ")?;
        }
        Ok(())
    }
}

impl Formatter for SigFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(format!("{v:.16e}").as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.indent += 1;
        self.has_value = false;
        w.write_all(b"[")
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.indent -= 1;
        if self.has_value {
            self.newline(w)?;
        }
        w.write_all(b"]")
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        if !first {
            w.write_all(b",")?;
        }
        self.newline(w)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, _w: &mut W) -> io::Result<()> {
        self.has_value = true;
        Ok(())
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.indent += 1;
        self.has_value = false;
        w.write_all(b"{")
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.indent -= 1;
        if self.has_value {
            self.newline(w)?;
        }
        w.write_all(b"}")
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        if !first {
            w.write_all(b",")?;
        }
        self.newline(w)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        w.write_all(if self.pretty { b": " } else { b":" })
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, _w: &mut W) -> io::Result<()> {
        self.has_value = true;
        Ok(())
    }
}

fn serialize<T: Serialize>(value: &T, pretty: bool) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigFormatter { indent: 0, has_value: false, pretty });
    value.serialize(&mut ser).map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serialize(value, true)? + "\n")
}

/// Single-line JSON with the same float format, for line-delimited logs.
pub fn to_json_line<T: Serialize>(value: &T) -> Result<String> {
    serialize(value, false)
}

/// `sha256("blob <len>\0" ‖ bytes)` as lowercase hex.
pub fn blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes CSV with a header row; float cells use 17 significant digits.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    w.write_record(header).map_err(|e| Error::Io(e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Output directory plus the line-delimited run log inside it.
pub struct Sink {
    pub dir: PathBuf,
    pub quiet: bool,
    written: Vec<PathBuf>,
}

impl Sink {
    pub fn new(dir: &Path, quiet: bool) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Sink { dir: dir.to_path_buf(), quiet, written: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<PathBuf> {
        let p = self.path(name);
        fs::write(&p, text)?;
        self.written.push(p.clone());
        Ok(p)
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let p = self.path(name);
        write_csv(&p, header, rows)?;
        self.written.push(p.clone());
        Ok(p)
    }

    pub fn log<T: Serialize>(&self, event: &T) -> Result<()> {
        let mut f = OpenOptions::new().create(true).append(true).open(self.path("run.jsonl"))?;
        writeln!(f, "{}", to_json_line(event)?)?;
        Ok(())
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}
