use crate::error::{Error, Result};
use serde::Serialize;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

/// Where a stream goes: a file, or stdout/stderr.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sink {
    Stdout,
    Stderr,
    File(PathBuf),
}

impl Sink {
    pub fn parse(spec: &str) -> Self {
        if spec == "-" {
            Sink::Stdout
        } else {
            Sink::File(PathBuf::from(spec))
        }
    }

    pub fn open(&self) -> Result<Box<dyn Write>> {
        Ok(match self {
            Sink::Stdout => Box::new(BufWriter::new(io::stdout().lock())),
            Sink::Stderr => Box::new(BufWriter::new(io::stderr().lock())),
            Sink::File(p) => {
                if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir)?;
                }
                Box::new(BufWriter::new(File::create(p)?))
            }
        })
    }

    /// A companion output next to `self`: `explicit` if given, else
    /// `<stem>.<suffix>` beside a file sink, else stderr when `self` is stdout.
    pub fn sidecar(&self, explicit: Option<&str>, suffix: &str) -> Sink {
        if let Some(e) = explicit {
            return Sink::parse(e);
        }
        match self {
            Sink::File(p) => Sink::File(with_suffix(p, suffix)),
            _ => Sink::Stderr,
        }
    }
}

fn with_suffix(p: &Path, suffix: &str) -> PathBuf {
    let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    p.with_file_name(format!("{stem}.{suffix}"))
}

/// `# pancake-lab <version> <config json>`
pub fn header_line<C: Serialize>(command: &str, config: &C) -> Result<String> {
    let json = serde_json::to_string(&ConfigEcho { command, config })
        .map_err(|e| Error::Numeric(format!("config serialization failed: {e}")))?;
    Ok(format!("# pancake-lab {} {json}", env!("CARGO_PKG_VERSION")))
}

#[derive(Serialize)]
struct ConfigEcho<'a, C> {
    command: &'a str,
    config: &'a C,
}

/// CSV writer with the config echo, a column header and '\n' line endings.
pub struct Csv {
    out: Box<dyn Write>,
    columns: usize,
}

impl Csv {
    pub fn create<C: Serialize>(sink: &Sink, command: &str, config: &C, columns: &[String]) -> Result<Self> {
        let mut out = sink.open()?;
        writeln!(out, "{}", header_line(command, config)?)?;
        writeln!(out, "{}", columns.join(","))?;
        Ok(Self {
            out,
            columns: columns.len(),
        })
    }

    pub fn row(&mut self, fields: &[Field]) -> Result<()> {
        debug_assert_eq!(fields.len(), self.columns);
        let line: Vec<String> = fields.iter().map(Field::render).collect();
        writeln!(self.out, "{}", line.join(","))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

pub enum Field {
    F(f64),
    I(u64),
    S(String),
    Empty,
}

impl Field {
    fn render(&self) -> String {
        match self {
            Field::F(v) => format!("{v:e}"),
            Field::I(v) => v.to_string(),
            Field::S(s) => s.clone(),
            Field::Empty => String::new(),
        }
    }
}

pub fn floats(v: impl IntoIterator<Item = f64>) -> impl Iterator<Item = Field> {
    v.into_iter().map(Field::F)
}

/// Single-document JSON with the config echo under "config".
pub fn write_json<C: Serialize, R: Serialize>(sink: &Sink, command: &str, config: &C, report: &R) -> Result<()> {
    #[derive(Serialize)]
    struct Doc<'a, C, R> {
        artifact: &'static str,
        version: &'static str,
        command: &'a str,
        config: &'a C,
        report: &'a R,
    }
    let doc = Doc {
        artifact: "pancake-lab",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config,
        report,
    };
    let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Numeric(format!("report serialization failed: {e}")))?;
    let mut out = sink.open()?;
    writeln!(out, "{text}")?;
    out.flush()?;
    Ok(())
}

/// Column names `prefix_0..prefix_{d-1}`.
pub fn indexed(prefix: &str, d: usize) -> Vec<String> {
    (0..d).map(|i| format!("{prefix}_{i}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecars() {
        let s = Sink::parse("out/run.csv");
        assert_eq!(s.sidecar(None, "summary.json"), Sink::File(PathBuf::from("out/run.summary.json")));
        assert_eq!(Sink::Stdout.sidecar(None, "x"), Sink::Stderr);
        assert_eq!(Sink::Stdout.sidecar(Some("a.json"), "x"), Sink::File("a.json".into()));
    }

    #[test]
    fn header_echoes_config() {
        #[derive(Serialize)]
        struct C {
            gamma: f64,
        }
        let h = header_line("sample", &C { gamma: 6.0 }).unwrap();
        assert!(h.starts_with("# pancake-lab "));
        assert!(h.ends_with(r#"{"command":"sample","config":{"gamma":6.0}}"#), "{h}");
    }
}
