//! CSV and JSON-lines writers.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use seplab_core::sim::{scaled_position, ObservableSample};
use seplab_core::stats::{dkw_band, ks_distance, EmpiricalDist};
use seplab_core::theory::{LimitLaw, ScalingPair};

/// 17 significant digits.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// Where artifacts go and what the `#` header lines say.
#[derive(Clone, Debug)]
pub struct Sink {
    pub dir: PathBuf,
    pub timestamp: bool,
    pub config_hash: String,
}

impl Sink {
    pub fn new(dir: impl Into<PathBuf>, timestamp: bool, config_hash: String) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            timestamp,
            config_hash,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn header(&self, extra: &[(&str, String)]) -> String {
        let mut h = String::new();
        if self.timestamp {
            let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
            h.push_str(&format!("# generated_unix={secs}\n"));
        }
        h.push_str(&format!("# seplab {}\n", env!("CARGO_PKG_VERSION")));
        h.push_str(&format!("# config_sha256={}\n", self.config_hash));
        for (k, v) in extra {
            h.push_str(&format!("# {k}={v}\n"));
        }
        h
    }

    /// Writes header lines followed by `body`.
    pub fn write_csv(&self, name: &str, meta: &[(&str, String)], body: &str) -> io::Result<PathBuf> {
        let path = self.path(name);
        let mut f = io::BufWriter::new(fs::File::create(&path)?);
        f.write_all(self.header(meta).as_bytes())?;
        f.write_all(body.as_bytes())?;
        f.flush()?;
        Ok(path)
    }

    /// JSON-lines file whose first line is a metadata object.
    pub fn write_jsonl<T: serde::Serialize>(
        &self,
        name: &str,
        meta: serde_json::Value,
        rows: &[T],
    ) -> io::Result<PathBuf> {
        let path = self.path(name);
        let mut f = io::BufWriter::new(fs::File::create(&path)?);
        let mut meta = meta;
        if let serde_json::Value::Object(m) = &mut meta {
            m.insert("config_sha256".into(), self.config_hash.clone().into());
            m.insert("version".into(), env!("CARGO_PKG_VERSION").into());
            if self.timestamp {
                let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
                m.insert("generated_unix".into(), secs.into());
            }
        }
        writeln!(f, "{}", serde_json::to_string(&meta)?)?;
        for row in rows {
            writeln!(f, "{}", serde_json::to_string(row)?)?;
        }
        f.flush()?;
        Ok(path)
    }
}

/// Reads a CSV artifact, dropping `#` header lines.
pub fn read_body(path: &Path) -> io::Result<String> {
    Ok(fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect())
}

/// Empirical CDF of the scaled X_t against the limit CDF on `x_grid`.
///
/// Columns `x,empirical,limit,gap`; a final `ks` row holds the KS distance,
/// the 99% DKW band and their difference.
pub fn emit_gumbel_table(
    samples: &[ObservableSample],
    scaling: &ScalingPair,
    sigma: f64,
    law: &LimitLaw,
    x_grid: &[f64],
) -> String {
    let scaled: Vec<f64> = samples.iter().map(|s| scaled_position(s.x_t, scaling, sigma)).collect();
    let emp = EmpiricalDist::new(scaled).expect("samples are nonempty and finite");
    let mut out = String::from("x,empirical,limit,gap\n");
    for &x in x_grid {
        let e = emp.cdf(x);
        let l = law.cdf(x);
        out.push_str(&format!("{},{},{},{}\n", num(x), num(e), num(l), num(e - l)));
    }
    let d = ks_distance(&emp, |x| law.cdf(x));
    let band = dkw_band(emp.n(), 0.01);
    out.push_str(&format!("ks,{},{},{}\n", num(d), num(band), num(d - band)));
    out
}
