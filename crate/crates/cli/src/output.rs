use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::CliError;

pub const OUT_DIR_ENV: &str = "DYNCONTRACT_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Text,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub instance: String,
    pub instance_hash: String,
    pub flags: BTreeMap<String, Value>,
    pub seed: Option<u64>,
    pub outputs: Vec<String>,
    pub version: String,
}

/// What a command produces before the manifest is attached.
pub struct Report {
    pub json: Value,
    pub text: String,
    pub csv: Option<String>,
    /// Extra files for the output directory, by file name.
    pub files: Vec<(String, String)>,
}

fn stem(manifest: &RunManifest) -> String {
    let id: String = Path::new(&manifest.instance)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| manifest.instance.clone())
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect();
    format!("{}-{}", manifest.command.replace(' ', "-"), id)
}

fn with_manifest(json: &Value, manifest: &RunManifest) -> Value {
    let mut out = json!({ "manifest": manifest });
    if let (Value::Object(dst), Value::Object(src)) = (&mut out, json) {
        for (k, v) in src {
            dst.insert(k.clone(), v.clone());
        }
    }
    out
}

fn commented(body: &str, manifest: &RunManifest) -> String {
    format!("# manifest: {}\n{}", serde_json::to_string(manifest).expect("manifest serializes"), body)
}

/// Prints the report in `format` and, when an output directory is set,
/// writes JSON, CSV and extra files there. Every output embeds the manifest.
pub fn emit(report: Report, mut manifest: RunManifest, format: Format, out_dir: Option<PathBuf>) -> Result<(), CliError> {
    let dir = out_dir.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from));
    let base = stem(&manifest);
    let mut planned = vec![format!("{base}.json")];
    if report.csv.is_some() {
        planned.push(format!("{base}.csv"));
    }
    planned.extend(report.files.iter().map(|(name, _)| name.clone()));
    if let Some(d) = &dir {
        manifest.outputs = planned.iter().map(|n| d.join(n).to_string_lossy().into_owned()).collect();
    }
    let full = with_manifest(&report.json, &manifest);
    let pretty = serde_json::to_string_pretty(&full).expect("reports serialize");
    if let Some(d) = &dir {
        fs::create_dir_all(d).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", d.display())))?;
        let write = |name: &str, body: &str| {
            fs::write(d.join(name), body).map_err(|e| CliError::Usage(format!("cannot write {name}: {e}")))
        };
        write(&planned[0], &format!("{pretty}\n"))?;
        if let Some(csv) = &report.csv {
            write(&planned[1], &commented(csv, &manifest))?;
        }
        for (name, body) in &report.files {
            write(name, &commented(body, &manifest))?;
        }
    }
    match format {
        Format::Json => println!("{pretty}"),
        Format::Text => print!("{}", commented(&report.text, &manifest)),
        Format::Csv => match &report.csv {
            Some(csv) => print!("{}", commented(csv, &manifest)),
            None => return Err(CliError::Usage("this command has no CSV output".into())),
        },
    }
    Ok(())
}

/// Left-aligned first column, right-aligned others.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (i, c) in r.iter().enumerate().take(cols) {
            width[i] = width[i].max(c.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, c) in cells.iter().enumerate() {
            if i == 0 {
                s += &format!("{:<w$}", c, w = width[i]);
            } else {
                s += &format!("  {:>w$}", c, w = width[i]);
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    for r in rows {
        out += &line(r.iter().map(|s| s.as_str()).collect());
    }
    out
}

pub fn num(x: f64) -> String {
    format!("{x:.6}")
}
