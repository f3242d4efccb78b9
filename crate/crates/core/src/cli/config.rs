//! Run configuration file parser.
//!
//! Grammar (one statement per line, `#` starts a comment):
//!
//! ```text
//! dataset = <file-or-directory>        # repeatable; directories expand to *.faf
//! output  = <directory>
//!
//! [calculation <name>]
//! kind        = peak_displacement | channel_distortion | rms_velocity | normalized_peak
//! ix          = <int>                  # channel_distortion column (with iy)
//! iy          = <int>
//! plot        = layer | channel | time | waterfall
//! layer_index = <int>                  # z slice for layer plots (default 0)
//! # presentation overrides:
//! title = <text>        colormap = <id>       marker_size = <float>
//! line_width = <float>  grid_lines = true|false
//! xlim = <lo>,<hi>      ylim = <lo>,<hi>
//! ```

use std::path::{Path, PathBuf};

use crate::plotdoc::{PlotType, PresentationPatch};

/// One `[calculation <name>]` section.
#[derive(Debug, Clone)]
pub struct CalcEntry {
    pub name: String,
    pub kind: String,
    pub ix: Option<usize>,
    pub iy: Option<usize>,
    pub plot: Option<PlotType>,
    pub layer_index: Option<usize>,
    pub presentation: PresentationPatch,
}

/// Parsed run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub datasets: Vec<PathBuf>,
    pub output: PathBuf,
    pub calcs: Vec<CalcEntry>,
}

impl RunConfig {
    /// Expands dataset entries to the concrete .faf file list; directories
    /// contribute their .faf members sorted by name.
    pub fn dataset_files(&self) -> Result<Vec<PathBuf>, String> {
        let mut paths = Vec::new();
        for ds in &self.datasets {
            if ds.is_dir() {
                let mut members: Vec<PathBuf> = std::fs::read_dir(ds)
                    .map_err(|e| format!("cannot read dataset directory {}: {e}", ds.display()))?
                    .filter_map(|entry| entry.ok().map(|e| e.path()))
                    .filter(|p| p.extension().is_some_and(|e| e == "faf"))
                    .collect();
                members.sort();
                if members.is_empty() {
                    return Err(format!("no .faf files in {}", ds.display()));
                }
                paths.extend(members);
            } else if ds.is_file() {
                paths.push(ds.clone());
            } else {
                return Err(format!("dataset path {} does not exist", ds.display()));
            }
        }
        if paths.is_empty() {
            return Err("config declares no dataset".to_string());
        }
        Ok(paths)
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str, line_no: usize) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("line {line_no}: bad value {value:?} for {key}"))
}

fn parse_limits(value: &str, line_no: usize) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(format!("line {line_no}: expected \"lo,hi\", got {value:?}"));
    }
    let lo: f64 = parse_num("limit", parts[0], line_no)?;
    let hi: f64 = parse_num("limit", parts[1], line_no)?;
    Ok((lo, hi))
}

/// Loads and validates a run configuration file.
pub fn load(path: &Path) -> Result<RunConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    parse(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Parses config text; relative paths resolve against `base`.
pub fn parse(text: &str, base: &Path) -> Result<RunConfig, String> {
    let mut datasets: Vec<PathBuf> = Vec::new();
    let mut output: Option<PathBuf> = None;
    let mut calcs: Vec<CalcEntry> = Vec::new();
    let mut current: Option<CalcEntry> = None;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(inner) = line.strip_prefix('[') {
            let inner = inner
                .strip_suffix(']')
                .ok_or_else(|| format!("line {line_no}: unterminated section header"))?
                .trim();
            let name = inner
                .strip_prefix("calculation")
                .map(str::trim)
                .filter(|n| !n.is_empty())
                .ok_or_else(|| {
                    format!("line {line_no}: expected [calculation <name>], got [{inner}]")
                })?;
            if calcs.iter().any(|c| c.name == name)
                || current.as_ref().is_some_and(|c| c.name == name)
            {
                return Err(format!("line {line_no}: duplicate calculation {name:?}"));
            }
            if let Some(done) = current.take() {
                calcs.push(done);
            }
            current = Some(CalcEntry {
                name: name.to_string(),
                kind: String::new(),
                ix: None,
                iy: None,
                plot: None,
                layer_index: None,
                presentation: PresentationPatch::default(),
            });
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| format!("line {line_no}: expected key = value, got {line:?}"))?;
        if value.is_empty() {
            return Err(format!("line {line_no}: empty value for {key}"));
        }
        match &mut current {
            None => match key {
                "dataset" => datasets.push(base.join(value)),
                "output" => output = Some(base.join(value)),
                other => {
                    return Err(format!(
                        "line {line_no}: unknown top-level key {other:?} (expected dataset or output)"
                    ))
                }
            },
            Some(calc) => match key {
                "kind" => calc.kind = value.to_string(),
                "ix" => calc.ix = Some(parse_num(key, value, line_no)?),
                "iy" => calc.iy = Some(parse_num(key, value, line_no)?),
                "plot" => {
                    calc.plot = Some(
                        PlotType::parse(value)
                            .map_err(|e| format!("line {line_no}: {e}"))?,
                    )
                }
                "layer_index" => calc.layer_index = Some(parse_num(key, value, line_no)?),
                "title" => calc.presentation.title = Some(value.to_string()),
                "colormap" => calc.presentation.colormap_id = Some(value.to_string()),
                "marker_size" => {
                    calc.presentation.marker_size = Some(parse_num(key, value, line_no)?)
                }
                "line_width" => {
                    calc.presentation.line_width = Some(parse_num(key, value, line_no)?)
                }
                "grid_lines" => {
                    calc.presentation.grid_lines = Some(parse_num(key, value, line_no)?)
                }
                "xlim" => calc.presentation.xlim = Some(parse_limits(value, line_no)?),
                "ylim" => calc.presentation.ylim = Some(parse_limits(value, line_no)?),
                other => {
                    return Err(format!(
                        "line {line_no}: unknown calculation key {other:?}"
                    ))
                }
            },
        }
    }
    if let Some(done) = current.take() {
        calcs.push(done);
    }

    let output = output.ok_or("config is missing the output directory")?;
    if datasets.is_empty() {
        return Err("config declares no dataset".to_string());
    }
    if calcs.is_empty() {
        return Err("config declares no calculations".to_string());
    }
    for calc in &calcs {
        if calc.kind.is_empty() {
            return Err(format!("calculation {:?} has no kind", calc.name));
        }
    }
    Ok(RunConfig {
        datasets,
        output,
        calcs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
# pipeline for the demo dataset
dataset = data/
output = out/

[calculation peak]
kind = peak_displacement
plot = layer
layer_index = 3
title = Peak displacement
colormap = coolwarm-diverging

[calculation chan]
kind = channel_distortion
ix = 1
iy = 2
plot = channel
line_width = 2.0
"#;

    #[test]
    fn parses_sections_and_keys() {
        let cfg = parse(SAMPLE, Path::new("/base")).unwrap();
        assert_eq!(cfg.datasets, vec![PathBuf::from("/base/data/")]);
        assert_eq!(cfg.output, PathBuf::from("/base/out/"));
        assert_eq!(cfg.calcs.len(), 2);
        let peak = &cfg.calcs[0];
        assert_eq!(peak.name, "peak");
        assert_eq!(peak.kind, "peak_displacement");
        assert_eq!(peak.plot, Some(PlotType::Layer));
        assert_eq!(peak.layer_index, Some(3));
        assert_eq!(peak.presentation.title.as_deref(), Some("Peak displacement"));
        let chan = &cfg.calcs[1];
        assert_eq!((chan.ix, chan.iy), (Some(1), Some(2)));
        assert_eq!(chan.presentation.line_width, Some(2.0));
    }

    #[test]
    fn rejects_unknown_keys_and_missing_parts() {
        assert!(parse("bogus = 1\n", Path::new(".")).is_err());
        assert!(parse("dataset = d\noutput = o\n", Path::new(".")).is_err());
        let dup = "dataset = d\noutput = o\n[calculation a]\nkind = k\n[calculation a]\nkind = k\n";
        assert!(parse(dup, Path::new(".")).unwrap_err().contains("duplicate"));
        let nokind = "dataset = d\noutput = o\n[calculation a]\nplot = time\n";
        assert!(parse(nokind, Path::new(".")).unwrap_err().contains("kind"));
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let cfg = parse(
            "dataset = d # trailing\n\noutput = o\n[calculation a]\nkind = rms_velocity\n",
            Path::new("."),
        )
        .unwrap();
        assert_eq!(cfg.datasets, vec![PathBuf::from("./d")]);
        assert_eq!(cfg.calcs[0].kind, "rms_velocity");
    }
}
