//! Text checkpoint format, version 1:
//!
//! ```text
//! acil-checkpoint 1
//! input_dim=<d> hidden=<h> classes=<c_0>,<c_1>,...
//! w1=<v>,<v>,...
//! b1=...
//! w2=...
//! b2=...
//! ```
//!
//! Tensors are row-major, values in shortest round-trip scientific notation,
//! so a save/load cycle is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use super::ModelParams;
use crate::datastream::ClassId;
use crate::error::{Error, Result};
use crate::io::write_atomic;

const MAGIC: &str = "acil-checkpoint 1";

pub fn write_checkpoint(model: &ModelParams) -> String {
    let mut out = String::new();
    writeln!(out, "{MAGIC}").unwrap();
    let classes: Vec<String> = model.classes.iter().map(|c| c.to_string()).collect();
    writeln!(
        out,
        "input_dim={} hidden={} classes={}",
        model.input_dim,
        model.hidden,
        classes.join(",")
    )
    .unwrap();
    for (name, tensor) in [
        ("w1", &model.w1),
        ("b1", &model.b1),
        ("w2", &model.w2),
        ("b2", &model.b2),
    ] {
        let values: Vec<String> = tensor.iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "{name}={}", values.join(",")).unwrap();
    }
    out
}

pub fn read_checkpoint(path: &Path, text: &str) -> Result<ModelParams> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(MAGIC) {
        return Err(err(1, format!("expected `{MAGIC}`")));
    }
    let arch = lines
        .next()
        .ok_or_else(|| err(2, "missing architecture line".into()))?;
    let (mut input_dim, mut hidden, mut classes) = (None, None, None);
    for field in arch.split_whitespace() {
        match field.split_once('=') {
            Some(("input_dim", v)) => input_dim = v.parse::<usize>().ok(),
            Some(("hidden", v)) => hidden = v.parse::<usize>().ok(),
            Some(("classes", v)) => {
                classes = v
                    .split(',')
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<ClassId>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .ok()
            }
            _ => return Err(err(2, format!("unexpected field {field:?}"))),
        }
    }
    let (Some(input_dim), Some(hidden), Some(classes)) = (input_dim, hidden, classes) else {
        return Err(err(
            2,
            "architecture line needs input_dim, hidden and classes".into(),
        ));
    };
    let mut model =
        ModelParams::zeros(input_dim, hidden, classes).map_err(|e| err(2, e.to_string()))?;

    for (no, name) in ["w1", "b1", "w2", "b2"].into_iter().enumerate() {
        let line_no = no + 3;
        let line = lines
            .next()
            .ok_or_else(|| err(line_no, format!("missing tensor {name}")))?;
        let values = line
            .strip_prefix(name)
            .and_then(|rest| rest.strip_prefix('='))
            .ok_or_else(|| err(line_no, format!("expected `{name}=`")))?;
        let parsed = values
            .split(',')
            .filter(|s| !s.is_empty())
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| err(line_no, format!("{name}: {e}")))?;
        let target = match name {
            "w1" => &mut model.w1,
            "b1" => &mut model.b1,
            "w2" => &mut model.w2,
            _ => &mut model.b2,
        };
        if parsed.len() != target.len() {
            return Err(err(
                line_no,
                format!(
                    "{name}: expected {} values, found {}",
                    target.len(),
                    parsed.len()
                ),
            ));
        }
        *target = parsed;
    }
    Ok(model)
}

pub fn save_checkpoint(path: &Path, model: &ModelParams) -> Result<()> {
    write_atomic(path, write_checkpoint(model).as_bytes())
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(path, &text)
}
