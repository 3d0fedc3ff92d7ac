//! Text weight files: a `# shape d0 d1 ...` header line followed by the
//! values in row-major order, whitespace separated.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct WeightArray {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl WeightArray {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if shape.is_empty() || n != values.len() {
            return Err(Error::invalid(format!(
                "shape {shape:?} does not match {} values",
                values.len()
            )));
        }
        Ok(Self { shape, values })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .find(|l| !l.trim().is_empty())
            .ok_or_else(|| Error::Parse("empty weight file".into()))?;
        let dims = header
            .trim()
            .strip_prefix('#')
            .map(str::trim)
            .and_then(|h| h.strip_prefix("shape"))
            .ok_or_else(|| Error::Parse(format!("expected '# shape ...' header, got {header:?}")))?;
        let shape = dims
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|e| Error::Parse(format!("shape entry {t:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let values = lines
            .flat_map(str::split_whitespace)
            .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("value {t:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(shape, values)
    }

    pub fn to_text(&self) -> String {
        let dims: Vec<String> = self.shape.iter().map(usize::to_string).collect();
        let mut out = format!("# shape {}\n", dims.join(" "));
        let last = *self.shape.last().unwrap_or(&1);
        for row in self.values.chunks(last.max(1)) {
            let vals: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            out.push_str(&vals.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}
