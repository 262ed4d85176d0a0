//! Plain-text checkpoint format.
//!
//! ```text
//! ict-checkpoint v1
//! layers <count>
//! layer <in> <out> <relu|identity>
//! w <in values of output row 0>
//! ...                                  (one `w` line per output unit)
//! b <out values>
//! ```
//!
//! Values are written with 17 significant digits, which round-trips every
//! finite `f64` exactly.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{Activation, Layer, Network};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const CHECKPOINT_HEADER: &str = "ict-checkpoint v1";

fn fmt_values(tag: &str, values: &[f64], out: &mut String) {
    out.push_str(tag);
    for v in values {
        out.push(' ');
        out.push_str(&format!("{v:.16e}"));
    }
    out.push('\n');
}

pub fn write_checkpoint<W: Write>(net: &Network, mut w: W) -> std::io::Result<()> {
    let mut s = String::new();
    s.push_str(CHECKPOINT_HEADER);
    s.push('\n');
    s.push_str(&format!("layers {}\n", net.layers().len()));
    for layer in net.layers() {
        s.push_str(&format!(
            "layer {} {} {}\n",
            layer.in_dim(),
            layer.out_dim(),
            layer.activation().name()
        ));
        for row in layer.weights().iter_rows() {
            fmt_values("w", row, &mut s);
        }
        fmt_values("b", layer.bias(), &mut s);
    }
    w.write_all(s.as_bytes())
}

pub fn save_checkpoint(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_checkpoint(net, &mut buf).map_err(|e| Error::io(path, e))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    number: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self) -> Result<String> {
        self.number += 1;
        match self.inner.next() {
            Some(Ok(l)) => Ok(l),
            Some(Err(e)) => Err(self.err(format!("read failed: {e}"))),
            None => Err(self.err("unexpected end of checkpoint".into())),
        }
    }

    fn err(&self, message: String) -> Error {
        Error::Parse {
            line: self.number,
            message,
        }
    }

    /// Reads a line starting with `tag` followed by exactly `count` reals.
    fn values(&mut self, tag: &str, count: usize) -> Result<Vec<f64>> {
        let line = self.next_line()?;
        let mut parts = line.split_ascii_whitespace();
        if parts.next() != Some(tag) {
            return Err(self.err(format!("expected `{tag}` line")));
        }
        let values = parts
            .map(|p| {
                p.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| self.err(format!("bad value `{p}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() != count {
            return Err(self.err(format!("expected {count} values, found {}", values.len())));
        }
        Ok(values)
    }
}

pub fn read_checkpoint<R: BufRead>(r: R) -> Result<Network> {
    let mut lines = Lines {
        inner: r.lines(),
        number: 0,
    };
    if lines.next_line()?.trim_end() != CHECKPOINT_HEADER {
        return Err(lines.err(format!("expected header `{CHECKPOINT_HEADER}`")));
    }
    let count_line = lines.next_line()?;
    let count: usize = count_line
        .strip_prefix("layers ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| lines.err("expected `layers <count>`".into()))?;
    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        let header = lines.next_line()?;
        let parts: Vec<&str> = header.split_ascii_whitespace().collect();
        let parsed = match parts.as_slice() {
            ["layer", i, o, a] => i
                .parse::<usize>()
                .ok()
                .zip(o.parse::<usize>().ok())
                .zip(Activation::from_name(a)),
            _ => None,
        };
        let ((in_dim, out_dim), act) =
            parsed.ok_or_else(|| lines.err("expected `layer <in> <out> <activation>`".into()))?;
        let mut weights = Vec::with_capacity(in_dim * out_dim);
        for _ in 0..out_dim {
            weights.extend(lines.values("w", in_dim)?);
        }
        let bias = lines.values("b", out_dim)?;
        let w = Matrix::new(out_dim, in_dim, weights)?;
        layers.push(Layer::new(w, bias, act)?);
    }
    Network::new(layers)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(BufReader::new(file))
}
