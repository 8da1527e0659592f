//! Plain-text persistence for towers and models.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! save/load cycle reproduces every parameter bit for bit and two runs with
//! the same seed write identical files.
//!
//! ```text
//! ASPERA-TOWER-v1
//! key=value            resolved config, one per line
//! tower_context=mean
//! tower_train_embeddings=false
//! matrix attention 8 8
//! <one line per row>
//! ...
//! end
//! ```
//!
//! A model file starts with `ASPERA-MODEL-v1`, carries its own key=value
//! lines (embedding and vocabulary references among them), then two tower
//! sections introduced by `tower user` and `tower item`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::abae::{ContextMode, TowerParams};
use crate::diffcore::Tensor;
use crate::error::{Error, Result};

pub const TOWER_MAGIC: &str = "ASPERA-TOWER-v1";
pub const MODEL_MAGIC: &str = "ASPERA-MODEL-v1";

/// Ordered key=value metadata embedded in every artifact.
pub type Meta = BTreeMap<String, String>;

/// Writes to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()
    };
    if let Err(e) = write() {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(&tmp, e));
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn push_meta(out: &mut String, meta: &Meta) {
    for (k, v) in meta {
        out.push_str(k);
        out.push('=');
        out.push_str(v);
        out.push('\n');
    }
}

fn push_matrix(out: &mut String, name: &str, t: &Tensor) {
    out.push_str(&format!("matrix {name} {} {}\n", t.rows(), t.cols()));
    for r in 0..t.rows() {
        let row: Vec<String> = t.row(r).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
}

fn push_tower_body(out: &mut String, tower: &TowerParams) {
    out.push_str(&format!("tower_context={}\n", tower.context));
    out.push_str(&format!("tower_train_embeddings={}\n", tower.train_embeddings));
    push_matrix(out, "attention", &tower.attention);
    push_matrix(out, "projection", &tower.projection);
    push_matrix(out, "bias", &tower.bias);
    push_matrix(out, "aspects", &tower.aspects);
    out.push_str("end\n");
}

pub fn tower_to_string(tower: &TowerParams, meta: &Meta) -> String {
    let mut out = format!("{TOWER_MAGIC}\n");
    push_meta(&mut out, meta);
    push_tower_body(&mut out, tower);
    out
}

pub fn model_to_string(user: &TowerParams, item: &TowerParams, meta: &Meta) -> String {
    let mut out = format!("{MODEL_MAGIC}\n");
    push_meta(&mut out, meta);
    out.push_str("tower user\n");
    push_tower_body(&mut out, user);
    out.push_str("tower item\n");
    push_tower_body(&mut out, item);
    out
}

struct Lines<'a> {
    path: &'a Path,
    iter: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str, path: &'a Path) -> Self {
        Self {
            path,
            iter: text.lines().enumerate().peekable(),
        }
    }

    fn next(&mut self) -> Result<(usize, &'a str)> {
        match self.iter.next() {
            Some((i, l)) => Ok((i + 1, l)),
            None => Err(Error::format(self.path, 0, "unexpected end of file")),
        }
    }

    fn peek(&mut self) -> Option<&'a str> {
        self.iter.peek().map(|(_, l)| *l)
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::format(self.path, line, msg)
    }

    /// key=value lines up to the first line starting with `stop`.
    fn meta_until(&mut self, stop: &str) -> Result<Meta> {
        let mut meta = Meta::new();
        while let Some(l) = self.peek() {
            if l.starts_with(stop) {
                break;
            }
            let (no, l) = self.next()?;
            let (k, v) = l.split_once('=').ok_or_else(|| self.err(no, "expected key=value"))?;
            meta.insert(k.to_string(), v.to_string());
        }
        Ok(meta)
    }

    fn matrix(&mut self, name: &str) -> Result<Tensor> {
        let (no, header) = self.next()?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        let dims = match parts.as_slice() {
            ["matrix", n, r, c] if *n == name => r.parse::<usize>().ok().zip(c.parse::<usize>().ok()),
            _ => None,
        };
        let (rows, cols) = dims.ok_or_else(|| self.err(no, format!("expected `matrix {name} ROWS COLS`")))?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (no, l) = self.next()?;
            let before = data.len();
            for tok in l.split_whitespace() {
                data.push(f64::from_str(tok).map_err(|_| self.err(no, format!("bad number {tok:?}")))?);
            }
            if data.len() - before != cols {
                return Err(self.err(no, format!("expected {cols} values in {name} row")));
            }
        }
        Tensor::from_vec(rows, cols, data).map_err(Error::from)
    }

    fn tower_body(&mut self) -> Result<TowerParams> {
        let settings = self.meta_until("matrix")?;
        let context: ContextMode = settings
            .get("tower_context")
            .map(|s| s.parse())
            .transpose()?
            .unwrap_or_default();
        let train_embeddings = settings
            .get("tower_train_embeddings")
            .map(|s| s == "true")
            .unwrap_or(false);
        let tower = TowerParams {
            attention: self.matrix("attention")?,
            projection: self.matrix("projection")?,
            bias: self.matrix("bias")?,
            aspects: self.matrix("aspects")?,
            context,
            train_embeddings,
        };
        let (no, l) = self.next()?;
        if l != "end" {
            return Err(self.err(no, "expected `end`"));
        }
        tower.validate()?;
        Ok(tower)
    }

    fn magic(&mut self, magic: &str) -> Result<()> {
        let (no, l) = self.next()?;
        if l != magic {
            return Err(self.err(no, format!("missing {magic} header")));
        }
        Ok(())
    }

    fn expect(&mut self, line: &str) -> Result<()> {
        let (no, l) = self.next()?;
        if l != line {
            return Err(self.err(no, format!("expected `{line}`")));
        }
        Ok(())
    }
}

/// `path` only labels error messages.
pub fn tower_from_str(text: &str, path: &Path) -> Result<(TowerParams, Meta)> {
    let mut lines = Lines::new(text, path);
    lines.magic(TOWER_MAGIC)?;
    let meta = lines.meta_until("tower_context=")?;
    let tower = lines.tower_body()?;
    Ok((tower, meta))
}

/// Returns the user tower, the item tower and the model metadata.
pub fn model_from_str(text: &str, path: &Path) -> Result<(TowerParams, TowerParams, Meta)> {
    let mut lines = Lines::new(text, path);
    lines.magic(MODEL_MAGIC)?;
    let meta = lines.meta_until("tower ")?;
    lines.expect("tower user")?;
    let user = lines.tower_body()?;
    lines.expect("tower item")?;
    let item = lines.tower_body()?;
    Ok((user, item, meta))
}

pub fn save_tower(path: &Path, tower: &TowerParams, meta: &Meta) -> Result<()> {
    write_atomic(path, tower_to_string(tower, meta).as_bytes())
}

pub fn load_tower(path: &Path) -> Result<(TowerParams, Meta)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    tower_from_str(&text, path)
}

pub fn save_model(path: &Path, user: &TowerParams, item: &TowerParams, meta: &Meta) -> Result<()> {
    write_atomic(path, model_to_string(user, item, meta).as_bytes())
}

pub fn load_model(path: &Path) -> Result<(TowerParams, TowerParams, Meta)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_str(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tower() -> TowerParams {
        let aspects = Tensor::from_rows(&[vec![0.1, -2.5e-7], vec![1.0 / 3.0, 7.0]]).unwrap();
        let mut t = TowerParams::with_aspects(aspects);
        t.bias.set(1, 0, -0.123456789012345);
        t.context = ContextMode::Sum;
        t
    }

    #[test]
    fn tower_round_trip_is_exact() {
        let mut meta = Meta::new();
        meta.insert("seed".into(), "7".into());
        let text = tower_to_string(&tower(), &meta);
        let (back, m) = tower_from_str(&text, Path::new("t")).unwrap();
        assert_eq!(back, tower());
        assert_eq!(m, meta);
        assert_eq!(tower_to_string(&back, &m), text);
    }

    #[test]
    fn model_round_trip() {
        let mut meta = Meta::new();
        meta.insert("embeddings".into(), "emb.txt".into());
        let mut item = tower();
        item.context = ContextMode::Mean;
        let text = model_to_string(&tower(), &item, &meta);
        let (u, i, m) = model_from_str(&text, Path::new("m")).unwrap();
        assert_eq!((u, i, m), (tower(), item, meta));
    }

    #[test]
    fn rejects_wrong_magic_and_truncation() {
        let text = tower_to_string(&tower(), &Meta::new());
        assert!(model_from_str(&text, Path::new("m")).is_err());
        let cut = &text[..text.len() - 10];
        assert!(tower_from_str(cut, Path::new("t")).is_err());
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
