//! Binary checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   4 bytes  "PCR1"
//! version u32      1
//! count   u32      number of arrays
//! per array:
//!   name_len u16, name (UTF-8), ndim u32, dims u32 × ndim,
//!   data f32 × prod(dims), row-major
//! ```
//!
//! A [`ParamStore`] is stored as: every parameter under its own name, its
//! Adam moments under `<name>.m` / `<name>.v`, and the step counter as a
//! one-element array named `opt.step`. Values are rounded to f32 on write;
//! the reader rejects unknown magic or version and trailing bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::write_atomic;

use super::{Matrix, ParamStore};

const MAGIC: &[u8; 4] = b"PCR1";
const VERSION: u32 = 1;

fn push_array(out: &mut Vec<u8>, name: &str, dims: &[u32], data: impl Iterator<Item = f64>) {
    out.extend_from_slice(&(name.len() as u16).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &d in dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    for v in data {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

/// Writes a parameter store (parameters, moments, step counter) to `path`.
pub fn save_checkpoint(path: &Path, store: &ParamStore) -> Result<()> {
    let names: Vec<&str> = store.names().collect();
    let count = names.len() * 3 + 1;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(count as u32).to_le_bytes());
    for name in names {
        let p = store.get(name).expect("listed name");
        let (m, v) = store.moments(name).expect("moments tracked with params");
        let dims = [p.rows() as u32, p.cols() as u32];
        push_array(&mut out, name, &dims, p.data().iter().copied());
        push_array(&mut out, &format!("{name}.m"), &dims, m.data().iter().copied());
        push_array(&mut out, &format!("{name}.v"), &dims, v.data().iter().copied());
    }
    push_array(&mut out, "opt.step", &[1], std::iter::once(store.step() as f64));
    write_atomic(path, &out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::parse(
                self.path,
                0,
                format!("truncated checkpoint while reading {what}"),
            ));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Reads a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(path: &Path) -> Result<ParamStore> {
    let buf = fs::read(path)?;
    let mut r = Reader {
        buf: &buf,
        pos: 0,
        path,
    };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::parse(path, 0, "not a PCR1 checkpoint (bad magic)"));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::parse(
            path,
            0,
            format!("unsupported checkpoint version {version} (expected {VERSION})"),
        ));
    }
    let count = r.u32("array count")?;

    let mut arrays: BTreeMap<String, (Vec<u32>, Vec<f64>)> = BTreeMap::new();
    for _ in 0..count {
        let name_len = r.u16("name length")? as usize;
        let name = std::str::from_utf8(r.take(name_len, "name")?)
            .map_err(|_| Error::parse(path, 0, "array name is not UTF-8"))?
            .to_string();
        let ndim = r.u32("ndim")? as usize;
        let mut dims = Vec::with_capacity(ndim);
        let mut len = 1usize;
        for _ in 0..ndim {
            let d = r.u32("dim")?;
            dims.push(d);
            len = len.saturating_mul(d as usize);
        }
        let raw = r.take(len * 4, &format!("data of {name:?}"))?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        if arrays.insert(name.clone(), (dims, data)).is_some() {
            return Err(Error::parse(path, 0, format!("duplicate array {name:?}")));
        }
    }
    if r.pos != buf.len() {
        return Err(Error::parse(
            path,
            0,
            format!("{} trailing bytes after the last array", buf.len() - r.pos),
        ));
    }

    // Reassemble the store: plain names are parameters, .m/.v are moments,
    // opt.step is the counter.
    let step = match arrays.remove("opt.step") {
        Some((_, data)) if data.len() == 1 => data[0] as u64,
        Some(_) => return Err(Error::parse(path, 0, "opt.step must hold one value")),
        None => return Err(Error::parse(path, 0, "checkpoint lacks opt.step")),
    };

    let matrix = |path: &Path, name: &str, dims: &[u32], data: Vec<f64>| -> Result<Matrix> {
        if dims.len() != 2 {
            return Err(Error::parse(
                path,
                0,
                format!("array {name:?} must be 2-dimensional, got {} dims", dims.len()),
            ));
        }
        Matrix::from_vec(dims[0] as usize, dims[1] as usize, data)
    };

    let mut store = ParamStore::new();
    let names: Vec<String> = arrays
        .keys()
        .filter(|n| !n.ends_with(".m") && !n.ends_with(".v"))
        .cloned()
        .collect();
    for name in names {
        let (dims, data) = arrays.remove(&name).expect("listed key");
        let p = matrix(path, &name, &dims, data)?;
        let shape = p.shape();
        store.insert(&name, p);
        let mut moment = |suffix: &str| -> Result<Matrix> {
            let key = format!("{name}.{suffix}");
            match arrays.remove(&key) {
                Some((dims, data)) => {
                    let m = matrix(path, &key, &dims, data)?;
                    if m.shape() != shape {
                        return Err(Error::parse(
                            path,
                            0,
                            format!("moment {key:?} shape does not match its parameter"),
                        ));
                    }
                    Ok(m)
                }
                None => Err(Error::parse(path, 0, format!("missing moment array {key:?}"))),
            }
        };
        let m = moment("m")?;
        let v = moment("v")?;
        store.set_state(&name, m, v);
    }
    if let Some(orphan) = arrays.keys().next() {
        return Err(Error::parse(
            path,
            0,
            format!("moment array {orphan:?} has no matching parameter"),
        ));
    }
    store.set_step(step);
    Ok(store)
}
