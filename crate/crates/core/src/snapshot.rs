//! Snapshot container.
//!
//! A UTF-8 header of `key: value` lines opened by `spinor-flow-snapshot v1` and closed by
//! `end`, followed by the fields as raw little-endian `f64`, node-major, in header order:
//!
//! ```text
//! spinor-flow-snapshot v1
//! n: 2
//! k: 1
//! sizes: 64,64
//! lengths: 6.283185307179586,6.283185307179586
//! order: 2
//! t: 0
//! field: g real 4
//! field: frame real 4
//! field: psi complex 2
//! field: h form1 2
//! field: phi real 1
//! end
//! ```
//!
//! `complex` fields store `re, im` pairs, so a field with `c` components occupies `2c` values
//! per node. `t` and the lengths are printed with `{:?}`, which round-trips exactly.

use std::io::Write;
use std::path::Path;

use crate::exterior::FormField;
use crate::flow::FlowState;
use crate::grid::{ComplexField, Grid, RealField};
use crate::{Error, Result, C64};

pub const MAGIC: &str = "spinor-flow-snapshot v1";

#[derive(Clone, Debug, PartialEq)]
pub struct FieldEntry {
    pub name: String,
    pub kind: String,
    pub ncomp: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotHeader {
    pub n: usize,
    pub k: usize,
    pub sizes: Vec<usize>,
    pub lengths: Vec<f64>,
    pub order: usize,
    pub t: f64,
    pub fields: Vec<FieldEntry>,
}

impl SnapshotHeader {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.sizes.clone(), self.lengths.clone(), self.order)
    }

    fn node_count(&self) -> usize {
        self.sizes.iter().product()
    }

    fn values_per_node(entry: &FieldEntry) -> usize {
        if entry.kind == "complex" {
            2 * entry.ncomp
        } else {
            entry.ncomp
        }
    }

    pub fn payload_len(&self) -> usize {
        self.fields.iter().map(|f| 8 * self.node_count() * Self::values_per_node(f)).sum()
    }

    pub fn text(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        let mut s = format!("{MAGIC}\nn: {}\nk: {}\n", self.n, self.k);
        s += &format!("sizes: {}\n", join(self.sizes.iter().map(|x| x.to_string()).collect()));
        s += &format!("lengths: {}\n", join(self.lengths.iter().map(|x| format!("{x:?}")).collect()));
        s += &format!("order: {}\nt: {:?}\n", self.order, self.t);
        for f in &self.fields {
            s += &format!("field: {} {} {}\n", f.name, f.kind, f.ncomp);
        }
        s + "end\n"
    }
}

pub fn header_of(state: &FlowState) -> SnapshotHeader {
    let grid = state.grid();
    let entry = |name: &str, kind: String, ncomp| FieldEntry { name: name.into(), kind, ncomp };
    SnapshotHeader {
        n: state.dim(),
        k: state.degree(),
        sizes: grid.sizes().to_vec(),
        lengths: grid.lengths().to_vec(),
        order: grid.order(),
        t: state.t,
        fields: vec![
            entry("g", "real".into(), state.g.ncomp),
            entry("frame", "real".into(), state.frame.ncomp),
            entry("psi", "complex".into(), state.psi.ncomp),
            entry("h", format!("form{}", state.degree()), state.h.field.ncomp),
            entry("phi", "real".into(), state.phi.ncomp),
        ],
    }
}

pub fn to_bytes(state: &FlowState) -> Vec<u8> {
    let header = header_of(state);
    let mut out = header.text().into_bytes();
    out.reserve(header.payload_len());
    for v in state.g.data.iter().chain(&state.frame.data) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for z in &state.psi.data {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    for v in state.h.field.data.iter().chain(&state.phi.data) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_state(path: &Path, state: &FlowState) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&to_bytes(state))?;
    Ok(())
}

fn bad(offset: usize, msg: impl Into<String>) -> Error {
    Error::Snapshot { offset, msg: msg.into() }
}

/// Parses the header; returns it with the byte offset where the payload starts.
pub fn parse_header(bytes: &[u8]) -> Result<(SnapshotHeader, usize)> {
    let mut pos = 0;
    let next_line = |pos: &mut usize| -> Result<(usize, String)> {
        let start = *pos;
        let end = bytes[start..].iter().position(|&b| b == b'\n').ok_or_else(|| bad(start, "unterminated header line"))?;
        let line = std::str::from_utf8(&bytes[start..start + end]).map_err(|_| bad(start, "header is not UTF-8"))?;
        *pos = start + end + 1;
        Ok((start, line.to_string()))
    };
    let (at, magic) = next_line(&mut pos)?;
    if magic != MAGIC {
        return Err(bad(at, format!("expected `{MAGIC}`")));
    }
    let mut h = SnapshotHeader { n: 0, k: 0, sizes: vec![], lengths: vec![], order: 2, t: 0.0, fields: vec![] };
    loop {
        let (at, line) = next_line(&mut pos)?;
        if line == "end" {
            break;
        }
        let (key, v) = line.split_once(':').ok_or_else(|| bad(at, "expected `key: value`"))?;
        let v = v.trim();
        let num_err = |_| bad(at, format!("bad value for `{key}`"));
        match key {
            "n" => h.n = v.parse().map_err(num_err)?,
            "k" => h.k = v.parse().map_err(num_err)?,
            "order" => h.order = v.parse().map_err(num_err)?,
            "t" => h.t = v.parse().map_err(|_| bad(at, "bad value for `t`"))?,
            "sizes" => {
                h.sizes = v.split(',').map(|s| s.trim().parse()).collect::<std::result::Result<_, _>>().map_err(|_| bad(at, "bad sizes"))?
            }
            "lengths" => {
                h.lengths =
                    v.split(',').map(|s| s.trim().parse()).collect::<std::result::Result<_, _>>().map_err(|_| bad(at, "bad lengths"))?
            }
            "field" => {
                let parts: Vec<&str> = v.split_whitespace().collect();
                let [name, kind, ncomp] = parts[..] else {
                    return Err(bad(at, "field entry needs `name kind ncomp`"));
                };
                let ncomp = ncomp.parse().map_err(|_| bad(at, "bad component count"))?;
                h.fields.push(FieldEntry { name: name.into(), kind: kind.into(), ncomp });
            }
            _ => return Err(bad(at, format!("unknown header key `{key}`"))),
        }
    }
    if h.sizes.len() != h.n || h.lengths.len() != h.n {
        return Err(bad(0, "sizes/lengths do not match n"));
    }
    Ok((h, pos))
}

pub fn from_bytes(bytes: &[u8]) -> Result<FlowState> {
    let (header, start) = parse_header(bytes)?;
    let need = start + header.payload_len();
    if bytes.len() < need {
        return Err(bad(bytes.len(), format!("payload truncated: {} bytes, header declares {need}", bytes.len())));
    }
    if bytes.len() > need {
        return Err(bad(need, "trailing bytes after payload"));
    }
    let grid = header.grid().map_err(|e| bad(0, e.to_string()))?;
    let nodes = header.node_count();
    let mut pos = start;
    let mut take = |count: usize| -> Vec<f64> {
        let v = bytes[pos..pos + 8 * count].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        pos += 8 * count;
        v
    };
    let mut real = |name: &str, expected_kind: &str| -> Result<RealField> {
        let e = header.fields.iter().find(|f| f.name == name).ok_or_else(|| bad(0, format!("missing field `{name}`")))?;
        if e.kind != expected_kind {
            return Err(bad(0, format!("field `{name}` has kind `{}`", e.kind)));
        }
        Ok(RealField { grid: grid.clone(), ncomp: e.ncomp, data: take(nodes * SnapshotHeader::values_per_node(e)) })
    };
    let names: Vec<&str> = header.fields.iter().map(|f| f.name.as_str()).collect();
    if names != ["g", "frame", "psi", "h", "phi"] {
        return Err(bad(0, format!("unexpected field list {names:?}")));
    }
    let g = real("g", "real")?;
    let frame = real("frame", "real")?;
    let psi_flat = real("psi", "complex")?;
    let psi = ComplexField {
        grid: grid.clone(),
        ncomp: psi_flat.ncomp,
        data: psi_flat.data.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect(),
    };
    let h = real("h", &format!("form{}", header.k))?;
    let phi = real("phi", "real")?;
    let mut state = FlowState::new(g, frame, psi, FormField::new(header.k, h)?, phi).map_err(|e| bad(0, e.to_string()))?;
    state.t = header.t;
    Ok(state)
}

pub fn read_state(path: &Path) -> Result<FlowState> {
    from_bytes(&std::fs::read(path)?)
}
