//! Plain-text mesh format.
//!
//! ```text
//! # comment
//! NODES 4
//! 1 1.0 0.0
//! ...
//! ELEMENTS 2
//! 1 1 2 3
//! ...
//! ELECTRODES 2
//! 1 1 2
//! 2 3 4 4 1
//! ```
//!
//! Indices are 1-based and whitespace-delimited. An `ELECTRODES` row lists
//! the electrode index followed by the node pairs of its boundary edges.
//! The count after a section keyword is optional on input. Element order
//! is preserved, which matters for the element-order Haar transform.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::TriMesh;
use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Nodes,
    Elements,
    Electrodes,
}

pub fn read_mesh(path: &Path) -> Result<TriMesh> {
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text, path)
}

pub fn write_mesh(mesh: &TriMesh, path: &Path) -> Result<()> {
    std::fs::write(path, format_mesh(mesh))?;
    Ok(())
}

pub fn parse_mesh(text: &str, origin: &Path) -> Result<TriMesh> {
    let err = |line: usize, msg: String| Error::MeshFile { path: PathBuf::from(origin), line, msg };

    let mut section = Section::None;
    let mut nodes = Vec::new();
    let mut elements = Vec::new();
    let mut electrodes: Vec<Vec<[usize; 2]>> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let head = tokens.next().unwrap();
        let keyword = match head.to_ascii_uppercase().as_str() {
            "NODES" => Some(Section::Nodes),
            "ELEMENTS" => Some(Section::Elements),
            "ELECTRODES" => Some(Section::Electrodes),
            _ => None,
        };
        if let Some(s) = keyword {
            section = s;
            continue;
        }

        let index: usize = head.parse().map_err(|_| err(lineno, format!("expected an index, found `{head}`")))?;
        let rest: Vec<&str> = tokens.collect();
        match section {
            Section::None => return Err(err(lineno, "data before the first section keyword".into())),
            Section::Nodes => {
                expect_index(index, nodes.len() + 1).map_err(|m| err(lineno, m))?;
                let [x, y] = parse_fixed::<f64, 2>(&rest).map_err(|m| err(lineno, m))?;
                nodes.push([x, y]);
            }
            Section::Elements => {
                expect_index(index, elements.len() + 1).map_err(|m| err(lineno, m))?;
                let tri = parse_fixed::<usize, 3>(&rest).map_err(|m| err(lineno, m))?;
                elements.push(to_zero_based(tri).map_err(|m| err(lineno, m))?);
            }
            Section::Electrodes => {
                expect_index(index, electrodes.len() + 1).map_err(|m| err(lineno, m))?;
                if rest.is_empty() || rest.len() % 2 != 0 {
                    return Err(err(lineno, "electrode row needs node pairs".into()));
                }
                let mut pairs = Vec::with_capacity(rest.len() / 2);
                for chunk in rest.chunks(2) {
                    let pair = parse_fixed::<usize, 2>(chunk).map_err(|m| err(lineno, m))?;
                    pairs.push(to_zero_based(pair).map_err(|m| err(lineno, m))?);
                }
                electrodes.push(pairs);
            }
        }
    }
    if nodes.is_empty() || elements.is_empty() {
        return Err(err(0, "missing NODES or ELEMENTS section".into()));
    }
    TriMesh::from_parts(nodes, elements, electrodes)
}

pub fn format_mesh(mesh: &TriMesh) -> String {
    let mut out = String::new();
    writeln!(out, "NODES {}", mesh.node_count()).unwrap();
    for (i, [x, y]) in mesh.nodes().iter().enumerate() {
        // {:?} on f64 is the shortest round-tripping representation
        writeln!(out, "{} {:?} {:?}", i + 1, x, y).unwrap();
    }
    writeln!(out, "ELEMENTS {}", mesh.element_count()).unwrap();
    for (i, [a, b, c]) in mesh.elements().iter().enumerate() {
        writeln!(out, "{} {} {} {}", i + 1, a + 1, b + 1, c + 1).unwrap();
    }
    writeln!(out, "ELECTRODES {}", mesh.electrode_count()).unwrap();
    for (l, pairs) in mesh.electrode_node_pairs().iter().enumerate() {
        write!(out, "{}", l + 1).unwrap();
        for [a, b] in pairs {
            write!(out, " {} {}", a + 1, b + 1).unwrap();
        }
        out.push('\n');
    }
    out
}

fn expect_index(found: usize, expected: usize) -> std::result::Result<(), String> {
    if found == expected {
        Ok(())
    } else {
        Err(format!("expected index {expected}, found {found}"))
    }
}

fn parse_fixed<T: std::str::FromStr, const N: usize>(tokens: &[&str]) -> std::result::Result<[T; N], String> {
    if tokens.len() != N {
        return Err(format!("expected {N} values, found {}", tokens.len()));
    }
    let parsed: Vec<T> = tokens
        .iter()
        .map(|t| t.parse::<T>().map_err(|_| format!("cannot parse `{t}`")))
        .collect::<std::result::Result<_, _>>()?;
    parsed.try_into().map_err(|_| unreachable!())
}

fn to_zero_based<const N: usize>(idx: [usize; N]) -> std::result::Result<[usize; N], String> {
    let mut out = idx;
    for v in &mut out {
        if *v == 0 {
            return Err("indices are 1-based".into());
        }
        *v -= 1;
    }
    Ok(out)
}
