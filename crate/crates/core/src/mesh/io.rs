//! The mesh-json format:
//!
//! ```json
//! {"vertices": [[0.0, 0.0], ...],
//!  "cells": [[0, 1, 4, 3], ...],
//!  "boundary": [{"edge": [0, 1], "tag": "wall"}, ...]}
//! ```
//!
//! Indices are 0-based. Boundary edges not listed keep the default tag.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PolygonalMesh;
use crate::{Error, Point, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeshFile {
    vertices: Vec<Point>,
    cells: Vec<Vec<usize>>,
    #[serde(default)]
    boundary: Vec<BoundaryRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundaryRecord {
    edge: [usize; 2],
    tag: String,
}

fn file_error(context: impl Into<String>, message: impl Into<String>) -> Error {
    Error::MeshFile { context: context.into(), message: message.into() }
}

pub fn to_json(mesh: &PolygonalMesh) -> String {
    let file = MeshFile {
        vertices: mesh.vertices().to_vec(),
        cells: mesh.cells().to_vec(),
        boundary: mesh
            .boundary_edges()
            .iter()
            .map(|b| BoundaryRecord { edge: b.vertices, tag: b.tag.clone() })
            .collect(),
    };
    serde_json::to_string(&file).expect("mesh serializes")
}

pub fn from_json(text: &str) -> Result<PolygonalMesh> {
    let file: MeshFile = serde_json::from_str(text)
        .map_err(|e| file_error(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
    let nv = file.vertices.len();
    for (i, p) in file.vertices.iter().enumerate() {
        if !p[0].is_finite() || !p[1].is_finite() {
            return Err(file_error(format!("vertices[{i}]"), "coordinate is not finite"));
        }
    }
    for (c, cell) in file.cells.iter().enumerate() {
        for (k, &v) in cell.iter().enumerate() {
            if v >= nv {
                return Err(file_error(
                    format!("cells[{c}][{k}]"),
                    format!("cell {c} references vertex {v}, but only {nv} vertices exist"),
                ));
            }
        }
    }
    for (i, b) in file.boundary.iter().enumerate() {
        if let Some(&v) = b.edge.iter().find(|&&v| v >= nv) {
            return Err(file_error(format!("boundary[{i}].edge"), format!("vertex {v} out of range")));
        }
    }
    let tags: Vec<([usize; 2], String)> = file.boundary.into_iter().map(|b| (b.edge, b.tag)).collect();
    PolygonalMesh::with_tags(file.vertices, file.cells, &tags)
}

pub fn write(mesh: &PolygonalMesh, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_json(mesh))?;
    Ok(())
}

pub fn read(path: impl AsRef<Path>) -> Result<PolygonalMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| file_error(path.display().to_string(), e.to_string()))?;
    from_json(&text)
}
