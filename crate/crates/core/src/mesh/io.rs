//! JSON mesh files.
//!
//! ```json
//! {
//!   "version": 1,
//!   "blocks": [{"edges": [{"kind": "line", "from": [0, 0], "to": [1, 0]}, ...]}],
//!   "interfaces": [{"a": [0, "e"], "b": [1, "w"], "orientation": "aligned"}],
//!   "boundaries": [{"block": 0, "side": "s", "tag": "wall"}]
//! }
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{validate_mesh, Block, CurvedEdge, Interface, MultiblockMesh, Orientation, Side};
use crate::error::{Error, Result};

pub const MESH_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshFile {
    pub version: u32,
    pub blocks: Vec<BlockEntry>,
    #[serde(default)]
    pub interfaces: Vec<InterfaceEntry>,
    #[serde(default)]
    pub boundaries: Vec<BoundaryEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockEntry {
    pub edges: [CurvedEdge; 4],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterfaceEntry {
    pub a: (usize, Side),
    pub b: (usize, Side),
    pub orientation: Orientation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryEntry {
    pub block: usize,
    pub side: Side,
    pub tag: String,
}

impl From<&MultiblockMesh> for MeshFile {
    fn from(mesh: &MultiblockMesh) -> Self {
        MeshFile {
            version: MESH_FORMAT_VERSION,
            blocks: mesh
                .blocks
                .iter()
                .map(|b| BlockEntry {
                    edges: b.edges.clone(),
                })
                .collect(),
            interfaces: mesh
                .interfaces
                .iter()
                .map(|i| InterfaceEntry {
                    a: i.a,
                    b: i.b,
                    orientation: i.orientation,
                })
                .collect(),
            boundaries: mesh
                .boundaries
                .iter()
                .map(|(&(block, side), tag)| BoundaryEntry {
                    block,
                    side,
                    tag: tag.clone(),
                })
                .collect(),
        }
    }
}

/// Parse and validate a mesh from JSON text.
pub fn parse_mesh(text: &str) -> Result<MultiblockMesh> {
    let file: MeshFile = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    if file.version != MESH_FORMAT_VERSION {
        return Err(Error::Schema(format!(
            "unsupported mesh format version {} (expected {MESH_FORMAT_VERSION})",
            file.version
        )));
    }
    let mut boundaries = BTreeMap::new();
    for entry in &file.boundaries {
        if boundaries
            .insert((entry.block, entry.side), entry.tag.clone())
            .is_some()
        {
            return Err(Error::Schema(format!(
                "block {} side {} tagged more than once",
                entry.block, entry.side
            )));
        }
    }
    let mesh = MultiblockMesh {
        blocks: file
            .blocks
            .into_iter()
            .map(|b| Block { edges: b.edges })
            .collect(),
        interfaces: file
            .interfaces
            .into_iter()
            .map(|i| Interface {
                a: i.a,
                b: i.b,
                orientation: i.orientation,
            })
            .collect(),
        boundaries,
    };
    let violations = validate_mesh(&mesh);
    if violations.is_empty() {
        Ok(mesh)
    } else {
        Err(Error::InvalidMesh(violations))
    }
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<MultiblockMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mesh(&text)
}

pub fn to_json(mesh: &MultiblockMesh) -> String {
    serde_json::to_string_pretty(&MeshFile::from(mesh)).expect("mesh serialization cannot fail")
}

pub fn save_mesh(mesh: &MultiblockMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_json(mesh)).map_err(|e| Error::io(path, e))
}
