//! Clinical-domain taxonomy.
//!
//! The text format is one node per line, two spaces of indentation per level,
//! `#` to end of line is a comment. A node without children is a leaf; every
//! question and Rosetta question is attached to exactly one leaf.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ParseError;

pub const MAX_DEPTH: usize = 4;

/// Names of the level-1 domains a complete ontology must have.
pub const ROOT_DOMAINS: [&str; 3] = ["Cognitive", "Motor", "Somatic"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OntologyNode {
    pub name: String,
    /// 1-based depth.
    pub level: usize,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
}

impl OntologyNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// Path of node names from a level-1 domain down to a leaf.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LeafPath(Vec<String>);

impl LeafPath {
    pub fn new<I, S>(parts: I) -> Result<Self, String>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let parts: Vec<String> = parts.into_iter().map(Into::into).collect();
        if parts.is_empty() || parts.len() > MAX_DEPTH {
            return Err(format!("leaf path must have 1 to {MAX_DEPTH} components"));
        }
        if let Some(bad) = parts.iter().find(|p| p.trim().is_empty() || p.contains('/')) {
            return Err(format!("invalid path component {bad:?}"));
        }
        Ok(Self(parts))
    }

    pub fn parts(&self) -> &[String] {
        &self.0
    }

    pub fn leaf(&self) -> &str {
        self.0.last().map(String::as_str).unwrap_or_default()
    }

    /// Everything above the leaf, `/`-joined. Empty for a level-1 leaf.
    pub fn base(&self) -> String {
        self.0[..self.0.len() - 1].join("/")
    }
}

impl FromStr for LeafPath {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LeafPath::new(s.split('/').map(str::trim))
    }
}

impl fmt::Display for LeafPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join("/"))
    }
}

/// Rooted forest of at most four levels. Node order follows the source file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OntologyTree {
    nodes: Vec<OntologyNode>,
}

impl OntologyTree {
    pub fn parse(source: &str) -> Result<Self, ParseError> {
        let mut tree = OntologyTree::default();
        // stack[i] is the most recent node at level i + 1
        let mut stack: Vec<NodeId> = Vec::new();

        for (index, raw) in source.lines().enumerate() {
            let line_no = index + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            if line.trim().is_empty() {
                continue;
            }
            let line = line.trim_end();
            if line.starts_with('\t') || line.trim_start_matches(' ').starts_with('\t') {
                return Err(ParseError::new(line_no, "tabs are not allowed in indentation"));
            }
            let indent = line.len() - line.trim_start_matches(' ').len();
            if indent % 2 != 0 {
                return Err(ParseError::new(
                    line_no,
                    format!("indentation of {indent} spaces is not a multiple of 2"),
                ));
            }
            let depth = indent / 2;
            let name = line.trim().to_string();
            if name.contains('/') {
                return Err(ParseError::new(line_no, format!("node name {name:?} contains '/'")));
            }
            if depth >= MAX_DEPTH {
                return Err(ParseError::new(
                    line_no,
                    format!("node {name:?} at level {} exceeds maximum depth {MAX_DEPTH}", depth + 1),
                ));
            }
            if depth > stack.len() {
                return Err(ParseError::new(
                    line_no,
                    format!("node {name:?} at level {} has no parent at level {}", depth + 1, depth),
                ));
            }
            stack.truncate(depth);
            let parent = stack.last().copied();
            let siblings: &[NodeId] = match parent {
                Some(p) => &tree.nodes[p.0].children,
                None => &[],
            };
            let duplicate = match parent {
                Some(_) => siblings.iter().any(|s| tree.nodes[s.0].name == name),
                None => tree.roots().any(|r| tree.nodes[r.0].name == name),
            };
            if duplicate {
                return Err(ParseError::new(line_no, format!("duplicate sibling name {name:?}")));
            }
            let id = NodeId(tree.nodes.len());
            tree.nodes.push(OntologyNode {
                name,
                level: depth + 1,
                parent,
                children: Vec::new(),
            });
            if let Some(p) = parent {
                tree.nodes[p.0].children.push(id);
            }
            stack.push(id);
        }

        if tree.nodes.is_empty() {
            return Err(ParseError::new(1, "ontology file contains no nodes"));
        }
        Ok(tree)
    }

    pub fn nodes(&self) -> &[OntologyNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &OntologyNode {
        &self.nodes[id.0]
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn roots(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.parent.is_none())
            .map(|(i, _)| NodeId(i))
    }

    /// Leaves in file order.
    pub fn leaves(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.is_leaf())
            .map(|(i, _)| NodeId(i))
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().count()
    }

    pub fn path(&self, id: NodeId) -> LeafPath {
        let mut parts = Vec::new();
        let mut cursor = Some(id);
        while let Some(c) = cursor {
            parts.push(self.nodes[c.0].name.clone());
            cursor = self.nodes[c.0].parent;
        }
        parts.reverse();
        LeafPath(parts)
    }

    /// Finds the node at `path`, whatever its kind.
    pub fn find(&self, path: &LeafPath) -> Option<NodeId> {
        let mut candidates: Vec<NodeId> = self.roots().collect();
        let mut found = None;
        for part in path.parts() {
            let next = candidates.iter().copied().find(|c| &self.nodes[c.0].name == part)?;
            candidates = self.nodes[next.0].children.clone();
            found = Some(next);
        }
        found
    }

    /// Resolves `path` to a leaf; interior nodes do not resolve.
    pub fn resolve(&self, path: &LeafPath) -> Option<NodeId> {
        self.find(path).filter(|id| self.nodes[id.0].is_leaf())
    }

    /// Level-1 names must be exactly the three clinical domains.
    pub fn has_standard_roots(&self) -> bool {
        let mut names: Vec<&str> = self.roots().map(|r| self.nodes[r.0].name.as_str()).collect();
        names.sort_unstable();
        names == ROOT_DOMAINS
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for node in &self.nodes {
            for _ in 1..node.level {
                out.push_str("  ");
            }
            out.push_str(&node.name);
            out.push('\n');
        }
        out
    }
}
