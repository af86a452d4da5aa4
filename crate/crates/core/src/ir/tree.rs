// SPDX-License-Identifier: Apache-2.0
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{IrError, ModuleDef, Result};

/// Dot-separated hierarchical instance path; the root segment is the top
/// module name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InstancePath(String);

impl InstancePath {
    pub fn root(top: &str) -> Self {
        Self(top.to_string())
    }

    pub fn new(path: impl Into<String>) -> Self {
        Self(path.into())
    }

    pub fn child(&self, name: &str) -> Self {
        Self(format!("{}.{}", self.0, name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn segments(&self) -> impl Iterator<Item = &str> {
        self.0.split('.')
    }

    pub fn depth(&self) -> usize {
        self.0.matches('.').count()
    }

    pub fn parent(&self) -> Option<Self> {
        self.0.rfind('.').map(|i| Self(self.0[..i].to_string()))
    }

    /// Last segment: the instance name inside its parent module.
    pub fn leaf(&self) -> &str {
        self.0.rsplit('.').next().unwrap_or(&self.0)
    }

    /// True when `self` is a strict ancestor of `other`.
    pub fn is_ancestor_of(&self, other: &InstancePath) -> bool {
        other.0.len() > self.0.len()
            && other.0.starts_with(&self.0)
            && other.0.as_bytes()[self.0.len()] == b'.'
    }

    /// Path below the root joined with `_`, usable as an identifier prefix.
    pub fn flat_name(&self) -> String {
        match self.0.find('.') {
            Some(i) => self.0[i + 1..].replace('.', "_"),
            None => self.0.clone(),
        }
    }
}

impl fmt::Display for InstancePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    pub path: InstancePath,
    pub module: String,
    pub parent: Option<InstancePath>,
    pub children: Vec<InstancePath>,
}

/// The elaborated instance hierarchy, in depth-first pre-order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceTree {
    root: InstancePath,
    nodes: IndexMap<InstancePath, TreeNode>,
}

impl InstanceTree {
    pub(crate) fn build(top: &str, modules: &IndexMap<String, ModuleDef>) -> Result<Self> {
        let root = InstancePath::root(top);
        let mut nodes = IndexMap::new();
        let mut stack = vec![top.to_string()];
        visit(&root, top, None, modules, &mut nodes, &mut stack)?;
        Ok(Self { root, nodes })
    }

    pub fn root(&self) -> &InstancePath {
        &self.root
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, path: &InstancePath) -> Option<&TreeNode> {
        self.nodes.get(path)
    }

    pub fn contains(&self, path: &InstancePath) -> bool {
        self.nodes.contains_key(path)
    }

    pub fn module_of(&self, path: &InstancePath) -> Option<&str> {
        self.nodes.get(path).map(|n| n.module.as_str())
    }

    pub fn nodes(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.values()
    }

    pub fn paths(&self) -> impl Iterator<Item = &InstancePath> {
        self.nodes.keys()
    }

    pub fn leaves(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.values().filter(|n| n.children.is_empty())
    }

    /// Ancestors of `path` from its parent up to the root.
    pub fn ancestors(&self, path: &InstancePath) -> Vec<InstancePath> {
        let mut out = Vec::new();
        let mut cur = self.nodes.get(path).and_then(|n| n.parent.clone());
        while let Some(p) = cur {
            cur = self.nodes.get(&p).and_then(|n| n.parent.clone());
            out.push(p);
        }
        out
    }

    /// Lowest common ancestor (a node counts as its own ancestor).
    pub fn lca<'a>(&self, paths: impl IntoIterator<Item = &'a InstancePath>) -> Option<InstancePath> {
        let mut iter = paths.into_iter();
        let first = iter.next()?;
        let mut chain: Vec<&str> = first.segments().collect();
        for p in iter {
            let common = chain.iter().zip(p.segments()).take_while(|(a, b)| **a == *b).count();
            chain.truncate(common);
        }
        if chain.is_empty() {
            return None;
        }
        let lca = InstancePath::new(chain.join("."));
        self.contains(&lca).then_some(lca)
    }

    /// Number of tree nodes instantiating `module`.
    pub fn instance_count(&self, module: &str) -> usize {
        self.nodes.values().filter(|n| n.module == module).count()
    }
}

fn visit(
    path: &InstancePath,
    module: &str,
    parent: Option<InstancePath>,
    modules: &IndexMap<String, ModuleDef>,
    nodes: &mut IndexMap<InstancePath, TreeNode>,
    stack: &mut Vec<String>,
) -> Result<()> {
    let def = &modules[module];
    nodes.insert(
        path.clone(),
        TreeNode {
            path: path.clone(),
            module: module.to_string(),
            parent,
            children: def.instances.iter().map(|i| path.child(&i.name)).collect(),
        },
    );
    for inst in &def.instances {
        if stack.contains(&inst.module) {
            return Err(IrError::RecursiveHierarchy(inst.module.clone()));
        }
        stack.push(inst.module.clone());
        visit(&path.child(&inst.name), &inst.module, Some(path.clone()), modules, nodes, stack)?;
        stack.pop();
    }
    Ok(())
}
