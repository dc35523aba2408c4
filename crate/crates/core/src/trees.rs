//! Derivation trees, occurrence counting, and the complete-data estimator.
//!
//! Trees are unordered. [`DerivationTree::node`] sorts children by
//! `(type, subtree)` so structurally equal trees compare equal.
//!
//! Text form: `Name` for a leaf, `Name(child child ...)` for an internal node.
//! An observed survivor is an explicit emission child, e.g. `T1(T1)`.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::model::{ModelStructure, OffspringModel, TypeTable};
use crate::vector::CountVector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("tree syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown type `{0}`")]
    UnknownType(String),
    #[error("terminal `{0}` cannot have children")]
    TerminalWithChildren(String),
    #[error("unary node `{0}` must have a leaf child")]
    InteriorUnary(String),
    #[error("bare nonterminal leaf `{0}` under a branching node; survivors must be emitted")]
    BareNonterminalLeaf(String),
    #[error("no production `{0}` in the model")]
    NoMatchingProduction(String),
    #[error("nonterminal `{0}` never occurs; its distribution is undefined")]
    UndefinedDistribution(String),
    #[error("no trees given")]
    Empty,
    #[error("line {line}: {source}")]
    Line {
        line: usize,
        #[source]
        source: Box<TreeError>,
    },
}

/// A node and its (canonically ordered) subtrees. Leaves have no children.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DerivationTree {
    ty: usize,
    children: Vec<DerivationTree>,
}

impl DerivationTree {
    pub fn leaf(ty: usize) -> Self {
        DerivationTree {
            ty,
            children: Vec::new(),
        }
    }

    pub fn node(ty: usize, mut children: Vec<DerivationTree>) -> Self {
        children.sort();
        DerivationTree { ty, children }
    }

    pub fn ty(&self) -> usize {
        self.ty
    }

    pub fn children(&self) -> &[DerivationTree] {
        &self.children
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Offspring vector of the production applied here; `None` for leaves.
    pub fn offspring(&self, dim: usize) -> Option<CountVector> {
        if self.is_leaf() {
            return None;
        }
        let mut v = CountVector::zeros(dim);
        for c in &self.children {
            v.increment(c.ty);
        }
        Some(v)
    }

    pub fn num_nodes(&self) -> usize {
        1 + self.children.iter().map(Self::num_nodes).sum::<usize>()
    }

    pub fn num_leaves(&self) -> usize {
        if self.is_leaf() {
            1
        } else {
            self.children.iter().map(Self::num_leaves).sum()
        }
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(Self::depth).max().unwrap_or(0)
    }

    /// Shape rules that hold without a model: internal nodes are
    /// nonterminal and a unary node's child is a leaf.
    pub fn validate_shape(&self, types: &TypeTable) -> Result<(), TreeError> {
        if self.is_leaf() {
            return Ok(());
        }
        if types.is_terminal(self.ty) {
            return Err(TreeError::TerminalWithChildren(types.name(self.ty).into()));
        }
        if self.children.len() == 1 && !self.children[0].is_leaf() {
            return Err(TreeError::InteriorUnary(types.name(self.ty).into()));
        }
        self.children.iter().try_for_each(|c| c.validate_shape(types))
    }

    /// Shape rules plus: every applied production exists in `structure`,
    /// and branching nodes have no bare nonterminal leaves.
    pub fn validate(&self, structure: &ModelStructure) -> Result<(), TreeError> {
        self.validate_shape(structure.types())?;
        self.validate_rules(structure)
    }

    fn validate_rules(&self, structure: &ModelStructure) -> Result<(), TreeError> {
        let types = structure.types();
        let Some(offspring) = self.offspring(types.dim()) else {
            return Ok(());
        };
        if structure.find(self.ty, &offspring).is_none() {
            return Err(TreeError::NoMatchingProduction(production_text(
                types, self.ty, &offspring,
            )));
        }
        if self.children.len() >= 2 {
            if let Some(bare) = self
                .children
                .iter()
                .find(|c| c.is_leaf() && !types.is_terminal(c.ty))
            {
                return Err(TreeError::BareNonterminalLeaf(types.name(bare.ty).into()));
            }
        }
        self.children
            .iter()
            .try_for_each(|c| c.validate_rules(structure))
    }
}

fn production_text(types: &TypeTable, parent: usize, offspring: &CountVector) -> String {
    let children: Vec<&str> = offspring.expand().into_iter().map(|t| types.name(t)).collect();
    format!("{} -> {}", types.name(parent), children.join(" "))
}

/// Leaf counts per type.
pub fn yield_vector(tree: &DerivationTree, dim: usize) -> CountVector {
    fn walk(t: &DerivationTree, acc: &mut CountVector) {
        if t.is_leaf() {
            acc.increment(t.ty);
        }
        for c in &t.children {
            walk(c, acc);
        }
    }
    let mut acc = CountVector::zeros(dim);
    walk(tree, &mut acc);
    acc
}

/// Node counts per nonterminal type and per applied production.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TreeCounts {
    pub type_counts: BTreeMap<usize, u64>,
    pub production_counts: BTreeMap<(usize, CountVector), u64>,
}

impl TreeCounts {
    pub fn merge(&mut self, other: &TreeCounts) {
        for (&v, &c) in &other.type_counts {
            *self.type_counts.entry(v).or_default() += c;
        }
        for (k, &c) in &other.production_counts {
            *self.production_counts.entry(k.clone()).or_default() += c;
        }
    }

    pub fn type_count(&self, v: usize) -> u64 {
        self.type_counts.get(&v).copied().unwrap_or(0)
    }

    pub fn production_count(&self, parent: usize, offspring: &CountVector) -> u64 {
        self.production_counts
            .get(&(parent, offspring.clone()))
            .copied()
            .unwrap_or(0)
    }
}

pub fn count_occurrences(tree: &DerivationTree, dim: usize) -> TreeCounts {
    fn walk(t: &DerivationTree, dim: usize, acc: &mut TreeCounts) {
        if let Some(offspring) = t.offspring(dim) {
            *acc.type_counts.entry(t.ty).or_default() += 1;
            *acc.production_counts.entry((t.ty, offspring)).or_default() += 1;
        }
        for c in &t.children {
            walk(c, dim, acc);
        }
    }
    let mut acc = TreeCounts::default();
    walk(tree, dim, &mut acc);
    acc
}

/// Ratio estimator `c(v -> A) / c(v)` over fully observed trees.
///
/// Rules of `structure` that never occur get probability zero. A nonterminal
/// that never occurs is an error rather than a silent fallback.
pub fn complete_data_mle(
    trees: &[DerivationTree],
    structure: &Arc<ModelStructure>,
) -> Result<OffspringModel, TreeError> {
    if trees.is_empty() {
        return Err(TreeError::Empty);
    }
    let types = structure.types();
    let mut counts = TreeCounts::default();
    for tree in trees {
        tree.validate(structure)?;
        counts.merge(&count_occurrences(tree, types.dim()));
    }
    let mut probs = vec![0.0; structure.len()];
    for v in 0..types.num_nonterminals() {
        let total = counts.type_count(v);
        if total == 0 {
            return Err(TreeError::UndefinedDistribution(types.name(v).into()));
        }
        for i in structure.rules_of(v) {
            let rule = structure.rule(i);
            probs[i] = counts.production_count(v, &rule.offspring) as f64 / total as f64;
        }
    }
    Ok(OffspringModel::new(Arc::clone(structure), probs).expect("count ratios are a distribution"))
}

struct TreeParser<'a> {
    text: &'a str,
    pos: usize,
    types: &'a TypeTable,
}

impl TreeParser<'_> {
    fn err(&self, message: impl Into<String>) -> TreeError {
        TreeError::Syntax {
            position: self.pos,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn name(&mut self) -> Result<usize, TreeError> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_whitespace() || c == '(' || c == ')' {
                break;
            }
            self.pos += c.len_utf8();
        }
        if start == self.pos {
            return Err(self.err("expected a type name"));
        }
        let name = &self.text[start..self.pos];
        self.types
            .index_of(name)
            .ok_or_else(|| TreeError::UnknownType(name.into()))
    }

    fn tree(&mut self) -> Result<DerivationTree, TreeError> {
        let ty = self.name()?;
        if self.peek() != Some('(') {
            return Ok(DerivationTree::leaf(ty));
        }
        self.pos += 1;
        let mut children = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                Some(')') => {
                    self.pos += 1;
                    break;
                }
                Some(_) => children.push(self.tree()?),
                None => return Err(self.err("unclosed `(`")),
            }
        }
        if children.is_empty() {
            return Err(self.err("empty child list"));
        }
        Ok(DerivationTree::node(ty, children))
    }
}

/// Parses one tree. With `structure`, every applied production must exist there.
pub fn parse_tree(
    text: &str,
    types: &TypeTable,
    structure: Option<&ModelStructure>,
) -> Result<DerivationTree, TreeError> {
    let mut p = TreeParser { text, pos: 0, types };
    p.skip_ws();
    let tree = p.tree()?;
    p.skip_ws();
    if p.pos != text.len() {
        return Err(p.err("trailing input"));
    }
    tree.validate_shape(types)?;
    if let Some(s) = structure {
        tree.validate(s)?;
    }
    Ok(tree)
}

/// One tree per nonblank line.
pub fn parse_tree_list(
    text: &str,
    types: &TypeTable,
    structure: Option<&ModelStructure>,
) -> Result<Vec<DerivationTree>, TreeError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            parse_tree(l, types, structure).map_err(|e| TreeError::Line {
                line: i + 1,
                source: Box::new(e),
            })
        })
        .collect()
}

pub fn serialize_tree(tree: &DerivationTree, types: &TypeTable) -> String {
    fn write(t: &DerivationTree, types: &TypeTable, out: &mut String) {
        out.push_str(types.name(t.ty));
        if !t.is_leaf() {
            out.push('(');
            for (i, c) in t.children.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                write(c, types, out);
            }
            out.push(')');
        }
    }
    let mut out = String::new();
    write(tree, types, &mut out);
    out
}
