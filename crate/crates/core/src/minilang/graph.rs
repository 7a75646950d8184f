//! Program dependency graph: call edges between functions, def-use edges
//! between statements of one function, and manifest edges from components to
//! their classes.

use std::collections::{BTreeSet, HashMap};

use petgraph::graph::{DiGraph, NodeIndex};
use petgraph::visit::{EdgeRef, Walker};
use petgraph::Direction;
use serde::{Deserialize, Serialize};

use super::ast::*;

/// Location of a statement: alternating statement index and nested block
/// index, e.g. `[3, 0, 1]` is the second statement of the then-block of the
/// fourth top-level statement.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StmtRef {
    pub function: CallTarget,
    pub path: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DepNode {
    Component(String),
    Class(String),
    Function(CallTarget),
    Statement(StmtRef),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DepEdge {
    /// Component declaration to the class implementing it.
    Manifest,
    /// Class to its member functions.
    Member,
    /// Function to the statements in its body.
    Contains,
    /// Caller to callee; added both statement→function and function→function.
    Call,
    /// Definition of a variable to a statement reading it.
    DefUse,
}

pub struct DependencyGraph {
    pub graph: DiGraph<DepNode, DepEdge>,
    index: HashMap<DepNode, NodeIndex>,
}

/// Statements of a block in pre-order with their paths.
pub fn flatten(block: &[Stmt]) -> Vec<(Vec<usize>, &Stmt)> {
    fn go<'a>(block: &'a [Stmt], prefix: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, &'a Stmt)>) {
        for (i, s) in block.iter().enumerate() {
            prefix.push(i);
            out.push((prefix.clone(), s));
            for (bi, b) in s.blocks().into_iter().enumerate() {
                prefix.push(bi);
                go(b, prefix, out);
                prefix.pop();
            }
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    go(block, &mut Vec::new(), &mut out);
    out
}

pub fn stmt_at<'a>(block: &'a [Stmt], path: &[usize]) -> Option<&'a Stmt> {
    let (&first, rest) = path.split_first()?;
    let s = block.get(first)?;
    if rest.is_empty() {
        return Some(s);
    }
    let (&bi, rest) = rest.split_first()?;
    let blocks = s.blocks();
    stmt_at(blocks.get(bi)?, rest)
}

impl DependencyGraph {
    pub fn build(p: &Program) -> Self {
        let mut g = DependencyGraph { graph: DiGraph::new(), index: HashMap::new() };
        for (name, _) in &p.manifest.components {
            let comp = g.node(DepNode::Component(name.clone()));
            let class = g.node(DepNode::Class(name.clone()));
            g.graph.add_edge(comp, class, DepEdge::Manifest);
        }
        for c in &p.classes {
            let cn = g.node(DepNode::Class(c.name.clone()));
            for f in &c.functions {
                let target = CallTarget::new(&c.name, &f.name);
                let fnode = g.node(DepNode::Function(target.clone()));
                g.graph.add_edge(cn, fnode, DepEdge::Member);
                let flat = flatten(&f.body);
                let mut defs: HashMap<&str, Vec<NodeIndex>> = HashMap::new();
                for (path, s) in &flat {
                    let sn = g.node(DepNode::Statement(StmtRef { function: target.clone(), path: path.clone() }));
                    g.graph.add_edge(fnode, sn, DepEdge::Contains);
                    for v in s.uses() {
                        for &d in defs.get(v).into_iter().flatten() {
                            g.graph.add_edge(d, sn, DepEdge::DefUse);
                        }
                    }
                    for callee in s.direct_calls() {
                        let cnode = g.node(DepNode::Function(callee.clone()));
                        g.graph.add_edge(sn, cnode, DepEdge::Call);
                        if !g.graph.edges_connecting(fnode, cnode).any(|e| *e.weight() == DepEdge::Call) {
                            g.graph.add_edge(fnode, cnode, DepEdge::Call);
                        }
                    }
                    if let Some(v) = s.defines() {
                        defs.entry(v).or_default().push(sn);
                    }
                }
            }
        }
        g
    }

    fn node(&mut self, n: DepNode) -> NodeIndex {
        if let Some(&i) = self.index.get(&n) {
            return i;
        }
        let i = self.graph.add_node(n.clone());
        self.index.insert(n, i);
        i
    }

    pub fn node_index(&self, n: &DepNode) -> Option<NodeIndex> {
        self.index.get(n).copied()
    }

    pub fn has_edge(&self, from: &DepNode, to: &DepNode, kind: DepEdge) -> bool {
        match (self.node_index(from), self.node_index(to)) {
            (Some(a), Some(b)) => self.graph.edges_connecting(a, b).any(|e| *e.weight() == kind),
            _ => false,
        }
    }

    /// Functions reachable from `roots` along call edges.
    pub fn reachable_functions(&self, roots: &[CallTarget]) -> BTreeSet<CallTarget> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<NodeIndex> = roots
            .iter()
            .filter_map(|r| self.node_index(&DepNode::Function(r.clone())))
            .collect();
        while let Some(n) = stack.pop() {
            let DepNode::Function(t) = &self.graph[n] else { continue };
            if !seen.insert(t.clone()) {
                continue;
            }
            for e in self.graph.edges_directed(n, Direction::Outgoing) {
                if *e.weight() == DepEdge::Call {
                    stack.push(e.target());
                }
            }
        }
        seen
    }

    /// Classes owning at least one function reachable from `roots`.
    pub fn reachable_classes(&self, roots: &[CallTarget]) -> BTreeSet<String> {
        self.reachable_functions(roots).into_iter().map(|t| t.class).collect()
    }

    /// Statements that `stmt` transitively depends on through def-use edges.
    pub fn backward_defs(&self, stmt: &StmtRef) -> BTreeSet<StmtRef> {
        let Some(start) = self.node_index(&DepNode::Statement(stmt.clone())) else {
            return BTreeSet::new();
        };
        let mut out = BTreeSet::new();
        let mut stack = vec![start];
        let mut seen = BTreeSet::new();
        while let Some(n) = stack.pop() {
            if !seen.insert(n) {
                continue;
            }
            for e in self.graph.edges_directed(n, Direction::Incoming) {
                if *e.weight() == DepEdge::DefUse {
                    let src = e.source();
                    if let DepNode::Statement(r) = &self.graph[src] {
                        out.insert(r.clone());
                    }
                    stack.push(src);
                }
            }
        }
        out
    }

    /// Every node reachable from `from` over any edge kind.
    pub fn forward_closure(&self, from: &DepNode) -> BTreeSet<DepNode> {
        let Some(start) = self.node_index(from) else { return BTreeSet::new() };
        petgraph::visit::Dfs::new(&self.graph, start)
            .iter(&self.graph)
            .map(|n| self.graph[n].clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::parse;

    fn sample() -> Program {
        parse(
            "manifest {\n component activity B\n}\nentry A.main\n\
             class A {\n fn main(x) {\n let y = x + 1;\n call B.show(y);\n let z = A.f(y);\n emit z;\n }\n fn f(v) { return v; }\n}\n\
             class B {\n fn show(q) {\n call C.draw(q);\n }\n}\n\
             class C {\n fn draw(q) { api ui.draw(q); }\n}\n\
             class D {\n fn unused(q) { call C.draw(q); }\n}\n",
        )
        .unwrap()
    }

    #[test]
    fn call_and_def_use_edges() {
        let p = sample();
        let g = DependencyGraph::build(&p);
        let main = CallTarget::new("A", "main");
        let show = CallTarget::new("B", "show");
        assert!(g.has_edge(&DepNode::Function(main.clone()), &DepNode::Function(show), DepEdge::Call));
        let def = DepNode::Statement(StmtRef { function: main.clone(), path: vec![0] });
        let call = DepNode::Statement(StmtRef { function: main.clone(), path: vec![1] });
        assert!(g.has_edge(&def, &call, DepEdge::DefUse));
        assert!(g.has_edge(&DepNode::Component("B".into()), &DepNode::Class("B".into()), DepEdge::Manifest));
        let back = g.backward_defs(&StmtRef { function: main, path: vec![3] });
        assert_eq!(back.iter().map(|r| r.path.clone()).collect::<Vec<_>>(), vec![vec![0], vec![2]]);
    }

    #[test]
    fn reachability_matches_naive_oracle() {
        let p = sample();
        let g = DependencyGraph::build(&p);
        let reached = g.reachable_classes(&[p.entry.clone()]);
        assert_eq!(reached, naive_reachable_classes(&p));
        assert!(!reached.contains("D"));
    }

    /// Fixpoint over "a class is reachable if a reachable function calls it".
    pub(crate) fn naive_reachable_classes(p: &Program) -> BTreeSet<String> {
        let mut fns: BTreeSet<CallTarget> = BTreeSet::from([p.entry.clone()]);
        loop {
            let mut next = fns.clone();
            for t in &fns {
                if let Some(f) = p.function(t) {
                    walk_block(&f.body, &mut |s| {
                        for c in s.direct_calls() {
                            if p.function(c).is_some() {
                                next.insert(c.clone());
                            }
                        }
                    });
                }
            }
            if next == fns {
                break;
            }
            fns = next;
        }
        fns.into_iter().map(|t| t.class).collect()
    }

    #[test]
    fn paths_address_nested_statements() {
        let p = parse("manifest {}\nentry A.main\nclass A { fn main(x) { if x > 0 { emit 1; } else { while x < 0 { emit 2; } } } }").unwrap();
        let f = &p.classes[0].functions[0];
        let flat = flatten(&f.body);
        assert_eq!(flat.len(), 4);
        assert_eq!(flat[3].0, vec![0, 1, 0, 0, 0]);
        assert_eq!(stmt_at(&f.body, &[0, 1, 0, 0, 0]), Some(&Stmt::Emit(Expr::Int(2))));
    }
}
