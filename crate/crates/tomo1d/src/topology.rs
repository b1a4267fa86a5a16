//! Routing matrices for tree and single-router topologies.
//!
//! A routing matrix is the binary J x I incidence mapping latent components
//! (links or origin-destination pairs) to measurements (end-to-end paths or
//! per-link counts) in the linear model `Y = A X`.

use std::collections::VecDeque;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Result, TomoError};
use crate::io;
use crate::linalg;

/// Binary J x I incidence matrix with no all-zero row or column.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingMatrix {
    matrix: DMatrix<f64>,
    component_labels: Option<Vec<String>>,
    measurement_labels: Option<Vec<String>>,
}

impl RoutingMatrix {
    /// Validate and wrap a binary incidence matrix.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let diag = validate_routing(&matrix);
        if let Some(problem) = diag.first_violation() {
            return Err(TomoError::InvalidParameter(format!(
                "routing matrix: {problem}"
            )));
        }
        Ok(Self {
            matrix,
            component_labels: None,
            measurement_labels: None,
        })
    }

    pub fn with_labels(
        mut self,
        components: Vec<String>,
        measurements: Vec<String>,
    ) -> Result<Self> {
        if components.len() != self.n_components() || measurements.len() != self.n_measurements() {
            return Err(TomoError::DimensionMismatch(
                "label counts do not match matrix shape".into(),
            ));
        }
        self.component_labels = Some(components);
        self.measurement_labels = Some(measurements);
        Ok(self)
    }

    /// Number of measurements J (rows).
    pub fn n_measurements(&self) -> usize {
        self.matrix.nrows()
    }

    /// Number of latent components I (columns).
    pub fn n_components(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn component_labels(&self) -> Option<&[String]> {
        self.component_labels.as_deref()
    }

    pub fn measurement_labels(&self) -> Option<&[String]> {
        self.measurement_labels.as_deref()
    }

    pub fn diagnostics(&self) -> RoutingDiagnostics {
        validate_routing(&self.matrix)
    }

    /// The two-leaf tree of the introduction: three links, two paths.
    pub fn two_leaf() -> Self {
        build_tree_routing(&Tree::two_leaf(), None).expect("two-leaf tree is valid")
    }

    /// The four-leaf binary tree: seven links, four paths.
    pub fn four_leaf() -> Self {
        build_tree_routing(&Tree::four_leaf(), None).expect("four-leaf tree is valid")
    }

    pub fn to_csv(&self) -> String {
        io::matrix_to_csv(&self.matrix)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        io::write_matrix_csv(path, &self.matrix)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::new(io::read_matrix_csv(path)?)
    }
}

/// Validation report for a candidate routing matrix. Diagnostic only; every
/// field can be inspected without any of them being raised as an error.
#[derive(Debug, Clone, Default)]
pub struct RoutingDiagnostics {
    pub non_binary_entries: Vec<(usize, usize)>,
    pub zero_rows: Vec<usize>,
    pub zero_columns: Vec<usize>,
    pub duplicate_columns: Vec<(usize, usize)>,
    pub rank: usize,
}

impl RoutingDiagnostics {
    pub fn is_clean(&self) -> bool {
        self.first_violation().is_none() && self.duplicate_columns.is_empty()
    }

    /// First invariant violation, if any (duplicate columns are a warning,
    /// not a violation).
    pub fn first_violation(&self) -> Option<String> {
        if let Some(&(i, j)) = self.non_binary_entries.first() {
            return Some(format!("entry ({i}, {j}) is not 0 or 1"));
        }
        if let Some(&r) = self.zero_rows.first() {
            return Some(format!("row {r} is all zeros"));
        }
        if let Some(&c) = self.zero_columns.first() {
            return Some(format!("column {c} is all zeros"));
        }
        None
    }
}

/// Inspect an arbitrary matrix for routing-matrix violations and report its
/// numerical rank.
pub fn validate_routing(matrix: &DMatrix<f64>) -> RoutingDiagnostics {
    let mut diag = RoutingDiagnostics::default();
    for i in 0..matrix.nrows() {
        for j in 0..matrix.ncols() {
            let v = matrix[(i, j)];
            if v != 0.0 && v != 1.0 {
                diag.non_binary_entries.push((i, j));
            }
        }
    }
    for i in 0..matrix.nrows() {
        if matrix.row(i).iter().all(|&v| v == 0.0) {
            diag.zero_rows.push(i);
        }
    }
    for j in 0..matrix.ncols() {
        if matrix.column(j).iter().all(|&v| v == 0.0) {
            diag.zero_columns.push(j);
        }
    }
    for a in 0..matrix.ncols() {
        for b in (a + 1)..matrix.ncols() {
            if matrix.column(a) == matrix.column(b) {
                diag.duplicate_columns.push((a, b));
            }
        }
    }
    diag.rank = linalg::rank(matrix, linalg::DEFAULT_RANK_TOL);
    diag
}

/// Rooted tree given as a parent-index list (`None` marks the root).
///
/// Links are indexed breadth-first, top to bottom and left to right, where
/// siblings are ordered by node index; link `e` is the edge from its child
/// node up to the parent.
#[derive(Debug, Clone)]
pub struct Tree {
    parents: Vec<Option<usize>>,
}

impl Tree {
    pub fn new(parents: Vec<Option<usize>>) -> Result<Self> {
        let n = parents.len();
        if n < 2 {
            return Err(TomoError::MalformedTopology(
                "a tree needs at least a root and one more node".into(),
            ));
        }
        let roots: Vec<usize> = parents
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.is_none().then_some(i))
            .collect();
        if roots.len() != 1 {
            return Err(TomoError::MalformedTopology(format!(
                "expected exactly one root, found {}",
                roots.len()
            )));
        }
        for (i, p) in parents.iter().enumerate() {
            if let Some(p) = p {
                if *p >= n {
                    return Err(TomoError::MalformedTopology(format!(
                        "node {i} has out-of-range parent {p}"
                    )));
                }
                if *p == i {
                    return Err(TomoError::MalformedTopology(format!(
                        "node {i} is its own parent"
                    )));
                }
            }
        }
        let tree = Self { parents };
        // Reachability from the root rules out cycles and disconnection.
        let order = tree.bfs_order();
        if order.len() != n {
            return Err(TomoError::MalformedTopology(
                "graph is cyclic or disconnected from the root".into(),
            ));
        }
        Ok(tree)
    }

    pub fn root(&self) -> usize {
        self.parents
            .iter()
            .position(Option::is_none)
            .expect("validated tree has a root")
    }

    pub fn n_nodes(&self) -> usize {
        self.parents.len()
    }

    fn children(&self) -> Vec<Vec<usize>> {
        let mut ch = vec![Vec::new(); self.parents.len()];
        for (i, p) in self.parents.iter().enumerate() {
            if let Some(p) = p {
                ch[*p].push(i);
            }
        }
        ch
    }

    fn bfs_order(&self) -> Vec<usize> {
        let children = self.children();
        let mut order = Vec::with_capacity(self.parents.len());
        let mut queue = VecDeque::new();
        if let Some(root) = self.parents.iter().position(Option::is_none) {
            queue.push_back(root);
        }
        while let Some(node) = queue.pop_front() {
            order.push(node);
            for &c in &children[node] {
                queue.push_back(c);
            }
        }
        order
    }

    /// Leaves in breadth-first order.
    pub fn leaves(&self) -> Vec<usize> {
        let children = self.children();
        self.bfs_order()
            .into_iter()
            .filter(|&n| children[n].is_empty())
            .collect()
    }

    /// Root - internal node - two leaves.
    pub fn two_leaf() -> Self {
        Self::new(vec![None, Some(0), Some(1), Some(1)]).unwrap()
    }

    /// Root - spine node - two internal nodes - four leaves (seven links).
    pub fn four_leaf() -> Self {
        Self::new(vec![
            None,
            Some(0),
            Some(1),
            Some(1),
            Some(2),
            Some(2),
            Some(3),
            Some(3),
        ])
        .unwrap()
    }

    /// Parse a `child parent` adjacency file; the root line uses `-` as its
    /// parent. Node indices follow first appearance in the file.
    pub fn from_adjacency_text(text: &str) -> Result<Self> {
        let mut names: Vec<String> = Vec::new();
        let mut index_of = std::collections::HashMap::new();
        let intern = |name: &str, names: &mut Vec<String>,
                          index_of: &mut std::collections::HashMap<String, usize>| {
            *index_of.entry(name.to_string()).or_insert_with(|| {
                names.push(name.to_string());
                names.len() - 1
            })
        };
        let mut pairs: Vec<(usize, Option<usize>)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let (child, parent) = match (it.next(), it.next(), it.next()) {
                (Some(c), Some(p), None) => (c, p),
                _ => {
                    return Err(TomoError::Parse(format!(
                        "line {}: expected 'child parent'",
                        lineno + 1
                    )))
                }
            };
            let c = intern(child, &mut names, &mut index_of);
            let p = if parent == "-" {
                None
            } else {
                Some(intern(parent, &mut names, &mut index_of))
            };
            pairs.push((c, p));
        }
        let mut parents: Vec<Option<Option<usize>>> = vec![None; names.len()];
        for (c, p) in pairs {
            if parents[c].is_some() {
                return Err(TomoError::Parse(format!(
                    "node '{}' listed twice",
                    names[c]
                )));
            }
            parents[c] = Some(p);
        }
        let parents: Vec<Option<usize>> = parents
            .into_iter()
            .enumerate()
            .map(|(i, p)| {
                p.ok_or_else(|| {
                    TomoError::Parse(format!("node '{}' never given a parent line", names[i]))
                })
            })
            .collect::<Result<_>>()?;
        Self::new(parents)
    }

    pub fn from_adjacency_file(path: &Path) -> Result<Self> {
        Self::from_adjacency_text(&std::fs::read_to_string(path)?)
    }
}

/// Routing matrix of a rooted tree: row j marks the links on the path from
/// the root to leaf j. `J` = number of leaves, `I` = number of links.
///
/// `leaf_order` overrides the breadth-first leaf ordering; it must be a
/// permutation of the tree's leaves.
pub fn build_tree_routing(tree: &Tree, leaf_order: Option<&[usize]>) -> Result<RoutingMatrix> {
    let children_empty = tree.leaves();
    let leaves: Vec<usize> = match leaf_order {
        Some(order) => {
            let mut sorted: Vec<usize> = order.to_vec();
            sorted.sort_unstable();
            let mut expected = children_empty.clone();
            expected.sort_unstable();
            if sorted != expected {
                return Err(TomoError::MalformedTopology(
                    "leaf order is not a permutation of the tree's leaves".into(),
                ));
            }
            order.to_vec()
        }
        None => children_empty,
    };
    if leaves.len() < 2 {
        return Err(TomoError::MalformedTopology(
            "tomography needs at least two leaves (J >= 2)".into(),
        ));
    }

    // Link index per non-root node, assigned in BFS order.
    let mut link_of_node = vec![usize::MAX; tree.n_nodes()];
    let mut next = 0usize;
    for node in tree.bfs_order() {
        if tree.parents[node].is_some() {
            link_of_node[node] = next;
            next += 1;
        }
    }
    let n_links = next;

    let mut a = DMatrix::zeros(leaves.len(), n_links);
    for (row, &leaf) in leaves.iter().enumerate() {
        let mut node = leaf;
        while let Some(parent) = tree.parents[node] {
            a[(row, link_of_node[node])] = 1.0;
            node = parent;
        }
    }
    RoutingMatrix::new(a)
}

/// Routing matrix of a one-router network with `n_in` input and `n_out`
/// output links. Latent components are the `n_in * n_out` origin-destination
/// pairs (ordered origin-major); measurements are per-input and per-output
/// byte counts. With `drop_last_row` the final output row is removed, since
/// total-in equals total-out makes the row sums linearly redundant.
pub fn build_router_routing(n_in: usize, n_out: usize, drop_last_row: bool) -> Result<RoutingMatrix> {
    if n_in == 0 || n_out == 0 {
        return Err(TomoError::InvalidParameter(
            "router needs at least one input and one output link".into(),
        ));
    }
    let n_pairs = n_in * n_out;
    let full_rows = n_in + n_out;
    let rows = if drop_last_row { full_rows - 1 } else { full_rows };
    if rows == 0 {
        return Err(TomoError::InvalidParameter("no measurement rows left".into()));
    }
    let mut a = DMatrix::zeros(rows, n_pairs);
    for origin in 0..n_in {
        for dest in 0..n_out {
            let pair = origin * n_out + dest;
            a[(origin, pair)] = 1.0;
            let out_row = n_in + dest;
            if out_row < rows {
                a[(out_row, pair)] = 1.0;
            }
        }
    }
    let mut labels_c = Vec::with_capacity(n_pairs);
    for origin in 0..n_in {
        for dest in 0..n_out {
            labels_c.push(format!("od_{}_{}", origin + 1, dest + 1));
        }
    }
    let mut labels_m: Vec<String> = (0..n_in).map(|i| format!("in_{}", i + 1)).collect();
    labels_m.extend((0..n_out).map(|o| format!("out_{}", o + 1)));
    labels_m.truncate(rows);
    RoutingMatrix::new(a)?.with_labels(labels_c, labels_m)
}
