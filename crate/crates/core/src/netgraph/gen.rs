use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Graph, GraphError, NodeId};

/// Rejection-sampling budget for connected Erdős–Rényi graphs.
pub const ER_RETRY_BUDGET: u32 = 100;

/// Topology family of a generated graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GraphFamily {
    Path,
    /// Falls back to a path for `n < 3`.
    Cycle,
    Star,
    Complete,
    /// Most-square `rows × cols` factorization of `n` (see [`grid_shape`]).
    Grid,
    /// Heap-shaped binary tree: position `i` has children `2i+1`, `2i+2`.
    BalancedBinaryTree,
    ErdosRenyi {
        p: f64,
    },
}

impl fmt::Display for GraphFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphFamily::Path => f.write_str("path"),
            GraphFamily::Cycle => f.write_str("cycle"),
            GraphFamily::Star => f.write_str("star"),
            GraphFamily::Complete => f.write_str("complete"),
            GraphFamily::Grid => f.write_str("grid"),
            GraphFamily::BalancedBinaryTree => f.write_str("balanced_binary_tree"),
            GraphFamily::ErdosRenyi { p } => write!(f, "erdos_renyi({p})"),
        }
    }
}

impl FromStr for GraphFamily {
    type Err = GraphError;

    /// Accepts the `Display` form, e.g. `grid` or `erdos_renyi(0.05)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let family = match s {
            "path" => GraphFamily::Path,
            "cycle" => GraphFamily::Cycle,
            "star" => GraphFamily::Star,
            "complete" => GraphFamily::Complete,
            "grid" => GraphFamily::Grid,
            "balanced_binary_tree" => GraphFamily::BalancedBinaryTree,
            _ => {
                let p = s
                    .strip_prefix("erdos_renyi(")
                    .and_then(|rest| rest.strip_suffix(')'))
                    .and_then(|p| p.trim().parse::<f64>().ok())
                    .ok_or_else(|| GraphError::InvalidSpec(format!("unknown family `{s}`")))?;
                GraphFamily::ErdosRenyi { p }
            }
        };
        Ok(family)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdScheme {
    /// Ids `1..=n` in generation order.
    #[default]
    Sequential,
    /// `n` distinct ids sampled uniformly from `[1, n^3]`, randomly assigned.
    RandomPermutation,
}

impl FromStr for IdScheme {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sequential" => Ok(IdScheme::Sequential),
            "random_permutation" | "random" => Ok(IdScheme::RandomPermutation),
            other => Err(GraphError::InvalidSpec(format!("unknown id scheme `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphGenSpec {
    #[serde(flatten)]
    pub family: GraphFamily,
    pub n: usize,
    #[serde(default)]
    pub id_scheme: IdScheme,
    #[serde(default)]
    pub seed: u64,
}

impl GraphGenSpec {
    pub fn new(family: GraphFamily, n: usize) -> Self {
        GraphGenSpec {
            family,
            n,
            id_scheme: IdScheme::Sequential,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_ids(mut self, id_scheme: IdScheme) -> Self {
        self.id_scheme = id_scheme;
        self
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        if self.n == 0 {
            return Err(GraphError::InvalidSpec("n must be at least 1".into()));
        }
        if let GraphFamily::ErdosRenyi { p } = self.family {
            if !(p > 0.0 && p <= 1.0) {
                return Err(GraphError::InvalidSpec(format!(
                    "erdos_renyi p must lie in (0, 1], got {p}"
                )));
            }
        }
        Ok(())
    }
}

/// `(rows, cols)` with `rows * cols == n`, `rows ≤ cols`, and `rows` the
/// largest divisor of `n` not exceeding `√n`.
pub fn grid_shape(n: usize) -> (usize, usize) {
    let mut rows = (n as f64).sqrt() as usize;
    while rows > 1 && n % rows != 0 {
        rows -= 1;
    }
    let rows = rows.max(1);
    (rows, n / rows)
}

/// Generates a connected graph. Deterministic for a fixed spec.
pub fn generate_graph(spec: &GraphGenSpec) -> Result<Graph, GraphError> {
    spec.validate()?;
    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let edges = match spec.family {
        GraphFamily::ErdosRenyi { p } => sample_connected_er(n, p, &mut rng)?,
        family => structured_edges(family, n),
    };

    let ids: Vec<NodeId> = match spec.id_scheme {
        IdScheme::Sequential => (1..=n as NodeId).collect(),
        IdScheme::RandomPermutation => {
            let space = (n as u64).pow(3) as usize;
            let mut ids: Vec<NodeId> = index::sample(&mut rng, space, n)
                .into_iter()
                .map(|i| i as NodeId + 1)
                .collect();
            ids.shuffle(&mut rng);
            ids
        }
    };
    Graph::from_edges(
        ids.iter().copied(),
        edges.into_iter().map(|(a, b)| (ids[a], ids[b])),
    )
}

fn structured_edges(family: GraphFamily, n: usize) -> Vec<(usize, usize)> {
    match family {
        GraphFamily::Path => (1..n).map(|i| (i - 1, i)).collect(),
        GraphFamily::Cycle => {
            let mut edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
            if n >= 3 {
                edges.push((n - 1, 0));
            }
            edges
        }
        GraphFamily::Star => (1..n).map(|i| (0, i)).collect(),
        GraphFamily::Complete => (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect(),
        GraphFamily::Grid => {
            let (rows, cols) = grid_shape(n);
            let at = |r: usize, c: usize| r * cols + c;
            let mut edges = Vec::with_capacity(2 * n);
            for r in 0..rows {
                for c in 0..cols {
                    if c + 1 < cols {
                        edges.push((at(r, c), at(r, c + 1)));
                    }
                    if r + 1 < rows {
                        edges.push((at(r, c), at(r + 1, c)));
                    }
                }
            }
            edges
        }
        GraphFamily::BalancedBinaryTree => (1..n).map(|i| ((i - 1) / 2, i)).collect(),
        GraphFamily::ErdosRenyi { .. } => unreachable!("sampled separately"),
    }
}

fn sample_connected_er(
    n: usize,
    p: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(usize, usize)>, GraphError> {
    for _ in 0..ER_RETRY_BUDGET {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen_bool(p) {
                    edges.push((i, j));
                }
            }
        }
        if is_connected(n, &edges) {
            return Ok(edges);
        }
    }
    Err(GraphError::RetriesExhausted(ER_RETRY_BUDGET))
}

fn is_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut components = n;
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            components -= 1;
        }
    }
    components == 1
}
