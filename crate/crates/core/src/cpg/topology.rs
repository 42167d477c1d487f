use crate::error::{Error, Result};

/// Indices of each semantic parameter role inside the flat vector `v`.
///
/// Per oscillator `i` the block `[α, β, γ, δ, a_raw]` sits at `5i`; coupling
/// edges follow as `[w, φ]` pairs in row-major adjacency order.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamLayout {
    pub alpha: Vec<usize>,
    pub beta: Vec<usize>,
    pub gamma: Vec<usize>,
    pub delta: Vec<usize>,
    pub a_raw: Vec<usize>,
    pub w: Vec<usize>,
    pub phi: Vec<usize>,
}

impl ParamLayout {
    fn new(n: usize, n_edges: usize) -> Self {
        let osc = |k: usize| (0..n).map(|i| 5 * i + k).collect();
        let edge = |k: usize| (0..n_edges).map(|e| 5 * n + 2 * e + k).collect();
        ParamLayout {
            alpha: osc(0),
            beta: osc(1),
            gamma: osc(2),
            delta: osc(3),
            a_raw: osc(4),
            w: edge(0),
            phi: edge(1),
        }
    }

    pub fn all_indices(&self) -> impl Iterator<Item = usize> + '_ {
        [
            &self.alpha,
            &self.beta,
            &self.gamma,
            &self.delta,
            &self.a_raw,
            &self.w,
            &self.phi,
        ]
        .into_iter()
        .flatten()
        .copied()
    }
}

/// Oscillator count, coupling graph and parameter layout.
#[derive(Clone, Debug, PartialEq)]
pub struct CpgTopology {
    n: usize,
    adjacency: Vec<Vec<bool>>,
    /// `(i, j)` for every edge where oscillator `j` couples into `i`.
    edges: Vec<(usize, usize)>,
    d_cmd: usize,
    layout: ParamLayout,
}

impl CpgTopology {
    /// `adjacency[i][j]` is true when `j` drives `i`. `d_cmd` is 1 (one shared
    /// command) or `n` (one per oscillator).
    pub fn new(adjacency: Vec<Vec<bool>>, d_cmd: usize) -> Result<Self> {
        let n = adjacency.len();
        if n == 0 {
            return Err(Error::config("cpg.n_oscillators", "must be at least 1"));
        }
        if adjacency.iter().any(|row| row.len() != n) {
            return Err(Error::config("cpg.adjacency", "must be square"));
        }
        if (0..n).any(|i| adjacency[i][i]) {
            return Err(Error::config("cpg.adjacency", "diagonal must be zero"));
        }
        if d_cmd != 1 && d_cmd != n {
            return Err(Error::config("cpg.d_cmd", "must be 1 or the oscillator count"));
        }
        let edges: Vec<_> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| adjacency[i][j])
            .collect();
        let layout = ParamLayout::new(n, edges.len());
        Ok(CpgTopology {
            n,
            adjacency,
            edges,
            d_cmd,
            layout,
        })
    }

    /// Every oscillator coupled to every other.
    pub fn fully_coupled(n: usize) -> Result<Self> {
        let adjacency = (0..n).map(|i| (0..n).map(|j| i != j).collect()).collect();
        CpgTopology::new(adjacency, 1)
    }

    /// Two oscillators (hip, knee) with bidirectional coupling.
    pub fn hopper() -> Self {
        CpgTopology::fully_coupled(2).expect("valid topology")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        5 * self.n + 2 * self.edges.len()
    }

    pub fn d_cmd(&self) -> usize {
        self.d_cmd
    }

    pub fn adjacency(&self) -> &[Vec<bool>] {
        &self.adjacency
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    /// Edge index for `j → i`, if present.
    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        self.edges.iter().position(|&e| e == (i, j))
    }

    /// Command entry read by oscillator `i`.
    pub fn cmd_index(&self, i: usize) -> usize {
        if self.d_cmd == 1 {
            0
        } else {
            i
        }
    }
}
