//! The operation tape: forward evaluation with recorded structure, then
//! reverse-mode gradient accumulation.
//!
//! Nodes are appended in evaluation order, which is automatically a
//! topological order (an op can only consume already-built nodes), so the
//! backward pass is a single reverse sweep. Every forward result is checked
//! for NaN/Inf before it is admitted — a poisoned value fails fast at the op
//! that produced it instead of surfacing as a garbage loss thousands of
//! steps later.

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};
use crate::metrics::{chamfer_from_assignments, nearest_assignments, Aggregation, ChamferMode, Neighbor};

use super::Matrix;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

/// Gradient contribution rule for the l2 chamfer terms at zero distance:
/// below this the direction `(y - x)/‖y - x‖` is numerically meaningless
/// and the contribution is defined as zero.
const ZERO_DIST_CUTOFF: f64 = 1e-12;

enum Op {
    Input {
        param: Option<String>,
    },
    Linear {
        x: NodeId,
        w: NodeId,
        b: NodeId,
    },
    LeakyRelu {
        x: NodeId,
        alpha: f64,
    },
    Tanh {
        x: NodeId,
    },
    ConcatCols {
        a: NodeId,
        b: NodeId,
    },
    ConcatRows {
        parts: Vec<NodeId>,
    },
    TileRows {
        x: NodeId,
    },
    MeanRows {
        x: NodeId,
    },
    /// Patch extraction for convolution-as-matmul: each output entry either
    /// copies one input entry (`map >= 0`, a flat index) or is a zero from
    /// padding (`map == -1`).
    Im2col {
        x: NodeId,
        map: Vec<i64>,
    },
    ChamferLoss {
        pred: NodeId,
        gt: Vec<Point3>,
        fwd: Vec<Neighbor>,
        bwd: Vec<Neighbor>,
        mode: ChamferMode,
        agg: Aggregation,
    },
    Add {
        a: NodeId,
        b: NodeId,
    },
    Scale {
        x: NodeId,
        k: f64,
    },
}

struct Node {
    op: Op,
    value: Matrix,
}

/// A forward-pass recording. Build one per evaluation, run ops through it,
/// then call [`Tape::backward`] on the scalar you want gradients of.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Per-node gradients produced by [`Tape::backward`]. Nodes that do not
/// influence the root have no entry.
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Matrix> {
        self.grads[id.0].as_ref()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op_name: &str, op: Op, value: Matrix) -> Result<NodeId> {
        if !value.is_finite() {
            return Err(Error::NonFinite {
                op: op_name.to_string(),
            });
        }
        self.nodes.push(Node { op, value });
        Ok(NodeId(self.nodes.len() - 1))
    }

    /// Records a constant leaf.
    pub fn input(&mut self, value: Matrix) -> Result<NodeId> {
        self.push("input", Op::Input { param: None }, value)
    }

    /// Records a named parameter leaf; its gradient can later be retrieved
    /// by name via [`Tape::param_grads`].
    pub fn param_input(&mut self, name: &str, value: Matrix) -> Result<NodeId> {
        self.push(
            "input",
            Op::Input {
                param: Some(name.to_string()),
            },
            value,
        )
    }

    /// `x·W + b`, with `b` (1×k) broadcast over rows.
    pub fn linear(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        if xv.cols() != wv.rows() || bv.rows() != 1 || bv.cols() != wv.cols() {
            return Err(Error::shape(
                "linear",
                "x: n x d, W: d x k, b: 1 x k",
                format!(
                    "x: {}x{}, W: {}x{}, b: {}x{}",
                    xv.rows(),
                    xv.cols(),
                    wv.rows(),
                    wv.cols(),
                    bv.rows(),
                    bv.cols()
                ),
            ));
        }
        let mut out = xv.matmul(wv)?;
        for i in 0..out.rows() {
            for j in 0..out.cols() {
                let v = out.get(i, j) + bv.get(0, j);
                out.set(i, j, v);
            }
        }
        self.push("linear", Op::Linear { x, w, b }, out)
    }

    /// Elementwise `max(x, alpha*x)`. At exactly 0 the backward pass uses
    /// the positive branch (slope 1).
    pub fn leaky_relu(&mut self, x: NodeId, alpha: f64) -> Result<NodeId> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::Config {
                msg: format!("leaky_relu alpha must be in [0, 1), got {alpha}"),
            });
        }
        let out = self.value(x).map(|v| if v > 0.0 { v } else { alpha * v });
        self.push("leaky_relu", Op::LeakyRelu { x, alpha }, out)
    }

    /// Elementwise hyperbolic tangent.
    pub fn tanh(&mut self, x: NodeId) -> Result<NodeId> {
        let out = self.value(x).map(f64::tanh);
        self.push("tanh", Op::Tanh { x }, out)
    }

    /// Columns of `a` followed by columns of `b` (equal row counts).
    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.rows() != bv.rows() {
            return Err(Error::shape(
                "concat_cols",
                "equal row counts",
                format!("{}x{} vs {}x{}", av.rows(), av.cols(), bv.rows(), bv.cols()),
            ));
        }
        let (p, q) = (av.cols(), bv.cols());
        let out = Matrix::from_fn(av.rows(), p + q, |i, j| {
            if j < p {
                av.get(i, j)
            } else {
                bv.get(i, j - p)
            }
        });
        self.push("concat_cols", Op::ConcatCols { a, b }, out)
    }

    /// Rows of every part, stacked in order (equal column counts).
    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::shape("concat_rows", "at least one part", "none"));
        }
        let cols = self.value(parts[0]).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let v = self.value(p);
            if v.cols() != cols {
                return Err(Error::shape(
                    "concat_rows",
                    format!("{cols} columns"),
                    format!("{} columns", v.cols()),
                ));
            }
            rows += v.rows();
            data.extend_from_slice(v.data());
        }
        let out = Matrix::from_vec(rows, cols, data)?;
        self.push(
            "concat_rows",
            Op::ConcatRows {
                parts: parts.to_vec(),
            },
            out,
        )
    }

    /// Repeats a 1×d row vector `times` times.
    pub fn tile_rows(&mut self, x: NodeId, times: usize) -> Result<NodeId> {
        let xv = self.value(x);
        if xv.rows() != 1 || times == 0 {
            return Err(Error::shape(
                "tile_rows",
                "1 x d input, times >= 1",
                format!("{}x{} input, times {}", xv.rows(), xv.cols(), times),
            ));
        }
        let mut data = Vec::with_capacity(times * xv.cols());
        for _ in 0..times {
            data.extend_from_slice(xv.data());
        }
        let out = Matrix::from_vec(times, xv.cols(), data)?;
        self.push("tile_rows", Op::TileRows { x }, out)
    }

    /// Column means: n×c → 1×c (global average pooling).
    pub fn mean_rows(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = self.value(x);
        let n = xv.rows() as f64;
        let out = Matrix::from_fn(1, xv.cols(), |_, j| {
            (0..xv.rows()).map(|i| xv.get(i, j)).sum::<f64>() / n
        });
        self.push("mean_rows", Op::MeanRows { x }, out)
    }

    /// Extracts k×k patches at the given stride/padding from an image
    /// stored as an (h·w)×c matrix (row-major spatial positions, channels
    /// as columns). The result is (ho·wo)×(k·k·c): one output row per
    /// output position, ready to be multiplied by a (k·k·c)×cout weight.
    pub fn im2col(
        &mut self,
        x: NodeId,
        h: usize,
        w: usize,
        c: usize,
        k: usize,
        stride: usize,
        pad: usize,
    ) -> Result<NodeId> {
        let xv = self.value(x);
        if xv.rows() != h * w || xv.cols() != c {
            return Err(Error::shape(
                "im2col",
                format!("{}x{} (h*w x c)", h * w, c),
                format!("{}x{}", xv.rows(), xv.cols()),
            ));
        }
        if stride == 0 || k == 0 || h + 2 * pad < k || w + 2 * pad < k {
            return Err(Error::Config {
                msg: format!("im2col: invalid geometry h={h} w={w} k={k} stride={stride} pad={pad}"),
            });
        }
        let ho = (h + 2 * pad - k) / stride + 1;
        let wo = (w + 2 * pad - k) / stride + 1;
        let mut map = Vec::with_capacity(ho * wo * k * k * c);
        for oy in 0..ho {
            for ox in 0..wo {
                for ky in 0..k {
                    for kx in 0..k {
                        for ch in 0..c {
                            let iy = (oy * stride + ky) as i64 - pad as i64;
                            let ix = (ox * stride + kx) as i64 - pad as i64;
                            if iy >= 0 && iy < h as i64 && ix >= 0 && ix < w as i64 {
                                map.push((iy * w as i64 + ix) * c as i64 + ch as i64);
                            } else {
                                map.push(-1);
                            }
                        }
                    }
                }
            }
        }
        let xdata = xv.data();
        let data = map
            .iter()
            .map(|&m| if m >= 0 { xdata[m as usize] } else { 0.0 })
            .collect();
        let out = Matrix::from_vec(ho * wo, k * k * c, data)?;
        self.push("im2col", Op::Im2col { x, map }, out)
    }

    /// Chamfer loss between an n×3 prediction and a ground-truth cloud,
    /// as a 1×1 node. The forward value is computed by the same routine the
    /// evaluation metrics use, so the two can never drift apart. During
    /// backward the nearest-neighbor assignments are held fixed.
    pub fn chamfer_loss(
        &mut self,
        pred: NodeId,
        gt: &PointCloud,
        mode: ChamferMode,
        agg: Aggregation,
    ) -> Result<NodeId> {
        let pv = self.value(pred);
        let pred_pts = pv.to_points()?;
        let asg = nearest_assignments(&pred_pts, gt.points());
        let value = chamfer_from_assignments(&asg, mode, agg);
        let out = Matrix::from_vec(1, 1, vec![value])?;
        self.push(
            "chamfer_loss",
            Op::ChamferLoss {
                pred,
                gt: gt.points().to_vec(),
                fwd: asg.fwd,
                bwd: asg.bwd,
                mode,
                agg,
            },
            out,
        )
    }

    /// Elementwise sum of two same-shape nodes.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(Error::shape(
                "add",
                format!("{}x{}", av.rows(), av.cols()),
                format!("{}x{}", bv.rows(), bv.cols()),
            ));
        }
        let out = Matrix::from_fn(av.rows(), av.cols(), |i, j| av.get(i, j) + bv.get(i, j));
        self.push("add", Op::Add { a, b }, out)
    }

    /// Multiplies every entry by a constant.
    pub fn scale(&mut self, x: NodeId, k: f64) -> Result<NodeId> {
        let out = self.value(x).map(|v| k * v);
        self.push("scale", Op::Scale { x, k }, out)
    }

    /// Structural fingerprint of the recorded graph: op kinds plus the
    /// chamfer nearest-neighbor assignments. Two evaluations of the same
    /// program have equal signatures iff no NN assignment flipped — the
    /// gradient checker uses this to skip entries where the loss is not
    /// differentiable.
    pub fn signature(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for node in &self.nodes {
            let kind = match &node.op {
                Op::Input { .. } => 1,
                Op::Linear { .. } => 2,
                Op::LeakyRelu { .. } => 3,
                Op::Tanh { .. } => 4,
                Op::ConcatCols { .. } => 5,
                Op::ConcatRows { .. } => 6,
                Op::TileRows { .. } => 7,
                Op::MeanRows { .. } => 8,
                Op::Im2col { .. } => 9,
                Op::ChamferLoss { .. } => 10,
                Op::Add { .. } => 11,
                Op::Scale { .. } => 12,
            };
            eat(kind);
            if let Op::ChamferLoss { fwd, bwd, agg, .. } = &node.op {
                for n in fwd.iter().chain(bwd) {
                    eat(n.index as u64);
                }
                // Under max aggregation the gradient lives only at the
                // argmax rows, so those flipping is also a structure change.
                if *agg == Aggregation::Max {
                    eat(argmax_neighbor(fwd) as u64);
                    eat(argmax_neighbor(bwd) as u64);
                }
            }
        }
        h
    }

    /// Reverse-mode sweep from a 1×1 `root`. Returns a gradient per node
    /// that influences the root; accumulation runs in fixed (reverse
    /// creation) order for bitwise reproducibility.
    pub fn backward(&self, root: NodeId) -> Result<Gradients> {
        let rv = self.value(root);
        if rv.shape() != (1, 1) {
            return Err(Error::shape(
                "backward",
                "1x1 root",
                format!("{}x{}", rv.rows(), rv.cols()),
            ));
        }
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Matrix::from_vec(1, 1, vec![1.0])?);

        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.backprop_node(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(grads: &mut [Option<Matrix>], id: NodeId, delta: Matrix) {
        match &mut grads[id.0] {
            Some(g) => {
                for (a, b) in g.data_mut().iter_mut().zip(delta.data()) {
                    *a += b;
                }
            }
            slot => *slot = Some(delta),
        }
    }

    fn backprop_node(&self, i: usize, g: &Matrix, grads: &mut [Option<Matrix>]) {
        match &self.nodes[i].op {
            Op::Input { .. } => {}
            Op::Linear { x, w, b } => {
                let (xv, wv) = (self.value(*x), self.value(*w));
                // dX = g Wᵀ, dW = Xᵀ g, db = column sums of g.
                let dx = g.matmul_nt(wv).expect("shapes fixed at forward");
                let dw = xv.matmul_tn(g).expect("shapes fixed at forward");
                let db = Matrix::from_fn(1, g.cols(), |_, j| {
                    (0..g.rows()).map(|r| g.get(r, j)).sum()
                });
                Self::accumulate(grads, *x, dx);
                Self::accumulate(grads, *w, dw);
                Self::accumulate(grads, *b, db);
            }
            Op::LeakyRelu { x, alpha } => {
                let xv = self.value(*x);
                let dx = Matrix::from_fn(g.rows(), g.cols(), |i, j| {
                    // x >= 0 takes the unit branch, including exactly 0.
                    if xv.get(i, j) >= 0.0 {
                        g.get(i, j)
                    } else {
                        alpha * g.get(i, j)
                    }
                });
                Self::accumulate(grads, *x, dx);
            }
            Op::Tanh { x } => {
                let yv = &self.nodes[i].value;
                let dx = Matrix::from_fn(g.rows(), g.cols(), |i, j| {
                    let t = yv.get(i, j);
                    g.get(i, j) * (1.0 - t * t)
                });
                Self::accumulate(grads, *x, dx);
            }
            Op::ConcatCols { a, b } => {
                let p = self.value(*a).cols();
                let da = Matrix::from_fn(g.rows(), p, |i, j| g.get(i, j));
                let db = Matrix::from_fn(g.rows(), g.cols() - p, |i, j| g.get(i, j + p));
                Self::accumulate(grads, *a, da);
                Self::accumulate(grads, *b, db);
            }
            Op::ConcatRows { parts } => {
                let mut row = 0;
                for &p in parts {
                    let rows = self.value(p).rows();
                    let dp = Matrix::from_fn(rows, g.cols(), |i, j| g.get(row + i, j));
                    row += rows;
                    Self::accumulate(grads, p, dp);
                }
            }
            Op::TileRows { x } => {
                let dx = Matrix::from_fn(1, g.cols(), |_, j| {
                    (0..g.rows()).map(|r| g.get(r, j)).sum()
                });
                Self::accumulate(grads, *x, dx);
            }
            Op::MeanRows { x } => {
                let n = self.value(*x).rows();
                let scale = 1.0 / n as f64;
                let dx = Matrix::from_fn(n, g.cols(), |_, j| g.get(0, j) * scale);
                Self::accumulate(grads, *x, dx);
            }
            Op::Im2col { x, map } => {
                let xv = self.value(*x);
                let mut dx = Matrix::zeros(xv.rows(), xv.cols());
                let dd = dx.data_mut();
                for (entry, &m) in g.data().iter().zip(map) {
                    if m >= 0 {
                        dd[m as usize] += entry;
                    }
                }
                Self::accumulate(grads, *x, dx);
            }
            Op::ChamferLoss {
                pred,
                gt,
                fwd,
                bwd,
                mode,
                agg,
            } => {
                let pv = self.value(*pred);
                let scalar = g.get(0, 0);
                let dpred = chamfer_backward(pv, gt, fwd, bwd, *mode, *agg, scalar);
                Self::accumulate(grads, *pred, dpred);
            }
            Op::Add { a, b } => {
                Self::accumulate(grads, *a, g.clone());
                Self::accumulate(grads, *b, g.clone());
            }
            Op::Scale { x, k } => {
                Self::accumulate(grads, *x, g.map(|v| k * v));
            }
        }
    }

    /// Gradients of every named parameter input, keyed by name. Parameters
    /// that do not influence the root get zero matrices.
    pub fn param_grads(
        &self,
        grads: &Gradients,
    ) -> std::collections::BTreeMap<String, Matrix> {
        let mut out: std::collections::BTreeMap<String, Matrix> =
            std::collections::BTreeMap::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if let Op::Input { param: Some(name) } = &node.op {
                let g = grads
                    .get(NodeId(i))
                    .cloned()
                    .unwrap_or_else(|| Matrix::zeros(node.value.rows(), node.value.cols()));
                // A parameter fed onto the tape more than once contributes
                // the sum of its per-node gradients.
                match out.get_mut(name) {
                    Some(acc) => {
                        for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                            *a += b;
                        }
                    }
                    None => {
                        out.insert(name.clone(), g);
                    }
                }
            }
        }
        out
    }
}

/// Position of the farthest neighbor; the first one wins on ties.
fn argmax_neighbor(ns: &[Neighbor]) -> usize {
    let mut best = 0;
    for (i, n) in ns.iter().enumerate().skip(1) {
        if n.dist2 > ns[best].dist2 {
            best = i;
        }
    }
    best
}

/// Gradient of the chamfer loss w.r.t. the prediction matrix, with the
/// nearest-neighbor assignments frozen.
fn chamfer_backward(
    pred: &Matrix,
    gt: &[Point3],
    fwd: &[Neighbor],
    bwd: &[Neighbor],
    mode: ChamferMode,
    agg: Aggregation,
    upstream: f64,
) -> Matrix {
    let n_pred = pred.rows();
    let n_gt = gt.len();
    let mut dpred = Matrix::zeros(n_pred, 3);

    let pred_pt = |i: usize| Point3::new(pred.get(i, 0), pred.get(i, 1), pred.get(i, 2));

    // d/dy of one directed term `d(y, x)`: for l2 the unit direction, for
    // squared l2 simply 2(y - x). `weight` carries the aggregation factor.
    let mut add_contribution = |row: usize, x: &Point3, neighbor: &Neighbor, weight: f64| {
        let y = pred_pt(row);
        let delta = y.sub(x);
        let dir = match mode {
            ChamferMode::L2 => {
                let d = neighbor.dist();
                if d < ZERO_DIST_CUTOFF {
                    return;
                }
                delta.scale(1.0 / d)
            }
            ChamferMode::SquaredL2 => delta.scale(2.0),
        };
        let w = weight * upstream;
        dpred.set(row, 0, dpred.get(row, 0) + w * dir.x);
        dpred.set(row, 1, dpred.get(row, 1) + w * dir.y);
        dpred.set(row, 2, dpred.get(row, 2) + w * dir.z);
    };

    match agg {
        Aggregation::Mean => {
            for (i, n) in fwd.iter().enumerate() {
                add_contribution(i, &gt[n.index], n, 1.0 / n_pred as f64);
            }
            for (j, n) in bwd.iter().enumerate() {
                add_contribution(n.index, &gt[j], n, 1.0 / n_gt as f64);
            }
        }
        Aggregation::Max => {
            // Only the single worst point per direction carries gradient;
            // distance ties go to the lowest index.
            let i = argmax_neighbor(fwd);
            add_contribution(i, &gt[fwd[i].index], &fwd[i], 1.0);
            let j = argmax_neighbor(bwd);
            add_contribution(bwd[j].index, &gt[j], &bwd[j], 1.0);
        }
    }
    dpred
}
