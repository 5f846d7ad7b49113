use serde::{Deserialize, Serialize};

use super::efb::BundleMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// Rows with `bin <= bin` (raw value `<= threshold`) go left.
    Split {
        feature: usize,
        bin: u16,
        threshold: f64,
        gain: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Prediction from column-major feature bins.
    pub fn predict_binned(&self, bins: &[Vec<u16>], row: usize) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    bin,
                    left,
                    right,
                    ..
                } => i = if bins[*feature][row] <= *bin { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }

    /// `(feature, gain)` of every split.
    pub fn splits(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { feature, gain, .. } => Some((*feature, *gain)),
            Node::Leaf { .. } => None,
        })
    }
}

/// Inputs shared by every tree of one fit.
pub struct TrainView<'a> {
    /// Column-major bins per original feature.
    pub feature_bins: &'a [Vec<u16>],
    /// Column-major bins per bundle.
    pub bundle_bins: &'a [Vec<u16>],
    pub bundles: &'a BundleMap,
    pub num_bins: &'a [usize],
    /// Bin upper edges per feature, for raw-value thresholds.
    pub boundaries: &'a [Vec<f64>],
}

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitInfo {
    pub feature: usize,
    pub bin: u16,
    pub gain: f64,
}

/// Gradient and hessian sums per bundle bin, laid out bundle after bundle.
#[derive(Clone)]
struct Hist {
    g: Vec<f64>,
    h: Vec<f64>,
    c: Vec<u32>,
}

impl Hist {
    fn build(view: &TrainView, rows: &[u32], grad: &[f64], hess: &[f64], starts: &[usize]) -> Self {
        let parts = crate::par::map_indices(view.bundles.bundles.len(), rows.len(), |b| {
            let m = view.bundles.bundles[b].num_bins;
            let col = &view.bundle_bins[b];
            let mut g = vec![0.0; m];
            let mut h = vec![0.0; m];
            let mut c = vec![0u32; m];
            for &r in rows {
                let r = r as usize;
                let v = col[r] as usize;
                g[v] += grad[r];
                h[v] += hess[r];
                c[v] += 1;
            }
            (g, h, c)
        });
        let total = *starts.last().unwrap_or(&0);
        let mut out = Hist {
            g: Vec::with_capacity(total),
            h: Vec::with_capacity(total),
            c: Vec::with_capacity(total),
        };
        for (g, h, c) in parts {
            out.g.extend(g);
            out.h.extend(h);
            out.c.extend(c);
        }
        out
    }

    fn minus(&self, other: &Hist) -> Hist {
        Hist {
            g: self.g.iter().zip(&other.g).map(|(a, b)| a - b).collect(),
            h: self.h.iter().zip(&other.h).map(|(a, b)| a - b).collect(),
            c: self.c.iter().zip(&other.c).map(|(a, b)| a - b).collect(),
        }
    }
}

#[derive(Clone, Copy)]
struct Totals {
    g: f64,
    h: f64,
    c: usize,
}

fn totals(rows: &[u32], grad: &[f64], hess: &[f64]) -> Totals {
    let mut t = Totals { g: 0.0, h: 0.0, c: rows.len() };
    for &r in rows {
        t.g += grad[r as usize];
        t.h += hess[r as usize];
    }
    t
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

/// Gain of sending `(gl, hl)` left out of a node with totals `(g, h)`.
pub fn split_gain(gl: f64, hl: f64, g: f64, h: f64, lambda: f64) -> f64 {
    score(gl, hl, lambda) + score(g - gl, h - hl, lambda) - score(g, h, lambda)
}

fn best_split(view: &TrainView, hist: &Hist, starts: &[usize], t: Totals, p: &TreeParams) -> Option<SplitInfo> {
    let mut best: Option<SplitInfo> = None;
    let mut consider = |feature: usize, bin: usize, gl: f64, hl: f64, cl: usize| {
        let cr = t.c - cl;
        if cl < p.min_samples_leaf || cr < p.min_samples_leaf {
            return;
        }
        let gain = split_gain(gl, hl, t.g, t.h, p.lambda);
        if gain > 0.0 && best.is_none_or(|b| gain > b.gain) {
            best = Some(SplitInfo {
                feature,
                bin: bin as u16,
                gain,
            });
        }
    };
    // Features are scanned in index order so ties resolve to the lowest
    // feature, then the lowest bin.
    let mut located: Vec<(usize, usize, usize)> = Vec::new();
    for (b, bundle) in view.bundles.bundles.iter().enumerate() {
        for (&f, &o) in bundle.features.iter().zip(&bundle.offsets) {
            located.push((f, starts[b], o));
        }
    }
    located.sort_unstable_by_key(|l| l.0);
    for (f, start, offset) in located {
        let m = view.num_bins[f];
        if m < 2 {
            continue;
        }
        let at = |k: usize| start + offset + k - 1;
        // Bin 0 is whatever the nonzero bins leave of the node totals.
        let (mut g0, mut h0, mut c0) = (t.g, t.h, t.c);
        for k in 1..m {
            g0 -= hist.g[at(k)];
            h0 -= hist.h[at(k)];
            c0 -= hist.c[at(k)] as usize;
        }
        let (mut gl, mut hl, mut cl) = (g0, h0, c0);
        consider(f, 0, gl, hl, cl);
        for k in 1..m - 1 {
            gl += hist.g[at(k)];
            hl += hist.h[at(k)];
            cl += hist.c[at(k)] as usize;
            consider(f, k, gl, hl, cl);
        }
    }
    best
}

fn bundle_starts(view: &TrainView) -> Vec<usize> {
    let mut starts = Vec::with_capacity(view.bundles.bundles.len() + 1);
    let mut acc = 0;
    starts.push(0);
    for b in &view.bundles.bundles {
        acc += b.num_bins;
        starts.push(acc);
    }
    starts
}

/// Best split of the node holding `rows`, or `None` when no admissible
/// split has positive gain.
pub fn find_split(
    view: &TrainView,
    rows: &[u32],
    grad: &[f64],
    hess: &[f64],
    p: &TreeParams,
) -> Option<SplitInfo> {
    let starts = bundle_starts(view);
    let hist = Hist::build(view, rows, grad, hess, &starts);
    best_split(view, &hist, &starts, totals(rows, grad, hess), p)
}

struct Pending {
    node: usize,
    rows: Vec<u32>,
    hist: Option<Hist>,
    depth: usize,
}

/// Grow one tree level by level. `grad` and `hess` are indexed by row and
/// already carry any sample weights; only `rows` take part.
pub fn grow_tree(view: &TrainView, rows: Vec<u32>, grad: &[f64], hess: &[f64], p: &TreeParams) -> Tree {
    let starts = bundle_starts(view);
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut level = vec![Pending {
        node: 0,
        rows,
        hist: None,
        depth: 0,
    }];
    while !level.is_empty() {
        let mut next = Vec::new();
        for mut item in level {
            let t = totals(&item.rows, grad, hess);
            let leaf = Node::Leaf {
                value: if t.c == 0 { 0.0 } else { -t.g / (t.h + p.lambda) },
            };
            if item.depth >= p.max_depth || t.c < 2 * p.min_samples_leaf {
                nodes[item.node] = leaf;
                continue;
            }
            let hist = match item.hist.take() {
                Some(h) => h,
                None => Hist::build(view, &item.rows, grad, hess, &starts),
            };
            let Some(split) = best_split(view, &hist, &starts, t, p) else {
                nodes[item.node] = leaf;
                continue;
            };
            let col = &view.feature_bins[split.feature];
            let (left_rows, right_rows): (Vec<u32>, Vec<u32>) =
                item.rows.iter().partition(|&&r| col[r as usize] <= split.bin);
            let (left, right) = (nodes.len(), nodes.len() + 1);
            nodes.push(Node::Leaf { value: 0.0 });
            nodes.push(Node::Leaf { value: 0.0 });
            nodes[item.node] = Node::Split {
                feature: split.feature,
                bin: split.bin,
                threshold: view.boundaries[split.feature][split.bin as usize],
                gain: split.gain,
                left,
                right,
            };
            let depth = item.depth + 1;
            let (lh, rh) = if depth < p.max_depth
                && left_rows.len() >= 2 * p.min_samples_leaf
                && right_rows.len() >= 2 * p.min_samples_leaf
            {
                // Build the smaller child directly, derive the other.
                if left_rows.len() <= right_rows.len() {
                    let l = Hist::build(view, &left_rows, grad, hess, &starts);
                    let r = hist.minus(&l);
                    (Some(l), Some(r))
                } else {
                    let r = Hist::build(view, &right_rows, grad, hess, &starts);
                    let l = hist.minus(&r);
                    (Some(l), Some(r))
                }
            } else {
                (None, None)
            };
            next.push(Pending { node: left, rows: left_rows, hist: lh, depth });
            next.push(Pending { node: right, rows: right_rows, hist: rh, depth });
        }
        level = next;
    }
    Tree { nodes }
}
