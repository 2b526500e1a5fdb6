use super::{IndexVector, MetricsError, Result};
use crate::numeric::fmt_f64;

/// One agglomeration step. Ids below `n` are leaves; step `k` creates
/// cluster `n + k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub labels: Vec<String>,
    pub merges: Vec<Merge>,
    /// Feature names used, after dropping incomplete dimensions.
    pub dimensions: Vec<String>,
}

const FEATURES: [&str; 8] = [
    "diam", "dens", "trans", "sp_mean", "sp_sd", "sw", "sf_alpha", "dc",
];

/// Complete-linkage clustering of index vectors on Euclidean distance.
/// Dimensions absent in any vector are dropped for all, with a warning.
pub fn hclust_complete(vectors: &[IndexVector], standardize: bool) -> Result<Dendrogram> {
    let keep: Vec<usize> = (0..8)
        .filter(|&d| vectors.iter().all(|v| v.features()[d].is_some_and(f64::is_finite)))
        .collect();
    if keep.is_empty() {
        return Err(MetricsError::IncompleteVectors);
    }
    if keep.len() < 8 {
        let dropped: Vec<&str> = (0..8).filter(|d| !keep.contains(d)).map(|d| FEATURES[d]).collect();
        log::warn!("dropping incomplete dimensions: {}", dropped.join(", "));
    }
    let points: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| keep.iter().map(|&d| v.features()[d].unwrap()).collect())
        .collect();
    let labels: Vec<String> = vectors.iter().map(|v| v.window_id.clone()).collect();
    let mut dendro = hclust_points(&labels, &points, standardize)?;
    dendro.dimensions = keep.iter().map(|&d| FEATURES[d].to_string()).collect();
    Ok(dendro)
}

/// Per-column z-scores (population sd); constant columns become 0.
pub fn standardized(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = points.len() as f64;
    let dims = points.first().map_or(0, Vec::len);
    let mut out = points.to_vec();
    for d in 0..dims {
        let mean = points.iter().map(|p| p[d]).sum::<f64>() / n;
        let sd = (points.iter().map(|p| (p[d] - mean).powi(2)).sum::<f64>() / n).sqrt();
        for p in &mut out {
            p[d] = if sd > 0.0 { (p[d] - mean) / sd } else { 0.0 };
        }
    }
    out
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Complete linkage via Lance–Williams updates. Ties in distance go to the
/// pair whose labels (smallest leaf label of each cluster) sort first.
pub fn hclust_points(labels: &[String], points: &[Vec<f64>], standardize: bool) -> Result<Dendrogram> {
    let n = points.len();
    if n < 2 || labels.len() != n {
        return Err(MetricsError::InvalidArgument(format!(
            "need at least 2 labelled vectors, got {n}"
        )));
    }
    if points.iter().any(|p| p.len() != points[0].len()) {
        return Err(MetricsError::InvalidArgument("vectors differ in dimension".into()));
    }
    let pts = if standardize { standardized(points) } else { points.to_vec() };
    let mut dist: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| euclid(&pts[i], &pts[j])).collect())
        .collect();
    // per active slot: cluster id, size, sort key
    let mut slots: Vec<Option<(usize, usize, String)>> =
        (0..n).map(|i| Some((i, 1, labels[i].clone()))).collect();
    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let mut best: Option<(f64, &str, &str, usize, usize)> = None;
        for i in 0..n {
            let Some((_, _, ki)) = &slots[i] else { continue };
            for j in i + 1..n {
                let Some((_, _, kj)) = &slots[j] else { continue };
                let (lo, hi) = if ki <= kj { (ki.as_str(), kj.as_str()) } else { (kj.as_str(), ki.as_str()) };
                let better = match best {
                    None => true,
                    Some((d, bl, bh, _, _)) => {
                        dist[i][j] < d || (dist[i][j] == d && (lo, hi) < (bl, bh))
                    }
                };
                if better {
                    best = Some((dist[i][j], lo, hi, i, j));
                }
            }
        }
        let (height, _, _, i, j) = best.expect("at least two active clusters");
        let (id_i, size_i, key_i) = slots[i].take().unwrap();
        let (id_j, size_j, key_j) = slots[j].take().unwrap();
        for k in 0..n {
            if slots[k].is_some() {
                let d = dist[i][k].max(dist[j][k]);
                dist[i][k] = d;
                dist[k][i] = d;
            }
        }
        let (a, b) = if key_i <= key_j { (id_i, id_j) } else { (id_j, id_i) };
        merges.push(Merge { a, b, height, size: size_i + size_j });
        slots[i] = Some((n + step, size_i + size_j, key_i.min(key_j)));
    }
    Ok(Dendrogram {
        labels: labels.to_vec(),
        merges,
        dimensions: Vec::new(),
    })
}

fn newick_label(s: &str) -> String {
    if s.chars().any(|c| "()[]':;,".contains(c) || c.is_whitespace()) {
        format!("'{}'", s.replace('\'', "''"))
    } else {
        s.to_string()
    }
}

impl Dendrogram {
    fn height_of(&self, id: usize) -> f64 {
        if id < self.labels.len() {
            0.0
        } else {
            self.merges[id - self.labels.len()].height
        }
    }

    /// Newick text; branch lengths are height differences, so the tree is
    /// ultrametric with the root at the last merge height.
    pub fn to_newick(&self) -> String {
        fn rec(d: &Dendrogram, id: usize, out: &mut String) {
            let n = d.labels.len();
            if id < n {
                out.push_str(&newick_label(&d.labels[id]));
                return;
            }
            let m = d.merges[id - n];
            out.push('(');
            for (k, child) in [m.a, m.b].into_iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                rec(d, child, out);
                out.push(':');
                out.push_str(&fmt_f64(m.height - d.height_of(child)));
            }
            out.push(')');
        }
        let mut out = String::new();
        match self.merges.len() {
            0 => out.push_str(&newick_label(&self.labels[0])),
            k => rec(self, self.labels.len() + k - 1, &mut out),
        }
        out.push(';');
        out
    }

    /// Cluster number (1-based, in order of first leaf) of each leaf when
    /// the tree is cut into `k` clusters.
    pub fn cut(&self, k: usize) -> Vec<usize> {
        let n = self.labels.len();
        let k = k.clamp(1, n);
        let mut parent: Vec<usize> = (0..2 * n - 1).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            p[x] = r;
            r
        }
        for (step, m) in self.merges.iter().take(n - k).enumerate() {
            parent[m.a] = n + step;
            parent[m.b] = n + step;
        }
        let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
        let mut order: Vec<usize> = Vec::new();
        roots
            .iter()
            .map(|r| match order.iter().position(|x| x == r) {
                Some(p) => p + 1,
                None => {
                    order.push(*r);
                    order.len()
                }
            })
            .collect()
    }
}
