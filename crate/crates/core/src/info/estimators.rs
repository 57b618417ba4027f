//! Nonparametric and Gaussian plug-in mutual information estimators.

use nalgebra::DMatrix;
use rand::Rng;
use statrs::function::gamma::digamma;

use super::kdtree::KdTree;
use super::{MIEstimate, MiMethod};
use crate::error::{Error, Result};
use crate::rng::stream;
use crate::stats::Summary;

/// Number of folds used for the standard error of an estimate.
pub const FOLDS: usize = 4;

/// Seed of the tie-breaking jitter. Fixed so estimates are deterministic.
const JITTER_SEED: u64 = 0x5_EED0_F7E5;
const JITTER_SCALE: f64 = 1e-10;

/// Joint-space condition number above which the plug-in estimator
/// regularises.
const PLUGIN_MAX_CONDITION: f64 = 1e12;
const PLUGIN_RIDGE: f64 = 1e-10;

/// A set of `n` points of equal dimension, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Points {
    dim: usize,
    data: Vec<f64>,
}

impl Points {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::invalid(
                "points",
                format!("{} values do not form rows of dimension {dim}", data.len()),
            ));
        }
        Ok(Points { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("points", "rows differ in length"));
        }
        Points::new(dim, rows.concat())
    }

    /// Scalars as one-dimensional points.
    pub fn from_scalars(values: Vec<f64>) -> Self {
        Points { dim: 1, data: values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    fn slice(&self, start: usize, end: usize) -> Points {
        Points {
            dim: self.dim,
            data: self.data[start * self.dim..end * self.dim].to_vec(),
        }
    }

    /// Rescale every coordinate to zero mean and unit variance. Constant
    /// coordinates are only centred.
    fn standardized(&self) -> Points {
        let n = self.len() as f64;
        let mut out = self.data.clone();
        for a in 0..self.dim {
            let col = || self.data.iter().skip(a).step_by(self.dim);
            let mean = col().sum::<f64>() / n;
            let var = col().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let scale = if var > 0.0 { var.sqrt().recip() } else { 1.0 };
            for v in out.iter_mut().skip(a).step_by(self.dim) {
                *v = (*v - mean) * scale;
            }
        }
        Points {
            dim: self.dim,
            data: out,
        }
    }
}

fn check_pair(xs: &Points, ys: &Points, min_len: usize) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::invalid(
            "samples",
            format!("x has {} points but y has {}", xs.len(), ys.len()),
        ));
    }
    if xs.len() < min_len {
        return Err(Error::invalid(
            "samples",
            format!("need at least {min_len} points, got {}", xs.len()),
        ));
    }
    Ok(())
}

/// KSG (algorithm 1) estimate of `I(X; Y)` in nats with max-norm
/// neighbourhoods.
///
/// Coordinates are standardised and perturbed by a uniform jitter of
/// relative size 1e-10 so that all neighbour distances are positive. The
/// standard error is the spread of the estimates on [`FOLDS`] disjoint
/// folds, scaled to the full sample.
pub fn ksg_mutual_information(xs: &Points, ys: &Points, k: usize) -> Result<MIEstimate> {
    if k == 0 {
        return Err(Error::invalid("k", "must be >= 1"));
    }
    check_pair(xs, ys, k + 1)?;
    let mut jitter = stream(JITTER_SEED);
    let x = jittered(&xs.standardized(), &mut jitter);
    let y = jittered(&ys.standardized(), &mut jitter);
    let n = x.len();
    let nats = ksg_core(&x, &y, k);
    let fold_len = n / FOLDS;
    let std_err = if fold_len > k {
        let folds: Vec<f64> = (0..FOLDS)
            .map(|f| {
                let (s, e) = (f * fold_len, (f + 1) * fold_len);
                ksg_core(&x.slice(s, e), &y.slice(s, e), k)
            })
            .collect();
        Summary::of(&folds).std_err
    } else {
        f64::NAN
    };
    Ok(MIEstimate {
        nats,
        method: MiMethod::Ksg { k },
        n_samples: n,
        std_err,
        regularized: false,
    })
}

fn jittered<R: Rng>(p: &Points, rng: &mut R) -> Points {
    Points {
        dim: p.dim,
        data: p
            .data
            .iter()
            .map(|v| v + JITTER_SCALE * rng.gen_range(-1.0..1.0))
            .collect(),
    }
}

fn ksg_core(x: &Points, y: &Points, k: usize) -> f64 {
    let n = x.len();
    let (dx, dy) = (x.dim, y.dim);
    let mut joint = Vec::with_capacity(n * (dx + dy));
    for i in 0..n {
        joint.extend_from_slice(x.row(i));
        joint.extend_from_slice(y.row(i));
    }
    let joint_tree = KdTree::new(dx + dy, &joint);
    let x_tree = KdTree::new(dx, &x.data);
    let y_tree = KdTree::new(dy, &y.data);
    let mut marginal = 0.0;
    for i in 0..n {
        let eps = joint_tree.kth_neighbor_distance(&joint[i * (dx + dy)..(i + 1) * (dx + dy)], i, k);
        // counts include the query point itself, which cancels the +1
        let nx = x_tree.count_within(x.row(i), eps);
        let ny = y_tree.count_within(y.row(i), eps);
        marginal += digamma(nx as f64) + digamma(ny as f64);
    }
    digamma(k as f64) + digamma(n as f64) - marginal / n as f64
}

/// Gaussian plug-in estimate `0.5 ln(det Σ_x det Σ_y / det Σ_xy)` computed on
/// the sample correlation matrix. A near-singular joint matrix is
/// regularised by `1e-10 I` and flagged.
pub fn gaussian_plugin_mi(xs: &Points, ys: &Points) -> Result<MIEstimate> {
    check_pair(xs, ys, xs.dim + ys.dim + 3)?;
    let n = xs.len();
    let (nats, regularized) = plugin_core(xs, ys);
    let fold_len = n / FOLDS;
    let std_err = if fold_len > xs.dim + ys.dim + 2 {
        let folds: Vec<f64> = (0..FOLDS)
            .map(|f| {
                let (s, e) = (f * fold_len, (f + 1) * fold_len);
                plugin_core(&xs.slice(s, e), &ys.slice(s, e)).0
            })
            .collect();
        Summary::of(&folds).std_err
    } else {
        f64::NAN
    };
    Ok(MIEstimate {
        nats,
        method: MiMethod::GaussianPlugin,
        n_samples: n,
        std_err,
        regularized,
    })
}

fn plugin_core(xs: &Points, ys: &Points) -> (f64, bool) {
    let (x, y) = (xs.standardized(), ys.standardized());
    let n = x.len();
    let (dx, dy) = (x.dim, y.dim);
    let dim = dx + dy;
    let mut corr = DMatrix::<f64>::zeros(dim, dim);
    let mut row = vec![0.0; dim];
    for i in 0..n {
        row[..dx].copy_from_slice(x.row(i));
        row[dx..].copy_from_slice(y.row(i));
        for a in 0..dim {
            for b in 0..=a {
                corr[(a, b)] += row[a] * row[b];
            }
        }
    }
    for a in 0..dim {
        for b in 0..=a {
            let v = corr[(a, b)] / n as f64;
            corr[(a, b)] = v;
            corr[(b, a)] = v;
        }
    }
    let eig = corr.clone().symmetric_eigen();
    let max_ev = eig.eigenvalues.max();
    let min_ev = eig.eigenvalues.min();
    let regularized = !(min_ev > 0.0 && max_ev / min_ev <= PLUGIN_MAX_CONDITION);
    if regularized {
        corr += DMatrix::<f64>::identity(dim, dim) * PLUGIN_RIDGE;
    }
    let log_det = |m: DMatrix<f64>| -> f64 {
        m.symmetric_eigen()
            .eigenvalues
            .iter()
            .map(|v| v.max(f64::MIN_POSITIVE).ln())
            .sum()
    };
    let lx = log_det(corr.view((0, 0), (dx, dx)).into_owned());
    let ly = log_det(corr.view((dx, dx), (dy, dy)).into_owned());
    let lj = log_det(corr);
    (0.5 * (lx + ly - lj), regularized)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand_distr::StandardNormal;

    fn correlated(n: usize, rho: f64, seed: u64) -> (Points, Points) {
        let mut rng = stream(seed);
        let (mut x, mut y) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for _ in 0..n {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            x.push(a);
            y.push(rho * a + (1.0 - rho * rho).sqrt() * b);
        }
        (Points::from_scalars(x), Points::from_scalars(y))
    }

    #[test]
    fn ksg_independent_is_near_zero() {
        let (x, y) = correlated(10_000, 0.0, 1);
        let est = ksg_mutual_information(&x, &y, 5).unwrap();
        assert!(est.nats.abs() < 0.02, "{est:?}");
        assert!(est.nats.abs() < 3.0 * est.std_err + 0.01, "{est:?}");
    }

    #[test]
    fn ksg_bivariate_gaussian() {
        let (x, y) = correlated(10_000, 0.5, 2);
        let exact = -0.5 * (1.0f64 - 0.25).ln();
        let est = ksg_mutual_information(&x, &y, 5).unwrap();
        assert!((est.nats - exact).abs() < 0.03, "{est:?} vs {exact}");
    }

    #[test]
    fn ksg_rejects_too_few_points() {
        let (x, y) = correlated(5, 0.5, 3);
        assert!(ksg_mutual_information(&x, &y, 5).is_err());
        let (x2, _) = correlated(6, 0.5, 3);
        assert!(ksg_mutual_information(&x2, &y, 1).is_err());
    }

    #[test]
    fn ksg_handles_duplicates() {
        let x = Points::from_scalars(vec![1.0; 200]);
        let y = Points::from_scalars((0..200).map(|i| (i % 3) as f64).collect());
        let est = ksg_mutual_information(&x, &y, 3).unwrap();
        assert!(est.nats.is_finite());
    }

    #[test]
    fn plugin_independent_and_agreement() {
        let (x, y) = correlated(10_000, 0.0, 4);
        let est = gaussian_plugin_mi(&x, &y).unwrap();
        assert!(est.nats.abs() < 0.02);
        assert!(!est.regularized);

        let (x, y) = correlated(10_000, 0.6, 5);
        let ksg = ksg_mutual_information(&x, &y, 5).unwrap();
        let plug = gaussian_plugin_mi(&x, &y).unwrap();
        assert!((ksg.nats - plug.nats).abs() < 0.05, "{ksg:?} {plug:?}");
    }

    #[test]
    fn plugin_flags_near_singular() {
        let mut rng = stream(6);
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for _ in 0..10_000 {
            let a: f64 = rng.sample(StandardNormal);
            let e: f64 = rng.sample(StandardNormal);
            x.push(a);
            y.push(2.0 * a + 1e-8 * e);
        }
        let est = gaussian_plugin_mi(&Points::from_scalars(x), &Points::from_scalars(y)).unwrap();
        assert!(est.regularized);
        assert!(est.nats > 5.0, "{est:?}");
    }

    #[test]
    fn points_validation() {
        assert!(Points::new(2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(Points::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        let p = Points::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.row(1), &[3.0, 4.0]);
    }
}
