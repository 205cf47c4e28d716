//! Incremental double description for cones `{y : A y >= 0}`.

use nalgebra::DMatrix;

use super::{normalize_max, Vector};

const ZERO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Default)]
pub(crate) struct ConeGens {
    pub lines: Vec<Vector>,
    pub rays: Vec<Vector>,
}

#[derive(Clone)]
struct Ray {
    v: Vector,
    zero: Vec<u64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn set_bit(bits: &mut [u64], k: usize) {
    bits[k / 64] |= 1u64 << (k % 64);
}

fn subset(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x & !y == 0)
}

fn bit(bits: &[u64], k: usize) -> bool {
    bits[k / 64] >> (k % 64) & 1 == 1
}

/// Recompute a freshly combined ray as the null vector of its active rows; the pairwise combination loses digits when the
/// parent rays are nearly parallel.
fn refine(v: &mut Vector, zero: &[u64], rows: &[Vector], upto: usize, n: usize) {
    let active: Vec<&Vector> = (0..=upto).filter(|&j| bit(zero, j)).map(|j| &rows[j]).collect();
    if active.len() + 1 < n {
        return;
    }
    let m = active.len().max(n);
    let mat = DMatrix::from_fn(m, n, |i, j| if i < active.len() { active[i][j] } else { 0.0 });
    let svd = mat.svd(false, true);
    let Some(vt) = svd.v_t else { return };
    let sv = &svd.singular_values;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| sv[a].total_cmp(&sv[b]));
    let (smallest, next) = (sv[idx[0]], if n > 1 { sv[idx[1]] } else { f64::INFINITY });
    let top = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    if smallest > 1e-9 * top.max(1.0) || next <= 1e-10 * top.max(1.0) {
        return;
    }
    let mut w: Vector = (0..n).map(|j| vt[(idx[0], j)]).collect();
    if dot(&w, v) < 0.0 {
        w.iter_mut().for_each(|x| *x = -*x);
    }
    if normalize_max(&mut w) {
        let close = w.iter().zip(v.iter()).all(|(a, b)| (a - b).abs() <= 1e-3);
        if close {
            *v = w;
        }
    }
}

/// Lines and extreme rays of `{y in R^n : row . y >= 0 for all rows}`.
/// Rays are returned orthogonal to the lineality space, max-norm 1.
pub(crate) fn cone_generators(rows: &[Vector], n: usize) -> ConeGens {
    let mut normed: Vec<Vector> = Vec::with_capacity(rows.len());
    for r in rows {
        let mut r = r.clone();
        if normalize_max(&mut r) {
            normed.push(r);
        }
    }
    let words = normed.len() / 64 + 1;

    let mut lines: Vec<Vector> = (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        })
        .collect();
    let mut rays: Vec<Ray> = Vec::new();

    for (k, a) in normed.iter().enumerate() {
        let mut pick: Option<(usize, f64)> = None;
        for (i, l) in lines.iter().enumerate() {
            let s = dot(a, l);
            if s.abs() > ZERO_TOL && pick.map_or(true, |(_, b)| s.abs() > b) {
                pick = Some((i, s.abs()));
            }
        }
        if let Some((i, _)) = pick {
            let mut lstar = lines.remove(i);
            if dot(a, &lstar) < 0.0 {
                lstar.iter_mut().for_each(|v| *v = -*v);
            }
            let s = dot(a, &lstar);
            for l in lines.iter_mut() {
                let f = dot(a, l) / s;
                for (x, y) in l.iter_mut().zip(&lstar) {
                    *x -= f * y;
                }
            }
            for r in rays.iter_mut() {
                let f = dot(a, &r.v) / s;
                for (x, y) in r.v.iter_mut().zip(&lstar) {
                    *x -= f * y;
                }
                normalize_max(&mut r.v);
                set_bit(&mut r.zero, k);
            }
            let mut zero = vec![0u64; words];
            for j in 0..k {
                set_bit(&mut zero, j);
            }
            normalize_max(&mut lstar);
            rays.push(Ray { v: lstar, zero });
            continue;
        }

        let s: Vec<f64> = rays.iter().map(|r| dot(a, &r.v)).collect();
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for (i, &si) in s.iter().enumerate() {
            if si > ZERO_TOL {
                pos.push(i);
            } else if si < -ZERO_TOL {
                neg.push(i);
            } else {
                set_bit(&mut rays[i].zero, k);
            }
        }
        if neg.is_empty() {
            continue;
        }
        let mut fresh = Vec::new();
        for &p in &pos {
            for &q in &neg {
                let common: Vec<u64> = rays[p].zero.iter().zip(&rays[q].zero).map(|(x, y)| x & y).collect();
                let blocked = rays
                    .iter()
                    .enumerate()
                    .any(|(j, r)| j != p && j != q && subset(&common, &r.zero));
                if blocked {
                    continue;
                }
                let mut v: Vector = rays[q].v.iter().zip(&rays[p].v).map(|(xn, xp)| s[p] * xn - s[q] * xp).collect();
                if !normalize_max(&mut v) {
                    continue;
                }
                let mut zero = common;
                set_bit(&mut zero, k);
                if lines.is_empty() {
                    refine(&mut v, &zero, &normed, k, n);
                }
                fresh.push(Ray { v, zero });
            }
        }
        let mut keep: Vec<Ray> = Vec::with_capacity(rays.len() - neg.len() + fresh.len());
        for (i, r) in rays.into_iter().enumerate() {
            if s[i] >= -ZERO_TOL {
                keep.push(r);
            }
        }
        keep.extend(fresh);
        rays = keep;
    }

    // orthonormal basis of the lineality space
    let mut basis: Vec<Vector> = Vec::new();
    for l in &lines {
        let mut v = l.clone();
        for q in &basis {
            let f = dot(&v, q);
            v.iter_mut().zip(q).for_each(|(x, y)| *x -= f * y);
        }
        let nrm = dot(&v, &v).sqrt();
        if nrm > 1e-12 {
            v.iter_mut().for_each(|x| *x /= nrm);
            basis.push(v);
        }
    }
    let mut out_rays: Vec<Vector> = Vec::new();
    for r in rays {
        let mut v = r.v;
        for q in &basis {
            let f = dot(&v, q);
            v.iter_mut().zip(q).for_each(|(x, y)| *x -= f * y);
        }
        if normalize_max(&mut v) && !out_rays.iter().any(|w| super::same_direction(w, &v)) {
            out_rays.push(v);
        }
    }
    let out_lines = basis
        .into_iter()
        .map(|mut v| {
            normalize_max(&mut v);
            v
        })
        .collect();
    ConeGens { lines: out_lines, rays: out_rays }
}
