//! Polyhedral calculus: cones, H/V conversion, intersections, Minkowski sums
//! with cones and convex hulls of unions.

mod dd;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linprog::{self, LpProblem};

pub type Vector = Vec<f64>;
pub type Matrix = Vec<Vec<f64>>;

pub const LP_TOL: f64 = 1e-9;
pub const DEDUP_TOL: f64 = 1e-7;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Scale to max-norm 1. Returns false for (numerically) zero vectors.
pub fn normalize_max(v: &mut [f64]) -> bool {
    let m = max_abs(v);
    if m < 1e-14 {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= m);
    true
}

pub(crate) fn same_point(a: &[f64], b: &[f64]) -> bool {
    let scale = 1.0f64.max(max_abs(a)).max(max_abs(b));
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= DEDUP_TOL * scale)
}

/// Both arguments must already be max-norm normalized.
pub(crate) fn same_direction(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= DEDUP_TOL)
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

fn check_finite(vs: &[Vector], what: &str) -> Result<()> {
    if vs.iter().flatten().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("non-finite entry in {what}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HRep {
    #[serde(rename = "B")]
    pub a: Matrix,
    pub b: Vector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VRep {
    pub points: Matrix,
    pub rays: Matrix,
}

/// Convex polyhedron `{x : B x >= b}` with its generator form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyhedron {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hrep: Option<HRep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vrep: Option<VRep>,
}

/// Finitely generated convex cone; `generators` holds the columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cone {
    pub dim: usize,
    pub generators: Vec<Vector>,
}

impl Cone {
    pub fn new(dim: usize, generators: Vec<Vector>) -> Result<Cone> {
        if generators.iter().any(|g| g.len() != dim) {
            return Err(Error::DimensionMismatch(format!("cone generators must have length {dim}")));
        }
        check_finite(&generators, "cone generators")?;
        let generators = generators.into_iter().filter(|g| max_abs(g) > 1e-14).collect();
        Ok(Cone { dim, generators })
    }

    pub fn orthant(dim: usize) -> Cone {
        let gens = (0..dim)
            .map(|i| {
                let mut e = vec![0.0; dim];
                e[i] = 1.0;
                e
            })
            .collect();
        Cone { dim, generators: gens }
    }

    /// LP test for `v in cone(generators)`.
    pub fn contains(&self, v: &[f64]) -> Result<bool> {
        cone_contains(&self.generators, v, self.dim)
    }

    /// Drop generators that are nonnegative combinations of the others,
    /// keeping the scaling of the survivors.
    pub fn reduced(&self) -> Result<Cone> {
        let mut gens: Vec<Vector> = Vec::new();
        for g in &self.generators {
            let mut n = g.clone();
            normalize_max(&mut n);
            let dup = gens.iter().any(|h| {
                let mut m = h.clone();
                normalize_max(&mut m);
                same_direction(&m, &n)
            });
            if !dup {
                gens.push(g.clone());
            }
        }
        let mut i = 0;
        while i < gens.len() {
            let others: Vec<Vector> = gens.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, g)| g.clone()).collect();
            if !others.is_empty() && cone_contains(&others, &gens[i], self.dim)? {
                gens.remove(i);
            } else {
                i += 1;
            }
        }
        Ok(Cone { dim: self.dim, generators: gens })
    }

    /// True when the cone contains a line (checked by LP).
    pub fn has_lines(&self) -> Result<bool> {
        let s = self.generators.len();
        if s == 0 {
            return Ok(false);
        }
        let mut p = LpProblem::new(s);
        p.set_nonneg(0..s);
        for i in 0..self.dim {
            p.add_eq(self.generators.iter().map(|g| g[i]).collect(), 0.0);
        }
        p.add_eq(vec![1.0; s], 1.0);
        linprog::feasible(&p)
    }
}

fn cone_contains(gens: &[Vector], v: &[f64], dim: usize) -> Result<bool> {
    if max_abs(v) < 1e-14 {
        return Ok(true);
    }
    if gens.is_empty() {
        return Ok(false);
    }
    let s = gens.len();
    let scale = max_abs(v);
    let mut p = LpProblem::new(s);
    p.set_nonneg(0..s);
    for i in 0..dim {
        p.add_eq(gens.iter().map(|g| g[i]).collect(), v[i] / scale);
    }
    linprog::feasible(&p)
}

/// Generators of `{v : v . u >= 0 for all u in cone(c)}`.
pub fn dual_cone(c: &Cone) -> Result<Cone> {
    if c.dim == 0 {
        return Err(Error::DimensionMismatch("cone of dimension zero".into()));
    }
    let g = dd::cone_generators(&c.generators, c.dim);
    let mut gens = g.rays;
    for l in g.lines {
        gens.push(l.iter().map(|x| -x).collect());
        gens.push(l);
    }
    gens.sort_by(|a, b| lex_cmp(b, a));
    Ok(Cone { dim: c.dim, generators: gens })
}

/// Homogenization scale keeping the extra coordinate comparable to the data.
fn hscale(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(1.0f64, |m, v| m.max(v.abs()))
}

fn hrep_to_vrep(h: &HRep, dim: usize) -> Option<VRep> {
    let sigma = hscale(h.a.iter().zip(&h.b).map(|(row, b)| {
        let m = max_abs(row);
        if m > 0.0 {
            b / m
        } else {
            0.0
        }
    }));
    let mut rows: Vec<Vector> = h
        .a
        .iter()
        .zip(&h.b)
        .map(|(row, b)| {
            let mut r = row.clone();
            r.push(-b / sigma);
            r
        })
        .collect();
    let mut t = vec![0.0; dim + 1];
    t[dim] = 1.0;
    rows.push(t);
    let g = dd::cone_generators(&rows, dim + 1);
    let mut points = Vec::new();
    let mut rays = Vec::new();
    let recedes = |d: &[f64]| {
        let mut d = d.to_vec();
        normalize_max(&mut d)
            && h.a.iter().all(|a| {
                let m = max_abs(a);
                m == 0.0 || dot(a, &d) >= -1e-9 * m
            })
    };
    for r in g.rays {
        let tau = r[dim];
        // a far point along a recession direction is round-off on a ray
        if tau > 1e-9 && (tau > 1e-6 || !recedes(&r[..dim])) {
            points.push(r[..dim].iter().map(|x| sigma * x / tau).collect::<Vector>());
        } else {
            let mut d = r[..dim].to_vec();
            if normalize_max(&mut d) {
                rays.push(d);
            }
        }
    }
    for l in g.lines {
        let mut d = l[..dim].to_vec();
        if normalize_max(&mut d) {
            rays.push(d.iter().map(|x| -x).collect());
            rays.push(d);
        }
    }
    if points.is_empty() {
        return None;
    }
    Some(canonical_vrep(points, rays))
}

fn canonical_vrep(points: Matrix, rays: Matrix) -> VRep {
    let mut pts: Matrix = Vec::new();
    for p in points {
        if !pts.iter().any(|q| same_point(q, &p)) {
            pts.push(p);
        }
    }
    let mut rs: Matrix = Vec::new();
    for mut r in rays {
        if normalize_max(&mut r) && !rs.iter().any(|q| same_direction(q, &r)) {
            rs.push(r);
        }
    }
    pts.sort_by(|a, b| lex_cmp(a, b));
    rs.sort_by(|a, b| lex_cmp(a, b));
    VRep { points: pts, rays: rs }
}

fn vrep_to_hrep(v: &VRep, dim: usize) -> HRep {
    let sigma = hscale(v.points.iter().flatten().copied());
    let mut gens: Vec<Vector> = v
        .points
        .iter()
        .map(|p| {
            let mut g: Vector = p.iter().map(|x| x / sigma).collect();
            g.push(1.0);
            g
        })
        .collect();
    for r in &v.rays {
        let mut g = r.clone();
        g.push(0.0);
        gens.push(g);
    }
    let g = dd::cone_generators(&gens, dim + 1);
    let mut rows: Vec<(Vector, f64)> = Vec::new();
    let push = |a: &[f64], beta: f64, rows: &mut Vec<(Vector, f64)>| {
        let mut a = a.to_vec();
        let m = max_abs(&a);
        // the homogenizing face tau >= 0, possibly carrying round-off
        if m < 1e-12 || m < 1e-8 * beta.abs() {
            return;
        }
        a.iter_mut().for_each(|x| *x /= m);
        rows.push((a, -beta * sigma / m));
    };
    for r in &g.rays {
        push(&r[..dim], r[dim], &mut rows);
    }
    for l in &g.lines {
        push(&l[..dim], l[dim], &mut rows);
        let neg: Vector = l.iter().map(|x| -x).collect();
        push(&neg[..dim], neg[dim], &mut rows);
    }
    rows.sort_by(|a, b| lex_cmp(&a.0, &b.0).then(a.1.total_cmp(&b.1)));
    HRep { a: rows.iter().map(|r| r.0.clone()).collect(), b: rows.iter().map(|r| r.1).collect() }
}

impl Polyhedron {
    pub fn empty(dim: usize) -> Polyhedron {
        Polyhedron {
            dim,
            hrep: Some(HRep { a: vec![vec![0.0; dim]], b: vec![1.0] }),
            vrep: Some(VRep { points: Vec::new(), rays: Vec::new() }),
        }
    }

    /// Canonical polyhedron from inequalities `a x >= b`; may be empty.
    pub fn from_hrep(a: Matrix, b: Vector) -> Result<Polyhedron> {
        let dim = a.first().map(|r| r.len()).ok_or_else(|| Error::InvalidInput("H-representation needs a row or an explicit dimension".into()))?;
        Polyhedron::from_hrep_dim(dim, a, b)
    }

    pub fn from_hrep_dim(dim: usize, a: Matrix, b: Vector) -> Result<Polyhedron> {
        if a.len() != b.len() || a.iter().any(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch("H-representation shape".into()));
        }
        check_finite(&a, "H-representation")?;
        check_finite(&[b.clone()], "H-representation")?;
        let h = HRep { a, b };
        match hrep_to_vrep(&h, dim) {
            None => Ok(Polyhedron::empty(dim)),
            Some(v) => {
                let h = vrep_to_hrep(&v, dim);
                Ok(Polyhedron { dim, hrep: Some(h), vrep: Some(v) })
            }
        }
    }

    /// Canonical polyhedron from points and rays; no points means empty.
    pub fn from_vrep(dim: usize, points: Matrix, rays: Matrix) -> Result<Polyhedron> {
        if points.iter().chain(rays.iter()).any(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch("V-representation shape".into()));
        }
        check_finite(&points, "V-representation")?;
        check_finite(&rays, "V-representation")?;
        if points.is_empty() {
            return Ok(Polyhedron::empty(dim));
        }
        let v = canonical_vrep(points, rays);
        let h = vrep_to_hrep(&v, dim);
        let v = hrep_to_vrep(&h, dim).ok_or_else(|| Error::NumericalFailure("hull of nonempty V-representation came out empty".into()))?;
        Ok(Polyhedron { dim, hrep: Some(h), vrep: Some(v) })
    }

    pub fn is_empty(&self) -> bool {
        match &self.vrep {
            Some(v) => v.points.is_empty(),
            None => hrep_to_vrep(self.hrep.as_ref().expect("polyhedron without representation"), self.dim).is_none(),
        }
    }

    pub fn hrep(&self) -> &HRep {
        self.hrep.as_ref().expect("canonical polyhedron carries an H-representation")
    }

    pub fn vrep(&self) -> &VRep {
        self.vrep.as_ref().expect("canonical polyhedron carries a V-representation")
    }

    pub fn points(&self) -> &Matrix {
        &self.vrep().points
    }

    pub fn rays(&self) -> &Matrix {
        &self.vrep().rays
    }

    /// Bring a partially specified polyhedron into canonical form.
    pub fn canonical(&self) -> Result<Polyhedron> {
        match (&self.hrep, &self.vrep) {
            (Some(h), _) => Polyhedron::from_hrep_dim(self.dim, h.a.clone(), h.b.clone()),
            (None, Some(v)) => Polyhedron::from_vrep(self.dim, v.points.clone(), v.rays.clone()),
            (None, None) => Err(Error::InvalidInput("polyhedron without representation".into())),
        }
    }

    pub fn to_vrep(&self) -> Result<Polyhedron> {
        let p = self.canonical()?;
        if p.is_empty() {
            return Err(Error::EmptyPolyhedron);
        }
        Ok(p)
    }

    pub fn to_hrep(&self) -> Result<Polyhedron> {
        self.canonical()
    }

    /// Worst violation `max_i (b_i - a_i x)` (negative inside).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let h = self.hrep();
        h.a.iter().zip(&h.b).map(|(a, b)| b - dot(a, x)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains_tol(&self, x: &[f64], tol: f64) -> bool {
        let h = self.hrep();
        let scale = 1.0 + max_abs(x);
        h.a.iter().zip(&h.b).all(|(a, b)| dot(a, x) - b >= -tol * scale)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.contains_tol(x, LP_TOL)
    }

    /// Recession-direction test against the H-representation.
    pub fn contains_ray(&self, r: &[f64]) -> bool {
        let mut r = r.to_vec();
        if !normalize_max(&mut r) {
            return true;
        }
        self.hrep().a.iter().all(|a| dot(a, &r) >= -LP_TOL)
    }
}

/// Numerical rank by Gaussian elimination with partial pivoting.
pub fn rank(vectors: &[Vector], tol: f64) -> usize {
    let mut m: Vec<Vector> = vectors.to_vec();
    let cols = m.first().map_or(0, |r| r.len());
    let mut r = 0;
    for c in 0..cols {
        let piv = (r..m.len()).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()));
        let Some(piv) = piv else { break };
        if m[piv][c].abs() <= tol {
            continue;
        }
        m.swap(r, piv);
        for i in r + 1..m.len() {
            let f = m[i][c] / m[r][c];
            for k in c..cols {
                m[i][k] -= f * m[r][k];
            }
        }
        r += 1;
    }
    r
}

impl Polyhedron {
    /// Dimension of the affine hull (-1 for the empty set).
    pub fn affine_dim(&self) -> isize {
        if self.is_empty() {
            return -1;
        }
        let v = self.vrep();
        let p0 = &v.points[0];
        let mut dirs: Vec<Vector> = v.points[1..].iter().map(|p| p.iter().zip(p0).map(|(a, b)| a - b).collect()).collect();
        for d in dirs.iter_mut() {
            normalize_max(d);
        }
        dirs.extend(v.rays.iter().cloned());
        rank(&dirs, 1e-7) as isize
    }
}

pub fn intersect(ps: &[Polyhedron]) -> Result<Polyhedron> {
    let dim = ps.first().map(|p| p.dim).ok_or_else(|| Error::InvalidInput("intersect of nothing".into()))?;
    if ps.iter().any(|p| p.dim != dim) {
        return Err(Error::DimensionMismatch("intersect operands".into()));
    }
    let mut a = Vec::new();
    let mut b = Vec::new();
    for p in ps {
        let p = if p.hrep.is_some() { p.clone() } else { p.canonical()? };
        let h = p.hrep();
        a.extend(h.a.iter().cloned());
        b.extend(h.b.iter().copied());
    }
    Polyhedron::from_hrep_dim(dim, a, b)
}

pub fn add_cone(p: &Polyhedron, c: &Cone) -> Result<Polyhedron> {
    if p.dim != c.dim {
        return Err(Error::DimensionMismatch("add_cone operands".into()));
    }
    let p = if p.vrep.is_some() { p.clone() } else { p.canonical()? };
    if p.is_empty() {
        return Err(Error::EmptyPolyhedron);
    }
    let v = p.vrep();
    let mut rays = v.rays.clone();
    rays.extend(c.generators.iter().cloned());
    Polyhedron::from_vrep(p.dim, v.points.clone(), rays)
}

pub fn convex_union(ps: &[Polyhedron]) -> Result<Polyhedron> {
    let dim = ps.first().map(|p| p.dim).ok_or_else(|| Error::InvalidInput("convex_union of nothing".into()))?;
    let mut points = Vec::new();
    let mut rays = Vec::new();
    for p in ps {
        if p.dim != dim {
            return Err(Error::DimensionMismatch("convex_union operands".into()));
        }
        let p = if p.vrep.is_some() { p.clone() } else { p.canonical()? };
        points.extend(p.vrep().points.iter().cloned());
        rays.extend(p.vrep().rays.iter().cloned());
    }
    Polyhedron::from_vrep(dim, points, rays)
}
