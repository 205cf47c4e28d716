//! Linear vector optimization: minimize `P x` with respect to a polyhedral
//! ordering cone `C` over `{x : B x >= b}`, solved by the primal Benson
//! outer-approximation loop, with the geometric dual attached.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dot, dual_cone, max_abs, normalize_max, same_point, Cone, Matrix, Polyhedron, Vector};
use crate::linprog::{self, LpProblem, LpStatus};

const CUT_TOL: f64 = 1e-8;
const MAX_ROUNDS: usize = 2_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VopProblem {
    #[serde(rename = "P")]
    pub p: Matrix,
    #[serde(rename = "B")]
    pub b_mat: Matrix,
    pub b: Vector,
    /// Generators of the ordering cone, one vector per generator.
    #[serde(rename = "C")]
    pub ordering: Vec<Vector>,
    pub c: Vector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualPoint {
    pub u: Vector,
    pub w: Vector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VopSolution {
    pub primal_points: Vec<Vector>,
    pub primal_directions: Vec<Vector>,
    pub dual_points: Vec<DualPoint>,
    pub upper_image: Polyhedron,
    pub lower_image: Polyhedron,
    pub c: Vector,
}

/// `phi(y, y*)`; nonnegative exactly on compatible primal/dual image points.
pub fn coupling(y: &[f64], ystar: &[f64], c: &[f64]) -> f64 {
    coupling_hat(y, ystar, c) - ystar[ystar.len() - 1]
}

pub fn coupling_hat(y: &[f64], ystar: &[f64], c: &[f64]) -> f64 {
    let q = y.len();
    let mut s = 0.0;
    let mut cs = 0.0;
    for i in 0..q - 1 {
        s += y[i] * ystar[i];
        cs += c[i] * ystar[i];
    }
    s + y[q - 1] * (1.0 - cs)
}

/// `D*(u, w) = (w_1, ..., w_{q-1}, b^T u)`.
pub fn dual_objective(dp: &DualPoint, b: &[f64]) -> Vector {
    let q = dp.w.len();
    let mut y = dp.w[..q - 1].to_vec();
    y.push(dot(b, &dp.u));
    y
}

/// Recover `w` from a dual image point: `w_q = 1 - sum_{i<q} c_i y*_i`.
pub fn weight_of(ystar: &[f64], c: &[f64]) -> Vector {
    let q = ystar.len();
    let mut w = ystar[..q - 1].to_vec();
    w.push(1.0 - (0..q - 1).map(|i| c[i] * ystar[i]).sum::<f64>());
    w
}

impl VopProblem {
    pub fn q(&self) -> usize {
        self.p.len()
    }

    pub fn n(&self) -> usize {
        self.p.first().map_or(0, |r| r.len())
    }

    pub fn validate(&self) -> Result<Cone> {
        let q = self.q();
        let n = self.n();
        if q == 0 || n == 0 {
            return Err(Error::DimensionMismatch("objective matrix must be nonempty".into()));
        }
        if self.p.iter().any(|r| r.len() != n) || self.b_mat.iter().any(|r| r.len() != n) || self.b_mat.len() != self.b.len() {
            return Err(Error::DimensionMismatch("objective and constraint shapes disagree".into()));
        }
        if self.c.len() != q || self.ordering.iter().any(|g| g.len() != q) {
            return Err(Error::DimensionMismatch("ordering cone lives in the objective space".into()));
        }
        let all = self.p.iter().chain(self.b_mat.iter()).chain(self.ordering.iter()).flatten().chain(self.b.iter()).chain(self.c.iter());
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite vop data".into()));
        }
        if self.c[q - 1] != 1.0 {
            return Err(Error::InvalidInput("parameter c must have last entry exactly 1".into()));
        }
        let cone = Cone::new(q, self.ordering.clone())?.reduced()?;
        if cone.has_lines()? {
            return Err(Error::InvalidInput("ordering cone contains a line".into()));
        }
        let dual = dual_cone(&cone)?;
        let interior = !dual.generators.is_empty()
            && dual.generators.iter().all(|w| dot(w, &self.c) > 1e-10 * max_abs(w).max(1e-300));
        if !interior {
            return Err(Error::InvalidInput("parameter c is not interior to the ordering cone".into()));
        }
        Ok(cone)
    }
}

struct Benson<'a> {
    prob: &'a VopProblem,
    cone: Cone,
    q: usize,
    n: usize,
    m: usize,
}

struct Cut {
    w: Vector,
    beta: f64,
    u: Vector,
}

impl<'a> Benson<'a> {
    fn px(&self, x: &[f64]) -> Vector {
        self.prob.p.iter().map(|r| dot(r, x)).collect()
    }

    /// Separation problem at `v`: min z s.t. Bx >= b, v + z c - P x in C.
    /// Returns (z, x, cut).
    fn separate(&self, v: &[f64]) -> Result<(f64, Vector, Cut)> {
        let (q, n, m) = (self.q, self.n, self.m);
        let s = self.cone.generators.len();
        let nv = n + 1 + s;
        let mut lp = LpProblem::new(nv);
        let mut obj = vec![0.0; nv];
        obj[n] = 1.0;
        lp.set_objective(obj);
        lp.set_nonneg(n + 1..nv);
        for i in 0..m {
            let mut row = self.prob.b_mat[i].clone();
            row.resize(nv, 0.0);
            lp.add_ge(row, self.prob.b[i]);
        }
        for k in 0..q {
            let mut row = self.prob.p[k].clone();
            row.push(-self.prob.c[k]);
            row.extend(self.cone.generators.iter().map(|g| g[k]));
            lp.add_eq(row, v[k]);
        }
        let r = linprog::solve(&lp)?;
        match r.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return Err(Error::Infeasible),
            LpStatus::Unbounded => return Err(Error::Unbounded("upper image is the whole space".into())),
        }
        let u: Vector = r.ineq_duals.iter().map(|x| x.max(0.0)).collect();
        let w: Vector = r.eq_duals.iter().map(|x| -x).collect();
        let beta = dot(&self.prob.b, &u);
        let x = r.x[..n].to_vec();
        Ok((r.objective_value, x, Cut { w, beta, u }))
    }

    /// Is `r` a recession direction of the upper image? If not, a cut
    /// excluding it is returned.
    fn check_direction(&self, r: &[f64]) -> Result<Option<Cut>> {
        let (q, n, m) = (self.q, self.n, self.m);
        let nv = q + m;
        let mut lp = LpProblem::new(nv);
        let mut obj = r.to_vec();
        obj.resize(nv, 0.0);
        lp.set_objective(obj);
        lp.set_nonneg(q..nv);
        for g in &self.cone.generators {
            let mut row = g.clone();
            row.resize(nv, 0.0);
            lp.add_ge(row, 0.0);
        }
        let mut crow = self.prob.c.clone();
        crow.resize(nv, 0.0);
        lp.add_eq(crow, 1.0);
        for j in 0..n {
            let mut row: Vector = (0..q).map(|k| -self.prob.p[k][j]).collect();
            row.extend((0..m).map(|i| self.prob.b_mat[i][j]));
            lp.add_eq(row, 0.0);
        }
        let res = linprog::solve(&lp)?;
        if res.status != LpStatus::Optimal {
            return Err(Error::NumericalFailure("direction test lp not optimal".into()));
        }
        if res.objective_value >= -CUT_TOL {
            return Ok(None);
        }
        let w = res.x[..q].to_vec();
        Ok(Some(self.support_cut(w)?))
    }

    /// Supporting cut `w^T y >= max { b^T u : u >= 0, B^T u = P^T w }`.
    fn support_cut(&self, w: Vector) -> Result<Cut> {
        let (q, n, m) = (self.q, self.n, self.m);
        let mut lp = LpProblem::new(m);
        lp.set_objective(self.prob.b.iter().map(|x| -x).collect());
        lp.set_nonneg(0..m);
        for j in 0..n {
            let row: Vector = (0..m).map(|i| self.prob.b_mat[i][j]).collect();
            let rhs: f64 = (0..q).map(|k| self.prob.p[k][j] * w[k]).sum();
            lp.add_eq(row, rhs);
        }
        let res = linprog::solve(&lp)?;
        match res.status {
            LpStatus::Optimal => {
                let u: Vector = res.x.iter().map(|x| x.max(0.0)).collect();
                let beta = dot(&self.prob.b, &u);
                Ok(Cut { w, beta, u })
            }
            s => Err(Error::NumericalFailure(format!("support value lp ended {s:?}"))),
        }
    }

    fn feasible_point(&self) -> Result<Vector> {
        let mut lp = LpProblem::new(self.n);
        for i in 0..self.m {
            lp.add_ge(self.prob.b_mat[i].clone(), self.prob.b[i]);
        }
        let r = linprog::solve(&lp)?;
        match r.status {
            LpStatus::Optimal => Ok(r.x),
            _ => Err(Error::Infeasible),
        }
    }

    fn direction_preimage(&self, r: &[f64]) -> Result<Option<Vector>> {
        let n = self.n;
        let mut lp = LpProblem::new(n);
        for row in &self.prob.b_mat {
            lp.add_ge(row.clone(), 0.0);
        }
        for k in 0..self.q {
            lp.add_eq(self.prob.p[k].clone(), r[k]);
        }
        let res = linprog::solve(&lp)?;
        Ok(if res.is_optimal() { Some(res.x) } else { None })
    }
}

fn is_new_cut(cuts: &[Cut], cut: &Cut) -> bool {
    !cuts.iter().any(|k| {
        k.w.iter().zip(&cut.w).all(|(a, b)| (a - b).abs() <= 1e-9 * (1.0 + a.abs()))
            && (k.beta - cut.beta).abs() <= 1e-9 * (1.0 + k.beta.abs())
    })
}

fn cut_row(cut: &Cut) -> (Vector, f64) {
    let mut w = cut.w.clone();
    let m = max_abs(&w);
    w.iter_mut().for_each(|x| *x /= m);
    (w, cut.beta / m)
}

pub fn benson_solve(prob: &VopProblem) -> Result<VopSolution> {
    let cone = prob.validate()?;
    let bn = Benson { prob, q: prob.q(), n: prob.n(), m: prob.b.len(), cone };
    let q = bn.q;

    let x0 = bn.feasible_point()?;
    let (_, _, first) = bn.separate(&bn.px(&x0))?;
    let mut cuts: Vec<Cut> = vec![first];
    let mut verified_points: Vec<(Vector, Vector)> = Vec::new();
    let mut verified_rays: Vec<Vector> = Vec::new();

    let mut outer;
    let mut rounds = 0;
    loop {
        rounds += 1;
        if rounds > MAX_ROUNDS {
            return Err(Error::NumericalFailure("benson loop did not converge".into()));
        }
        let (a, b): (Matrix, Vector) = cuts.iter().map(cut_row).unzip();
        outer = Polyhedron::from_hrep_dim(q, a, b)?;
        if outer.is_empty() {
            return Err(Error::NumericalFailure("outer approximation became empty".into()));
        }
        let mut added = false;
        for r in outer.rays().clone() {
            if verified_rays.iter().any(|v| crate::geometry::same_direction(v, &r)) {
                continue;
            }
            match bn.check_direction(&r)? {
                None => verified_rays.push(r),
                Some(cut) => {
                    if is_new_cut(&cuts, &cut) {
                        cuts.push(cut);
                        added = true;
                    } else {
                        verified_rays.push(r);
                    }
                }
            }
        }
        if added {
            continue;
        }
        for v in outer.points().clone() {
            if verified_points.iter().any(|(p, _)| same_point(p, &v)) {
                continue;
            }
            let (z, x, cut) = bn.separate(&v)?;
            if z <= CUT_TOL * (1.0 + max_abs(&v)) || !is_new_cut(&cuts, &cut) {
                verified_points.push((v, x));
            } else {
                cuts.push(cut);
                added = true;
            }
        }
        if !added {
            break;
        }
    }

    // facet-defining cuts: match the canonical rows of the final approximation
    let h = outer.hrep().clone();
    let mut dual_points = Vec::new();
    for (row, rhs) in h.a.iter().zip(&h.b) {
        let hit = cuts.iter().find(|k| {
            let (w, beta) = cut_row(k);
            w.iter().zip(row).all(|(a, b)| (a - b).abs() <= 1e-7) && (beta - rhs).abs() <= 1e-7 * (1.0 + rhs.abs())
        });
        match hit {
            Some(k) => dual_points.push(DualPoint { u: k.u.clone(), w: k.w.clone() }),
            None => {
                // row moved during canonicalization; certify it directly
                let k = bn.support_cut(row.clone())?;
                if (k.beta - rhs).abs() > 1e-6 * (1.0 + rhs.abs()) {
                    log::debug!("facet {row:?} >= {rhs} has support value {}", k.beta);
                    return Err(Error::NumericalFailure("facet of the upper image without a dual certificate".into()));
                }
                dual_points.push(DualPoint { u: k.u, w: k.w });
            }
        }
    }

    let mut primal_points = Vec::new();
    for v in outer.points() {
        let x = verified_points
            .iter()
            .find(|(p, _)| same_point(p, v))
            .map(|(_, x)| x.clone())
            .ok_or_else(|| Error::NumericalFailure("vertex without primal preimage".into()))?;
        primal_points.push(x);
    }
    let mut primal_directions = Vec::new();
    for r in outer.rays() {
        if bn.cone.contains(r)? {
            continue;
        }
        if let Some(x) = bn.direction_preimage(r)? {
            primal_directions.push(x);
        }
    }

    let lower_image = lower_image(prob, &bn.cone, &primal_points, &primal_directions)?;
    Ok(VopSolution { primal_points, primal_directions, dual_points, upper_image: outer, lower_image, c: prob.c.clone() })
}

fn lower_image(prob: &VopProblem, cone: &Cone, points: &[Vector], dirs: &[Vector]) -> Result<Polyhedron> {
    let q = prob.q();
    let c = &prob.c;
    let image = |x: &Vector| -> Vector { prob.p.iter().map(|r| dot(r, x)).collect() };
    let mut a = Vec::new();
    let mut b = Vec::new();
    for x in points {
        let y = image(x);
        let mut row: Vector = (0..q - 1).map(|i| y[i] - y[q - 1] * c[i]).collect();
        row.push(-1.0);
        a.push(row);
        b.push(-y[q - 1]);
    }
    let mut homog: Vec<Vector> = dirs.iter().map(image).collect();
    homog.extend(cone.generators.iter().cloned());
    for mut y in homog {
        normalize_max(&mut y);
        let mut row: Vector = (0..q - 1).map(|i| y[i] - y[q - 1] * c[i]).collect();
        row.push(0.0);
        a.push(row);
        b.push(-y[q - 1]);
    }
    Polyhedron::from_hrep_dim(q, a, b)
}

/// Geometric duality map: the face of the upper image paired with the
/// K-maximal face of the lower image spanned by `face_vertices`.
pub fn psi_map(face_vertices: &[Vector], sol: &VopSolution) -> Result<Polyhedron> {
    if face_vertices.is_empty() {
        return Err(Error::NotAFace("empty vertex set".into()));
    }
    let upper = &sol.upper_image;
    let lower = &sol.lower_image;
    let q = upper.dim;
    for v in face_vertices {
        if v.len() != q || !lower.points().iter().any(|p| same_point(p, v)) {
            return Err(Error::NotAFace(format!("{v:?} is not a vertex of the lower image")));
        }
    }
    let hyper = |ys: &[f64]| -> (Vector, f64) {
        let w = weight_of(ys, &sol.c);
        (w, ys[q - 1])
    };
    let mut a = upper.hrep().a.clone();
    let mut b = upper.hrep().b.clone();
    for v in face_vertices {
        let (w, beta) = hyper(v);
        a.push(w.iter().map(|x| -x).collect());
        b.push(-beta);
    }
    let face = Polyhedron::from_hrep_dim(q, a, b)?;
    if face.is_empty() {
        return Err(Error::NotAFace("hyperplanes do not meet the upper image".into()));
    }
    // closure: every lower-image vertex whose hyperplane contains the face
    let closure: Vec<&Vector> = lower
        .points()
        .iter()
        .filter(|ys| {
            let (w, beta) = hyper(ys);
            let scale = 1.0 + beta.abs();
            face.points().iter().all(|y| (dot(&w, y) - beta).abs() <= 1e-7 * scale)
                && face.rays().iter().all(|r| dot(&w, r).abs() <= 1e-7)
        })
        .collect();
    let same = closure.len() == face_vertices.len()
        && closure.iter().all(|c| face_vertices.iter().any(|v| same_point(v, c)));
    if !same {
        return Err(Error::NotAFace("vertex set does not span a K-maximal face".into()));
    }
    Ok(face)
}
