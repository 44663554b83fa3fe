//! Pairwise misfit and Bellman-error matrices over an enumerated class,
//! their numerical ranks, and the explicit factorisation available for
//! factored models.
//!
//! Rows are indexed by the roll-in model `M`, columns by the target `M'`.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cdp::{Candidate, ModelClass};
use crate::error::{Error, Result};
use crate::misfit::{bellman_from_occupancy, factored_from_occupancy, misfit_from_occupancy, roll_in_occupancy, ActionMode};
use crate::test_functions::TestFunctionClass;

/// Largest class for which matrices are built.
pub const MAX_MATRIX_MODELS: usize = 256;

/// Default relative singular-value tolerance.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Tolerance for entrywise matrix inequalities and identities.
pub const MATRIX_TOL: f64 = 1e-9;

// ── Matrices ──

#[derive(Debug, Clone, Copy)]
pub enum MatrixKind<'a> {
    /// `E_B(M, M', h)`.
    Bellman,
    /// `W(M, M', h; F)` with actions from the target's policy.
    Misfit(&'a TestFunctionClass),
    /// `W_F(M, M', h)` with uniform actions.
    Factored,
}

impl MatrixKind<'_> {
    pub fn label(&self) -> String {
        match self {
            MatrixKind::Bellman => "bellman".into(),
            MatrixKind::Misfit(f) => format!("misfit({})", f.name()),
            MatrixKind::Factored => "factored".into(),
        }
    }
}

/// A square matrix over (roll-in, target) model pairs at one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseMatrix {
    pub kind: String,
    pub level: usize,
    pub ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl PairwiseMatrix {
    pub fn size(&self) -> usize {
        self.ids.len()
    }

    pub fn get(&self, m: usize, m_prime: usize) -> f64 {
        self.rows[m][m_prime]
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        let n = self.size();
        DMatrix::from_fn(n, n, |i, j| self.rows[i][j])
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            kind: format!("{}*{c}", self.kind),
            rows: self.rows.iter().map(|r| r.iter().map(|v| c * v).collect()).collect(),
            ..self.clone()
        }
    }

    pub fn rank(&self, tol: f64) -> usize {
        numerical_rank(&self.to_dmatrix(), tol)
    }

    /// CSV with a header of model ids and one row per roll-in model.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["roll_in".to_string()];
        header.extend(self.ids.iter().cloned());
        out.write_record(&header)?;
        for (id, row) in self.ids.iter().zip(&self.rows) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Builds the matrix of the requested kind with exact quantities.
pub fn build_matrix(class: &ModelClass, truth: &Candidate, h: usize, kind: MatrixKind<'_>) -> Result<PairwiseMatrix> {
    if class.len() > MAX_MATRIX_MODELS {
        return Err(Error::ClassTooLarge {
            size: class.len(),
            cap: MAX_MATRIX_MODELS,
        });
    }
    class.check_compatible(truth)?;
    truth.model.check_level(h)?;
    let rows = class
        .members()
        .par_iter()
        .map(|roll_in| {
            let occ = roll_in_occupancy(roll_in, truth, h)?;
            class
                .members()
                .iter()
                .map(|target| match kind {
                    MatrixKind::Bellman => bellman_from_occupancy(&occ, target, truth, h),
                    MatrixKind::Misfit(f) => misfit_from_occupancy(&occ, target, truth, h, f, ActionMode::Policy),
                    MatrixKind::Factored => factored_from_occupancy(&occ, target, truth, h),
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PairwiseMatrix {
        kind: kind.label(),
        level: h,
        ids: (0..class.len()).map(|i| format!("M{i}")).collect(),
        rows,
    })
}

// ── Ranks ──

/// Singular values in decreasing order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values above `tol` times the largest one.
pub fn numerical_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&top) if top > 0.0 => s.iter().filter(|&&v| v > tol * top).count(),
        _ => 0,
    }
}

/// `max_i ‖u_i‖ · max_j ‖v_j‖` for the balanced factorisation
/// `A ≈ (U √Σ)(V √Σ)ᵀ` truncated at the numerical rank.
pub fn balanced_beta(m: &DMatrix<f64>, tol: f64) -> f64 {
    let r = numerical_rank(m, tol);
    if r == 0 {
        return 0.0;
    }
    let svd = m.clone().svd(true, true);
    let (u, vt) = (svd.u.expect("requested U"), svd.v_t.expect("requested V"));
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let keep = &order[..r];
    let row_norm = |row: usize, left: bool| {
        keep.iter()
            .map(|&k| {
                let s = svd.singular_values[k];
                let x = if left { u[(row, k)] } else { vt[(k, row)] };
                x * x * s
            })
            .sum::<f64>()
            .sqrt()
    };
    let max_u = (0..m.nrows()).map(|i| row_norm(i, true)).fold(0.0, f64::max);
    let max_v = (0..m.ncols()).map(|j| row_norm(j, false)).fold(0.0, f64::max);
    max_u * max_v
}

/// A rank report for one matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub kind: String,
    pub level: usize,
    pub tol: f64,
    pub rank: usize,
    pub singular_values: Vec<f64>,
    pub beta: f64,
}

pub fn rank_report(m: &PairwiseMatrix, tol: f64) -> RankReport {
    let d = m.to_dmatrix();
    RankReport {
        kind: m.kind.clone(),
        level: m.level,
        tol,
        rank: numerical_rank(&d, tol),
        singular_values: singular_values(&d),
        beta: balanced_beta(&d, tol),
    }
}

// ── Sandwich ──

/// Whether `κ E_B ≤ A ≤ W` holds entrywise (within [`MATRIX_TOL`]).
pub fn sandwich_check(a: &PairwiseMatrix, kappa: f64, eb: &PairwiseMatrix, w: &PairwiseMatrix) -> Result<bool> {
    if a.size() != eb.size() || a.size() != w.size() {
        return Err(Error::Structure(format!(
            "sandwich needs equal sizes, got {}, {} and {}",
            a.size(),
            eb.size(),
            w.size()
        )));
    }
    let n = a.size();
    Ok((0..n).all(|i| {
        (0..n).all(|j| kappa * eb.get(i, j) <= a.get(i, j) + MATRIX_TOL && a.get(i, j) <= w.get(i, j) + MATRIX_TOL)
    }))
}

/// Per-level certificates: ranks of `κ E_B` and `W`, and whether `W` itself
/// sandwiches (`A = W`, i.e. Bellman domination holds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelDiagnostics {
    pub level: usize,
    pub bellman: RankReport,
    pub misfit: RankReport,
    pub misfit_dominates: bool,
}

pub fn diagnose(class: &ModelClass, truth: &Candidate, f: &TestFunctionClass, kappa: f64, tol: f64) -> Result<Vec<LevelDiagnostics>> {
    (0..class.horizon())
        .map(|h| {
            let eb = build_matrix(class, truth, h, MatrixKind::Bellman)?;
            let w = build_matrix(class, truth, h, MatrixKind::Misfit(f))?;
            Ok(LevelDiagnostics {
                level: h,
                bellman: rank_report(&eb.scaled(kappa), tol),
                misfit: rank_report(&w, tol),
                misfit_dominates: sandwich_check(&w, kappa, &eb, &w)?,
            })
        })
        .collect()
}

// ── Factored factorisation ──

/// `W_F(M, M', h) = ⟨ζ(M), χ(M')⟩` with coordinates `(i, a, u)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factorization {
    pub level: usize,
    pub dim: usize,
    /// `ζ(i, a, u; M) = P(x_h[pa_i] = u) / K` under `π_M` in the true model.
    pub zeta: Vec<Vec<f64>>,
    /// `χ(i, a, u; M') = ‖P*_i(·|u, a) − P'_i(·|u, a)‖`.
    pub chi: Vec<Vec<f64>>,
    pub beta: f64,
    pub matrix: PairwiseMatrix,
}

/// Builds ζ and χ for every model and checks the identity against the
/// directly computed factored misfit matrix.
pub fn factored_factorization(class: &ModelClass, truth: &Candidate, h: usize) -> Result<Factorization> {
    let ft = truth.factored_or_err()?;
    let s = ft.structure();
    let k = ft.actions();
    let offsets: Vec<usize> = (0..s.d())
        .scan(0, |acc, i| {
            let o = *acc;
            *acc += k * s.parent_configs(i);
            Some(o)
        })
        .collect();
    let dim = s.factor_dim(k);
    let coord = |i: usize, a: usize, u: usize| offsets[i] + a * s.parent_configs(i) + u;

    let mut zeta = Vec::with_capacity(class.len());
    let mut chi = Vec::with_capacity(class.len());
    for m in class.members() {
        let fm = m.factored_or_err()?;
        if fm.structure() != s {
            return Err(Error::Structure("factored models have different parent sets or alphabets".into()));
        }
        let occ = roll_in_occupancy(m, truth, h)?;
        let mut z = vec![0.0; dim];
        for (x, &p) in occ.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let values = s.decode(x);
            for i in 0..s.d() {
                let u = s.parent_index(i, &values);
                for a in 0..k {
                    z[coord(i, a, u)] += p / k as f64;
                }
            }
        }
        zeta.push(z);
        let mut c = vec![0.0; dim];
        for i in 0..s.d() {
            for u in 0..s.parent_configs(i) {
                for a in 0..k {
                    c[coord(i, a, u)] = ft
                        .cpt_row(h, i, u, a)
                        .iter()
                        .zip(fm.cpt_row(h, i, u, a))
                        .map(|(p, q)| (p - q).abs())
                        .sum();
                }
            }
        }
        chi.push(c);
    }

    let matrix = build_matrix(class, truth, h, MatrixKind::Factored)?;
    for (i, z) in zeta.iter().enumerate() {
        for (j, c) in chi.iter().enumerate() {
            let inner: f64 = z.iter().zip(c).map(|(a, b)| a * b).sum();
            if (inner - matrix.get(i, j)).abs() > MATRIX_TOL {
                return Err(Error::Inconsistent(format!(
                    "factorisation gives {inner} but the factored misfit is {} at ({i}, {j})",
                    matrix.get(i, j)
                )));
            }
        }
    }
    let norm = |v: &Vec<f64>| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let beta = zeta.iter().map(norm).fold(0.0, f64::max) * chi.iter().map(norm).fold(0.0, f64::max);
    Ok(Factorization {
        level: h,
        dim,
        zeta,
        chi,
        beta,
        matrix,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::random::{random_factored_class, random_tabular_class, RandomFactored, RandomTabular};
    use crate::cdp::policy_value;
    use crate::rng::SeedStreams;

    fn tab_class(seed: u64) -> ModelClass {
        let spec = RandomTabular {
            horizon: 3,
            actions: 2,
            states: 3,
            branching: 2,
            reward_support: 2,
        };
        ModelClass::new(random_tabular_class(&spec, 4, &mut SeedStreams::new(seed).stream("c", 0))).unwrap()
    }

    #[test]
    fn rank_basics() {
        assert_eq!(numerical_rank(&DMatrix::zeros(3, 3), 1e-8), 0);
        let u = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let v = DMatrix::from_column_slice(3, 1, &[0.5, -1.0, 4.0]);
        assert_eq!(numerical_rank(&(&u * v.transpose()), 1e-8), 1);
        assert_eq!(numerical_rank(&DMatrix::identity(4, 4), 1e-8), 4);
    }

    #[test]
    fn balanced_beta_of_outer_product() {
        let u = DMatrix::from_column_slice(2, 1, &[3.0, 4.0]);
        let v = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        // σ = 5: rows of U√Σ are (3, 4)/√5 and rows of V√Σ are (√5, 0), so β = 4.
        assert!((balanced_beta(&(&u * v.transpose()), 1e-8) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn singleton_class_gives_zero_matrix() {
        let c = tab_class(1);
        let single = ModelClass::from_candidates(vec![c.get(0).clone()]).unwrap();
        let m = build_matrix(&single, c.get(0), 0, MatrixKind::Bellman).unwrap();
        assert_eq!(m.rows, vec![vec![0.0]]);
    }

    #[test]
    fn bellman_diagonal_sums_to_value_gap() {
        let c = tab_class(2);
        let truth = c.get(0);
        let ms: Vec<_> = (0..3).map(|h| build_matrix(&c, truth, h, MatrixKind::Bellman).unwrap()).collect();
        for (i, m) in c.members().iter().enumerate() {
            let sum: f64 = ms.iter().map(|mat| mat.get(i, i)).sum();
            let gap = m.value() - policy_value(&truth.model, m.policy()).unwrap();
            assert!((sum - gap).abs() < 1e-12);
        }
    }

    #[test]
    fn truth_column_is_zero_and_domination_holds() {
        let c = tab_class(3);
        let truth = c.get(2);
        let f = TestFunctionClass::bellman_class(&c);
        for h in 0..3 {
            let w = build_matrix(&c, truth, h, MatrixKind::Misfit(&f)).unwrap();
            let tv = build_matrix(&c, truth, h, MatrixKind::Misfit(&TestFunctionClass::TvBall { bound: 2.0 })).unwrap();
            let eb = build_matrix(&c, truth, h, MatrixKind::Bellman).unwrap();
            assert!((0..4).all(|i| w.get(i, 2).abs() < 1e-12));
            assert!(sandwich_check(&w, 1.0, &eb, &w).unwrap());
            // |r + V| ≤ 2 so the radius-2 TV ball also dominates.
            assert!(sandwich_check(&eb, 1.0, &eb, &tv).unwrap());
        }
    }

    #[test]
    fn sandwich_detects_violation() {
        let m = |rows: Vec<Vec<f64>>| PairwiseMatrix {
            kind: "t".into(),
            level: 0,
            ids: vec!["a".into(), "b".into()],
            rows,
        };
        let eb = m(vec![vec![0.5, -0.2], vec![0.0, 0.1]]);
        let w = m(vec![vec![0.4, 0.0], vec![0.0, 0.2]]);
        assert!(!sandwich_check(&eb, 1.0, &eb, &w).unwrap());
        let wrong = PairwiseMatrix {
            ids: vec!["a".into()],
            rows: vec![vec![0.0]],
            ..w.clone()
        };
        assert!(sandwich_check(&eb, 1.0, &eb, &wrong).is_err());
    }

    #[test]
    fn rank_monotone_in_tolerance() {
        let c = tab_class(4);
        let m = build_matrix(&c, c.get(0), 1, MatrixKind::Bellman).unwrap().to_dmatrix();
        let ranks: Vec<usize> = [1e-14, 1e-10, 1e-8, 1e-4, 1e-1].iter().map(|&t| numerical_rank(&m, t)).collect();
        assert!(ranks.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn factorisation_reproduces_factored_misfit() {
        let spec = RandomFactored::default();
        let models = random_factored_class(&spec, 6, &mut SeedStreams::new(5).stream("f", 0));
        let c = ModelClass::from_factored(models).unwrap();
        let truth = c.get(0);
        for h in 0..spec.horizon {
            let f = factored_factorization(&c, truth, h).unwrap();
            assert!(f.zeta.iter().flatten().all(|&z| (0.0..=0.5 + 1e-15).contains(&z)));
            assert!(f.chi.iter().flatten().all(|&x| (0.0..=2.0).contains(&x)));
            assert!(f.chi[0].iter().all(|&x| x == 0.0));
            assert!(f.matrix.rank(DEFAULT_RANK_TOL) <= f.dim);
        }
    }

    #[test]
    fn csv_export_has_header() {
        let c = tab_class(6);
        let m = build_matrix(&c, c.get(0), 0, MatrixKind::Bellman).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("roll_in,M0,M1,M2,M3\n"));
        assert_eq!(text.lines().count(), 5);
    }
}
