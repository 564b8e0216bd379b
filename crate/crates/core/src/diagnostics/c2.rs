use serde::{Deserialize, Serialize};

use super::DiagnosticsError;
use crate::grid::GridProblem;

/// Radius of the ball around the origin over which the Hessian is measured.
pub const CENTER_BALL_RADIUS: f64 = 0.25;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct C2Row {
    pub h: f64,
    /// `max |D²ₕu|` (spectral norm) over nodes with `|x| ≤ 1/4`.
    pub hessian_max: f64,
    pub center_nodes: usize,
    /// `max |∇ₕu|` over all nodes.
    pub lipschitz: f64,
    pub theta_sup: f64,
    /// Largest neighbor difference quotient of `θ`.
    pub theta_lipschitz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct C2Table {
    pub rows: Vec<C2Row>,
}

impl C2Table {
    /// `hessian_max[k+1] / hessian_max[k]` for consecutive refinements.
    pub fn growth(&self) -> Vec<f64> {
        self.rows.windows(2).map(|w| w[1].hessian_max / w[0].hessian_max).collect()
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("h,hessian_max,center_nodes,lipschitz,theta_sup,theta_lipschitz,growth\n");
        let g = self.growth();
        for (k, r) in self.rows.iter().enumerate() {
            let gk = if k == 0 { String::new() } else { format!("{:e}", g[k - 1]) };
            s += &format!(
                "{:e},{:e},{},{:e},{:e},{:e},{}\n",
                r.h, r.hessian_max, r.center_nodes, r.lipschitz, r.theta_sup, r.theta_lipschitz, gk
            );
        }
        s
    }
}

/// One row per solved refinement level, coarsest first.
pub fn interior_c2_probe(levels: &[(&GridProblem, &[f64])]) -> Result<C2Table, DiagnosticsError> {
    let Some((first, _)) = levels.first() else {
        return Err(DiagnosticsError::FamilyInconsistent("empty family".into()));
    };
    let mut rows = Vec::with_capacity(levels.len());
    for (p, u) in levels {
        if p.dim() != first.dim() || p.domain().kind != first.domain().kind || p.classification() != first.classification() {
            return Err(DiagnosticsError::FamilyInconsistent("levels differ in domain or phase class".into()));
        }
        if p.center_node().is_none() {
            return Err(DiagnosticsError::FamilyInconsistent(format!("no center node at h = {}", p.h())));
        }
        p.check_field(u)?;
        let mut row = C2Row { h: p.h(), hessian_max: 0.0, center_nodes: 0, lipschitz: 0.0, theta_sup: 0.0, theta_lipschitz: 0.0 };
        for i in 0..p.len() {
            let x = &p.node(i).x;
            if x.iter().map(|v| v * v).sum::<f64>().sqrt() <= CENTER_BALL_RADIUS + 1e-12 {
                let s = p.hessian_of(u, i).spectrum().map_err(|source| crate::grid::GridError::Operator { node: i, source })?;
                row.hessian_max = row.hessian_max.max(s.largest().abs().max(s.smallest().abs()));
                row.center_nodes += 1;
            }
            let g = p.gradient_of(u, i).iter().map(|v| v * v).sum::<f64>().sqrt();
            row.lipschitz = row.lipschitz.max(g);
            let t = p.theta_at(i, u[i]);
            row.theta_sup = row.theta_sup.max(t.abs());
            for axis in 0..p.dim() {
                if let Some(j) = p.neighbor(i, axis, true) {
                    row.theta_lipschitz = row.theta_lipschitz.max((p.theta_at(j, u[j]) - t).abs() / p.h());
                }
            }
        }
        rows.push(row);
    }
    Ok(C2Table { rows })
}
