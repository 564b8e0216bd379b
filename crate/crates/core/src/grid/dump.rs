//! Text forms of a solution field.
//!
//! The CSV dump has the columns `node_index, x1..xn, class, u, theta,
//! residual` in that order, one row per unknown in node order. Reals are
//! written in round-trip exponent form so that a dump read back reproduces
//! the field bit for bit.

use std::fmt::Write as _;

use super::{GridError, GridProblem, NodeClass};

/// Header names of the CSV dump for dimension `n`.
pub fn dump_columns(n: usize) -> Vec<String> {
    let mut c = vec!["node_index".to_string()];
    c.extend((1..=n).map(|i| format!("x{i}")));
    c.extend(["class", "u", "theta", "residual"].map(String::from));
    c
}

fn theta_column(p: &GridProblem) -> Vec<f64> {
    (0..p.len()).map(|i| p.theta_at(i, p.u[i])).collect()
}

/// CSV dump of the stored solution with the given residual.
pub fn dump_csv(p: &GridProblem, residual: &[f64]) -> String {
    let theta = theta_column(p);
    let mut s = dump_columns(p.dim()).join(",");
    s.push('\n');
    for (i, node) in p.nodes().iter().enumerate() {
        write!(s, "{i}").unwrap();
        for x in &node.x {
            write!(s, ",{x:e}").unwrap();
        }
        writeln!(s, ",{},{:e},{:e},{:e}", node.class.as_str(), p.u[i], theta[i], residual[i]).unwrap();
    }
    s
}

/// Fixed-width plain-text table with the same columns as the CSV dump.
pub fn node_table(p: &GridProblem, residual: &[f64]) -> String {
    let theta = theta_column(p);
    let mut s = String::new();
    write!(s, "{:>8}", "index").unwrap();
    for i in 1..=p.dim() {
        write!(s, " {:>10}", format!("x{i}")).unwrap();
    }
    writeln!(s, " {:>17} {:>22} {:>22} {:>12}", "class", "u", "theta", "residual").unwrap();
    for (i, node) in p.nodes().iter().enumerate() {
        write!(s, "{i:>8}").unwrap();
        for x in &node.x {
            write!(s, " {x:>10.6}").unwrap();
        }
        writeln!(
            s,
            " {:>17} {:>22.15e} {:>22.15e} {:>12.3e}",
            node.class.as_str(),
            p.u[i],
            theta[i],
            residual[i]
        )
        .unwrap();
    }
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct DumpRow {
    pub index: usize,
    pub x: Vec<f64>,
    pub class: NodeClass,
    pub u: f64,
    pub theta: f64,
    pub residual: f64,
}

/// A parsed CSV dump.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionDump {
    pub dim: usize,
    pub rows: Vec<DumpRow>,
}

impl SolutionDump {
    pub fn u(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.u).collect()
    }

    /// Checks that the dump was written on the same lattice as `p`: same
    /// dimension, node count, node order, coordinates and classes.
    pub fn check_signature(&self, p: &GridProblem) -> Result<(), GridError> {
        if self.dim != p.dim() {
            return Err(GridError::SignatureMismatch(format!("dimension {} vs {}", self.dim, p.dim())));
        }
        if self.rows.len() != p.len() {
            return Err(GridError::SignatureMismatch(format!("{} rows vs {} nodes", self.rows.len(), p.len())));
        }
        let tol = 1e-9 * p.h();
        for (row, node) in self.rows.iter().zip(p.nodes()) {
            let off = row.x.iter().zip(&node.x).any(|(a, b)| (a - b).abs() > tol);
            if off || row.class != node.class {
                return Err(GridError::SignatureMismatch(format!("node {} differs", row.index)));
            }
        }
        Ok(())
    }

    /// Loads the dumped field into `p` after the signature check.
    pub fn apply_to(&self, p: &mut GridProblem) -> Result<(), GridError> {
        self.check_signature(p)?;
        p.set_u(self.u())
    }
}

/// Parses a CSV dump.
pub fn read_dump(text: &str) -> Result<SolutionDump, GridError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| GridError::Dump("empty dump".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 6 {
        return Err(GridError::Dump("header too short".into()));
    }
    let dim = cols.len() - 5;
    if cols != dump_columns(dim) {
        return Err(GridError::Dump(format!("unexpected header: {header}")));
    }
    let mut rows = Vec::new();
    for (ln, line) in lines {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = |what: &str| GridError::Dump(format!("line {}: {what}", ln + 1));
        if f.len() != cols.len() {
            return Err(bad("wrong number of fields"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad("not a number"));
        let index: usize = f[0].parse().map_err(|_| bad("bad node index"))?;
        if index != rows.len() {
            return Err(bad("node indices out of order"));
        }
        let x = f[1..=dim].iter().map(|s| num(s)).collect::<Result<Vec<_>, _>>()?;
        let class = NodeClass::parse(f[dim + 1]).ok_or_else(|| bad("unknown class"))?;
        rows.push(DumpRow { index, x, class, u: num(f[dim + 2])?, theta: num(f[dim + 3])?, residual: num(f[dim + 4])? });
    }
    Ok(SolutionDump { dim, rows })
}
