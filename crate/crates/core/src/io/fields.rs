//! Field CSV, PGM heatmaps and quiver samples.

use std::fmt::Write as _;
use std::path::Path;

use crate::angle::{angle_to_unit_field, linear_representative, winding_class, AngleField};
use crate::conformal::ConformalStructure;
use crate::error::{Error, Result};
use crate::torus::{LatticeSpec, ScalarField};

pub const FIELDS_HEADER: &str = "lambda1,lambda2,theta,vx,vy,kg,u";
pub const QUIVER_HEADER: &str = "lambda1,lambda2,x,y,vx,vy";

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))
}

/// 17 significant digits, enough to round-trip any `f64`.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// One row per grid point, `t` varying fastest. `theta` is the total angle on
/// the universal cover and `(vx, vy)` the `g`-unit field `e^u(cos θ, sin θ)`.
pub fn fields_csv(cs: &ConformalStructure, theta: &AngleField) -> Result<String> {
    if theta.lattice() != cs.lattice() {
        return Err(Error::LatticeMismatch);
    }
    let l = *cs.lattice();
    let total = theta.total();
    let v = cs.unit_field(theta);
    let mut out = String::with_capacity(l.len() * 140);
    out.push_str(FIELDS_HEADER);
    out.push('\n');
    for s in 0..l.n1 {
        for t in 0..l.n2 {
            let (a, b) = l.lattice_coords(s, t);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                num(a),
                num(b),
                num(total.at(s, t)),
                num(v.comp1.at(s, t)),
                num(v.comp2.at(s, t)),
                num(cs.kg().at(s, t)),
                num(cs.u().at(s, t))
            );
        }
    }
    Ok(out)
}

pub fn write_fields_csv(path: &Path, cs: &ConformalStructure, theta: &AngleField) -> Result<()> {
    write(path, fields_csv(cs, theta)?.as_bytes())
}

/// Columns of a field CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldsTable {
    pub n1: usize,
    pub n2: usize,
    pub theta: Vec<f64>,
    pub vx: Vec<f64>,
    pub vy: Vec<f64>,
    pub kg: Vec<f64>,
    pub u: Vec<f64>,
}

pub fn read_fields_csv(path: &Path) -> Result<FieldsTable> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
    parse_fields_csv(&text).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_fields_csv(text: &str) -> Result<FieldsTable> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(FIELDS_HEADER) {
        return Err(Error::Parse(format!("expected header '{FIELDS_HEADER}'")));
    }
    let mut cols: [Vec<f64>; 7] = Default::default();
    for (no, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 7 {
            return Err(Error::Parse(format!("row {} has {} columns, expected 7", no + 2, parts.len())));
        }
        for (col, p) in cols.iter_mut().zip(parts) {
            col.push(
                p.trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("row {}: '{p}' is not a number", no + 2)))?,
            );
        }
    }
    let rows = cols[0].len();
    let n2 = cols[0].iter().take_while(|a| **a == cols[0][0]).count();
    if rows == 0 || n2 == 0 || !rows.is_multiple_of(n2) {
        return Err(Error::Parse(format!("{rows} rows do not form a grid")));
    }
    let n1 = rows / n2;
    for s in 0..n1 {
        for t in 0..n2 {
            let i = s * n2 + t;
            if cols[0][i] != cols[0][s * n2] || cols[1][i] != cols[1][t] {
                return Err(Error::Parse(format!("row {} breaks the (s, t) row-major grid order", i + 2)));
            }
        }
    }
    let [_, _, theta, vx, vy, kg, u] = cols;
    Ok(FieldsTable { n1, n2, theta, vx, vy, kg, u })
}

/// Rebuilds an angle from total-angle samples: the class comes from the
/// winding of `(cos θ, sin θ)`, the periodic part is `θ − θ_lin`.
pub fn angle_from_total(lattice: LatticeSpec, total: &[f64]) -> Result<AngleField> {
    let total = ScalarField::new(lattice, total.to_vec())?;
    let unit = angle_to_unit_field(&AngleField::new(
        crate::angle::HomotopyClass::new(0, 0),
        total.clone(),
    ));
    let cls = winding_class(&unit)?;
    let lin = linear_representative(cls, lattice).samples();
    Ok(AngleField::new(cls, &total - &lin))
}

/// Binary PGM (P5, maxval 255) of `f`, `t` along rows, with linear min–max
/// scaling. Returns the image bytes and the sidecar text recording the scale.
pub fn pgm(f: &ScalarField) -> (Vec<u8>, String) {
    let l = f.lattice();
    let (lo, hi) = (f.min(), f.max());
    let mut out = format!("P5\n{} {}\n255\n", l.n2, l.n1).into_bytes();
    let span = hi - lo;
    out.extend(f.samples().iter().map(|x| {
        if span > 0.0 {
            (255.0 * (x - lo) / span).round().clamp(0.0, 255.0) as u8
        } else {
            0
        }
    }));
    let sidecar = format!(
        "min = {}\nmax = {}\nwidth = {}\nheight = {}\nmapping = linear: byte = round(255*(value-min)/(max-min)), 0 when max == min\n",
        num(lo),
        num(hi),
        l.n2,
        l.n1
    );
    (out, sidecar)
}

/// Writes `path` and its sidecar `path` + `.txt`.
pub fn write_pgm(path: &Path, f: &ScalarField) -> Result<()> {
    let (bytes, sidecar) = pgm(f);
    write(path, &bytes)?;
    let mut side = path.as_os_str().to_owned();
    side.push(".txt");
    write(Path::new(&side), sidecar.as_bytes())
}

/// Every `stride`-th grid point in both directions.
pub fn quiver_csv(cs: &ConformalStructure, theta: &AngleField, stride: usize) -> Result<String> {
    if theta.lattice() != cs.lattice() {
        return Err(Error::LatticeMismatch);
    }
    if stride == 0 {
        return Err(Error::InvalidArgument("quiver stride must be at least 1".into()));
    }
    let l = *cs.lattice();
    let v = cs.unit_field(theta);
    let mut out = String::from(QUIVER_HEADER);
    out.push('\n');
    for s in (0..l.n1).step_by(stride) {
        for t in (0..l.n2).step_by(stride) {
            let (a, b) = l.lattice_coords(s, t);
            let p = l.point(s, t);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                num(a),
                num(b),
                num(p[0]),
                num(p[1]),
                num(v.comp1.at(s, t)),
                num(v.comp2.at(s, t))
            );
        }
    }
    Ok(out)
}

pub fn write_quiver(path: &Path, cs: &ConformalStructure, theta: &AngleField, stride: usize) -> Result<()> {
    write(path, quiver_csv(cs, theta, stride)?.as_bytes())
}
