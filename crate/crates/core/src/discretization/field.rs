use std::io::Write;

use serde::Serialize;

use crate::discretization::mesh::Mesh;
use crate::error::{Error, Result};

/// Interior nodal values of a discrete function on the mesh.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Field {
    values: Vec<f64>,
}

impl Field {
    pub fn new(mesh: &Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.interior_count() {
            return Err(Error::DimensionMismatch {
                expected: mesh.interior_count(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "field value at node {i} is not finite"
            )));
        }
        Ok(Self { values })
    }

    pub fn zeros(mesh: &Mesh) -> Self {
        Self {
            values: vec![0.0; mesh.interior_count()],
        }
    }

    pub fn constant(mesh: &Mesh, c: f64) -> Self {
        Self {
            values: vec![c; mesh.interior_count()],
        }
    }

    /// Samples `f` at the interior nodes.
    pub fn from_fn(mesh: &Mesh, f: impl Fn(&[f64]) -> f64) -> Self {
        Self {
            values: mesh.node_coords().iter().map(|c| f(c)).collect(),
        }
    }

    /// Wraps raw values without the mesh check; callers guarantee the length.
    pub(crate) fn from_vec(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl AsRef<[f64]> for Field {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Header line of the field CSV: `x,u` or `x,y,u`.
pub fn csv_header(mesh: &Mesh) -> &'static str {
    if mesh.dim() == 1 {
        "x,u"
    } else {
        "x,y,u"
    }
}

/// One row per interior node in node order. Values use the shortest
/// representation that round-trips exactly.
pub fn write_field_csv<W: Write>(mesh: &Mesh, values: &[f64], mut out: W) -> Result<()> {
    writeln!(out, "{}", csv_header(mesh))?;
    for (c, v) in mesh.node_coords().iter().zip(values) {
        for x in c {
            write!(out, "{x},")?;
        }
        writeln!(out, "{v}")?;
    }
    Ok(())
}

/// Reads back the value column of a field CSV written by [`write_field_csv`].
pub fn read_field_csv(mesh: &Mesh, text: &str) -> Result<Field> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header.trim() != csv_header(mesh) {
        return Err(Error::InvalidArgument(format!(
            "unexpected field csv header `{header}`"
        )));
    }
    let values = lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.rsplit(',')
                .next()
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::InvalidArgument(format!("bad csv row {}", i + 2)))
        })
        .collect::<Result<Vec<f64>>>()?;
    Field::new(mesh, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::mesh::build_mesh;

    #[test]
    fn length_and_finiteness_checked() {
        let mesh = build_mesh(1, 4, &[1.0]).unwrap();
        assert!(Field::new(&mesh, vec![0.0; 2]).is_err());
        assert!(Field::new(&mesh, vec![0.0, f64::NAN, 1.0]).is_err());
        assert!(Field::new(&mesh, vec![0.0, 1.0, 2.0]).is_ok());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mesh = build_mesh(2, 4, &[1.0, 1.0]).unwrap();
        let f = Field::from_fn(&mesh, |c| (c[0] * 3.1).sin() / 7.0 + c[1].exp());
        let mut buf = Vec::new();
        write_field_csv(&mesh, f.values(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,y,u\n"));
        assert_eq!(text.lines().count(), 1 + 9);
        let back = read_field_csv(&mesh, &text).unwrap();
        assert_eq!(back, f);
    }
}
