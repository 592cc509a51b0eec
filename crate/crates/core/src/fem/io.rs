//! Finite element function export.

use std::io::Write;

use super::FeSpace;
use crate::error::{Error, Result};

/// CSV with header `dof,x,y,z,<name>...`, one row per degree of freedom.
pub fn write_csv<W: Write>(space: &FeSpace, fields: &[(&str, &[f64])], mut w: W) -> Result<()> {
    let n = space.ndofs();
    for (_, v) in fields {
        if v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: v.len() });
        }
    }
    let names: Vec<&str> = fields.iter().map(|(s, _)| *s).collect();
    if names.is_empty() {
        writeln!(w, "dof,x,y,z")?;
    } else {
        writeln!(w, "dof,x,y,z,{}", names.join(","))?;
    }
    for (i, p) in space.mesh().nodes().iter().enumerate() {
        write!(w, "{i},{:.16e},{:.16e},{:.16e}", p[0], p[1], p[2])?;
        for (_, v) in fields {
            write!(w, ",{:.16e}", v[i])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SurfaceSpec;
    use crate::mesh::build_circle_mesh;
    use std::sync::Arc;

    #[test]
    fn csv_layout() {
        let space = FeSpace::new(Arc::new(build_circle_mesh(&SurfaceSpec::circle(1.0), 4, 1).unwrap()));
        let u = vec![1.0, 2.0, 3.0, 4.0];
        let mut buf = Vec::new();
        write_csv(&space, &[("u", &u)], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "dof,x,y,z,u");
        assert_eq!(lines.len(), 5);
        assert!(lines[2].starts_with("1,"));
        assert!(write_csv(&space, &[("u", &u[..2])], Vec::new()).is_err());
    }
}
