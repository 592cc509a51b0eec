//! Mesh export and import.
//!
//! Text format, one record per line, whitespace separated:
//!
//! ```text
//! esfem-mesh 1
//! surface <kind> <param>... horizon <T>
//! dim <m> degree <k> time <t>
//! nodes <n>
//! <x> <y> <z>            (n lines)
//! elements <count> <nodes per element>
//! <i0> <i1> ...          (count lines)
//! ```
//!
//! Floats are written with 17 significant digits so a write/read cycle is
//! exact.

use std::io::{BufRead, Write};

use super::SurfaceMesh;
use crate::error::{Error, Result};
use crate::geometry::{SurfaceKind, SurfaceSpec};

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_text<W: Write>(mesh: &SurfaceMesh, mut w: W) -> Result<()> {
    let s = mesh.surface();
    writeln!(w, "esfem-mesh 1")?;
    let params: Vec<String> = s.params().iter().map(|&p| fmt_f(p)).collect();
    writeln!(w, "surface {} {} horizon {}", s.kind(), params.join(" "), fmt_f(s.horizon()))?;
    writeln!(w, "dim {} degree {} time {}", mesh.dim(), mesh.degree(), fmt_f(mesh.time()))?;
    writeln!(w, "nodes {}", mesh.n_nodes())?;
    for p in mesh.nodes() {
        writeln!(w, "{} {} {}", fmt_f(p[0]), fmt_f(p[1]), fmt_f(p[2]))?;
    }
    writeln!(w, "elements {} {}", mesh.n_elements(), mesh.nodes_per_element())?;
    for e in 0..mesh.n_elements() {
        let ids: Vec<String> = mesh.element(e).iter().map(|i| i.to_string()).collect();
        writeln!(w, "{}", ids.join(" "))?;
    }
    Ok(())
}

fn parse_err(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(format!("mesh file: {}", msg.into()))
}

fn num<T: std::str::FromStr>(tok: Option<&str>, what: &str) -> Result<T> {
    tok.ok_or_else(|| parse_err(format!("missing {what}")))?.parse().map_err(|_| parse_err(format!("bad {what}")))
}

pub fn read_text<R: BufRead>(r: R) -> Result<SurfaceMesh> {
    let mut lines = r.lines();
    let mut next = || -> Result<String> {
        loop {
            match lines.next() {
                Some(l) => {
                    let l = l?;
                    let t = l.trim();
                    if !t.is_empty() && !t.starts_with('#') {
                        return Ok(t.to_string());
                    }
                }
                None => return Err(parse_err("unexpected end of file")),
            }
        }
    };
    let header = next()?;
    if header.split_whitespace().next() != Some("esfem-mesh") {
        return Err(parse_err("missing header"));
    }
    let surf = next()?;
    let mut tok = surf.split_whitespace();
    if tok.next() != Some("surface") {
        return Err(parse_err("expected surface line"));
    }
    let kind: SurfaceKind = tok.next().ok_or_else(|| parse_err("missing surface kind"))?.parse()?;
    let mut params = Vec::new();
    let mut horizon = None;
    while let Some(t) = tok.next() {
        if t == "horizon" {
            horizon = Some(num::<f64>(tok.next(), "horizon")?);
        } else {
            params.push(t.parse::<f64>().map_err(|_| parse_err("bad surface parameter"))?);
        }
    }
    let spec = SurfaceSpec::new(kind, params, horizon.ok_or_else(|| parse_err("missing horizon"))?)?;
    let meta = next()?;
    let mut tok = meta.split_whitespace();
    let mut dim = 0usize;
    let mut degree = 0usize;
    let mut time = 0.0f64;
    while let Some(key) = tok.next() {
        match key {
            "dim" => dim = num(tok.next(), "dim")?,
            "degree" => degree = num(tok.next(), "degree")?,
            "time" => time = num(tok.next(), "time")?,
            other => return Err(parse_err(format!("unknown key {other}"))),
        }
    }
    if dim != spec.dim() {
        return Err(parse_err(format!("dimension {dim} does not match surface {kind}")));
    }
    let nl = next()?;
    let mut tok = nl.split_whitespace();
    if tok.next() != Some("nodes") {
        return Err(parse_err("expected nodes line"));
    }
    let n: usize = num(tok.next(), "node count")?;
    let mut nodes = Vec::with_capacity(n);
    for _ in 0..n {
        let l = next()?;
        let mut t = l.split_whitespace();
        nodes.push([num(t.next(), "x")?, num(t.next(), "y")?, num(t.next(), "z")?]);
    }
    let el = next()?;
    let mut tok = el.split_whitespace();
    if tok.next() != Some("elements") {
        return Err(parse_err("expected elements line"));
    }
    let ne: usize = num(tok.next(), "element count")?;
    let npe: usize = num(tok.next(), "nodes per element")?;
    let mut elements = Vec::with_capacity(ne * npe);
    for _ in 0..ne {
        let l = next()?;
        let ids: Vec<usize> =
            l.split_whitespace().map(|s| s.parse().map_err(|_| parse_err("bad node index"))).collect::<Result<_>>()?;
        if ids.len() != npe {
            return Err(parse_err("wrong element arity"));
        }
        elements.extend(ids);
    }
    SurfaceMesh::from_parts(spec, degree, nodes, elements, time)
}

/// Legacy ASCII VTK polydata with optional nodal scalar fields.
pub fn write_vtk<W: Write>(mesh: &SurfaceMesh, fields: &[(&str, &[f64])], mut w: W) -> Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "esfem mesh t={}", fmt_f(mesh.time()))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET POLYDATA")?;
    writeln!(w, "POINTS {} double", mesh.n_nodes())?;
    for p in mesh.nodes() {
        writeln!(w, "{} {} {}", fmt_f(p[0]), fmt_f(p[1]), fmt_f(p[2]))?;
    }
    let order: Vec<usize> = match (mesh.dim(), mesh.degree()) {
        (1, k) => (0..=k).collect(),
        (_, 1) => vec![0, 1, 2],
        _ => vec![0, 3, 1, 4, 2, 5],
    };
    let ne = mesh.n_elements();
    let keyword = if mesh.dim() == 1 { "LINES" } else { "POLYGONS" };
    writeln!(w, "{keyword} {} {}", ne, ne * (order.len() + 1))?;
    for e in 0..ne {
        let el = mesh.element(e);
        let ids: Vec<String> = order.iter().map(|&l| el[l].to_string()).collect();
        writeln!(w, "{} {}", order.len(), ids.join(" "))?;
    }
    if !fields.is_empty() {
        writeln!(w, "POINT_DATA {}", mesh.n_nodes())?;
        for (name, values) in fields {
            if values.len() != mesh.n_nodes() {
                return Err(Error::DimensionMismatch { expected: mesh.n_nodes(), got: values.len() });
            }
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for &v in values.iter() {
                writeln!(w, "{}", fmt_f(v))?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_circle_mesh, build_sphere_mesh};

    #[test]
    fn text_round_trip_is_exact() {
        for m in [
            build_circle_mesh(&SurfaceSpec::circle(1.5), 9, 3).unwrap(),
            build_sphere_mesh(&SurfaceSpec::scaled_sphere_flow(1.0), 1, 2).unwrap().evolve(0.3).unwrap(),
        ] {
            let mut buf = Vec::new();
            write_text(&m, &mut buf).unwrap();
            let back = read_text(buf.as_slice()).unwrap();
            assert_eq!(back.nodes(), m.nodes());
            assert_eq!(back.element_table(), m.element_table());
            assert_eq!(back.time(), m.time());
            assert_eq!(back.surface(), m.surface());
            for (a, b) in back.initial_nodes().iter().zip(m.initial_nodes()) {
                assert!(crate::geometry::vec3::dist(*a, *b) < 1e-14);
            }
        }
    }

    #[test]
    fn vtk_has_expected_cells() {
        let m = build_sphere_mesh(&SurfaceSpec::sphere(1.0), 0, 2).unwrap();
        let vals = vec![1.0; m.n_nodes()];
        let mut buf = Vec::new();
        write_vtk(&m, &[("u", &vals)], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.contains("POLYGONS 20 140"));
        assert!(s.contains("SCALARS u double 1"));
        let m = build_circle_mesh(&SurfaceSpec::circle(1.0), 4, 1).unwrap();
        let mut buf = Vec::new();
        write_vtk(&m, &[], &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("LINES 4 12"));
    }

    #[test]
    fn malformed_input_is_rejected() {
        assert!(read_text("esfem-mesh 1\nsurface blob 1 horizon 1\n".as_bytes()).is_err());
        assert!(read_text("nonsense".as_bytes()).is_err());
    }
}
