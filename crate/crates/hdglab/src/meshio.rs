//! Plain-text mesh dump: a `vertices V triangles T` header, `V` lines `x y`,
//! then `T` lines `i j k` (zero-based, counterclockwise).

use std::fmt::Write as _;

use anyhow::{bail, Context};
use hdglab_core::Mesh;

pub fn dump(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "vertices {} triangles {}", mesh.vertices.len(), mesh.triangles.len());
    for v in &mesh.vertices {
        let _ = writeln!(s, "{:?} {:?}", v[0], v[1]);
    }
    for t in &mesh.triangles {
        let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
    }
    s
}

pub fn parse(text: &str) -> anyhow::Result<Mesh> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let head: Vec<&str> = lines.next().context("empty mesh dump")?.split_whitespace().collect();
    let (nv, nt) = match head.as_slice() {
        ["vertices", v, "triangles", t] => (v.parse::<usize>()?, t.parse::<usize>()?),
        _ => bail!("malformed header"),
    };
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let f: Vec<f64> = lines.next().context("missing vertex")?.split_whitespace().map(str::parse).collect::<Result<_, _>>()?;
        match f.as_slice() {
            [x, y] => vertices.push([*x, *y]),
            _ => bail!("vertex lines need two coordinates"),
        }
    }
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let t: Vec<usize> = lines.next().context("missing triangle")?.split_whitespace().map(str::parse).collect::<Result<_, _>>()?;
        match t.as_slice() {
            [a, b, c] => triangles.push([*a, *b, *c]),
            _ => bail!("triangle lines need three indices"),
        }
    }
    if lines.next().is_some() {
        bail!("trailing data after {nt} triangles");
    }
    Ok(Mesh::from_triangles(vertices, triangles)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use hdglab_core::{Diagonal, Domain};

    #[test]
    fn round_trip() {
        let mesh = Domain::LShape.build(4, Diagonal::Left).unwrap();
        let text = dump(&mesh);
        assert!(text.starts_with("vertices 21 triangles 24\n"));
        let back = parse(&text).unwrap();
        assert_eq!(back.vertices, mesh.vertices);
        assert_eq!(back.triangles, mesh.triangles);
        assert_eq!(dump(&back), text);
        assert!(parse("vertices 1 triangles 0\n0 0\n1 1\n").is_err());
    }
}
