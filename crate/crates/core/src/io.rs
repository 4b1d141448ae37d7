//! ASCII PLY point clouds.

use std::fmt::Write as _;
use std::io::BufRead;

use nalgebra::Point3;

use crate::error::{Error, Result};

pub fn write_ply(points: &[Point3<f64>]) -> String {
    let mut s = String::with_capacity(64 + points.len() * 32);
    let _ = write!(
        s,
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
        points.len()
    );
    for p in points {
        let _ = writeln!(s, "{} {} {}", p.x, p.y, p.z);
    }
    s
}

/// Reads the `x y z` properties of the vertex element. Other vertex properties
/// are ignored; elements declared after the vertices are not read.
pub fn read_ply(reader: impl BufRead) -> Result<Vec<Point3<f64>>> {
    let mut lines = reader.lines();
    let mut next = || -> Result<Option<String>> { lines.next().transpose().map_err(Error::from) };
    if next()?.as_deref().map(str::trim) != Some("ply") {
        return Err(Error::parse("ply", "missing magic line"));
    }
    let mut n_vertices: Option<usize> = None;
    let mut props: Vec<String> = Vec::new();
    let mut in_vertex = false;
    loop {
        let line = next()?.ok_or_else(|| Error::parse("ply", "unterminated header"))?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["end_header"] => break,
            ["format", fmt, ..] if *fmt != "ascii" => {
                return Err(Error::parse("ply", format!("unsupported format `{fmt}`")));
            }
            ["element", name, count] => {
                in_vertex = *name == "vertex";
                if in_vertex {
                    n_vertices = Some(count.parse().map_err(|_| Error::parse("ply", "bad vertex count"))?);
                }
            }
            ["property", "list", ..] if in_vertex => {
                return Err(Error::parse("ply", "list properties on vertices are not supported"));
            }
            ["property", _, name] if in_vertex => props.push((*name).to_string()),
            _ => {}
        }
    }
    let n = n_vertices.ok_or_else(|| Error::parse("ply", "no vertex element"))?;
    let col = |name: &str| {
        props
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| Error::parse("ply", format!("missing property `{name}`")))
    };
    let (cx, cy, cz) = (col("x")?, col("y")?, col("z")?);
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let line = next()?.ok_or_else(|| Error::parse("ply", format!("expected {n} vertices, found {i}")))?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse("ply", format!("vertex {i}: {e}")))?;
        if vals.len() < props.len() {
            return Err(Error::parse("ply", format!("vertex {i}: too few values")));
        }
        points.push(Point3::new(vals[cx], vals[cy], vals[cz]));
    }
    Ok(points)
}
