//! ASCII OBJ and binary little-endian PLY.
//!
//! OBJ carries positions, optional `v x y z r g b` colors and `vn` normals
//! (kept when there is one per vertex). PLY carries `x y z`, optional
//! `nx ny nz`, `red green blue` (uchar) and one float property per
//! `scalar:<name>` attribute.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::mesh::{Attribute, TriangleMesh, Vec3, COLOR, NORMAL, SCALAR_PREFIX};
use crate::error::{Error, Result};

pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    match extension(path).as_deref() {
        Some("obj") => load_obj(path),
        Some("ply") => load_ply(path),
        _ => Err(Error::format(path, 0, "unsupported mesh format (expected .obj or .ply)")),
    }
}

pub fn save_mesh(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = match extension(path).as_deref() {
        Some("obj") => obj_bytes(mesh),
        Some("ply") => ply_bytes(mesh),
        _ => return Err(Error::format(path, 0, "unsupported mesh format (expected .obj or .ply)")),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn extension(path: &Path) -> Option<String> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
}

fn fan(poly: &[usize]) -> impl Iterator<Item = [usize; 3]> + '_ {
    (1..poly.len().saturating_sub(1)).map(move |k| [poly[0], poly[k], poly[k + 1]])
}

pub fn load_obj(path: &Path) -> Result<TriangleMesh> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut vertices = Vec::new();
    let mut colors: Vec<[f64; 3]> = Vec::new();
    let mut normals = Vec::new();
    let mut faces = Vec::new();

    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.split('#').next().unwrap_or("");
        let mut tok = line.split_whitespace();
        let Some(kind) = tok.next() else { continue };
        let nums = |tok: std::str::SplitWhitespace<'_>| -> Result<Vec<f64>> {
            tok.map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::format(path, lineno, format!("bad number `{t}`")))
            })
            .collect()
        };
        match kind {
            "v" => {
                let v = nums(tok)?;
                match v.len() {
                    3 | 4 => vertices.push(Vec3::new(v[0], v[1], v[2])),
                    6 | 7 => {
                        vertices.push(Vec3::new(v[0], v[1], v[2]));
                        if colors.len() + 1 != vertices.len() {
                            return Err(Error::format(path, lineno, "colors must be given for all vertices or none"));
                        }
                        colors.push([v[3], v[4], v[5]]);
                    }
                    n => return Err(Error::format(path, lineno, format!("vertex with {n} values"))),
                }
            }
            "vn" => {
                let v = nums(tok)?;
                if v.len() != 3 {
                    return Err(Error::format(path, lineno, "normal needs 3 values"));
                }
                normals.push(Vec3::new(v[0], v[1], v[2]));
            }
            "f" => {
                let mut poly = Vec::new();
                for t in tok {
                    let idx = t.split('/').next().unwrap_or("");
                    let i: i64 = idx
                        .parse()
                        .map_err(|_| Error::format(path, lineno, format!("bad face index `{t}`")))?;
                    let resolved = if i > 0 {
                        i - 1
                    } else {
                        vertices.len() as i64 + i
                    };
                    if resolved < 0 || resolved as usize >= vertices.len() {
                        return Err(Error::format(path, lineno, format!("face index {i} out of range")));
                    }
                    poly.push(resolved as usize);
                }
                if poly.len() < 3 {
                    return Err(Error::format(path, lineno, "face with fewer than 3 vertices"));
                }
                faces.extend(fan(&poly));
            }
            _ => {}
        }
    }
    if !colors.is_empty() && colors.len() != vertices.len() {
        return Err(Error::format(path, 0, "colors must be given for all vertices or none"));
    }
    let mut mesh = TriangleMesh::new(vertices, faces)?;
    if !colors.is_empty() {
        mesh.set_attribute(COLOR, Attribute::Color(colors))?;
    }
    if !normals.is_empty() && normals.len() == mesh.num_vertices() {
        mesh.set_attribute(NORMAL, Attribute::Normal(normals))?;
    }
    Ok(mesh)
}

fn obj_bytes(mesh: &TriangleMesh) -> Vec<u8> {
    let mut out = Vec::new();
    let colors = mesh.colors();
    for (i, v) in mesh.vertices().iter().enumerate() {
        match colors {
            Some(c) => writeln!(out, "v {} {} {} {} {} {}", v.x, v.y, v.z, c[i][0], c[i][1], c[i][2]),
            None => writeln!(out, "v {} {} {}", v.x, v.y, v.z),
        }
        .unwrap();
    }
    let normals = mesh.normals(NORMAL);
    if let Some(ns) = normals {
        for n in ns {
            writeln!(out, "vn {} {} {}", n.x, n.y, n.z).unwrap();
        }
    }
    for f in mesh.faces() {
        let [a, b, c] = [f[0] + 1, f[1] + 1, f[2] + 1];
        if normals.is_some() {
            writeln!(out, "f {a}//{a} {b}//{b} {c}//{c}").unwrap();
        } else {
            writeln!(out, "f {a} {b} {c}").unwrap();
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Value(String, Scalar),
    List(String, Scalar, Scalar),
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

/// Cursor over the PLY body; binary little-endian or ASCII tokens.
struct Body<'a> {
    bytes: &'a [u8],
    pos: usize,
    ascii: bool,
}

impl Body<'_> {
    fn read(&mut self, ty: Scalar, path: &Path) -> Result<f64> {
        if self.ascii {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            let start = self.pos;
            while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            let tok = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap_or("");
            return tok.parse::<f64>().map_err(|_| {
                Error::format(path, 0, format!("bad ASCII value `{tok}` at byte offset {start}"))
            });
        }
        let n = ty.size();
        if self.pos + n > self.bytes.len() {
            return Err(Error::format(
                path,
                0,
                format!("unexpected end of data at byte offset {}", self.pos),
            ));
        }
        let b = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(match ty {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b.try_into().unwrap()),
        })
    }
}

pub fn load_ply(path: &Path) -> Result<TriangleMesh> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut pos = 0;
    let mut lineno = 0;
    let mut next_line = |pos: &mut usize| -> Option<String> {
        let rest = &bytes[*pos..];
        let end = rest.iter().position(|&b| b == b'\n')?;
        *pos += end + 1;
        lineno += 1;
        Some(String::from_utf8_lossy(&rest[..end]).trim().to_string())
    };

    if next_line(&mut pos).as_deref() != Some("ply") {
        return Err(Error::format(path, 1, "missing `ply` magic"));
    }
    let mut ascii = false;
    let mut elements: Vec<Element> = Vec::new();
    let mut line_no = 1;
    loop {
        line_no += 1;
        let Some(line) = next_line(&mut pos) else {
            return Err(Error::format(path, line_no, "header not terminated by end_header"));
        };
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["end_header"] => break,
            ["format", "binary_little_endian", _] => ascii = false,
            ["format", "ascii", _] => ascii = true,
            ["format", other, ..] => {
                return Err(Error::format(path, line_no, format!("unsupported PLY format `{other}`")))
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| Error::format(path, line_no, "bad element count"))?,
                props: Vec::new(),
            }),
            ["property", "list", cnt, item, name] => {
                let (Some(c), Some(i)) = (Scalar::parse(cnt), Scalar::parse(item)) else {
                    return Err(Error::format(path, line_no, "unknown list property type"));
                };
                elements
                    .last_mut()
                    .ok_or_else(|| Error::format(path, line_no, "property before element"))?
                    .props
                    .push(Property::List(name.to_string(), c, i));
            }
            ["property", ty, name] => {
                let t = Scalar::parse(ty)
                    .ok_or_else(|| Error::format(path, line_no, format!("unknown property type `{ty}`")))?;
                elements
                    .last_mut()
                    .ok_or_else(|| Error::format(path, line_no, "property before element"))?
                    .props
                    .push(Property::Value(name.to_string(), t));
            }
            _ => return Err(Error::format(path, line_no, format!("unrecognized header line `{line}`"))),
        }
    }

    let mut body = Body {
        bytes: &bytes,
        pos,
        ascii,
    };
    let mut vertices = Vec::new();
    let mut normals = Vec::new();
    let mut colors = Vec::new();
    let mut scalars: Vec<(String, Vec<f64>)> = Vec::new();
    let mut faces = Vec::new();

    for el in &elements {
        let is_vertex = el.name == "vertex";
        let is_face = el.name == "face";
        if is_vertex {
            for p in &el.props {
                if let Property::Value(name, _) = p {
                    if !matches!(
                        name.as_str(),
                        "x" | "y" | "z" | "nx" | "ny" | "nz" | "red" | "green" | "blue"
                    ) {
                        scalars.push((name.clone(), Vec::with_capacity(el.count)));
                    }
                }
            }
        }
        let has = |n: &str| el.props.iter().any(|p| matches!(p, Property::Value(m, _) if m == n));
        let with_normals = is_vertex && has("nx") && has("ny") && has("nz");
        let with_colors = is_vertex && has("red") && has("green") && has("blue");

        for _ in 0..el.count {
            let mut p = Vec3::zeros();
            let mut n = Vec3::zeros();
            let mut c = [0.0; 3];
            let mut s = 0;
            for prop in &el.props {
                match prop {
                    Property::Value(name, ty) => {
                        let v = body.read(*ty, path)?;
                        if !is_vertex {
                            continue;
                        }
                        let color_scale = if matches!(ty, Scalar::F32 | Scalar::F64) { 1.0 } else { 1.0 / 255.0 };
                        match name.as_str() {
                            "x" => p.x = v,
                            "y" => p.y = v,
                            "z" => p.z = v,
                            "nx" => n.x = v,
                            "ny" => n.y = v,
                            "nz" => n.z = v,
                            "red" => c[0] = v * color_scale,
                            "green" => c[1] = v * color_scale,
                            "blue" => c[2] = v * color_scale,
                            _ => {
                                scalars[s].1.push(v);
                                s += 1;
                            }
                        }
                    }
                    Property::List(name, cnt_ty, item_ty) => {
                        let cnt = body.read(*cnt_ty, path)? as usize;
                        let mut poly = Vec::with_capacity(cnt);
                        for _ in 0..cnt {
                            poly.push(body.read(*item_ty, path)? as usize);
                        }
                        if is_face && (name == "vertex_indices" || name == "vertex_index") {
                            if poly.len() < 3 {
                                return Err(Error::format(
                                    path,
                                    0,
                                    format!("face with {} vertices near byte offset {}", poly.len(), body.pos),
                                ));
                            }
                            faces.extend(fan(&poly));
                        }
                    }
                }
            }
            if is_vertex {
                vertices.push(p);
                if with_normals {
                    normals.push(n);
                }
                if with_colors {
                    colors.push(c);
                }
            }
        }
    }

    let mut mesh = TriangleMesh::new(vertices, faces)?;
    if !normals.is_empty() {
        mesh.set_attribute(NORMAL, Attribute::Normal(normals))?;
    }
    if !colors.is_empty() {
        mesh.set_attribute(COLOR, Attribute::Color(colors))?;
    }
    for (name, values) in scalars {
        mesh.set_attribute(format!("{SCALAR_PREFIX}{name}"), Attribute::Scalar(values))?;
    }
    Ok(mesh)
}

fn ply_bytes(mesh: &TriangleMesh) -> Vec<u8> {
    let normals = mesh.normals(NORMAL);
    let colors = mesh.colors();
    let scalars: Vec<(&str, &[f64])> = mesh
        .attributes()
        .iter()
        .filter_map(|(k, a)| match (k.strip_prefix(SCALAR_PREFIX), a) {
            (Some(name), Attribute::Scalar(v)) => Some((name, v.as_slice())),
            _ => None,
        })
        .collect();

    let mut out = Vec::new();
    writeln!(out, "ply\nformat binary_little_endian 1.0\ncomment facefuse").unwrap();
    writeln!(out, "element vertex {}", mesh.num_vertices()).unwrap();
    writeln!(out, "property float x\nproperty float y\nproperty float z").unwrap();
    if normals.is_some() {
        writeln!(out, "property float nx\nproperty float ny\nproperty float nz").unwrap();
    }
    if colors.is_some() {
        writeln!(out, "property uchar red\nproperty uchar green\nproperty uchar blue").unwrap();
    }
    for (name, _) in &scalars {
        writeln!(out, "property float {name}").unwrap();
    }
    writeln!(out, "element face {}", mesh.num_faces()).unwrap();
    writeln!(out, "property list uchar int vertex_indices\nend_header").unwrap();

    let f32le = |out: &mut Vec<u8>, v: f64| out.extend_from_slice(&(v as f32).to_le_bytes());
    for (i, v) in mesh.vertices().iter().enumerate() {
        f32le(&mut out, v.x);
        f32le(&mut out, v.y);
        f32le(&mut out, v.z);
        if let Some(ns) = normals {
            f32le(&mut out, ns[i].x);
            f32le(&mut out, ns[i].y);
            f32le(&mut out, ns[i].z);
        }
        if let Some(cs) = colors {
            for ch in cs[i] {
                out.push((ch.clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
        for (_, values) in &scalars {
            f32le(&mut out, values[i]);
        }
    }
    for f in mesh.faces() {
        out.push(3);
        for &i in f {
            out.extend_from_slice(&(i as i32).to_le_bytes());
        }
    }
    out
}
