//! OBJ and PLY readers/writers.
//!
//! OBJ carries semantic labels through `g`/`usemtl` group names resolved by a
//! [`LabelTable`]; without a table, groups named `label_<id>` map to `<id>`.
//! PLY carries them as an integer `label` property on the face element.
//! Vertex order is preserved in both directions.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use super::{GeometryError, LabelId, LabelTable, Point, TriMesh, UNLABELED};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    /// ASCII PLY on write; either PLY encoding on read.
    Ply,
    /// Binary little-endian PLY on write; either PLY encoding on read.
    PlyBinary,
}

impl MeshFormat {
    /// Guess from the file extension (`.obj`, `.ply`).
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "obj" => Some(Self::Obj),
            "ply" => Some(Self::Ply),
            _ => None,
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> GeometryError {
    GeometryError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn load_mesh(path: &Path, format: MeshFormat) -> Result<TriMesh, GeometryError> {
    load_mesh_with_labels(path, format, None)
}

pub fn load_mesh_with_labels(
    path: &Path,
    format: MeshFormat,
    labels: Option<&LabelTable>,
) -> Result<TriMesh, GeometryError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    match format {
        MeshFormat::Obj => {
            let text = String::from_utf8_lossy(&bytes);
            parse_obj(&text, labels)
        }
        MeshFormat::Ply | MeshFormat::PlyBinary => parse_ply(&bytes),
    }
}

pub fn write_mesh(path: &Path, mesh: &TriMesh, format: MeshFormat) -> Result<(), GeometryError> {
    write_mesh_with_labels(path, mesh, format, None)
}

pub fn write_mesh_with_labels(
    path: &Path,
    mesh: &TriMesh,
    format: MeshFormat,
    labels: Option<&LabelTable>,
) -> Result<(), GeometryError> {
    let bytes = match format {
        MeshFormat::Obj => obj_string(mesh, labels).into_bytes(),
        MeshFormat::Ply => ply_ascii(mesh).into_bytes(),
        MeshFormat::PlyBinary => ply_binary(mesh),
    };
    let mut f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(&bytes).map_err(|e| io_err(path, e))
}

fn obj_err(line: usize, message: impl Into<String>) -> GeometryError {
    GeometryError::Parse {
        format: "OBJ",
        location: format!("line {line}"),
        message: message.into(),
    }
}

fn group_label(name: &str, labels: Option<&LabelTable>) -> LabelId {
    match labels {
        Some(t) => t.id(name).unwrap_or(UNLABELED),
        None => name
            .strip_prefix("label_")
            .and_then(|s| s.parse().ok())
            .unwrap_or(UNLABELED),
    }
}

pub fn parse_obj(text: &str, labels: Option<&LabelTable>) -> Result<TriMesh, GeometryError> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut face_labels = Vec::new();
    let mut current = UNLABELED;
    let mut saw_group = false;

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tok = line.split_whitespace();
        let Some(kw) = tok.next() else { continue };
        match kw {
            "v" => {
                let mut c = [0.0; 3];
                for slot in &mut c {
                    let s = tok
                        .next()
                        .ok_or_else(|| obj_err(line_no, "vertex needs three coordinates"))?;
                    *slot = s
                        .parse()
                        .map_err(|_| obj_err(line_no, format!("bad coordinate `{s}`")))?;
                }
                vertices.push(Point::new(c[0], c[1], c[2]));
            }
            "f" => {
                let mut idx = Vec::with_capacity(4);
                for t in tok {
                    let first = t.split('/').next().unwrap_or("");
                    let i: i64 = first
                        .parse()
                        .map_err(|_| obj_err(line_no, format!("bad face index `{t}`")))?;
                    let resolved = if i > 0 {
                        i - 1
                    } else if i < 0 {
                        vertices.len() as i64 + i
                    } else {
                        return Err(obj_err(line_no, "face index 0 is invalid"));
                    };
                    if resolved < 0 || resolved > u32::MAX as i64 {
                        return Err(obj_err(line_no, format!("face index `{t}` out of range")));
                    }
                    idx.push(resolved as u32);
                }
                if idx.len() < 3 {
                    return Err(obj_err(line_no, "face needs at least three vertices"));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                    face_labels.push(current);
                }
            }
            "g" | "usemtl" | "o" => {
                let name = tok.collect::<Vec<_>>().join(" ");
                current = group_label(&name, labels);
                saw_group = true;
            }
            _ => {}
        }
    }
    let labels_out = (saw_group && face_labels.iter().any(|&l| l != UNLABELED)).then_some(face_labels);
    TriMesh::new(vertices, faces, labels_out)
}

pub fn obj_string(mesh: &TriMesh, labels: Option<&LabelTable>) -> String {
    let mut out = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    let mut current: Option<LabelId> = None;
    for (fi, f) in mesh.faces().iter().enumerate() {
        if mesh.face_labels().is_some() {
            let l = mesh.face_label(fi);
            if current != Some(l) {
                let name = match labels.and_then(|t| t.name(l)) {
                    Some(n) => n.to_string(),
                    None if l == UNLABELED => "unlabeled".to_string(),
                    None => format!("label_{l}"),
                };
                let _ = writeln!(out, "g {name}");
                current = Some(l);
            }
        }
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
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
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

fn ply_err(location: String, message: impl Into<String>) -> GeometryError {
    GeometryError::Parse {
        format: "PLY",
        location,
        message: message.into(),
    }
}

#[derive(Default)]
struct PlyData {
    vertices: Vec<Point>,
    faces: Vec<[u32; 3]>,
    labels: Vec<LabelId>,
    has_labels: bool,
}

impl PlyData {
    fn push_vertex(&mut self, props: &[Property], vals: &[f64]) {
        let mut p = [0.0; 3];
        for (prop, &v) in props.iter().zip(vals) {
            if let Property::Scalar { name, .. } = prop {
                match name.as_str() {
                    "x" => p[0] = v,
                    "y" => p[1] = v,
                    "z" => p[2] = v,
                    _ => {}
                }
            }
        }
        self.vertices.push(Point::new(p[0], p[1], p[2]));
    }

    fn push_face(&mut self, poly: &[u32], label: Option<LabelId>) {
        if poly.len() < 3 {
            return;
        }
        for k in 1..poly.len() - 1 {
            self.faces.push([poly[0], poly[k], poly[k + 1]]);
            self.labels.push(label.unwrap_or(UNLABELED));
        }
    }
}

fn is_index_list(name: &str) -> bool {
    name == "vertex_indices" || name == "vertex_index"
}

pub fn parse_ply(bytes: &[u8]) -> Result<TriMesh, GeometryError> {
    // header is ASCII and ends with "end_header\n"
    let marker = b"end_header";
    let header_end = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| ply_err("header".into(), "missing end_header"))?;
    let mut body_start = header_end + marker.len();
    if bytes.get(body_start) == Some(&b'\r') {
        body_start += 1;
    }
    if bytes.get(body_start) == Some(&b'\n') {
        body_start += 1;
    }
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| ply_err("header".into(), "header is not valid UTF-8"))?;

    let mut binary = false;
    let mut elements: Vec<Element> = Vec::new();
    for (i, line) in header.lines().enumerate() {
        let loc = || format!("header line {}", i + 1);
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.first().copied() {
            Some("ply") | Some("comment") | Some("obj_info") | None => {}
            Some("format") => match tok.get(1).copied() {
                Some("ascii") => binary = false,
                Some("binary_little_endian") => binary = true,
                Some(other) => return Err(ply_err(loc(), format!("unsupported format `{other}`"))),
                None => return Err(ply_err(loc(), "format line incomplete")),
            },
            Some("element") => {
                let (Some(name), Some(count)) = (tok.get(1), tok.get(2)) else {
                    return Err(ply_err(loc(), "element line incomplete"));
                };
                let count = count
                    .parse()
                    .map_err(|_| ply_err(loc(), format!("bad element count `{count}`")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| ply_err(loc(), "property before element"))?;
                let prop = if tok.get(1) == Some(&"list") {
                    let (Some(c), Some(it), Some(name)) = (tok.get(2), tok.get(3), tok.get(4)) else {
                        return Err(ply_err(loc(), "list property incomplete"));
                    };
                    Property::List {
                        name: name.to_string(),
                        count: Scalar::parse(c).ok_or_else(|| ply_err(loc(), format!("bad type `{c}`")))?,
                        item: Scalar::parse(it).ok_or_else(|| ply_err(loc(), format!("bad type `{it}`")))?,
                    }
                } else {
                    let (Some(ty), Some(name)) = (tok.get(1), tok.get(2)) else {
                        return Err(ply_err(loc(), "property incomplete"));
                    };
                    Property::Scalar {
                        name: name.to_string(),
                        ty: Scalar::parse(ty).ok_or_else(|| ply_err(loc(), format!("bad type `{ty}`")))?,
                    }
                };
                el.props.push(prop);
            }
            Some(other) => return Err(ply_err(loc(), format!("unknown header keyword `{other}`"))),
        }
    }

    let mut data = PlyData::default();
    if let Some(face) = elements.iter().find(|e| e.name == "face") {
        data.has_labels = face
            .props
            .iter()
            .any(|p| matches!(p, Property::Scalar { name, .. } if name == "label"));
    }
    let body = &bytes[body_start..];
    if binary {
        read_ply_binary(body, body_start, &elements, &mut data)?;
    } else {
        let text = std::str::from_utf8(body).map_err(|_| ply_err("body".into(), "body is not valid UTF-8"))?;
        read_ply_ascii(text, header.lines().count() + 1, &elements, &mut data)?;
    }
    let labels = data.has_labels.then_some(data.labels);
    TriMesh::new(data.vertices, data.faces, labels)
}

fn read_ply_ascii(
    text: &str,
    first_line: usize,
    elements: &[Element],
    data: &mut PlyData,
) -> Result<(), GeometryError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    for el in elements {
        for _ in 0..el.count {
            let (i, line) = lines
                .next()
                .ok_or_else(|| ply_err("body".into(), format!("unexpected end of data in `{}`", el.name)))?;
            let loc = || format!("line {}", first_line + i + 1);
            let mut tok = line.split_whitespace();
            let mut next = || -> Result<f64, GeometryError> {
                let t = tok.next().ok_or_else(|| ply_err(loc(), "too few values"))?;
                t.parse::<f64>().map_err(|_| ply_err(loc(), format!("bad number `{t}`")))
            };
            let mut scalars = Vec::with_capacity(el.props.len());
            let mut poly = Vec::new();
            let mut label = None;
            for p in &el.props {
                match p {
                    Property::Scalar { name, .. } => {
                        let v = next()?;
                        if name == "label" {
                            label = Some(v as LabelId);
                        }
                        scalars.push(v);
                    }
                    Property::List { name, .. } => {
                        let n = next()? as usize;
                        let mut items = Vec::with_capacity(n);
                        for _ in 0..n {
                            items.push(next()?);
                        }
                        if is_index_list(name) {
                            poly = items.iter().map(|&v| v as u32).collect();
                        }
                        scalars.push(f64::NAN);
                    }
                }
            }
            match el.name.as_str() {
                "vertex" => data.push_vertex(&el.props, &scalars),
                "face" => data.push_face(&poly, label),
                _ => {}
            }
        }
    }
    Ok(())
}

fn read_ply_binary(
    body: &[u8],
    base: usize,
    elements: &[Element],
    data: &mut PlyData,
) -> Result<(), GeometryError> {
    let mut pos = 0usize;
    let mut take = |ty: Scalar, what: &str| -> Result<f64, GeometryError> {
        let n = ty.size();
        if pos + n > body.len() {
            return Err(ply_err(format!("byte offset {}", base + pos), format!("truncated {what}")));
        }
        let v = ty.read_le(&body[pos..pos + n]);
        pos += n;
        Ok(v)
    };
    for el in elements {
        for _ in 0..el.count {
            let mut scalars = Vec::with_capacity(el.props.len());
            let mut poly = Vec::new();
            let mut label = None;
            for p in &el.props {
                match p {
                    Property::Scalar { name, ty } => {
                        let v = take(*ty, &el.name)?;
                        if name == "label" {
                            label = Some(v as LabelId);
                        }
                        scalars.push(v);
                    }
                    Property::List { name, count, item } => {
                        let n = take(*count, &el.name)? as usize;
                        let mut items = Vec::with_capacity(n);
                        for _ in 0..n {
                            items.push(take(*item, &el.name)?);
                        }
                        if is_index_list(name) {
                            poly = items.iter().map(|&v| v as u32).collect();
                        }
                        scalars.push(f64::NAN);
                    }
                }
            }
            match el.name.as_str() {
                "vertex" => data.push_vertex(&el.props, &scalars),
                "face" => data.push_face(&poly, label),
                _ => {}
            }
        }
    }
    Ok(())
}

fn ply_header(mesh: &TriMesh, format: &str) -> String {
    let mut h = String::new();
    let _ = writeln!(h, "ply\nformat {format} 1.0");
    let _ = writeln!(h, "element vertex {}", mesh.vertex_count());
    h.push_str("property double x\nproperty double y\nproperty double z\n");
    let _ = writeln!(h, "element face {}", mesh.face_count());
    h.push_str("property list uchar int vertex_indices\n");
    if mesh.face_labels().is_some() {
        h.push_str("property int label\n");
    }
    h.push_str("end_header\n");
    h
}

fn ply_ascii(mesh: &TriMesh) -> String {
    let mut out = ply_header(mesh, "ascii");
    for v in mesh.vertices() {
        let _ = writeln!(out, "{} {} {}", v.x, v.y, v.z);
    }
    for (fi, f) in mesh.faces().iter().enumerate() {
        let _ = write!(out, "3 {} {} {}", f[0], f[1], f[2]);
        if mesh.face_labels().is_some() {
            let _ = write!(out, " {}", mesh.face_label(fi));
        }
        out.push('\n');
    }
    out
}

fn ply_binary(mesh: &TriMesh) -> Vec<u8> {
    let mut out = ply_header(mesh, "binary_little_endian").into_bytes();
    for v in mesh.vertices() {
        for c in [v.x, v.y, v.z] {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    for (fi, f) in mesh.faces().iter().enumerate() {
        out.push(3);
        for &i in f {
            out.extend_from_slice(&(i as i32).to_le_bytes());
        }
        if mesh.face_labels().is_some() {
            out.extend_from_slice(&mesh.face_label(fi).to_le_bytes());
        }
    }
    out
}
