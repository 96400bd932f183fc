use std::fmt::Write as _;

use super::{
    format_sig6, label_from_value, split_header, CloudFormat, LoadedCloud, Scalar, LABEL_LEGEND,
};
use crate::{Error, LabelMask, Point3, PointCloud, Result};

#[derive(Debug)]
enum Property {
    Scalar {
        name: String,
        ty: Scalar,
    },
    List {
        name: String,
        count: Scalar,
        item: Scalar,
    },
}

impl Property {
    fn name(&self) -> &str {
        match self {
            Property::Scalar { name, .. } | Property::List { name, .. } => name,
        }
    }
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

fn scalar_type(name: &str) -> Option<Scalar> {
    Some(match name {
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

/// Column positions of the vertex properties we use.
#[derive(Debug, Default)]
struct VertexLayout {
    x: usize,
    y: usize,
    z: usize,
    intensity: Option<usize>,
    classification: Option<usize>,
}

fn vertex_layout(el: &Element) -> Result<VertexLayout> {
    let mut found: [Option<usize>; 3] = [None; 3];
    let mut layout = VertexLayout::default();
    for (i, p) in el.props.iter().enumerate() {
        let (name, ty) = match p {
            Property::Scalar { name, ty } => (name.as_str(), *ty),
            Property::List { name, .. } => {
                return Err(Error::UnsupportedProperty(name.clone()));
            }
        };
        match name {
            "x" | "y" | "z" => {
                if !ty.is_float() {
                    return Err(Error::UnsupportedProperty(name.to_string()));
                }
                let axis = (name.as_bytes()[0] - b'x') as usize;
                found[axis] = Some(i);
            }
            "intensity" => layout.intensity = Some(i),
            "classification" => {
                if ty.is_float() {
                    return Err(Error::UnsupportedProperty(name.to_string()));
                }
                layout.classification = Some(i);
            }
            other => log::warn!("skipping PLY vertex property `{other}`"),
        }
    }
    match found {
        [Some(x), Some(y), Some(z)] => {
            layout.x = x;
            layout.y = y;
            layout.z = z;
            Ok(layout)
        }
        _ => Err(Error::MalformedHeader(
            "vertex element lacks x, y or z".into(),
        )),
    }
}

fn parse_header(lines: &[&str]) -> Result<(CloudFormat, Vec<Element>)> {
    let mut it = lines.iter().map(|l| l.trim());
    if it.next() != Some("ply") {
        return Err(Error::MalformedHeader("missing `ply` magic".into()));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    for line in it {
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            [] | ["comment", ..] | ["obj_info", ..] | ["end_header"] => {}
            ["format", kind, version] => {
                if *version != "1.0" {
                    return Err(Error::UnsupportedFormat(format!("PLY version {version}")));
                }
                format = Some(match *kind {
                    "ascii" => CloudFormat::PlyAscii,
                    "binary_little_endian" => CloudFormat::PlyBinaryLe,
                    other => return Err(Error::UnsupportedFormat(format!("PLY {other}"))),
                });
            }
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| Error::MalformedHeader(format!("bad element count `{count}`")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            ["property", "list", count, item, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::MalformedHeader("property before element".into()))?;
                let (Some(count), Some(item)) = (scalar_type(count), scalar_type(item)) else {
                    return Err(Error::UnsupportedProperty(name.to_string()));
                };
                el.props.push(Property::List {
                    name: name.to_string(),
                    count,
                    item,
                });
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::MalformedHeader("property before element".into()))?;
                let ty =
                    scalar_type(ty).ok_or_else(|| Error::UnsupportedProperty(name.to_string()))?;
                el.props.push(Property::Scalar {
                    name: name.to_string(),
                    ty,
                });
            }
            _ => return Err(Error::MalformedHeader(format!("unexpected line `{line}`"))),
        }
    }
    let format = format.ok_or_else(|| Error::MalformedHeader("missing format line".into()))?;
    Ok((format, elements))
}

struct Columns {
    points: Vec<Point3>,
    intensity: Option<Vec<f32>>,
    labels: Option<Vec<crate::Label>>,
    non_finite: usize,
}

impl Columns {
    fn new(n: usize, layout: &VertexLayout) -> Self {
        Columns {
            points: Vec::with_capacity(n),
            intensity: layout.intensity.map(|_| Vec::with_capacity(n)),
            labels: layout.classification.map(|_| Vec::with_capacity(n)),
            non_finite: 0,
        }
    }

    fn push(&mut self, row: &[f64], layout: &VertexLayout) -> Result<()> {
        let p = Point3::new(row[layout.x], row[layout.y], row[layout.z]);
        if !p.is_finite() {
            self.non_finite += 1;
        }
        self.points.push(p);
        if let (Some(v), Some(i)) = (&mut self.intensity, layout.intensity) {
            v.push(row[i] as f32);
        }
        if let (Some(v), Some(i)) = (&mut self.labels, layout.classification) {
            v.push(label_from_value(row[i])?);
        }
        Ok(())
    }

    fn finish(self, format: CloudFormat) -> Result<LoadedCloud> {
        if self.non_finite > 0 {
            return Err(Error::NonFiniteCoordinate {
                count: self.non_finite,
            });
        }
        let cloud = match self.intensity {
            Some(i) => PointCloud::with_intensity(self.points, i)?,
            None => PointCloud::new(self.points)?,
        };
        Ok(LoadedCloud {
            cloud,
            labels: self.labels.map(LabelMask::new),
            format,
        })
    }
}

pub(super) fn read(bytes: &[u8]) -> Result<LoadedCloud> {
    let (lines, body) = split_header(bytes, |l| l == "end_header")?;
    let (format, elements) = parse_header(&lines)?;
    let vertex_pos = elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| Error::MalformedHeader("no vertex element".into()))?;
    let layout = vertex_layout(&elements[vertex_pos])?;
    let body = &bytes[body..];
    match format {
        CloudFormat::PlyAscii => read_ascii(body, &elements, vertex_pos, &layout, format),
        _ => read_binary(body, &elements, vertex_pos, &layout, format),
    }
}

fn read_ascii(
    body: &[u8],
    elements: &[Element],
    vertex_pos: usize,
    layout: &VertexLayout,
    format: CloudFormat,
) -> Result<LoadedCloud> {
    let text = std::str::from_utf8(body)
        .map_err(|_| Error::MalformedBody("ASCII body is not valid UTF-8".into()))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    for el in &elements[..vertex_pos] {
        for _ in 0..el.count {
            lines.next();
        }
    }
    let vertex = &elements[vertex_pos];
    let mut cols = Columns::new(vertex.count, layout);
    let mut row = vec![0.0; vertex.props.len()];
    for read in 0..vertex.count {
        let line = lines.next().ok_or(Error::TruncatedBody {
            expected: vertex.count,
            read,
        })?;
        let mut tokens = line.split_whitespace();
        for (slot, prop) in row.iter_mut().zip(&vertex.props) {
            let tok = tokens.next().ok_or(Error::TruncatedBody {
                expected: vertex.count,
                read,
            })?;
            *slot = tok.parse().map_err(|_| {
                Error::MalformedBody(format!("vertex {read}: bad {} value `{tok}`", prop.name()))
            })?;
        }
        cols.push(&row, layout)?;
    }
    cols.finish(format)
}

fn read_binary(
    body: &[u8],
    elements: &[Element],
    vertex_pos: usize,
    layout: &VertexLayout,
    format: CloudFormat,
) -> Result<LoadedCloud> {
    let vertex = &elements[vertex_pos];
    let truncated = |read| Error::TruncatedBody {
        expected: vertex.count,
        read,
    };
    let mut pos = 0usize;
    // skip whatever precedes the vertices
    for el in &elements[..vertex_pos] {
        for _ in 0..el.count {
            for p in &el.props {
                match p {
                    Property::Scalar { ty, .. } => pos += ty.size(),
                    Property::List { count, item, .. } => {
                        let n = body
                            .get(pos..pos + count.size())
                            .ok_or_else(|| truncated(0))?;
                        let n = count.read_le(n) as usize;
                        pos += count.size() + n * item.size();
                    }
                }
            }
        }
    }
    let types: Vec<Scalar> = vertex
        .props
        .iter()
        .map(|p| match p {
            Property::Scalar { ty, .. } => *ty,
            Property::List { .. } => unreachable!("rejected by vertex_layout"),
        })
        .collect();
    let stride: usize = types.iter().map(|t| t.size()).sum();
    let available = body.len().saturating_sub(pos) / stride.max(1);
    if available < vertex.count {
        return Err(truncated(available));
    }
    let mut cols = Columns::new(vertex.count, layout);
    let mut row = vec![0.0; types.len()];
    for _ in 0..vertex.count {
        for (slot, ty) in row.iter_mut().zip(&types) {
            *slot = ty.read_le(&body[pos..]);
            pos += ty.size();
        }
        cols.push(&row, layout)?;
    }
    cols.finish(format)
}

pub(super) fn write(
    cloud: &PointCloud,
    labels: Option<&LabelMask>,
    format: CloudFormat,
) -> Vec<u8> {
    let binary = format == CloudFormat::PlyBinaryLe;
    let mut header = String::new();
    header.push_str("ply\n");
    header.push_str(if binary {
        "format binary_little_endian 1.0\n"
    } else {
        "format ascii 1.0\n"
    });
    let _ = writeln!(header, "comment {LABEL_LEGEND}");
    let _ = writeln!(header, "element vertex {}", cloud.len());
    let coord = if binary { "double" } else { "float" };
    for axis in ["x", "y", "z"] {
        let _ = writeln!(header, "property {coord} {axis}");
    }
    let intensity = cloud.intensity();
    if intensity.is_some() {
        header.push_str("property float intensity\n");
    }
    if labels.is_some() {
        header.push_str("property uchar classification\n");
    }
    header.push_str("end_header\n");

    let mut out = header.into_bytes();
    if binary {
        out.reserve(cloud.len() * 29);
        for (i, p) in cloud.iter().enumerate() {
            out.extend_from_slice(&p.x.to_le_bytes());
            out.extend_from_slice(&p.y.to_le_bytes());
            out.extend_from_slice(&p.z.to_le_bytes());
            if let Some(v) = intensity {
                out.extend_from_slice(&v[i].to_le_bytes());
            }
            if let Some(l) = labels {
                out.push(l.get(i).code());
            }
        }
    } else {
        let mut s = String::new();
        for (i, p) in cloud.iter().enumerate() {
            let _ = write!(
                s,
                "{} {} {}",
                format_sig6(p.x),
                format_sig6(p.y),
                format_sig6(p.z)
            );
            if let Some(v) = intensity {
                let _ = write!(s, " {}", format_sig6(v[i] as f64));
            }
            if let Some(l) = labels {
                let _ = write!(s, " {}", l.get(i).code());
            }
            s.push('\n');
        }
        out.extend_from_slice(s.as_bytes());
    }
    out
}
