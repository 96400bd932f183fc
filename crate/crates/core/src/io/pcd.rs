use std::fmt::Write as _;

use super::{
    format_sig6, label_from_value, split_header, CloudFormat, LoadedCloud, Scalar, LABEL_LEGEND,
};
use crate::{Error, Label, LabelMask, Point3, PointCloud, Result};

#[derive(Debug)]
struct Field {
    name: String,
    ty: Scalar,
    count: usize,
}

#[derive(Debug)]
struct Header {
    fields: Vec<Field>,
    points: usize,
    binary: bool,
}

fn field_type(kind: &str, size: usize) -> Option<Scalar> {
    Some(match (kind, size) {
        ("I", 1) => Scalar::I8,
        ("U", 1) => Scalar::U8,
        ("I", 2) => Scalar::I16,
        ("U", 2) => Scalar::U16,
        ("I", 4) => Scalar::I32,
        ("U", 4) => Scalar::U32,
        ("F", 4) => Scalar::F32,
        ("F", 8) => Scalar::F64,
        _ => return None,
    })
}

fn parse_header(lines: &[&str]) -> Result<Header> {
    let mut names: Vec<&str> = Vec::new();
    let mut sizes: Vec<usize> = Vec::new();
    let mut kinds: Vec<&str> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    let mut version = None;
    let mut width = None;
    let mut height = 1usize;
    let mut points = None;
    let mut data = None;
    let num = |s: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::MalformedHeader(format!("bad number `{s}`")))
    };
    for line in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut words = line.split_whitespace();
        let key = words.next().unwrap_or_default();
        let rest: Vec<&str> = words.collect();
        match key {
            "VERSION" => version = rest.first().copied(),
            "FIELDS" => names = rest,
            "SIZE" => sizes = rest.iter().map(|s| num(s)).collect::<Result<_>>()?,
            "TYPE" => kinds = rest,
            "COUNT" => counts = rest.iter().map(|s| num(s)).collect::<Result<_>>()?,
            "WIDTH" => width = Some(num(rest.first().copied().unwrap_or(""))?),
            "HEIGHT" => height = num(rest.first().copied().unwrap_or(""))?,
            "POINTS" => points = Some(num(rest.first().copied().unwrap_or(""))?),
            "VIEWPOINT" => {}
            "DATA" => data = rest.first().copied(),
            other => return Err(Error::MalformedHeader(format!("unknown PCD key `{other}`"))),
        }
    }
    match version {
        Some("0.7") | Some(".7") => {}
        Some(v) => return Err(Error::UnsupportedFormat(format!("PCD version {v}"))),
        None => return Err(Error::MalformedHeader("missing VERSION".into())),
    }
    if counts.is_empty() {
        counts = vec![1; names.len()];
    }
    if names.is_empty()
        || sizes.len() != names.len()
        || kinds.len() != names.len()
        || counts.len() != names.len()
    {
        return Err(Error::MalformedHeader(
            "FIELDS, SIZE, TYPE and COUNT disagree".into(),
        ));
    }
    let fields = names
        .iter()
        .zip(&sizes)
        .zip(&kinds)
        .zip(&counts)
        .map(|(((n, &s), k), &c)| {
            field_type(k, s)
                .map(|ty| Field {
                    name: n.to_string(),
                    ty,
                    count: c,
                })
                .ok_or_else(|| Error::UnsupportedProperty(n.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    let points = match (points, width) {
        (Some(p), _) => p,
        (None, Some(w)) => w * height,
        (None, None) => return Err(Error::MalformedHeader("missing POINTS".into())),
    };
    let binary = match data {
        Some("ascii") => false,
        Some("binary") => true,
        Some(other) => return Err(Error::UnsupportedFormat(format!("PCD DATA {other}"))),
        None => return Err(Error::MalformedHeader("missing DATA".into())),
    };
    Ok(Header {
        fields,
        points,
        binary,
    })
}

/// Offsets (in scalar slots) of the fields we read.
struct Layout {
    xyz: [usize; 3],
    intensity: Option<usize>,
    classification: Option<usize>,
    slots: Vec<Scalar>,
}

fn layout(fields: &[Field]) -> Result<Layout> {
    let mut xyz = [None; 3];
    let mut intensity = None;
    let mut classification = None;
    let mut slots = Vec::new();
    for f in fields {
        let slot = slots.len();
        match f.name.as_str() {
            "x" | "y" | "z" => {
                if !f.ty.is_float() || f.count != 1 {
                    return Err(Error::UnsupportedProperty(f.name.clone()));
                }
                xyz[(f.name.as_bytes()[0] - b'x') as usize] = Some(slot);
            }
            "intensity" if f.count == 1 => intensity = Some(slot),
            "classification" | "label" if f.count == 1 && !f.ty.is_float() => {
                classification = Some(slot)
            }
            other => log::warn!("skipping PCD field `{other}`"),
        }
        slots.extend(std::iter::repeat_n(f.ty, f.count));
    }
    let [Some(x), Some(y), Some(z)] = xyz else {
        return Err(Error::MalformedHeader("FIELDS lacks x, y or z".into()));
    };
    Ok(Layout {
        xyz: [x, y, z],
        intensity,
        classification,
        slots,
    })
}

pub(super) fn read(bytes: &[u8]) -> Result<LoadedCloud> {
    let (lines, body) = split_header(bytes, |l| l.starts_with("DATA"))?;
    let header = parse_header(&lines)?;
    let layout = layout(&header.fields)?;
    let n = header.points;
    let mut row = vec![0.0; layout.slots.len()];
    let mut points = Vec::with_capacity(n);
    let mut intensity = layout.intensity.map(|_| Vec::with_capacity(n));
    let mut labels: Option<Vec<Label>> = layout.classification.map(|_| Vec::with_capacity(n));
    let mut non_finite = 0;
    let mut take = |row: &[f64]| -> Result<()> {
        let p = Point3::new(row[layout.xyz[0]], row[layout.xyz[1]], row[layout.xyz[2]]);
        if !p.is_finite() {
            non_finite += 1;
        }
        points.push(p);
        if let (Some(v), Some(i)) = (&mut intensity, layout.intensity) {
            v.push(row[i] as f32);
        }
        if let (Some(v), Some(i)) = (&mut labels, layout.classification) {
            v.push(label_from_value(row[i])?);
        }
        Ok(())
    };
    let body = &bytes[body..];
    let format = if header.binary {
        let stride: usize = layout.slots.iter().map(|s| s.size()).sum();
        let available = body.len() / stride;
        if available < n {
            return Err(Error::TruncatedBody {
                expected: n,
                read: available,
            });
        }
        let mut pos = 0;
        for _ in 0..n {
            for (slot, ty) in row.iter_mut().zip(&layout.slots) {
                *slot = ty.read_le(&body[pos..]);
                pos += ty.size();
            }
            take(&row)?;
        }
        CloudFormat::PcdBinary
    } else {
        let text = std::str::from_utf8(body)
            .map_err(|_| Error::MalformedBody("ASCII body is not valid UTF-8".into()))?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        for read in 0..n {
            let line = lines
                .next()
                .ok_or(Error::TruncatedBody { expected: n, read })?;
            let mut tokens = line.split_whitespace();
            for slot in row.iter_mut() {
                let tok = tokens
                    .next()
                    .ok_or(Error::TruncatedBody { expected: n, read })?;
                *slot = tok.parse().map_err(|_| {
                    Error::MalformedBody(format!("point {read}: bad value `{tok}`"))
                })?;
            }
            take(&row)?;
        }
        CloudFormat::PcdAscii
    };
    if non_finite > 0 {
        return Err(Error::NonFiniteCoordinate { count: non_finite });
    }
    let cloud = match intensity {
        Some(i) => PointCloud::with_intensity(points, i)?,
        None => PointCloud::new(points)?,
    };
    Ok(LoadedCloud {
        cloud,
        labels: labels.map(LabelMask::new),
        format,
    })
}

pub(super) fn write(
    cloud: &PointCloud,
    labels: Option<&LabelMask>,
    format: CloudFormat,
) -> Vec<u8> {
    let binary = format == CloudFormat::PcdBinary;
    let intensity = cloud.intensity();
    let mut fields = vec!["x", "y", "z"];
    let coord_size = if binary { "8" } else { "4" };
    let mut sizes = vec![coord_size; 3];
    let mut types = vec!["F"; 3];
    if intensity.is_some() {
        fields.push("intensity");
        sizes.push("4");
        types.push("F");
    }
    if labels.is_some() {
        fields.push("classification");
        sizes.push("1");
        types.push("U");
    }
    let n = cloud.len();
    let mut h = String::new();
    h.push_str("# .PCD v0.7 - Point Cloud Data file format\n");
    let _ = writeln!(h, "# {LABEL_LEGEND}");
    h.push_str("VERSION 0.7\n");
    let _ = writeln!(h, "FIELDS {}", fields.join(" "));
    let _ = writeln!(h, "SIZE {}", sizes.join(" "));
    let _ = writeln!(h, "TYPE {}", types.join(" "));
    let _ = writeln!(h, "COUNT {}", vec!["1"; fields.len()].join(" "));
    let _ = writeln!(h, "WIDTH {n}");
    h.push_str("HEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\n");
    let _ = writeln!(h, "POINTS {n}");
    let _ = writeln!(h, "DATA {}", if binary { "binary" } else { "ascii" });
    let mut out = h.into_bytes();
    if binary {
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
