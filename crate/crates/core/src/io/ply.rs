use std::path::Path;

use nalgebra::Point3;

use super::{write_atomic, IoError, Location, MeshFormat};

/// Per-layer point colors for exported clouds; layer `k` uses entry `k % 8`.
pub const LAYER_PALETTE: [[u8; 3]; 8] = [
    [230, 25, 75],
    [60, 180, 75],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
    [128, 128, 0],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLittleEndian,
    BinaryBigEndian,
}

impl PlyEncoding {
    fn header_name(self) -> &'static str {
        match self {
            PlyEncoding::Ascii => "ascii",
            PlyEncoding::BinaryLittleEndian => "binary_little_endian",
            PlyEncoding::BinaryBigEndian => "binary_big_endian",
        }
    }
}

/// Vertex positions, triangulated faces and optional vertex colors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlyData {
    pub vertices: Vec<Point3<f64>>,
    pub triangles: Vec<[u32; 3]>,
    pub colors: Option<Vec<[u8; 3]>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
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
    fn parse(name: &str) -> Option<Scalar> {
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
    Scalar(Scalar, String),
    List(Scalar, Scalar, String),
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    line: usize,
    count: usize,
    props: Vec<Property>,
}

fn header_err(line: usize, message: impl Into<String>) -> IoError {
    IoError::Parse {
        format: MeshFormat::Ply,
        location: Location::Line(line),
        message: message.into(),
    }
}

/// Source of scalar values for the element rows.
trait Body {
    fn scalar(&mut self, ty: Scalar) -> Result<f64, IoError>;
    fn location(&self) -> Location;
}

struct AsciiBody<'a> {
    tokens: Vec<(usize, &'a str)>,
    pos: usize,
    last_line: usize,
}

impl Body for AsciiBody<'_> {
    fn scalar(&mut self, ty: Scalar) -> Result<f64, IoError> {
        let (line, tok) = *self.tokens.get(self.pos).ok_or_else(|| IoError::Parse {
            format: MeshFormat::Ply,
            location: Location::Line(self.last_line),
            message: "unexpected end of data".into(),
        })?;
        self.pos += 1;
        let bad = || IoError::Parse {
            format: MeshFormat::Ply,
            location: Location::Line(line),
            message: format!("bad {ty:?} value '{tok}'"),
        };
        let v = match ty {
            Scalar::F32 | Scalar::F64 => tok.parse::<f64>().map_err(|_| bad())?,
            _ => tok.parse::<i64>().map_err(|_| bad())? as f64,
        };
        Ok(v)
    }

    fn location(&self) -> Location {
        Location::Line(self.tokens.get(self.pos).map_or(self.last_line, |t| t.0))
    }
}

struct BinaryBody<'a> {
    data: &'a [u8],
    base: u64,
    pos: usize,
    little: bool,
}

impl Body for BinaryBody<'_> {
    fn scalar(&mut self, ty: Scalar) -> Result<f64, IoError> {
        let n = ty.size();
        let bytes = self.data.get(self.pos..self.pos + n).ok_or_else(|| IoError::Parse {
            format: MeshFormat::Ply,
            location: self.location(),
            message: "unexpected end of data".into(),
        })?;
        self.pos += n;
        macro_rules! num {
            ($t:ty) => {{
                let arr = bytes.try_into().expect("sized slice");
                if self.little {
                    <$t>::from_le_bytes(arr) as f64
                } else {
                    <$t>::from_be_bytes(arr) as f64
                }
            }};
        }
        Ok(match ty {
            Scalar::I8 => bytes[0] as i8 as f64,
            Scalar::U8 => bytes[0] as f64,
            Scalar::I16 => num!(i16),
            Scalar::U16 => num!(u16),
            Scalar::I32 => num!(i32),
            Scalar::U32 => num!(u32),
            Scalar::F32 => num!(f32),
            Scalar::F64 => num!(f64),
        })
    }

    fn location(&self) -> Location {
        Location::Byte(self.base + self.pos as u64)
    }
}

/// Parses an ASCII or binary (either endianness) PLY file. Reads `x, y, z`
/// (and `red, green, blue` when present) from `vertex` and the
/// `vertex_indices` / `vertex_index` list from `face`; other elements are
/// skipped. Faces are fan-triangulated.
pub fn parse_ply(bytes: &[u8]) -> Result<PlyData, IoError> {
    // Header: text lines up to and including `end_header`.
    let mut offset = 0usize;
    let mut line_no = 0usize;
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        line_no += 1;
        let rest = &bytes[offset..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| header_err(line_no, "header not terminated by end_header"))?;
        let line = std::str::from_utf8(&rest[..end])
            .map_err(|_| header_err(line_no, "header is not valid text"))?
            .trim_end_matches('\r')
            .trim();
        offset += end + 1;
        let mut t = line.split_ascii_whitespace();
        let keyword = t.next();
        if line_no == 1 {
            if line != "ply" {
                return Err(header_err(1, "missing 'ply' magic"));
            }
            continue;
        }
        match keyword {
            Some("format") => {
                encoding = Some(match (t.next(), t.next()) {
                    (Some("ascii"), Some("1.0")) => PlyEncoding::Ascii,
                    (Some("binary_little_endian"), Some("1.0")) => PlyEncoding::BinaryLittleEndian,
                    (Some("binary_big_endian"), Some("1.0")) => PlyEncoding::BinaryBigEndian,
                    _ => return Err(header_err(line_no, format!("unsupported format '{line}'"))),
                });
            }
            Some("element") => {
                let name = t.next().ok_or_else(|| header_err(line_no, "element without name"))?;
                let count = t
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| header_err(line_no, "element without valid count"))?;
                elements.push(Element {
                    name: name.to_string(),
                    line: line_no,
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| header_err(line_no, "property before any element"))?;
                let words: Vec<&str> = t.collect();
                let ty = |w: &str| {
                    Scalar::parse(w).ok_or_else(|| header_err(line_no, format!("unknown type '{w}'")))
                };
                let prop = match words.as_slice() {
                    ["list", c, i, name] => Property::List(ty(c)?, ty(i)?, name.to_string()),
                    [s, name] => Property::Scalar(ty(s)?, name.to_string()),
                    _ => return Err(header_err(line_no, format!("malformed property '{line}'"))),
                };
                element.props.push(prop);
            }
            Some("end_header") => break,
            Some("comment") | Some("obj_info") | None => {}
            Some(other) => return Err(header_err(line_no, format!("unknown header keyword '{other}'"))),
        }
    }
    let encoding = encoding.ok_or_else(|| header_err(line_no, "missing format line"))?;

    let body_bytes = &bytes[offset..];
    match encoding {
        PlyEncoding::Ascii => {
            let text = std::str::from_utf8(body_bytes)
                .map_err(|_| header_err(line_no + 1, "ASCII body is not valid text"))?;
            let mut tokens = Vec::new();
            let mut last_line = line_no;
            for (k, l) in text.lines().enumerate() {
                last_line = line_no + 1 + k;
                tokens.extend(l.split_ascii_whitespace().map(|w| (last_line, w)));
            }
            let mut body = AsciiBody {
                tokens,
                pos: 0,
                last_line,
            };
            read_elements(&elements, &mut body)
        }
        PlyEncoding::BinaryLittleEndian | PlyEncoding::BinaryBigEndian => {
            let mut body = BinaryBody {
                data: body_bytes,
                base: offset as u64,
                pos: 0,
                little: encoding == PlyEncoding::BinaryLittleEndian,
            };
            read_elements(&elements, &mut body)
        }
    }
}

fn read_elements(elements: &[Element], body: &mut dyn Body) -> Result<PlyData, IoError> {
    let mut out = PlyData::default();
    for element in elements {
        let find = |name: &str| {
            element
                .props
                .iter()
                .position(|p| matches!(p, Property::Scalar(_, n) if n == name))
        };
        match element.name.as_str() {
            "vertex" => {
                let axes = [find("x"), find("y"), find("z")];
                if axes.iter().any(Option::is_none) {
                    return Err(header_err(element.line, "vertex element lacks x, y or z"));
                }
                let rgb = [find("red"), find("green"), find("blue")];
                let has_rgb = rgb.iter().all(Option::is_some);
                let mut colors = Vec::new();
                let mut row = vec![0.0; element.props.len()];
                for _ in 0..element.count {
                    for (k, prop) in element.props.iter().enumerate() {
                        row[k] = match prop {
                            Property::Scalar(ty, _) => body.scalar(*ty)?,
                            Property::List(c, i, _) => {
                                skip_list(body, *c, *i)?;
                                0.0
                            }
                        };
                    }
                    let p = axes.map(|a| row[a.expect("checked")]);
                    if !p.iter().all(|v| v.is_finite()) {
                        return Err(IoError::Parse {
                            format: MeshFormat::Ply,
                            location: body.location(),
                            message: "non-finite vertex coordinate".into(),
                        });
                    }
                    out.vertices.push(Point3::new(p[0], p[1], p[2]));
                    if has_rgb {
                        colors.push(rgb.map(|c| row[c.expect("checked")].clamp(0.0, 255.0) as u8));
                    }
                }
                if has_rgb {
                    out.colors = Some(colors);
                }
            }
            "face" => {
                let list = element.props.iter().position(
                    |p| matches!(p, Property::List(_, _, n) if n == "vertex_indices" || n == "vertex_index"),
                );
                for _ in 0..element.count {
                    for (k, prop) in element.props.iter().enumerate() {
                        match prop {
                            Property::Scalar(ty, _) => {
                                body.scalar(*ty)?;
                            }
                            Property::List(c, i, _) if Some(k) == list => {
                                let at = body.location();
                                let n = body.scalar(*c)?;
                                let mut corners = Vec::with_capacity(n as usize);
                                for _ in 0..n as usize {
                                    let v = body.scalar(*i)?;
                                    if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
                                        return Err(IoError::Parse {
                                            format: MeshFormat::Ply,
                                            location: at,
                                            message: format!("invalid vertex index {v}"),
                                        });
                                    }
                                    corners.push(v as u32);
                                }
                                if corners.len() < 3 {
                                    return Err(IoError::Parse {
                                        format: MeshFormat::Ply,
                                        location: at,
                                        message: "face needs at least 3 corners".into(),
                                    });
                                }
                                if let Some(&bad) =
                                    corners.iter().find(|&&c| c as usize >= out.vertices.len())
                                {
                                    return Err(IoError::Parse {
                                        format: MeshFormat::Ply,
                                        location: at,
                                        message: format!(
                                            "vertex index {bad} exceeds vertex count {}",
                                            out.vertices.len()
                                        ),
                                    });
                                }
                                for j in 1..corners.len() - 1 {
                                    out.triangles.push([corners[0], corners[j], corners[j + 1]]);
                                }
                            }
                            Property::List(c, i, _) => skip_list(body, *c, *i)?,
                        }
                    }
                }
            }
            _ => {
                for _ in 0..element.count {
                    for prop in &element.props {
                        match prop {
                            Property::Scalar(ty, _) => {
                                body.scalar(*ty)?;
                            }
                            Property::List(c, i, _) => skip_list(body, *c, *i)?,
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

fn skip_list(body: &mut dyn Body, count: Scalar, item: Scalar) -> Result<(), IoError> {
    let n = body.scalar(count)?;
    if n < 0.0 {
        return Err(IoError::Parse {
            format: MeshFormat::Ply,
            location: body.location(),
            message: "negative list length".into(),
        });
    }
    for _ in 0..n as usize {
        body.scalar(item)?;
    }
    Ok(())
}

/// Encodes a vertex-only PLY with `double` coordinates and optional `uchar`
/// colors.
pub fn encode_ply(
    points: &[Point3<f64>],
    colors: Option<&[[u8; 3]]>,
    encoding: PlyEncoding,
) -> Vec<u8> {
    let mut out = format!(
        "ply\nformat {} 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\n",
        encoding.header_name(),
        points.len()
    );
    if colors.is_some() {
        out.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    out.push_str("end_header\n");
    let mut bytes = out.into_bytes();
    for (k, p) in points.iter().enumerate() {
        let c = colors.map(|c| c[k]);
        match encoding {
            PlyEncoding::Ascii => {
                let mut line = format!("{:?} {:?} {:?}", p.x, p.y, p.z);
                if let Some([r, g, b]) = c {
                    line.push_str(&format!(" {r} {g} {b}"));
                }
                line.push('\n');
                bytes.extend_from_slice(line.as_bytes());
            }
            PlyEncoding::BinaryLittleEndian | PlyEncoding::BinaryBigEndian => {
                let little = encoding == PlyEncoding::BinaryLittleEndian;
                for v in [p.x, p.y, p.z] {
                    bytes.extend_from_slice(&if little { v.to_le_bytes() } else { v.to_be_bytes() });
                }
                if let Some(rgb) = c {
                    bytes.extend_from_slice(&rgb);
                }
            }
        }
    }
    bytes
}

/// Writes a vertex-only PLY, optionally colored.
pub fn write_ply(
    path: &Path,
    points: &[Point3<f64>],
    colors: Option<&[[u8; 3]]>,
    encoding: PlyEncoding,
) -> Result<(), IoError> {
    if points.is_empty() {
        return Err(IoError::EmptyCloud);
    }
    if let Some(c) = colors {
        if c.len() != points.len() {
            return Err(IoError::ShapeMismatch(format!(
                "{} colors for {} points",
                c.len(),
                points.len()
            )));
        }
    }
    write_atomic(path, &encode_ply(points, colors, encoding))
}

/// Writes a point cloud, colored by layer from [`LAYER_PALETTE`] when layer
/// ids are given.
pub fn export_ply(
    points: &[Point3<f64>],
    layer_ids: Option<&[usize]>,
    path: &Path,
    encoding: PlyEncoding,
) -> Result<(), IoError> {
    let colors: Option<Vec<[u8; 3]>> =
        layer_ids.map(|ids| ids.iter().map(|&l| LAYER_PALETTE[l % LAYER_PALETTE.len()]).collect());
    write_ply(path, points, colors.as_deref(), encoding)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::axis_box;

    /// Hand-written binary little-endian unit cube: 8 float vertices and 12
    /// triangles with uchar/int index lists.
    fn cube_ply(encoding: PlyEncoding) -> Vec<u8> {
        let cube = axis_box(Point3::new(-0.5, -0.5, -0.5), Point3::new(0.5, 0.5, 0.5));
        let mut out = format!(
            "ply\nformat {} 1.0\ncomment hand-made cube\nelement vertex 8\nproperty float x\nproperty float y\nproperty float z\nelement face 12\nproperty list uchar int vertex_indices\nend_header\n",
            encoding.header_name()
        )
        .into_bytes();
        let little = encoding == PlyEncoding::BinaryLittleEndian;
        for v in cube.vertices() {
            for c in [v.x as f32, v.y as f32, v.z as f32] {
                out.extend_from_slice(&if little { c.to_le_bytes() } else { c.to_be_bytes() });
            }
        }
        for t in cube.triangles() {
            out.push(3);
            for &i in t {
                let i = i as i32;
                out.extend_from_slice(&if little { i.to_le_bytes() } else { i.to_be_bytes() });
            }
        }
        out
    }

    #[test]
    fn binary_cube_matches_analytic_box() {
        let cube = axis_box(Point3::new(-0.5, -0.5, -0.5), Point3::new(0.5, 0.5, 0.5));
        for enc in [PlyEncoding::BinaryLittleEndian, PlyEncoding::BinaryBigEndian] {
            let ply = parse_ply(&cube_ply(enc)).unwrap();
            assert_eq!(ply.vertices, cube.vertices());
            assert_eq!(ply.triangles, cube.triangles());
        }
    }

    #[test]
    fn ascii_with_quads_and_extra_elements() {
        let src = b"ply\r\nformat ascii 1.0\r\nelement vertex 4\r\nproperty float x\r\nproperty float y\r\nproperty float z\r\nproperty float nx\r\nelement face 1\r\nproperty uchar flags\r\nproperty list uchar uint vertex_index\r\nelement edge 1\r\nproperty int a\r\nproperty int b\r\nend_header\r\n0 0 0 1\r\n1 0 0 1\r\n1 1 0 1\r\n0 1 0 1\r\n7 4 0 1 2 3\r\n0 1\r\n";
        let ply = parse_ply(src).unwrap();
        assert_eq!(ply.vertices.len(), 4);
        assert_eq!(ply.triangles, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn export_round_trips_with_colors() {
        let pts = vec![Point3::new(0.1, -2.0, 3.5), Point3::new(1e-17, 0.0, -0.0)];
        for enc in [PlyEncoding::Ascii, PlyEncoding::BinaryLittleEndian, PlyEncoding::BinaryBigEndian] {
            let colors = [LAYER_PALETTE[0], LAYER_PALETTE[1]];
            let back = parse_ply(&encode_ply(&pts, Some(&colors), enc)).unwrap();
            assert_eq!(back.vertices, pts);
            assert_eq!(back.colors.unwrap(), colors.to_vec());
            assert!(back.triangles.is_empty());
        }
        assert_ne!(LAYER_PALETTE[0], LAYER_PALETTE[1]);
    }

    #[test]
    fn truncated_binary_reports_byte_offset() {
        let full = cube_ply(PlyEncoding::BinaryLittleEndian);
        match parse_ply(&full[..full.len() - 2]) {
            Err(IoError::Parse { location: Location::Byte(b), .. }) => {
                assert!(b as usize <= full.len() - 2)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn header_errors() {
        assert!(matches!(
            parse_ply(b"plx\nend_header\n"),
            Err(IoError::Parse { location: Location::Line(1), .. })
        ));
        assert!(matches!(
            parse_ply(b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nend_header\n1\n"),
            Err(IoError::Parse { .. })
        ));
        assert!(matches!(
            parse_ply(b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\n"),
            Err(IoError::Parse { .. })
        ));
        let bad_index = b"ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n1 0 0\n0 1 0\n3 0 1 9\n";
        assert!(matches!(
            parse_ply(bad_index),
            Err(IoError::Parse { location: Location::Line(13), .. })
        ));
    }
}
