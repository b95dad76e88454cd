use nalgebra::Point3;

use super::{IoError, Location, MeshFormat};

fn err(line: usize, message: impl Into<String>) -> IoError {
    IoError::Parse {
        format: MeshFormat::Obj,
        location: Location::Line(line),
        message: message.into(),
    }
}

/// Vertex positions and triangle corner indices.
pub type RawMesh = (Vec<Point3<f64>>, Vec<[u32; 3]>);

/// Parses Wavefront OBJ positions (`v`) and faces (`f`). Face corners may
/// be `i`, `i/t`, `i//n` or `i/t/n`, with negative indices counting back from
/// the latest vertex. Polygons are fan-triangulated around their first
/// corner. Other statements are ignored.
pub fn parse_obj(bytes: &[u8]) -> Result<RawMesh, IoError> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        err(line, "invalid UTF-8")
    })?;
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    // Positive indices may refer forward; checked once all vertices are known.
    let mut pending: Vec<(usize, u32)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_ascii_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut xyz = [0.0; 3];
                for c in &mut xyz {
                    let tok = tokens.next().ok_or_else(|| err(line_no, "vertex needs 3 coordinates"))?;
                    *c = tok
                        .parse::<f64>()
                        .map_err(|_| err(line_no, format!("bad coordinate '{tok}'")))?;
                    if !c.is_finite() {
                        return Err(err(line_no, format!("non-finite coordinate '{tok}'")));
                    }
                }
                vertices.push(Point3::new(xyz[0], xyz[1], xyz[2]));
            }
            Some("f") => {
                let mut corners = Vec::new();
                for tok in tokens {
                    let first = tok.split('/').next().unwrap_or("");
                    let value: i64 = first
                        .parse()
                        .map_err(|_| err(line_no, format!("bad face index '{tok}'")))?;
                    let index = match value {
                        0 => return Err(err(line_no, "face index 0 is invalid")),
                        v if v > 0 => v - 1,
                        v => vertices.len() as i64 + v,
                    };
                    if index < 0 || index > u32::MAX as i64 {
                        return Err(err(line_no, format!("face index {value} out of range")));
                    }
                    pending.push((line_no, index as u32));
                    corners.push(index as u32);
                }
                if corners.len() < 3 {
                    return Err(err(line_no, "face needs at least 3 corners"));
                }
                for k in 1..corners.len() - 1 {
                    triangles.push([corners[0], corners[k], corners[k + 1]]);
                }
            }
            _ => {}
        }
    }
    if let Some(&(line, index)) = pending.iter().find(|(_, i)| *i as usize >= vertices.len()) {
        return Err(err(
            line,
            format!("face index {} exceeds vertex count {}", index + 1, vertices.len()),
        ));
    }
    Ok((vertices, triangles))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_triangle_and_quad_fan() {
        let (v, t) = parse_obj(b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        assert_eq!((v.len(), t), (3, vec![[0, 1, 2]]));

        let quad = b"# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvt 0 0\nf 1/1 2/1 3/1 4/1\n";
        let (_, t) = parse_obj(quad).unwrap();
        assert_eq!(t, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn negative_and_slashed_indices() {
        let src = b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3//1 -2//1 -1//1\n";
        assert_eq!(parse_obj(src).unwrap().1, vec![[0, 1, 2]]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases: [(&[u8], usize); 5] = [
            (b"v 0 0\n", 1),
            (b"v 0 0 0\nv 1 0 x\n", 2),
            (b"v 0 0 0\nv 1 0 0\nv 0 1 0\n\nf 1 2\n", 5),
            (b"v 0 0 0\nf 1 2 4\n", 2),
            (b"v 0 0 0\nf 0 1 1\n", 2),
        ];
        for (src, line) in cases {
            match parse_obj(src) {
                Err(IoError::Parse { location, .. }) => assert_eq!(location, Location::Line(line)),
                other => panic!("expected parse error, got {other:?}"),
            }
        }
    }
}
