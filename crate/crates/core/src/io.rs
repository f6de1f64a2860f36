//! Point cloud files: whitespace-separated `.xyz` text and vertex-only PLY.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use log::warn;

use crate::cloud::{Point3, PointCloud};
use crate::error::{Error, Result};

/// Parses `.xyz` text: three reals per line, `#` comments and blank lines skipped.
pub fn parse_xyz(text: &str, path: &Path) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::parse(path, n + 1, format!("expected 3 fields, found {}", fields.len())));
        }
        let mut c = [0.0; 3];
        for (slot, f) in c.iter_mut().zip(&fields) {
            *slot = f
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(path, n + 1, format!("invalid coordinate '{f}'")))?;
        }
        points.push(Point3::from_array(c));
    }
    Ok(PointCloud::new(points))
}

pub fn read_xyz(path: &Path) -> Result<PointCloud> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_xyz(&text, path)
}

/// Nine significant digits in scientific notation.
pub fn format_coord(v: f64) -> String {
    format!("{v:.8e}")
}

pub fn write_xyz(path: &Path, cloud: &PointCloud) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    for q in &cloud.points {
        writeln!(w, "{} {} {}", format_coord(q.x), format_coord(q.y), format_coord(q.z)).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
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
    fn parse(name: &str) -> Option<Self> {
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

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

struct PlyHeader {
    format: PlyFormat,
    vertices: usize,
    props: Vec<(String, Scalar)>,
    xyz: [usize; 3],
}

fn parse_header(lines: &[String], path: &Path) -> Result<PlyHeader> {
    let err = |n: usize, m: String| Error::parse(path, n, m);
    if lines.first().map(|l| l.trim()) != Some("ply") {
        return Err(err(1, "missing 'ply' magic".into()));
    }
    let mut format = None;
    let mut vertices = None;
    let mut props = Vec::new();
    let mut in_vertex = false;
    for (i, raw) in lines.iter().enumerate().skip(1) {
        let n = i + 1;
        let t: Vec<&str> = raw.split_whitespace().collect();
        match t.as_slice() {
            [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", kind, "1.0"] => {
                format = Some(match *kind {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    other => return Err(err(n, format!("unsupported format '{other}'"))),
                })
            }
            ["element", "vertex", count] => {
                if vertices.is_some() {
                    return Err(err(n, "duplicate vertex element".into()));
                }
                vertices = Some(count.parse::<usize>().map_err(|_| err(n, format!("bad vertex count '{count}'")))?);
                in_vertex = true;
            }
            ["element", name, _] => {
                return Err(err(n, format!("unsupported element '{name}' (vertex-only files)")));
            }
            ["property", "list", ..] => return Err(err(n, "list properties are not supported".into())),
            ["property", ty, name] if in_vertex => {
                let s = Scalar::parse(ty).ok_or_else(|| err(n, format!("unknown property type '{ty}'")))?;
                props.push((name.to_string(), s));
            }
            ["end_header"] => {
                let format = format.ok_or_else(|| err(n, "missing format line".into()))?;
                let vertices = vertices.ok_or_else(|| err(n, "missing vertex element".into()))?;
                let find = |axis: &str| {
                    props
                        .iter()
                        .position(|(name, _)| name == axis)
                        .ok_or_else(|| err(n, format!("missing '{axis}' property")))
                };
                let xyz = [find("x")?, find("y")?, find("z")?];
                for (name, _) in &props {
                    if !["x", "y", "z"].contains(&name.as_str()) {
                        warn!("{}: skipping vertex property '{name}'", path.display());
                    }
                }
                return Ok(PlyHeader { format, vertices, props, xyz });
            }
            _ => return Err(err(n, format!("unexpected header line '{}'", raw.trim()))),
        }
    }
    Err(err(lines.len(), "missing end_header".into()))
}

/// Reads an ASCII or binary little-endian vertex-only PLY file.
pub fn read_ply(path: &Path) -> Result<PointCloud> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(f);
    let mut header = Vec::new();
    loop {
        let mut line = String::new();
        let n = r.read_line(&mut line).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        let done = line.trim() == "end_header";
        header.push(line.trim_end_matches(['\n', '\r']).to_string());
        if done {
            break;
        }
    }
    let h = parse_header(&header, path)?;
    let mut points = Vec::with_capacity(h.vertices);
    match h.format {
        PlyFormat::Ascii => {
            let mut text = String::new();
            r.read_to_string(&mut text).map_err(|e| Error::io(path, e))?;
            let mut rows = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
            for _ in 0..h.vertices {
                let (i, row) = rows
                    .next()
                    .ok_or_else(|| Error::parse(path, header.len() + 1, "fewer vertices than declared"))?;
                let line_no = header.len() + i + 1;
                let vals: Vec<&str> = row.split_whitespace().collect();
                if vals.len() != h.props.len() {
                    return Err(Error::parse(path, line_no, format!("expected {} values", h.props.len())));
                }
                let mut c = [0.0; 3];
                for (slot, &k) in c.iter_mut().zip(&h.xyz) {
                    *slot = vals[k]
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .map(|v| if h.props[k].1 == Scalar::F32 { v as f32 as f64 } else { v })
                        .ok_or_else(|| Error::parse(path, line_no, format!("invalid value '{}'", vals[k])))?;
                }
                points.push(Point3::from_array(c));
            }
        }
        PlyFormat::BinaryLittleEndian => {
            let stride: usize = h.props.iter().map(|(_, s)| s.size()).sum();
            let offsets: Vec<usize> = h
                .props
                .iter()
                .scan(0, |acc, (_, s)| {
                    let o = *acc;
                    *acc += s.size();
                    Some(o)
                })
                .collect();
            let mut buf = Vec::new();
            r.read_to_end(&mut buf).map_err(|e| Error::io(path, e))?;
            if buf.len() < stride * h.vertices {
                return Err(Error::parse(
                    path,
                    header.len(),
                    format!("truncated payload: {} of {} bytes", buf.len(), stride * h.vertices),
                ));
            }
            for row in buf.chunks_exact(stride).take(h.vertices) {
                let mut c = [0.0; 3];
                for (slot, &k) in c.iter_mut().zip(&h.xyz) {
                    *slot = h.props[k].1.decode(&row[offsets[k]..]);
                }
                points.push(Point3::from_array(c));
            }
        }
    }
    Ok(PointCloud::new(points))
}

pub fn ply_header(format: PlyFormat, vertices: usize) -> String {
    let fmt = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    format!(
        "ply\nformat {fmt} 1.0\nelement vertex {vertices}\nproperty float x\nproperty float y\nproperty float z\nend_header\n"
    )
}

/// Writes `x y z` as 32-bit floats.
pub fn write_ply(path: &Path, cloud: &PointCloud, format: PlyFormat) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    let io = |e| Error::io(path, e);
    w.write_all(ply_header(format, cloud.len()).as_bytes()).map_err(io)?;
    for q in &cloud.points {
        let c = [q.x as f32, q.y as f32, q.z as f32];
        match format {
            PlyFormat::Ascii => writeln!(w, "{} {} {}", c[0], c[1], c[2]).map_err(io)?,
            PlyFormat::BinaryLittleEndian => {
                for v in c {
                    w.write_all(&v.to_le_bytes()).map_err(io)?;
                }
            }
        }
    }
    w.flush().map_err(io)
}

/// Dispatches on the extension: `.ply` or anything else as `.xyz`.
pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("ply") => read_ply(path),
        _ => read_xyz(path),
    }
}

/// `.ply` is written as binary little-endian, anything else as `.xyz`.
pub fn write_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("ply") => write_ply(path, cloud, PlyFormat::BinaryLittleEndian),
        _ => write_xyz(path, cloud),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(n: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointCloud::new(
            (0..n)
                .map(|_| Point3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-0.5..0.5), rng.gen_range(-1e-3..1e-3)))
                .collect(),
        )
    }

    #[test]
    fn xyz_parsing() {
        let p = Path::new("t.xyz");
        assert_eq!(parse_xyz("0 0 0\n1 2 3", p).unwrap().len(), 2);
        assert_eq!(parse_xyz("# c\n\n1 2 3\n", p).unwrap().len(), 1);
        match parse_xyz("1 2", p).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 1),
            e => panic!("{e}"),
        }
        assert!(parse_xyz("1 2 3 4", p).is_err());
        assert!(parse_xyz("0 0 0\n1 x 3", p).is_err());
    }

    #[test]
    fn xyz_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.xyz");
        let c = random_cloud(10_000, 1);
        write_xyz(&path, &c).unwrap();
        let back = read_xyz(&path).unwrap();
        let worst = c
            .points
            .iter()
            .zip(&back.points)
            .flat_map(|(a, b)| (0..3).map(move |k| (a[k] - b[k]).abs()))
            .fold(0.0, f64::max);
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn ply_minimal_and_sizes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.ply");
        fs::write(&path, "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 2 3\n").unwrap();
        assert_eq!(read_ply(&path).unwrap().points, vec![Point3::new(1.0, 2.0, 3.0)]);

        let c = random_cloud(100, 2);
        let bin = dir.path().join("b.ply");
        write_ply(&bin, &c, PlyFormat::BinaryLittleEndian).unwrap();
        let size = fs::metadata(&bin).unwrap().len() as usize;
        assert_eq!(size, ply_header(PlyFormat::BinaryLittleEndian, 100).len() + 12 * 100);
        let txt = dir.path().join("a.ply");
        write_ply(&txt, &c, PlyFormat::Ascii).unwrap();
        let (a, b) = (read_ply(&txt).unwrap(), read_ply(&bin).unwrap());
        assert_eq!(a, b);
        for (x, y) in c.points.iter().zip(&b.points) {
            assert_eq!(x.x as f32 as f64, y.x);
        }
    }

    #[test]
    fn ply_errors_and_extra_properties() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.ply");
        fs::write(&path, "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nend_header\n1 2\n").unwrap();
        assert!(read_ply(&path).is_err());

        let c = random_cloud(10, 3);
        write_ply(&path, &c, PlyFormat::BinaryLittleEndian).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 1]).unwrap();
        assert!(read_ply(&path).is_err());

        let mut extra = b"ply\nformat binary_little_endian 1.0\nelement vertex 1\nproperty uchar red\nproperty float x\nproperty float y\nproperty float z\nproperty double w\nend_header\n".to_vec();
        extra.push(7);
        for v in [1.5f32, -2.0, 0.25] {
            extra.extend_from_slice(&v.to_le_bytes());
        }
        extra.extend_from_slice(&9.0f64.to_le_bytes());
        fs::write(&path, extra).unwrap();
        assert_eq!(read_ply(&path).unwrap().points, vec![Point3::new(1.5, -2.0, 0.25)]);
    }
}
