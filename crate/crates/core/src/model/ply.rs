//! Binary little-endian PLY reader and writer for 3DGS exports.
//!
//! Only the de-facto Gaussian splatting layout is accepted: a single
//! `vertex` element whose required properties are `float` scalars. Extra
//! vertex properties (normals, custom channels) are skipped by size.

use super::{GaussianPrimitiveSet, ModelError, SH_COEFFS};

const REQUIRED: [&str; 14] = [
    "x", "y", "z", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3", "opacity",
    "f_dc_0", "f_dc_1", "f_dc_2",
];

/// Maximum number of `f_rest_*` properties (degree 3, three channels).
pub const MAX_REST: usize = (SH_COEFFS - 1) * 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
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
}

#[derive(Debug)]
struct Property {
    name: String,
    ty: ScalarType,
    offset: usize,
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
    stride: usize,
}

#[derive(Debug)]
struct Header {
    elements: Vec<Element>,
    body_offset: usize,
}

fn malformed(msg: impl Into<String>) -> ModelError {
    ModelError::MalformedHeader(msg.into())
}

fn parse_header(bytes: &[u8]) -> Result<Header, ModelError> {
    const END: &[u8] = b"end_header";
    let mut pos = 0usize;
    let mut lines = Vec::new();
    loop {
        let rest = &bytes[pos..];
        let nl = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| malformed("header is not terminated by end_header"))?;
        let raw = &rest[..nl];
        pos += nl + 1;
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        let line = std::str::from_utf8(raw).map_err(|_| malformed("header is not valid UTF-8"))?;
        if raw == END {
            break;
        }
        lines.push(line.trim().to_owned());
        if lines.len() > 4096 {
            return Err(malformed("header exceeds 4096 lines"));
        }
    }

    let mut it = lines.iter();
    if it.next().map(String::as_str) != Some("ply") {
        return Err(malformed("missing `ply` magic"));
    }

    let mut format_seen = false;
    let mut elements: Vec<Element> = Vec::new();
    for line in it {
        let mut toks = line.split_whitespace();
        match toks.next() {
            None | Some("comment") | Some("obj_info") => {}
            Some("format") => {
                let fmt = toks.next().unwrap_or_default();
                let version = toks.next().unwrap_or_default();
                if fmt != "binary_little_endian" || version != "1.0" {
                    return Err(malformed(format!(
                        "unsupported format `{fmt} {version}`, expected `binary_little_endian 1.0`"
                    )));
                }
                format_seen = true;
            }
            Some("element") => {
                let name = toks.next().ok_or_else(|| malformed("element without name"))?;
                let count = toks
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| malformed(format!("element `{name}` has no valid count")))?;
                elements.push(Element {
                    name: name.to_owned(),
                    count,
                    properties: Vec::new(),
                    stride: 0,
                });
            }
            Some("property") => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| malformed("property declared before any element"))?;
                let ty = toks.next().ok_or_else(|| malformed("property without type"))?;
                if ty == "list" {
                    return Err(malformed(format!(
                        "list property in element `{}` is not supported",
                        element.name
                    )));
                }
                let ty = ScalarType::parse(ty)
                    .ok_or_else(|| malformed(format!("unknown property type `{ty}`")))?;
                let name = toks.next().ok_or_else(|| malformed("property without name"))?;
                element.properties.push(Property {
                    name: name.to_owned(),
                    ty,
                    offset: element.stride,
                });
                element.stride += ty.size();
            }
            Some(other) => return Err(malformed(format!("unexpected header keyword `{other}`"))),
        }
    }
    if !format_seen {
        return Err(malformed("missing format line"));
    }
    Ok(Header {
        elements,
        body_offset: pos,
    })
}

#[inline]
fn read_f32(record: &[u8], offset: usize) -> f32 {
    let mut b = [0u8; 4];
    b.copy_from_slice(&record[offset..offset + 4]);
    f32::from_le_bytes(b)
}

/// Parses a binary 3DGS PLY file.
///
/// The whole body is validated before anything is returned; a file is
/// either loaded completely or rejected.
pub fn parse_ply(bytes: &[u8]) -> Result<GaussianPrimitiveSet, ModelError> {
    let header = parse_header(bytes)?;

    let mut skip = 0usize;
    let mut vertex = None;
    for element in &header.elements {
        if element.name == "vertex" {
            vertex = Some(element);
            break;
        }
        skip += element.count * element.stride;
    }
    let vertex = vertex.ok_or_else(|| ModelError::MissingProperty("element vertex".into()))?;

    let offset_of = |name: &str| -> Result<usize, ModelError> {
        let prop = vertex
            .properties
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| ModelError::MissingProperty(name.to_owned()))?;
        if prop.ty != ScalarType::F32 {
            return Err(malformed(format!("property `{name}` must be float")));
        }
        Ok(prop.offset)
    };

    let mut required = [0usize; REQUIRED.len()];
    for (slot, name) in required.iter_mut().zip(REQUIRED) {
        *slot = offset_of(name)?;
    }

    let mut rest = Vec::new();
    while rest.len() < MAX_REST {
        let name = format!("f_rest_{}", rest.len());
        if !vertex.properties.iter().any(|p| p.name == name) {
            break;
        }
        rest.push(offset_of(&name)?);
    }
    if rest.len() % 3 != 0 {
        return Err(malformed(format!(
            "f_rest property count {} is not a multiple of 3",
            rest.len()
        )));
    }
    let rest_per_channel = rest.len() / 3;

    let n = vertex.count;
    let start = header.body_offset + skip;
    let needed = n
        .checked_mul(vertex.stride)
        .ok_or_else(|| malformed("vertex count overflows"))?;
    let available = bytes.len().saturating_sub(start);
    if available < needed {
        return Err(ModelError::TruncatedBody {
            expected: needed,
            actual: available,
        });
    }
    let body = &bytes[start..start + needed];

    let mut set = GaussianPrimitiveSet::with_capacity(n);
    for (i, record) in body.chunks_exact(vertex.stride.max(1)).take(n).enumerate() {
        let mut vals = [0f32; REQUIRED.len()];
        for (v, &off) in vals.iter_mut().zip(&required) {
            *v = read_f32(record, off);
        }
        let mut sh = [[0f32; 3]; SH_COEFFS];
        sh[0] = [vals[11], vals[12], vals[13]];
        for c in 0..3 {
            for k in 0..rest_per_channel {
                sh[k + 1][c] = read_f32(record, rest[c * rest_per_channel + k]);
            }
        }
        let finite = vals.iter().all(|v| v.is_finite())
            && sh.iter().flatten().all(|v| v.is_finite());
        if !finite {
            return Err(ModelError::NonFiniteAttribute {
                index: i,
                attribute: "raw",
            });
        }
        set.means.push([vals[0], vals[1], vals[2]]);
        set.log_scales.push([vals[3], vals[4], vals[5]]);
        set.quaternions.push([vals[6], vals[7], vals[8], vals[9]]);
        set.opacity_logits.push(vals[10]);
        set.sh_coeffs.push(sh);
    }
    Ok(set)
}

/// Serializes a primitive set in the layout [`parse_ply`] reads.
///
/// `rest_coeffs` is the number of higher-order SH coefficients per channel
/// to emit (0 for a DC-only file, 15 for full degree 3).
pub fn write_ply(set: &GaussianPrimitiveSet, rest_coeffs: usize) -> Vec<u8> {
    let rest_coeffs = rest_coeffs.min(SH_COEFFS - 1);
    let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
    header.push_str(&format!("element vertex {}\n", set.len()));
    for name in REQUIRED {
        header.push_str(&format!("property float {name}\n"));
    }
    for i in 0..rest_coeffs * 3 {
        header.push_str(&format!("property float f_rest_{i}\n"));
    }
    header.push_str("end_header\n");

    let stride = (REQUIRED.len() + rest_coeffs * 3) * 4;
    let mut out = Vec::with_capacity(header.len() + stride * set.len());
    out.extend_from_slice(header.as_bytes());
    for i in 0..set.len() {
        let mut push = |v: f32| out.extend_from_slice(&v.to_le_bytes());
        set.means[i].iter().for_each(|&v| push(v));
        set.log_scales[i].iter().for_each(|&v| push(v));
        set.quaternions[i].iter().for_each(|&v| push(v));
        push(set.opacity_logits[i]);
        set.sh_coeffs[i][0].iter().for_each(|&v| push(v));
        for c in 0..3 {
            for k in 0..rest_coeffs {
                push(set.sh_coeffs[i][k + 1][c]);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(format: &str, n: usize, props: &[&str]) -> Vec<u8> {
        let mut h = format!("ply\nformat {format}\nelement vertex {n}\n");
        for p in props {
            h.push_str(&format!("property float {p}\n"));
        }
        h.push_str("end_header\n");
        h.into_bytes()
    }

    #[test]
    fn empty_scene() {
        let set = parse_ply(&header("binary_little_endian 1.0", 0, &REQUIRED)).unwrap();
        assert_eq!(set.len(), 0);
        assert!(set.means.is_empty() && set.sh_coeffs.is_empty());
    }

    #[test]
    fn single_gaussian_by_hand() {
        // Body assembled field by field, independent of write_ply.
        let mut bytes = header("binary_little_endian 1.0", 1, &REQUIRED);
        let half = 0.5f32.ln();
        let values = [0.0, 0.0, 0.0, half, half, half, 1.0, 0.0, 0.0, 0.0, 4.0, 1.0, 0.0, 0.0];
        for v in values {
            bytes.extend_from_slice(&f32::to_le_bytes(v));
        }
        let set = parse_ply(&bytes).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.means[0], [0.0, 0.0, 0.0]);
        assert_eq!(set.log_scales[0], [half; 3]);
        assert_eq!(set.quaternions[0], [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(set.opacity_logits[0], 4.0);
        assert_eq!(set.sh_coeffs[0][0], [1.0, 0.0, 0.0]);
        assert!(set.sh_coeffs[0][1..].iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn ascii_rejected() {
        let err = parse_ply(&header("ascii 1.0", 0, &REQUIRED)).unwrap_err();
        assert!(matches!(err, ModelError::MalformedHeader(_)), "{err}");
    }

    #[test]
    fn missing_magic() {
        let mut bytes = header("binary_little_endian 1.0", 0, &REQUIRED);
        bytes[0] = b'x';
        assert!(matches!(parse_ply(&bytes), Err(ModelError::MalformedHeader(_))));
    }

    #[test]
    fn missing_format_line() {
        let bytes = b"ply\nelement vertex 0\nproperty float x\nend_header\n";
        assert!(matches!(parse_ply(bytes), Err(ModelError::MalformedHeader(_))));
    }

    #[test]
    fn missing_opacity() {
        let props: Vec<&str> = REQUIRED.iter().copied().filter(|p| *p != "opacity").collect();
        let err = parse_ply(&header("binary_little_endian 1.0", 0, &props)).unwrap_err();
        assert!(matches!(err, ModelError::MissingProperty(ref p) if p == "opacity"), "{err}");
    }

    #[test]
    fn truncated_body() {
        let mut bytes = header("binary_little_endian 1.0", 2, &REQUIRED);
        bytes.extend(std::iter::repeat_n(0u8, 14 * 4 + 3));
        match parse_ply(&bytes) {
            Err(ModelError::TruncatedBody { expected, actual }) => {
                assert_eq!(expected, 2 * 14 * 4);
                assert_eq!(actual, 14 * 4 + 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn extra_properties_are_skipped() {
        let mut props = vec!["x", "y", "z", "nx", "ny", "nz"];
        props.extend_from_slice(&REQUIRED[3..]);
        let mut bytes = header("binary_little_endian 1.0", 1, &props);
        let values = [
            1.0f32, 2.0, 3.0, 9.0, 9.0, 9.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.5, 0.1, 0.2, 0.3,
        ];
        for v in values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let set = parse_ply(&bytes).unwrap();
        assert_eq!(set.means[0], [1.0, 2.0, 3.0]);
        assert_eq!(set.opacity_logits[0], 0.5);
        assert_eq!(set.sh_coeffs[0][0], [0.1, 0.2, 0.3]);
    }

    #[test]
    fn rest_layout_is_channel_major() {
        let mut set = GaussianPrimitiveSet::with_capacity(1);
        set.means.push([0.0; 3]);
        set.log_scales.push([0.0; 3]);
        set.quaternions.push([1.0, 0.0, 0.0, 0.0]);
        set.opacity_logits.push(0.0);
        let mut sh = [[0f32; 3]; SH_COEFFS];
        for (k, coeff) in sh.iter_mut().enumerate() {
            for (c, v) in coeff.iter_mut().enumerate() {
                *v = (k * 10 + c) as f32;
            }
        }
        set.sh_coeffs.push(sh);
        let bytes = write_ply(&set, 15);
        // f_rest_15 is channel 1 (green), coefficient 1.
        let text = String::from_utf8_lossy(&bytes[..bytes.len() - 59 * 4]).to_string();
        assert!(text.contains("property float f_rest_44"));
        let body = &bytes[bytes.len() - 59 * 4..];
        assert_eq!(read_f32(body, (14 + 15) * 4), 11.0);
        assert_eq!(parse_ply(&bytes).unwrap(), set);
    }

    #[test]
    fn partial_rest_degree_one() {
        let mut props: Vec<String> = REQUIRED.iter().map(|s| s.to_string()).collect();
        props.extend((0..9).map(|i| format!("f_rest_{i}")));
        let refs: Vec<&str> = props.iter().map(String::as_str).collect();
        let mut bytes = header("binary_little_endian 1.0", 1, &refs);
        for i in 0..23 {
            bytes.extend_from_slice(&(i as f32).to_le_bytes());
        }
        let set = parse_ply(&bytes).unwrap();
        let sh = set.sh_coeffs[0];
        assert_eq!(sh[1], [14.0, 17.0, 20.0]);
        assert_eq!(sh[3], [16.0, 19.0, 22.0]);
        assert_eq!(sh[4], [0.0; 3]);
    }

    #[test]
    fn non_finite_rejected() {
        let mut bytes = header("binary_little_endian 1.0", 1, &REQUIRED);
        for i in 0..14 {
            let v = if i == 4 { f32::NAN } else { 0.0 };
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        assert!(matches!(
            parse_ply(&bytes),
            Err(ModelError::NonFiniteAttribute { index: 0, .. })
        ));
    }
}
