//! Minimal binary little-endian PLY support shared by the mesh and scene codecs.

use std::io::{BufRead, Read, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ScalarType {
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
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
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

    pub(crate) fn name(self) -> &'static str {
        match self {
            Self::I8 => "char",
            Self::U8 => "uchar",
            Self::I16 => "short",
            Self::U16 => "ushort",
            Self::I32 => "int",
            Self::U32 => "uint",
            Self::F32 => "float",
            Self::F64 => "double",
        }
    }

    pub(crate) fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    /// Decodes one little-endian value; `bytes` must hold at least `size()` bytes.
    pub(crate) fn read(self, bytes: &[u8]) -> f64 {
        match self {
            Self::I8 => bytes[0] as i8 as f64,
            Self::U8 => bytes[0] as f64,
            Self::I16 => i16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            Self::U16 => u16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            Self::I32 => i32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            Self::U32 => u32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            Self::F32 => f32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            Self::F64 => f64::from_le_bytes(bytes[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum PropertyKind {
    Scalar(ScalarType),
    List { count: ScalarType, item: ScalarType },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Property {
    pub name: String,
    pub kind: PropertyKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Element {
    pub name: String,
    pub count: usize,
    pub properties: Vec<Property>,
}

impl Element {
    pub fn property_index(&self, name: &str) -> Option<usize> {
        self.properties.iter().position(|p| p.name == name)
    }

    /// Byte size of one record, if every property is a fixed-size scalar.
    pub fn fixed_record_size(&self) -> Option<usize> {
        self.properties
            .iter()
            .map(|p| match p.kind {
                PropertyKind::Scalar(t) => Some(t.size()),
                PropertyKind::List { .. } => None,
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Header {
    pub elements: Vec<Element>,
}

impl Header {
    pub fn element(&self, name: &str) -> Option<&Element> {
        self.elements.iter().find(|e| e.name == name)
    }
}

/// Reads the header up to and including `end_header`, leaving `reader` at the payload.
pub(crate) fn read_header(reader: &mut impl BufRead, context: &str) -> Result<Header> {
    let mut line = String::new();
    let mut line_no = 0usize;
    let mut next_line = |reader: &mut dyn BufRead, line: &mut String| -> Result<usize> {
        line.clear();
        let n = reader.read_line(line).map_err(|e| {
            Error::parse(
                context,
                format!("header line {}", line_no + 1),
                e.to_string(),
            )
        })?;
        line_no += 1;
        if n == 0 {
            return Err(Error::parse(
                context,
                format!("header line {line_no}"),
                "unexpected end of file",
            ));
        }
        Ok(line_no)
    };

    let at = next_line(reader, &mut line)?;
    if line.trim_end() != "ply" {
        return Err(Error::parse(
            context,
            format!("header line {at}"),
            "missing 'ply' magic",
        ));
    }

    let mut elements: Vec<Element> = Vec::new();
    let mut saw_format = false;
    loop {
        let at = next_line(reader, &mut line)?;
        let loc = || format!("header line {at}");
        let mut words = line.split_whitespace();
        match words.next() {
            Some("format") => {
                let format = words.next().unwrap_or("");
                if format != "binary_little_endian" {
                    return Err(Error::parse(
                        context,
                        loc(),
                        format!("unsupported format '{format}', expected binary_little_endian"),
                    ));
                }
                saw_format = true;
            }
            Some("comment") | Some("obj_info") | None => {}
            Some("element") => {
                let name = words
                    .next()
                    .ok_or_else(|| Error::parse(context, loc(), "element without a name"))?;
                let count = words
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| {
                        Error::parse(context, loc(), "element count is not an integer")
                    })?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(context, loc(), "property before any element"))?;
                let ty = |w: Option<&str>| {
                    w.and_then(ScalarType::parse)
                        .ok_or_else(|| Error::parse(context, loc(), "unknown property type"))
                };
                let first = words.next();
                let kind = if first == Some("list") {
                    let count = ty(words.next())?;
                    let item = ty(words.next())?;
                    PropertyKind::List { count, item }
                } else {
                    PropertyKind::Scalar(ty(first)?)
                };
                let name = words
                    .next()
                    .ok_or_else(|| Error::parse(context, loc(), "property without a name"))?;
                element.properties.push(Property {
                    name: name.to_string(),
                    kind,
                });
            }
            Some("end_header") => break,
            Some(other) => {
                return Err(Error::parse(
                    context,
                    loc(),
                    format!("unexpected keyword '{other}'"),
                ))
            }
        }
    }
    if !saw_format {
        return Err(Error::parse(context, "header", "missing format line"));
    }
    Ok(Header { elements })
}

/// Reads `count` fixed-size records of `record_size` bytes.
pub(crate) fn read_records(
    reader: &mut impl Read,
    count: usize,
    record_size: usize,
    context: &str,
    element: &str,
) -> Result<Vec<u8>> {
    let total = count
        .checked_mul(record_size)
        .ok_or_else(|| Error::parse(context, element, "element too large"))?;
    let mut buf = Vec::new();
    reader
        .take(total as u64)
        .read_to_end(&mut buf)
        .map_err(|e| Error::parse(context, element, e.to_string()))?;
    if buf.len() != total {
        return Err(Error::parse(
            context,
            format!("{element} record {}", buf.len() / record_size.max(1)),
            format!(
                "truncated payload: expected {total} bytes, found {}",
                buf.len()
            ),
        ));
    }
    Ok(buf)
}

/// Sequential reader over an in-memory payload, for elements with list properties.
pub(crate) struct PayloadCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    context: &'a str,
}

impl<'a> PayloadCursor<'a> {
    pub fn new(bytes: &'a [u8], context: &'a str) -> Self {
        Self {
            bytes,
            pos: 0,
            context,
        }
    }

    pub fn read(&mut self, ty: ScalarType, element: &str, record: usize) -> Result<f64> {
        let end = self.pos + ty.size();
        if end > self.bytes.len() {
            return Err(Error::parse(
                self.context,
                format!("{element} record {record} (byte offset {})", self.pos),
                "truncated payload",
            ));
        }
        let v = ty.read(&self.bytes[self.pos..end]);
        self.pos = end;
        Ok(v)
    }

    /// Reads one record, calling `visit(property_index, values)` per property.
    pub fn record(
        &mut self,
        element: &Element,
        record: usize,
        values: &mut Vec<f64>,
        mut visit: impl FnMut(usize, &[f64]) -> Result<()>,
    ) -> Result<()> {
        for (i, p) in element.properties.iter().enumerate() {
            values.clear();
            match p.kind {
                PropertyKind::Scalar(t) => values.push(self.read(t, &element.name, record)?),
                PropertyKind::List { count, item } => {
                    let n = self.read(count, &element.name, record)?;
                    if n < 0.0 {
                        return Err(Error::parse(
                            self.context,
                            format!("{} record {record}", element.name),
                            "negative list length",
                        ));
                    }
                    for _ in 0..n as usize {
                        values.push(self.read(item, &element.name, record)?);
                    }
                }
            }
            visit(i, values)?;
        }
        Ok(())
    }
}

pub(crate) fn write_header(out: &mut impl Write, elements: &[Element]) -> std::io::Result<()> {
    writeln!(out, "ply")?;
    writeln!(out, "format binary_little_endian 1.0")?;
    for element in elements {
        writeln!(out, "element {} {}", element.name, element.count)?;
        for p in &element.properties {
            match p.kind {
                PropertyKind::Scalar(t) => writeln!(out, "property {} {}", t.name(), p.name)?,
                PropertyKind::List { count, item } => writeln!(
                    out,
                    "property list {} {} {}",
                    count.name(),
                    item.name(),
                    p.name
                )?,
            }
        }
    }
    writeln!(out, "end_header")
}

pub(crate) fn scalar(name: &str, ty: ScalarType) -> Property {
    Property {
        name: name.to_string(),
        kind: PropertyKind::Scalar(ty),
    }
}
