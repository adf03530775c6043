//! Binary little-endian PLY splat files.
//!
//! One vertex per Gaussian with `x y z f_dc_0..2 f_rest_0..8 opacity
//! scale_0..2 rot_0..3`, all `float`. `f_rest` is channel-major (three linear
//! coefficients for red, then green, then blue). The scene extent rides along
//! as a `comment scene_extent <value>` header line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::cloud::{Gaussian3D, GaussianCloud};
use super::sh::SH_COEFFS_PER_CHANNEL;
use crate::error::{Error, Result};

const REST_PER_CHANNEL: usize = SH_COEFFS_PER_CHANNEL - 1;

fn property_names() -> Vec<String> {
    let mut names: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
    names.extend((0..3).map(|i| format!("f_dc_{i}")));
    names.extend((0..3 * REST_PER_CHANNEL).map(|i| format!("f_rest_{i}")));
    names.push("opacity".into());
    names.extend((0..3).map(|i| format!("scale_{i}")));
    names.extend((0..4).map(|i| format!("rot_{i}")));
    names
}

fn vertex_values(g: &Gaussian3D) -> Vec<f32> {
    let mut v = Vec::with_capacity(23);
    v.extend(g.position.iter().map(|&x| x as f32));
    for ch in 0..3 {
        v.push(g.sh_coeffs[ch * SH_COEFFS_PER_CHANNEL] as f32);
    }
    for ch in 0..3 {
        for k in 1..SH_COEFFS_PER_CHANNEL {
            v.push(g.sh_coeffs[ch * SH_COEFFS_PER_CHANNEL + k] as f32);
        }
    }
    v.push(g.opacity_logit as f32);
    v.extend(g.log_scale.iter().map(|&x| x as f32));
    v.extend(g.rotation.iter().map(|&x| x as f32));
    v
}

pub fn write_ply(cloud: &GaussianCloud, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut header = String::new();
    header.push_str("ply\nformat binary_little_endian 1.0\n");
    header.push_str(&format!("comment scene_extent {}\n", cloud.scene_extent));
    header.push_str(&format!("element vertex {}\n", cloud.len()));
    for name in property_names() {
        header.push_str(&format!("property float {name}\n"));
    }
    header.push_str("end_header\n");
    let io = |e| Error::io(path, e);
    w.write_all(header.as_bytes()).map_err(io)?;
    for g in cloud.iter() {
        for v in vertex_values(&g) {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

fn type_size(ty: &str) -> Option<usize> {
    Some(match ty {
        "char" | "uchar" | "int8" | "uint8" => 1,
        "short" | "ushort" | "int16" | "uint16" => 2,
        "int" | "uint" | "float" | "int32" | "uint32" | "float32" => 4,
        "double" | "float64" => 8,
        _ => return None,
    })
}

/// Reads a splat PLY. Extra properties (normals, higher SH bands) are ignored;
/// for higher-degree files only the first three `f_rest` entries per channel are kept.
pub fn read_ply(path: &Path) -> Result<GaussianCloud> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let fname = path.display().to_string();
    let malformed = |detail: String| Error::Malformed {
        file: fname.clone(),
        detail,
    };

    let mut line = String::new();
    let mut count = None;
    let mut scene_extent = 1.0;
    let mut props: Vec<(String, String)> = Vec::new();
    let mut in_vertex = false;
    let mut first = true;
    loop {
        line.clear();
        if r.read_line(&mut line).map_err(|e| Error::io(path, e))? == 0 {
            return Err(malformed("unexpected end of header".into()));
        }
        let t = line.trim();
        if first {
            if t != "ply" {
                return Err(malformed("missing `ply` magic".into()));
            }
            first = false;
            continue;
        }
        let parts: Vec<&str> = t.split_whitespace().collect();
        match parts.as_slice() {
            ["format", fmt, _] => {
                if *fmt != "binary_little_endian" {
                    return Err(malformed(format!("unsupported format {fmt}")));
                }
            }
            ["comment", "scene_extent", v] => {
                scene_extent = v.parse().map_err(|_| malformed(format!("bad scene_extent {v}")))?;
            }
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", name, n] => {
                in_vertex = *name == "vertex";
                if in_vertex {
                    count = Some(n.parse::<usize>().map_err(|_| malformed(format!("bad vertex count {n}")))?);
                } else if count.is_none() {
                    return Err(malformed(format!("element `{name}` before vertex is unsupported")));
                }
            }
            ["property", ty, name] if in_vertex => props.push((ty.to_string(), name.to_string())),
            ["property", ..] => {}
            ["end_header"] => break,
            _ => return Err(malformed(format!("unexpected header line `{t}`"))),
        }
    }
    let count = count.ok_or_else(|| malformed("no vertex element".into()))?;

    let mut offsets = std::collections::HashMap::new();
    let mut stride = 0;
    for (ty, name) in &props {
        let size = type_size(ty).ok_or_else(|| malformed(format!("unknown property type {ty}")))?;
        offsets.insert(name.clone(), (stride, ty.clone()));
        stride += size;
    }
    let n_rest = props.iter().filter(|(_, n)| n.starts_with("f_rest_")).count();
    let rest_per_channel = n_rest / 3;

    let field = |name: &str| -> Result<usize> {
        match offsets.get(name) {
            Some((off, ty)) if ty == "float" || ty == "float32" => Ok(*off),
            Some((_, ty)) => Err(malformed(format!("property {name} has type {ty}, expected float"))),
            None => Err(malformed(format!("missing property {name}"))),
        }
    };
    let pos = [field("x")?, field("y")?, field("z")?];
    let dc = [field("f_dc_0")?, field("f_dc_1")?, field("f_dc_2")?];
    let mut rest = [[None; REST_PER_CHANNEL]; 3];
    for (ch, row) in rest.iter_mut().enumerate() {
        for (k, slot) in row.iter_mut().enumerate() {
            if k < rest_per_channel {
                *slot = Some(field(&format!("f_rest_{}", ch * rest_per_channel + k))?);
            }
        }
    }
    let opacity = field("opacity")?;
    let scale = [field("scale_0")?, field("scale_1")?, field("scale_2")?];
    let rot = [field("rot_0")?, field("rot_1")?, field("rot_2")?, field("rot_3")?];

    let mut buf = vec![0u8; stride];
    let mut cloud = GaussianCloud::new(scene_extent);
    for i in 0..count {
        r.read_exact(&mut buf).map_err(|_| Error::Truncated {
            file: fname.clone(),
            detail: format!("vertex {i} of {count}"),
        })?;
        let f = |off: usize| f32::from_le_bytes(buf[off..off + 4].try_into().unwrap()) as f64;
        let mut sh = [0.0; 12];
        for ch in 0..3 {
            sh[ch * SH_COEFFS_PER_CHANNEL] = f(dc[ch]);
            for k in 0..REST_PER_CHANNEL {
                if let Some(off) = rest[ch][k] {
                    sh[ch * SH_COEFFS_PER_CHANNEL + 1 + k] = f(off);
                }
            }
        }
        cloud.push(Gaussian3D {
            position: pos.map(f),
            log_scale: scale.map(f),
            rotation: rot.map(f),
            opacity_logit: f(opacity),
            sh_coeffs: sh,
        });
    }
    Ok(cloud)
}
