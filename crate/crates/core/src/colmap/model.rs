//! COLMAP sparse model files (`cameras`, `images`, `points3D`) in text and
//! binary form. Binary files are little-endian.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::scene::camera::{quaternion_to_rotation, CameraModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelFormat {
    Binary,
    Text,
}

impl ModelFormat {
    fn ext(self) -> &'static str {
        match self {
            ModelFormat::Binary => "bin",
            ModelFormat::Text => "txt",
        }
    }
}

/// Supported COLMAP camera models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CameraKind {
    SimplePinhole,
    Pinhole,
    SimpleRadial,
}

impl CameraKind {
    pub fn id(self) -> i32 {
        match self {
            CameraKind::SimplePinhole => 0,
            CameraKind::Pinhole => 1,
            CameraKind::SimpleRadial => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CameraKind::SimplePinhole => "SIMPLE_PINHOLE",
            CameraKind::Pinhole => "PINHOLE",
            CameraKind::SimpleRadial => "SIMPLE_RADIAL",
        }
    }

    pub fn param_count(self) -> usize {
        match self {
            CameraKind::SimplePinhole => 3,
            CameraKind::Pinhole => 4,
            CameraKind::SimpleRadial => 4,
        }
    }

    fn from_id(id: i32) -> Result<Self> {
        match id {
            0 => Ok(CameraKind::SimplePinhole),
            1 => Ok(CameraKind::Pinhole),
            2 => Ok(CameraKind::SimpleRadial),
            other => Err(Error::UnsupportedCameraModel(format!("model id {other}"))),
        }
    }

    fn from_name(name: &str) -> Result<Self> {
        match name {
            "SIMPLE_PINHOLE" => Ok(CameraKind::SimplePinhole),
            "PINHOLE" => Ok(CameraKind::Pinhole),
            "SIMPLE_RADIAL" => Ok(CameraKind::SimpleRadial),
            other => Err(Error::UnsupportedCameraModel(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColmapCamera {
    pub id: u32,
    pub kind: CameraKind,
    pub width: u64,
    pub height: u64,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
    /// `-1` when the keypoint has no triangulated point.
    pub point3d_id: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColmapImage {
    pub id: u32,
    /// World-to-camera rotation `(qw, qx, qy, qz)`.
    pub qvec: [f64; 4],
    /// World-to-camera translation.
    pub tvec: [f64; 3],
    pub camera_id: u32,
    pub name: String,
    pub points2d: Vec<Point2D>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Point3D {
    pub id: u64,
    pub xyz: [f64; 3],
    pub rgb: [u8; 3],
    pub error: f64,
    /// `(image_id, point2d_index)` observations.
    pub track: Vec<(u32, u32)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseModel {
    pub cameras: BTreeMap<u32, ColmapCamera>,
    pub images: BTreeMap<u32, ColmapImage>,
    pub points: BTreeMap<u64, Point3D>,
}

impl SparseModel {
    pub fn validate(&self) -> Result<()> {
        for img in self.images.values() {
            if !self.cameras.contains_key(&img.camera_id) {
                return Err(Error::Malformed {
                    file: "images".into(),
                    detail: format!("image {} references missing camera {}", img.id, img.camera_id),
                });
            }
        }
        for cam in self.cameras.values() {
            if cam.params.len() != cam.kind.param_count() {
                return Err(Error::Malformed {
                    file: "cameras".into(),
                    detail: format!(
                        "camera {} has {} params, {} expects {}",
                        cam.id,
                        cam.params.len(),
                        cam.kind.name(),
                        cam.kind.param_count()
                    ),
                });
            }
        }
        Ok(())
    }

    /// Pinhole camera for an image. COLMAP places pixel centers at `+0.5`;
    /// the returned principal point uses integer pixel centers.
    pub fn camera_for_image(&self, image: &ColmapImage) -> Result<CameraModel> {
        let cam = self.cameras.get(&image.camera_id).ok_or_else(|| Error::Malformed {
            file: "images".into(),
            detail: format!("image {} references missing camera {}", image.id, image.camera_id),
        })?;
        let p = &cam.params;
        let (fx, fy, cx, cy) = match cam.kind {
            CameraKind::SimplePinhole => (p[0], p[0], p[1], p[2]),
            CameraKind::Pinhole => (p[0], p[1], p[2], p[3]),
            CameraKind::SimpleRadial => {
                if p[3] != 0.0 {
                    log::warn!(
                        "camera {}: dropping SIMPLE_RADIAL distortion k={} (images are treated as undistorted)",
                        cam.id,
                        p[3]
                    );
                }
                (p[0], p[0], p[1], p[2])
            }
        };
        CameraModel::new(
            fx,
            fy,
            cx - 0.5,
            cy - 0.5,
            cam.width as usize,
            cam.height as usize,
            quaternion_to_rotation(image.qvec),
            Vector3::from(image.tvec),
        )
    }

    /// World-space camera centers of every image, in image-id order.
    pub fn camera_centers(&self) -> Vec<Vector3<f64>> {
        self.images
            .values()
            .map(|img| {
                let r = quaternion_to_rotation(img.qvec);
                -(r.transpose() * Vector3::from(img.tvec))
            })
            .collect()
    }
}

/// Parses `cameras`, `images` and `points3D` from `dir`.
pub fn parse_sparse_model(dir: &Path, format: ModelFormat) -> Result<SparseModel> {
    let file = |stem: &str| {
        let p = dir.join(format!("{stem}.{}", format.ext()));
        if p.is_file() {
            Ok(p)
        } else {
            Err(Error::MissingFile(p))
        }
    };
    let (cams, imgs, pts) = (file("cameras")?, file("images")?, file("points3D")?);
    let model = match format {
        ModelFormat::Text => {
            let read = |p: &Path| fs::read_to_string(p).map_err(|e| Error::io(p, e));
            SparseModel {
                cameras: text::cameras(&read(&cams)?)?,
                images: text::images(&read(&imgs)?)?,
                points: text::points(&read(&pts)?)?,
            }
        }
        ModelFormat::Binary => {
            let read = |p: &Path| fs::read(p).map_err(|e| Error::io(p, e));
            SparseModel {
                cameras: binary::cameras(&read(&cams)?)?,
                images: binary::images(&read(&imgs)?)?,
                points: binary::points(&read(&pts)?)?,
            }
        }
    };
    model.validate()?;
    Ok(model)
}

/// Detects the format present in `dir` (binary preferred).
pub fn detect_format(dir: &Path) -> Option<ModelFormat> {
    if dir.join("cameras.bin").is_file() {
        Some(ModelFormat::Binary)
    } else if dir.join("cameras.txt").is_file() {
        Some(ModelFormat::Text)
    } else {
        None
    }
}

pub fn write_sparse_model(model: &SparseModel, dir: &Path, format: ModelFormat) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |stem: &str, bytes: Vec<u8>| {
        let p = dir.join(format!("{stem}.{}", format.ext()));
        fs::write(&p, bytes).map_err(|e| Error::io(&p, e))
    };
    match format {
        ModelFormat::Text => {
            write("cameras", text::write_cameras(model).into_bytes())?;
            write("images", text::write_images(model).into_bytes())?;
            write("points3D", text::write_points(model).into_bytes())?;
        }
        ModelFormat::Binary => {
            write("cameras", binary::write_cameras(model))?;
            write("images", binary::write_images(model))?;
            write("points3D", binary::write_points(model))?;
        }
    }
    Ok(())
}

mod text {
    use super::*;
    use std::fmt::Write;

    fn malformed(file: &str, line: usize, detail: impl Into<String>) -> Error {
        Error::Malformed {
            file: file.into(),
            detail: format!("line {line}: {}", detail.into()),
        }
    }

    fn content_lines(src: &str) -> impl Iterator<Item = (usize, &str)> {
        src.lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
    }

    fn num<T: std::str::FromStr>(tok: Option<&str>, file: &str, line: usize, what: &str) -> Result<T> {
        let tok = tok.ok_or_else(|| Error::Truncated {
            file: file.into(),
            detail: format!("line {line}: missing {what}"),
        })?;
        tok.parse()
            .map_err(|_| malformed(file, line, format!("cannot parse {what} from `{tok}`")))
    }

    pub fn cameras(src: &str) -> Result<BTreeMap<u32, ColmapCamera>> {
        let f = "cameras.txt";
        let mut out = BTreeMap::new();
        for (ln, line) in content_lines(src) {
            let mut it = line.split_whitespace();
            let id: u32 = num(it.next(), f, ln, "camera id")?;
            let kind = CameraKind::from_name(it.next().ok_or_else(|| malformed(f, ln, "missing model"))?)?;
            let width = num(it.next(), f, ln, "width")?;
            let height = num(it.next(), f, ln, "height")?;
            let params = it
                .map(|t| t.parse::<f64>().map_err(|_| malformed(f, ln, format!("bad param `{t}`"))))
                .collect::<Result<Vec<_>>>()?;
            if params.len() != kind.param_count() {
                return Err(Error::Truncated {
                    file: f.into(),
                    detail: format!("line {ln}: {} expects {} params, found {}", kind.name(), kind.param_count(), params.len()),
                });
            }
            out.insert(id, ColmapCamera { id, kind, width, height, params });
        }
        Ok(out)
    }

    pub fn images(src: &str) -> Result<BTreeMap<u32, ColmapImage>> {
        let f = "images.txt";
        let mut out = BTreeMap::new();
        let mut lines = src.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        while let Some((ln, line)) = lines.next() {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let id: u32 = num(it.next(), f, ln, "image id")?;
            let mut qvec = [0.0; 4];
            for (k, q) in qvec.iter_mut().enumerate() {
                *q = num(it.next(), f, ln, &format!("q{k}"))?;
            }
            let mut tvec = [0.0; 3];
            for (k, t) in tvec.iter_mut().enumerate() {
                *t = num(it.next(), f, ln, &format!("t{k}"))?;
            }
            let camera_id = num(it.next(), f, ln, "camera id")?;
            let name: Vec<&str> = it.collect();
            if name.is_empty() {
                return Err(Error::Truncated {
                    file: f.into(),
                    detail: format!("line {ln}: missing image name"),
                });
            }
            // The keypoint line always follows the header and may be empty.
            let mut points2d = Vec::new();
            if let Some((pln, pl)) = lines.next() {
                let toks: Vec<&str> = pl.split_whitespace().collect();
                if toks.len() % 3 != 0 {
                    return Err(Error::Truncated {
                        file: f.into(),
                        detail: format!("line {pln}: keypoint list is not a multiple of 3 values"),
                    });
                }
                for c in toks.chunks(3) {
                    points2d.push(Point2D {
                        x: num(Some(c[0]), f, pln, "x")?,
                        y: num(Some(c[1]), f, pln, "y")?,
                        point3d_id: num(Some(c[2]), f, pln, "point3D id")?,
                    });
                }
            }
            out.insert(
                id,
                ColmapImage {
                    id,
                    qvec,
                    tvec,
                    camera_id,
                    name: name.join(" "),
                    points2d,
                },
            );
        }
        Ok(out)
    }

    pub fn points(src: &str) -> Result<BTreeMap<u64, Point3D>> {
        let f = "points3D.txt";
        let mut out = BTreeMap::new();
        for (ln, line) in content_lines(src) {
            let mut it = line.split_whitespace();
            let id: u64 = num(it.next(), f, ln, "point id")?;
            let mut xyz = [0.0; 3];
            for (k, v) in xyz.iter_mut().enumerate() {
                *v = num(it.next(), f, ln, &format!("xyz[{k}]"))?;
            }
            let mut rgb = [0u8; 3];
            for (k, v) in rgb.iter_mut().enumerate() {
                *v = num(it.next(), f, ln, &format!("rgb[{k}]"))?;
            }
            let error = num(it.next(), f, ln, "error")?;
            let rest: Vec<&str> = it.collect();
            if rest.len() % 2 != 0 {
                return Err(Error::Truncated {
                    file: f.into(),
                    detail: format!("line {ln}: odd number of track entries"),
                });
            }
            let track = rest
                .chunks(2)
                .map(|c| Ok((num(Some(c[0]), f, ln, "track image")?, num(Some(c[1]), f, ln, "track index")?)))
                .collect::<Result<Vec<_>>>()?;
            out.insert(id, Point3D { id, xyz, rgb, error, track });
        }
        Ok(out)
    }

    pub fn write_cameras(m: &SparseModel) -> String {
        let mut s = String::from("# Camera list with one line of data per camera:\n#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n");
        writeln!(s, "# Number of cameras: {}", m.cameras.len()).unwrap();
        for c in m.cameras.values() {
            write!(s, "{} {} {} {}", c.id, c.kind.name(), c.width, c.height).unwrap();
            for p in &c.params {
                write!(s, " {p:?}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    pub fn write_images(m: &SparseModel) -> String {
        let mut s = String::from(
            "# Image list with two lines of data per image:\n#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n#   POINTS2D[] as (X, Y, POINT3D_ID)\n",
        );
        writeln!(s, "# Number of images: {}", m.images.len()).unwrap();
        for img in m.images.values() {
            let [qw, qx, qy, qz] = img.qvec;
            let [tx, ty, tz] = img.tvec;
            writeln!(
                s,
                "{} {qw:?} {qx:?} {qy:?} {qz:?} {tx:?} {ty:?} {tz:?} {} {}",
                img.id, img.camera_id, img.name
            )
            .unwrap();
            let pts: Vec<String> = img
                .points2d
                .iter()
                .map(|p| format!("{:?} {:?} {}", p.x, p.y, p.point3d_id))
                .collect();
            s.push_str(&pts.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn write_points(m: &SparseModel) -> String {
        let mut s = String::from(
            "# 3D point list with one line of data per point:\n#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n",
        );
        writeln!(s, "# Number of points: {}", m.points.len()).unwrap();
        for p in m.points.values() {
            let [x, y, z] = p.xyz;
            write!(s, "{} {x:?} {y:?} {z:?} {} {} {} {:?}", p.id, p.rgb[0], p.rgb[1], p.rgb[2], p.error).unwrap();
            for (i, k) in &p.track {
                write!(s, " {i} {k}").unwrap();
            }
            s.push('\n');
        }
        s
    }
}

mod binary {
    use super::*;

    struct Reader<'a> {
        buf: &'a [u8],
        pos: usize,
        file: &'static str,
    }

    impl<'a> Reader<'a> {
        fn new(buf: &'a [u8], file: &'static str) -> Self {
            Reader { buf, pos: 0, file }
        }

        fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
            if self.buf.len() - self.pos < n {
                return Err(Error::Truncated {
                    file: self.file.into(),
                    detail: format!("reading {what} at byte {}", self.pos),
                });
            }
            let s = &self.buf[self.pos..self.pos + n];
            self.pos += n;
            Ok(s)
        }

        fn u8(&mut self, what: &str) -> Result<u8> {
            Ok(self.take(1, what)?[0])
        }
        fn u32(&mut self, what: &str) -> Result<u32> {
            Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
        }
        fn i32(&mut self, what: &str) -> Result<i32> {
            Ok(i32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
        }
        fn u64(&mut self, what: &str) -> Result<u64> {
            Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
        }
        fn i64(&mut self, what: &str) -> Result<i64> {
            Ok(i64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
        }
        fn f64(&mut self, what: &str) -> Result<f64> {
            Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
        }
        fn cstr(&mut self, what: &str) -> Result<String> {
            let rest = &self.buf[self.pos..];
            let end = rest.iter().position(|&b| b == 0).ok_or_else(|| Error::Truncated {
                file: self.file.into(),
                detail: format!("unterminated {what} at byte {}", self.pos),
            })?;
            let s = String::from_utf8_lossy(&rest[..end]).into_owned();
            self.pos += end + 1;
            Ok(s)
        }
        /// Element count, bounded by the bytes left so corrupt counts fail fast.
        fn count(&mut self, what: &str, min_elem_size: usize) -> Result<usize> {
            let n = self.u64(what)?;
            let left = (self.buf.len() - self.pos) as u64;
            if n.saturating_mul(min_elem_size as u64) > left {
                return Err(Error::Truncated {
                    file: self.file.into(),
                    detail: format!("{what} = {n} exceeds remaining {left} bytes"),
                });
            }
            Ok(n as usize)
        }
    }

    pub fn cameras(buf: &[u8]) -> Result<BTreeMap<u32, ColmapCamera>> {
        let mut r = Reader::new(buf, "cameras.bin");
        let n = r.count("camera count", 24)?;
        let mut out = BTreeMap::new();
        for _ in 0..n {
            let id = r.u32("camera id")?;
            let kind = CameraKind::from_id(r.i32("model id")?)?;
            let width = r.u64("width")?;
            let height = r.u64("height")?;
            let params = (0..kind.param_count())
                .map(|_| r.f64("camera param"))
                .collect::<Result<Vec<_>>>()?;
            out.insert(id, ColmapCamera { id, kind, width, height, params });
        }
        Ok(out)
    }

    pub fn images(buf: &[u8]) -> Result<BTreeMap<u32, ColmapImage>> {
        let mut r = Reader::new(buf, "images.bin");
        let n = r.count("image count", 64)?;
        let mut out = BTreeMap::new();
        for _ in 0..n {
            let id = r.u32("image id")?;
            let mut qvec = [0.0; 4];
            for q in qvec.iter_mut() {
                *q = r.f64("qvec")?;
            }
            let mut tvec = [0.0; 3];
            for t in tvec.iter_mut() {
                *t = r.f64("tvec")?;
            }
            let camera_id = r.u32("camera id")?;
            let name = r.cstr("image name")?;
            let np = r.count("points2D count", 24)?;
            let mut points2d = Vec::with_capacity(np);
            for _ in 0..np {
                points2d.push(Point2D {
                    x: r.f64("point2D x")?,
                    y: r.f64("point2D y")?,
                    point3d_id: r.i64("point3D id")?,
                });
            }
            out.insert(id, ColmapImage { id, qvec, tvec, camera_id, name, points2d });
        }
        Ok(out)
    }

    pub fn points(buf: &[u8]) -> Result<BTreeMap<u64, Point3D>> {
        let mut r = Reader::new(buf, "points3D.bin");
        let n = r.count("point count", 43)?;
        let mut out = BTreeMap::new();
        for _ in 0..n {
            let id = r.u64("point id")?;
            let xyz = [r.f64("x")?, r.f64("y")?, r.f64("z")?];
            let rgb = [r.u8("r")?, r.u8("g")?, r.u8("b")?];
            let error = r.f64("error")?;
            let nt = r.count("track length", 8)?;
            let mut track = Vec::with_capacity(nt);
            for _ in 0..nt {
                track.push((r.u32("track image")?, r.u32("track index")?));
            }
            out.insert(id, Point3D { id, xyz, rgb, error, track });
        }
        Ok(out)
    }

    pub fn write_cameras(m: &SparseModel) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(&(m.cameras.len() as u64).to_le_bytes());
        for c in m.cameras.values() {
            b.extend_from_slice(&c.id.to_le_bytes());
            b.extend_from_slice(&c.kind.id().to_le_bytes());
            b.extend_from_slice(&c.width.to_le_bytes());
            b.extend_from_slice(&c.height.to_le_bytes());
            for p in &c.params {
                b.extend_from_slice(&p.to_le_bytes());
            }
        }
        b
    }

    pub fn write_images(m: &SparseModel) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(&(m.images.len() as u64).to_le_bytes());
        for img in m.images.values() {
            b.extend_from_slice(&img.id.to_le_bytes());
            for q in img.qvec {
                b.extend_from_slice(&q.to_le_bytes());
            }
            for t in img.tvec {
                b.extend_from_slice(&t.to_le_bytes());
            }
            b.extend_from_slice(&img.camera_id.to_le_bytes());
            b.extend_from_slice(img.name.as_bytes());
            b.push(0);
            b.extend_from_slice(&(img.points2d.len() as u64).to_le_bytes());
            for p in &img.points2d {
                b.extend_from_slice(&p.x.to_le_bytes());
                b.extend_from_slice(&p.y.to_le_bytes());
                b.extend_from_slice(&p.point3d_id.to_le_bytes());
            }
        }
        b
    }

    pub fn write_points(m: &SparseModel) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(&(m.points.len() as u64).to_le_bytes());
        for p in m.points.values() {
            b.extend_from_slice(&p.id.to_le_bytes());
            for v in p.xyz {
                b.extend_from_slice(&v.to_le_bytes());
            }
            b.extend_from_slice(&p.rgb);
            b.extend_from_slice(&p.error.to_le_bytes());
            b.extend_from_slice(&(p.track.len() as u64).to_le_bytes());
            for (i, k) in &p.track {
                b.extend_from_slice(&i.to_le_bytes());
                b.extend_from_slice(&k.to_le_bytes());
            }
        }
        b
    }
}
