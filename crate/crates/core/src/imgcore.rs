//! Planar float image containers, masks, and the file codecs used at the
//! boundaries (PNG, PFM, ASCII PLY).
//!
//! Samples are stored as `f64` planes in row-major order. Intensities are
//! nominally in `[0, 1]` but intermediate arithmetic may leave that range;
//! clamping happens only when quantizing to 8 bits on write.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: png decode failed: {reason}", path.display())]
    PngDecode { path: PathBuf, reason: String },
    #[error("{}: png encode failed: {reason}", path.display())]
    PngEncode { path: PathBuf, reason: String },
    #[error("{}: malformed pfm: {reason}", path.display())]
    Pfm { path: PathBuf, reason: String },
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("invalid image geometry {width}x{height} with {len} samples")]
    Geometry { width: usize, height: usize, len: usize },
    #[error("disparity {value} at index {index} is negative or infinite")]
    BadDisparity { index: usize, value: f32 },
}

pub type Result<T> = std::result::Result<T, ImageError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ImageError + '_ {
    move |source| ImageError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn check_geometry(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 || width.checked_mul(height) != Some(len) {
        return Err(ImageError::Geometry { width, height, len });
    }
    Ok(())
}

/// Checks that two `(width, height)` pairs agree.
pub fn ensure_same_dims(expected: (usize, usize), found: (usize, usize)) -> Result<()> {
    if expected != found {
        return Err(ImageError::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Single-channel float image.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_geometry(width, height, data.len())?;
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Copies the `w`×`h` window whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(ImageError::DimensionMismatch {
                expected: (self.width, self.height),
                found: (x0 + w, y0 + h),
            });
        }
        Self::from_fn(w, h, |x, y| self.get(x0 + x, y0 + y))
    }
}

/// Color channel selector, in the order the planes are stored.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Channel {
    R,
    G,
    B,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::R, Channel::G, Channel::B];

    pub fn index(self) -> usize {
        match self {
            Channel::R => 0,
            Channel::G => 1,
            Channel::B => 2,
        }
    }
}

/// Three co-registered float planes.
#[derive(Clone, Debug, PartialEq)]
pub struct RgbImage {
    r: GrayImage,
    g: GrayImage,
    b: GrayImage,
}

impl RgbImage {
    pub fn new(r: GrayImage, g: GrayImage, b: GrayImage) -> Result<Self> {
        ensure_same_dims(r.dims(), g.dims())?;
        ensure_same_dims(r.dims(), b.dims())?;
        Ok(Self { r, g, b })
    }

    /// Replicates one plane into all three channels.
    pub fn from_gray(plane: &GrayImage) -> Self {
        Self {
            r: plane.clone(),
            g: plane.clone(),
            b: plane.clone(),
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Result<Self> {
        let n = width * height;
        let (mut r, mut g, mut b) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for y in 0..height {
            for x in 0..width {
                let [vr, vg, vb] = f(x, y);
                r.push(vr);
                g.push(vg);
                b.push(vb);
            }
        }
        Self::new(
            GrayImage::new(width, height, r)?,
            GrayImage::new(width, height, g)?,
            GrayImage::new(width, height, b)?,
        )
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.r.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.r.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        self.r.dims()
    }

    pub fn r(&self) -> &GrayImage {
        &self.r
    }

    pub fn g(&self) -> &GrayImage {
        &self.g
    }

    pub fn b(&self) -> &GrayImage {
        &self.b
    }

    pub fn plane(&self, c: Channel) -> &GrayImage {
        match c {
            Channel::R => &self.r,
            Channel::G => &self.g,
            Channel::B => &self.b,
        }
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = y * self.width() + x;
        [self.r.data[i], self.g.data[i], self.b.data[i]]
    }

    pub fn into_planes(self) -> (GrayImage, GrayImage, GrayImage) {
        (self.r, self.g, self.b)
    }

    /// Per-pixel channel mean.
    pub fn luminance(&self) -> GrayImage {
        let data = (0..self.r.data.len())
            .map(|i| (self.r.data[i] + self.g.data[i] + self.b.data[i]) / 3.0)
            .collect();
        GrayImage {
            width: self.width(),
            height: self.height(),
            data,
        }
    }

    pub fn map_pixels(&self, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let w = self.width();
        Self::from_fn(w, self.height(), |x, y| f(self.pixel(x, y))).expect("dimensions taken from an existing image")
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        Self::new(
            self.r.crop(x0, y0, w, h)?,
            self.g.crop(x0, y0, w, h)?,
            self.b.crop(x0, y0, w, h)?,
        )
    }

    /// Clamps to `[0, 1]` and rounds to 8-bit levels, returned as floats.
    pub fn quantize8(&self) -> Self {
        self.map_pixels(|p| p.map(|v| f64::from(quantize_u8(v)) / 255.0))
    }

    /// Interleaved 8-bit RGB bytes, row-major.
    pub fn to_rgb8(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.r.data.len() * 3);
        for i in 0..self.r.data.len() {
            out.push(quantize_u8(self.r.data[i]));
            out.push(quantize_u8(self.g.data[i]));
            out.push(quantize_u8(self.b.data[i]));
        }
        out
    }
}

/// `round(clamp(v, 0, 1) * 255)`, ties rounded up. NaN maps to 0.
#[inline]
pub fn quantize_u8(v: f64) -> u8 {
    if v.is_nan() {
        return 0;
    }
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

/// Per-pixel subpixel disparity. NaN marks an invalid pixel.
#[derive(Clone, Debug)]
pub struct DisparityMap {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl PartialEq for DisparityMap {
    /// Bit-wise comparison so that NaN entries compare equal.
    fn eq(&self, other: &Self) -> bool {
        self.width == other.width
            && self.height == other.height
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl DisparityMap {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        check_geometry(width, height, data.len())?;
        if let Some((index, &value)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_nan() && !(v.is_finite() && **v >= 0.0))
        {
            return Err(ImageError::BadDisparity { index, value });
        }
        Ok(Self { width, height, data })
    }

    pub fn invalid(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![f32::NAN; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        !self.get(x, y).is_nan()
    }

    pub fn validity(&self) -> ValidityMask {
        ValidityMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| !v.is_nan()).collect(),
        }
    }

    /// Returns a copy with every pixel outside `mask` set to NaN.
    pub fn masked(&self, mask: &ValidityMask) -> Result<Self> {
        ensure_same_dims(self.dims(), mask.dims())?;
        let data = self
            .data
            .iter()
            .zip(mask.data())
            .map(|(&v, &m)| if m { v } else { f32::NAN })
            .collect();
        Ok(Self {
            width: self.width,
            height: self.height,
            data,
        })
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(ImageError::DimensionMismatch {
                expected: (self.width, self.height),
                found: (x0 + w, y0 + h),
            });
        }
        Self::from_fn(w, h, |x, y| self.get(x0 + x, y0 + y))
    }
}

/// Per-pixel boolean mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidityMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl ValidityMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        check_geometry(width, height, data.len())?;
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn and(&self, other: &ValidityMask) -> Result<Self> {
        ensure_same_dims(self.dims(), other.dims())?;
        Ok(Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a && *b).collect(),
        })
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(ImageError::DimensionMismatch {
                expected: (self.width, self.height),
                found: (x0 + w, y0 + h),
            });
        }
        Self::from_fn(w, h, |x, y| self.get(x0 + x, y0 + y))
    }
}

// ---------------------------------------------------------------------------
// PNG
// ---------------------------------------------------------------------------

/// Reads an 8- or 16-bit RGB or grayscale PNG into float planes.
///
/// Samples are divided by the channel maximum (255 or 65535). Grayscale input
/// is replicated into all three planes; alpha channels are ignored.
pub fn read_png(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    let decode_err = |reason: String| ImageError::PngDecode {
        path: path.to_path_buf(),
        reason,
    };
    let decoder = png::Decoder::new(BufReader::new(file));
    let mut reader = decoder.read_info().map_err(|e| decode_err(e.to_string()))?;
    let (color, depth) = reader.output_color_type();
    let channels = match color {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => {
            return Err(decode_err("unsupported color type Indexed".into()));
        }
    };
    let bytes_per_sample = match depth {
        png::BitDepth::Eight => 1,
        png::BitDepth::Sixteen => 2,
        other => {
            return Err(decode_err(format!("unsupported bit depth {}", other as u8)));
        }
    };
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| decode_err("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(|e| decode_err(e.to_string()))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let stride = info.line_size;
    let max = if bytes_per_sample == 1 { 255.0 } else { 65535.0 };
    let sample = |row: &[u8], idx: usize| -> f64 {
        if bytes_per_sample == 1 {
            f64::from(row[idx]) / max
        } else {
            f64::from(u16::from_be_bytes([row[2 * idx], row[2 * idx + 1]])) / max
        }
    };
    RgbImage::from_fn(w, h, |x, y| {
        let row = &buf[y * stride..(y + 1) * stride];
        let base = x * channels;
        if channels < 3 {
            let v = sample(row, base);
            [v, v, v]
        } else {
            [sample(row, base), sample(row, base + 1), sample(row, base + 2)]
        }
    })
}

fn write_png_bytes(path: &Path, width: usize, height: usize, color: png::ColorType, bytes: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let encode_err = |e: png::EncodingError| ImageError::PngEncode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let mut encoder = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(color);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header().map_err(encode_err)?;
    writer.write_image_data(bytes).map_err(encode_err)?;
    writer.finish().map_err(encode_err)
}

/// Writes an 8-bit RGB PNG. Samples are clamped to `[0, 1]` and quantized
/// with `round(v * 255)`.
pub fn write_png(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    write_png_bytes(
        path.as_ref(),
        img.width(),
        img.height(),
        png::ColorType::Rgb,
        &img.to_rgb8(),
    )
}

/// Writes a mask as 8-bit grayscale, 255 for set pixels and 0 otherwise.
pub fn write_mask_png(mask: &ValidityMask, path: impl AsRef<Path>) -> Result<()> {
    let bytes: Vec<u8> = mask.data.iter().map(|&v| if v { 255 } else { 0 }).collect();
    write_png_bytes(
        path.as_ref(),
        mask.width,
        mask.height,
        png::ColorType::Grayscale,
        &bytes,
    )
}

/// Reads a mask PNG; a pixel is set when its first channel exceeds one half.
pub fn read_mask_png(path: impl AsRef<Path>) -> Result<ValidityMask> {
    let img = read_png(path)?;
    ValidityMask::new(
        img.width(),
        img.height(),
        img.r().data().iter().map(|&v| v > 0.5).collect(),
    )
}

// ---------------------------------------------------------------------------
// PFM
// ---------------------------------------------------------------------------

/// Writes a single-channel little-endian PFM (`Pf`, scale `-1.0`), bottom row
/// first. Values, NaN included, are stored bit-for-bit.
pub fn write_pfm_raw(path: impl AsRef<Path>, width: usize, height: usize, data: &[f32]) -> Result<()> {
    let path = path.as_ref();
    check_geometry(width, height, data.len())?;
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        write!(w, "Pf\n{width} {height}\n-1.0\n")?;
        for y in (0..height).rev() {
            for v in &data[y * width..(y + 1) * width] {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()
    };
    write().map_err(io_err(path))
}

fn read_token(reader: &mut impl BufRead) -> std::io::Result<String> {
    let mut token = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        if reader.read(&mut byte)? == 0 {
            break;
        }
        if byte[0].is_ascii_whitespace() {
            if token.is_empty() {
                continue;
            }
            break;
        }
        token.push(byte[0]);
    }
    Ok(String::from_utf8_lossy(&token).into_owned())
}

/// Reads a single-channel PFM, returning `(width, height, row-major top-down data)`.
pub fn read_pfm_raw(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<f32>)> {
    let path = path.as_ref();
    let pfm_err = |reason: String| ImageError::Pfm {
        path: path.to_path_buf(),
        reason,
    };
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = BufReader::new(file);
    let magic = read_token(&mut reader).map_err(io_err(path))?;
    if magic != "Pf" {
        return Err(pfm_err(format!("expected magic Pf, found {magic:?}")));
    }
    let mut header_num = |what: &str| -> Result<String> {
        let t = read_token(&mut reader).map_err(io_err(path))?;
        if t.is_empty() {
            return Err(pfm_err(format!("missing {what}")));
        }
        Ok(t)
    };
    let width: usize = header_num("width")?.parse().map_err(|_| pfm_err("bad width".into()))?;
    let height: usize = header_num("height")?
        .parse()
        .map_err(|_| pfm_err("bad height".into()))?;
    let scale: f32 = header_num("scale")?.parse().map_err(|_| pfm_err("bad scale".into()))?;
    if width == 0 || height == 0 || scale == 0.0 || !scale.is_finite() {
        return Err(pfm_err(format!("bad header values {width}x{height} scale {scale}")));
    }
    let little = scale < 0.0;
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes).map_err(io_err(path))?;
    let expected = width * height * 4;
    if bytes.len() != expected {
        return Err(pfm_err(format!(
            "expected {expected} data bytes, found {}",
            bytes.len()
        )));
    }
    let mut data = vec![0f32; width * height];
    for (i, chunk) in bytes.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let (file_row, x) = (i / width, i % width);
        data[(height - 1 - file_row) * width + x] = v;
    }
    Ok((width, height, data))
}

pub fn write_pfm(map: &DisparityMap, path: impl AsRef<Path>) -> Result<()> {
    write_pfm_raw(path, map.width, map.height, &map.data)
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<DisparityMap> {
    let (w, h, data) = read_pfm_raw(path)?;
    DisparityMap::new(w, h, data)
}

// ---------------------------------------------------------------------------
// PLY
// ---------------------------------------------------------------------------

/// A colored 3D point, coordinates in millimeters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ColoredPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub rgb: [u8; 3],
}

/// Writes an ASCII PLY with one vertex per line. Each entry of `comments`
/// becomes a `comment` header line.
pub fn write_ply(points: &[ColoredPoint], comments: &[String], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(w, "ply")?;
        writeln!(w, "format ascii 1.0")?;
        for c in comments {
            writeln!(w, "comment {}", c.replace('\n', " "))?;
        }
        writeln!(w, "element vertex {}", points.len())?;
        for axis in ["x", "y", "z"] {
            writeln!(w, "property float {axis}")?;
        }
        for c in ["red", "green", "blue"] {
            writeln!(w, "property uchar {c}")?;
        }
        writeln!(w, "end_header")?;
        for p in points {
            writeln!(
                w,
                "{:.6} {:.6} {:.6} {} {} {}",
                p.x, p.y, p.z, p.rgb[0], p.rgb[1], p.rgb[2]
            )?;
        }
        w.flush()
    };
    write().map_err(io_err(path))
}
