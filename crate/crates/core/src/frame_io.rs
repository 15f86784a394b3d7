//! Frames, frame sequences, and the on-disk formats they travel in
//! (binary PGM/PPM, 8-bit PNG, YUV4MPEG2).

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result, ResultExt};

/// Smallest width/height accepted anywhere in the pipeline.
pub const MIN_DIM: usize = 16;

/// An 8-bit raster, gray (1 channel) or RGB (3 channels), row-major and
/// channel-interleaved.
#[derive(Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl fmt::Debug for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Frame")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("channels", &self.channels)
            .finish_non_exhaustive()
    }
}

impl Frame {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidFrame(format!(
                "{channels} channels (expected 1 or 3)"
            )));
        }
        if width < MIN_DIM || height < MIN_DIM {
            return Err(Error::InvalidFrame(format!(
                "{width}x{height} is below the {MIN_DIM}x{MIN_DIM} minimum"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidFrame(format!(
                "data length {} != {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Frame {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn gray(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        Frame::new(width, height, 1, data)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        Frame::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn same_shape(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub(crate) fn shape_string(&self) -> String {
        format!("{}x{}x{}", self.width, self.height, self.channels)
    }

    pub(crate) fn check_same_shape(&self, other: &Frame) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.shape_string(),
                found: other.shape_string(),
            })
        }
    }
}

/// Frame rate as a rational `num/den`. Metadata only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameRate {
    pub num: u32,
    pub den: u32,
}

impl Default for FrameRate {
    fn default() -> Self {
        FrameRate { num: 30, den: 1 }
    }
}

/// Ordered frames of identical shape, at least two of them.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Vec<Frame>,
    pub fps: FrameRate,
}

impl FrameSequence {
    pub fn new(frames: Vec<Frame>, fps: FrameRate) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::SequenceTooShort(frames.len()));
        }
        for (i, f) in frames.iter().enumerate().skip(1) {
            frames[0].check_same_shape(f).at_frame(i)?;
        }
        Ok(FrameSequence { frames, fps })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn width(&self) -> usize {
        self.frames[0].width
    }

    pub fn height(&self) -> usize {
        self.frames[0].height
    }

    pub fn channels(&self) -> usize {
        self.frames[0].channels
    }
}

/// BT.601 luma. Single-channel frames are returned unchanged.
pub fn to_luma(frame: &Frame) -> Frame {
    if frame.channels == 1 {
        return frame.clone();
    }
    let data = frame
        .data
        .chunks_exact(3)
        .map(|p| luma601(p[0], p[1], p[2]))
        .collect();
    Frame {
        width: frame.width,
        height: frame.height,
        channels: 1,
        data,
    }
}

#[inline]
fn luma601(r: u8, g: u8, b: u8) -> u8 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64)
        .round()
        .clamp(0.0, 255.0) as u8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Png,
    Pgm,
    Ppm,
}

impl ImageFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Png => "png",
            ImageFormat::Pgm => "pgm",
            ImageFormat::Ppm => "ppm",
        }
    }

    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "png" => Some(ImageFormat::Png),
            "pgm" => Some(ImageFormat::Pgm),
            "ppm" => Some(ImageFormat::Ppm),
            _ => None,
        }
    }
}

impl std::str::FromStr for ImageFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "png" => Ok(ImageFormat::Png),
            "pgm" => Ok(ImageFormat::Pgm),
            "ppm" => Ok(ImageFormat::Ppm),
            other => Err(Error::UnsupportedFormat(other.to_string())),
        }
    }
}

/// Expands a printf-style `%d` / `%0Nd` placeholder with `index`.
/// Returns `None` if `pattern` has no placeholder.
pub fn expand_pattern(pattern: &str, index: usize) -> Option<String> {
    let start = pattern.find('%')?;
    let rest = &pattern[start + 1..];
    let end = rest.find('d')?;
    let spec = &rest[..end];
    if !spec.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let width: usize = if spec.is_empty() { 0 } else { spec.parse().ok()? };
    Some(format!(
        "{}{:0width$}{}",
        &pattern[..start],
        index,
        &rest[end + 1..],
        width = width
    ))
}

/// Lists the frame files named by `path_pattern`.
///
/// With a `%0Nd` placeholder, indices are expanded from 0 (or 1 if no frame 0
/// exists) until the first missing file. Otherwise `path_pattern` is a
/// directory whose files with the format's extension are taken in
/// lexicographic order.
pub fn list_frame_files(path_pattern: &str, format: ImageFormat) -> Result<Vec<PathBuf>> {
    if expand_pattern(path_pattern, 0).is_some() {
        let first = expand_pattern(path_pattern, 0).unwrap();
        let start = if Path::new(&first).exists() { 0 } else { 1 };
        let mut files = Vec::new();
        let mut i = start;
        loop {
            let p = PathBuf::from(expand_pattern(path_pattern, i).unwrap());
            if !p.exists() {
                break;
            }
            files.push(p);
            i += 1;
        }
        if files.is_empty() {
            return Err(Error::MissingFile(PathBuf::from(first)));
        }
        return Ok(files);
    }

    let dir = Path::new(path_pattern);
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir.to_path_buf()));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && ImageFormat::from_path(p) == Some(format))
        .collect();
    files.sort();
    Ok(files)
}

/// Loads an ordered frame sequence from a directory or `%0Nd` pattern.
pub fn read_frame_dir(path_pattern: &str, format: ImageFormat) -> Result<FrameSequence> {
    let files = list_frame_files(path_pattern, format)?;
    if files.len() < 2 {
        return Err(Error::SequenceTooShort(files.len()));
    }
    let mut frames = Vec::with_capacity(files.len());
    for (i, p) in files.iter().enumerate() {
        let f = read_frame(p, format).at_frame(i)?;
        if let Some(first) = frames.first() {
            Frame::check_same_shape(first, &f).at_frame(i)?;
        }
        frames.push(f);
    }
    FrameSequence::new(frames, FrameRate::default())
}

pub fn read_frame(path: &Path, format: ImageFormat) -> Result<Frame> {
    let bytes = fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })?;
    match format {
        ImageFormat::Pgm | ImageFormat::Ppm => decode_pnm(&bytes),
        ImageFormat::Png => decode_png(&bytes),
    }
}

/// Writes `frame` in the format implied by the file extension. PGM/PPM
/// extensions are interchangeable: the channel count picks P5 or P6.
pub fn write_frame(path: &Path, frame: &Frame) -> Result<()> {
    let format = ImageFormat::from_path(path)
        .ok_or_else(|| Error::UnsupportedFormat(path.display().to_string()))?;
    match format {
        ImageFormat::Pgm | ImageFormat::Ppm => {
            fs::write(path, encode_pnm(frame)).map_err(|e| Error::io(path, e))
        }
        ImageFormat::Png => {
            let color = if frame.channels == 1 {
                image::ExtendedColorType::L8
            } else {
                image::ExtendedColorType::Rgb8
            };
            image::save_buffer_with_format(
                path,
                &frame.data,
                frame.width as u32,
                frame.height as u32,
                color,
                image::ImageFormat::Png,
            )
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
        }
    }
}

pub fn encode_pnm(frame: &Frame) -> Vec<u8> {
    let magic = if frame.channels == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", frame.width, frame.height).into_bytes();
    out.extend_from_slice(&frame.data);
    out
}

pub fn decode_pnm(bytes: &[u8]) -> Result<Frame> {
    let mut pos = 0usize;
    let mut token = || -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Parse("truncated PNM header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    let channels = match token()?.as_str() {
        "P5" => 1,
        "P6" => 3,
        other => return Err(Error::UnsupportedFormat(format!("PNM magic {other:?}"))),
    };
    let mut num = |what: &str| -> Result<usize> {
        token()?
            .parse()
            .map_err(|_| Error::Parse(format!("bad PNM {what}")))
    };
    let width = num("width")?;
    let height = num("height")?;
    let maxval = num("maxval")?;
    if maxval != 255 {
        return Err(Error::UnsupportedDepth(format!(
            "PNM maxval {maxval} (only 255 supported)"
        )));
    }
    // exactly one whitespace byte separates the header from the raster
    let body = pos + 1;
    let need = width * height * channels;
    if bytes.len() < body + need {
        return Err(Error::Parse(format!(
            "truncated PNM raster: {} of {need} bytes",
            bytes.len().saturating_sub(body)
        )));
    }
    Frame::new(width, height, channels, bytes[body..body + need].to_vec())
}

fn decode_png(bytes: &[u8]) -> Result<Frame> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| Error::Parse(format!("PNG: {e}")))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        image::DynamicImage::ImageLuma8(b) => Frame::new(w, h, 1, b.into_raw()),
        image::DynamicImage::ImageRgb8(b) => Frame::new(w, h, 3, b.into_raw()),
        image::DynamicImage::ImageLuma16(_)
        | image::DynamicImage::ImageLumaA16(_)
        | image::DynamicImage::ImageRgb16(_)
        | image::DynamicImage::ImageRgba16(_) => {
            Err(Error::UnsupportedDepth("16-bit PNG".into()))
        }
        other => Err(Error::UnsupportedFormat(format!(
            "PNG color type {:?}",
            other.color()
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Chroma {
    C444,
    C420,
    Mono,
}

/// Reads a YUV4MPEG2 stream. Only the luma plane is kept, so the result is a
/// sequence of gray frames.
pub fn read_y4m(path: &Path) -> Result<FrameSequence> {
    let bytes = fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })?;
    parse_y4m(&bytes)
}

pub fn parse_y4m(bytes: &[u8]) -> Result<FrameSequence> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Parse("Y4M header not terminated".into()))?;
    let header = std::str::from_utf8(&bytes[..nl])
        .map_err(|_| Error::Parse("Y4M header is not ASCII".into()))?;
    let mut fields = header.split(' ');
    if fields.next() != Some("YUV4MPEG2") {
        return Err(Error::Parse("missing YUV4MPEG2 magic".into()));
    }

    let (mut width, mut height) = (None, None);
    let mut fps = FrameRate::default();
    let mut chroma = Chroma::C420;
    for f in fields.filter(|f| !f.is_empty()) {
        let (tag, val) = f.split_at(1);
        match tag {
            "W" => width = val.parse::<usize>().ok(),
            "H" => height = val.parse::<usize>().ok(),
            "F" => {
                let (n, d) = val
                    .split_once(':')
                    .ok_or_else(|| Error::Parse(format!("bad Y4M frame rate {val:?}")))?;
                fps = FrameRate {
                    num: n.parse().map_err(|_| Error::Parse("bad Y4M fps".into()))?,
                    den: d.parse().map_err(|_| Error::Parse("bad Y4M fps".into()))?,
                };
            }
            "C" => {
                chroma = match val {
                    "444" => Chroma::C444,
                    "420" | "420jpeg" | "420paldv" | "420mpeg2" => Chroma::C420,
                    "mono" => Chroma::Mono,
                    v if v.contains('p') => {
                        return Err(Error::UnsupportedDepth(format!("Y4M colorspace C{v}")))
                    }
                    v => return Err(Error::UnsupportedFormat(format!("Y4M colorspace C{v}"))),
                }
            }
            "I" | "A" | "X" => {}
            _ => return Err(Error::Parse(format!("unknown Y4M header field {f:?}"))),
        }
    }
    let width = width.ok_or_else(|| Error::Parse("Y4M header lacks W".into()))?;
    let height = height.ok_or_else(|| Error::Parse("Y4M header lacks H".into()))?;
    let luma = width * height;
    let chroma_len = match chroma {
        Chroma::C444 => 2 * luma,
        Chroma::C420 => 2 * width.div_ceil(2) * height.div_ceil(2),
        Chroma::Mono => 0,
    };

    let mut frames = Vec::new();
    let mut pos = nl + 1;
    while pos < bytes.len() {
        let index = frames.len();
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|e| pos + e)
            .ok_or_else(|| Error::Parse("unterminated FRAME header".into()).at_frame(index))?;
        if !bytes[pos..end].starts_with(b"FRAME") {
            return Err(Error::Parse("expected FRAME marker".into()).at_frame(index));
        }
        pos = end + 1;
        if bytes.len() < pos + luma + chroma_len {
            return Err(Error::Parse("truncated Y4M frame".into()).at_frame(index));
        }
        frames.push(Frame::gray(width, height, bytes[pos..pos + luma].to_vec()).at_frame(index)?);
        pos += luma + chroma_len;
    }
    FrameSequence::new(frames, fps)
}

/// Writes a 4:4:4 YUV4MPEG2 stream. Gray frames get neutral chroma; RGB
/// frames are converted with full-range BT.601.
pub fn write_y4m(seq: &FrameSequence, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    encode_y4m(seq, &mut out).map_err(|e| Error::io(path, e))
}

pub fn encode_y4m(seq: &FrameSequence, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(
        out,
        "YUV4MPEG2 W{} H{} F{}:{} Ip A1:1 C444",
        seq.width(),
        seq.height(),
        seq.fps.num,
        seq.fps.den
    )?;
    let n = seq.width() * seq.height();
    for f in seq.frames() {
        out.write_all(b"FRAME\n")?;
        if f.channels == 1 {
            out.write_all(&f.data)?;
            out.write_all(&vec![128u8; 2 * n])?;
        } else {
            let mut y = Vec::with_capacity(n);
            let mut cb = Vec::with_capacity(n);
            let mut cr = Vec::with_capacity(n);
            for p in f.data.chunks_exact(3) {
                let (r, g, b) = (p[0] as f64, p[1] as f64, p[2] as f64);
                y.push(luma601(p[0], p[1], p[2]));
                cb.push((128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b).round().clamp(0.0, 255.0) as u8);
                cr.push((128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b).round().clamp(0.0, 255.0) as u8);
            }
            out.write_all(&y)?;
            out.write_all(&cb)?;
            out.write_all(&cr)?;
        }
    }
    out.flush()
}
