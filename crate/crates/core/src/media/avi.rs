//! Minimal AVI (RIFF) reader/writer for the two payloads this toolkit
//! uses: uncompressed bottom-up BGR24 (`00db` chunks, BI_RGB) and H.264
//! access units (`00dc` chunks, fourcc `H264`). Encoding parameters are
//! carried in a standard `INFO/ICMT` comment chunk.

use super::{MediaError, Result};
use std::io::Write;
use std::path::Path;

const AVIF_HASINDEX: u32 = 0x0000_0010;
const AVIIF_KEYFRAME: u32 = 0x0000_0010;

/// Payload stored in the container.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VideoCodec {
    /// Uncompressed 24-bit RGB (stored as bottom-up BGR rows).
    RawRgb,
    /// H.264 Annex-B access units, one per chunk.
    H264,
}

impl VideoCodec {
    fn handler(&self) -> &'static [u8; 4] {
        match self {
            VideoCodec::RawRgb => b"DIB ",
            VideoCodec::H264 => b"H264",
        }
    }

    fn compression(&self) -> u32 {
        match self {
            VideoCodec::RawRgb => 0,
            VideoCodec::H264 => u32::from_le_bytes(*b"H264"),
        }
    }
}

/// One stored frame: either packed RGB pixels or an encoded access unit.
#[derive(Debug, Clone)]
pub struct StoredFrame {
    pub data: Vec<u8>,
    pub keyframe: bool,
}

/// Parsed container contents.
#[derive(Debug, Clone)]
pub struct AviVideo {
    pub codec: VideoCodec,
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    pub comment: Option<String>,
    pub frames: Vec<StoredFrame>,
}

/// Header-level metadata, recovered without touching frame payloads.
#[derive(Debug, Clone, PartialEq)]
pub struct AviMeta {
    pub codec: VideoCodec,
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    pub frame_count: u32,
    pub comment: Option<String>,
}

fn row_stride(width: u32) -> usize {
    ((width as usize * 3) + 3) & !3
}

/// Packed RGB (top-down, RGBRGB...) to a padded bottom-up BGR DIB row block.
pub fn rgb_to_dib(rgb: &[u8], width: u32, height: u32) -> Vec<u8> {
    let (w, h) = (width as usize, height as usize);
    assert_eq!(rgb.len(), w * h * 3, "rgb buffer size");
    let stride = row_stride(width);
    let mut out = vec![0u8; stride * h];
    for y in 0..h {
        let src_row = &rgb[y * w * 3..(y + 1) * w * 3];
        let dst_row = &mut out[(h - 1 - y) * stride..(h - 1 - y) * stride + w * 3];
        for x in 0..w {
            dst_row[x * 3] = src_row[x * 3 + 2];
            dst_row[x * 3 + 1] = src_row[x * 3 + 1];
            dst_row[x * 3 + 2] = src_row[x * 3];
        }
    }
    out
}

/// Inverse of [`rgb_to_dib`].
pub fn dib_to_rgb(dib: &[u8], width: u32, height: u32) -> Result<Vec<u8>> {
    let (w, h) = (width as usize, height as usize);
    let stride = row_stride(width);
    if dib.len() != stride * h {
        return Err(MediaError::InvalidFrame(format!(
            "DIB block is {} bytes, expected {}",
            dib.len(),
            stride * h
        )));
    }
    let mut rgb = vec![0u8; w * h * 3];
    for y in 0..h {
        let src_row = &dib[(h - 1 - y) * stride..(h - 1 - y) * stride + w * 3];
        let dst_row = &mut rgb[y * w * 3..(y + 1) * w * 3];
        for x in 0..w {
            dst_row[x * 3] = src_row[x * 3 + 2];
            dst_row[x * 3 + 1] = src_row[x * 3 + 1];
            dst_row[x * 3 + 2] = src_row[x * 3];
        }
    }
    Ok(rgb)
}

struct ChunkWriter {
    buf: Vec<u8>,
}

impl ChunkWriter {
    fn new() -> Self {
        ChunkWriter { buf: Vec::new() }
    }

    fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn fourcc(&mut self, f: &[u8; 4]) {
        self.buf.extend_from_slice(f);
    }

    fn chunk(&mut self, id: &[u8; 4], body: &[u8]) {
        self.fourcc(id);
        self.u32(body.len() as u32);
        self.buf.extend_from_slice(body);
        if body.len() % 2 == 1 {
            self.buf.push(0);
        }
    }

    fn list(&mut self, kind: &[u8; 4], body: &[u8]) {
        self.fourcc(b"LIST");
        self.u32((body.len() + 4) as u32);
        self.fourcc(kind);
        self.buf.extend_from_slice(body);
    }
}

/// Fraction used for the stream header clock; fps is stored as
/// `rate/scale` with `scale = 1000`.
fn fps_fraction(fps: f64) -> (u32, u32) {
    let scale = 1000u32;
    let rate = (fps * scale as f64).round().max(1.0) as u32;
    (rate, scale)
}

/// Writes a complete AVI file.
pub fn write_avi(path: &Path, video: &AviVideo) -> Result<()> {
    let frame_count = video.frames.len() as u32;
    let (rate, scale) = fps_fraction(video.fps);
    let max_frame = video.frames.iter().map(|f| f.data.len()).max().unwrap_or(0) as u32;

    let mut strh = ChunkWriter::new();
    strh.fourcc(b"vids");
    strh.fourcc(video.codec.handler());
    strh.u32(0); // flags
    strh.u16(0); // priority
    strh.u16(0); // language
    strh.u32(0); // initial frames
    strh.u32(scale);
    strh.u32(rate);
    strh.u32(0); // start
    strh.u32(frame_count);
    strh.u32(max_frame);
    strh.u32(u32::MAX); // quality: default
    strh.u32(0); // sample size
    strh.u16(0);
    strh.u16(0);
    strh.u16(video.width as u16);
    strh.u16(video.height as u16);

    let image_size = match video.codec {
        VideoCodec::RawRgb => (row_stride(video.width) * video.height as usize) as u32,
        VideoCodec::H264 => 0,
    };
    let mut strf = ChunkWriter::new();
    strf.u32(40);
    strf.u32(video.width);
    strf.u32(video.height);
    strf.u16(1);
    strf.u16(24);
    strf.u32(video.codec.compression());
    strf.u32(image_size);
    strf.u32(0);
    strf.u32(0);
    strf.u32(0);
    strf.u32(0);

    let mut strl = ChunkWriter::new();
    strl.chunk(b"strh", &strh.buf);
    strl.chunk(b"strf", &strf.buf);

    let micros_per_frame = if video.fps > 0.0 {
        (1_000_000.0 / video.fps).round() as u32
    } else {
        0
    };
    let mut avih = ChunkWriter::new();
    avih.u32(micros_per_frame);
    avih.u32((max_frame as f64 * video.fps) as u32);
    avih.u32(0); // padding granularity
    avih.u32(AVIF_HASINDEX);
    avih.u32(frame_count);
    avih.u32(0); // initial frames
    avih.u32(1); // streams
    avih.u32(max_frame);
    avih.u32(video.width);
    avih.u32(video.height);
    for _ in 0..4 {
        avih.u32(0);
    }

    let mut hdrl = ChunkWriter::new();
    hdrl.chunk(b"avih", &avih.buf);
    hdrl.list(b"strl", &strl.buf);

    let chunk_id: &[u8; 4] = match video.codec {
        VideoCodec::RawRgb => b"00db",
        VideoCodec::H264 => b"00dc",
    };
    let mut movi = ChunkWriter::new();
    let mut index = ChunkWriter::new();
    for frame in &video.frames {
        // idx1 offsets are relative to the position of the 'movi' fourcc.
        let offset = movi.buf.len() as u32 + 4;
        movi.chunk(chunk_id, &frame.data);
        index.fourcc(chunk_id);
        index.u32(if frame.keyframe { AVIIF_KEYFRAME } else { 0 });
        index.u32(offset);
        index.u32(frame.data.len() as u32);
    }

    let mut riff = ChunkWriter::new();
    riff.list(b"hdrl", &hdrl.buf);
    if let Some(comment) = &video.comment {
        let mut icmt = comment.as_bytes().to_vec();
        icmt.push(0);
        let mut info = ChunkWriter::new();
        info.chunk(b"ICMT", &icmt);
        riff.list(b"INFO", &info.buf);
    }
    riff.list(b"movi", &movi.buf);
    riff.chunk(b"idx1", &index.buf);

    let io_err = |source| MediaError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io_err)?;
    }
    let mut file = std::fs::File::create(path).map_err(io_err)?;
    file.write_all(b"RIFF").map_err(io_err)?;
    file.write_all(&((riff.buf.len() + 4) as u32).to_le_bytes())
        .map_err(io_err)?;
    file.write_all(b"AVI ").map_err(io_err)?;
    file.write_all(&riff.buf).map_err(io_err)?;
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn fail<T>(&self, reason: impl Into<String>) -> Result<T> {
        Err(MediaError::Container {
            path: self.path.to_path_buf(),
            reason: reason.into(),
        })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return self.fail(format!("truncated at byte {}", self.pos));
        }
        let slice = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn fourcc(&mut self) -> Result<[u8; 4]> {
        let s = self.take(4)?;
        Ok([s[0], s[1], s[2], s[3]])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.fourcc()?))
    }
}

fn read_u16(buf: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([buf[at], buf[at + 1]])
}

fn read_u32(buf: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([buf[at], buf[at + 1], buf[at + 2], buf[at + 3]])
}

struct ParsedAvi<'a> {
    meta: AviMeta,
    chunks: Vec<(&'a [u8], bool)>,
}

fn parse_borrowed<'a>(path: &'a Path, data: &'a [u8]) -> Result<ParsedAvi<'a>> {
    let mut cur = Cursor { data, pos: 0, path };
    if cur.fourcc()? != *b"RIFF" {
        return cur.fail("not a RIFF file");
    }
    let riff_size = cur.u32()? as usize;
    if cur.fourcc()? != *b"AVI " {
        return cur.fail("not an AVI file");
    }
    let end = (8 + riff_size).min(data.len());

    let mut codec = None;
    let mut width = 0u32;
    let mut height = 0u32;
    let mut fps = 0.0f64;
    let mut declared_frames = None;
    let mut comment = None;
    let mut chunks: Vec<(&[u8], bool)> = Vec::new();

    while cur.pos + 8 <= end {
        let id = cur.fourcc()?;
        let size = cur.u32()? as usize;
        if &id == b"LIST" {
            let kind = cur.fourcc()?;
            let body = cur.take(size - 4)?;
            match &kind {
                b"hdrl" => {
                    parse_hdrl(path, body, &mut codec, &mut width, &mut height, &mut fps, &mut declared_frames)?;
                }
                b"INFO" => {
                    comment = parse_info(body);
                }
                b"movi" => {
                    parse_movi(path, body, &mut chunks)?;
                }
                _ => {}
            }
        } else {
            let body = cur.take(size)?;
            let _ = body; // idx1 and unknown chunks are skipped
        }
        if size % 2 == 1 {
            let _ = cur.take(1);
        }
    }

    let codec = match codec {
        Some(c) => c,
        None => {
            return Err(MediaError::Container {
                path: path.to_path_buf(),
                reason: "missing stream header".into(),
            })
        }
    };
    let frame_count = chunks.len() as u32;
    if let Some(declared) = declared_frames {
        if declared != frame_count {
            return Err(MediaError::Container {
                path: path.to_path_buf(),
                reason: format!("header declares {declared} frames, found {frame_count} chunks"),
            });
        }
    }
    Ok(ParsedAvi {
        meta: AviMeta {
            codec,
            width,
            height,
            fps,
            frame_count,
            comment,
        },
        chunks,
    })
}

#[allow(clippy::too_many_arguments)]
fn parse_hdrl(
    path: &Path,
    body: &[u8],
    codec: &mut Option<VideoCodec>,
    width: &mut u32,
    height: &mut u32,
    fps: &mut f64,
    declared_frames: &mut Option<u32>,
) -> Result<()> {
    let mut cur = Cursor {
        data: body,
        pos: 0,
        path,
    };
    while cur.pos + 8 <= body.len() {
        let id = cur.fourcc()?;
        let size = cur.u32()? as usize;
        if &id == b"LIST" {
            let kind = cur.fourcc()?;
            let list_body = cur.take(size - 4)?;
            if &kind == b"strl" {
                parse_strl(path, list_body, codec, width, height, fps, declared_frames)?;
            }
        } else {
            cur.take(size)?;
        }
        if size % 2 == 1 {
            let _ = cur.take(1);
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn parse_strl(
    path: &Path,
    body: &[u8],
    codec: &mut Option<VideoCodec>,
    width: &mut u32,
    height: &mut u32,
    fps: &mut f64,
    declared_frames: &mut Option<u32>,
) -> Result<()> {
    let mut cur = Cursor {
        data: body,
        pos: 0,
        path,
    };
    let mut is_video = false;
    while cur.pos + 8 <= body.len() {
        let id = cur.fourcc()?;
        let size = cur.u32()? as usize;
        let chunk = cur.take(size)?;
        match &id {
            b"strh" if chunk.len() >= 56 => {
                is_video = &chunk[0..4] == b"vids";
                if is_video {
                    let scale = read_u32(chunk, 20);
                    let rate = read_u32(chunk, 24);
                    if scale > 0 {
                        *fps = rate as f64 / scale as f64;
                    }
                    *declared_frames = Some(read_u32(chunk, 32));
                }
            }
            b"strf" if is_video && chunk.len() >= 40 => {
                *width = read_u32(chunk, 4);
                *height = read_u32(chunk, 8);
                let compression = read_u32(chunk, 16);
                let bit_count = read_u16(chunk, 14);
                *codec = match compression {
                    0 if bit_count == 24 => Some(VideoCodec::RawRgb),
                    c if c == u32::from_le_bytes(*b"H264") || c == u32::from_le_bytes(*b"h264") => {
                        Some(VideoCodec::H264)
                    }
                    other => {
                        return Err(MediaError::Container {
                            path: path.to_path_buf(),
                            reason: format!("unsupported codec fourcc 0x{other:08x}"),
                        })
                    }
                };
            }
            _ => {}
        }
        if size % 2 == 1 {
            let _ = cur.take(1);
        }
    }
    Ok(())
}

fn parse_info(body: &[u8]) -> Option<String> {
    let mut pos = 0usize;
    while pos + 8 <= body.len() {
        let id = &body[pos..pos + 4];
        let size = read_u32(body, pos + 4) as usize;
        let start = pos + 8;
        if start + size > body.len() {
            return None;
        }
        if id == b"ICMT" {
            let mut text = &body[start..start + size];
            while let Some((&0, rest)) = text.split_last() {
                text = rest;
            }
            return Some(String::from_utf8_lossy(text).into_owned());
        }
        pos = start + size + (size % 2);
    }
    None
}

fn parse_movi<'a>(path: &Path, body: &'a [u8], chunks: &mut Vec<(&'a [u8], bool)>) -> Result<()> {
    let mut pos = 0usize;
    while pos + 8 <= body.len() {
        let id = &body[pos..pos + 4];
        let size = read_u32(body, pos + 4) as usize;
        let start = pos + 8;
        if start + size > body.len() {
            return Err(MediaError::Container {
                path: path.to_path_buf(),
                reason: format!("movi chunk overruns file at byte {pos}"),
            });
        }
        if id == b"00db" || id == b"00dc" {
            chunks.push((&body[start..start + size], id == b"00db"));
        }
        pos = start + size + (size % 2);
    }
    Ok(())
}

/// Reads the whole container including frame payloads.
pub fn read_avi(path: &Path) -> Result<AviVideo> {
    let data = std::fs::read(path).map_err(|source| MediaError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let parsed = parse_borrowed(path, &data)?;
    let frames = parsed
        .chunks
        .iter()
        .map(|(payload, is_db)| StoredFrame {
            data: payload.to_vec(),
            keyframe: *is_db,
        })
        .collect();
    Ok(AviVideo {
        codec: parsed.meta.codec,
        width: parsed.meta.width,
        height: parsed.meta.height,
        fps: parsed.meta.fps,
        comment: parsed.meta.comment,
        frames,
    })
}

/// Reads header metadata and counts frame chunks without copying payloads.
pub fn probe_avi(path: &Path) -> Result<AviMeta> {
    let data = std::fs::read(path).map_err(|source| MediaError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(parse_borrowed(path, &data)?.meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_rgb(width: u32, height: u32, tint: u8) -> Vec<u8> {
        let mut rgb = vec![0u8; (width * height * 3) as usize];
        for y in 0..height {
            for x in 0..width {
                let i = ((y * width + x) * 3) as usize;
                rgb[i] = (x % 256) as u8;
                rgb[i + 1] = (y % 256) as u8;
                rgb[i + 2] = tint;
            }
        }
        rgb
    }

    #[test]
    fn dib_round_trip_is_lossless() {
        // 30px width gives a 90-byte row, padded to 92.
        let rgb = test_rgb(30, 17, 7);
        let dib = rgb_to_dib(&rgb, 30, 17);
        assert_eq!(dib.len(), 92 * 17);
        assert_eq!(dib_to_rgb(&dib, 30, 17).unwrap(), rgb);
    }

    #[test]
    fn avi_write_read_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clip.avi");
        let frames: Vec<StoredFrame> = (0..5)
            .map(|i| StoredFrame {
                data: rgb_to_dib(&test_rgb(32, 16, i as u8), 32, 16),
                keyframe: true,
            })
            .collect();
        let video = AviVideo {
            codec: VideoCodec::RawRgb,
            width: 32,
            height: 16,
            fps: 10.0,
            comment: Some("codec=rawrgb".into()),
            frames,
        };
        write_avi(&path, &video).unwrap();

        let meta = probe_avi(&path).unwrap();
        assert_eq!(meta.codec, VideoCodec::RawRgb);
        assert_eq!((meta.width, meta.height), (32, 16));
        assert_eq!(meta.frame_count, 5);
        assert!((meta.fps - 10.0).abs() < 1e-9);
        assert_eq!(meta.comment.as_deref(), Some("codec=rawrgb"));

        let read = read_avi(&path).unwrap();
        assert_eq!(read.frames.len(), 5);
        for (i, frame) in read.frames.iter().enumerate() {
            let rgb = dib_to_rgb(&frame.data, 32, 16).unwrap();
            assert_eq!(rgb, test_rgb(32, 16, i as u8));
        }
    }

    #[test]
    fn truncated_file_is_a_container_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.avi");
        std::fs::write(&path, b"RIFF\x10\x00\x00\x00AVI x").unwrap();
        assert!(matches!(
            probe_avi(&path),
            Err(MediaError::Container { .. })
        ));
    }

    #[test]
    fn odd_sized_h264_chunks_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.avi");
        let video = AviVideo {
            codec: VideoCodec::H264,
            width: 64,
            height: 32,
            fps: 30.0,
            comment: None,
            frames: vec![
                StoredFrame {
                    data: vec![1, 2, 3],
                    keyframe: true,
                },
                StoredFrame {
                    data: vec![4, 5, 6, 7, 8],
                    keyframe: false,
                },
            ],
        };
        write_avi(&path, &video).unwrap();
        let read = read_avi(&path).unwrap();
        assert_eq!(read.codec, VideoCodec::H264);
        assert_eq!(read.frames[0].data, vec![1, 2, 3]);
        assert_eq!(read.frames[1].data, vec![4, 5, 6, 7, 8]);
    }
}
