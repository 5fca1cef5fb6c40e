//! H.264 compression harness built on OpenH264.
//!
//! "Rate parameter" here is the H.264 quantisation parameter: the encoder
//! runs with its QP range pinned to a single value (23 for HQ, 40 for LQ),
//! frame skipping disabled and a single thread, so output depends only on
//! input pixels and the level.

use super::avi::{self, AviVideo, StoredFrame, VideoCodec};
use super::yuv;
use super::{MediaError, QualityLevel, Result};
use crate::dataset::{EncodingParams, Quality, VideoRecord};
use openh264::decoder::Decoder;
use openh264::encoder::{
    BitRate, Encoder, EncoderConfig, FrameRate, FrameType, QpRange, RateControlMode,
};
use openh264::formats::{YUVBuffer, YUVSource};
use openh264::OpenH264API;
use std::path::Path;

const PIXEL_FORMAT: &str = "yuv420p";
// Cap well under the encoder's validation limit; with QP pinned the rate
// control never reaches it on desk-scale content.
const BITRATE_CAP_BPS: u32 = 50_000_000;

pub(crate) fn encoding_params(rate_parameter: u8) -> EncodingParams {
    EncodingParams {
        codec: "h264".into(),
        rate_mode: "constant_qp".into(),
        rate_value: Some(rate_parameter),
        pixel_format: PIXEL_FORMAT.into(),
    }
}

pub(crate) fn encoding_comment(params: &EncodingParams) -> String {
    format!(
        "codec={};rate_mode={};rate_value={};pixel_format={}",
        params.codec,
        params.rate_mode,
        params.rate_value.map_or_else(|| "none".into(), |v| v.to_string()),
        params.pixel_format
    )
}

pub(crate) fn parse_encoding_comment(comment: &str) -> Option<EncodingParams> {
    let mut codec = None;
    let mut rate_mode = None;
    let mut rate_value = None;
    let mut pixel_format = None;
    for part in comment.split(';') {
        let (key, value) = part.split_once('=')?;
        match key {
            "codec" => codec = Some(value.to_string()),
            "rate_mode" => rate_mode = Some(value.to_string()),
            "rate_value" => rate_value = Some(value.parse::<u8>().ok()),
            "pixel_format" => pixel_format = Some(value.to_string()),
            _ => {}
        }
    }
    Some(EncodingParams {
        codec: codec?,
        rate_mode: rate_mode?,
        rate_value: rate_value.flatten(),
        pixel_format: pixel_format?,
    })
}

/// Encodes packed RGB frames into one H.264 access unit per frame.
pub(crate) fn encode_h264_frames(
    frames: &[Vec<u8>],
    width: usize,
    height: usize,
    fps: f64,
    rate_parameter: u8,
) -> Result<Vec<StoredFrame>> {
    let config = EncoderConfig::new()
        .rate_control_mode(RateControlMode::Quality)
        .qp(QpRange::new(rate_parameter, rate_parameter))
        .skip_frames(false)
        .bitrate(BitRate::from_bps(BITRATE_CAP_BPS))
        .max_frame_rate(FrameRate::from_hz(fps.max(1.0) as f32))
        .num_threads(1);
    let mut encoder = Encoder::with_api_config(OpenH264API::from_source(), config)
        .map_err(|e| MediaError::Encoder(format!("encoder init failed: {e}")))?;

    let mut out = Vec::with_capacity(frames.len());
    for (index, rgb) in frames.iter().enumerate() {
        if rgb.len() != width * height * 3 {
            return Err(MediaError::InvalidFrame(format!(
                "frame {index} has {} bytes, expected {}",
                rgb.len(),
                width * height * 3
            )));
        }
        let i420 = yuv::rgb_to_i420(rgb, width, height);
        let buffer = YUVBuffer::from_vec(i420, width, height);
        let bitstream = encoder.encode(&buffer).map_err(|e| {
            MediaError::Encoder(format!(
                "encode failed at frame {index} (qp {rate_parameter}): {e}"
            ))
        })?;
        let keyframe = matches!(bitstream.frame_type(), FrameType::IDR | FrameType::I);
        out.push(StoredFrame {
            data: bitstream.to_vec(),
            keyframe,
        });
    }
    Ok(out)
}

/// Decodes H.264 access units back into packed RGB frames.
pub(crate) fn decode_h264_frames(
    units: &[StoredFrame],
    width: usize,
    height: usize,
) -> Result<Vec<Vec<u8>>> {
    let mut decoder = Decoder::new()
        .map_err(|e| MediaError::Decode {
            frame_index: 0,
            reason: format!("decoder init failed: {e}"),
        })?;
    let mut frames = Vec::with_capacity(units.len());
    for (index, unit) in units.iter().enumerate() {
        let decoded = decoder.decode(&unit.data).map_err(|e| MediaError::Decode {
            frame_index: index as u32,
            reason: e.to_string(),
        })?;
        if let Some(yuv) = decoded {
            let rgb = yuv_to_rgb_checked(&yuv, width, height, frames.len() as u32)?;
            frames.push(rgb);
        }
    }
    let remaining = decoder.flush_remaining().map_err(|e| MediaError::Decode {
        frame_index: units.len().saturating_sub(1) as u32,
        reason: format!("flush failed: {e}"),
    })?;
    for yuv in &remaining {
        let rgb = yuv_to_rgb_checked(yuv, width, height, frames.len() as u32)?;
        frames.push(rgb);
    }
    Ok(frames)
}

fn yuv_to_rgb_checked(
    yuv: &openh264::decoder::DecodedYUV<'_>,
    width: usize,
    height: usize,
    frame_index: u32,
) -> Result<Vec<u8>> {
    let (w, h) = yuv.dimensions();
    let (sy, su, sv) = yuv.strides();
    if (w, h) != (width, height) {
        return Err(MediaError::Decode {
            frame_index,
            reason: format!("decoded {w}x{h}, expected {width}x{height}"),
        });
    }
    Ok(yuv::i420_to_rgb(yuv.y(), yuv.u(), yuv.v(), w, h, sy, su, sv))
}

/// Reads any supported video and returns its frames as packed RGB.
pub(crate) fn read_rgb_frames(path: &Path) -> Result<(AviVideo, Vec<Vec<u8>>)> {
    let video = avi::read_avi(path)?;
    let (w, h) = (video.width as usize, video.height as usize);
    let frames = match video.codec {
        VideoCodec::RawRgb => video
            .frames
            .iter()
            .map(|f| avi::dib_to_rgb(&f.data, video.width, video.height))
            .collect::<Result<Vec<_>>>()?,
        VideoCodec::H264 => decode_h264_frames(&video.frames, w, h)?,
    };
    Ok((video, frames))
}

/// Compresses a video file to H.264 at the level's rate parameter.
///
/// The output preserves resolution, frame rate and frame count (verified
/// by decoding the result). Returns the verified output metadata.
pub fn compress_file(input: &Path, level: QualityLevel, output: &Path) -> Result<EncodingParams> {
    let rate_parameter = level.rate_parameter.ok_or(MediaError::RawNotEncodable)?;
    let (source, frames) = read_rgb_frames(input)?;
    let (w, h) = (source.width as usize, source.height as usize);
    let encoded = encode_h264_frames(&frames, w, h, source.fps, rate_parameter)?;
    let params = encoding_params(rate_parameter);
    let out_video = AviVideo {
        codec: VideoCodec::H264,
        width: source.width,
        height: source.height,
        fps: source.fps,
        comment: Some(encoding_comment(&params)),
        frames: encoded,
    };
    avi::write_avi(output, &out_video)?;

    let (check, decoded) = read_rgb_frames(output)?;
    if decoded.len() != frames.len() {
        return Err(MediaError::FrameCountMismatch {
            expected: frames.len() as u32,
            actual: decoded.len() as u32,
        });
    }
    if (check.width, check.height) != (source.width, source.height) {
        return Err(MediaError::Container {
            path: output.to_path_buf(),
            reason: format!(
                "output resolution {}x{} differs from input {}x{}",
                check.width, check.height, source.width, source.height
            ),
        });
    }
    Ok(params)
}

/// Record-level wrapper around [`compress_file`]: provenance tags carry
/// over, quality and encoding metadata are replaced.
pub fn compress_video(
    record: &VideoRecord,
    level: QualityLevel,
    output: &Path,
) -> Result<VideoRecord> {
    if level.name == Quality::Raw {
        return Err(MediaError::RawNotEncodable);
    }
    let params = compress_file(&record.path, level, output)?;
    Ok(VideoRecord {
        video_id: format!("{}:{}", record.video_id, level.name.dir_name()),
        path: output.to_path_buf(),
        quality: level.name,
        encoding: Some(params),
        ..record.clone()
    })
}
