use std::path::Path;

use crate::error::{Error, Result};

/// Reads a mono PCM WAV file (16-bit integer or 32-bit float) as samples in
/// `[-1, 1]` together with its sample rate.
pub fn read_wav_mono(path: &Path) -> Result<(Vec<f64>, f64)> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::domain(format!("expected mono audio, got {} channels", spec.channels)));
    }
    let samples = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<Result<Vec<_>, _>>()?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<Vec<_>, _>>()?,
        (fmt, bits) => {
            return Err(Error::domain(format!("unsupported WAV encoding {fmt:?}/{bits} bit")));
        }
    };
    Ok((samples, spec.sample_rate as f64))
}

/// Writes mono 32-bit float PCM.
pub fn write_wav_mono(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &s in samples {
        writer.write_sample(s as f32)?;
    }
    writer.finalize()?;
    Ok(())
}
