use super::Sample;
use crate::error::{HarError, Result};

fn window_geometry(rate: f64, length_s: f64, overlap: f64) -> Result<(usize, usize)> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(HarError::InvalidArgument(format!("rate must be positive, got {rate}")));
    }
    if !(length_s > 0.0 && length_s.is_finite()) {
        return Err(HarError::InvalidArgument(format!(
            "window length must be positive, got {length_s}"
        )));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(HarError::InvalidArgument(format!(
            "overlap must lie in [0, 1), got {overlap}"
        )));
    }
    let width = (length_s * rate).round() as usize;
    if width == 0 {
        return Err(HarError::InvalidArgument("window shorter than one sample".into()));
    }
    let stride = ((length_s * rate * (1.0 - overlap)).round() as usize).max(1);
    Ok((width, stride))
}

/// Cuts a continuous recording into fixed-length windows.
///
/// Windows hold `round(length_s * rate)` samples and start every
/// `round(length_s * rate * (1 - overlap))` samples; the trailing partial
/// window is dropped. A recording shorter than one window yields nothing.
pub fn window_stream(
    recording: &[Sample],
    rate: f64,
    length_s: f64,
    overlap: f64,
) -> Result<Vec<Vec<Sample>>> {
    let (width, stride) = window_geometry(rate, length_s, overlap)?;
    if recording.len() < width {
        return Ok(Vec::new());
    }
    Ok((0..=recording.len() - width)
        .step_by(stride)
        .map(|start| recording[start..start + width].to_vec())
        .collect())
}

/// Linear-interpolation resampling from `src_rate` to `dst_rate`.
///
/// Output sample `k` sits at time `k / dst_rate`; samples are produced while
/// that time lies within the source span. The output span falls short of the
/// source span by less than one output period, which is within one source
/// period whenever `dst_rate >= src_rate`.
pub fn resample(signal: &[Sample], src_rate: f64, dst_rate: f64) -> Result<Vec<Sample>> {
    if signal.is_empty() {
        return Err(HarError::EmptyInput("signal"));
    }
    if !(src_rate > 0.0 && dst_rate > 0.0 && src_rate.is_finite() && dst_rate.is_finite()) {
        return Err(HarError::InvalidArgument(format!(
            "rates must be positive, got {src_rate} -> {dst_rate}"
        )));
    }
    if src_rate == dst_rate {
        return Ok(signal.to_vec());
    }
    let last = (signal.len() - 1) as f64;
    let count = (last * dst_rate / src_rate).floor() as usize + 1;
    Ok((0..count)
        .map(|k| {
            let pos = (k as f64 * src_rate / dst_rate).min(last);
            let lo = pos.floor() as usize;
            let frac = pos - lo as f64;
            if frac == 0.0 || lo + 1 >= signal.len() {
                return signal[lo];
            }
            let (a, b) = (signal[lo], signal[lo + 1]);
            [
                a[0] + (b[0] - a[0]) * frac,
                a[1] + (b[1] - a[1]) * frac,
                a[2] + (b[2] - a[2]) * frac,
            ]
        })
        .collect())
}
