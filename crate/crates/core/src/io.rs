//! Netpbm images, masks, kernels, energy traces, and deterministic fixtures.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::dg::{FlowTrace, TraceRow};
use crate::error::{Error, Result};
use crate::functionals::Mask;
use crate::grid::{ImageGrid, Kernel};

/// How stored samples map to grid values.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scaling {
    /// `v / maxval`, so data lies in `[0, 1]`.
    Unit,
    /// `255 v / maxval`, so data lies in `[0, 255]`.
    Byte,
}

impl Scaling {
    fn range(self) -> f64 {
        match self {
            Scaling::Unit => 1.0,
            Scaling::Byte => 255.0,
        }
    }
}

/// Decoded Netpbm payload: raw integer samples, channels interleaved.
struct Pnm {
    width: usize,
    height: usize,
    channels: usize,
    maxval: u32,
    samples: Vec<u32>,
}

fn image_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self) -> Option<u32> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()?
            .parse()
            .ok()
    }
}

fn decode_pnm(path: &Path, bytes: &[u8]) -> Result<Pnm> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(image_err(path, "missing Netpbm magic number"));
    }
    let (channels, binary) = match bytes[1] {
        b'2' => (1, false),
        b'5' => (1, true),
        b'3' => (3, false),
        b'6' => (3, true),
        m => return Err(image_err(path, format!("unsupported magic P{}", m as char))),
    };
    let mut h = Header { bytes, pos: 2 };
    let width = h.number().ok_or_else(|| image_err(path, "bad width"))? as usize;
    let height = h.number().ok_or_else(|| image_err(path, "bad height"))? as usize;
    let maxval = h.number().ok_or_else(|| image_err(path, "bad maxval"))?;
    if width == 0 || height == 0 {
        return Err(image_err(path, "empty image"));
    }
    if maxval != 255 && maxval != 65535 {
        return Err(image_err(
            path,
            format!("maxval must be 255 or 65535, got {maxval}"),
        ));
    }
    let count = width * height * channels;
    let samples = if binary {
        // Exactly one whitespace byte separates the header from the payload.
        if h.pos >= bytes.len() || !bytes[h.pos].is_ascii_whitespace() {
            return Err(image_err(path, "missing whitespace after header"));
        }
        let payload = &bytes[h.pos + 1..];
        let wide = maxval > 255;
        let need = count * if wide { 2 } else { 1 };
        if payload.len() < need {
            return Err(image_err(
                path,
                format!(
                    "truncated payload: need {need} bytes, found {}",
                    payload.len()
                ),
            ));
        }
        if wide {
            payload[..need]
                .chunks_exact(2)
                .map(|b| u16::from_be_bytes([b[0], b[1]]) as u32)
                .collect()
        } else {
            payload[..need].iter().map(|&b| b as u32).collect()
        }
    } else {
        let mut v = Vec::with_capacity(count);
        for _ in 0..count {
            let s = h
                .number()
                .ok_or_else(|| image_err(path, "truncated or malformed ASCII payload"))?;
            v.push(s);
        }
        v
    };
    if let Some(bad) = samples.iter().find(|&&s| s > maxval) {
        return Err(image_err(
            path,
            format!("sample {bad} exceeds maxval {maxval}"),
        ));
    }
    Ok(Pnm {
        width,
        height,
        channels,
        maxval,
        samples,
    })
}

fn read_pnm(path: &Path) -> Result<Pnm> {
    let bytes = fs::read(path)?;
    decode_pnm(path, &bytes)
}

/// Reads a PGM (grayscale) or PPM (RGB) file. Image column `c`, row `r` maps
/// to grid pixel `(i, j) = (c, r)`, so the flat layout is the raster order.
pub fn read_image(path: impl AsRef<Path>, scaling: Scaling) -> Result<ImageGrid> {
    let path = path.as_ref();
    let pnm = read_pnm(path)?;
    let plane = pnm.width * pnm.height;
    let scale = scaling.range() / pnm.maxval as f64;
    let mut data = vec![0.0; plane * pnm.channels];
    for (k, &s) in pnm.samples.iter().enumerate() {
        let (p, c) = (k / pnm.channels, k % pnm.channels);
        data[c * plane + p] = s as f64 * scale;
    }
    ImageGrid::from_vec(pnm.width, pnm.height, pnm.channels, data)
}

/// Writes binary PGM (1 channel) or PPM (3 channels). Values are clamped to the
/// scaling range and rounded to the nearest of `maxval + 1` levels.
pub fn write_image(
    path: impl AsRef<Path>,
    u: &ImageGrid,
    maxval: u32,
    scaling: Scaling,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_image(u, maxval, scaling).map_err(|m| image_err(path, m))?;
    fs::write(path, bytes)?;
    Ok(())
}

fn encode_image(
    u: &ImageGrid,
    maxval: u32,
    scaling: Scaling,
) -> std::result::Result<Vec<u8>, String> {
    if maxval != 255 && maxval != 65535 {
        return Err(format!("maxval must be 255 or 65535, got {maxval}"));
    }
    let magic = match u.channels() {
        1 => "P5",
        3 => "P6",
        c => return Err(format!("cannot store {c} channels in PGM/PPM")),
    };
    let mut out = format!("{magic}\n{} {}\n{maxval}\n", u.nx(), u.ny()).into_bytes();
    let plane = u.plane_len();
    let range = scaling.range();
    for p in 0..plane {
        for c in 0..u.channels() {
            let v = (u.as_slice()[c * plane + p] / range).clamp(0.0, 1.0);
            let q = (v * maxval as f64).round() as u32;
            if maxval > 255 {
                out.extend_from_slice(&(q as u16).to_be_bytes());
            } else {
                out.push(q as u8);
            }
        }
    }
    Ok(out)
}

/// Reads an inpainting mask from a PGM: any nonzero sample marks a pixel of
/// the inpainting domain.
pub fn read_mask(path: impl AsRef<Path>) -> Result<Mask> {
    let path = path.as_ref();
    let pnm = read_pnm(path)?;
    if pnm.channels != 1 {
        return Err(image_err(path, "mask must be a grayscale PGM"));
    }
    Mask::new(
        pnm.width,
        pnm.height,
        pnm.samples.iter().map(|&s| s > 0).collect(),
    )
}

pub fn write_mask(path: impl AsRef<Path>, mask: &Mask) -> Result<()> {
    let (nx, ny) = mask.shape();
    let data = mask
        .as_slice()
        .iter()
        .map(|&b| if b { 1.0 } else { 0.0 })
        .collect();
    write_image(
        path,
        &ImageGrid::from_vec(nx, ny, 1, data)?,
        255,
        Scaling::Unit,
    )
}

/// Reads a kernel from whitespace-separated rows of numbers. Text rows run
/// along y, columns along x. Both extents must be odd.
pub fn read_kernel(path: impl AsRef<Path>) -> Result<Kernel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| image_err(path, format!("bad kernel entry {t:?}")))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let ky = rows.len();
    let kx = rows.first().map_or(0, Vec::len);
    if ky == 0 || kx == 0 || rows.iter().any(|r| r.len() != kx) {
        return Err(image_err(
            path,
            "kernel rows must be non-empty and equally long",
        ));
    }
    Kernel::new(kx, ky, rows.into_iter().flatten().collect())
}

/// Reads a trace file.
pub fn read_trace(path: impl AsRef<Path>) -> Result<FlowTrace> {
    let text = fs::read_to_string(path)?;
    parse_trace(&text)
}

pub const TRACE_HEADER: [&str; 6] = [
    "step",
    "energy",
    "grad_norm",
    "tau",
    "inner_iters",
    "wall_ms",
];

pub fn parse_trace(text: &str) -> Result<FlowTrace> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers()?.clone();
    if header.iter().ne(TRACE_HEADER.iter().copied()) {
        return Err(Error::Trace(format!(
            "expected header {}, found {}",
            TRACE_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows: Vec<TraceRow> = Vec::new();
    for rec in rdr.deserialize() {
        let row: TraceRow = rec?;
        if let Some(prev) = rows.last() {
            if row.step <= prev.step {
                return Err(Error::Trace(format!(
                    "step column must increase, got {} after {}",
                    row.step, prev.step
                )));
            }
        }
        rows.push(row);
    }
    Ok(FlowTrace { rows })
}

/// Writes a trace as CSV. Reals use 17 significant digits, so they read back
/// bit-exact.
pub fn write_trace(path: impl AsRef<Path>, trace: &FlowTrace) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(format_trace(trace).as_bytes())?;
    Ok(())
}

pub fn format_trace(trace: &FlowTrace) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    // Vec<u8> sinks cannot fail.
    w.write_record(TRACE_HEADER).expect("in-memory csv");
    for r in &trace.rows {
        w.write_record([
            r.step.to_string(),
            format!("{:.16e}", r.energy),
            format!("{:.16e}", r.grad_norm),
            format!("{:.16e}", r.tau),
            r.inner_iters.to_string(),
            format!("{:.16e}", r.wall_ms),
        ])
        .expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("ascii csv")
}

// ---- deterministic pseudorandom fields ----

/// SplitMix64 increment (the 64-bit golden ratio).
pub const SPLITMIX_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
/// SplitMix64 output mixing multipliers.
pub const SPLITMIX_MUL1: u64 = 0xBF58_476D_1CE4_E5B9;
pub const SPLITMIX_MUL2: u64 = 0x94D0_49BB_1331_11EB;

/// Counter-based generator: the `k`-th draw of stream `seed` is
/// `mix(seed + (k + 1)·γ)` with the SplitMix64 finalizer, independent of
/// every other draw.
#[inline]
pub fn counter_u64(seed: u64, k: u64) -> u64 {
    let mut z = seed.wrapping_add(k.wrapping_add(1).wrapping_mul(SPLITMIX_GAMMA));
    z = (z ^ (z >> 30)).wrapping_mul(SPLITMIX_MUL1);
    z = (z ^ (z >> 27)).wrapping_mul(SPLITMIX_MUL2);
    z ^ (z >> 31)
}

/// Uniform in `(0, 1]` from the top 53 bits.
#[inline]
pub fn counter_unit(seed: u64, k: u64) -> f64 {
    ((counter_u64(seed, k) >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Zero-mean Gaussian field with standard deviation `sigma` (Box–Muller on
/// the counter generator; transcendental functions come from `libm`, so the
/// bits do not depend on the platform's math library).
pub fn synth_noise(
    nx: usize,
    ny: usize,
    channels: usize,
    sigma: f64,
    seed: u64,
) -> Result<ImageGrid> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise level must be non-negative, got {sigma}"
        )));
    }
    let n = nx * ny * channels;
    let mut data = vec![0.0; n];
    if sigma > 0.0 {
        for (m, pair) in data.chunks_mut(2).enumerate() {
            let u1 = counter_unit(seed, 2 * m as u64);
            let u2 = counter_unit(seed, 2 * m as u64 + 1);
            let r = libm::sqrt(-2.0 * libm::log(u1));
            let theta = 2.0 * std::f64::consts::PI * u2;
            pair[0] = sigma * r * libm::cos(theta);
            if pair.len() > 1 {
                pair[1] = sigma * r * libm::sin(theta);
            }
        }
    }
    ImageGrid::from_vec(nx, ny, channels, data)
}

/// Independent uniform `[0, 1)` intensities, the random initial state.
pub fn random_image(nx: usize, ny: usize, channels: usize, seed: u64) -> Result<ImageGrid> {
    let n = nx * ny * channels;
    let data = (0..n as u64)
        .map(|k| (counter_u64(seed, k) >> 11) as f64 * (1.0 / (1u64 << 53) as f64))
        .collect();
    ImageGrid::from_vec(nx, ny, channels, data)
}

/// Built-in test images.
pub mod fixtures {
    use super::*;

    /// Horizontal ramp with two constant rectangles on top.
    pub fn shapes(nx: usize, ny: usize) -> ImageGrid {
        ImageGrid::from_fn(nx, ny, |i, j| {
            if (nx / 8..nx / 2).contains(&i) && (ny / 4..3 * ny / 4).contains(&j) {
                0.8
            } else if (5 * nx / 8..7 * nx / 8).contains(&i) && (ny / 8..ny / 2).contains(&j) {
                0.1
            } else {
                0.2 + 0.3 * i as f64 / (nx.max(2) - 1) as f64
            }
        })
        .expect("fixture dimensions are positive")
    }

    /// `shapes` plus Gaussian noise.
    pub fn noisy_shapes(nx: usize, ny: usize, sigma: f64, seed: u64) -> ImageGrid {
        add(
            &shapes(nx, ny),
            &synth_noise(nx, ny, 1, sigma, seed).expect("valid sigma"),
        )
    }

    /// Three channels: the shapes image, its mirror, and a dimmed copy.
    pub fn color_shapes(nx: usize, ny: usize) -> ImageGrid {
        let s = shapes(nx, ny);
        let mut data = s.as_slice().to_vec();
        data.extend(
            (0..ny)
                .flat_map(|j| (0..nx).map(move |i| (j, i)))
                .map(|(j, i)| s.get(nx - 1 - i, j)),
        );
        data.extend(s.as_slice().iter().map(|v| 0.5 * v + 0.1));
        ImageGrid::from_vec(nx, ny, 3, data).expect("fixture dimensions are positive")
    }

    /// Two horizontal scratches and one vertical one, like overlaid text.
    pub fn scratch_mask(nx: usize, ny: usize) -> Mask {
        let r = ny / 3;
        let c = 2 * nx / 3;
        Mask::from_fn(nx, ny, |i, j| {
            ((j == r || j == r + 1) && (2..nx.saturating_sub(2)).contains(&i))
                || ((i == c) && (ny / 2..ny.saturating_sub(3)).contains(&j))
                || ((j == 3 * ny / 4) && (nx / 4..nx / 2).contains(&i))
        })
    }

    /// `shapes` with the pixels under `scratch_mask` painted white.
    pub fn scratched_shapes(nx: usize, ny: usize) -> (ImageGrid, Mask) {
        let mask = scratch_mask(nx, ny);
        let mut u = shapes(nx, ny);
        for (v, &inside) in u.as_mut_slice().iter_mut().zip(mask.as_slice()) {
            if inside {
                *v = 1.0;
            }
        }
        (u, mask)
    }

    pub fn add(a: &ImageGrid, b: &ImageGrid) -> ImageGrid {
        let data = a
            .as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| x + y)
            .collect();
        a.with_data(data).expect("same shape")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn single_byte_p5() {
        let d = tmp();
        let p = d.path().join("a.pgm");
        fs::write(&p, b"P5\n1 1\n255\n\x80").unwrap();
        let g = read_image(&p, Scaling::Unit).unwrap();
        assert_eq!(g.as_slice(), &[128.0 / 255.0]);
        let b = read_image(&p, Scaling::Byte).unwrap();
        assert_eq!(b.as_slice(), &[128.0]);
    }

    #[test]
    fn ascii_formats_with_comments() {
        let d = tmp();
        let p = d.path().join("a.pgm");
        fs::write(&p, "P2\n# comment\n3 1\n255\n0 255\n 51\n").unwrap();
        let g = read_image(&p, Scaling::Unit).unwrap();
        assert_eq!(g.as_slice(), &[0.0, 1.0, 0.2]);
        let q = d.path().join("a.ppm");
        fs::write(&q, "P3 2 1 255  255 0 0  0 0 255").unwrap();
        let c = read_image(&q, Scaling::Unit).unwrap();
        assert_eq!(c.channels(), 3);
        assert_eq!(c.as_slice(), &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn malformed_images() {
        let d = tmp();
        let p = d.path().join("bad.pgm");
        for bytes in [
            &b"P7\n1 1\n255\n\x00"[..],
            b"P5\n2 2\n255\n\x00\x00",
            b"P5\n1 1\n100\n\x00",
            b"P2\n1 1\n255\n300\n",
            b"hello",
        ] {
            fs::write(&p, bytes).unwrap();
            assert!(matches!(
                read_image(&p, Scaling::Unit),
                Err(Error::Image { .. })
            ));
        }
    }

    #[test]
    fn sixteen_bit_roundtrip_quantization() {
        let d = tmp();
        let p = d.path().join("r.pgm");
        let g =
            ImageGrid::from_vec(8, 8, 1, (0..64).map(|k| counter_unit(9, k)).collect()).unwrap();
        write_image(&p, &g, 65535, Scaling::Unit).unwrap();
        let back = read_image(&p, Scaling::Unit).unwrap();
        for (a, b) in g.as_slice().iter().zip(back.as_slice()) {
            assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-16);
        }
        write_image(&p, &back, 65535, Scaling::Unit).unwrap();
        assert_eq!(read_image(&p, Scaling::Unit).unwrap(), back);
    }

    #[test]
    fn zero_image_roundtrips_and_out_of_range_clamps() {
        let d = tmp();
        let p = d.path().join("z.ppm");
        let z = ImageGrid::zeros(3, 2, 3).unwrap();
        write_image(&p, &z, 255, Scaling::Unit).unwrap();
        assert_eq!(read_image(&p, Scaling::Unit).unwrap(), z);
        let w = ImageGrid::from_vec(2, 1, 1, vec![-0.5, 1.5]).unwrap();
        let q = d.path().join("w.pgm");
        write_image(&q, &w, 255, Scaling::Unit).unwrap();
        assert_eq!(
            read_image(&q, Scaling::Unit).unwrap().as_slice(),
            &[0.0, 1.0]
        );
        assert!(write_image(&q, &ImageGrid::zeros(2, 2, 2).unwrap(), 255, Scaling::Unit).is_err());
    }

    #[test]
    fn masks() {
        let d = tmp();
        let p = d.path().join("m.pgm");
        let cb = ImageGrid::from_fn(4, 4, |i, j| ((i + j) % 2) as f64).unwrap();
        write_image(&p, &cb, 255, Scaling::Unit).unwrap();
        assert_eq!(read_mask(&p).unwrap().count_inside(), 8);
        write_image(&p, &ImageGrid::zeros(4, 4, 1).unwrap(), 255, Scaling::Unit).unwrap();
        assert_eq!(read_mask(&p).unwrap().count_inside(), 0);
        let m = fixtures::scratch_mask(16, 16);
        write_mask(&p, &m).unwrap();
        assert_eq!(read_mask(&p).unwrap(), m);
    }

    #[test]
    fn kernel_file() {
        let d = tmp();
        let p = d.path().join("k.txt");
        fs::write(&p, "# blur\n0 1 0\n1 4 1\n0 1 0\n").unwrap();
        let k = read_kernel(&p).unwrap();
        assert_eq!(k.size(), (3, 3));
        assert_eq!(k.get(1, 1), 4.0);
        fs::write(&p, "1 1\n1 1\n").unwrap();
        assert!(read_kernel(&p).is_err());
    }

    #[test]
    fn noise_contract() {
        let z = synth_noise(8, 8, 1, 0.0, 5).unwrap();
        assert!(z.as_slice().iter().all(|&v| v == 0.0));
        let a = synth_noise(16, 16, 1, 0.1, 1).unwrap();
        let a2 = synth_noise(16, 16, 1, 0.1, 1).unwrap();
        assert!(a
            .as_slice()
            .iter()
            .zip(a2.as_slice())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        let b = synth_noise(16, 16, 1, 0.1, 2).unwrap();
        let differ = a
            .as_slice()
            .iter()
            .zip(b.as_slice())
            .filter(|(x, y)| x != y)
            .count();
        assert!(differ as f64 >= 0.99 * 256.0);
        assert!(synth_noise(2, 2, 1, -1.0, 0).is_err());
    }

    #[test]
    fn noise_statistics() {
        let g = synth_noise(64, 64, 1, 0.5, 42).unwrap();
        let n = g.len() as f64;
        let mean = g.as_slice().iter().sum::<f64>() / n;
        let var = g.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.03, "{mean}");
        assert!((var.sqrt() - 0.5).abs() < 0.03, "{var}");
    }

    #[test]
    fn counter_generator_reference_values() {
        // SplitMix64 with state 0 produces 0xE220A8397B1DCDAF first.
        assert_eq!(counter_u64(0, 0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(counter_u64(0, 1), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn trace_roundtrip() {
        let empty = FlowTrace::default();
        let text = format_trace(&empty);
        assert_eq!(
            text.trim_end(),
            "step,energy,grad_norm,tau,inner_iters,wall_ms"
        );
        assert_eq!(parse_trace(&text).unwrap(), empty);
        let t = FlowTrace {
            rows: (0..3)
                .map(|k| TraceRow {
                    step: k,
                    energy: 1.0 / (k as f64 + 3.0),
                    grad_norm: 1e-7 * k as f64,
                    tau: 2.5,
                    inner_iters: 3 * k,
                    wall_ms: 0.0,
                })
                .collect(),
        };
        assert_eq!(parse_trace(&format_trace(&t)).unwrap(), t);
    }

    #[test]
    fn malformed_traces() {
        assert!(parse_trace("a,b\n1,2\n").is_err());
        let bad = "step,energy,grad_norm,tau,inner_iters,wall_ms\n1,1,1,1,1,0\n1,1,1,1,1,0\n";
        assert!(matches!(parse_trace(bad), Err(Error::Trace(_))));
        let junk = "step,energy,grad_norm,tau,inner_iters,wall_ms\n0,x,1,1,1,0\n";
        assert!(parse_trace(junk).is_err());
    }

    #[test]
    fn fixtures_are_in_range() {
        let s = fixtures::shapes(32, 32);
        assert!(s.as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(s.get(4, 8), 0.8);
        assert_eq!(s.get(20, 4), 0.1);
        let c = fixtures::color_shapes(8, 8);
        assert_eq!(c.channels(), 3);
        let m = fixtures::scratch_mask(32, 32);
        assert!(m.count_inside() > 0 && m.count_inside() < 200);
        let r = random_image(8, 8, 1, 3).unwrap();
        assert!(r.as_slice().iter().all(|&v| (0.0..1.0).contains(&v)));
    }
}
