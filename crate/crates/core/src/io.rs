//! Binary file formats. All multi-byte values are little-endian except the
//! PGM samples, which follow the netpbm big-endian convention.
//!
//! - image: `"IMGF"`, u32 nx, u32 ny, u32 0, then `nx * ny` f64 row-major.
//! - sinogram: `"SINF"`, u32 n_bins, u32 n_angles, f64 det_halfwidth, then
//!   `n_bins * n_angles` f64 in angle-major order.
//! - network checkpoint: `"MLPW"`, u32 n_layers, then per layer u32 rows,
//!   u32 cols, `rows * cols` f64 weights row-major, `rows` f64 biases.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::mlp::{LayerParams, MlpArchitecture, MlpParams};
use crate::radon::{RadonGeometry, SinogramGrid};

const IMAGE_MAGIC: &[u8; 4] = b"IMGF";
const SINO_MAGIC: &[u8; 4] = b"SINF";
const MLP_MAGIC: &[u8; 4] = b"MLPW";

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format(format!("truncated input at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn magic(&mut self, want: &[u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != want {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(got),
                String::from_utf8_lossy(want)
            )));
        }
        Ok(())
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("size overflow".into()))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

fn put_f64s(out: &mut Vec<u8>, vals: &[f64]) {
    for v in vals {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn as_u32(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::invalid(format!("{what} {n} does not fit in u32")))
}

pub fn encode_image(img: &ImageGrid) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(16 + 8 * img.len());
    out.extend_from_slice(IMAGE_MAGIC);
    out.extend_from_slice(&as_u32(img.nx(), "nx")?.to_le_bytes());
    out.extend_from_slice(&as_u32(img.ny(), "ny")?.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    put_f64s(&mut out, img.values());
    Ok(out)
}

pub fn decode_image(bytes: &[u8]) -> Result<ImageGrid> {
    let mut r = Reader::new(bytes);
    r.magic(IMAGE_MAGIC)?;
    let nx = r.u32()? as usize;
    let ny = r.u32()? as usize;
    let reserved = r.u32()?;
    if reserved != 0 {
        return Err(Error::Format(format!("reserved header field is {reserved}, expected 0")));
    }
    let values = r.f64s(nx * ny)?;
    r.finish()?;
    ImageGrid::new(nx, ny, values)
}

pub fn encode_sinogram(sino: &SinogramGrid) -> Result<Vec<u8>> {
    let g = sino.geometry();
    let mut out = Vec::with_capacity(20 + 8 * g.len());
    out.extend_from_slice(SINO_MAGIC);
    out.extend_from_slice(&as_u32(g.n_bins(), "n_bins")?.to_le_bytes());
    out.extend_from_slice(&as_u32(g.n_angles(), "n_angles")?.to_le_bytes());
    out.extend_from_slice(&g.det_halfwidth().to_le_bytes());
    put_f64s(&mut out, sino.values());
    Ok(out)
}

/// The file does not carry the sampling step; the caller supplies it.
pub fn decode_sinogram(bytes: &[u8], step: f64) -> Result<SinogramGrid> {
    let mut r = Reader::new(bytes);
    r.magic(SINO_MAGIC)?;
    let n_bins = r.u32()? as usize;
    let n_angles = r.u32()? as usize;
    let halfwidth = r.f64()?;
    let values = r.f64s(n_bins * n_angles)?;
    r.finish()?;
    SinogramGrid::new(RadonGeometry::new(n_angles, n_bins, halfwidth, step)?, values)
}

pub fn encode_checkpoint(params: &MlpParams) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(8 + 8 * (params.param_count() + params.layers.len()));
    out.extend_from_slice(MLP_MAGIC);
    out.extend_from_slice(&as_u32(params.layers.len(), "layer count")?.to_le_bytes());
    for layer in &params.layers {
        let (rows, cols) = layer.weights.dim();
        out.extend_from_slice(&as_u32(rows, "rows")?.to_le_bytes());
        out.extend_from_slice(&as_u32(cols, "cols")?.to_le_bytes());
        put_f64s(&mut out, layer.weights.as_slice().expect("standard layout"));
        put_f64s(&mut out, layer.biases.as_slice().expect("standard layout"));
    }
    Ok(out)
}

/// Rebuilds parameters from a checkpoint. The architecture is inferred from
/// the layer shapes; the leak slope is not stored and must be supplied.
pub fn decode_checkpoint(bytes: &[u8], leaky_slope: f64) -> Result<MlpParams> {
    let mut r = Reader::new(bytes);
    r.magic(MLP_MAGIC)?;
    let n_layers = r.u32()? as usize;
    if n_layers == 0 {
        return Err(Error::Format("checkpoint has no layers".into()));
    }
    let mut layers = Vec::with_capacity(n_layers);
    let mut sizes = Vec::with_capacity(n_layers + 1);
    for k in 0..n_layers {
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        match sizes.last() {
            None => sizes.push(cols),
            Some(&prev) if prev != cols => {
                return Err(Error::Format(format!("layer {k} has {cols} inputs, previous layer has {prev} outputs")));
            }
            _ => {}
        }
        sizes.push(rows);
        let w = r.f64s(rows * cols)?;
        let b = r.f64s(rows)?;
        layers.push(LayerParams {
            weights: ndarray::Array2::from_shape_vec((rows, cols), w).map_err(|e| Error::Format(e.to_string()))?,
            biases: ndarray::Array1::from_vec(b),
        });
    }
    r.finish()?;
    if *sizes.last().unwrap() != 1 {
        return Err(Error::Format("network output must be scalar".into()));
    }
    let arch = MlpArchitecture::new(sizes[0], sizes[1..sizes.len() - 1].to_vec(), leaky_slope)?;
    Ok(MlpParams { arch, layers, weight_bound: None })
}

/// 16-bit binary PGM with min-max scaling; returns `(min, max)` of the
/// original values. The top row of the file is the largest second
/// coordinate, so the picture appears upright.
pub fn encode_pgm16(img: &ImageGrid) -> (Vec<u8>, f64, f64) {
    let (lo, hi) = img.min_max();
    let span = hi - lo;
    let mut out = format!("P5\n{} {}\n65535\n", img.nx(), img.ny()).into_bytes();
    for j in (0..img.ny()).rev() {
        for i in 0..img.nx() {
            let v = img.get(i, j);
            let level = if span > 0.0 { ((v - lo) / span * 65535.0).round() as u16 } else { 0 };
            out.extend_from_slice(&level.to_be_bytes());
        }
    }
    (out, lo, hi)
}

/// Sidecar recording how PGM levels map back to values.
pub fn pgm_scale_text(lo: f64, hi: f64) -> String {
    format!("# value = min + level / 65535 * (max - min)\nmin = {lo}\nmax = {hi}\n")
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    Ok(buf)
}

/// Path of the scaling sidecar for a PGM file.
pub fn pgm_sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".scale.txt");
    s.into()
}

/// Writes a `.pgm` (plus sidecar) or, for any other extension, raw `IMGF`.
pub fn write_image(path: &Path, img: &ImageGrid) -> Result<()> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")) {
        let (bytes, lo, hi) = encode_pgm16(img);
        write_bytes(path, &bytes)?;
        std::fs::write(pgm_sidecar_path(path), pgm_scale_text(lo, hi))?;
        Ok(())
    } else {
        write_bytes(path, &encode_image(img)?)
    }
}

pub fn read_image(path: &Path) -> Result<ImageGrid> {
    decode_image(&read_bytes(path)?)
}

pub fn write_sinogram(path: &Path, sino: &SinogramGrid) -> Result<()> {
    write_bytes(path, &encode_sinogram(sino)?)
}

pub fn read_sinogram(path: &Path, step: f64) -> Result<SinogramGrid> {
    decode_sinogram(&read_bytes(path)?, step)
}

pub fn write_checkpoint(path: &Path, params: &MlpParams) -> Result<()> {
    write_bytes(path, &encode_checkpoint(params)?)
}

pub fn read_checkpoint(path: &Path, leaky_slope: f64) -> Result<MlpParams> {
    decode_checkpoint(&read_bytes(path)?, leaky_slope)
}
