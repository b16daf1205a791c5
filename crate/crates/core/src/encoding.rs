//! Rate coding of grayscale images into spike trains, plus the bitset raster
//! they land in. The Poisson process is realized as an independent Bernoulli
//! draw per neuron and step with p = pixel · f_max · dt / 1000, which is exact
//! for p <= 1. At the default f_max = 1000 Hz and dt = 1 ms a white pixel
//! saturates to p = 1 and spikes deterministically every step.

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EncoderConfig {
    /// Maximum firing rate (Hz).
    pub f_max: f64,
    /// Stimulus duration (ms).
    pub t_image: f64,
    /// Step size (ms).
    pub dt: f64,
    /// (height, width) of the encoded image.
    pub image_dims: (usize, usize),
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig { f_max: 1000.0, t_image: 100.0, dt: 1.0, image_dims: (15, 15) }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_max > 0.0 && self.t_image > 0.0 && self.dt > 0.0) {
            return Err(Error::InvalidInput("encoder rates and durations must be > 0".into()));
        }
        if self.f_max * self.dt / 1000.0 > 1.0 + 1e-12 {
            return Err(Error::InvalidInput(format!(
                "f_max {} Hz at dt {} ms gives per-step spike probability > 1",
                self.f_max, self.dt
            )));
        }
        let steps = self.t_image / self.dt;
        if (steps - steps.round()).abs() > 1e-9 {
            return Err(Error::InvalidInput("t_image must be a multiple of dt".into()));
        }
        if self.image_dims.0 == 0 || self.image_dims.1 == 0 {
            return Err(Error::InvalidInput("image dims must be nonzero".into()));
        }
        Ok(())
    }

    pub fn n_in(&self) -> usize {
        self.image_dims.0 * self.image_dims.1
    }

    pub fn steps(&self) -> usize {
        (self.t_image / self.dt).round() as usize
    }
}

/// Binary spike record for one stimulus presentation, indexed by
/// (neuron, step). Bit-packed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpikeRaster {
    neurons: usize,
    steps: usize,
    bits: Vec<u64>,
}

impl SpikeRaster {
    pub fn new(neurons: usize, steps: usize) -> Self {
        let words = (neurons * steps).div_ceil(64);
        SpikeRaster { neurons, steps, bits: vec![0; words] }
    }

    pub fn neurons(&self) -> usize {
        self.neurons
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    fn bit_index(&self, neuron: usize, step: usize) -> usize {
        debug_assert!(neuron < self.neurons && step < self.steps);
        neuron * self.steps + step
    }

    #[inline]
    pub fn get(&self, neuron: usize, step: usize) -> bool {
        let i = self.bit_index(neuron, step);
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, neuron: usize, step: usize) {
        let i = self.bit_index(neuron, step);
        self.bits[i / 64] |= 1 << (i % 64);
    }

    /// Fill `out[n] = spike(n, step)` for one step.
    pub fn column(&self, step: usize, out: &mut [bool]) {
        debug_assert_eq!(out.len(), self.neurons);
        for (n, o) in out.iter_mut().enumerate() {
            *o = self.get(n, step);
        }
    }

    pub fn counts_per_neuron(&self) -> Vec<u32> {
        (0..self.neurons)
            .map(|n| (0..self.steps).filter(|&t| self.get(n, t)).count() as u32)
            .collect()
    }

    pub fn total_spikes(&self) -> u64 {
        self.bits.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    /// Compact dump: magic, dims, then the little-endian bit words.
    pub fn write_bits<W: Write>(&self, out: &mut W) -> Result<()> {
        out.write_all(b"SPKR0001")?;
        out.write_all(&(self.neurons as u32).to_le_bytes())?;
        out.write_all(&(self.steps as u32).to_le_bytes())?;
        for w in &self.bits {
            out.write_all(&w.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_bits<R: Read>(input: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != b"SPKR0001" {
            return Err(Error::Format("bad spike raster magic".into()));
        }
        let mut b4 = [0u8; 4];
        input.read_exact(&mut b4)?;
        let neurons = u32::from_le_bytes(b4) as usize;
        input.read_exact(&mut b4)?;
        let steps = u32::from_le_bytes(b4) as usize;
        let mut raster = SpikeRaster::new(neurons, steps);
        let mut b8 = [0u8; 8];
        for w in &mut raster.bits {
            input.read_exact(&mut b8)?;
            *w = u64::from_le_bytes(b8);
        }
        Ok(raster)
    }

    /// Plain-text debug dump: one `neuron: t1 t2 ...` line per neuron that
    /// spiked at least once.
    pub fn write_debug_text<W: Write>(&self, out: &mut W) -> Result<()> {
        for n in 0..self.neurons {
            let times: Vec<String> =
                (0..self.steps).filter(|&t| self.get(n, t)).map(|t| t.to_string()).collect();
            if !times.is_empty() {
                writeln!(out, "{n}: {}", times.join(" "))?;
            }
        }
        Ok(())
    }
}

/// Encode pixel intensities in [0, 1] into a spike raster.
pub fn poisson_encode<R: Rng>(
    image: &[f64],
    cfg: &EncoderConfig,
    rng: &mut R,
) -> Result<SpikeRaster> {
    if image.len() != cfg.n_in() {
        return Err(Error::Shape(format!(
            "image of {} pixels for {}x{} encoder",
            image.len(),
            cfg.image_dims.0,
            cfg.image_dims.1
        )));
    }
    if let Some(bad) = image.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidInput(format!("pixel value {bad} outside [0, 1]")));
    }
    let scale = cfg.f_max * cfg.dt / 1000.0;
    let steps = cfg.steps();
    let mut raster = SpikeRaster::new(image.len(), steps);
    for (n, &pixel) in image.iter().enumerate() {
        let p = pixel * scale;
        if p == 0.0 {
            continue;
        }
        for t in 0..steps {
            if rng.random::<f64>() < p {
                raster.set(n, t);
            }
        }
    }
    Ok(raster)
}

/// Bilinear resize with pixel-center alignment; output clamped to [0, 1].
pub fn resize_image(
    src: &[f64],
    src_dims: (usize, usize),
    dst_dims: (usize, usize),
) -> Result<Vec<f64>> {
    let (sh, sw) = src_dims;
    let (dh, dw) = dst_dims;
    if sh == 0 || sw == 0 || src.len() != sh * sw {
        return Err(Error::InvalidInput(format!(
            "source image {}x{} with {} pixels",
            sh,
            sw,
            src.len()
        )));
    }
    if dh == 0 || dw == 0 {
        return Err(Error::InvalidInput("target dims must be nonzero".into()));
    }
    if (sh, sw) == (dh, dw) {
        return Ok(src.to_vec());
    }
    let mut dst = vec![0.0; dh * dw];
    let scale_y = sh as f64 / dh as f64;
    let scale_x = sw as f64 / dw as f64;
    for dy in 0..dh {
        let fy = ((dy as f64 + 0.5) * scale_y - 0.5).clamp(0.0, (sh - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(sh - 1);
        let wy = fy - y0 as f64;
        for dx in 0..dw {
            let fx = ((dx as f64 + 0.5) * scale_x - 0.5).clamp(0.0, (sw - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(sw - 1);
            let wx = fx - x0 as f64;
            let top = src[y0 * sw + x0] * (1.0 - wx) + src[y0 * sw + x1] * wx;
            let bottom = src[y1 * sw + x0] * (1.0 - wx) + src[y1 * sw + x1] * wx;
            dst[dy * dw + dx] = (top * (1.0 - wy) + bottom * wy).clamp(0.0, 1.0);
        }
    }
    Ok(dst)
}
