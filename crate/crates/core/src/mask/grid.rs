use crate::error::{Error, Result};

/// Single channel image with 16-bit intensities, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageGrid {
    width: u32,
    height: u32,
    data: Vec<u16>,
}

impl ImageGrid {
    pub const MAX_INTENSITY: u16 = u16::MAX;

    pub fn new(width: u32, height: u32, data: Vec<u16>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!("image must be at least 1x1, got {width}x{height}")));
        }
        if data.len() != width as usize * height as usize {
            return Err(Error::invalid(format!(
                "intensity array has {} values, expected {}",
                data.len(),
                width as usize * height as usize
            )));
        }
        Ok(ImageGrid { width, height, data })
    }

    pub fn filled(width: u32, height: u32, value: u16) -> Result<Self> {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn area(&self) -> u64 {
        self.width as u64 * self.height as u64
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    #[inline]
    pub fn get(&self, col: u32, row: u32) -> u16 {
        self.data[row as usize * self.width as usize + col as usize]
    }

    #[inline]
    pub fn set(&mut self, col: u32, row: u32, value: u16) {
        self.data[row as usize * self.width as usize + col as usize] = value;
    }

    pub fn row(&self, row: u32) -> &[u16] {
        let w = self.width as usize;
        &self.data[row as usize * w..(row as usize + 1) * w]
    }
}
