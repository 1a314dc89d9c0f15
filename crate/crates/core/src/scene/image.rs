/// Float RGB image; rendering output payloads are stored as f32.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuf {
    pub width: u32,
    pub height: u32,
    pub data: Vec<[f32; 3]>,
}

impl ImageBuf {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![[0.0; 3]; (width * height) as usize],
        }
    }

    #[inline]
    pub fn pixel_index(&self, u: u32, v: u32) -> usize {
        (v * self.width + u) as usize
    }

    pub fn get(&self, u: u32, v: u32) -> [f32; 3] {
        self.data[self.pixel_index(u, v)]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Single-channel f32 image (depth, opacity, viewshed scores).
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f32>,
}

impl ScalarImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; (width * height) as usize],
        }
    }

    pub fn filled(width: u32, height: u32, value: f32) -> Self {
        Self {
            width,
            height,
            data: vec![value; (width * height) as usize],
        }
    }
}

/// Full per-pixel render output of a camera.
#[derive(Clone, Debug)]
pub struct RenderedImage {
    pub rgb: ImageBuf,
    /// Median-weight depth; NaN where no surface was found.
    pub depth: ScalarImage,
    pub opacity: ScalarImage,
}
