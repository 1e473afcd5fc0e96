//! Column ray-caster for a square room seen from a pinhole camera.
//!
//! World frame: the room spans `[-1, 1]` on both axes, heading `phi` faces
//! `(cos phi, sin phi)`, and turning left increases `phi`. Screen columns grow
//! to the right and rows grow downward, with the horizon at row `h / 2`.

use crate::rbf::Frame;

pub const ROOM_HALF: f64 = 1.0;
pub const WALL_HEIGHT: f64 = 1.0;
pub const EYE_HEIGHT: f64 = 0.5;

/// Intensity of a surface in both gray and rgb renderings.
#[derive(Debug, Clone, Copy)]
pub struct Material {
    pub gray: f64,
    pub rgb: [f64; 3],
}

impl Material {
    pub const fn new(gray: f64, rgb: [f64; 3]) -> Self {
        Self { gray, rgb }
    }

    pub fn scaled(self, k: f64) -> Self {
        Self {
            gray: self.gray * k,
            rgb: [self.rgb[0] * k, self.rgb[1] * k, self.rgb[2] * k],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Face {
    East,
    North,
    West,
    South,
}

#[derive(Debug, Clone, Copy)]
pub struct Camera {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    width: usize,
    height: usize,
    focal: f64,
}

impl Camera {
    pub fn new(x: f64, y: f64, heading: f64, fov: f64, width: usize, height: usize) -> Self {
        Self {
            x,
            y,
            heading,
            width,
            height,
            focal: (width as f64 / 2.0) / (fov / 2.0).tan(),
        }
    }

    pub fn focal(&self) -> f64 {
        self.focal
    }

    fn forward(&self) -> (f64, f64) {
        (self.heading.cos(), self.heading.sin())
    }

    fn right(&self) -> (f64, f64) {
        (self.heading.sin(), -self.heading.cos())
    }

    /// `(depth, lateral)` of a world point in camera coordinates; lateral is positive to the right.
    pub fn to_camera(self, px: f64, py: f64) -> (f64, f64) {
        let (dx, dy) = (px - self.x, py - self.y);
        let (fx, fy) = self.forward();
        let (rx, ry) = self.right();
        (dx * fx + dy * fy, dx * rx + dy * ry)
    }

    /// Continuous screen column of a camera-space point.
    pub fn column(&self, depth: f64, lateral: f64) -> f64 {
        self.width as f64 / 2.0 + lateral / depth * self.focal
    }

    /// Continuous screen row of a point at world height `z` and the given depth.
    pub fn row(&self, depth: f64, z: f64) -> f64 {
        self.height as f64 / 2.0 + (EYE_HEIGHT - z) / depth * self.focal
    }

    /// Perpendicular depth and face of the wall seen through pixel column `col`.
    pub fn cast(&self, col: usize) -> (f64, Face) {
        let t = (col as f64 + 0.5 - self.width as f64 / 2.0) / self.focal;
        let (fx, fy) = self.forward();
        let (rx, ry) = self.right();
        let (dx, dy) = (fx + t * rx, fy + t * ry);
        let (sx, face_x) = if dx > 0.0 {
            ((ROOM_HALF - self.x) / dx, Face::East)
        } else if dx < 0.0 {
            ((-ROOM_HALF - self.x) / dx, Face::West)
        } else {
            (f64::INFINITY, Face::East)
        };
        let (sy, face_y) = if dy > 0.0 {
            ((ROOM_HALF - self.y) / dy, Face::North)
        } else if dy < 0.0 {
            ((-ROOM_HALF - self.y) / dy, Face::South)
        } else {
            (f64::INFINITY, Face::North)
        };
        if sx < sy {
            (sx.max(1e-6), face_x)
        } else {
            (sy.max(1e-6), face_y)
        }
    }
}

/// Mutable pixel buffer that becomes a [`Frame`] once drawing is done.
pub struct Canvas {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Canvas {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn put(&mut self, x: usize, y: usize, m: Material) {
        let base = (y * self.width + x) * self.channels;
        if self.channels == 3 {
            for (ch, v) in m.rgb.iter().enumerate() {
                self.data[base + ch] = v.clamp(0.0, 1.0);
            }
        } else {
            for ch in 0..self.channels {
                self.data[base + ch] = m.gray.clamp(0.0, 1.0);
            }
        }
    }

    /// Ceiling, shaded walls and floor, one ray per column.
    pub fn draw_room(
        &mut self,
        cam: &Camera,
        ceiling: Material,
        floor: Material,
        walls: [Material; 4],
    ) {
        for col in 0..self.width {
            let (depth, face) = cam.cast(col);
            let top = cam.row(depth, WALL_HEIGHT);
            let bottom = cam.row(depth, 0.0);
            let fade = 1.0 - 0.25 * (depth / (2.0 * ROOM_HALF)).min(1.0);
            let wall = walls[face as usize].scaled(fade);
            for row in 0..self.height {
                let yc = row as f64 + 0.5;
                let m = if yc < top {
                    ceiling
                } else if yc > bottom {
                    floor
                } else {
                    wall
                };
                self.put(col, row, m);
            }
        }
    }

    /// Fills an axis-aligned ellipse given in continuous pixel coordinates.
    ///
    /// Radii are clamped to half a pixel so distant objects never vanish entirely.
    pub fn fill_ellipse(&mut self, cx: f64, cy: f64, rx: f64, ry: f64, m: Material) {
        let (rx, ry) = (rx.max(0.5), ry.max(0.5));
        let x0 = (cx - rx).floor().max(0.0) as usize;
        let y0 = (cy - ry).floor().max(0.0) as usize;
        let x1 = ((cx + rx).ceil().max(0.0) as usize).min(self.width);
        let y1 = ((cy + ry).ceil().max(0.0) as usize).min(self.height);
        for y in y0..y1 {
            for x in x0..x1 {
                let u = (x as f64 + 0.5 - cx) / rx;
                let v = (y as f64 + 0.5 - cy) / ry;
                if u * u + v * v <= 1.0 {
                    self.put(x, y, m);
                }
            }
        }
    }

    pub fn into_frame(self) -> Frame {
        Frame::new(self.width, self.height, self.channels, self.data)
            .expect("canvas values are clamped to [0,1]")
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let mut r = a % tau;
    if r <= -std::f64::consts::PI {
        r += tau;
    } else if r > std::f64::consts::PI {
        r -= tau;
    }
    r
}
