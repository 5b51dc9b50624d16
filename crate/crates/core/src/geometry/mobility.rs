use rand::Rng;

use super::{uniform_positions, Point};
use crate::config::SystemConfig;

pub const MAX_SPEED_MPS: f64 = 20.0;
/// Speed and heading are redrawn after this many seconds.
pub const DIRECTION_HOLD_S: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Left,
    Right,
    Up,
    Down,
}

impl Direction {
    const ALL: [Direction; 4] = [Direction::Left, Direction::Right, Direction::Up, Direction::Down];

    fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::ALL[rng.random_range(0..4)]
    }

    fn reversed(self) -> Self {
        match self {
            Direction::Left => Direction::Right,
            Direction::Right => Direction::Left,
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
        }
    }

    fn unit(self) -> (f64, f64) {
        match self {
            Direction::Left => (-1.0, 0.0),
            Direction::Right => (1.0, 0.0),
            Direction::Up => (0.0, 1.0),
            Direction::Down => (0.0, -1.0),
        }
    }
}

/// Random-direction walk on the square with reflecting edges.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityState {
    pub user_positions: Vec<Point>,
    pub speeds: Vec<f64>,
    pub directions: Vec<Direction>,
    pub time_since_change: f64,
}

impl MobilityState {
    /// Uniform start positions with a fresh speed and heading per user.
    pub fn new<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Self {
        let user_positions = uniform_positions(cfg.num_users, cfg.area_side_m, rng);
        let mut state = MobilityState {
            user_positions,
            speeds: vec![0.0; cfg.num_users],
            directions: vec![Direction::Right; cfg.num_users],
            time_since_change: 0.0,
        };
        state.redraw(rng);
        state
    }

    fn redraw<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for (speed, dir) in self.speeds.iter_mut().zip(&mut self.directions) {
            *speed = rng.random::<f64>() * MAX_SPEED_MPS;
            *dir = Direction::random(rng);
        }
        self.time_since_change = 0.0;
    }

    /// Advances every user by `speed * dt`. A user that would leave the
    /// square is reflected back inside and its heading reversed. Headings
    /// and speeds are redrawn once `DIRECTION_HOLD_S` has elapsed.
    pub fn step<R: Rng + ?Sized>(&mut self, dt: f64, cfg: &SystemConfig, rng: &mut R) {
        let side = cfg.area_side_m;
        for ((pos, &speed), dir) in self
            .user_positions
            .iter_mut()
            .zip(&self.speeds)
            .zip(&mut self.directions)
        {
            let (ux, uy) = dir.unit();
            let (x, flip_x) = reflect(pos[0] + ux * speed * dt, side);
            let (y, flip_y) = reflect(pos[1] + uy * speed * dt, side);
            *pos = [x, y];
            if flip_x || flip_y {
                *dir = dir.reversed();
            }
        }
        self.time_since_change += dt;
        if self.time_since_change >= DIRECTION_HOLD_S - 1e-9 {
            self.redraw(rng);
        }
    }
}

fn reflect(mut v: f64, side: f64) -> (f64, bool) {
    let mut flipped = false;
    loop {
        if v > side {
            v = 2.0 * side - v;
        } else if v < 0.0 {
            v = -v;
        } else {
            return (v, flipped);
        }
        flipped = !flipped;
    }
}
