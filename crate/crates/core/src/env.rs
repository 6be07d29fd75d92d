//! The Catch-v0..v4 environment family.
//!
//! Row convention: row 0 is the paddle row at the bottom, row 20 the top.
//! The ball falls one row per step and moves `vx` columns per step,
//! reflecting off the side walls. Rendered frames use image orientation
//! (pixel row 0 at the top), so in an unmirrored frame the paddle occupies
//! the last pixel row.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::nn::{FRAMES, FRAME_LEN, GRID, OBS_LEN};

pub const GRID_SIZE: i32 = GRID as i32;
const MAX_COL: i32 = GRID_SIZE - 1;
pub const TOP_ROW: i32 = GRID_SIZE - 1;
pub const PADDLE_SPAWN: i32 = 10;
/// Steps for one ball to fall from the top row to the paddle row.
pub const DROP_STEPS: u32 = TOP_ROW as u32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EnvError {
    #[error("unknown variant `{0}` (expected v0..v4)")]
    UnknownVariant(String),
    #[error("variant configuration {0:?} is not one of the five Catch variants")]
    InvalidVariant(VariantConfig),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VariantId {
    V0,
    V1,
    V2,
    V3,
    V4,
}

impl VariantId {
    pub const ALL: [VariantId; 5] = [
        VariantId::V0,
        VariantId::V1,
        VariantId::V2,
        VariantId::V3,
        VariantId::V4,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VariantId::V0 => "v0",
            VariantId::V1 => "v1",
            VariantId::V2 => "v2",
            VariantId::V3 => "v3",
            VariantId::V4 => "v4",
        }
    }

    pub fn config(self) -> VariantConfig {
        VariantConfig::new(self)
    }
}

impl fmt::Display for VariantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VariantId {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        let key = lower.strip_prefix("catch-").unwrap_or(&lower);
        VariantId::ALL
            .into_iter()
            .find(|v| v.as_str() == key)
            .ok_or_else(|| EnvError::UnknownVariant(s.to_string()))
    }
}

/// Per-variant game parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct VariantConfig {
    pub variant_id: VariantId,
    pub paddle_width: i32,
    pub mirrored: bool,
    pub noisy_background: bool,
    pub streak_target: u32,
    pub grid_size: i32,
}

impl VariantConfig {
    pub fn new(variant_id: VariantId) -> Self {
        VariantConfig {
            variant_id,
            paddle_width: if variant_id == VariantId::V1 { 2 } else { 5 },
            mirrored: variant_id == VariantId::V3,
            noisy_background: variant_id == VariantId::V2,
            streak_target: if variant_id == VariantId::V4 { 5 } else { 1 },
            grid_size: GRID_SIZE,
        }
    }

    /// Accepts a configuration only if it is exactly one of the named variants.
    pub fn validate(self) -> Result<Self, EnvError> {
        if VariantConfig::new(self.variant_id) == self {
            Ok(self)
        } else {
            Err(EnvError::InvalidVariant(self))
        }
    }

    /// Smallest and largest legal paddle centers.
    pub fn paddle_limits(&self) -> (i32, i32) {
        let (left, right) = self.paddle_extent();
        (left, MAX_COL - right)
    }

    /// Cells the paddle covers left and right of its center.
    /// Even paddles extend to the right: a width-2 paddle spans `[c, c + 1]`.
    fn paddle_extent(&self) -> (i32, i32) {
        let left = (self.paddle_width - 1) / 2;
        (left, self.paddle_width - 1 - left)
    }

    /// Inclusive column span of a paddle centered at `center`.
    pub fn paddle_span(&self, center: i32) -> (i32, i32) {
        let (left, right) = self.paddle_extent();
        (center - left, center + right)
    }
}

impl From<VariantId> for VariantConfig {
    fn from(id: VariantId) -> Self {
        VariantConfig::new(id)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    Left,
    Stay,
    Right,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::Left, Action::Stay, Action::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Action {
        Action::ALL[index]
    }

    fn shift(self) -> i32 {
        match self {
            Action::Left => -1,
            Action::Stay => 0,
            Action::Right => 1,
        }
    }
}

/// Exact physics state of one Catch game.
#[derive(Clone, Debug, PartialEq)]
pub struct GridState {
    pub ball_row: i32,
    pub ball_col: i32,
    pub ball_vx: i32,
    pub paddle_center: i32,
    pub streak: u32,
    pub step_count: u32,
    pub terminal: bool,
    rng: ChaCha8Rng,
}

impl GridState {
    /// A state with the given ball, used by tests and oracles. The paddle
    /// starts at its spawn column.
    pub fn with_ball(ball_row: i32, ball_col: i32, ball_vx: i32, seed: u64) -> Self {
        assert!((0..=TOP_ROW).contains(&ball_row), "row {ball_row} outside grid");
        assert!((0..=MAX_COL).contains(&ball_col), "col {ball_col} outside grid");
        assert!((-2..=2).contains(&ball_vx), "vx {ball_vx} outside -2..=2");
        GridState {
            ball_row,
            ball_col,
            ball_vx,
            paddle_center: PADDLE_SPAWN,
            streak: 0,
            step_count: 0,
            terminal: false,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn spawn_ball(&mut self) {
        self.ball_row = TOP_ROW;
        self.ball_col = self.rng.gen_range(0..=MAX_COL);
        self.ball_vx = self.rng.gen_range(-2..=2);
    }
}

/// One rendered 21x21 frame, row-major, pixel row 0 at the top.
#[derive(Clone, PartialEq, Eq)]
pub struct Frame {
    pub pixels: [u8; FRAME_LEN],
}

impl Frame {
    pub fn blank() -> Self {
        Frame {
            pixels: [0; FRAME_LEN],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * GRID + col]
    }

    pub fn flipped_vertically(&self) -> Frame {
        let mut out = Frame::blank();
        for (dst, src) in out
            .pixels
            .chunks_exact_mut(GRID)
            .zip(self.pixels.chunks_exact(GRID).rev())
        {
            dst.copy_from_slice(src);
        }
        out
    }

    /// Binary PGM (P5) encoding.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{GRID} {GRID}\n255\n").into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

impl fmt::Debug for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.pixels.chunks_exact(GRID) {
            let line: String = row
                .iter()
                .map(|p| match p {
                    0 => '.',
                    255 => '#',
                    _ => '+',
                })
                .collect();
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

/// The last four frames, oldest first. Values are normalised to `[0, 1]`
/// on read.
#[derive(Clone, PartialEq, Eq)]
pub struct Observation {
    frames: [Frame; FRAMES],
}

impl Observation {
    /// All four slots hold the initial frame.
    pub fn filled(frame: &Frame) -> Self {
        Observation {
            frames: std::array::from_fn(|_| frame.clone()),
        }
    }

    pub fn from_frames(frames: [Frame; FRAMES]) -> Self {
        Observation { frames }
    }

    /// Drops the oldest frame and appends `frame`.
    pub fn pushed(&self, frame: Frame) -> Self {
        let mut frames = self.frames.clone();
        frames.rotate_left(1);
        frames[FRAMES - 1] = frame;
        Observation { frames }
    }

    pub fn frames(&self) -> &[Frame; FRAMES] {
        &self.frames
    }

    pub fn newest(&self) -> &Frame {
        &self.frames[FRAMES - 1]
    }

    /// Writes the normalised `4 x 21 x 21` tensor into `out`.
    pub fn write_normalized(&self, out: &mut [f32]) {
        assert_eq!(out.len(), OBS_LEN);
        for (dst, frame) in out.chunks_exact_mut(FRAME_LEN).zip(&self.frames) {
            write_frame_normalized(&frame.pixels, dst);
        }
    }

    pub fn to_normalized(&self) -> Vec<f32> {
        let mut out = vec![0.0; OBS_LEN];
        self.write_normalized(&mut out);
        out
    }
}

impl fmt::Debug for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Observation")
            .field("newest", self.newest())
            .finish_non_exhaustive()
    }
}

pub(crate) fn write_frame_normalized(pixels: &[u8], out: &mut [f32]) {
    for (o, p) in out.iter_mut().zip(pixels) {
        *o = f32::from(*p) / 255.0;
    }
}

/// What happened on one physics step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub reward: f32,
    pub terminal: bool,
    /// `Some(caught)` when a ball reached the paddle row on this step.
    pub resolved: Option<bool>,
}

/// Fresh state for `seed`: ball at the top in a uniform column with uniform
/// `vx`, paddle in the middle.
pub fn reset_state(_variant: &VariantConfig, seed: u64) -> GridState {
    let mut state = GridState::with_ball(TOP_ROW, 0, 0, seed);
    state.spawn_ball();
    state
}

/// Initial state and its observation (four copies of the first frame).
pub fn reset(variant: &VariantConfig, seed: u64) -> (GridState, Observation) {
    let mut state = reset_state(variant, seed);
    let frame = render(&mut state, variant);
    (state, Observation::filled(&frame))
}

/// Advances the physics by one step: the paddle moves first, then the ball,
/// then a ball on the paddle row is resolved.
///
/// # Panics
///
/// Stepping a terminal state is a contract violation.
pub fn physics_step(state: &mut GridState, action: Action, variant: &VariantConfig) -> StepOutcome {
    assert!(!state.terminal, "step called on a terminal state");
    let (lo, hi) = variant.paddle_limits();
    state.paddle_center = (state.paddle_center + action.shift()).clamp(lo, hi);

    state.ball_row -= 1;
    let mut col = state.ball_col + state.ball_vx;
    if col < 0 {
        col = -col;
        state.ball_vx = -state.ball_vx;
    } else if col > MAX_COL {
        col = 2 * MAX_COL - col;
        state.ball_vx = -state.ball_vx;
    }
    state.ball_col = col;
    state.step_count += 1;

    if state.ball_row > 0 {
        return StepOutcome {
            reward: 0.0,
            terminal: false,
            resolved: None,
        };
    }

    let (left, right) = variant.paddle_span(state.paddle_center);
    let caught = (left..=right).contains(&state.ball_col);
    let (reward, terminal) = if variant.streak_target <= 1 {
        (if caught { 1.0 } else { 0.0 }, true)
    } else if !caught {
        (0.0, true)
    } else {
        state.streak += 1;
        if state.streak >= variant.streak_target {
            state.streak = 0;
            (1.0, true)
        } else {
            (0.0, false)
        }
    };
    state.terminal = terminal;
    if !terminal {
        state.spawn_ball();
    }
    StepOutcome {
        reward,
        terminal,
        resolved: Some(caught),
    }
}

/// Renders the state. The V2 background is redrawn from the state's
/// generator on every call.
pub fn render(state: &mut GridState, variant: &VariantConfig) -> Frame {
    let mut frame = Frame::blank();
    if variant.noisy_background {
        state.rng.fill(&mut frame.pixels[..]);
    }
    let image_row = |row: i32| -> usize {
        if variant.mirrored {
            row as usize
        } else {
            (TOP_ROW - row) as usize
        }
    };
    let (left, right) = variant.paddle_span(state.paddle_center);
    let paddle_row = image_row(0);
    for col in left..=right {
        frame.pixels[paddle_row * GRID + col as usize] = 255;
    }
    frame.pixels[image_row(state.ball_row) * GRID + state.ball_col as usize] = 255;
    frame
}

/// Column where the ball will reach the paddle row, by unfolding the
/// trajectory and folding it back with the period-40 triangle map.
pub fn landing_column(state: &GridState) -> i32 {
    assert!(state.ball_row >= 1, "ball already on the paddle row");
    let unfolded = state.ball_col + state.ball_vx * state.ball_row;
    let period = 2 * MAX_COL;
    let m = unfolded.rem_euclid(period);
    if m > MAX_COL {
        period - m
    } else {
        m
    }
}

/// Moves the paddle one cell toward the column that lines it up with the
/// landing column, staying put once aligned.
pub fn oracle_policy(state: &GridState, variant: &VariantConfig) -> Action {
    let (lo, hi) = variant.paddle_limits();
    let target = landing_column(state).clamp(lo, hi);
    match state.paddle_center.cmp(&target) {
        std::cmp::Ordering::Less => Action::Right,
        std::cmp::Ordering::Equal => Action::Stay,
        std::cmp::Ordering::Greater => Action::Left,
    }
}

/// Result of one [`Catch::step`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step {
    pub reward: f32,
    pub terminal: bool,
    pub resolved: Option<bool>,
}

/// A Catch game together with its frame stack.
#[derive(Clone, Debug)]
pub struct Catch {
    variant: VariantConfig,
    state: GridState,
    observation: Observation,
}

impl Catch {
    pub fn new(variant: VariantConfig, seed: u64) -> Self {
        let (state, observation) = reset(&variant, seed);
        Catch {
            variant,
            state,
            observation,
        }
    }

    pub fn variant(&self) -> &VariantConfig {
        &self.variant
    }

    pub fn state(&self) -> &GridState {
        &self.state
    }

    pub fn observation(&self) -> &Observation {
        &self.observation
    }

    pub fn is_terminal(&self) -> bool {
        self.state.terminal
    }

    pub fn step(&mut self, action: Action) -> Step {
        let outcome = physics_step(&mut self.state, action, &self.variant);
        let frame = render(&mut self.state, &self.variant);
        self.observation = self.observation.pushed(frame);
        Step {
            reward: outcome.reward,
            terminal: outcome.terminal,
            resolved: outcome.resolved,
        }
    }
}

/// Steps the physics `ball_row` times without rendering and returns where
/// the ball ends up. Test oracle for [`landing_column`].
pub fn simulate_landing(state: &GridState) -> i32 {
    let mut s = state.clone();
    let cfg = VariantId::V0.config();
    while s.ball_row > 0 {
        physics_step(&mut s, Action::Stay, &cfg);
    }
    s.ball_col
}

/// Outcome of running the oracle over every spawn pair of one variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleReport {
    pub cases: usize,
    pub caught: usize,
}

/// Plays one full drop from every `(col, vx)` spawn with the oracle policy.
pub fn oracle_exhaustive(variant: &VariantConfig) -> OracleReport {
    let mut caught = 0;
    let mut cases = 0;
    for col in 0..=MAX_COL {
        for vx in -2..=2 {
            let mut s = GridState::with_ball(TOP_ROW, col, vx, 0);
            let outcome = loop {
                let a = oracle_policy(&s, variant);
                let out = physics_step(&mut s, a, variant);
                if out.resolved.is_some() {
                    break out;
                }
            };
            cases += 1;
            if outcome.resolved == Some(true) {
                caught += 1;
            }
        }
    }
    OracleReport { cases, caught }
}

/// Compares [`landing_column`] with [`simulate_landing`] on every
/// `(row, col, vx)` with the ball above the paddle row.
pub fn landing_exhaustive() -> OracleReport {
    let mut cases = 0;
    let mut caught = 0;
    for row in 1..=TOP_ROW {
        for col in 0..=MAX_COL {
            for vx in -2..=2 {
                let s = GridState::with_ball(row, col, vx, 0);
                cases += 1;
                if landing_column(&s) == simulate_landing(&s) {
                    caught += 1;
                }
            }
        }
    }
    OracleReport { cases, caught }
}

/// Plays one oracle episode of a streak variant and returns how many balls
/// had been caught when the first nonzero reward arrived.
pub fn oracle_sparse_reward_catch(variant: VariantId, seed: u64) -> Option<u32> {
    let cfg = variant.config();
    let mut env = Catch::new(cfg, seed);
    let mut catches = 0;
    while !env.is_terminal() {
        let a = oracle_policy(env.state(), &cfg);
        let step = env.step(a);
        if step.resolved == Some(true) {
            catches += 1;
        }
        if step.reward != 0.0 {
            return Some(catches);
        }
    }
    None
}
