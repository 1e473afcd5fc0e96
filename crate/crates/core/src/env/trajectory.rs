use std::io::Write;

use crate::error::Result;

/// One agent decision of a logged rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub episode: u64,
    pub tick: u32,
    pub action: usize,
    pub reward: f64,
    pub terminal: bool,
    /// Life points (gather) or target bearing in radians (shooter).
    pub info: f64,
}

/// CSV writer with columns `episode,tick,action,reward,terminal,info`.
pub struct TrajectoryWriter<W: Write> {
    out: W,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(mut out: W, info_column: &str) -> Result<Self> {
        writeln!(out, "episode,tick,action,reward,terminal,{info_column}")?;
        Ok(Self { out })
    }

    pub fn write(&mut self, row: &TrajectoryRow) -> Result<()> {
        writeln!(
            self.out,
            "{},{},{},{},{},{}",
            row.episode, row.tick, row.action, row.reward, row.terminal as u8, row.info
        )?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}
