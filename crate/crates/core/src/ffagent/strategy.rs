use std::fmt;
use std::str::FromStr;

/// Fast-forwarding pace. Each pace fixes its own action-space size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    Slow,
    Normal,
    Fast,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Slow, Strategy::Normal, Strategy::Fast];

    /// Number of actions; action `a` in `1..=A` skips exactly `a` frames.
    pub fn action_space(self) -> usize {
        match self {
            Strategy::Slow => 15,
            Strategy::Normal => 25,
            Strategy::Fast => 35,
        }
    }

    /// Wire/file code.
    pub fn code(self) -> u8 {
        match self {
            Strategy::Slow => 0,
            Strategy::Normal => 1,
            Strategy::Fast => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Slow => "slow",
            Strategy::Normal => "normal",
            Strategy::Fast => "fast",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "slow" => Ok(Strategy::Slow),
            "normal" => Ok(Strategy::Normal),
            "fast" => Ok(Strategy::Fast),
            other => Err(format!("unknown strategy `{other}` (expected slow|normal|fast)")),
        }
    }
}
