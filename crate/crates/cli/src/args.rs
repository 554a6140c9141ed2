use clap::ValueEnum;

use gramlog::parser::PlaceholderStyle;
use gramlog::synth::EventOrder;
use gramlog::threshold::{BreakBasis, ThresholdPair};

/// `300K`, `1M`, `2G` or plain bytes; suffixes are powers of 1024 and an
/// optional trailing `B` is accepted.
pub fn parse_size(s: &str) -> Result<u64, String> {
    let t = s.trim();
    let t = t.strip_suffix(['B', 'b']).unwrap_or(t);
    let (digits, shift) = match t.chars().last() {
        Some('K' | 'k') => (&t[..t.len() - 1], 10),
        Some('M' | 'm') => (&t[..t.len() - 1], 20),
        Some('G' | 'g') => (&t[..t.len() - 1], 30),
        _ => (t, 0),
    };
    let n: u64 = digits.trim().parse().map_err(|_| format!("bad size `{s}`"))?;
    if n == 0 {
        return Err(format!("size must be positive, got `{s}`"));
    }
    n.checked_mul(1 << shift).ok_or_else(|| format!("size `{s}` is too large"))
}

/// `t3,t2`.
pub fn parse_threshold(s: &str) -> Result<ThresholdPair, String> {
    let (t3, t2) = s.split_once(',').ok_or_else(|| format!("expected `t3,t2`, got `{s}`"))?;
    let num = |v: &str| -> Result<u64, String> {
        match v.trim().parse::<u64>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(format!("thresholds are positive integers, got `{v}`")),
        }
    };
    Ok(ThresholdPair { t2: num(t2)?, t3: num(t3)? })
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Basis {
    Derivative,
    Smoothed,
}

impl From<Basis> for BreakBasis {
    fn from(b: Basis) -> Self {
        match b {
            Basis::Derivative => BreakBasis::Derivative,
            Basis::Smoothed => BreakBasis::Smoothed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Placeholder {
    /// `$1`, `$2`, ...
    Dollar,
    /// `<*>`
    Logpai,
}

impl From<Placeholder> for PlaceholderStyle {
    fn from(p: Placeholder) -> Self {
        match p {
            Placeholder::Dollar => PlaceholderStyle::Dollar,
            Placeholder::Logpai => PlaceholderStyle::LogPai,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Order {
    Independent,
    Workflows,
    Cycle,
}

impl From<Order> for EventOrder {
    fn from(o: Order) -> Self {
        match o {
            Order::Independent => EventOrder::Independent,
            Order::Workflows => EventOrder::Workflows { workflows: 12, concurrency: 3 },
            Order::Cycle => EventOrder::CYCLE,
        }
    }
}
