//! Down-sampled simulation records and settling-time measurement.

use std::fmt;
use std::str::FromStr;

macro_rules! trace_columns {
    ($($field:ident),+ $(,)?) => {
        /// One row of the trace. Angles named `*_deg` are wrapped to
        /// [-180, 180); `phi` is the unwrapped frame error in radians.
        #[derive(Debug, Clone, Copy, PartialEq, Default)]
        pub struct TraceRecord {
            $(pub $field: f64,)+
        }

        /// A named column of [`TraceRecord`].
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        #[allow(non_camel_case_types)]
        pub enum Channel {
            $($field,)+
        }

        impl Channel {
            pub const ALL: &'static [Channel] = &[$(Channel::$field,)+];

            pub fn name(&self) -> &'static str {
                match self {
                    $(Channel::$field => stringify!($field),)+
                }
            }
        }

        impl TraceRecord {
            pub fn get(&self, c: Channel) -> f64 {
                match c {
                    $(Channel::$field => self.$field,)+
                }
            }

            pub fn values(&self) -> Vec<f64> {
                vec![$(self.$field,)+]
            }

            /// Builds a record from values in [`Channel::ALL`] order.
            pub fn from_values(v: &[f64]) -> Option<TraceRecord> {
                if v.len() != Channel::ALL.len() {
                    return None;
                }
                let mut it = v.iter().copied();
                Some(TraceRecord { $($field: it.next()?,)+ })
            }
        }
    };
}

trace_columns!(
    t, i_d, i_q, i_d_ref, i_q_ref, i_gd, i_gq, v_d, v_q, phi, phi_deg, phi_ref_deg, xhat_d, xhat_q,
    theta_1, theta_2, theta_3, f_hat, vg_hat, f_true, vg_true, e_phi, u1, pe_metric, f_norm, freeze,
);

/// Version tag of the column layout.
pub const TRACE_FORMAT: &str = "apll-trace v1";

impl FromStr for Channel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Channel::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown channel '{s}'"))
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// `(t, value)` pairs for one channel.
    pub fn series(&self, c: Channel) -> Vec<(f64, f64)> {
        self.records.iter().map(|r| (r.t, r.get(c))).collect()
    }

    /// Value at the last sample with `t <= at`.
    pub fn value_at(&self, c: Channel, at: f64) -> Option<f64> {
        self.records.iter().take_while(|r| r.t <= at + 1e-12).last().map(|r| r.get(c))
    }
}

/// Width of the acceptance band around a target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Band {
    /// Half-width as a fraction of `|target|`.
    Fraction(f64),
    /// Absolute half-width in channel units.
    Absolute(f64),
}

impl Band {
    pub fn half_width(&self, target: f64) -> f64 {
        match *self {
            Band::Fraction(f) => f * target.abs(),
            Band::Absolute(a) => a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Settling {
    /// Seconds after the reference instant at which the channel enters the
    /// band for good.
    Settled(f64),
    NotSettled,
}

impl Settling {
    pub fn time(&self) -> Option<f64> {
        match self {
            Settling::Settled(t) => Some(*t),
            Settling::NotSettled => None,
        }
    }
}

impl fmt::Display for Settling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Settling::Settled(t) => write!(f, "{t:.4} s"),
            Settling::NotSettled => f.write_str("not settled"),
        }
    }
}

/// Settling of `channel` to `target` after `from`. A channel still outside
/// the band at the final sample has not settled.
pub fn settling_time(trace: &Trace, channel: Channel, target: f64, band: Band, from: f64) -> Settling {
    settling_time_by(trace, |r| r.get(channel), target, band, from)
}

/// Like [`settling_time`] for a derived quantity.
pub fn settling_time_by(
    trace: &Trace,
    value: impl Fn(&TraceRecord) -> f64,
    target: f64,
    band: Band,
    from: f64,
) -> Settling {
    let half = band.half_width(target);
    let window: Vec<&TraceRecord> = trace.records.iter().filter(|r| r.t >= from - 1e-12).collect();
    if window.is_empty() {
        return Settling::NotSettled;
    }
    let outside = |r: &TraceRecord| {
        let v = value(r);
        let d = (v - target).abs();
        d.is_nan() || d > half
    };
    match window.iter().rposition(|r| outside(r)) {
        None => Settling::Settled(0.0),
        Some(i) if i + 1 == window.len() => Settling::NotSettled,
        Some(i) => Settling::Settled(window[i + 1].t - from),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(f: impl Fn(f64) -> f64, dt: f64, n: usize) -> Trace {
        Trace {
            records: (0..n)
                .map(|k| {
                    let t = k as f64 * dt;
                    TraceRecord { t, i_d: f(t), ..Default::default() }
                })
                .collect(),
        }
    }

    #[test]
    fn constant_at_target_settles_immediately() {
        let tr = synthetic(|_| 2.0, 1e-3, 100);
        assert_eq!(settling_time(&tr, Channel::i_d, 2.0, Band::Fraction(0.02), 0.0), Settling::Settled(0.0));
    }

    #[test]
    fn never_entering_band_is_not_settled() {
        let tr = synthetic(|_| 3.0, 1e-3, 100);
        assert_eq!(settling_time(&tr, Channel::i_d, 2.0, Band::Fraction(0.02), 0.0), Settling::NotSettled);
    }

    #[test]
    fn first_order_settles_at_tau_ln_50() {
        let tau = 0.05;
        let dt = 1e-3;
        let tr = synthetic(|t| 1.0 - (-t / tau).exp(), dt, 1000);
        let ts = settling_time(&tr, Channel::i_d, 1.0, Band::Fraction(0.02), 0.0).time().unwrap();
        let exact = tau * 50f64.ln();
        assert!((exact - 0.196).abs() < 1e-3);
        assert!((ts - exact).abs() <= dt, "{ts} vs {exact}");
    }

    #[test]
    fn settling_is_measured_from_the_event() {
        let tr = synthetic(|t| if t < 0.5 { 0.0 } else { 1.0 }, 1e-3, 1000);
        let s = settling_time(&tr, Channel::i_d, 1.0, Band::Absolute(0.1), 0.4);
        assert!((s.time().unwrap() - 0.1).abs() < 1e-9);
    }

    #[test]
    fn channel_names_round_trip() {
        for c in Channel::ALL {
            assert_eq!(c.name().parse::<Channel>().unwrap(), *c);
        }
        assert!("bogus".parse::<Channel>().is_err());
        let r = TraceRecord { t: 1.0, freeze: 1.0, ..Default::default() };
        assert_eq!(TraceRecord::from_values(&r.values()), Some(r));
        assert_eq!(TraceRecord::from_values(&[1.0]), None);
    }
}
