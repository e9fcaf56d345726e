//! The graphical representation: healing crosses and infection arrows.
//!
//! All events of one realization live in a single time-ordered array. A
//! cross at site `x` heals `x` if it is infected; an arrow on the bond
//! `(x, x+1)` carries infection across the bond in either direction. Per-site
//! and per-bond index tables support cluster sweeps that only touch events
//! near their current support.

use crate::model::{ModelParams, Window};
use crate::rng::SubStream;
use rand::Rng;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum EventKind {
    Cross,
    Arrow,
}

/// One event of the graphical representation. For an arrow, `site` is the
/// left endpoint of the bond `(site, site + 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub site: i64,
}

#[derive(Debug, Error)]
pub enum EventLogError {
    #[error(
        "window of {width} sites over horizon {horizon} expects ~{expected:.0} events, \
         above the budget of {budget}; reduce the horizon to ~{suggested:.1} or lower lambda"
    )]
    Capacity {
        width: usize,
        horizon: f64,
        expected: f64,
        budget: u64,
        suggested: f64,
    },
    #[error("event list for {context} is not strictly increasing or out of [0, horizon]")]
    BadEventList { context: String },
}

const ARROW_BIT: u32 = 1 << 31;

/// Default cap on the expected number of events in one log (~1.2 GB of
/// event storage when hit).
pub const DEFAULT_EVENT_BUDGET: u64 = 60_000_000;

#[derive(Clone, Debug)]
pub struct EventLog {
    window: Window,
    lambda: f64,
    stream_id: u64,
    /// Strictly increasing for sampled logs; ties in hand-built logs are
    /// ordered by (time, kind, site).
    times: Vec<f64>,
    /// Bit 31 set for arrows; low bits are the site index from `x_min`.
    codes: Vec<u32>,
    /// Per site, indices into `times` of the crosses at that site.
    cross_index: Vec<Vec<u32>>,
    /// Per bond `(x, x+1)`, indices of the arrows on that bond.
    arrow_index: Vec<Vec<u32>>,
}

pub fn expected_event_count(params: &ModelParams, window: &Window) -> f64 {
    let w = window.width() as f64;
    (w + (w - 1.0) * params.lambda) * window.horizon
}

/// Draw the full graphical representation on `window` from `stream`.
///
/// Crosses form a rate-1 Poisson process at every site and arrows a
/// rate-`lambda` process on every bond, all independent. The log is a pure
/// function of `(seed, stream id, window, lambda)`.
pub fn sample_event_log(
    params: &ModelParams,
    window: &Window,
    stream: SubStream,
) -> Result<EventLog, EventLogError> {
    sample_event_log_with_budget(params, window, stream, DEFAULT_EVENT_BUDGET)
}

pub fn sample_event_log_with_budget(
    params: &ModelParams,
    window: &Window,
    mut stream: SubStream,
    budget: u64,
) -> Result<EventLog, EventLogError> {
    let expected = expected_event_count(params, window);
    if expected > budget as f64 {
        let per_unit = expected / window.horizon;
        return Err(EventLogError::Capacity {
            width: window.width(),
            horizon: window.horizon,
            expected,
            budget,
            suggested: budget as f64 / per_unit,
        });
    }
    let width = window.width();
    let cross_rate = width as f64;
    let arrow_rate = (width - 1) as f64 * params.lambda;
    let total_rate = cross_rate + arrow_rate;

    let mut times = Vec::with_capacity(expected as usize + 16);
    let mut codes = Vec::with_capacity(expected as usize + 16);
    let mut t = 0.0_f64;
    loop {
        // superposition of all per-site and per-bond Poisson processes
        let u: f64 = stream.rng.gen();
        t += -(1.0 - u).ln() / total_rate;
        if t > window.horizon {
            break;
        }
        let pick = stream.rng.gen::<f64>() * total_rate;
        let code = if pick < cross_rate {
            (pick as usize).min(width - 1) as u32
        } else {
            let bond = ((pick - cross_rate) / params.lambda) as usize;
            bond.min(width - 2) as u32 | ARROW_BIT
        };
        times.push(t);
        codes.push(code);
    }
    Ok(EventLog::from_sorted(
        *window, params.lambda, stream.id, times, codes,
    ))
}

impl EventLog {
    fn from_sorted(
        window: Window,
        lambda: f64,
        stream_id: u64,
        times: Vec<f64>,
        codes: Vec<u32>,
    ) -> Self {
        let width = window.width();
        let mut cross_index = vec![Vec::new(); width];
        let mut arrow_index = vec![Vec::new(); width.saturating_sub(1)];
        for (i, &code) in codes.iter().enumerate() {
            if code & ARROW_BIT != 0 {
                arrow_index[(code & !ARROW_BIT) as usize].push(i as u32);
            } else {
                cross_index[code as usize].push(i as u32);
            }
        }
        Self {
            window,
            lambda,
            stream_id,
            times,
            codes,
            cross_index,
            arrow_index,
        }
    }

    /// Build a log from explicit per-site cross times and per-bond arrow
    /// times (index 0 = bond at `x_min`). Lists must be strictly increasing
    /// within `[0, horizon]`. Simultaneous events across lists are ordered by
    /// (time, kind, site), crosses first.
    pub fn from_parts(
        window: Window,
        lambda: f64,
        crosses: Vec<Vec<f64>>,
        arrows: Vec<Vec<f64>>,
    ) -> Result<Self, EventLogError> {
        let width = window.width();
        assert_eq!(crosses.len(), width, "one cross list per site");
        assert_eq!(arrows.len(), width - 1, "one arrow list per bond");
        let check = |list: &[f64], context: String| -> Result<(), EventLogError> {
            for (i, &t) in list.iter().enumerate() {
                let ok = t >= 0.0 && t <= window.horizon && (i == 0 || list[i - 1] < t);
                if !ok {
                    return Err(EventLogError::BadEventList { context });
                }
            }
            Ok(())
        };
        let mut all: Vec<(f64, EventKind, i64, u32)> = Vec::new();
        for (i, list) in crosses.iter().enumerate() {
            check(list, format!("crosses at site {}", window.site(i)))?;
            for &t in list {
                all.push((t, EventKind::Cross, window.site(i), i as u32));
            }
        }
        for (i, list) in arrows.iter().enumerate() {
            check(list, format!("arrows on bond {}", window.site(i)))?;
            for &t in list {
                all.push((t, EventKind::Arrow, window.site(i), i as u32 | ARROW_BIT));
            }
        }
        all.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .unwrap()
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        let times = all.iter().map(|e| e.0).collect();
        let codes = all.iter().map(|e| e.3).collect();
        Ok(Self::from_sorted(window, lambda, stream_id_none(), times, codes))
    }

    pub(crate) fn rebuild(
        window: Window,
        lambda: f64,
        stream_id: u64,
        times: Vec<f64>,
        codes: Vec<u32>,
    ) -> Self {
        Self::from_sorted(window, lambda, stream_id, times, codes)
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn event(&self, i: usize) -> Event {
        let code = self.codes[i];
        Event {
            time: self.times[i],
            kind: if code & ARROW_BIT != 0 {
                EventKind::Arrow
            } else {
                EventKind::Cross
            },
            site: self.window.site((code & !ARROW_BIT) as usize),
        }
    }

    #[inline]
    pub(crate) fn raw(&self, i: usize) -> (f64, u32) {
        (self.times[i], self.codes[i])
    }

    /// All events in time order, ties ordered by (time, kind, site).
    pub fn events(&self) -> impl Iterator<Item = Event> + '_ {
        (0..self.len()).map(move |i| self.event(i))
    }

    /// Index of the first event with time strictly greater than `t`.
    pub fn first_after(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t)
    }

    /// Index of the first event with time >= `t`.
    pub fn first_at_or_after(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s < t)
    }

    pub fn crosses_at(&self, x: i64) -> Vec<f64> {
        self.cross_index[self.window.index(x)]
            .iter()
            .map(|&i| self.times[i as usize])
            .collect()
    }

    /// Arrow times on the bond `(x, x+1)`.
    pub fn arrows_at(&self, x: i64) -> Vec<f64> {
        self.arrow_index[self.window.index(x)]
            .iter()
            .map(|&i| self.times[i as usize])
            .collect()
    }

    pub(crate) fn cross_stream(&self, site_index: usize) -> &[u32] {
        &self.cross_index[site_index]
    }

    pub(crate) fn arrow_stream(&self, bond_index: usize) -> &[u32] {
        &self.arrow_index[bond_index]
    }

    pub(crate) fn time_of(&self, i: u32) -> f64 {
        self.times[i as usize]
    }

    /// FNV-1a over the window, lambda and every event, for cheap identity
    /// checks between logs.
    pub fn content_hash(&self) -> u64 {
        let mut h = 0xcbf29ce484222325_u64;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        eat(&self.window.x_min.to_le_bytes());
        eat(&self.window.x_max.to_le_bytes());
        eat(&self.window.horizon.to_le_bytes());
        eat(&self.lambda.to_le_bytes());
        for i in 0..self.len() {
            eat(&self.times[i].to_le_bytes());
            eat(&self.codes[i].to_le_bytes());
        }
        h
    }
}

fn stream_id_none() -> u64 {
    u64::MAX
}

const DUMP_MAGIC: &[u8; 8] = b"CPWEVLG1";

impl EventLog {
    /// Binary dump: header (window, lambda, stream id), then per-site and
    /// per-bond length-prefixed arrays of little-endian f64 times.
    pub fn write_to<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(DUMP_MAGIC)?;
        out.write_all(&self.window.x_min.to_le_bytes())?;
        out.write_all(&self.window.x_max.to_le_bytes())?;
        out.write_all(&self.window.horizon.to_le_bytes())?;
        out.write_all(&self.lambda.to_le_bytes())?;
        out.write_all(&self.stream_id.to_le_bytes())?;
        let mut write_list = |idx: &[u32]| -> std::io::Result<()> {
            out.write_all(&(idx.len() as u64).to_le_bytes())?;
            for &i in idx {
                out.write_all(&self.times[i as usize].to_le_bytes())?;
            }
            Ok(())
        };
        for list in &self.cross_index {
            write_list(list)?;
        }
        for list in &self.arrow_index {
            write_list(list)?;
        }
        Ok(())
    }

    pub fn read_from<R: std::io::Read>(mut input: R) -> std::io::Result<Self> {
        let bad = |msg: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, msg);
        let mut buf8 = [0u8; 8];
        input.read_exact(&mut buf8)?;
        if &buf8 != DUMP_MAGIC {
            return Err(bad("bad magic"));
        }
        let read_u64 = |input: &mut R| -> std::io::Result<u64> {
            let mut b = [0u8; 8];
            input.read_exact(&mut b)?;
            Ok(u64::from_le_bytes(b))
        };
        let x_min = read_u64(&mut input)? as i64;
        let x_max = read_u64(&mut input)? as i64;
        let horizon = f64::from_bits(read_u64(&mut input)?);
        let lambda = f64::from_bits(read_u64(&mut input)?);
        let stream_id = read_u64(&mut input)?;
        let window = Window::new(x_min, x_max, horizon).map_err(|e| bad(&e.to_string()))?;
        let width = window.width();
        let read_list = |input: &mut R| -> std::io::Result<Vec<f64>> {
            let n = read_u64(input)? as usize;
            let mut v = Vec::with_capacity(n);
            for _ in 0..n {
                v.push(f64::from_bits(read_u64(input)?));
            }
            Ok(v)
        };
        let mut crosses = Vec::with_capacity(width);
        for _ in 0..width {
            crosses.push(read_list(&mut input)?);
        }
        let mut arrows = Vec::with_capacity(width - 1);
        for _ in 0..width - 1 {
            arrows.push(read_list(&mut input)?);
        }
        let mut log = EventLog::from_parts(window, lambda, crosses, arrows)
            .map_err(|e| bad(&e.to_string()))?;
        log.stream_id = stream_id;
        Ok(log)
    }
}
