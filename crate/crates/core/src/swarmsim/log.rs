//! Trajectory logs and their two CSV files (agent states, pair forces).

use std::io::{Read, Write};

use super::{Behavior, KinLabel, Vec2};
use crate::error::Result;
use crate::fmt_num;
use crate::table::{for_each_row, int, malformed, num};

pub const AGENT_HEADER: [&str; 9] = ["t", "agent", "px", "py", "vx", "vy", "ax", "ay", "kin"];
pub const PAIR_HEADER: [&str; 7] = ["t", "i", "j", "fx", "fy", "r", "kin_pair"];

#[derive(Clone, Debug, PartialEq)]
pub struct AgentRecord {
    pub agent: usize,
    pub pos: Vec2,
    pub vel: Vec2,
    /// Applied acceleration at this state.
    pub acc: Vec2,
    pub kin: KinLabel,
}

/// Force applied to agent `i` by agent `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairRecord {
    pub i: usize,
    pub j: usize,
    pub force: Vec2,
    pub r: f64,
    pub kin_pair: u8,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub t: f64,
    pub agents: Vec<AgentRecord>,
    pub pairs: Vec<PairRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryLog {
    pub behavior: Behavior,
    pub run: usize,
    pub frames: Vec<Frame>,
    /// Coincident pairs met while integrating.
    pub degenerate: usize,
}

fn preamble<W: Write>(out: &mut W, lines: &[String]) -> Result<()> {
    for l in lines {
        writeln!(out, "# {l}")?;
    }
    Ok(())
}

impl TrajectoryLog {
    pub fn write_agents<W: Write>(&self, mut out: W, header_lines: &[String]) -> Result<()> {
        preamble(&mut out, header_lines)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(AGENT_HEADER)?;
        for f in &self.frames {
            let t = fmt_num(f.t);
            for a in &f.agents {
                w.write_record([
                    t.clone(),
                    a.agent.to_string(),
                    fmt_num(a.pos[0]),
                    fmt_num(a.pos[1]),
                    fmt_num(a.vel[0]),
                    fmt_num(a.vel[1]),
                    fmt_num(a.acc[0]),
                    fmt_num(a.acc[1]),
                    a.kin.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_pairs<W: Write>(&self, mut out: W, header_lines: &[String]) -> Result<()> {
        preamble(&mut out, header_lines)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(PAIR_HEADER)?;
        for f in &self.frames {
            let t = fmt_num(f.t);
            for p in &f.pairs {
                w.write_record([
                    t.clone(),
                    p.i.to_string(),
                    p.j.to_string(),
                    fmt_num(p.force[0]),
                    fmt_num(p.force[1]),
                    fmt_num(p.r),
                    p.kin_pair.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a log back from its agent file and (optional) pair file.
    /// `agents_name` and `pairs_name` label error messages.
    pub fn read<A: Read, P: Read>(
        behavior: Behavior,
        run: usize,
        agents: A,
        agents_name: &str,
        pairs: Option<(P, &str)>,
    ) -> Result<TrajectoryLog> {
        let mut frames: Vec<Frame> = Vec::new();
        for_each_row(agents, agents_name, &AGENT_HEADER, |line, rec| {
            let t = num(rec, 0, agents_name, line)?;
            let rec_out = AgentRecord {
                agent: int(rec, 1, agents_name, line)?,
                pos: [num(rec, 2, agents_name, line)?, num(rec, 3, agents_name, line)?],
                vel: [num(rec, 4, agents_name, line)?, num(rec, 5, agents_name, line)?],
                acc: [num(rec, 6, agents_name, line)?, num(rec, 7, agents_name, line)?],
                kin: int(rec, 8, agents_name, line)? as u8,
            };
            match frames.last_mut() {
                Some(f) if f.t == t => {
                    if rec_out.agent != f.agents.len() {
                        return Err(malformed(agents_name, line, "agent rows out of order"));
                    }
                    f.agents.push(rec_out);
                }
                last => {
                    if last.is_some_and(|f| f.t > t) {
                        return Err(malformed(agents_name, line, "time goes backwards"));
                    }
                    if rec_out.agent != 0 {
                        return Err(malformed(agents_name, line, "frame does not start at agent 0"));
                    }
                    frames.push(Frame { t, agents: vec![rec_out], pairs: Vec::new() });
                }
            }
            Ok(())
        })?;
        if let Some(n) = frames.first().map(|f| f.agents.len()) {
            if let Some(bad) = frames.iter().position(|f| f.agents.len() != n) {
                return Err(malformed(agents_name, 0, &format!("frame {bad} has a different agent count")));
            }
        }
        if let Some((pairs, pairs_name)) = pairs {
            let mut cursor = 0usize;
            for_each_row(pairs, pairs_name, &PAIR_HEADER, |line, rec| {
                let t = num(rec, 0, pairs_name, line)?;
                while cursor < frames.len() && frames[cursor].t < t {
                    cursor += 1;
                }
                if cursor >= frames.len() || frames[cursor].t != t {
                    return Err(malformed(pairs_name, line, "pair row time matches no agent frame"));
                }
                let n = frames[cursor].agents.len();
                let p = PairRecord {
                    i: int(rec, 1, pairs_name, line)?,
                    j: int(rec, 2, pairs_name, line)?,
                    force: [num(rec, 3, pairs_name, line)?, num(rec, 4, pairs_name, line)?],
                    r: num(rec, 5, pairs_name, line)?,
                    kin_pair: int(rec, 6, pairs_name, line)? as u8,
                };
                if p.i >= n || p.j >= n || p.i == p.j {
                    return Err(malformed(pairs_name, line, "pair indices out of range"));
                }
                frames[cursor].pairs.push(p);
                Ok(())
            })?;
        }
        Ok(TrajectoryLog { behavior, run, frames, degenerate: 0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::swarmsim::{simulate_run, SimConfig};

    #[test]
    fn csv_round_trip() {
        let cfg = SimConfig { duration_s: 0.5, rng_seed: 2, ..SimConfig::for_behavior(Behavior::Square) };
        let log = simulate_run(&cfg, 0).unwrap();
        let (mut a, mut p) = (Vec::new(), Vec::new());
        log.write_agents(&mut a, &["seed=2".into()]).unwrap();
        log.write_pairs(&mut p, &[]).unwrap();
        assert!(String::from_utf8(a.clone()).unwrap().starts_with("# seed=2\nt,agent,px,py,vx,vy,ax,ay,kin\n"));
        let back = TrajectoryLog::read(Behavior::Square, 0, a.as_slice(), "a.csv", Some((p.as_slice(), "p.csv"))).unwrap();
        assert_eq!(back.frames, log.frames);
    }

    #[test]
    fn malformed_rows_name_file_and_line() {
        let text = "# c\nt,agent,px,py,vx,vy,ax,ay,kin\n0,0,0.1,0.2,0,0,0,0,0\n0,1,zz,0.2,0,0,0,0,0\n";
        let err = TrajectoryLog::read(Behavior::Hex, 0, text.as_bytes(), "run.csv", None::<(&[u8], &str)>).unwrap_err();
        match err {
            Error::Malformed { file, line, .. } => assert_eq!((file.as_str(), line), ("run.csv", 4)),
            e => panic!("{e}"),
        }
        let short = "t,agent,px,py,vx,vy,ax,ay,kin\n0,0,0.1\n";
        assert!(TrajectoryLog::read(Behavior::Hex, 0, short.as_bytes(), "s", None::<(&[u8], &str)>).is_err());
    }
}
