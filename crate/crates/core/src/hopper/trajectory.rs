//! Control-rate trajectory dump.

use std::io::Write;

use crate::error::Result;

pub const HEADER: &str = "t,z,z_dot,q1,q2,qd1,qd2,pdes1,pdes2,tau1,tau2,r1,r2,r3,r4,r5,contact";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub z: f64,
    pub z_dot: f64,
    pub q: [f64; 2],
    pub q_dot: [f64; 2],
    pub desired: [f64; 2],
    pub torque: [f64; 2],
    pub terms: [f64; 5],
    pub contact: bool,
}

pub fn write_csv(w: &mut impl Write, rows: &[TrajectoryRow]) -> Result<()> {
    writeln!(w, "{HEADER}")?;
    for r in rows {
        write!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.t,
            r.z,
            r.z_dot,
            r.q[0],
            r.q[1],
            r.q_dot[0],
            r.q_dot[1],
            r.desired[0],
            r.desired[1],
            r.torque[0],
            r.torque[1]
        )?;
        for t in r.terms {
            write!(w, ",{t}")?;
        }
        writeln!(w, ",{}", u8::from(r.contact))?;
    }
    Ok(())
}
