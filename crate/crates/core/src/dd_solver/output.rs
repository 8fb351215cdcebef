use std::fmt::Write as _;

use super::SolveResult;

/// Text container of a solve:
///
/// ```text
/// tenvote-result 1
/// scheme <label>
/// converged <true|false>
/// iterations <k>
/// beta <value|none>
/// dofs <n>
/// u <n values>
/// eta <n values>
/// points <m> <m_e>
/// <per point: ε…, σ…, assigned index>
/// history <h>
/// <one distance per line>
/// ```
pub fn write_result(r: &SolveResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "tenvote-result 1");
    let _ = writeln!(s, "scheme {}", r.config.label());
    let _ = writeln!(s, "converged {}", r.converged);
    let _ = writeln!(s, "iterations {}", r.iterations);
    match r.beta {
        Some(b) => {
            let _ = writeln!(s, "beta {b:e}");
        }
        None => s.push_str("beta none\n"),
    }
    let _ = writeln!(s, "dofs {}", r.u.len());
    for (name, v) in [("u", &r.u), ("eta", &r.eta)] {
        s.push_str(name);
        for x in v.iter() {
            let _ = write!(s, " {x:e}");
        }
        s.push('\n');
    }
    let m_e = r.z.states.first().map_or(0, |z| z.dim());
    let _ = writeln!(s, "points {} {m_e}", r.z.len());
    for (z, a) in r.z.states.iter().zip(&r.assignment) {
        let mut first = true;
        for x in z.strain.iter().chain(z.stress.iter()) {
            if !first {
                s.push(' ');
            }
            first = false;
            let _ = write!(s, "{x:e}");
        }
        let _ = writeln!(s, " {a}");
    }
    let _ = writeln!(s, "history {}", r.distance_history.len());
    for d in &r.distance_history {
        let _ = writeln!(s, "{d:e}");
    }
    s
}
