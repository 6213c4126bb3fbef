//! Plain-text patch files: tensor-product Bernstein patches with edge flags.
//!
//! Grammar (whitespace separated, `#` starts a comment running to the end of
//! the line); one record per patch:
//!
//! ```text
//! patch
//! <d_u> <d_v>                    # polynomial degrees, >= 1
//! <x y z> × (d_u+1)(d_v+1)       # control points, u index slow (row-major)
//! <edge_u> <edge_v>              # each of: none | both | low | high
//! <p>                            # grading order of the edge maps, >= 2
//! ```
//!
//! The file describes an open surface unless it starts with the word
//! `closed` before the first record.

use super::bezier::BezierPatch;
use super::surface_map::SurfaceMap;
use super::{Patch, PatchAtlas, ParamBox};
use crate::error::Error;
use crate::maps::EdgeFlag;
use crate::vec3::Vec3;
use crate::Result;
use std::path::Path;
use std::sync::Arc;

pub fn load_patch_file(path: impl AsRef<Path>) -> Result<PatchAtlas> {
    let text = std::fs::read_to_string(path)?;
    parse_patch_file(&text)
}

pub fn parse_patch_file(text: &str) -> Result<PatchAtlas> {
    let mut tokens = Tokens::new(text);
    let mut closed = false;
    if tokens.peek() == Some("closed") {
        tokens.next_token()?;
        closed = true;
    }

    let mut patches = Vec::new();
    while let Some(tok) = tokens.peek() {
        let record_line = tokens.line;
        if tok != "patch" {
            return Err(tokens.error(format!("expected 'patch', found '{tok}'")));
        }
        tokens.next_token()?;
        let id = patches.len();
        let describe = |msg: String| format!("patch {id}: {msg}");

        let d_u: usize = tokens.parse_with(|m| describe(format!("bad u degree: {m}")))?;
        let d_v: usize = tokens.parse_with(|m| describe(format!("bad v degree: {m}")))?;
        if d_u == 0 || d_v == 0 || d_u > 64 || d_v > 64 {
            return Err(Error::PatchFile {
                line: record_line,
                message: describe(format!("degrees must be in 1..=64, got ({d_u}, {d_v})")),
            });
        }

        let n_ctrl = (d_u + 1) * (d_v + 1);
        let mut ctrl: Vec<Vec3> = Vec::with_capacity(n_ctrl);
        for c in 0..n_ctrl {
            let mut point = [0.0; 3];
            for coord in &mut point {
                *coord = tokens.parse_with(|m| {
                    describe(format!(
                        "expected {n_ctrl} control points (x y z each), stopped at point {c}: {m}"
                    ))
                })?;
            }
            ctrl.push(point);
        }

        let edge_u = parse_flag(&mut tokens, id, "u")?;
        let edge_v = parse_flag(&mut tokens, id, "v")?;
        let p: u32 = tokens.parse_with(|m| describe(format!("bad grading order: {m}")))?;
        if p < 2 {
            return Err(Error::PatchFile {
                line: tokens.line,
                message: describe(format!("grading order must be at least 2, got {p}")),
            });
        }

        let bezier = BezierPatch::new(d_u, d_v, ctrl);
        check_not_degenerate(&bezier, id, record_line)?;
        patches.push(Patch {
            id,
            map: Arc::new(SurfaceMap::Bezier(bezier)),
            sub: ParamBox::FULL,
            edge_u,
            edge_v,
            cov_p: p,
            n_u: 16,
            n_v: 16,
        });
    }

    if patches.is_empty() {
        return Err(Error::PatchFile {
            line: 1,
            message: "file contains no patch records".into(),
        });
    }
    Ok(PatchAtlas { patches, closed })
}

fn parse_flag(tokens: &mut Tokens, id: usize, dir: &str) -> Result<EdgeFlag> {
    let tok = tokens.next_token()?;
    match tok {
        "none" => Ok(EdgeFlag::None),
        "both" => Ok(EdgeFlag::BothEnds),
        "low" => Ok(EdgeFlag::LowEndOnly),
        "high" => Ok(EdgeFlag::HighEndOnly),
        other => Err(Error::PatchFile {
            line: tokens.line,
            message: format!(
                "patch {id}: bad {dir} edge flag '{other}' (expected none|both|low|high)"
            ),
        }),
    }
}

/// Interior Jacobian sampling; rejects patches that collapse somewhere away
/// from their boundary.
fn check_not_degenerate(bezier: &BezierPatch, id: usize, line: usize) -> Result<()> {
    let mut bbox = 0.0_f64;
    for a in &bezier.ctrl {
        for b in &bezier.ctrl {
            bbox = bbox.max(crate::vec3::dist(*a, *b));
        }
    }
    if bbox == 0.0 {
        return Err(Error::PatchFile {
            line,
            message: format!("patch {id}: all control points coincide"),
        });
    }
    for iu in 0..7 {
        for iv in 0..7 {
            let u = -0.9 + 1.8 * iu as f64 / 6.0;
            let v = -0.9 + 1.8 * iv as f64 / 6.0;
            let (_, du, dv) = bezier.eval(u, v);
            let jac = crate::vec3::norm(crate::vec3::cross(du, dv));
            if jac < 1e-12 * bbox * bbox {
                return Err(Error::PatchFile {
                    line,
                    message: format!(
                        "patch {id}: degenerate (jacobian {jac:.3e} at (u,v)=({u:.2},{v:.2}))"
                    ),
                });
            }
        }
    }
    Ok(())
}

struct Tokens<'a> {
    iter: std::iter::Peekable<std::vec::IntoIter<(&'a str, usize)>>,
    line: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let mut toks = Vec::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let content = raw_line.split('#').next().unwrap_or("");
            for tok in content.split_whitespace() {
                toks.push((tok, idx + 1));
            }
        }
        Tokens {
            iter: toks.into_iter().peekable(),
            line: 1,
        }
    }

    fn peek(&mut self) -> Option<&'a str> {
        self.iter.peek().map(|(t, _)| *t)
    }

    fn next_token(&mut self) -> Result<&'a str> {
        match self.iter.next() {
            Some((t, line)) => {
                self.line = line;
                Ok(t)
            }
            None => Err(Error::PatchFile {
                line: self.line,
                message: "unexpected end of file".into(),
            }),
        }
    }

    fn error(&self, message: String) -> Error {
        Error::PatchFile {
            line: self.line,
            message,
        }
    }

    fn parse_with<T: std::str::FromStr>(
        &mut self,
        describe: impl Fn(String) -> String,
    ) -> Result<T> {
        let tok = match self.iter.next() {
            Some((t, line)) => {
                self.line = line;
                t
            }
            None => {
                return Err(Error::PatchFile {
                    line: self.line,
                    message: describe("unexpected end of file".into()),
                })
            }
        };
        tok.parse().map_err(|_| Error::PatchFile {
            line: self.line,
            message: describe(format!("cannot parse '{tok}'")),
        })
    }
}
