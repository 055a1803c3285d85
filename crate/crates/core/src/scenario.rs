//! Line-oriented scenario files.
//!
//! ```text
//! # comment
//! [functional F]
//! axiom 01 2 5 3
//! [tree T]
//! node e
//! node 0
//! [staged S]
//! stage
//! node e
//! stage
//! node 1
//! [params]
//! n 2
//! seed 7
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::functional::{Axiom, FunctionalTable};
use crate::strings::BinaryString;
use crate::tree::{FiniteTree, StagedTree};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Scenario {
    pub functionals: BTreeMap<String, FunctionalTable>,
    pub trees: BTreeMap<String, FiniteTree>,
    pub staged: BTreeMap<String, StagedTree>,
    pub params: BTreeMap<String, i64>,
    pub seed: u64,
}

impl Scenario {
    pub fn functional(&self, name: &str) -> Result<&FunctionalTable> {
        self.functionals
            .get(name)
            .ok_or_else(|| Error::UnknownName(format!("functional {name}")))
    }

    pub fn tree(&self, name: &str) -> Result<&FiniteTree> {
        self.trees
            .get(name)
            .ok_or_else(|| Error::UnknownName(format!("tree {name}")))
    }

    pub fn staged_tree(&self, name: &str) -> Result<&StagedTree> {
        self.staged
            .get(name)
            .ok_or_else(|| Error::UnknownName(format!("staged tree {name}")))
    }

    pub fn param(&self, key: &str) -> Option<i64> {
        self.params.get(key).copied()
    }
}

enum Section {
    None,
    Functional { name: String, axioms: Vec<(usize, Axiom)> },
    Tree { name: String, tree: FiniteTree },
    Staged { name: String, stages: Vec<FiniteTree> },
    Params,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_string(line: usize, tok: &str) -> Result<BinaryString> {
    tok.parse().map_err(|e: Error| parse_err(line, e.to_string()))
}

fn parse_u64(line: usize, tok: &str) -> Result<u64> {
    tok.parse()
        .map_err(|_| parse_err(line, format!("expected a natural number, got {tok:?}")))
}

struct Builder {
    sc: Scenario,
    names: BTreeMap<String, usize>,
}

impl Builder {
    fn claim(&mut self, line: usize, name: &str) -> Result<()> {
        if let Some(prev) = self.names.insert(name.to_string(), line) {
            return Err(parse_err(line, format!("duplicate name {name} (first used on line {prev})")));
        }
        Ok(())
    }

    fn close(&mut self, sec: Section) -> Result<()> {
        match sec {
            Section::None | Section::Params => {}
            Section::Functional { name, axioms } => {
                let lines: Vec<usize> = axioms.iter().map(|(l, _)| *l).collect();
                let table = FunctionalTable::new(axioms.into_iter().map(|(_, a)| a).collect()).map_err(|e| match e {
                    Error::Inconsistent { first, second, detail } => parse_err(
                        lines[second],
                        format!("axiom conflicts with line {}: {detail}", lines[first]),
                    ),
                    other => parse_err(lines.first().copied().unwrap_or(0), other.to_string()),
                })?;
                self.sc.functionals.insert(name, table);
            }
            Section::Tree { name, tree } => {
                self.sc.trees.insert(name, tree);
            }
            Section::Staged { name, stages } => {
                self.sc.staged.insert(name, StagedTree::new(stages));
            }
        }
        Ok(())
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut b = Builder {
        sc: Scenario::default(),
        names: BTreeMap::new(),
    };
    let mut sec = Section::None;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(header) = content.strip_prefix('[') {
            let header = header
                .strip_suffix(']')
                .ok_or_else(|| parse_err(line, "unterminated section header"))?;
            let words: Vec<&str> = header.split_whitespace().collect();
            let next = match words.as_slice() {
                ["functional", name] => {
                    b.claim(line, name)?;
                    Section::Functional {
                        name: name.to_string(),
                        axioms: Vec::new(),
                    }
                }
                ["tree", name] => {
                    b.claim(line, name)?;
                    Section::Tree {
                        name: name.to_string(),
                        tree: FiniteTree::new(),
                    }
                }
                ["staged", name] => {
                    b.claim(line, name)?;
                    Section::Staged {
                        name: name.to_string(),
                        stages: Vec::new(),
                    }
                }
                ["params"] => Section::Params,
                _ => return Err(parse_err(line, format!("unknown section [{header}]"))),
            };
            let prev = std::mem::replace(&mut sec, next);
            b.close(prev)?;
            continue;
        }
        let words: Vec<&str> = content.split_whitespace().collect();
        match (&mut sec, words.as_slice()) {
            (Section::Functional { axioms, .. }, ["axiom", s, arg, value, steps]) => {
                let steps = parse_u64(line, steps)?;
                if steps == 0 {
                    return Err(parse_err(line, "steps must be at least 1"));
                }
                axioms.push((
                    line,
                    Axiom::new(parse_string(line, s)?, parse_u64(line, arg)?, parse_u64(line, value)?, steps),
                ));
            }
            (Section::Tree { tree, .. }, ["node", s]) => {
                tree.insert(parse_string(line, s)?);
            }
            (Section::Staged { stages, .. }, ["stage"]) => {
                let prev = stages.last().cloned().unwrap_or_default();
                stages.push(prev);
            }
            (Section::Staged { stages, .. }, ["node", s]) => {
                let x = parse_string(line, s)?;
                stages
                    .last_mut()
                    .ok_or_else(|| parse_err(line, "node before the first stage"))?
                    .insert(x);
            }
            (Section::Params, ["seed", v]) => b.sc.seed = parse_u64(line, v)?,
            (Section::Params, [key, v]) => {
                let v: i64 = v
                    .parse()
                    .map_err(|_| parse_err(line, format!("expected an integer, got {v:?}")))?;
                if b.sc.params.insert(key.to_string(), v).is_some() {
                    return Err(parse_err(line, format!("duplicate parameter {key}")));
                }
            }
            (Section::None, _) => return Err(parse_err(line, "content outside any section")),
            _ => return Err(parse_err(line, format!("unexpected line {content:?}"))),
        }
    }
    b.close(sec)?;
    Ok(b.sc)
}

/// Canonical text form; `parse_scenario` inverts it.
pub fn serialize_scenario(sc: &Scenario) -> String {
    let mut out = String::new();
    for (name, f) in &sc.functionals {
        writeln!(out, "[functional {name}]").unwrap();
        for a in f.axioms() {
            writeln!(out, "axiom {} {} {} {}", a.sigma, a.arg, a.value, a.steps).unwrap();
        }
    }
    for (name, t) in &sc.trees {
        writeln!(out, "[tree {name}]").unwrap();
        for x in t.iter() {
            writeln!(out, "node {x}").unwrap();
        }
    }
    for (name, st) in &sc.staged {
        writeln!(out, "[staged {name}]").unwrap();
        let mut prev = FiniteTree::new();
        for stage in &st.stages {
            writeln!(out, "stage").unwrap();
            for x in stage.iter().filter(|x| !prev.contains(x)) {
                writeln!(out, "node {x}").unwrap();
            }
            prev = stage.clone();
        }
    }
    if !sc.params.is_empty() || sc.seed != 0 {
        writeln!(out, "[params]").unwrap();
        for (k, v) in &sc.params {
            writeln!(out, "{k} {v}").unwrap();
        }
        if sc.seed != 0 {
            writeln!(out, "seed {}", sc.seed).unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strings::bs;

    #[test]
    fn single_axiom() {
        let sc = parse_scenario("[functional F]\naxiom e 0 1 1\n").unwrap();
        assert_eq!(sc.functionals["F"].axioms(), &[Axiom::new(bs("e"), 0, 1, 1)]);
        let sc = parse_scenario("[functional G]\naxiom 01 2 5 3\n").unwrap();
        assert_eq!(sc.functionals["G"].axioms(), &[Axiom::new(bs("01"), 2, 5, 3)]);
    }

    #[test]
    fn inconsistent_axioms_name_both_lines() {
        let err = parse_scenario("[functional F]\naxiom e 0 1 1\n# gap\naxiom 0 0 2 1\n").unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 4);
                assert!(message.contains("line 2"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(parse_scenario("[widget W]\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_scenario("[tree A]\n[tree A]\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_scenario("node e\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_scenario("[tree A]\nnode 2\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_scenario("[staged S]\nnode e\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_scenario("[functional F]\naxiom e 0 1 0\n"), Err(Error::Parse { .. })));
        let sc = parse_scenario("[tree A]\nnode e\n").unwrap();
        assert!(matches!(sc.tree("B"), Err(Error::UnknownName(_))));
    }

    #[test]
    fn staged_is_cumulative_and_round_trips() {
        let text = "[functional F]\naxiom 1 0 1 2\naxiom e 1 0 1\n[tree T]\nnode e\nnode 01\n[staged S]\nstage\nnode e\nstage\nnode 0\nstage\n[params]\nn -2\nseed 9\n";
        let sc = parse_scenario(text).unwrap();
        let st = &sc.staged["S"];
        assert_eq!(st.stages.len(), 3);
        assert_eq!(st.stages[2].len(), 2);
        assert_eq!(sc.param("n"), Some(-2));
        assert_eq!(sc.seed, 9);
        assert_eq!(serialize_scenario(&sc), text);
        assert_eq!(parse_scenario(&serialize_scenario(&sc)).unwrap(), sc);
    }
}
