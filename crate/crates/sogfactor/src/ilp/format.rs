//! MPS (fixed format) and LP file emission and ingestion.
//!
//! Only what binary feasibility models need: a dummy objective row, L/G/E
//! rows, integer markers and BV bounds. Imported models tag every variable
//! and constraint with the "default" family; family assignments travel in
//! design-parameter JSON, not in the model files.

use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::One;

use super::{IlpModel, LinearConstraint, Sense, VarId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FormatError {
    Syntax { line: usize, message: String },
    UnknownRow(String),
    UnknownColumn(String),
    NonBinaryVariable(String),
    MissingSection(&'static str),
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FormatError::Syntax { line, message } => write!(f, "line {line}: {message}"),
            FormatError::UnknownRow(r) => write!(f, "reference to undeclared row {r}"),
            FormatError::UnknownColumn(c) => write!(f, "reference to undeclared column {c}"),
            FormatError::NonBinaryVariable(v) => {
                write!(f, "variable {v} is not binary; only binary models are supported")
            }
            FormatError::MissingSection(s) => write!(f, "missing {s} section"),
        }
    }
}

impl std::error::Error for FormatError {}

const MPS_NAME_LIMIT: usize = 8;

/// Sanitized, unique names within the MPS 8-character limit.
/// Collisions after truncation get a deterministic base-36 suffix.
fn mps_names<'a>(raw: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut used: HashMap<String, usize> = HashMap::new();
    let mut out = Vec::new();
    for name in raw {
        let cleaned: String = name
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
            .collect();
        let mut candidate: String = cleaned.chars().take(MPS_NAME_LIMIT).collect();
        if candidate.is_empty() {
            candidate.push('V');
        }
        if used.contains_key(&candidate) {
            let mut counter = used[&candidate];
            loop {
                counter += 1;
                let suffix = to_base36(counter);
                let keep = MPS_NAME_LIMIT.saturating_sub(suffix.len() + 1);
                let renamed = format!("{}_{}", &candidate[..keep.min(candidate.len())], suffix);
                if !used.contains_key(&renamed) {
                    used.insert(candidate.clone(), counter);
                    candidate = renamed;
                    break;
                }
            }
        }
        used.insert(candidate.clone(), 0);
        out.push(candidate);
    }
    out
}

fn to_base36(mut v: usize) -> String {
    const DIGITS: &[u8] = b"0123456789abcdefghijklmnopqrstuvwxyz";
    let mut s = Vec::new();
    loop {
        s.push(DIGITS[v % 36]);
        v /= 36;
        if v == 0 {
            break;
        }
    }
    s.reverse();
    String::from_utf8(s).unwrap()
}

/// Fixed-format MPS text with ROWS/COLUMNS/RHS/BOUNDS sections; every
/// variable is declared binary through a BV bound.
pub fn export_mps(model: &IlpModel) -> String {
    let row_names = mps_names(model.constraints().iter().map(|c| c.name.as_str()));
    let col_names = mps_names(model.variables().iter().map(|v| v.name.as_str()));

    let mut s = String::new();
    let model_name: String = model
        .name
        .chars()
        .map(|c| if c.is_ascii_graphic() { c } else { '_' })
        .take(60)
        .collect();
    let _ = writeln!(s, "NAME          {model_name}");
    s.push_str("ROWS\n");
    s.push_str(" N  COST\n");
    for (c, rn) in model.constraints().iter().zip(&row_names) {
        let tag = match c.sense {
            Sense::Le => 'L',
            Sense::Ge => 'G',
            Sense::Eq => 'E',
        };
        let _ = writeln!(s, " {tag}  {rn}");
    }

    // Column-major entries.
    let mut per_col: Vec<Vec<(usize, &BigInt)>> = vec![Vec::new(); model.num_vars()];
    for (ci, c) in model.constraints().iter().enumerate() {
        for (coeff, v) in &c.terms {
            per_col[v.0].push((ci, coeff));
        }
    }

    s.push_str("COLUMNS\n");
    s.push_str("    MARKER                 'MARKER'                 'INTORG'\n");
    for (vi, entries) in per_col.iter().enumerate() {
        if entries.is_empty() {
            // Keep otherwise-unreferenced columns declared.
            let _ = writeln!(s, "    {:<10}{:<10}{}", col_names[vi], "COST", 0);
        }
        for (ci, coeff) in entries {
            let _ = writeln!(s, "    {:<10}{:<10}{}", col_names[vi], row_names[*ci], coeff);
        }
    }
    s.push_str("    MARKER                 'MARKER'                 'INTEND'\n");

    s.push_str("RHS\n");
    for (ci, c) in model.constraints().iter().enumerate() {
        let _ = writeln!(s, "    {:<10}{:<10}{}", "RHS", row_names[ci], c.rhs);
    }

    s.push_str("BOUNDS\n");
    for name in &col_names {
        let _ = writeln!(s, " BV {:<10}{}", "BND", name);
    }
    s.push_str("ENDATA\n");
    s
}

pub fn import_mps(text: &str) -> Result<IlpModel, FormatError> {
    #[derive(PartialEq)]
    enum Section {
        None,
        Rows,
        Columns,
        Rhs,
        Bounds,
        Ranges,
    }

    let mut name = String::from("imported");
    let mut section = Section::None;
    let mut row_sense: Vec<(String, Option<Sense>)> = Vec::new(); // None = objective
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut col_names: Vec<String> = Vec::new();
    let mut entries: Vec<Vec<(BigInt, usize)>> = Vec::new(); // per row
    let mut rhs: Vec<BigInt> = Vec::new();
    let mut binary: Vec<bool> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end();
        if line.is_empty() || line.starts_with('*') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let is_header = !raw.starts_with(' ') && !raw.starts_with('\t');
        if is_header {
            match fields[0].to_ascii_uppercase().as_str() {
                "NAME" => {
                    if fields.len() > 1 {
                        name = fields[1].to_string();
                    }
                    continue;
                }
                "ROWS" => {
                    section = Section::Rows;
                    continue;
                }
                "COLUMNS" => {
                    section = Section::Columns;
                    continue;
                }
                "RHS" => {
                    section = Section::Rhs;
                    continue;
                }
                "BOUNDS" => {
                    section = Section::Bounds;
                    continue;
                }
                "RANGES" => {
                    section = Section::Ranges;
                    continue;
                }
                "ENDATA" => break,
                other => {
                    return Err(FormatError::Syntax {
                        line: lineno + 1,
                        message: format!("unknown section {other}"),
                    })
                }
            }
        }
        match section {
            Section::Rows => {
                if fields.len() != 2 {
                    return Err(FormatError::Syntax {
                        line: lineno + 1,
                        message: "ROWS entries are `<type> <name>`".into(),
                    });
                }
                let sense = match fields[0].to_ascii_uppercase().as_str() {
                    "N" => None,
                    "L" => Some(Sense::Le),
                    "G" => Some(Sense::Ge),
                    "E" => Some(Sense::Eq),
                    t => {
                        return Err(FormatError::Syntax {
                            line: lineno + 1,
                            message: format!("unknown row type {t}"),
                        })
                    }
                };
                row_index.insert(fields[1].to_string(), row_sense.len());
                row_sense.push((fields[1].to_string(), sense));
                entries.push(Vec::new());
                rhs.push(BigInt::from(0));
            }
            Section::Columns => {
                if fields.len() >= 3 && fields[1].contains("MARKER") || fields.get(1) == Some(&"'MARKER'") {
                    continue; // INTORG/INTEND markers
                }
                if fields.len() < 3 || fields.len() % 2 == 0 {
                    return Err(FormatError::Syntax {
                        line: lineno + 1,
                        message: "COLUMNS entries are `<col> (<row> <value>)+`".into(),
                    });
                }
                let col = fields[0];
                let ci = *col_index.entry(col.to_string()).or_insert_with(|| {
                    col_names.push(col.to_string());
                    binary.push(false);
                    col_names.len() - 1
                });
                for pair in fields[1..].chunks(2) {
                    let ri = *row_index
                        .get(pair[0])
                        .ok_or_else(|| FormatError::UnknownRow(pair[0].to_string()))?;
                    let value: BigInt = pair[1].parse().map_err(|_| FormatError::Syntax {
                        line: lineno + 1,
                        message: format!("bad coefficient {}", pair[1]),
                    })?;
                    if row_sense[ri].1.is_some() && value != BigInt::from(0) {
                        entries[ri].push((value, ci));
                    }
                }
            }
            Section::Rhs => {
                if fields.len() < 3 || fields.len() % 2 == 0 {
                    return Err(FormatError::Syntax {
                        line: lineno + 1,
                        message: "RHS entries are `<set> (<row> <value>)+`".into(),
                    });
                }
                for pair in fields[1..].chunks(2) {
                    let ri = *row_index
                        .get(pair[0])
                        .ok_or_else(|| FormatError::UnknownRow(pair[0].to_string()))?;
                    rhs[ri] = pair[1].parse().map_err(|_| FormatError::Syntax {
                        line: lineno + 1,
                        message: format!("bad rhs {}", pair[1]),
                    })?;
                }
            }
            Section::Bounds => {
                if fields.len() < 3 {
                    return Err(FormatError::Syntax {
                        line: lineno + 1,
                        message: "BOUNDS entries are `<type> <set> <col> [value]`".into(),
                    });
                }
                let kind = fields[0].to_ascii_uppercase();
                let col = fields[2];
                let ci = *col_index
                    .get(col)
                    .ok_or_else(|| FormatError::UnknownColumn(col.to_string()))?;
                match kind.as_str() {
                    "BV" => binary[ci] = true,
                    // UP 1 together with integrality also means binary; accept
                    // the common encodings, reject real bounds.
                    "UI" | "UP" if fields.get(3) == Some(&"1") => binary[ci] = true,
                    "LI" | "LO" if fields.get(3) == Some(&"0") => {}
                    _ => return Err(FormatError::NonBinaryVariable(col.to_string())),
                }
            }
            Section::Ranges => {
                return Err(FormatError::Syntax {
                    line: lineno + 1,
                    message: "RANGES sections are not supported".into(),
                });
            }
            Section::None => {
                return Err(FormatError::Syntax {
                    line: lineno + 1,
                    message: "data before any section header".into(),
                });
            }
        }
    }

    if row_sense.is_empty() {
        return Err(FormatError::MissingSection("ROWS"));
    }
    if let Some(bad) = binary.iter().position(|b| !b) {
        return Err(FormatError::NonBinaryVariable(col_names[bad].clone()));
    }

    let mut model = IlpModel::new(name);
    for cn in &col_names {
        model.add_var(cn.clone(), "default");
    }
    for (ri, (rn, sense)) in row_sense.iter().enumerate() {
        let Some(sense) = sense else { continue };
        let terms: Vec<(BigInt, VarId)> = entries[ri]
            .iter()
            .map(|(c, vi)| (c.clone(), VarId(*vi)))
            .collect();
        model
            .add_constraint(LinearConstraint {
                name: rn.clone(),
                terms,
                sense: *sense,
                rhs: rhs[ri].clone(),
                family: "default".into(),
            })
            .map_err(|e| FormatError::Syntax {
                line: 0,
                message: e.to_string(),
            })?;
    }
    Ok(model)
}

/// CPLEX-style LP text. Names are kept verbatim (LP names may be long).
pub fn export_lp(model: &IlpModel) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "\\ Problem: {}", model.name);
    s.push_str("Minimize\n obj: 0\nSubject To\n");
    for c in model.constraints() {
        let mut line = format!(" {}:", c.name);
        for (i, (coeff, v)) in c.terms.iter().enumerate() {
            let var = &model.var(*v).name;
            let mag = coeff.magnitude();
            let sign = if coeff.sign() == num_bigint::Sign::Minus {
                "-"
            } else if i == 0 {
                ""
            } else {
                "+"
            };
            if mag.is_one() {
                let _ = write!(line, " {sign} {var}");
            } else {
                let _ = write!(line, " {sign} {mag} {var}");
            }
            if line.len() > 200 {
                let _ = writeln!(s, "{line}");
                line = String::from("   ");
            }
        }
        let sense = match c.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        let _ = writeln!(s, "{line} {sense} {}", c.rhs);
    }
    s.push_str("Binary\n");
    let mut line = String::new();
    for v in model.variables() {
        if line.len() + v.name.len() > 200 {
            let _ = writeln!(s, " {line}");
            line.clear();
        }
        if !line.is_empty() {
            line.push(' ');
        }
        line.push_str(&v.name);
    }
    if !line.is_empty() {
        let _ = writeln!(s, " {line}");
    }
    s.push_str("End\n");
    s
}

pub fn import_lp(text: &str) -> Result<IlpModel, FormatError> {
    // Strip comments, then tokenize; constraints end at `<sense> <number>`.
    let mut tokens: Vec<(usize, String)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('\\') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let padded = line
            .replace("<=", " <= ")
            .replace(">=", " >= ")
            .replace("=<", " <= ")
            .replace("=>", " >= ");
        for t in padded.split_whitespace() {
            // A bare `=` or `<`/`>` may still be glued to names in exotic
            // files; our own writer always spaces them.
            tokens.push((lineno + 1, t.to_string()));
        }
    }

    #[derive(Clone, Copy, PartialEq)]
    enum Part {
        Preamble,
        Objective,
        Constraints,
        Bounds,
        Binary,
        General,
        Done,
    }

    let keyword = |t: &str| -> Option<Part> {
        match t.to_ascii_lowercase().as_str() {
            "minimize" | "maximize" | "minimise" | "maximise" | "min" | "max" => {
                Some(Part::Objective)
            }
            "subject" | "st" | "s.t." | "st:" => Some(Part::Constraints),
            "bounds" | "bound" => Some(Part::Bounds),
            "binary" | "binaries" | "bin" => Some(Part::Binary),
            "general" | "generals" | "gen" | "integer" | "integers" => Some(Part::General),
            "end" => Some(Part::Done),
            _ => None,
        }
    };

    let mut model = IlpModel::new("imported");
    let mut vars: HashMap<String, VarId> = HashMap::new();
    let mut declared_binary: Vec<String> = Vec::new();
    let mut part = Part::Preamble;

    let mut i = 0usize;
    let mut anon_counter = 0usize;
    while i < tokens.len() {
        let (lineno, tok) = (&tokens[i].0, tokens[i].1.clone());
        if let Some(p) = keyword(&tok) {
            part = p;
            i += 1;
            // `subject to` eats the following "to"
            if p == Part::Constraints && i < tokens.len() && tokens[i].1.eq_ignore_ascii_case("to")
            {
                i += 1;
            }
            continue;
        }
        match part {
            Part::Preamble | Part::Objective | Part::Bounds | Part::General => {
                i += 1; // objective/bounds content is irrelevant for binary feasibility models
            }
            Part::Binary => {
                declared_binary.push(tok);
                i += 1;
            }
            Part::Done => break,
            Part::Constraints => {
                // Optional label.
                let mut name = None;
                if tok.ends_with(':') {
                    name = Some(tok.trim_end_matches(':').to_string());
                    i += 1;
                } else if i + 1 < tokens.len() && tokens[i + 1].1 == ":" {
                    name = Some(tok.clone());
                    i += 2;
                }
                let name = name.unwrap_or_else(|| {
                    anon_counter += 1;
                    format!("c{anon_counter}")
                });
                let mut terms: Vec<(BigInt, String)> = Vec::new();
                let mut sign = BigInt::one();
                let mut pending_coeff: Option<BigInt> = None;
                let mut sense: Option<Sense> = None;
                while i < tokens.len() {
                    let t = &tokens[i].1;
                    match t.as_str() {
                        "+" => {
                            sign = BigInt::one();
                            i += 1;
                        }
                        "-" => {
                            sign = -BigInt::one();
                            i += 1;
                        }
                        "<=" | "<" => {
                            sense = Some(Sense::Le);
                            i += 1;
                            break;
                        }
                        ">=" | ">" => {
                            sense = Some(Sense::Ge);
                            i += 1;
                            break;
                        }
                        "=" => {
                            sense = Some(Sense::Eq);
                            i += 1;
                            break;
                        }
                        _ => {
                            if let Ok(num) = t.parse::<BigInt>() {
                                pending_coeff = Some(sign.clone() * num);
                                sign = BigInt::one();
                            } else {
                                let t = if let Some(stripped) = t.strip_prefix('+') {
                                    stripped.to_string()
                                } else {
                                    t.clone()
                                };
                                let coeff = pending_coeff.take().unwrap_or_else(|| sign.clone());
                                terms.push((coeff, t));
                                sign = BigInt::one();
                            }
                            i += 1;
                        }
                    }
                }
                let sense = sense.ok_or(FormatError::Syntax {
                    line: *lineno,
                    message: format!("constraint {name} has no relational operator"),
                })?;
                let rhs_tok = tokens.get(i).ok_or(FormatError::Syntax {
                    line: *lineno,
                    message: format!("constraint {name} has no right-hand side"),
                })?;
                let rhs: BigInt = rhs_tok.1.parse().map_err(|_| FormatError::Syntax {
                    line: rhs_tok.0,
                    message: format!("bad right-hand side {}", rhs_tok.1),
                })?;
                i += 1;

                let mut resolved = Vec::new();
                for (coeff, vname) in terms {
                    let id = *vars.entry(vname.clone()).or_insert_with(|| {
                        model.add_var(vname.clone(), "default")
                    });
                    if coeff != BigInt::from(0) {
                        resolved.push((coeff, id));
                    }
                }
                model
                    .add_constraint(LinearConstraint {
                        name,
                        terms: resolved,
                        sense,
                        rhs,
                        family: "default".into(),
                    })
                    .map_err(|e| FormatError::Syntax {
                        line: *lineno,
                        message: e.to_string(),
                    })?;
            }
        }
    }

    // Declare binaries that never occur in a constraint, and require that
    // everything referenced is declared binary.
    for b in &declared_binary {
        vars.entry(b.clone())
            .or_insert_with(|| model.add_var(b.clone(), "default"));
    }
    for (name, _) in vars.iter() {
        if !declared_binary.iter().any(|b| b == name) {
            return Err(FormatError::NonBinaryVariable(name.clone()));
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::super::{constraint, IlpModel, Sense};
    use super::*;
    use num_bigint::BigInt;

    fn sample_model() -> IlpModel {
        let mut m = IlpModel::new("sample");
        let a = m.add_var("a", "x-bits");
        let b = m.add_var("b_long_name_beyond_mps", "x-bits");
        let c = m.add_var("lonely", "products");
        let _ = c;
        m.add_constraint(constraint(
            "r_le",
            "soag",
            vec![(BigInt::from(3), a), (BigInt::from(-1), b)],
            Sense::Le,
            2,
        ))
        .unwrap();
        m.add_constraint(constraint(
            "r_ge",
            "soag",
            vec![(BigInt::from(1), a), (BigInt::from(1), b)],
            Sense::Ge,
            1,
        ))
        .unwrap();
        m.add_constraint(constraint(
            "r_eq",
            "soag",
            vec![(BigInt::from(1099511627776i64), a), (BigInt::from(1), b)],
            Sense::Eq,
            0,
        ))
        .unwrap();
        m
    }

    fn structurally_equal(a: &IlpModel, b: &IlpModel) {
        assert_eq!(a.num_vars(), b.num_vars());
        assert_eq!(a.num_constraints(), b.num_constraints());
        for (ca, cb) in a.constraints().iter().zip(b.constraints()) {
            assert_eq!(ca.sense, cb.sense);
            assert_eq!(ca.rhs, cb.rhs);
            let mut ta: Vec<(usize, BigInt)> =
                ca.terms.iter().map(|(c, v)| (v.0, c.clone())).collect();
            let mut tb: Vec<(usize, BigInt)> =
                cb.terms.iter().map(|(c, v)| (v.0, c.clone())).collect();
            ta.sort();
            tb.sort();
            assert_eq!(ta, tb);
        }
    }

    #[test]
    fn mps_skeleton_sections() {
        let text = export_mps(&sample_model());
        for section in ["ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"] {
            assert!(text.contains(section), "missing {section}:\n{text}");
        }
        assert!(text.contains(" BV "));
    }

    #[test]
    fn mps_round_trip_structure() {
        let m = sample_model();
        let back = import_mps(&export_mps(&m)).unwrap();
        structurally_equal(&m, &back);
    }

    #[test]
    fn lp_round_trip_structure_and_names() {
        let m = sample_model();
        let text = export_lp(&m);
        let back = import_lp(&text).unwrap();
        structurally_equal(&m, &back);
        assert_eq!(back.var(super::super::VarId(1)).name, "b_long_name_beyond_mps");
    }

    #[test]
    fn mps_name_truncation_is_unique() {
        let names = ["abcdefgh_1", "abcdefgh_2", "abcdefgh_3", "short"];
        let out = mps_names(names.iter().copied());
        assert_eq!(out.len(), 4);
        let mut dedup = out.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), 4, "renaming must keep names unique: {out:?}");
        for n in &out {
            assert!(n.len() <= MPS_NAME_LIMIT);
        }
    }

    #[test]
    fn lp_import_rejects_unmarked_variables() {
        let text = "Minimize\n obj: 0\nSubject To\n c1: x + y >= 1\nBinary\n x\nEnd\n";
        assert!(matches!(
            import_lp(text),
            Err(FormatError::NonBinaryVariable(_))
        ));
    }
}
