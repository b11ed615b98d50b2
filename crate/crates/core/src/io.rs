//! Text format for ρDec-POMDP models.
//!
//! The format follows the usual discrete Dec-POMDP problem files
//! (`agents:`, `discount:`, `values:`, `states:`, `start:`, `actions:`,
//! `observations:` and `T:`/`O:`/`R:` entries) with two extra directives,
//! `alpha:` and `uncertainty:`. A joint action or observation is written
//! as one element per agent (label, index or `*`), a single `*`, or a
//! single joint index. Supported entry forms:
//!
//! ```text
//! T: <a> : <s> : <s'> : <p>      O: <a> : <s'> : <z> : <p>
//! T: <a> : <s>                   O: <a> : <s'>
//! <row of |S| numbers>           <row of |Z| numbers>
//! T: <a>                         O: <a>
//! identity | uniform | |S| rows  uniform | |S| rows
//! R: <a> : <s> : <v>             R: <a> : <s> : * : * : <v>
//! ```

use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{validate_model, Belief, ModelBuilder, RhoDecPomdp, Uncertainty};

/// Rows whose sums are off by less than this are renormalized.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("`{directive}`: {message}")]
    Dimension { directive: String, message: String },
    #[error("{row} sums to 1{residual:+e}")]
    Stochasticity { row: String, residual: f64 },
}

#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    column: usize,
}

/// Splits on whitespace; `:` is always its own token.
fn tokenize(line: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() || ch == ':' {
            if let Some(s) = start.take() {
                out.push(Token { text: &line[s..i], column: s + 1 });
            }
            if ch == ':' {
                out.push(Token { text: &line[i..i + 1], column: i + 1 });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Token { text: &line[s..], column: s + 1 });
    }
    out
}

struct Line<'a> {
    number: usize,
    tokens: Vec<Token<'a>>,
}

impl<'a> Line<'a> {
    fn err(&self, token: Option<&Token>, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            line: self.number,
            column: token.map_or(1, |t| t.column),
            message: message.into(),
        }
    }

    /// Colon-separated fields.
    fn fields(&self) -> Vec<Vec<Token<'a>>> {
        let mut fields = vec![Vec::new()];
        for t in &self.tokens {
            if t.text == ":" {
                fields.push(Vec::new());
            } else {
                fields.last_mut().unwrap().push(*t);
            }
        }
        fields
    }

    fn end(&self) -> Option<&Token<'a>> {
        self.tokens.last()
    }
}

fn parse_number(line: &Line, t: &Token) -> Result<f64, ParseError> {
    t.text
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| line.err(Some(t), format!("expected a number, found `{}`", t.text)))
}

fn parse_numbers(line: &Line) -> Result<Vec<f64>, ParseError> {
    line.tokens.iter().map(|t| parse_number(line, t)).collect()
}

/// Labels given explicitly, or generated from a count.
fn labels(line: &Line, tokens: &[Token], prefix: &str) -> Result<Vec<String>, ParseError> {
    match tokens {
        [] => Err(line.err(line.end(), "expected a count or a list of labels")),
        [one] if one.text.chars().all(|c| c.is_ascii_digit()) => {
            let n: usize = one.text.parse().map_err(|_| line.err(Some(one), "count too large"))?;
            if n == 0 {
                return Err(line.err(Some(one), "count must be positive"));
            }
            Ok((0..n).map(|i| format!("{prefix}{i}")).collect())
        }
        many => {
            let out: Vec<String> = many.iter().map(|t| t.text.to_string()).collect();
            if let Some(t) = many.iter().find(|t| t.text == "*") {
                return Err(line.err(Some(t), "`*` cannot be a label"));
            }
            for (i, l) in out.iter().enumerate() {
                if out[..i].contains(l) {
                    return Err(line.err(Some(&many[i]), format!("duplicate label `{l}`")));
                }
            }
            Ok(out)
        }
    }
}

/// A label or index; `None` for `*`.
fn resolve(line: &Line, t: &Token, names: &[String], what: &str) -> Result<Option<usize>, ParseError> {
    if t.text == "*" {
        return Ok(None);
    }
    if let Some(i) = names.iter().position(|n| n == t.text) {
        return Ok(Some(i));
    }
    match t.text.parse::<usize>() {
        Ok(i) if i < names.len() => Ok(Some(i)),
        _ => Err(line.err(Some(t), format!("unknown {what} `{}`", t.text))),
    }
}

fn expand(choice: Option<usize>, n: usize) -> Vec<usize> {
    choice.map_or_else(|| (0..n).collect(), |i| vec![i])
}

#[derive(Default)]
struct Header {
    agents: Option<usize>,
    states: Option<Vec<String>>,
    start: Option<Vec<f64>>,
    actions: Option<Vec<Vec<String>>>,
    observations: Option<Vec<Vec<String>>>,
    alpha: Option<f64>,
    uncertainty: Option<Uncertainty>,
}

struct Tables {
    builder: ModelBuilder,
    actions: Vec<Vec<String>>,
    observations: Vec<Vec<String>>,
    states: Vec<String>,
}

impl Tables {
    fn n_states(&self) -> usize {
        self.states.len()
    }

    /// Expands a joint action/observation field into flat indices.
    fn joint(&self, line: &Line, field: &[Token], observations: bool) -> Result<Vec<usize>, ParseError> {
        let (names, what) = if observations {
            (&self.observations, "observation")
        } else {
            (&self.actions, "action")
        };
        let space = if observations {
            self.builder.joint_observations()
        } else {
            self.builder.joint_actions()
        };
        let n = names.len();
        match field {
            [t] if t.text == "*" => return Ok((0..space.len()).collect()),
            [t] if n > 1 => {
                return match t.text.parse::<usize>() {
                    Ok(i) if i < space.len() => Ok(vec![i]),
                    _ => Err(line.err(Some(t), format!("expected {n} {what}s or a joint index, found `{}`", t.text))),
                }
            }
            _ => {}
        }
        if field.len() != n {
            return Err(line.err(field.first().or(line.end()), format!("expected {n} {what}s")));
        }
        let mut combos: Vec<Vec<usize>> = vec![Vec::new()];
        for (agent, t) in field.iter().enumerate() {
            let choice = resolve(line, t, &names[agent], what)?;
            combos = combos
                .into_iter()
                .flat_map(|c| {
                    expand(choice, names[agent].len()).into_iter().map(move |x| {
                        let mut c = c.clone();
                        c.push(x);
                        c
                    })
                })
                .collect();
        }
        Ok(combos.iter().map(|c| space.flatten(c)).collect())
    }

    fn state(&self, line: &Line, field: &[Token]) -> Result<Vec<usize>, ParseError> {
        match field {
            [t] => Ok(expand(resolve(line, t, &self.states, "state")?, self.n_states())),
            _ => Err(line.err(field.first().or(line.end()), "expected one state")),
        }
    }
}

fn single<'a>(line: &Line, field: &'a [Token<'a>], what: &str) -> Result<&'a Token<'a>, ParseError> {
    match field {
        [t] => Ok(t),
        _ => Err(line.err(field.first().or(line.end()), format!("expected one {what}"))),
    }
}

pub fn parse_model(text: &str) -> Result<RhoDecPomdp, ParseError> {
    let lines: Vec<Line> = text
        .lines()
        .enumerate()
        .map(|(i, raw)| Line { number: i + 1, tokens: tokenize(raw.split('#').next().unwrap_or("")) })
        .filter(|l| !l.tokens.is_empty())
        .collect();

    let mut header = Header::default();
    let mut tables: Option<Tables> = None;
    let mut i = 0;
    while i < lines.len() {
        let line = &lines[i];
        i += 1;
        let fields = line.fields();
        let head = &line.tokens[0];
        if fields.len() < 2 || fields[0].len() != 1 {
            return Err(line.err(Some(head), format!("expected a directive, found `{}`", head.text)));
        }
        let key = fields[0][0].text;
        let rest = &fields[1..];
        let value: &[Token] = &rest[0];

        let entry = matches!(key, "T" | "O" | "R");
        if entry && tables.is_none() {
            tables = Some(start_tables(&header)?);
        }
        if !entry && tables.is_some() {
            return Err(line.err(Some(head), format!("`{key}:` must appear before the first entry")));
        }
        if !entry && rest.len() != 1 {
            return Err(line.err(Some(head), format!("`{key}:` takes a single field")));
        }

        match key {
            "agents" => {
                let t = single(line, value, "agent count")?;
                let n: usize = t.text.parse().ok().filter(|&n| n > 0).ok_or_else(|| line.err(Some(t), "expected a positive agent count"))?;
                header.agents = Some(n);
            }
            "discount" => {
                let t = single(line, value, "discount")?;
                if parse_number(line, t)? != 1.0 {
                    return Err(line.err(Some(t), "only undiscounted models (discount 1) are supported"));
                }
            }
            "values" => {
                let t = single(line, value, "value type")?;
                if t.text != "reward" {
                    return Err(line.err(Some(t), "only `values: reward` is supported"));
                }
            }
            "states" => header.states = Some(labels(line, value, "s")?),
            "start" => {
                header.start = Some(match value {
                    [t] if t.text == "uniform" => Vec::new(),
                    [] => {
                        let next = lines.get(i).ok_or_else(|| line.err(line.end(), "missing start distribution"))?;
                        i += 1;
                        parse_numbers(next)?
                    }
                    _ => value.iter().map(|t| parse_number(line, t)).collect::<Result<_, _>>()?,
                });
            }
            "actions" | "observations" => {
                let n = header.agents.ok_or_else(|| line.err(Some(head), "`agents:` must come first"))?;
                if !value.is_empty() {
                    return Err(line.err(value.first(), format!("list one line per agent after `{key}:`")));
                }
                let prefix = if key == "actions" { "a" } else { "o" };
                let mut per_agent = Vec::with_capacity(n);
                for _ in 0..n {
                    let next = lines.get(i).ok_or_else(|| ParseError::Dimension {
                        directive: key.into(),
                        message: format!("expected {n} agent lines"),
                    })?;
                    if next.tokens.iter().any(|t| t.text == ":") {
                        return Err(ParseError::Dimension {
                            directive: key.into(),
                            message: format!("expected {n} agent lines, found {}", per_agent.len()),
                        });
                    }
                    i += 1;
                    per_agent.push(labels(next, &next.tokens, prefix)?);
                }
                if key == "actions" {
                    header.actions = Some(per_agent);
                } else {
                    header.observations = Some(per_agent);
                }
            }
            "alpha" => {
                let t = single(line, value, "alpha")?;
                let a = parse_number(line, t)?;
                if a < 0.0 {
                    return Err(line.err(Some(t), "alpha must be nonnegative"));
                }
                header.alpha = Some(a);
            }
            "uncertainty" => {
                let t = single(line, value, "uncertainty kind")?;
                header.uncertainty = Some(t.text.parse().map_err(|e: String| line.err(Some(t), e))?);
            }
            "T" => {
                let tb = tables.as_mut().unwrap();
                i = transition_entry(tb, &lines, i, line, rest)?;
            }
            "O" => {
                let tb = tables.as_mut().unwrap();
                i = observation_entry(tb, &lines, i, line, rest)?;
            }
            "R" => {
                let tb = tables.as_mut().unwrap();
                reward_entry(tb, line, rest)?;
            }
            other => return Err(line.err(Some(head), format!("unknown directive `{other}:`"))),
        }
    }

    let tables = match tables {
        Some(t) => t,
        None => start_tables(&header)?,
    };
    finish(tables)
}

fn start_tables(header: &Header) -> Result<Tables, ParseError> {
    let missing = |d: &str| ParseError::Dimension { directive: d.into(), message: "missing before the first entry".into() };
    let agents = header.agents.ok_or_else(|| missing("agents"))?;
    let states = header.states.clone().ok_or_else(|| missing("states"))?;
    let actions = header.actions.clone().ok_or_else(|| missing("actions"))?;
    let observations = header.observations.clone().ok_or_else(|| missing("observations"))?;
    debug_assert_eq!(actions.len(), agents);
    let mut builder = ModelBuilder::new(states.clone(), actions.clone(), observations.clone());

    if let Some(start) = &header.start {
        if !start.is_empty() {
            if start.len() != states.len() {
                return Err(ParseError::Dimension {
                    directive: "start".into(),
                    message: format!("expected {} probabilities, found {}", states.len(), start.len()),
                });
            }
            let residual = start.iter().sum::<f64>() - 1.0;
            if residual.abs() >= RENORMALIZE_TOLERANCE || start.iter().any(|p| *p < 0.0) {
                return Err(ParseError::Stochasticity { row: "start".into(), residual });
            }
            let b = Belief::from_weights(start.clone())
                .ok_or(ParseError::Stochasticity { row: "start".into(), residual })?;
            builder.set_initial_belief(b);
        }
    }
    let alpha = header.alpha.unwrap_or(0.0);
    let uncertainty = header.uncertainty.unwrap_or(if header.alpha.is_some() {
        Uncertainty::ShannonEntropy
    } else {
        Uncertainty::None
    });
    builder.set_alpha(alpha).set_uncertainty(uncertainty);
    Ok(Tables { builder, actions, observations, states })
}

/// Reads `count` rows of `width` numbers starting at line `i`.
fn matrix(lines: &[Line], mut i: usize, count: usize, width: usize, directive: &str) -> Result<(Vec<Vec<f64>>, usize), ParseError> {
    let mut rows = Vec::with_capacity(count);
    for _ in 0..count {
        let line = lines.get(i).ok_or_else(|| ParseError::Dimension {
            directive: directive.into(),
            message: format!("expected {count} row(s) of {width} numbers"),
        })?;
        let row = parse_numbers(line)?;
        if row.len() != width {
            return Err(ParseError::Dimension {
                directive: directive.into(),
                message: format!("line {}: expected {width} numbers, found {}", line.number, row.len()),
            });
        }
        rows.push(row);
        i += 1;
    }
    Ok((rows, i))
}

fn transition_entry(tb: &mut Tables, lines: &[Line], i: usize, line: &Line, f: &[Vec<Token>]) -> Result<usize, ParseError> {
    let n = tb.n_states();
    let actions = tb.joint(line, &f[0], false)?;
    match f.len() {
        4 => {
            let from = tb.state(line, &f[1])?;
            let to = tb.state(line, &f[2])?;
            let p = parse_number(line, single(line, &f[3], "probability")?)?;
            for &a in &actions {
                for &s in &from {
                    for &next in &to {
                        tb.builder.set_transition(s, a, next, p);
                    }
                }
            }
            Ok(i)
        }
        2 => {
            let from = tb.state(line, &f[1])?;
            let (rows, i) = matrix(lines, i, 1, n, "T")?;
            for &a in &actions {
                for &s in &from {
                    for (next, &p) in rows[0].iter().enumerate() {
                        tb.builder.set_transition(s, a, next, p);
                    }
                }
            }
            Ok(i)
        }
        1 => {
            let keyword = lines.get(i).and_then(|l| match l.tokens.as_slice() {
                [t] if t.text == "identity" || t.text == "uniform" => Some(t.text),
                _ => None,
            });
            let (rows, next_i) = match keyword {
                Some("identity") => ((0..n).map(|s| (0..n).map(|k| if k == s { 1.0 } else { 0.0 }).collect()).collect(), i + 1),
                Some(_) => (vec![vec![1.0 / n as f64; n]; n], i + 1),
                None => matrix(lines, i, n, n, "T")?,
            };
            for &a in &actions {
                for (s, row) in rows.iter().enumerate() {
                    for (next, &p) in row.iter().enumerate() {
                        tb.builder.set_transition(s, a, next, p);
                    }
                }
            }
            Ok(next_i)
        }
        _ => Err(line.err(line.end(), "malformed T entry")),
    }
}

fn observation_entry(tb: &mut Tables, lines: &[Line], i: usize, line: &Line, f: &[Vec<Token>]) -> Result<usize, ParseError> {
    let n = tb.n_states();
    let nz = tb.builder.joint_observations().len();
    let actions = tb.joint(line, &f[0], false)?;
    match f.len() {
        4 => {
            let to = tb.state(line, &f[1])?;
            let zs = tb.joint(line, &f[2], true)?;
            let p = parse_number(line, single(line, &f[3], "probability")?)?;
            for &a in &actions {
                for &next in &to {
                    for &z in &zs {
                        tb.builder.set_observation(a, next, z, p);
                    }
                }
            }
            Ok(i)
        }
        2 => {
            let to = tb.state(line, &f[1])?;
            let (rows, i) = matrix(lines, i, 1, nz, "O")?;
            for &a in &actions {
                for &next in &to {
                    for (z, &p) in rows[0].iter().enumerate() {
                        tb.builder.set_observation(a, next, z, p);
                    }
                }
            }
            Ok(i)
        }
        1 => {
            let uniform = matches!(lines.get(i).map(|l| l.tokens.as_slice()), Some([t]) if t.text == "uniform");
            let (rows, next_i) = if uniform {
                (vec![vec![1.0 / nz as f64; nz]; n], i + 1)
            } else {
                matrix(lines, i, n, nz, "O")?
            };
            for &a in &actions {
                for (next, row) in rows.iter().enumerate() {
                    for (z, &p) in row.iter().enumerate() {
                        tb.builder.set_observation(a, next, z, p);
                    }
                }
            }
            Ok(next_i)
        }
        _ => Err(line.err(line.end(), "malformed O entry")),
    }
}

fn reward_entry(tb: &mut Tables, line: &Line, f: &[Vec<Token>]) -> Result<(), ParseError> {
    let value_field = match f.len() {
        3 => &f[2],
        5 => {
            for extra in &f[2..4] {
                let t = single(line, extra, "`*`")?;
                if t.text != "*" {
                    return Err(line.err(Some(t), "rewards depend only on (joint action, state); use `*` here"));
                }
            }
            &f[4]
        }
        4 => return Err(line.err(line.end(), "rewards depend only on (joint action, state); R: <a> : <s> : <v>")),
        _ => return Err(line.err(line.end(), "malformed R entry; expected R: <a> : <s> : <v>")),
    };
    let actions = tb.joint(line, &f[0], false)?;
    let states = tb.state(line, &f[1])?;
    let v = parse_number(line, single(line, value_field, "reward")?)?;
    for &a in &actions {
        for &s in &states {
            tb.builder.set_reward(s, a, v);
        }
    }
    Ok(())
}

fn joint_label(labels: &[Vec<String>], space: &crate::model::JointSpace, flat: usize) -> String {
    space
        .unflatten(flat)
        .iter()
        .enumerate()
        .map(|(i, &x)| labels[i][x].as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

fn finish(mut tb: Tables) -> Result<RhoDecPomdp, ParseError> {
    let n = tb.n_states();
    let na = tb.builder.joint_actions().len();
    let nz = tb.builder.joint_observations().len();
    for a in 0..na {
        for s in 0..n {
            let t_sum: f64 = (0..n).map(|next| tb.builder.transition(s, a, next)).sum();
            let o_sum: f64 = (0..nz).map(|z| tb.builder.observation(a, s, z)).sum();
            let act = || joint_label(&tb.actions, tb.builder.joint_actions(), a);
            for (kind, sum) in [("T", t_sum), ("O", o_sum)] {
                let residual = sum - 1.0;
                if !(residual.abs() < RENORMALIZE_TOLERANCE) {
                    return Err(ParseError::Stochasticity {
                        row: format!("{kind}: {} : {}", act(), tb.states[s]),
                        residual,
                    });
                }
            }
        }
    }
    tb.builder.normalize_rows(RENORMALIZE_TOLERANCE);
    let model = tb.builder.build();
    if let Some(v) = validate_model(&model).violations.first() {
        return Err(ParseError::Stochasticity { row: v.to_string(), residual: v.residual });
    }
    Ok(model)
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Canonical text: header, then every T row and O row in joint-action,
/// state order, then nonzero rewards.
pub fn write_model(model: &RhoDecPomdp) -> String {
    let mut out = String::new();
    let n = model.n_states();
    let agents = model.n_agents();
    let actions: Vec<Vec<String>> = (0..agents).map(|i| model.actions(i).to_vec()).collect();
    writeln!(out, "agents: {agents}").unwrap();
    writeln!(out, "discount: 1").unwrap();
    writeln!(out, "values: reward").unwrap();
    writeln!(out, "states: {}", model.states().join(" ")).unwrap();
    if model.initial_belief().max_abs_diff(&Belief::uniform(n)) == 0.0 {
        writeln!(out, "start: uniform").unwrap();
    } else {
        let probs: Vec<String> = model.initial_belief().probs().iter().map(|&p| num(p)).collect();
        writeln!(out, "start: {}", probs.join(" ")).unwrap();
    }
    writeln!(out, "actions:").unwrap();
    for a in &actions {
        writeln!(out, "{}", a.join(" ")).unwrap();
    }
    writeln!(out, "observations:").unwrap();
    for i in 0..agents {
        writeln!(out, "{}", model.observations(i).join(" ")).unwrap();
    }
    writeln!(out, "alpha: {}", num(model.alpha())).unwrap();
    writeln!(out, "uncertainty: {}", model.uncertainty()).unwrap();

    let row = |values: &[f64]| values.iter().map(|&p| num(p)).collect::<Vec<_>>().join(" ");
    for a in 0..model.n_joint_actions() {
        let label = joint_label(&actions, model.joint_actions(), a);
        for s in 0..n {
            writeln!(out, "T: {label} : {}", model.states()[s]).unwrap();
            writeln!(out, "{}", row(model.transition_row(s, a))).unwrap();
        }
    }
    for a in 0..model.n_joint_actions() {
        let label = joint_label(&actions, model.joint_actions(), a);
        for next in 0..n {
            writeln!(out, "O: {label} : {}", model.states()[next]).unwrap();
            writeln!(out, "{}", row(model.observation_row(a, next))).unwrap();
        }
    }
    for a in 0..model.n_joint_actions() {
        let label = joint_label(&actions, model.joint_actions(), a);
        for s in 0..n {
            let r = model.reward(s, a);
            if r != 0.0 {
                writeln!(out, "R: {label} : {} : {}", model.states()[s], num(r)).unwrap();
            }
        }
    }
    out
}
