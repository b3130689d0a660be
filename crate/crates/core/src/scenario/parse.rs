use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{CollisionOutcome, Edge, Limits, Mission, Obstacle, Scenario, Vec3, Waypoint};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    SyntaxError,
    UnknownReference(String),
    DuplicateId(String),
    InvalidValue,
}

/// A positioned diagnostic. Lines and columns are 1-based; column counts
/// characters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioError {
    pub line: usize,
    pub col: usize,
    pub kind: ErrorKind,
    pub message: String,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for ScenarioError {}

#[derive(Debug, Clone)]
struct Token {
    text: String,
    col: usize,
}

#[derive(Debug, Clone)]
struct Name {
    text: String,
    line: usize,
    col: usize,
}

struct Parser {
    errors: Vec<ScenarioError>,
}

impl Parser {
    fn err(&mut self, line: usize, col: usize, kind: ErrorKind, message: impl Into<String>) {
        self.errors.push(ScenarioError { line, col, kind, message: message.into() });
    }

    fn syntax(&mut self, line: usize, col: usize, message: impl Into<String>) {
        self.err(line, col, ErrorKind::SyntaxError, message);
    }
}

/// Splits a line into whitespace-separated tokens. A double quote opens a
/// quoted run that may contain spaces; the quotes are removed. `#` outside
/// quotes ends the line.
fn tokenize(line: &str) -> Result<Vec<Token>, usize> {
    let mut tokens = Vec::new();
    let mut current: Option<Token> = None;
    let mut in_quote: Option<usize> = None;
    for (i, ch) in line.chars().enumerate() {
        let col = i + 1;
        if in_quote.is_some() {
            if ch == '"' {
                in_quote = None;
            } else {
                current.as_mut().unwrap().text.push(ch);
            }
            continue;
        }
        match ch {
            '#' => break,
            c if c.is_whitespace() => {
                if let Some(t) = current.take() {
                    tokens.push(t);
                }
            }
            '"' => {
                current.get_or_insert(Token { text: String::new(), col });
                in_quote = Some(col);
            }
            c => current.get_or_insert(Token { text: String::new(), col }).text.push(c),
        }
    }
    if let Some(col) = in_quote {
        return Err(col);
    }
    if let Some(t) = current {
        tokens.push(t);
    }
    Ok(tokens)
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

/// Attribute list of one line: `key=value` pairs and bare flags.
struct Attributes {
    values: BTreeMap<String, (String, usize)>,
    flags: BTreeMap<String, usize>,
}

impl Attributes {
    fn collect(p: &mut Parser, line: usize, tokens: &[Token], allowed_keys: &[&str], allowed_flags: &[&str]) -> Self {
        let mut values = BTreeMap::new();
        let mut flags = BTreeMap::new();
        for t in tokens {
            if let Some((k, v)) = t.text.split_once('=') {
                if !allowed_keys.contains(&k) {
                    p.syntax(line, t.col, format!("unknown attribute `{k}`"));
                } else if values.insert(k.to_string(), (v.to_string(), t.col + k.chars().count() + 1)).is_some() {
                    p.syntax(line, t.col, format!("attribute `{k}` given twice"));
                }
            } else if allowed_flags.contains(&t.text.as_str()) {
                if flags.insert(t.text.clone(), t.col).is_some() {
                    p.syntax(line, t.col, format!("flag `{}` given twice", t.text));
                }
            } else {
                p.syntax(line, t.col, format!("unexpected token `{}`", t.text));
            }
        }
        Attributes { values, flags }
    }

    fn required(&self, p: &mut Parser, line: usize, col: usize, key: &str) -> Option<(String, usize)> {
        let v = self.values.get(key).cloned();
        if v.is_none() {
            p.syntax(line, col, format!("missing attribute `{key}`"));
        }
        v
    }

    fn flag(&self, name: &str) -> bool {
        self.flags.contains_key(name)
    }
}

fn number(p: &mut Parser, line: usize, col: usize, s: &str) -> Option<f64> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Some(v),
        _ => {
            p.syntax(line, col, format!("expected a finite number, found `{s}`"));
            None
        }
    }
}

fn vector(p: &mut Parser, line: usize, col: usize, s: &str) -> Option<Vec3> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        p.syntax(line, col, format!("expected x,y,z, found `{s}`"));
        return None;
    }
    let mut out = [0.0; 3];
    let mut offset = col;
    for (k, part) in parts.iter().enumerate() {
        out[k] = number(p, line, offset, part)?;
        offset += part.chars().count() + 1;
    }
    Some(out)
}

fn name(p: &mut Parser, line: usize, tok: Option<&Token>, what: &str, fallback_col: usize) -> Option<Name> {
    match tok {
        Some(t) if is_identifier(&t.text) => Some(Name { text: t.text.clone(), line, col: t.col }),
        Some(t) => {
            p.syntax(line, t.col, format!("invalid {what} `{}`", t.text));
            None
        }
        None => {
            p.syntax(line, fallback_col, format!("missing {what}"));
            None
        }
    }
}

struct RawWaypoint {
    name: Name,
    waypoint: Waypoint,
    target: Option<Name>,
}

struct RawEdge {
    from: Name,
    to: Name,
    edge: Edge,
}

struct RawMission {
    line: usize,
    start: Name,
    final_waypoint: Name,
    inspect: Vec<Name>,
    collision: CollisionOutcome,
}

/// Parses scenario text. Never panics; malformed input yields every
/// diagnostic that could be collected, sorted by position.
pub fn parse_scenario(text: &str) -> Result<Scenario, Vec<ScenarioError>> {
    let mut p = Parser { errors: Vec::new() };
    let mut obstacles: Vec<(Name, Obstacle)> = Vec::new();
    let mut waypoints: Vec<RawWaypoint> = Vec::new();
    let mut edges: Vec<RawEdge> = Vec::new();
    let mut mission: Option<RawMission> = None;
    let mut limits: Option<Limits> = None;

    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let tokens = match tokenize(raw) {
            Ok(t) => t,
            Err(col) => {
                p.syntax(line, col, "unterminated quoted string");
                continue;
            }
        };
        let Some((keyword, rest)) = tokens.split_first() else { continue };
        let end_col = raw.chars().count() + 1;
        match keyword.text.as_str() {
            "OBSTACLE" => {
                let label = name(&mut p, line, rest.first(), "obstacle label", end_col);
                let attrs = Attributes::collect(&mut p, line, rest.get(1..).unwrap_or(&[]), &["center", "half"], &["perturb"]);
                let center = attrs.required(&mut p, line, keyword.col, "center").and_then(|(v, c)| vector(&mut p, line, c, &v));
                let half = attrs.required(&mut p, line, keyword.col, "half").and_then(|(v, c)| vector(&mut p, line, c, &v));
                if let Some(h) = half {
                    if h.iter().any(|&x| x <= 0.0) {
                        p.err(line, attrs.values["half"].1, ErrorKind::InvalidValue, "half extents must be positive");
                    }
                }
                if let (Some(label), Some(center), Some(half_extents)) = (label, center, half) {
                    let o = Obstacle { label: label.text.clone(), center, half_extents, perturbable: attrs.flag("perturb") };
                    obstacles.push((label, o));
                }
            }
            "WAYPOINT" => {
                let id = name(&mut p, line, rest.first(), "waypoint id", end_col);
                let attrs = Attributes::collect(
                    &mut p,
                    line,
                    rest.get(1..).unwrap_or(&[]),
                    &["pos", "inspect", "label"],
                    &["critical"],
                );
                let pos = attrs.required(&mut p, line, keyword.col, "pos").and_then(|(v, c)| vector(&mut p, line, c, &v));
                let target = attrs.values.get("inspect").and_then(|(v, c)| {
                    let tok = Token { text: v.clone(), col: *c };
                    name(&mut p, line, Some(&tok), "inspection target", *c)
                });
                if let (Some(id), Some(position)) = (id, pos) {
                    let label = attrs.values.get("label").map(|(v, _)| v.clone()).unwrap_or_else(|| id.text.clone());
                    let waypoint = Waypoint {
                        id: id.text.clone(),
                        label,
                        position,
                        critical: attrs.flag("critical"),
                        inspection_target: target.as_ref().map(|t| t.text.clone()),
                    };
                    waypoints.push(RawWaypoint { name: id, waypoint, target });
                }
            }
            "EDGE" => {
                let from = name(&mut p, line, rest.first(), "edge endpoint", end_col);
                let to = name(&mut p, line, rest.get(1), "edge endpoint", end_col);
                let attrs = Attributes::collect(&mut p, line, rest.get(2..).unwrap_or(&[]), &["p"], &["oneway"]);
                let prob = match attrs.values.get("p") {
                    Some((v, c)) => number(&mut p, line, *c, v).and_then(|x| {
                        if (0.0..1.0).contains(&x) {
                            Some(x)
                        } else {
                            p.err(line, *c, ErrorKind::InvalidValue, format!("collision probability {x} outside [0, 1)"));
                            None
                        }
                    }),
                    None => Some(0.0),
                };
                if let (Some(from), Some(to), Some(prob)) = (from, to, prob) {
                    if from.text == to.text {
                        p.err(line, to.col, ErrorKind::InvalidValue, "edge endpoints must differ");
                        continue;
                    }
                    let edge = Edge {
                        from: from.text.clone(),
                        to: to.text.clone(),
                        collision_probability: prob,
                        oneway: attrs.flag("oneway"),
                    };
                    edges.push(RawEdge { from, to, edge });
                }
            }
            "MISSION" => {
                let attrs = Attributes::collect(&mut p, line, rest, &["start", "final", "inspect", "collision"], &[]);
                let ref_of = |key: &str, p: &mut Parser| {
                    attrs.required(p, line, keyword.col, key).and_then(|(v, c)| {
                        let tok = Token { text: v, col: c };
                        name(p, line, Some(&tok), key, c)
                    })
                };
                let start = ref_of("start", &mut p);
                let fin = ref_of("final", &mut p);
                let mut inspect = Vec::new();
                if let Some((v, c)) = attrs.values.get("inspect") {
                    let mut col = *c;
                    for part in v.split(',') {
                        let tok = Token { text: part.to_string(), col };
                        if let Some(n) = name(&mut p, line, Some(&tok), "inspection target", col) {
                            inspect.push(n);
                        }
                        col += part.chars().count() + 1;
                    }
                }
                let collision = match attrs.values.get("collision").map(|(v, c)| (v.as_str(), *c)) {
                    None | Some(("absorb", _)) => CollisionOutcome::Absorb,
                    Some(("restart", _)) => CollisionOutcome::Restart,
                    Some((other, c)) => {
                        p.syntax(line, c, format!("collision must be `absorb` or `restart`, found `{other}`"));
                        CollisionOutcome::Absorb
                    }
                };
                if mission.is_some() {
                    p.syntax(line, keyword.col, "MISSION given more than once");
                } else if let (Some(start), Some(final_waypoint)) = (start, fin) {
                    mission = Some(RawMission { line, start, final_waypoint, inspect, collision });
                }
            }
            "LIMITS" => {
                let keys = ["v_max", "v_crit", "critical_radius", "a_max"];
                let attrs = Attributes::collect(&mut p, line, rest, &keys, &[]);
                let mut l = Limits::default();
                for key in keys {
                    if let Some((v, c)) = attrs.values.get(key) {
                        if let Some(x) = number(&mut p, line, *c, v) {
                            match key {
                                "v_max" => l.v_max = x,
                                "v_crit" => l.v_crit = x,
                                "critical_radius" => l.critical_radius = x,
                                _ => l.a_max = x,
                            }
                        }
                    }
                }
                if !(l.v_max > 0.0 && l.v_crit > 0.0 && l.v_crit <= l.v_max) {
                    p.err(line, keyword.col, ErrorKind::InvalidValue, "speed limits need 0 < v_crit <= v_max");
                }
                if !(l.critical_radius >= 0.0) {
                    p.err(line, keyword.col, ErrorKind::InvalidValue, "critical radius must be nonnegative");
                }
                if !(l.a_max > 0.0) {
                    p.err(line, keyword.col, ErrorKind::InvalidValue, "a_max must be positive");
                }
                if limits.is_some() {
                    p.syntax(line, keyword.col, "LIMITS given more than once");
                }
                limits = Some(l);
            }
            other => p.syntax(line, keyword.col, format!("unknown section `{other}`")),
        }
    }

    // Semantic checks: identifiers and references.
    let mut obstacle_ids: HashMap<String, ()> = HashMap::new();
    for (n, _) in &obstacles {
        if obstacle_ids.insert(n.text.clone(), ()).is_some() {
            p.err(n.line, n.col, ErrorKind::DuplicateId(n.text.clone()), format!("duplicate obstacle `{}`", n.text));
        }
    }
    let mut waypoint_ids: HashMap<String, ()> = HashMap::new();
    for w in &waypoints {
        if waypoint_ids.insert(w.name.text.clone(), ()).is_some() {
            let t = &w.name.text;
            p.err(w.name.line, w.name.col, ErrorKind::DuplicateId(t.clone()), format!("duplicate waypoint `{t}`"));
        }
        if let Some(t) = &w.target {
            check_ref(&mut p, t, &obstacle_ids, "obstacle");
        }
    }
    let mut seen_edges: HashMap<(String, String), ()> = HashMap::new();
    for e in &edges {
        check_ref(&mut p, &e.from, &waypoint_ids, "waypoint");
        check_ref(&mut p, &e.to, &waypoint_ids, "waypoint");
        let key = if e.edge.oneway || e.from.text < e.to.text {
            (e.from.text.clone(), e.to.text.clone())
        } else {
            (e.to.text.clone(), e.from.text.clone())
        };
        if seen_edges.insert(key, ()).is_some() {
            let id = format!("{}-{}", e.from.text, e.to.text);
            p.err(e.from.line, e.from.col, ErrorKind::DuplicateId(id.clone()), format!("duplicate edge `{id}`"));
        }
    }
    match &mission {
        Some(m) => {
            check_ref(&mut p, &m.start, &waypoint_ids, "waypoint");
            check_ref(&mut p, &m.final_waypoint, &waypoint_ids, "waypoint");
            let mut targets: HashMap<String, ()> = HashMap::new();
            for t in &m.inspect {
                check_ref(&mut p, t, &obstacle_ids, "obstacle");
                if targets.insert(t.text.clone(), ()).is_some() {
                    p.err(t.line, t.col, ErrorKind::DuplicateId(t.text.clone()), format!("target `{}` listed twice", t.text));
                }
            }
            let _ = m.line;
        }
        None => {
            if p.errors.is_empty() {
                p.syntax(text.lines().count().max(1), 1, "missing MISSION line");
            }
        }
    }

    if !p.errors.is_empty() {
        let mut errors = p.errors;
        errors.sort_by(|a, b| (a.line, a.col).cmp(&(b.line, b.col)));
        return Err(errors);
    }
    let m = mission.expect("checked above");
    Ok(Scenario {
        obstacles: obstacles.into_iter().map(|(_, o)| o).collect(),
        waypoints: waypoints.into_iter().map(|w| w.waypoint).collect(),
        edges: edges.into_iter().map(|e| e.edge).collect(),
        mission: Mission {
            start: m.start.text,
            final_waypoint: m.final_waypoint.text,
            inspect: m.inspect.into_iter().map(|n| n.text).collect(),
            collision: m.collision,
        },
        limits: limits.unwrap_or_default(),
    })
}

fn check_ref(p: &mut Parser, n: &Name, known: &HashMap<String, ()>, what: &str) {
    if !known.contains_key(&n.text) {
        p.err(n.line, n.col, ErrorKind::UnknownReference(n.text.clone()), format!("unknown {what} `{}`", n.text));
    }
}

/// Byte-level entry point: invalid UTF-8 is reported as a syntax error at
/// the offending position.
pub fn parse_scenario_bytes(bytes: &[u8]) -> Result<Scenario, Vec<ScenarioError>> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse_scenario(text),
        Err(e) => {
            let valid = &bytes[..e.valid_up_to()];
            let line = valid.iter().filter(|&&b| b == b'\n').count() + 1;
            let line_start = valid.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
            let col = String::from_utf8_lossy(&valid[line_start..]).chars().count() + 1;
            Err(vec![ScenarioError { line, col, kind: ErrorKind::SyntaxError, message: "invalid UTF-8".into() }])
        }
    }
}
