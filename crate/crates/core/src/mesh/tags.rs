use std::fmt;
use std::str::FromStr;

use crate::{Error, Point};

/// Geometric tolerance for tagging predicates, in domain units.
pub const TAG_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    Equal,
    LessEqual,
    GreaterEqual,
}

/// Membership test applied to boundary edge midpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Predicate {
    /// `x = c`, `y <= c` and similar.
    Axis { axis: Axis, cmp: Comparison, value: f64 },
    /// `nx·x + ny·y <= c`.
    HalfPlane { normal: Point, offset: f64 },
    Box { min: Point, max: Point },
    /// Closed disk, which also catches the chords of a faceted circle.
    Disk { center: Point, radius: f64 },
    All,
}

impl Predicate {
    pub fn contains(&self, p: Point) -> bool {
        let tol = TAG_TOLERANCE;
        match *self {
            Predicate::Axis { axis, cmp, value } => {
                let v = match axis {
                    Axis::X => p[0],
                    Axis::Y => p[1],
                };
                match cmp {
                    Comparison::Equal => (v - value).abs() <= tol,
                    Comparison::LessEqual => v <= value + tol,
                    Comparison::GreaterEqual => v >= value - tol,
                }
            }
            Predicate::HalfPlane { normal, offset } => normal[0] * p[0] + normal[1] * p[1] <= offset + tol,
            Predicate::Box { min, max } => {
                p[0] >= min[0] - tol && p[0] <= max[0] + tol && p[1] >= min[1] - tol && p[1] <= max[1] + tol
            }
            Predicate::Disk { center, radius } => {
                (p[0] - center[0]).hypot(p[1] - center[1]) <= radius + tol
            }
            Predicate::All => true,
        }
    }
}

/// Assigns `tag` to boundary edges whose midpoint satisfies `predicate`.
#[derive(Debug, Clone, PartialEq)]
pub struct TagRule {
    pub predicate: Predicate,
    pub tag: String,
}

impl TagRule {
    pub fn new(predicate: Predicate, tag: impl Into<String>) -> Self {
        Self { predicate, tag: tag.into() }
    }
}

fn numbers(args: &str, count: usize, text: &str) -> Result<Vec<f64>, Error> {
    let values: Result<Vec<f64>, _> = args.split(',').map(|s| s.trim().parse::<f64>()).collect();
    match values {
        Ok(v) if v.len() == count => Ok(v),
        _ => Err(Error::InvalidParameter(format!("`{text}`: expected {count} comma-separated numbers"))),
    }
}

/// Parses `x = 0`, `y >= 0.41`, `halfplane(nx, ny, c)`,
/// `box(x0, y0, x1, y1)`, `disk(cx, cy, r)` or `all`.
impl FromStr for Predicate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let text = s.trim();
        if text == "all" {
            return Ok(Predicate::All);
        }
        if let Some(open) = text.find('(') {
            let name = text[..open].trim();
            let args = text[open + 1..]
                .strip_suffix(')')
                .ok_or_else(|| Error::InvalidParameter(format!("`{text}`: missing `)`")))?;
            return match name {
                "halfplane" => {
                    let v = numbers(args, 3, text)?;
                    Ok(Predicate::HalfPlane { normal: [v[0], v[1]], offset: v[2] })
                }
                "box" => {
                    let v = numbers(args, 4, text)?;
                    Ok(Predicate::Box { min: [v[0], v[1]], max: [v[2], v[3]] })
                }
                "disk" | "circle" => {
                    let v = numbers(args, 3, text)?;
                    Ok(Predicate::Disk { center: [v[0], v[1]], radius: v[2] })
                }
                _ => Err(Error::InvalidParameter(format!("`{text}`: unknown predicate `{name}`"))),
            };
        }
        let axis = match text.chars().next() {
            Some('x') => Axis::X,
            Some('y') => Axis::Y,
            _ => return Err(Error::InvalidParameter(format!("`{text}`: unknown predicate"))),
        };
        let rest = text[1..].trim_start();
        let (cmp, value) = if let Some(v) = rest.strip_prefix("<=") {
            (Comparison::LessEqual, v)
        } else if let Some(v) = rest.strip_prefix(">=") {
            (Comparison::GreaterEqual, v)
        } else if let Some(v) = rest.strip_prefix("==").or_else(|| rest.strip_prefix('=')) {
            (Comparison::Equal, v)
        } else {
            return Err(Error::InvalidParameter(format!("`{text}`: expected `=`, `<=` or `>=`")));
        };
        let value = value
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("`{text}`: bad number")))?;
        Ok(Predicate::Axis { axis, cmp, value })
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Axis { axis, cmp, value } => {
                let a = if *axis == Axis::X { "x" } else { "y" };
                let c = match cmp {
                    Comparison::Equal => "=",
                    Comparison::LessEqual => "<=",
                    Comparison::GreaterEqual => ">=",
                };
                write!(f, "{a} {c} {value}")
            }
            Predicate::HalfPlane { normal, offset } => write!(f, "halfplane({}, {}, {offset})", normal[0], normal[1]),
            Predicate::Box { min, max } => write!(f, "box({}, {}, {}, {})", min[0], min[1], max[0], max[1]),
            Predicate::Disk { center, radius } => write!(f, "disk({}, {}, {radius})", center[0], center[1]),
            Predicate::All => f.write_str("all"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate, Domain, Family};

    #[test]
    fn parse_predicates() {
        assert_eq!(
            "x = 0".parse::<Predicate>().unwrap(),
            Predicate::Axis { axis: Axis::X, cmp: Comparison::Equal, value: 0.0 }
        );
        assert_eq!(
            "y>=0.41".parse::<Predicate>().unwrap(),
            Predicate::Axis { axis: Axis::Y, cmp: Comparison::GreaterEqual, value: 0.41 }
        );
        assert_eq!(
            "disk(0.2, 0.2, 0.05)".parse::<Predicate>().unwrap(),
            Predicate::Disk { center: [0.2, 0.2], radius: 0.05 }
        );
        assert!("z = 1".parse::<Predicate>().is_err());
        assert!("box(1, 2)".parse::<Predicate>().is_err());
        for s in ["x <= 0.5", "halfplane(1, 0, 0.25)", "box(0, 0, 1, 1)", "all"] {
            let p: Predicate = s.parse().unwrap();
            assert_eq!(p.to_string().parse::<Predicate>().unwrap(), p);
        }
    }

    #[test]
    fn inlet_and_walls() {
        let mesh = generate(Family::Quad, 16, 0, &Domain::unit_square()).unwrap();
        let mesh = mesh
            .tag_boundary(&[TagRule::new("x = 0".parse().unwrap(), "inlet"), TagRule::new(Predicate::All, "wall")])
            .unwrap();
        for b in mesh.boundary_edges() {
            let mid_x = 0.5 * (mesh.vertices()[b.vertices[0]][0] + mesh.vertices()[b.vertices[1]][0]);
            assert_eq!(b.tag == "inlet", mid_x == 0.0);
        }
        assert_eq!(mesh.boundary_edges().iter().filter(|b| b.tag == "inlet").count(), 4);
    }

    #[test]
    fn empty_rules_name_every_edge() {
        let mesh = generate(Family::Quad, 4, 0, &Domain::unit_square()).unwrap();
        match mesh.tag_boundary(&[]) {
            Err(Error::UntaggedEdges(edges)) => assert_eq!(edges.len(), 8),
            other => panic!("{other:?}"),
        }
    }
}
