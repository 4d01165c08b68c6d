use std::path::Path;

use super::Vec3;
use crate::error::{Error, Result};

/// Rest pose of the 22-joint text-to-motion skeleton (Y up, +Z forward,
/// +X to the subject's left, arms hanging down).
const DEFAULT_DEFINITION: &str = include_str!("../../data/skeleton_22.txt");

#[derive(Debug, Clone, PartialEq)]
pub struct JointDef {
    pub name: String,
    pub parent: Option<usize>,
    /// Bone vector from the parent joint to this joint in the rest pose, meters.
    pub rest_offset: Vec3,
}

/// Rooted joint tree in topological order.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    joints: Vec<JointDef>,
    children: Vec<Vec<usize>>,
}

impl Skeleton {
    pub fn new(joints: Vec<JointDef>) -> Result<Self> {
        if joints.is_empty() {
            return Err(Error::Skeleton("no joints".into()));
        }
        for (i, j) in joints.iter().enumerate() {
            match (i, j.parent) {
                (0, None) => {}
                (0, Some(_)) => return Err(Error::Skeleton(format!("root joint `{}` has a parent", j.name))),
                (_, None) => {
                    return Err(Error::Skeleton(format!(
                        "joint {i} `{}` has no parent; only joint 0 may be the root",
                        j.name
                    )))
                }
                (_, Some(p)) if p == i => {
                    return Err(Error::Skeleton(format!(
                        "joint {i} `{}` is its own parent (cycle)",
                        j.name
                    )))
                }
                (_, Some(p)) if p > i => {
                    return Err(Error::Skeleton(format!(
                        "joint {i} `{}` references parent {p} that comes later (forward reference)",
                        j.name
                    )))
                }
                _ => {}
            }
            if !j.rest_offset.iter().all(|v| v.is_finite()) {
                return Err(Error::Skeleton(format!(
                    "joint {i} `{}` has a non-finite offset",
                    j.name
                )));
            }
            if i > 0 && j.rest_offset.norm() == 0.0 {
                return Err(Error::Skeleton(format!(
                    "joint {i} `{}` has a zero-length rest offset",
                    j.name
                )));
            }
            if joints[..i].iter().any(|o| o.name == j.name) {
                return Err(Error::Skeleton(format!("duplicate joint name `{}`", j.name)));
            }
        }
        let mut children = vec![Vec::new(); joints.len()];
        for (i, j) in joints.iter().enumerate().skip(1) {
            children[j.parent.expect("validated")].push(i);
        }
        Ok(Skeleton { joints, children })
    }

    /// The canonical 22-joint skeleton shipped with the crate.
    pub fn default_22() -> Self {
        Self::parse_definition(DEFAULT_DEFINITION).expect("bundled skeleton definition is valid")
    }

    /// Parses the text definition format: one joint per line,
    /// `index name parent_index offset_x offset_y offset_z`, root parent `-1`.
    /// Blank lines and `#` comments are ignored.
    pub fn parse_definition(text: &str) -> Result<Self> {
        Self::parse_with_origin(text, Path::new("<skeleton>"))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_with_origin(&text, path)
    }

    fn parse_with_origin(text: &str, path: &Path) -> Result<Self> {
        let mut joints = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let line_no = lineno + 1;
            if fields.len() != 6 {
                return Err(Error::record(
                    path,
                    line_no,
                    format!("expected 6 fields, found {}", fields.len()),
                ));
            }
            let index: usize = fields[0]
                .parse()
                .map_err(|_| Error::record(path, line_no, format!("bad joint index `{}`", fields[0])))?;
            if index != joints.len() {
                return Err(Error::record(
                    path,
                    line_no,
                    format!("joint index {index} out of order, expected {}", joints.len()),
                ));
            }
            let parent: i64 = fields[2]
                .parse()
                .map_err(|_| Error::record(path, line_no, format!("bad parent index `{}`", fields[2])))?;
            let parent = match parent {
                -1 => None,
                p if p >= 0 => Some(p as usize),
                p => return Err(Error::record(path, line_no, format!("bad parent index {p}"))),
            };
            let mut offset = [0.0; 3];
            for (k, f) in fields[3..].iter().enumerate() {
                offset[k] = f
                    .parse()
                    .map_err(|_| Error::record(path, line_no, format!("bad offset value `{f}`")))?;
            }
            joints.push(JointDef {
                name: fields[1].to_string(),
                parent,
                rest_offset: Vec3::from(offset),
            });
        }
        Skeleton::new(joints).map_err(|e| Error::format(path, e.to_string()))
    }

    /// Renders the definition format accepted by [`Skeleton::parse_definition`].
    pub fn to_definition(&self) -> String {
        let mut out = String::from("# index name parent_index offset_x offset_y offset_z\n");
        for (i, j) in self.joints.iter().enumerate() {
            let parent = j.parent.map_or(-1, |p| p as i64);
            out.push_str(&format!(
                "{i} {} {parent} {} {} {}\n",
                j.name, j.rest_offset.x, j.rest_offset.y, j.rest_offset.z
            ));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn joints(&self) -> &[JointDef] {
        &self.joints
    }

    pub fn joint(&self, i: usize) -> &JointDef {
        &self.joints[i]
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.joints[i].parent
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.joints.iter().map(|j| j.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    /// Rest-pose global joint positions with the root at the origin.
    pub fn rest_positions(&self) -> Vec<Vec3> {
        let mut pos = vec![Vec3::zeros(); self.len()];
        for (i, j) in self.joints.iter().enumerate().skip(1) {
            pos[i] = pos[j.parent.expect("non-root")] + j.rest_offset;
        }
        pos
    }

    /// Copy with every bone scaled by `factor` (body-size variation).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::Parameter(format!("scale factor must be positive, got {factor}")));
        }
        let joints = self
            .joints
            .iter()
            .map(|j| JointDef {
                rest_offset: j.rest_offset * factor,
                ..j.clone()
            })
            .collect();
        Skeleton::new(joints)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn joint(name: &str, parent: Option<usize>, off: [f64; 3]) -> JointDef {
        JointDef {
            name: name.into(),
            parent,
            rest_offset: Vec3::from(off),
        }
    }

    #[test]
    fn default_skeleton_is_22_joint_tree() {
        let s = Skeleton::default_22();
        assert_eq!(s.len(), 22);
        let edges: usize = (0..s.len()).map(|i| s.children(i).len()).sum();
        assert_eq!(edges, 21);
        assert_eq!(s.joint(0).name, "pelvis");
        assert!(s.parent(0).is_none());
        for i in 1..s.len() {
            assert!(s.parent(i).unwrap() < i);
            assert!(s.joint(i).rest_offset.norm() > 0.0);
        }
        assert_eq!(s.children(0), &[1, 2, 3]);
        assert_eq!(s.children(9), &[12, 13, 14]);
        assert_eq!(s.index_of("left_elbow"), Some(18));
    }

    #[test]
    fn definition_round_trips() {
        let s = Skeleton::default_22();
        let again = Skeleton::parse_definition(&s.to_definition()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn rejects_forward_reference() {
        let err = Skeleton::new(vec![
            joint("root", None, [0.0; 3]),
            joint("a", Some(2), [0.0, 1.0, 0.0]),
            joint("b", Some(0), [0.0, 1.0, 0.0]),
        ])
        .unwrap_err();
        assert!(err.to_string().contains("forward reference"), "{err}");
    }

    #[test]
    fn rejects_cycle_and_second_root() {
        let err = Skeleton::new(vec![
            joint("root", None, [0.0; 3]),
            joint("a", Some(1), [1.0, 0.0, 0.0]),
        ])
        .unwrap_err();
        assert!(err.to_string().contains("cycle"), "{err}");
        let err = Skeleton::new(vec![joint("root", None, [0.0; 3]), joint("a", None, [1.0, 0.0, 0.0])]).unwrap_err();
        assert!(err.to_string().contains("only joint 0"), "{err}");
    }

    #[test]
    fn rejects_zero_offset() {
        let err = Skeleton::new(vec![joint("root", None, [0.0; 3]), joint("a", Some(0), [0.0; 3])]).unwrap_err();
        assert!(err.to_string().contains("zero-length"), "{err}");
    }

    #[test]
    fn parse_errors_carry_line() {
        let err = Skeleton::parse_definition("0 root -1 0 0 0\n1 a 0 0 x 0\n").unwrap_err();
        assert!(err.to_string().contains(":2:"), "{err}");
        let err = Skeleton::parse_definition("0 root -1 0 0 0\n2 a 0 0 1 0\n").unwrap_err();
        assert!(err.to_string().contains("out of order"), "{err}");
    }
}
