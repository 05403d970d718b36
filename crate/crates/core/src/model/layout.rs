use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::geometry::Skeleton;
use crate::numerics::Activation;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartSpec {
    pub name: String,
    pub head_count: usize,
    pub codebook_id: String,
    /// Skeleton joints decoded by this part, in output order.
    pub joint_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalSpec {
    pub head_count: usize,
    pub codebook_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodebookSpec {
    pub id: String,
    pub size: usize,
}

/// How the latent is split into code slots.
///
/// Slots are numbered part by part in layout order, then the global group.
/// Without a global group, part decoders see only their own slots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartLayout {
    pub parts: Vec<PartSpec>,
    pub global: Option<GlobalSpec>,
    pub codebooks: Vec<CodebookSpec>,
    pub d_code: usize,
}

/// Encoder/decoder trunk shape shared by every head and part decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HiddenSpec {
    pub width: usize,
    pub layers: usize,
    pub activation: Activation,
}

impl HiddenSpec {
    pub fn desk() -> Self {
        Self {
            width: 64,
            layers: 2,
            activation: Activation::LeakyRelu,
        }
    }

    pub fn full() -> Self {
        Self {
            width: 256,
            ..Self::desk()
        }
    }

    pub fn widths(&self, input: usize, output: usize) -> Vec<usize> {
        let mut w = vec![input];
        w.extend(std::iter::repeat(self.width).take(self.layers));
        w.push(output);
        w
    }
}

/// Canonical part names of the body skeleton.
pub const BODY_PARTS: [&str; 6] = ["Head", "Torso", "LeftArm", "RightArm", "LeftLeg", "RightLeg"];

impl PartLayout {
    /// Six body parts with per-part head counts (`[head, torso, arm, leg]`),
    /// shared arm and leg codebooks, and a global group.
    pub fn body(
        skeleton: &Skeleton,
        heads: [usize; 4],
        global_heads: usize,
        sizes: [usize; 5],
        d_code: usize,
    ) -> Result<Self> {
        let [head, torso, arm, leg] = heads;
        let plan = [
            ("Head", head, "head"),
            ("Torso", torso, "torso"),
            ("LeftArm", arm, "arms"),
            ("RightArm", arm, "arms"),
            ("LeftLeg", leg, "legs"),
            ("RightLeg", leg, "legs"),
        ];
        let parts = plan
            .iter()
            .map(|&(name, head_count, codebook)| {
                let p = skeleton
                    .part_index(name)
                    .ok_or_else(|| Error::InvalidLayout(format!("skeleton has no part `{name}`")))?;
                Ok(PartSpec {
                    name: name.into(),
                    head_count,
                    codebook_id: codebook.into(),
                    joint_indices: skeleton.joints_of_part(p),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let ids = ["head", "torso", "arms", "legs", "global"];
        let layout = Self {
            parts,
            global: Some(GlobalSpec {
                head_count: global_heads,
                codebook_id: "global".into(),
            }),
            codebooks: ids
                .iter()
                .zip(sizes)
                .map(|(id, size)| CodebookSpec {
                    id: (*id).into(),
                    size,
                })
                .collect(),
            d_code,
        };
        layout.validate(skeleton)?;
        Ok(layout)
    }

    /// Full-scale layout: 3 + 12 x 5 part heads, 3 global heads, books of
    /// 8 (head, global) and 32 (torso, arms, legs) codes of dimension 16.
    pub fn full(skeleton: &Skeleton) -> Result<Self> {
        Self::body(skeleton, [3, 12, 12, 12], 3, [8, 32, 32, 32, 8], 16)
    }

    /// Desk-scale layout: 2 + 4 x 5 part heads, 2 global heads, books of
    /// 8 (head, global) and 16 (torso, arms, legs) codes of dimension 8.
    pub fn desk(skeleton: &Skeleton) -> Result<Self> {
        Self::body(skeleton, [2, 4, 4, 4], 2, [8, 16, 16, 16, 8], 8)
    }

    /// One undifferentiated group over the whole skeleton: no part split,
    /// no global conditioning.
    pub fn single_group(skeleton: &Skeleton, heads: usize, size: usize, d_code: usize) -> Result<Self> {
        let layout = Self {
            parts: vec![PartSpec {
                name: "Body".into(),
                head_count: heads,
                codebook_id: "body".into(),
                joint_indices: (0..skeleton.joint_count()).collect(),
            }],
            global: None,
            codebooks: vec![CodebookSpec {
                id: "body".into(),
                size,
            }],
            d_code,
        };
        layout.validate(skeleton)?;
        Ok(layout)
    }

    pub fn validate(&self, skeleton: &Skeleton) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidLayout(m));
        if self.parts.is_empty() {
            return bad("no parts".into());
        }
        if self.d_code == 0 {
            return bad("d_code must be >= 1".into());
        }
        for (i, cb) in self.codebooks.iter().enumerate() {
            if cb.size == 0 {
                return bad(format!("codebook `{}` has no codes", cb.id));
            }
            if self.codebooks[..i].iter().any(|o| o.id == cb.id) {
                return bad(format!("duplicate codebook `{}`", cb.id));
            }
        }
        let mut owner = vec![None; skeleton.joint_count()];
        for (i, p) in self.parts.iter().enumerate() {
            if self.parts[..i].iter().any(|o| o.name == p.name) {
                return bad(format!("duplicate part `{}`", p.name));
            }
            if p.head_count == 0 {
                return bad(format!("part `{}` has no heads", p.name));
            }
            if p.joint_indices.is_empty() {
                return bad(format!("part `{}` owns no joints", p.name));
            }
            self.codebook_index(&p.codebook_id)?;
            for &j in &p.joint_indices {
                match owner.get_mut(j) {
                    None => return bad(format!("part `{}` names joint {j} outside the skeleton", p.name)),
                    Some(Some(o)) => return bad(format!("joint {j} claimed by `{o}` and `{}`", p.name)),
                    Some(slot) => *slot = Some(p.name.clone()),
                }
            }
        }
        if let Some(j) = owner.iter().position(Option::is_none) {
            return bad(format!("joint {j} belongs to no part"));
        }
        if let Some(g) = &self.global {
            if g.head_count == 0 {
                return bad("global group has no heads".into());
            }
            self.codebook_index(&g.codebook_id)?;
        }
        Ok(())
    }

    pub fn codebook_index(&self, id: &str) -> Result<usize> {
        self.codebooks
            .iter()
            .position(|c| c.id == id)
            .ok_or_else(|| Error::InvalidLayout(format!("unknown codebook `{id}`")))
    }

    pub fn part_index(&self, name: &str) -> Result<usize> {
        self.parts.iter().position(|p| p.name == name).ok_or_else(|| Error::UnknownPart {
            name: name.into(),
            valid: self.part_names(),
        })
    }

    pub fn part_names(&self) -> Vec<String> {
        self.parts.iter().map(|p| p.name.clone()).collect()
    }

    pub fn global_heads(&self) -> usize {
        self.global.as_ref().map_or(0, |g| g.head_count)
    }

    pub fn part_slot_count(&self) -> usize {
        self.parts.iter().map(|p| p.head_count).sum()
    }

    pub fn slot_count(&self) -> usize {
        self.part_slot_count() + self.global_heads()
    }

    /// Slot range of part `p`.
    pub fn part_slots(&self, p: usize) -> Range<usize> {
        let start: usize = self.parts[..p].iter().map(|q| q.head_count).sum();
        start..start + self.parts[p].head_count
    }

    pub fn global_slots(&self) -> Range<usize> {
        let start = self.part_slot_count();
        start..start + self.global_heads()
    }

    /// Codebook index of every slot.
    pub fn slot_codebooks(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.slot_count());
        for p in &self.parts {
            let cb = self.codebook_index(&p.codebook_id).expect("validated");
            out.extend(std::iter::repeat(cb).take(p.head_count));
        }
        if let Some(g) = &self.global {
            let cb = self.codebook_index(&g.codebook_id).expect("validated");
            out.extend(std::iter::repeat(cb).take(g.head_count));
        }
        out
    }

    /// Decoder input width of part `p`.
    pub fn decoder_input(&self, p: usize) -> usize {
        (self.parts[p].head_count + self.global_heads()) * self.d_code
    }
}
