//! Per-point classification labels.

use std::fmt;

use crate::{Error, Result};

/// Classification of one point. The discriminants are the integer codes
/// written to the `classification` column of exported clouds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
#[repr(u8)]
pub enum Label {
    #[default]
    Unlabeled = 0,
    Ground = 1,
    NonGround = 2,
    Outlier = 7,
}

impl Label {
    pub const ALL: [Label; 4] = [
        Label::Unlabeled,
        Label::Ground,
        Label::NonGround,
        Label::Outlier,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Label> {
        match code {
            0 => Some(Label::Unlabeled),
            1 => Some(Label::Ground),
            2 => Some(Label::NonGround),
            7 => Some(Label::Outlier),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Unlabeled => "unlabeled",
            Label::Ground => "ground",
            Label::NonGround => "non_ground",
            Label::Outlier => "outlier",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Label per point, parallel to a [`PointCloud`](crate::PointCloud).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelMask {
    labels: Vec<Label>,
}

/// Number of points carrying each label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LabelCounts {
    pub unlabeled: usize,
    pub ground: usize,
    pub non_ground: usize,
    pub outlier: usize,
}

impl LabelCounts {
    pub fn get(&self, label: Label) -> usize {
        match label {
            Label::Unlabeled => self.unlabeled,
            Label::Ground => self.ground,
            Label::NonGround => self.non_ground,
            Label::Outlier => self.outlier,
        }
    }

    pub fn total(&self) -> usize {
        self.unlabeled + self.ground + self.non_ground + self.outlier
    }
}

impl LabelMask {
    pub fn new(labels: Vec<Label>) -> Self {
        LabelMask { labels }
    }

    pub fn filled(len: usize, label: Label) -> Self {
        LabelMask {
            labels: vec![label; len],
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn as_slice(&self) -> &[Label] {
        &self.labels
    }

    pub fn iter(&self) -> impl Iterator<Item = Label> + '_ {
        self.labels.iter().copied()
    }

    pub fn counts(&self) -> LabelCounts {
        let mut c = LabelCounts::default();
        for l in &self.labels {
            match l {
                Label::Unlabeled => c.unlabeled += 1,
                Label::Ground => c.ground += 1,
                Label::NonGround => c.non_ground += 1,
                Label::Outlier => c.outlier += 1,
            }
        }
        c
    }

    pub fn indices_of(&self, label: Label) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == label)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn expect_len(&self, len: usize) -> Result<()> {
        if self.labels.len() != len {
            return Err(Error::LengthMismatch {
                expected: len,
                actual: self.labels.len(),
            });
        }
        Ok(())
    }

    /// Writes labels of a subcloud back to their original positions.
    ///
    /// `index_map[j]` is the original index of subcloud point `j`. Points that
    /// already carry `Outlier` keep it.
    pub fn refine(&mut self, index_map: &[usize], sub: &LabelMask) -> Result<()> {
        if index_map.len() != sub.len() {
            return Err(Error::LengthMismatch {
                expected: index_map.len(),
                actual: sub.len(),
            });
        }
        for (&orig, label) in index_map.iter().zip(sub.iter()) {
            if self.labels[orig] != Label::Outlier {
                self.labels[orig] = label;
            }
        }
        Ok(())
    }
}

impl FromIterator<Label> for LabelMask {
    fn from_iter<I: IntoIterator<Item = Label>>(iter: I) -> Self {
        LabelMask::new(iter.into_iter().collect())
    }
}

impl From<Vec<Label>> for LabelMask {
    fn from(labels: Vec<Label>) -> Self {
        LabelMask::new(labels)
    }
}
