use std::fmt::Write as _;

use crate::{Error, Label, LabelMask, Result};

/// Point counts per class, with percentages of the raw count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationReport {
    pub raw: usize,
    pub outliers: usize,
    pub ground: usize,
    pub non_ground: usize,
}

/// Counts a fully classified mask. Every point must be ground, non-ground or
/// outlier.
pub fn report(raw_count: usize, mask: &LabelMask) -> Result<ClassificationReport> {
    mask.expect_len(raw_count)?;
    let c = mask.counts();
    if c.unlabeled > 0 {
        return Err(Error::UnlabeledPointsRemain { count: c.unlabeled });
    }
    Ok(ClassificationReport {
        raw: raw_count,
        outliers: c.outlier,
        ground: c.ground,
        non_ground: c.non_ground,
    })
}

fn grouped(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(' ');
        }
        out.push(ch);
    }
    out
}

impl ClassificationReport {
    pub fn percent(&self, count: usize) -> f64 {
        if self.raw == 0 {
            0.0
        } else {
            100.0 * count as f64 / self.raw as f64
        }
    }

    pub fn kept(&self) -> usize {
        self.ground + self.non_ground
    }

    pub fn count(&self, label: Label) -> usize {
        match label {
            Label::Ground => self.ground,
            Label::NonGround => self.non_ground,
            Label::Outlier => self.outliers,
            Label::Unlabeled => 0,
        }
    }

    /// Aligned text table, one row per group.
    pub fn to_table(&self) -> String {
        let rows = [
            ("Point cloud without outliers", self.kept()),
            ("Outliers", self.outliers),
            ("Ground point cloud", self.ground),
            ("Non-ground point cloud", self.non_ground),
            ("Raw point cloud", self.raw),
        ];
        let mut s = String::new();
        let _ = writeln!(s, "{:<30} {:>14} {:>8}", "Group", "Points", "Percent");
        for (name, n) in rows {
            let _ = writeln!(
                s,
                "{:<30} {:>14} {:>8.2}",
                name,
                grouped(n),
                self.percent(n)
            );
        }
        s
    }

    /// `key=value` lines.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "raw_count={}", self.raw);
        for (key, n) in [
            ("outlier", self.outliers),
            ("ground", self.ground),
            ("non_ground", self.non_ground),
        ] {
            let _ = writeln!(s, "{key}_count={n}");
            let _ = writeln!(s, "{key}_percent={:.2}", self.percent(n));
        }
        s
    }
}
