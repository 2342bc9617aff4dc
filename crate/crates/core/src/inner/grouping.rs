use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::numeric::{Layout, ParamKind, ParamVector};

/// How hyperparameters are shared across layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum GroupingMode {
    Global,
    /// `k` contiguous blocks of layers, earlier blocks one layer larger when uneven.
    Grouped {
        k: usize,
    },
    Layerwise,
    /// Explicit per-segment assignment (see [`GroupingScheme::from_assignment`]).
    #[serde(skip)]
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HyperKind {
    /// One learning rate shared by weights and biases.
    Alpha,
    AlphaWeight,
    AlphaBias,
    Lambda,
}

impl HyperKind {
    pub fn is_alpha(self) -> bool {
        !matches!(self, HyperKind::Lambda)
    }

    fn prefix(self) -> &'static str {
        match self {
            HyperKind::Alpha => "alpha",
            HyperKind::AlphaWeight => "alpha_w",
            HyperKind::AlphaBias => "alpha_b",
            HyperKind::Lambda => "lambda",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HyperEntry {
    pub kind: HyperKind,
    pub group: usize,
}

impl fmt::Display for HyperEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.g{}", self.kind.prefix(), self.group)
    }
}

/// Assignment of parameter segments to hyperparameter groups, plus the
/// flattened hyperparameter ordering `(alpha_w, alpha_b, lambda)` per group
/// (`(alpha, lambda)` when the learning rate is tied).
#[derive(Debug, Clone)]
pub struct GroupingScheme {
    mode: GroupingMode,
    tie_alpha: bool,
    layout: Arc<Layout>,
    segment_group: Vec<usize>,
    n_groups: usize,
    entries: Arc<Vec<HyperEntry>>,
    /// Per segment: (index of its learning rate, index of its decay) in the flat ordering.
    segment_hyper: Vec<(usize, usize)>,
}

impl GroupingScheme {
    pub fn new(mode: GroupingMode, tie_alpha: bool, layout: Arc<Layout>) -> Result<Self> {
        let n_layers = layout.num_layers();
        let layer_group: Vec<usize> = match mode {
            GroupingMode::Global => vec![0; n_layers],
            GroupingMode::Layerwise => (0..n_layers).collect(),
            GroupingMode::Grouped { k } => {
                if k == 0 || k > n_layers {
                    return Err(Error::config(format!(
                        "grouped mode needs 1 <= k <= {n_layers} layers, got k = {k}"
                    )));
                }
                let (base, rem) = (n_layers / k, n_layers % k);
                (0..k)
                    .flat_map(|g| std::iter::repeat_n(g, base + usize::from(g < rem)))
                    .collect()
            }
            GroupingMode::Custom => {
                return Err(Error::config(
                    "custom grouping needs an explicit assignment",
                ))
            }
        };
        let assignment = layout
            .segments()
            .iter()
            .map(|s| layer_group[s.layer])
            .collect();
        Self::build(mode, tie_alpha, layout, assignment)
    }

    /// Scheme for the usual defaults: tied learning rate in global mode, split otherwise.
    pub fn with_default_tie(mode: GroupingMode, layout: Arc<Layout>) -> Result<Self> {
        Self::new(mode, matches!(mode, GroupingMode::Global), layout)
    }

    pub fn global(layout: Arc<Layout>) -> Self {
        Self::new(GroupingMode::Global, true, layout).expect("global grouping is always valid")
    }

    /// One group id per layout segment; ids must be `0..n` with none unused.
    pub fn from_assignment(
        segment_group: Vec<usize>,
        tie_alpha: bool,
        layout: Arc<Layout>,
    ) -> Result<Self> {
        Self::build(GroupingMode::Custom, tie_alpha, layout, segment_group)
    }

    fn build(
        mode: GroupingMode,
        tie_alpha: bool,
        layout: Arc<Layout>,
        segment_group: Vec<usize>,
    ) -> Result<Self> {
        check_len(
            "grouping assignment",
            layout.segments().len(),
            segment_group.len(),
        )?;
        let n_groups = segment_group.iter().map(|g| g + 1).max().unwrap_or(0);
        for g in 0..n_groups {
            if !segment_group.contains(&g) {
                return Err(Error::config(format!(
                    "hyperparameter group {g} has no parameters"
                )));
            }
        }
        let per_group = if tie_alpha { 2 } else { 3 };
        let mut entries = Vec::with_capacity(n_groups * per_group);
        for group in 0..n_groups {
            if tie_alpha {
                entries.push(HyperEntry {
                    kind: HyperKind::Alpha,
                    group,
                });
            } else {
                entries.push(HyperEntry {
                    kind: HyperKind::AlphaWeight,
                    group,
                });
                entries.push(HyperEntry {
                    kind: HyperKind::AlphaBias,
                    group,
                });
            }
            entries.push(HyperEntry {
                kind: HyperKind::Lambda,
                group,
            });
        }
        let segment_hyper = layout
            .segments()
            .iter()
            .zip(&segment_group)
            .map(|(s, &g)| {
                let base = g * per_group;
                let alpha = match (tie_alpha, s.kind) {
                    (true, _) | (false, ParamKind::Weight) => base,
                    (false, ParamKind::Bias) => base + 1,
                };
                (alpha, base + per_group - 1)
            })
            .collect();
        Ok(GroupingScheme {
            mode,
            tie_alpha,
            layout,
            segment_group,
            n_groups,
            entries: Arc::new(entries),
            segment_hyper,
        })
    }

    pub fn mode(&self) -> GroupingMode {
        self.mode
    }

    pub fn tie_alpha(&self) -> bool {
        self.tie_alpha
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    pub fn segment_groups(&self) -> &[usize] {
        &self.segment_group
    }

    pub fn entries(&self) -> &[HyperEntry] {
        &self.entries
    }

    pub fn n_hyper(&self) -> usize {
        self.entries.len()
    }

    /// Flat-ordering indices `(alpha, lambda)` governing segment `seg`.
    pub fn segment_hyper(&self, seg: usize) -> (usize, usize) {
        self.segment_hyper[seg]
    }

    pub fn entry_names(&self) -> Vec<String> {
        self.entries.iter().map(ToString::to_string).collect()
    }

    /// Every learning rate set to `alpha`, every decay to `lambda`.
    pub fn init_hyper(&self, alpha: f64, lambda: f64) -> Result<HyperVector> {
        if !(alpha >= 0.0 && lambda >= 0.0) {
            return Err(Error::config("initial hyperparameters must be >= 0"));
        }
        let values = self
            .entries
            .iter()
            .map(|e| if e.kind.is_alpha() { alpha } else { lambda })
            .collect();
        Ok(HyperVector {
            values,
            entries: self.entries.clone(),
        })
    }

    pub fn hyper_from_values(&self, values: Vec<f64>) -> Result<HyperVector> {
        check_len("hyperparameter vector", self.n_hyper(), values.len())?;
        Ok(HyperVector {
            values,
            entries: self.entries.clone(),
        })
    }

    pub(crate) fn check_params(&self, theta: &ParamVector, context: &'static str) -> Result<()> {
        check_len(context, self.layout.len(), theta.len())?;
        check_len(
            context,
            self.layout.segments().len(),
            theta.layout().segments().len(),
        )
    }

    pub(crate) fn check_hyper(&self, phi: &HyperVector, context: &'static str) -> Result<()> {
        check_len(context, self.n_hyper(), phi.len())
    }
}

/// Hyperparameter values in the grouping's flat ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperVector {
    values: Vec<f64>,
    entries: Arc<Vec<HyperEntry>>,
}

impl HyperVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn entries(&self) -> &[HyperEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        check_len("hyperparameter vector", self.len(), values.len())?;
        Ok(HyperVector {
            values,
            entries: self.entries.clone(),
        })
    }

    /// Overwrites every learning-rate entry (or every decay entry) with `value`.
    pub fn overwrite(&mut self, alpha: bool, value: f64) {
        for (v, e) in self.values.iter_mut().zip(self.entries.iter()) {
            if e.kind.is_alpha() == alpha {
                *v = value;
            }
        }
    }
}
