//! Classification and sparsity losses plus the attribute-group registry.
//!
//! The classification loss balances per-branch cross-entropy by the
//! reciprocal of each branch's class count. Two regularizers act on the
//! (branches x frames) attention matrix of a segment:
//!
//! - plain sparsity: the L1 norm, applied per branch independently;
//! - group sparsity: per frame, the L2 norm of each attribute group's
//!   weights, summed with weights 1/|group|. Members of a group are pushed
//!   toward zero together, which is what lets jointly-occluded attributes
//!   share their evidence about a frame.

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::model::BranchSpec;
use crate::tensor::{self, Tensor, LOG_EPS};
use std::io::{BufRead, Write};
use std::path::Path;

/// Which penalty a training run applies to the attention matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regularizer {
    None,
    Sparsity,
    Group,
}

impl Regularizer {
    pub fn name(&self) -> &'static str {
        match self {
            Regularizer::None => "none",
            Regularizer::Sparsity => "sparsity",
            Regularizer::Group => "group",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Regularizer::None),
            "sparsity" => Ok(Regularizer::Sparsity),
            "group" => Ok(Regularizer::Group),
            other => Err(Error::Lookup(format!("unknown regularizer '{other}'"))),
        }
    }
}

/// Disjoint partition of branch indices into attribute groups.
///
/// Group weights are fixed at 1/|group|.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPartition {
    names: Vec<String>,
    groups: Vec<Vec<usize>>,
    gammas: Vec<f64>,
    n_branches: usize,
}

impl GroupPartition {
    pub fn new(names: Vec<String>, groups: Vec<Vec<usize>>, n_branches: usize) -> Result<Self> {
        if names.len() != groups.len() {
            return Err(Error::Config(format!(
                "{} group names for {} groups",
                names.len(),
                groups.len()
            )));
        }
        let mut seen = vec![false; n_branches];
        for (name, group) in names.iter().zip(&groups) {
            if group.is_empty() {
                return Err(Error::Config(format!("group '{name}' is empty")));
            }
            for &b in group {
                if b >= n_branches {
                    return Err(Error::Config(format!(
                        "group '{name}' references branch {b}, but only {n_branches} exist"
                    )));
                }
                if seen[b] {
                    return Err(Error::Config(format!(
                        "branch {b} appears in more than one group"
                    )));
                }
                seen[b] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::Config(format!(
                "branch {missing} is not covered by any group"
            )));
        }
        let gammas = groups.iter().map(|g| 1.0 / g.len() as f64).collect();
        Ok(GroupPartition {
            names,
            groups,
            gammas,
            n_branches,
        })
    }

    /// Builds the partition from each branch's `group_id`.
    pub fn from_specs(specs: &[BranchSpec]) -> Result<Self> {
        let k = specs
            .iter()
            .map(|s| s.group_id + 1)
            .max()
            .ok_or_else(|| Error::Config("no branches".into()))?;
        let mut groups = vec![Vec::new(); k];
        for (i, spec) in specs.iter().enumerate() {
            groups[spec.group_id].push(i);
        }
        let names = (0..k).map(|g| format!("group{g}")).collect();
        GroupPartition::new(names, groups, specs.len())
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn num_branches(&self) -> usize {
        self.n_branches
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Sum over branches of balance * cross-entropy against the branch label.
pub fn classification_loss(
    preds: &[Tensor],
    labels: &[usize],
    specs: &[BranchSpec],
) -> Result<f64> {
    if preds.len() != labels.len() || preds.len() != specs.len() {
        return Err(Error::Dimension(format!(
            "{} predictions, {} labels, {} branch specs",
            preds.len(),
            labels.len(),
            specs.len()
        )));
    }
    let mut total = 0.0;
    for ((p, &y), spec) in preds.iter().zip(labels).zip(specs) {
        if y >= spec.classes {
            return Err(Error::Label(format!(
                "label {y} out of range for branch '{}' with {} classes",
                spec.name, spec.classes
            )));
        }
        total += spec.balance * tensor::cross_entropy(p, y)?;
    }
    Ok(total)
}

/// Same loss as a graph node, for training.
pub fn classification_loss_node(
    g: &mut Graph,
    preds: &[NodeId],
    labels: &[usize],
    specs: &[BranchSpec],
) -> Result<NodeId> {
    if preds.len() != labels.len() || preds.len() != specs.len() {
        return Err(Error::Dimension("prediction/label/spec count mismatch".into()));
    }
    let mut terms = Vec::with_capacity(preds.len());
    for ((&p, &y), spec) in preds.iter().zip(labels).zip(specs) {
        let ce = g.cross_entropy(p, y)?;
        terms.push(g.scale(ce, spec.balance));
    }
    g.sum_scalars(&terms)
}

/// L1 norm of the attention matrix: each branch penalized independently.
pub fn sparsity_loss(attn: &Tensor) -> f64 {
    tensor::l1_sum(attn)
}

/// Sum over frames and groups of gamma_k * ||group weights at that frame||_2.
pub fn group_sparsity_loss(attn: &Tensor, part: &GroupPartition) -> Result<f64> {
    if attn.rows() != part.num_branches() {
        return Err(Error::Config(format!(
            "attention matrix has {} rows but partition covers {} branches",
            attn.rows(),
            part.num_branches()
        )));
    }
    tensor::group_l2_sum(attn, part.groups(), part.gammas())
}

/// Regularizer as a graph node over a (B x T) attention matrix node, or
/// `None` when no penalty is configured.
pub fn regularizer_node(
    g: &mut Graph,
    attn: NodeId,
    reg: Regularizer,
    part: &GroupPartition,
) -> Result<Option<NodeId>> {
    match reg {
        Regularizer::None => Ok(None),
        Regularizer::Sparsity => Ok(Some(g.l1_sum(attn)?)),
        Regularizer::Group => {
            if g.value(attn).rows() != part.num_branches() {
                return Err(Error::Config("attention rows do not match partition".into()));
            }
            Ok(Some(g.group_l2_sum(attn, part.groups(), part.gammas())?))
        }
    }
}

/// classification + lambda * regularizer.
pub fn total_loss(l_class: f64, l_reg: f64, lambda: f64) -> Result<f64> {
    if lambda < 0.0 {
        return Err(Error::Config(format!("lambda must be >= 0, got {lambda}")));
    }
    Ok(l_class + lambda * l_reg)
}

/// Evaluates the classification loss from raw probabilities without a graph.
/// Exposed for log reporting; the training path differentiates the node form.
pub fn cross_entropy_value(p: &[f64], y: usize) -> f64 {
    -(p[y] + LOG_EPS).ln()
}

// ── built-in group registries ────────────────────────────────────────

fn spec(name: &str, classes: usize, group_id: usize) -> BranchSpec {
    BranchSpec::new(name, classes, group_id).expect("builtin spec")
}

/// 12 attributes in 5 groups (whole / head / upper / lower / foot).
///
/// Binary attributes have 2 classes; the multi-class cardinalities (motion 4,
/// pose 3, top color 8, bottom color 7) follow the usual surveillance
/// annotation sets.
pub fn duke_partition() -> (Vec<BranchSpec>, GroupPartition) {
    let specs = vec![
        spec("motion", 4, 0),
        spec("pose", 3, 0),
        spec("hat", 2, 1),
        spec("gender", 2, 1),
        spec("backpack", 2, 2),
        spec("top_color", 8, 2),
        spec("shoulder_bag", 2, 2),
        spec("handbag", 2, 2),
        spec("top_length", 2, 3),
        spec("bottom_color", 7, 3),
        spec("boots", 2, 4),
        spec("shoe_color", 2, 4),
    ];
    let part = GroupPartition::new(
        ["whole", "head", "upper", "lower", "foot"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        vec![
            vec![0, 1],
            vec![2, 3],
            vec![4, 5, 6, 7],
            vec![8, 9],
            vec![10, 11],
        ],
        specs.len(),
    )
    .expect("duke partition");
    (specs, part)
}

/// 14 attributes in 4 groups (no foot group).
pub fn mars_partition() -> (Vec<BranchSpec>, GroupPartition) {
    let specs = vec![
        spec("motion", 4, 0),
        spec("pose", 3, 0),
        spec("age", 2, 1),
        spec("hat", 2, 1),
        spec("hair", 2, 1),
        spec("gender", 2, 1),
        spec("backpack", 2, 2),
        spec("top_color", 8, 2),
        spec("shoulder_bag", 2, 2),
        spec("handbag", 2, 2),
        spec("top_length", 2, 2),
        spec("bottom_length", 2, 3),
        spec("bottom_color", 7, 3),
        spec("bottom_type", 2, 3),
    ];
    let part = GroupPartition::new(
        ["whole", "head", "upper", "lower"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        vec![
            vec![0, 1],
            vec![2, 3, 4, 5],
            vec![6, 7, 8, 9, 10],
            vec![11, 12, 13],
        ],
        specs.len(),
    )
    .expect("mars partition");
    (specs, part)
}

/// Config-driven registry: `attrs_per_group[k]` attributes in group k, with
/// `classes_per_branch` listing every branch's class count in group order.
pub fn synthetic_partition(
    attrs_per_group: &[usize],
    classes_per_branch: &[usize],
) -> Result<(Vec<BranchSpec>, GroupPartition)> {
    let total: usize = attrs_per_group.iter().sum();
    if total == 0 {
        return Err(Error::Config("synthetic partition has no attributes".into()));
    }
    if classes_per_branch.len() != total {
        return Err(Error::Config(format!(
            "{} class counts for {total} attributes",
            classes_per_branch.len()
        )));
    }
    let mut specs = Vec::with_capacity(total);
    let mut groups = Vec::with_capacity(attrs_per_group.len());
    let mut names = Vec::with_capacity(attrs_per_group.len());
    let mut idx = 0;
    for (k, &count) in attrs_per_group.iter().enumerate() {
        let mut group = Vec::with_capacity(count);
        for j in 0..count {
            specs.push(BranchSpec::new(
                &format!("p{k}_a{j}"),
                classes_per_branch[idx],
                k,
            )?);
            group.push(idx);
            idx += 1;
        }
        groups.push(group);
        names.push(format!("part{k}"));
    }
    let part = GroupPartition::new(names, groups, total)?;
    Ok((specs, part))
}

/// Named registry lookup. `synthetic` requires the layout argument.
pub fn builtin_partitions(
    name: &str,
    synthetic: Option<(&[usize], &[usize])>,
) -> Result<(Vec<BranchSpec>, GroupPartition)> {
    match name {
        "duke" => Ok(duke_partition()),
        "mars" => Ok(mars_partition()),
        "synthetic" => {
            let (attrs, classes) = synthetic.ok_or_else(|| {
                Error::Config("synthetic partition needs attrs-per-group and class counts".into())
            })?;
            synthetic_partition(attrs, classes)
        }
        other => Err(Error::Lookup(format!("unknown partition '{other}'"))),
    }
}

// ── partition files ──────────────────────────────────────────────────
//
// One line per group: `name: branch, branch, ...`. Comments start with '#'.

pub fn save_partition(path: &Path, branch_names: &[String], part: &GroupPartition) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for (name, group) in part.names().iter().zip(part.groups()) {
        let members: Vec<&str> = group.iter().map(|&b| branch_names[b].as_str()).collect();
        writeln!(f, "{name}: {}", members.join(", ")).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Loads a partition over the given branch names, validating that every
/// branch appears in exactly one group.
pub fn load_partition(path: &Path, branch_names: &[String]) -> Result<GroupPartition> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut names = Vec::new();
    let mut groups = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (name, members) = trimmed.split_once(':').ok_or_else(|| Error::Parse {
            path: path.into(),
            line: lineno + 1,
            msg: "expected 'group: member, member, ...'".into(),
        })?;
        let mut group = Vec::new();
        for member in members.split(',') {
            let member = member.trim();
            if member.is_empty() {
                continue;
            }
            let idx = branch_names
                .iter()
                .position(|b| b == member)
                .ok_or_else(|| Error::Parse {
                    path: path.into(),
                    line: lineno + 1,
                    msg: format!("unknown branch '{member}'"),
                })?;
            group.push(idx);
        }
        names.push(name.trim().to_string());
        groups.push(group);
    }
    GroupPartition::new(names, groups, branch_names.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn two_half_branches() -> Vec<BranchSpec> {
        vec![
            BranchSpec::new("a", 2, 0).unwrap(),
            BranchSpec::new("b", 2, 0).unwrap(),
        ]
    }

    #[test]
    fn classification_hand_values() {
        let specs = two_half_branches();
        let preds = vec![
            Tensor::vector(vec![0.5, 0.5]).unwrap(),
            Tensor::vector(vec![0.5, 0.5]).unwrap(),
        ];
        let loss = classification_loss(&preds, &[0, 1], &specs).unwrap();
        assert_relative_eq!(loss, std::f64::consts::LN_2, epsilon = 1e-9);

        let quad = vec![BranchSpec::new("q", 4, 0).unwrap()];
        let preds = vec![Tensor::vector(vec![0.25; 4]).unwrap()];
        let loss = classification_loss(&preds, &[2], &quad).unwrap();
        assert_relative_eq!(loss, 0.25 * 4.0_f64.ln(), epsilon = 1e-9);
    }

    #[test]
    fn classification_one_hot_is_zero() {
        let specs = two_half_branches();
        let preds = vec![
            Tensor::vector(vec![1.0, 0.0]).unwrap(),
            Tensor::vector(vec![0.0, 1.0]).unwrap(),
        ];
        let loss = classification_loss(&preds, &[0, 1], &specs).unwrap();
        assert!(loss.abs() < 1e-9);
    }

    #[test]
    fn classification_bad_label() {
        let specs = two_half_branches();
        let preds = vec![
            Tensor::vector(vec![0.5, 0.5]).unwrap(),
            Tensor::vector(vec![0.5, 0.5]).unwrap(),
        ];
        assert!(matches!(
            classification_loss(&preds, &[0, 2], &specs),
            Err(Error::Label(_))
        ));
    }

    #[test]
    fn sparsity_hand_value() {
        let a = Tensor::matrix(4, 2, vec![0.3, 0.0, 0.4, 0.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_relative_eq!(sparsity_loss(&a), 2.7, epsilon = 1e-12);
        assert_eq!(sparsity_loss(&Tensor::zeros(crate::tensor::Shape::Matrix(3, 4))), 0.0);
    }

    #[test]
    fn group_hand_value() {
        let a = Tensor::matrix(4, 2, vec![0.3, 0.0, 0.4, 0.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
        let part = GroupPartition::new(
            vec!["x".into(), "y".into()],
            vec![vec![0, 1], vec![2, 3]],
            4,
        )
        .unwrap();
        let loss = group_sparsity_loss(&a, &part).unwrap();
        assert_relative_eq!(loss, 0.5 * 0.5 + 0.5 * 2.0_f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(loss, 0.95711, epsilon = 1e-5);
    }

    #[test]
    fn singleton_groups_equal_plain_sparsity() {
        let a = Tensor::matrix(3, 4, vec![0.1, 0.9, 0.2, 0.0, 0.5, 0.5, 0.25, 1.0, 0.0, 0.3, 0.6, 0.9]).unwrap();
        let part = GroupPartition::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![vec![0], vec![1], vec![2]],
            3,
        )
        .unwrap();
        assert_eq!(group_sparsity_loss(&a, &part).unwrap(), sparsity_loss(&a));
    }

    #[test]
    fn total_loss_combination() {
        assert_eq!(total_loss(1.0, 2.0, 0.0).unwrap(), 1.0);
        assert_relative_eq!(total_loss(1.0, 2.0, 0.02).unwrap(), 1.04, epsilon = 1e-12);
        assert!(matches!(total_loss(1.0, 2.0, -0.1), Err(Error::Config(_))));
    }

    #[test]
    fn builtin_registries() {
        let (specs, part) = duke_partition();
        assert_eq!(specs.len(), 12);
        assert_eq!(part.num_groups(), 5);

        let (specs, part) = mars_partition();
        assert_eq!(specs.len(), 14);
        assert_eq!(part.num_groups(), 4);

        let (specs, part) = synthetic_partition(&[2, 2, 4, 2, 2], &[2; 12]).unwrap();
        assert_eq!(specs.len(), 12);
        assert_eq!(part.gammas(), &[0.5, 0.5, 0.25, 0.5, 0.5]);

        assert!(matches!(
            builtin_partitions("nope", None),
            Err(Error::Lookup(_))
        ));
        assert!(builtin_partitions("synthetic", None).is_err());
    }

    #[test]
    fn balance_is_reciprocal_of_classes() {
        let (specs, _) = duke_partition();
        for s in &specs {
            assert_relative_eq!(s.balance, 1.0 / s.classes as f64, epsilon = 1e-15);
        }
    }

    #[test]
    fn partition_validation() {
        // overlap
        assert!(GroupPartition::new(
            vec!["a".into(), "b".into()],
            vec![vec![0, 1], vec![1, 2]],
            3
        )
        .is_err());
        // gap
        assert!(GroupPartition::new(vec!["a".into()], vec![vec![0, 1]], 3).is_err());
        // empty group
        assert!(GroupPartition::new(
            vec!["a".into(), "b".into()],
            vec![vec![0, 1, 2], vec![]],
            3
        )
        .is_err());
    }

    #[test]
    fn partition_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("groups.txt");
        let (specs, part) = duke_partition();
        let names: Vec<String> = specs.iter().map(|s| s.name.clone()).collect();
        save_partition(&path, &names, &part).unwrap();
        let loaded = load_partition(&path, &names).unwrap();
        assert_eq!(loaded, part);
    }

    #[test]
    fn partition_file_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        std::fs::write(&path, "whole: motion, pose\nbroken line without colon\n").unwrap();
        let names = vec!["motion".to_string(), "pose".to_string()];
        match load_partition(&path, &names) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn norm_sandwich(values in proptest::collection::vec(-1.0f64..1.0, 24)) {
            // with unit group weights: sum of group L2 <= L1 <= sum of sqrt(|G|) * group L2
            let a = Tensor::matrix(6, 4, values).unwrap();
            let groups = vec![vec![0usize, 1], vec![2, 3, 4], vec![5]];
            let ones = vec![1.0; 3];
            let l2 = tensor::group_l2_sum(&a, &groups, &ones).unwrap();
            let upper = tensor::group_l2_sum(
                &a,
                &groups,
                &groups.iter().map(|g| (g.len() as f64).sqrt()).collect::<Vec<_>>(),
            ).unwrap();
            let l1 = sparsity_loss(&a);
            prop_assert!(l2 <= l1 + 1e-9);
            prop_assert!(l1 <= upper + 1e-9);
        }

        #[test]
        fn positive_homogeneity(values in proptest::collection::vec(-1.0f64..1.0, 8), c in 0.0f64..3.0) {
            let a = Tensor::matrix(4, 2, values).unwrap();
            let scaled = tensor::scale(&a, c);
            let part = GroupPartition::new(
                vec!["x".into(), "y".into()],
                vec![vec![0, 1], vec![2, 3]],
                4,
            ).unwrap();
            prop_assert!((sparsity_loss(&scaled) - c * sparsity_loss(&a)).abs() < 1e-9);
            prop_assert!(
                (group_sparsity_loss(&scaled, &part).unwrap()
                    - c * group_sparsity_loss(&a, &part).unwrap()).abs() < 1e-9
            );
        }

        #[test]
        fn group_loss_zero_iff_zero(values in proptest::collection::vec(-1.0f64..1.0, 8)) {
            let a = Tensor::matrix(4, 2, values).unwrap();
            let part = GroupPartition::new(
                vec!["x".into(), "y".into()],
                vec![vec![0, 1], vec![2, 3]],
                4,
            ).unwrap();
            let loss = group_sparsity_loss(&a, &part).unwrap();
            let is_zero = a.data().iter().all(|&v| v == 0.0);
            prop_assert_eq!(loss == 0.0, is_zero);
        }
    }
}
