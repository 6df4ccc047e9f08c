//! Concept layers and the entity → vertical edges between the two finest
//! layers.
//!
//! Layer 0 is the coarsest (verticals in the two-layer setup) and the last
//! layer is the finest (entities). "Top-down" inference therefore runs from
//! index 0 upward.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Most parents an entity may have.
pub const MAX_PARENTS: usize = 3;

/// One level of label granularity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptLayer {
    name: String,
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl ConceptLayer {
    pub fn new(name: impl Into<String>, labels: Vec<String>) -> Result<Self> {
        let name = name.into();
        if labels.is_empty() {
            return Err(Error::Hierarchy(format!("layer {name:?} has no labels")));
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            if index.insert(label.clone(), i).is_some() {
                return Err(Error::Hierarchy(format!(
                    "duplicate label {label:?} in layer {name:?}"
                )));
            }
        }
        Ok(Self {
            name,
            labels,
            index,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Number of labels in the layer.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }
}

/// The layered label space.
///
/// Immutable once built. Every constructor validates the invariants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelHierarchy {
    layers: Vec<ConceptLayer>,
    /// `parents[e]` lists the parent indices (in the layer above the finest)
    /// of entity `e`, sorted ascending. Empty for single-layer hierarchies.
    parents: Vec<Vec<usize>>,
}

impl LabelHierarchy {
    /// Builds a hierarchy from layers (coarse to fine) and per-entity parent
    /// lists.
    pub fn new(layers: Vec<ConceptLayer>, parents: Vec<Vec<usize>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Hierarchy("hierarchy needs at least one layer".into()));
        }
        let finest = layers.last().unwrap().len();
        let mut sorted = Vec::with_capacity(parents.len());
        if layers.len() == 1 {
            if parents.iter().any(|p| !p.is_empty()) {
                return Err(Error::Hierarchy(
                    "single-layer hierarchy cannot have edges".into(),
                ));
            }
            sorted = vec![Vec::new(); finest];
        } else {
            let above = layers[layers.len() - 2].len();
            if parents.len() != finest {
                return Err(Error::Hierarchy(format!(
                    "expected parent lists for {finest} entities, got {}",
                    parents.len()
                )));
            }
            for (e, ps) in parents.into_iter().enumerate() {
                validate_parents(e, &ps, above)?;
                let mut ps = ps;
                ps.sort_unstable();
                sorted.push(ps);
            }
        }
        Ok(Self {
            layers,
            parents: sorted,
        })
    }

    /// Convenience constructor for the two-layer (verticals, entities) case.
    pub fn two_layer(
        verticals: Vec<String>,
        entities: Vec<String>,
        parents: Vec<Vec<usize>>,
    ) -> Result<Self> {
        Self::new(
            vec![
                ConceptLayer::new("verticals", verticals)?,
                ConceptLayer::new("entities", entities)?,
            ],
            parents,
        )
    }

    /// Number of concept layers.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[ConceptLayer] {
        &self.layers
    }

    pub fn layer(&self, t: usize) -> &ConceptLayer {
        &self.layers[t]
    }

    /// Label counts per layer, coarse to fine.
    pub fn layer_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(ConceptLayer::len).collect()
    }

    pub fn finest(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn entity_count(&self) -> usize {
        self.layers[self.finest()].len()
    }

    pub fn parents_of(&self, entity: usize) -> Result<&[usize]> {
        self.parents
            .get(entity)
            .map(Vec::as_slice)
            .ok_or(Error::LabelOutOfRange {
                layer: self.finest(),
                index: entity,
                len: self.entity_count(),
            })
    }

    /// Union of the parents of every entity in `entities`.
    pub fn induce_vertical_labels<'a>(
        &self,
        entities: impl IntoIterator<Item = &'a usize>,
    ) -> Result<BTreeSet<usize>> {
        let mut out = BTreeSet::new();
        for &e in entities {
            out.extend(self.parents_of(e)?.iter().copied());
        }
        Ok(out)
    }

    /// Scores for the layer above the finest, derived from entity scores by
    /// taking the maximum over each vertical's children. Verticals without
    /// children score 0.
    pub fn induce_vertical_scores(&self, entity_scores: &[f64]) -> Result<Vec<f64>> {
        crate::error::check_dim(self.entity_count(), entity_scores.len(), "entity scores")?;
        if self.depth() < 2 {
            return Err(Error::Hierarchy("no layer above the entities".into()));
        }
        let mut out = vec![f64::NEG_INFINITY; self.layers[self.finest() - 1].len()];
        for (e, &s) in entity_scores.iter().enumerate() {
            for &p in &self.parents[e] {
                out[p] = out[p].max(s);
            }
        }
        for v in &mut out {
            if *v == f64::NEG_INFINITY {
                *v = 0.0;
            }
        }
        Ok(out)
    }

    /// Reads a vocabulary file.
    pub fn load_vocabulary(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_vocabulary(&text)
    }

    /// Parses the line-oriented vocabulary format:
    ///
    /// ```text
    /// [layer verticals]
    /// Sports
    /// [layer entities]
    /// Football
    /// [edges]
    /// Football: Sports
    /// ```
    ///
    /// Blank lines and lines starting with `#` are ignored.
    pub fn parse_vocabulary(text: &str) -> Result<Self> {
        enum Section {
            None,
            Layer,
            Edges,
        }
        let mut section = Section::None;
        let mut layer_specs: Vec<(String, Vec<String>, usize)> = Vec::new();
        let mut edge_lines: Vec<(usize, String, String)> = Vec::new();

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(header) = line.strip_prefix('[') {
                let header = header.strip_suffix(']').ok_or_else(|| Error::Vocabulary {
                    line: line_no,
                    message: format!("unterminated section header {line:?}"),
                })?;
                let header = header.trim();
                if header == "edges" {
                    section = Section::Edges;
                } else if let Some(name) = header.strip_prefix("layer ") {
                    let name = name.trim();
                    if name.is_empty() {
                        return Err(Error::Vocabulary {
                            line: line_no,
                            message: "layer section without a name".into(),
                        });
                    }
                    if !edge_lines.is_empty() {
                        return Err(Error::Vocabulary {
                            line: line_no,
                            message: "layer sections must precede [edges]".into(),
                        });
                    }
                    layer_specs.push((name.to_string(), Vec::new(), line_no));
                    section = Section::Layer;
                } else {
                    return Err(Error::Vocabulary {
                        line: line_no,
                        message: format!("unknown section [{header}]"),
                    });
                }
                continue;
            }
            match section {
                Section::None => {
                    return Err(Error::Vocabulary {
                        line: line_no,
                        message: "content before the first section".into(),
                    })
                }
                Section::Layer => layer_specs.last_mut().unwrap().1.push(line.to_string()),
                Section::Edges => {
                    let (entity, parents) =
                        line.split_once(':').ok_or_else(|| Error::Vocabulary {
                            line: line_no,
                            message: format!("edge line {line:?} lacks ':'"),
                        })?;
                    edge_lines.push((line_no, entity.trim().to_string(), parents.to_string()));
                }
            }
        }

        if layer_specs.is_empty() {
            return Err(Error::Vocabulary {
                line: 0,
                message: "no [layer ...] sections".into(),
            });
        }
        let mut layers = Vec::with_capacity(layer_specs.len());
        for (name, labels, line_no) in layer_specs {
            layers.push(ConceptLayer::new(name, labels).map_err(|e| Error::Vocabulary {
                line: line_no,
                message: e.to_string(),
            })?);
        }

        let depth = layers.len();
        if depth == 1 {
            if let Some((line, _, _)) = edge_lines.first() {
                return Err(Error::Vocabulary {
                    line: *line,
                    message: "edges given for a single-layer hierarchy".into(),
                });
            }
            return Self::new(layers, Vec::new());
        }

        let finest = &layers[depth - 1];
        let above = &layers[depth - 2];
        let mut parents: Vec<Option<Vec<usize>>> = vec![None; finest.len()];
        for (line, entity, rest) in edge_lines {
            let e = finest.position(&entity).ok_or_else(|| Error::Vocabulary {
                line,
                message: format!("unknown entity {entity:?}"),
            })?;
            if parents[e].is_some() {
                return Err(Error::Vocabulary {
                    line,
                    message: format!("entity {entity:?} listed twice in [edges]"),
                });
            }
            let mut ps = Vec::new();
            for name in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let p = above.position(name).ok_or_else(|| Error::Vocabulary {
                    line,
                    message: format!("unknown parent {name:?} for entity {entity:?}"),
                })?;
                ps.push(p);
            }
            validate_parents(e, &ps, above.len()).map_err(|err| Error::Vocabulary {
                line,
                message: err.to_string(),
            })?;
            parents[e] = Some(ps);
        }
        let parents = parents
            .into_iter()
            .enumerate()
            .map(|(e, ps)| {
                ps.ok_or_else(|| Error::Vocabulary {
                    line: 0,
                    message: format!("entity {:?} has no parents", finest.labels()[e]),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers, parents)
    }

    /// Renders the hierarchy in the vocabulary format.
    pub fn to_vocabulary_string(&self) -> String {
        let mut out = String::new();
        for layer in &self.layers {
            let _ = writeln!(out, "[layer {}]", layer.name());
            for label in layer.labels() {
                let _ = writeln!(out, "{label}");
            }
        }
        if self.depth() >= 2 {
            let above = &self.layers[self.finest() - 1];
            out.push_str("[edges]\n");
            for (e, ps) in self.parents.iter().enumerate() {
                let names: Vec<&str> = ps.iter().map(|&p| above.labels()[p].as_str()).collect();
                let _ = writeln!(
                    out,
                    "{}: {}",
                    self.layers[self.finest()].labels()[e],
                    names.join(",")
                );
            }
        }
        out
    }

    pub fn save_vocabulary(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_vocabulary_string()).map_err(|e| Error::io(path, e))
    }
}

fn validate_parents(entity: usize, parents: &[usize], above: usize) -> Result<()> {
    if parents.is_empty() || parents.len() > MAX_PARENTS {
        return Err(Error::Hierarchy(format!(
            "entity {entity} has {} parents (allowed 1..={MAX_PARENTS})",
            parents.len()
        )));
    }
    let mut seen = BTreeSet::new();
    for &p in parents {
        if p >= above {
            return Err(Error::Hierarchy(format!(
                "entity {entity}: parent index {p} out of range ({above} labels above)"
            )));
        }
        if !seen.insert(p) {
            return Err(Error::Hierarchy(format!(
                "entity {entity}: duplicate parent {p}"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "\
[layer verticals]
A
B
[layer entities]
a1
a2
a3
[edges]
a1: A
a2: A,B
a3: B
";

    #[test]
    fn parses_small_vocabulary() {
        let h = LabelHierarchy::parse_vocabulary(SMALL).unwrap();
        assert_eq!(h.depth(), 2);
        assert_eq!(h.layer_sizes(), vec![2, 3]);
        assert_eq!(h.parents_of(1).unwrap(), &[0, 1]);
        assert_eq!(h.parents_of(2).unwrap(), &[1]);
        assert!(matches!(
            h.parents_of(99),
            Err(Error::LabelOutOfRange { index: 99, .. })
        ));
    }

    #[test]
    fn induces_union_of_parents() {
        let h = LabelHierarchy::parse_vocabulary(SMALL).unwrap();
        let got = h.induce_vertical_labels(&[0, 2]).unwrap();
        assert_eq!(got.into_iter().collect::<Vec<_>>(), vec![0, 1]);
        assert!(h.induce_vertical_labels(&[]).unwrap().is_empty());
        assert!(h.induce_vertical_labels(&[7]).is_err());
    }

    #[test]
    fn duplicate_parent_is_rejected_with_line() {
        let text = SMALL.replace("a1: A", "a1: A,A");
        match LabelHierarchy::parse_vocabulary(&text) {
            Err(Error::Vocabulary { line, message }) => {
                assert_eq!(line, 9);
                assert!(message.contains("duplicate parent"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_too_many_and_missing_parents() {
        let four = "[layer v]\nA\nB\nC\nD\n[layer e]\nx\n[edges]\nx: A,B,C,D\n";
        assert!(LabelHierarchy::parse_vocabulary(four).is_err());
        let missing = SMALL.replace("a3: B\n", "");
        let err = LabelHierarchy::parse_vocabulary(&missing).unwrap_err();
        assert!(err.to_string().contains("a3"), "{err}");
    }

    #[test]
    fn rejects_dangling_and_duplicate_labels() {
        let dangling = SMALL.replace("a3: B", "a3: Z");
        assert!(LabelHierarchy::parse_vocabulary(&dangling)
            .unwrap_err()
            .to_string()
            .contains("line 11"));
        let dup = SMALL.replace("a3\n[edges]", "a2\n[edges]");
        assert!(LabelHierarchy::parse_vocabulary(&dup).is_err());
        let unknown = SMALL.replace("b9", "").replace("a2: A,B", "zz: A");
        assert!(LabelHierarchy::parse_vocabulary(&unknown).is_err());
    }

    #[test]
    fn single_layer_has_no_edges() {
        let h = LabelHierarchy::parse_vocabulary("[layer only]\nx\ny\n").unwrap();
        assert_eq!(h.depth(), 1);
        assert!(h.parents_of(1).unwrap().is_empty());
    }

    #[test]
    fn vertical_scores_take_child_maximum() {
        let h = LabelHierarchy::parse_vocabulary(SMALL).unwrap();
        let s = h.induce_vertical_scores(&[0.2, 0.7, 0.4]).unwrap();
        assert_eq!(s, vec![0.7, 0.7]);
    }

    #[test]
    fn vocabulary_round_trip() {
        let h = LabelHierarchy::parse_vocabulary(SMALL).unwrap();
        let again = LabelHierarchy::parse_vocabulary(&h.to_vocabulary_string()).unwrap();
        assert_eq!(h, again);
    }
}
