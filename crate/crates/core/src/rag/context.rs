use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{RagError, Task, VqaQuestion};
use crate::index::RetrievalHit;
use crate::model::SpecTable;

/// Version tag of the context layout, sent with every generator request.
pub const TEMPLATE_VERSION: &str = "ragatr-context-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssembledContext {
    pub query_id: String,
    pub task: Task,
    pub question_text: String,
    /// One line per hit, in rank order.
    pub exemplar_lines: Vec<String>,
    pub hits: Vec<RetrievalHit>,
}

impl AssembledContext {
    /// The full prompt text: the question line followed by the exemplar lines.
    pub fn render(&self) -> String {
        let mut out = format!("QUESTION: {}\n", self.question_text);
        for line in &self.exemplar_lines {
            out.push_str(line);
            out.push('\n');
        }
        out
    }
}

pub fn assemble_context(
    q: &VqaQuestion,
    hits: &[RetrievalHit],
    specs: &SpecTable,
) -> Result<AssembledContext, RagError> {
    if hits.is_empty() {
        return Err(RagError::NoHits);
    }
    let mut hits = hits.to_vec();
    hits.sort_by_key(|h| h.rank);
    let exemplar_lines = hits
        .iter()
        .map(|h| {
            let spec = specs
                .get(&h.target_type)
                .ok_or_else(|| RagError::MissingSpec(h.target_type.clone()))?;
            let mut line = String::new();
            write!(
                line,
                "EXEMPLAR {}: type={} sim={:.4} depression={} azimuth={} weight_tons={} length_m={} width_m={} height_m={} mounted_weapon={}",
                h.rank,
                h.target_type,
                h.score,
                h.depression_deg,
                h.azimuth_deg,
                spec.weight_tons,
                spec.length_m,
                spec.width_m,
                spec.height_m,
                if spec.mounted_weapon { "yes" } else { "no" },
            )
            .expect("writing to a String cannot fail");
            Ok(line)
        })
        .collect::<Result<Vec<_>, RagError>>()?;
    Ok(AssembledContext {
        query_id: q.query_id.clone(),
        task: q.task,
        question_text: q.task.question_text().to_string(),
        exemplar_lines,
        hits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EmbeddingVector, VehicleSpec};

    pub(crate) fn hit(rank: usize, t: &str, score: f64) -> RetrievalHit {
        RetrievalHit {
            record_id: format!("{t}-{rank}"),
            target_type: t.into(),
            score,
            rank,
            depression_deg: 17.0,
            azimuth_deg: 12.5,
        }
    }

    fn specs() -> SpecTable {
        ["A", "B", "C"]
            .iter()
            .enumerate()
            .map(|(i, t)| {
                (
                    t.to_string(),
                    VehicleSpec {
                        target_type: t.to_string(),
                        weight_tons: 10.0 * (i + 1) as f64,
                        length_m: 6.5,
                        width_m: 3.25,
                        height_m: 2.0,
                        mounted_weapon: i != 1,
                        qualities: Default::default(),
                    },
                )
            })
            .collect()
    }

    fn question() -> VqaQuestion {
        VqaQuestion::new("q1", EmbeddingVector::new(vec![1.0, 0.0]).unwrap(), Task::Weight)
    }

    #[test]
    fn five_hits_in_rank_order() {
        let hits = [
            hit(1, "A", 0.98765),
            hit(2, "B", 0.9),
            hit(3, "A", 0.8),
            hit(4, "C", 0.7),
            hit(5, "B", 0.6),
        ];
        let ctx = assemble_context(&question(), &hits, &specs()).unwrap();
        assert_eq!(ctx.exemplar_lines.len(), 5);
        assert_eq!(
            ctx.exemplar_lines[0],
            "EXEMPLAR 1: type=A sim=0.9877 depression=17 azimuth=12.5 weight_tons=10 length_m=6.5 width_m=3.25 height_m=2 mounted_weapon=yes"
        );
        assert!(ctx.exemplar_lines[1].starts_with("EXEMPLAR 2: type=B sim=0.9000"));
        assert!(ctx.exemplar_lines[1].ends_with("mounted_weapon=no"));
        let rendered = ctx.render();
        assert!(rendered.starts_with("QUESTION: What is the weight"));
        assert_eq!(rendered.lines().count(), 6);
    }

    #[test]
    fn deterministic_and_errors() {
        let hits = [hit(1, "A", 0.5), hit(2, "C", 0.4)];
        let a = assemble_context(&question(), &hits, &specs()).unwrap();
        let b = assemble_context(&question(), &hits, &specs()).unwrap();
        assert_eq!(a.render(), b.render());
        assert!(matches!(
            assemble_context(&question(), &[hit(1, "Z", 0.5)], &specs()),
            Err(RagError::MissingSpec(t)) if t == "Z"
        ));
        assert!(matches!(assemble_context(&question(), &[], &specs()), Err(RagError::NoHits)));
    }
}
