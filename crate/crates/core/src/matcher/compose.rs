use crate::dataset::LabelMap;
use crate::error::{Error, Result};

const PROB_SUM_SLACK: f64 = 1e-6;

/// One query's class distribution and soft mask.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutput {
    /// Probability per class, optionally followed by a no-object entry.
    pub class_probs: Vec<f64>,
    /// Row-major soft mask in `[0, 1]`.
    pub mask: Vec<f64>,
}

/// The outputs of every query for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutputs {
    num_classes: usize,
    width: u32,
    height: u32,
    queries: Vec<QueryOutput>,
}

impl QueryOutputs {
    pub fn new(
        num_classes: usize,
        width: u32,
        height: u32,
        queries: Vec<QueryOutput>,
    ) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::InvalidParameter(
                "num_classes must be at least 1".into(),
            ));
        }
        let pixels = width as usize * height as usize;
        for (i, q) in queries.iter().enumerate() {
            if q.class_probs.len() != num_classes && q.class_probs.len() != num_classes + 1 {
                return Err(Error::ShapeMismatch(format!(
                    "query {i} has {} class probabilities for {num_classes} classes",
                    q.class_probs.len()
                )));
            }
            if q.class_probs.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
                return Err(Error::InvalidParameter(format!(
                    "query {i} has a negative or non-finite probability"
                )));
            }
            let total: f64 = q.class_probs.iter().sum();
            if total > 1.0 + PROB_SUM_SLACK {
                return Err(Error::InvalidParameter(format!(
                    "query {i} probabilities sum to {total}"
                )));
            }
            if q.mask.len() != pixels {
                return Err(Error::ShapeMismatch(format!(
                    "query {i} mask has {} entries, expected {width}x{height}",
                    q.mask.len()
                )));
            }
            if q.mask.iter().any(|m| !(0.0..=1.0).contains(m)) {
                return Err(Error::InvalidParameter(format!(
                    "query {i} mask has values outside [0, 1]"
                )));
            }
        }
        Ok(Self {
            num_classes,
            width,
            height,
            queries,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn queries(&self) -> &[QueryOutput] {
        &self.queries
    }
}

/// Class-`c` score map `M_c = sum_i p_i^c * m_i`.
pub fn compose_semantic(outputs: &QueryOutputs, class: usize) -> Result<Vec<f64>> {
    if class >= outputs.num_classes {
        return Err(Error::InvalidParameter(format!(
            "class {class} out of range for {} classes",
            outputs.num_classes
        )));
    }
    let pixels = outputs.width as usize * outputs.height as usize;
    let mut out = vec![0.0; pixels];
    for q in &outputs.queries {
        let p = q.class_probs[class];
        if p == 0.0 {
            continue;
        }
        for (o, &m) in out.iter_mut().zip(&q.mask) {
            *o += p * m;
        }
    }
    Ok(out)
}

/// Per-pixel argmax over composed class maps; ties go to the lowest class id.
pub fn semantic_argmax(outputs: &QueryOutputs, ignore_id: u32) -> LabelMap {
    let pixels = outputs.width as usize * outputs.height as usize;
    let mut best = vec![f64::NEG_INFINITY; pixels];
    let mut label = vec![0u32; pixels];
    for c in 0..outputs.num_classes {
        let scores = compose_semantic(outputs, c).expect("class in range");
        for ((b, l), s) in best.iter_mut().zip(label.iter_mut()).zip(scores) {
            if s > *b {
                *b = s;
                *l = c as u32;
            }
        }
    }
    LabelMap::new(outputs.width, outputs.height, label, ignore_id).expect("shape matches")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_query_identity() {
        let mask = vec![1.0, 0.0, 0.0, 1.0];
        let out = QueryOutputs::new(
            4,
            2,
            2,
            vec![QueryOutput {
                class_probs: vec![0.0, 0.0, 0.0, 1.0],
                mask: mask.clone(),
            }],
        )
        .unwrap();
        assert_eq!(compose_semantic(&out, 3).unwrap(), mask);
        let labels = semantic_argmax(&out, 255);
        assert_eq!(labels.class_ids(), &[3, 0, 0, 3]);
    }

    #[test]
    fn halves_recombine() {
        let mask = vec![0.2, 0.9, 1.0];
        let q = QueryOutput {
            class_probs: vec![0.5, 0.5],
            mask: mask.clone(),
        };
        let out = QueryOutputs::new(2, 3, 1, vec![q.clone(), q]).unwrap();
        assert_eq!(compose_semantic(&out, 0).unwrap(), mask);
    }

    #[test]
    fn all_zero_probs_label_zero() {
        let out = QueryOutputs::new(
            3,
            2,
            1,
            vec![QueryOutput {
                class_probs: vec![0.0, 0.0, 0.0, 1.0],
                mask: vec![1.0, 1.0],
            }],
        )
        .unwrap();
        assert_eq!(semantic_argmax(&out, 255).class_ids(), &[0, 0]);
    }

    #[test]
    fn validation_errors() {
        let q = |probs: Vec<f64>, mask: Vec<f64>| QueryOutput {
            class_probs: probs,
            mask,
        };
        assert!(QueryOutputs::new(2, 1, 1, vec![q(vec![0.5], vec![1.0])]).is_err());
        assert!(QueryOutputs::new(2, 1, 2, vec![q(vec![0.5, 0.5], vec![1.0])]).is_err());
        assert!(QueryOutputs::new(2, 1, 1, vec![q(vec![0.9, 0.9], vec![1.0])]).is_err());
        assert!(QueryOutputs::new(2, 1, 1, vec![q(vec![0.5, 0.5], vec![1.5])]).is_err());
        let ok = QueryOutputs::new(2, 1, 1, vec![q(vec![0.5, 0.5], vec![1.0])]).unwrap();
        assert!(compose_semantic(&ok, 2).is_err());
    }
}
