//! Seeded random workload generation for stress and property tests.
//!
//! Generated ADTs use integer fields only and division-free bodies, so
//! every execution is total; faults and mixed types are covered by the
//! hand-written corpus instead.

use std::sync::Arc;

use rand::Rng;

use crate::dsl::{
    infer_dav, AdtDecl, AdtSchema, BinaryOp, Block, Expr, FieldDef, OperationDef, Param, Stmt,
};
use crate::oracle::{InstanceDecl, OpCall, TxnScript, Workload};
use crate::value::{FieldType, Value};

use super::test_rng;

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub max_dim: usize,
    pub max_ops: usize,
    pub max_instances: usize,
    pub max_txns: usize,
    pub max_steps: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_dim: 4,
            max_ops: 6,
            max_instances: 2,
            max_txns: 4,
            max_steps: 3,
        }
    }
}

fn fld(i: usize) -> Expr {
    Expr::Field(i)
}

fn int(n: i64) -> Expr {
    Expr::Literal(Value::Int(n))
}

fn bin(op: BinaryOp, l: Expr, r: Expr) -> Expr {
    Expr::Binary {
        op,
        left: Box::new(l),
        right: Box::new(r),
    }
}

/// One random operation body over `dim` integer fields. Shapes are chosen
/// to cover the interesting access patterns: blind writes, read-modify
/// writes, cross-field reads, pure reads, conditional writes (where the
/// static vector over-approximates), and no-ops.
fn random_op(name: String, dim: usize, rng: &mut impl Rng) -> OperationDef {
    let f = rng.random_range(0..dim);
    let g = rng.random_range(0..dim);
    let c = rng.random_range(-3..=3);
    let (params, body) = match rng.random_range(0..8) {
        // f := p
        0 => (
            vec![Param {
                name: "p".into(),
                ty: FieldType::Integer,
            }],
            vec![Stmt::FieldAssign {
                field: f,
                expr: Expr::Param(0),
            }],
        ),
        // f := f + p
        1 => (
            vec![Param {
                name: "p".into(),
                ty: FieldType::Integer,
            }],
            vec![Stmt::FieldAssign {
                field: f,
                expr: bin(BinaryOp::Add, fld(f), Expr::Param(0)),
            }],
        ),
        // f := g + c
        2 => (
            vec![],
            vec![Stmt::FieldAssign {
                field: f,
                expr: bin(BinaryOp::Add, fld(g), int(c)),
            }],
        ),
        // return f
        3 => (vec![], vec![Stmt::Return(fld(f))]),
        // return f - g
        4 => (vec![], vec![Stmt::Return(bin(BinaryOp::Sub, fld(f), fld(g)))]),
        // if g > c then { f := f + 1 }
        5 => (
            vec![],
            vec![Stmt::If {
                cond: bin(BinaryOp::Gt, fld(g), int(c)),
                then_branch: Block(vec![Stmt::FieldAssign {
                    field: f,
                    expr: bin(BinaryOp::Add, fld(f), int(1)),
                }]),
                else_branch: None,
            }],
        ),
        // if f > c then { f := c } else { g := g + 1 }
        6 => (
            vec![],
            vec![Stmt::If {
                cond: bin(BinaryOp::Gt, fld(f), int(c)),
                then_branch: Block(vec![Stmt::FieldAssign {
                    field: f,
                    expr: int(c),
                }]),
                else_branch: Some(Block(vec![Stmt::FieldAssign {
                    field: g,
                    expr: bin(BinaryOp::Add, fld(g), int(1)),
                }])),
            }],
        ),
        // no-op
        _ => (vec![], vec![]),
    };
    let has_return = body.iter().any(|s| matches!(s, Stmt::Return(_)));
    let body = Block(body);
    let static_dav = infer_dav(&body, dim);
    OperationDef {
        name,
        params,
        ret: has_return.then_some(FieldType::Integer),
        locals: Vec::new(),
        body,
        static_dav,
    }
}

/// A complete random workload: one generated ADT, one or two instances,
/// and a handful of short transaction scripts.
pub fn random_workload(seed: u64, cfg: &GenConfig) -> Workload {
    let mut rng = test_rng(seed);
    let dim = rng.random_range(1..=cfg.max_dim);
    let schema = Arc::new(AdtSchema {
        name: "Gen".to_string(),
        fields: (0..dim)
            .map(|i| FieldDef {
                name: format!("f{i}"),
                ty: FieldType::Integer,
            })
            .collect(),
    });
    let n_ops = rng.random_range(2..=cfg.max_ops.max(2));
    let ops: Vec<Arc<OperationDef>> = (0..n_ops)
        .map(|i| Arc::new(random_op(format!("op{i}"), dim, &mut rng)))
        .collect();
    let decl = AdtDecl {
        schema,
        ops: ops.clone(),
    };

    let n_inst = rng.random_range(1..=cfg.max_instances.max(1));
    let instances: Vec<InstanceDecl> = (0..n_inst)
        .map(|i| InstanceDecl {
            name: format!("i{i}"),
            adt: "Gen".to_string(),
            init: (0..dim).map(|_| Value::Int(rng.random_range(-3..=3))).collect(),
        })
        .collect();

    let n_txns = rng.random_range(1..=cfg.max_txns.max(1));
    let txns: Vec<TxnScript> = (0..n_txns)
        .map(|t| {
            let steps = (0..rng.random_range(1..=cfg.max_steps.max(1)))
                .map(|_| {
                    let op = &ops[rng.random_range(0..ops.len())];
                    OpCall {
                        instance: format!("i{}", rng.random_range(0..n_inst)),
                        op: op.name.clone(),
                        args: op
                            .params
                            .iter()
                            .map(|_| Value::Int(rng.random_range(-3..=3)))
                            .collect(),
                    }
                })
                .collect();
            TxnScript {
                name: format!("t{t}"),
                steps,
            }
        })
        .collect();

    Workload {
        adts: vec![decl],
        instances,
        txns,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_adt;

    #[test]
    fn generation_is_deterministic() {
        let cfg = GenConfig::default();
        let a = random_workload(42, &cfg);
        let b = random_workload(42, &cfg);
        assert_eq!(a, b);
    }

    #[test]
    fn generated_adts_round_trip_through_the_parser() {
        let cfg = GenConfig::default();
        for seed in 0..200 {
            let w = random_workload(seed, &cfg);
            let printed = w.adts[0].to_source();
            let reparsed = parse_adt(&printed).unwrap_or_else(|e| {
                panic!("seed {seed}: generated source failed to parse: {e}\n{printed}")
            });
            assert_eq!(*reparsed.schema, *w.adts[0].schema, "seed {seed}");
            for (a, b) in w.adts[0].ops.iter().zip(reparsed.ops.iter()) {
                assert_eq!(**a, **b, "seed {seed}");
            }
        }
    }

    #[test]
    fn generated_vectors_match_reinference() {
        let cfg = GenConfig::default();
        for seed in 0..100 {
            let w = random_workload(seed, &cfg);
            for op in &w.adts[0].ops {
                assert_eq!(
                    op.static_dav,
                    infer_dav(&op.body, w.adts[0].schema.dimension())
                );
            }
        }
    }
}
