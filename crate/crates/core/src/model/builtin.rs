use super::{and, not, or, u, x, BoolExpr, NodeRule, PbcnModel};

/// Text form of the lac operon network, kept in sync with [`builtin_lac_operon`].
pub const LAC_OPERON_SOURCE: &str = include_str!("../../models/lac_operon.pbcn");

fn det(e: BoolExpr) -> NodeRule {
    NodeRule::deterministic(e)
}

fn stochastic(node: usize, alternatives: Vec<(BoolExpr, f64)>) -> NodeRule {
    NodeRule::new(node, alternatives).expect("builtin probabilities are valid")
}

fn labels(items: &[&str]) -> Option<Vec<String>> {
    Some(items.iter().map(|s| s.to_string()).collect())
}

/// 9-node, 2-input lactose operon network of *E. coli*.
///
/// Nodes 5 and 9 are stochastic; every other node has one update function.
pub fn builtin_lac_operon() -> PbcnModel {
    let rules = vec![
        det(and([not(x(7)), x(3)])),
        det(x(1)),
        det(not(u(1))),
        det(and([x(5), x(6)])),
        stochastic(5, vec![(and([not(u(1)), x(2), u(2)]), 0.7), (x(5), 0.3)]),
        det(x(1)),
        det(and([not(x(4)), not(x(8))])),
        det(or([x(4), x(5), x(9)])),
        stochastic(
            9,
            vec![(and([not(u(1)), or([x(5), u(2)])]), 0.6), (x(9), 0.4)],
        ),
    ];
    PbcnModel::new(9, 2, rules)
        .and_then(|m| {
            m.with_labels(
                labels(&[
                    "M = lac mRNA",
                    "P = lac permease",
                    "C = catabolite activator protein CAP",
                    "A = high concentration of allolactose (inducer)",
                    "L = high concentration of intracellular lactose",
                    "B = beta-galactosidase",
                    "R = repressor protein lacI",
                    "A_l = (at least) low concentration of intracellular lactose",
                    "L_l = (at least) low concentration of allolactose",
                ]),
                labels(&["G_e = external glucose", "L_e = external lactose"]),
            )
        })
        .expect("builtin lac operon is well formed")
}

/// 28-node, 3-input reduced T-cell receptor kinetics network.
///
/// Node 26 is the only stochastic node (0.5 / 0.5).
pub fn builtin_tcell() -> PbcnModel {
    let rules = vec![
        det(and([x(6), x(13)])),                           // 1
        det(x(25)),                                        // 2
        det(x(2)),                                         // 3
        det(x(28)),                                        // 4
        det(x(21)),                                        // 5
        det(x(5)),                                         // 6
        det(or([and([x(15), u(2)]), and([x(26), u(2)])])), // 7
        det(x(14)),                                        // 8
        det(x(18)),                                        // 9
        det(and([x(25), x(28)])),                          // 10
        det(not(x(9))),                                    // 11
        det(x(24)),                                        // 12
        det(x(12)),                                        // 13
        det(x(28)),                                        // 14
        det(and([not(x(20)), u(1), u(2)])),                // 15
        det(x(3)),                                         // 16
        det(not(x(11))),                                   // 17
        det(x(2)),                                         // 18
        det(or([
            and([x(10), x(11), x(25), x(28)]),
            and([x(11), x(23), x(25), x(28)]),
        ])), // 19
        det(or([x(7), not(x(26))])),                       // 20
        det(or([x(11), x(22)])),                           // 21
        det(and([x(2), x(18)])),                           // 22
        det(x(15)),                                        // 23
        det(x(18)),                                        // 24
        det(x(8)),                                         // 25
        stochastic(26, vec![(and([not(x(4)), u(3)]), 0.5), (x(26), 0.5)]),
        det(or([x(7), and([x(15), x(26)])])), // 27
        det(and([not(x(4)), x(15), x(27)])),  // 28
    ];
    PbcnModel::new(28, 3, rules)
        .and_then(|m| {
            m.with_labels(
                labels(&[
                    "AP1",
                    "Ca/DAG",
                    "Calcin",
                    "cCbl",
                    "ERK",
                    "Fos",
                    "Fyn",
                    "Gads",
                    "IKKbeta",
                    "Itk",
                    "Grb2Sos/IkB/PLCg(bind)",
                    "JNK",
                    "Jun",
                    "LAT",
                    "Lck",
                    "NFAT",
                    "NFkB",
                    "PKCth",
                    "PKCg(act)",
                    "PAGCsk",
                    "MEK/Ras",
                    "RasGRP1",
                    "Rlk",
                    "SEK",
                    "IP3/SLP76",
                    "TCRbind",
                    "TCRphos",
                    "ZAP70",
                ]),
                labels(&["CD8", "CD45", "TCRlig"]),
            )
        })
        .expect("builtin T-cell model is well formed")
}
