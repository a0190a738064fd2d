//! Run configurations shipped with the binary.

pub const PRESETS: &[(&str, &str)] = &[
    (
        "experiment1_case1",
        include_str!("../presets/experiment1_case1.conf"),
    ),
    (
        "experiment1_case1_paper",
        include_str!("../presets/experiment1_case1_paper.conf"),
    ),
    (
        "experiment1_case2",
        include_str!("../presets/experiment1_case2.conf"),
    ),
    (
        "experiment1_case2_paper",
        include_str!("../presets/experiment1_case2_paper.conf"),
    ),
    (
        "experiment2_none",
        include_str!("../presets/experiment2_none.conf"),
    ),
    (
        "experiment2_reference",
        include_str!("../presets/experiment2_reference.conf"),
    ),
    (
        "experiment2_source",
        include_str!("../presets/experiment2_source.conf"),
    ),
    (
        "experiment2_tl1",
        include_str!("../presets/experiment2_tl1.conf"),
    ),
    (
        "experiment2_tl2",
        include_str!("../presets/experiment2_tl2.conf"),
    ),
    (
        "experiment3_case1",
        include_str!("../presets/experiment3_case1.conf"),
    ),
    (
        "experiment3_case1_paper",
        include_str!("../presets/experiment3_case1_paper.conf"),
    ),
    (
        "experiment3_case2",
        include_str!("../presets/experiment3_case2.conf"),
    ),
    (
        "experiment3_case2_paper",
        include_str!("../presets/experiment3_case2_paper.conf"),
    ),
    (
        "experiment4_none",
        include_str!("../presets/experiment4_none.conf"),
    ),
    (
        "experiment4_reference",
        include_str!("../presets/experiment4_reference.conf"),
    ),
    (
        "experiment4_source",
        include_str!("../presets/experiment4_source.conf"),
    ),
    (
        "experiment4_tl1",
        include_str!("../presets/experiment4_tl1.conf"),
    ),
    (
        "experiment4_tl2",
        include_str!("../presets/experiment4_tl2.conf"),
    ),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
}

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}
