//! Built-in experiment configurations.

pub struct Preset {
    pub name: &'static str,
    /// The result the preset reproduces.
    pub anchor: &'static str,
    pub config: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "bernoulli-boundary",
        anchor: "Example: bootstrap coverage at most delta for Bernoulli(theta) with theta = (1 - delta)^(1/n)",
        config: include_str!("../presets/bernoulli-boundary.json"),
    },
    Preset {
        name: "normal-drift",
        anchor: "Example: constrained mean under N(h/sqrt(n), 1), upper side holds, lower side fails",
        config: include_str!("../presets/normal-drift.json"),
    },
    Preset {
        name: "moment-size",
        anchor: "Theorem: uniform size of subsampling max-statistic and bootstrap AQLR moment inequality tests",
        config: include_str!("../presets/moment-size.json"),
    },
    Preset {
        name: "stepdown-fwer",
        anchor: "Theorem: uniform familywise error control of the subsampling and bootstrap stepdown",
        config: include_str!("../presets/stepdown-fwer.json"),
    },
    Preset {
        name: "dkw",
        anchor: "Lemma: violation frequency of the oracle subsampling distribution against (1/eps) sqrt(2 pi / k_n)",
        config: include_str!("../presets/dkw.json"),
    },
    Preset {
        name: "ustat-coverage",
        anchor: "Theorem: uniform coverage of subsampling and bootstrap intervals for a variance U-statistic",
        config: include_str!("../presets/ustat-coverage.json"),
    },
    Preset {
        name: "max-mean-coverage",
        anchor: "Theorem: uniform coverage of rectangular regions from the max-studentized mean root",
        config: include_str!("../presets/max-mean-coverage.json"),
    },
    Preset {
        name: "ks-coverage",
        anchor: "Theorem: uniform coverage of Kolmogorov-Smirnov confidence bands",
        config: include_str!("../presets/ks-coverage.json"),
    },
    Preset {
        name: "deficit",
        anchor: "Lemma: finite-sample coverage lower bounds for oracle subsampling",
        config: include_str!("../presets/deficit.json"),
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}
