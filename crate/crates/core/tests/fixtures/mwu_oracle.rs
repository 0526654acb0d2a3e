// Two-sided Mann-Whitney U p-values (normal approximation with tie and
// continuity corrections) and pooled-SD Cohen's d, computed offline with
// scipy.stats.mannwhitneyu / numpy. A zero-variance pair is pinned to p = 1.

pub struct OracleCase {
    pub name: &'static str,
    pub orig: &'static [f64],
    pub mutant: &'static [f64],
    pub p: f64,
    pub d: f64,
    pub killed: bool,
}

pub const ORACLE: &[OracleCase] = &[
    OracleCase {
        name: "far_apart",
        orig: &[0.990062, 0.98892, 0.990416, 0.990654, 0.989537, 0.989135, 0.989453, 0.990642, 0.990232, 0.990335, 0.99177, 0.989744, 0.989992, 0.991044, 0.989635, 0.99107, 0.991152, 0.989343, 0.99037, 0.989175],
        mutant: &[0.502786, 0.501691, 0.49934, 0.499651, 0.499399, 0.497154, 0.500783, 0.499642, 0.500022, 0.501669, 0.500224, 0.499216, 0.500049, 0.499785, 0.49892, 0.499415, 0.500734, 0.499489, 0.50088, 0.500126],
        p: 6.795615128173358e-08,
        d: 487.99600830553464,
        killed: true,
    },
    OracleCase {
        name: "identical",
        orig: &[0.89619, 0.885574, 0.896288, 0.912833, 0.892523, 0.903659, 0.880356, 0.911961, 0.874541, 0.890754, 0.892775, 0.90335, 0.899199, 0.889867, 0.897844, 0.908726, 0.890676, 0.889482, 0.908083, 0.874862],
        mutant: &[0.89619, 0.885574, 0.896288, 0.912833, 0.892523, 0.903659, 0.880356, 0.911961, 0.874541, 0.890754, 0.892775, 0.90335, 0.899199, 0.889867, 0.897844, 0.908726, 0.890676, 0.889482, 0.908083, 0.874862],
        p: 1.0,
        d: 0.0,
        killed: false,
    },
    OracleCase {
        name: "constant_equal",
        orig: &[0.95, 0.95, 0.95, 0.95, 0.95, 0.95, 0.95, 0.95, 0.95, 0.95, 0.95, 0.95, 0.95, 0.95, 0.95, 0.95, 0.95, 0.95, 0.95, 0.95],
        mutant: &[0.95, 0.95, 0.95, 0.95, 0.95, 0.95, 0.95, 0.95, 0.95, 0.95, 0.95, 0.95, 0.95, 0.95, 0.95, 0.95, 0.95, 0.95, 0.95, 0.95],
        p: 1.0,
        d: 0.0,
        killed: false,
    },
    OracleCase {
        name: "gate_small_effect",
        orig: &[0.906704, 0.897658, 0.902633, 0.899973, 0.897077, 0.899601, 0.899638, 0.898401, 0.900454, 0.897311, 0.899939, 0.902054, 0.902005, 0.900819, 0.900271, 0.900176, 0.899001, 0.90197, 0.903729, 0.901532],
        mutant: &[0.2, 1.6, 0.898633, 0.895973, 0.893077, 0.895601, 0.895638, 0.894401, 0.896454, 0.893311, 0.895939, 0.898054, 0.898005, 0.896819, 0.896271, 0.896176, 0.895001, 0.89797, 0.899729, 0.897532],
        p: 2.0407139096244576e-05,
        d: 0.023773148605119337,
        killed: false,
    },
    OracleCase {
        name: "overlap",
        orig: &[0.892905, 0.913198, 0.9069, 0.913036, 0.899773, 0.904386, 0.9008, 0.90147, 0.899646, 0.883844, 0.897971, 0.919641, 0.905309, 0.897558, 0.897793, 0.905076, 0.898498, 0.906498, 0.907002, 0.887817],
        mutant: &[0.891658, 0.903123, 0.913704, 0.883435, 0.893416, 0.887465, 0.883913, 0.883773, 0.893438, 0.907743, 0.879972, 0.907509, 0.893106, 0.890367, 0.916885, 0.900983, 0.897281, 0.91174, 0.901599, 0.89783],
        p: 0.1332831707493199,
        d: 0.5173330944375258,
        killed: false,
    },
    OracleCase {
        name: "tied_grid",
        orig: &[0.9, 0.85, 0.85, 0.925, 0.925, 0.95, 0.85, 0.85, 0.95, 0.875, 0.925, 0.95, 0.9, 0.95, 0.875, 0.9, 0.925, 0.85, 0.925, 0.925],
        mutant: &[0.875, 0.85, 0.875, 0.8, 0.875, 0.9, 0.8, 0.85, 0.9, 0.9, 0.875, 0.775, 0.775, 0.9, 0.825, 0.825, 0.9, 0.8, 0.825, 0.775],
        p: 0.0004640117217970864,
        d: 1.3580206859566801,
        killed: true,
    },
    OracleCase {
        name: "moderate_kill",
        orig: &[0.90436, 0.902237, 0.907597, 0.903504, 0.88691, 0.890585, 0.895169, 0.903197, 0.89142, 0.889248, 0.886503, 0.923403, 0.888098, 0.891175, 0.922337, 0.921963, 0.900845, 0.904967, 0.901879, 0.907091],
        mutant: &[0.902192, 0.886722, 0.877165, 0.895561, 0.903318, 0.890058, 0.885527, 0.89221, 0.882561, 0.88637, 0.897328, 0.880151, 0.880143, 0.897089, 0.886445, 0.88872, 0.90326, 0.887779, 0.885114, 0.888514],
        p: 0.0010140986852160438,
        d: 1.145598385557828,
        killed: true,
    },
];
