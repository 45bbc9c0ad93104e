//! Published percentile cut-offs, one table per window length.
//!
//! Rows follow the canonical variable order; columns are the 25th, 50th and
//! 75th percentiles. The 1 s ratio rows repeat its V2..V7 rows exactly as
//! published.

use crate::features::NUM_VARIABLES;

/// Indexed by `5 - window_s`.
#[rustfmt::skip]
pub(super) const BUILTIN_CUTOFFS: [[[f64; 3]; NUM_VARIABLES]; 5] = [
    // 5 s
    [
        [0.025537, 0.089672, 0.136088], // V2
        [4.0, 14.5, 232.5], // V3
        [0.616663, 1.83083, 5.959598], // V4
        [0.033195, 0.079342, 0.160908], // V5
        [0.002247, 0.012159, 0.144687], // V6
        [0.017574, 0.054455, 0.176347], // V7
        [0.03157, 0.095445, 0.197203], // V8
        [5.0, 23.0, 187.75], // V9
        [0.817409, 2.087051, 6.102764], // V10
        [0.001802, 0.005235, 0.012307], // V11
        [0.000165, 0.000753, 0.006355], // V12
        [0.002531, 0.005998, 0.015984], // V13
        [0.543143, 0.808972, 1.39471], // V2_8
        [0.38125, 1.294801, 2.176598], // V3_9
        [0.475384, 1.027277, 1.501146], // V4_10
        [7.80108, 14.34464, 29.0312], // V5_11
        [5.501654, 15.77497, 50.7646], // V6_12
        [4.08387, 9.045111, 18.00813], // V7_13
    ],
    // 4 s
    [
        [0.028521, 0.096291, 0.181219], // V2
        [4.0, 13.0, 175.5], // V3
        [0.552183, 1.605571, 5.200332], // V4
        [0.036251, 0.094939, 0.158282], // V5
        [0.002502, 0.011834, 0.130142], // V6
        [0.017525, 0.055982, 0.15279], // V7
        [0.028882, 0.092357, 0.197203], // V8
        [4.0, 14.0, 258.5], // V9
        [0.555836, 1.951793, 6.336658], // V10
        [0.001904, 0.006055, 0.013018], // V11
        [0.000128, 0.000523, 0.008301], // V12
        [0.001747, 0.00508, 0.017826], // V13
        [0.645632, 0.89624, 1.350195], // V2_8
        [0.5, 1.12129, 2.333333], // V3_9
        [0.560464, 1.005624, 1.50856], // V4_10
        [6.285207, 12.07338, 27.94023], // V5_11
        [7.657875, 15.97658, 56.00498], // V6_12
        [5.056071, 9.226469, 21.33621], // V7_13
    ],
    // 3 s
    [
        [0.03194, 0.096123, 0.150733], // V2
        [4.0, 13.0, 159.0], // V3
        [0.555836, 1.566484, 5.153229], // V4
        [0.030702, 0.082569, 0.143622], // V5
        [0.002227, 0.01207, 0.106299], // V6
        [0.018207, 0.047486, 0.136789], // V7
        [0.027022, 0.096123, 0.197203], // V8
        [3.0, 11.0, 212.0], // V9
        [0.394405, 1.457435, 6.193818], // V10
        [0.001662, 0.005614, 0.011111], // V11
        [0.000108, 0.000351, 0.007508], // V12
        [0.001214, 0.003857, 0.015949], // V13
        [0.588914, 0.856317, 1.418486], // V2_8
        [0.5, 1.402542, 2.5], // V3_9
        [0.706932, 1.084431, 1.927521], // V4_10
        [6.548546, 13.00316, 29.72699], // V5_11
        [8.128327, 19.0, 64.53311], // V6_12
        [5.06461, 10.99971, 23.4315], // V7_13
    ],
    // 2 s
    [
        [0.027442, 0.096123, 0.181219], // V2
        [4.0, 11.0, 185.0], // V3
        [0.544352, 1.31045, 5.561496], // V4
        [0.032004, 0.081686, 0.140064], // V5
        [0.001807, 0.006944, 0.110295], // V6
        [0.015953, 0.039461, 0.137062], // V7
        [0.028312, 0.096123, 0.197203], // V8
        [4.0, 15.0, 232.0], // V9
        [0.555836, 1.972027, 6.934729], // V10
        [0.001601, 0.004623, 0.010108], // V11
        [0.000116, 0.000536, 0.007775], // V12
        [0.00136, 0.004605, 0.016561], // V13
        [0.653128, 0.897169, 1.275932], // V2_8
        [0.5, 1.25969, 2.084053], // V3_9
        [0.502151, 1.019212, 1.580454], // V4_10
        [8.305886, 13.30195, 28.31558], // V5_11
        [6.32996, 16.15734, 48.24208], // V6_12
        [4.833126, 10.26422, 23.45575], // V7_13
    ],
    // 1 s
    [
        [0.043662, 0.102924, 0.197203], // V2
        [3.0, 8.0, 109.75], // V3
        [0.394405, 1.099948, 4.615003], // V4
        [0.032882, 0.074918, 0.12968], // V5
        [0.001575, 0.006651, 0.073862], // V6
        [0.01319, 0.034193, 0.119747], // V7
        [0.039327, 0.111167, 0.197203], // V8
        [3.0, 10.0, 123.0], // V9
        [0.547526, 1.344413, 5.361706], // V10
        [0.001796, 0.005085, 0.008561], // V11
        [0.000106, 0.000323, 0.004121], // V12
        [0.001244, 0.003122, 0.012171], // V13
        [0.043662, 0.102924, 0.197203], // V2_8
        [3.0, 8.0, 109.75], // V3_9
        [0.394405, 1.099948, 4.615003], // V4_10
        [0.032882, 0.074918, 0.12968], // V5_11
        [0.001575, 0.006651, 0.073862], // V6_12
        [0.01319, 0.034193, 0.119747], // V7_13
    ],
];
