#include "domus/simcore.hpp"

namespace domus::sim {

// cos/sin of k*6 degrees, k = 0..59, frozen so base kinematics are
// bit-identical across platforms and libm versions.
const double kHeadingCos[60] = {
    1.0,
    0.9945218953682733,
    0.9781476007338057,
    0.9510565162951535,
    0.9135454576426009,
    0.8660254037844387,
    0.8090169943749475,
    0.7431448254773942,
    0.6691306063588582,
    0.5877852522924731,
    0.5000000000000001,
    0.4067366430758002,
    0.30901699437494745,
    0.20791169081775945,
    0.10452846326765346,
    6.123233995736766e-17,
    -0.10452846326765355,
    -0.20791169081775934,
    -0.30901699437494734,
    -0.40673664307580026,
    -0.4999999999999998,
    -0.587785252292473,
    -0.6691306063588582,
    -0.743144825477394,
    -0.8090169943749473,
    -0.8660254037844387,
    -0.9135454576426008,
    -0.9510565162951535,
    -0.9781476007338057,
    -0.9945218953682733,
    -1.0,
    -0.9945218953682733,
    -0.9781476007338056,
    -0.9510565162951536,
    -0.9135454576426009,
    -0.8660254037844386,
    -0.8090169943749476,
    -0.7431448254773942,
    -0.6691306063588581,
    -0.5877852522924732,
    -0.5000000000000004,
    -0.4067366430758001,
    -0.30901699437494756,
    -0.2079116908177598,
    -0.10452846326765336,
    -1.8369701987210297e-16,
    0.10452846326765299,
    0.20791169081775943,
    0.30901699437494723,
    0.40673664307579976,
    0.5000000000000001,
    0.5877852522924729,
    0.6691306063588578,
    0.7431448254773942,
    0.8090169943749473,
    0.8660254037844384,
    0.913545457642601,
    0.9510565162951535,
    0.9781476007338056,
    0.9945218953682733,
};
const double kHeadingSin[60] = {
    0.0,
    0.10452846326765347,
    0.20791169081775934,
    0.3090169943749474,
    0.4067366430758002,
    0.49999999999999994,
    0.5877852522924731,
    0.6691306063588582,
    0.7431448254773942,
    0.8090169943749475,
    0.8660254037844386,
    0.9135454576426009,
    0.9510565162951535,
    0.9781476007338056,
    0.9945218953682733,
    1.0,
    0.9945218953682733,
    0.9781476007338057,
    0.9510565162951536,
    0.9135454576426009,
    0.8660254037844387,
    0.8090169943749475,
    0.7431448254773942,
    0.6691306063588583,
    0.5877852522924732,
    0.49999999999999994,
    0.40673664307580043,
    0.3090169943749475,
    0.20791169081775931,
    0.10452846326765373,
    1.2246467991473532e-16,
    -0.1045284632676535,
    -0.2079116908177595,
    -0.3090169943749473,
    -0.4067366430758002,
    -0.5000000000000001,
    -0.587785252292473,
    -0.6691306063588582,
    -0.7431448254773944,
    -0.8090169943749473,
    -0.8660254037844384,
    -0.913545457642601,
    -0.9510565162951535,
    -0.9781476007338056,
    -0.9945218953682734,
    -1.0,
    -0.9945218953682734,
    -0.9781476007338056,
    -0.9510565162951536,
    -0.9135454576426011,
    -0.8660254037844386,
    -0.8090169943749476,
    -0.7431448254773946,
    -0.6691306063588581,
    -0.5877852522924734,
    -0.5000000000000004,
    -0.40673664307580015,
    -0.3090169943749476,
    -0.20791169081775987,
    -0.10452846326765342,
};
}  // namespace domus::sim
