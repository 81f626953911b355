#include "song/rng.hpp"

#include <cmath>

namespace song {

double Rng::normal() {
    // Box-Muller; u1 kept away from zero so log stays finite.
    double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

void Rng::shuffle(std::vector<size_t>& v) {
    for (size_t i = v.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace song
