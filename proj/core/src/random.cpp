#include "gaitma/random.hpp"

#include <cmath>
#include <sstream>

#include "gaitma/errors.hpp"
#include "gaitma/tensor.hpp"

namespace gaitma {

std::string save_rng_state(const Rng& rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

void load_rng_state(Rng& rng, const std::string& blob) {
    std::istringstream is(blob);
    is >> rng;
    if (is.fail()) throw FormatError("load_rng_state: malformed RNG state blob");
}

Tensor uniform_fan_in(const std::vector<int>& dims, int fan_in, Rng& rng) {
    if (fan_in <= 0) throw InvalidArgument("uniform_fan_in: fan_in must be positive");
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor t(dims);
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = uniform_real(rng, -bound, bound);
    return t;
}

}  // namespace gaitma
