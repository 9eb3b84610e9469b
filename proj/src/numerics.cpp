#include "estfuse/numerics.hpp"

#include <algorithm>

namespace estfuse {

double median_of(std::span<const double> values) {
    if (values.empty()) return 0.0;
    std::vector<double> copy(values.begin(), values.end());
    const std::size_t mid = (copy.size() - 1) / 2;
    std::nth_element(copy.begin(), copy.begin() + static_cast<std::ptrdiff_t>(mid), copy.end());
    return copy[mid];
}

} // namespace estfuse
