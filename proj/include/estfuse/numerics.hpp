#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace estfuse {

namespace detail {

inline constexpr std::size_t kPairwiseLeaf = 64;

// Shared reduction tree for all pairwise sums: summing f(i) here is
// bitwise-identical to materializing f into an array and summing that.
template <typename F>
double pairwise_sum_range(std::size_t offset, std::size_t n, const F& get) {
    if (n <= kPairwiseLeaf) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += get(offset + i);
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum_range(offset, half, get) +
           pairwise_sum_range(offset + half, n - half, get);
}

} // namespace detail

// Pairwise (cascade) summation. The reduction tree depends only on the
// element count, so sums are reproducible for a fixed input order.
inline double pairwise_sum(std::span<const double> values) {
    return detail::pairwise_sum_range(0, values.size(),
                                      [data = values.data()](std::size_t i) { return data[i]; });
}

// Pairwise sum of get(0..n-1) without materializing the values.
template <typename F>
double pairwise_transform_sum(std::size_t n, const F& get) {
    return detail::pairwise_sum_range(0, n, get);
}

inline double pairwise_mean(std::span<const double> values) {
    if (values.empty()) return 0.0;
    return pairwise_sum(values) / static_cast<double>(values.size());
}

// Median of a copy of `values`; for even counts returns the lower-middle
// element (order statistic, no interpolation).
double median_of(std::span<const double> values);

} // namespace estfuse
