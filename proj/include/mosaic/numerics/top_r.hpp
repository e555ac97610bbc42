#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mosaic {

// Indices of the r largest values, ordered by value descending and then by
// index ascending. The result depends only on (values, r). -inf entries rank
// last; NaN is rejected.
std::vector<std::size_t> top_r(std::span<const double> values, std::size_t r);

// The complete ranking, equivalent to top_r(values, values.size()).
std::vector<std::size_t> rank_descending(std::span<const double> values);

}  // namespace mosaic
