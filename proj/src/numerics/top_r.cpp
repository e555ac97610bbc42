#include "mosaic/numerics/top_r.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace mosaic {

std::vector<std::size_t> top_r(std::span<const double> values, std::size_t r) {
  if (r > values.size()) {
    throw std::out_of_range("top_r: r = " + std::to_string(r) + " exceeds " +
                            std::to_string(values.size()) + " values");
  }
  for (double v : values)
    if (std::isnan(v)) throw std::invalid_argument("top_r: NaN in values");
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto before = [&](std::size_t a, std::size_t b) {
    return values[a] > values[b] || (values[a] == values[b] && a < b);
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(r), idx.end(), before);
  idx.resize(r);
  return idx;
}

std::vector<std::size_t> rank_descending(std::span<const double> values) {
  return top_r(values, values.size());
}

}  // namespace mosaic
