#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mosaic/numerics/tensor.hpp"

namespace mosaic {

struct InitSpec {
  enum class Kind { Zero, Normal };
  Kind kind = Kind::Zero;
  double stddev = 0.0;

  static InitSpec zero() { return {Kind::Zero, 0.0}; }
  static InitSpec normal(double stddev) { return {Kind::Normal, stddev}; }
};

// Named, insertion-ordered collection of trainable tensors. Values are kept
// representable as 32-bit floats so the binary container round-trips exactly.
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Tensor tensor;
    InitSpec init;
  };

  // Registers a parameter; the returned handle shares storage with the store.
  Tensor add(const std::string& name, Shape shape, InitSpec init);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Tensor get(const std::string& name) const;
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t parameter_count() const;

  // Deterministic: every entry draws from its own stream seeded by (seed, name).
  void initialize(std::uint64_t seed);
  void set_requires_grad(bool on);
  void zero_grad();
  void round_to_float();

  // Copies values for every entry of `src` whose name also exists here.
  std::size_t copy_matching(const ParameterStore& src);

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Binary container: a version byte, a u32 entry count, the length-prefixed
// name table, then per tensor a u32 rank, u32 extents and little-endian
// float32 values. Groups are written with "<group>/" name prefixes.
inline constexpr std::uint8_t kContainerVersion = 1;

using StoreGroup = std::pair<std::string, const ParameterStore*>;
void write_container(std::ostream& os, const std::vector<StoreGroup>& groups);

// Reads a container into existing stores. Every name in the file must exist
// in the matching store with the same shape, and every store entry must be
// present in the file.
void read_container(std::istream& is, const std::vector<std::pair<std::string, ParameterStore*>>& groups);

void save_store(const ParameterStore& store, const std::string& path);
void load_store(ParameterStore& store, const std::string& path);

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mosaic
