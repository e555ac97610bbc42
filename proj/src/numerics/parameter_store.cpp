#include "mosaic/numerics/parameter_store.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>

#include "mosaic/numerics/rng.hpp"

namespace mosaic {
namespace {

static_assert(std::endian::native == std::endian::little, "container IO assumes little-endian");

void put_u8(std::ostream& os, std::uint8_t v) { os.put(static_cast<char>(v)); }

void put_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError("truncated container");
  return v;
}

}  // namespace

Tensor ParameterStore::add(const std::string& name, Shape shape, InitSpec init) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  Tensor t = Tensor::zeros(std::move(shape));
  t.set_requires_grad(true);
  index_.emplace(name, entries_.size());
  entries_.push_back({name, t, init});
  return t;
}

Tensor ParameterStore::get(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
  return entries_[it->second].tensor;
}

std::size_t ParameterStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.size();
  return n;
}

void ParameterStore::initialize(std::uint64_t seed) {
  for (auto& e : entries_) {
    auto data = e.tensor.mutable_data();
    if (e.init.kind == InitSpec::Kind::Zero) {
      std::fill(data.begin(), data.end(), 0.0);
      continue;
    }
    Rng rng(derive_seed(seed, fnv1a(e.name)));
    std::normal_distribution<double> dist(0.0, e.init.stddev);
    for (auto& v : data) v = static_cast<double>(static_cast<float>(dist(rng)));
  }
}

void ParameterStore::set_requires_grad(bool on) {
  for (auto& e : entries_) e.tensor.set_requires_grad(on);
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

void ParameterStore::round_to_float() {
  for (auto& e : entries_)
    for (auto& v : e.tensor.mutable_data()) v = static_cast<double>(static_cast<float>(v));
}

std::size_t ParameterStore::copy_matching(const ParameterStore& src) {
  std::size_t copied = 0;
  for (const auto& e : src.entries()) {
    const auto it = index_.find(e.name);
    if (it == index_.end()) continue;
    auto dst = entries_[it->second].tensor;
    if (dst.shape() != e.tensor.shape()) {
      throw ShapeError("copy_matching: shape mismatch for " + e.name);
    }
    std::copy(e.tensor.data().begin(), e.tensor.data().end(), dst.mutable_data().begin());
    ++copied;
  }
  return copied;
}

void write_container(std::ostream& os, const std::vector<StoreGroup>& groups) {
  std::vector<std::pair<std::string, Tensor>> all;
  for (const auto& [prefix, store] : groups)
    for (const auto& e : store->entries()) all.emplace_back(prefix + "/" + e.name, e.tensor);

  put_u8(os, kContainerVersion);
  put_u32(os, static_cast<std::uint32_t>(all.size()));
  for (const auto& [name, t] : all) {
    put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
  }
  for (const auto& [name, t] : all) {
    put_u32(os, static_cast<std::uint32_t>(t.rank()));
    for (auto e : t.shape()) put_u32(os, static_cast<std::uint32_t>(e));
    std::vector<float> buf(t.size());
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(t.at(i));
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  if (!os) throw std::runtime_error("failed writing parameter container");
}

void read_container(std::istream& is,
                    const std::vector<std::pair<std::string, ParameterStore*>>& groups) {
  const int version = is.get();
  if (version == std::char_traits<char>::eof()) throw FormatError("empty container");
  if (version != kContainerVersion)
    throw FormatError("unsupported container version " + std::to_string(version));
  const std::uint32_t count = get_u32(is);
  std::vector<std::string> names(count);
  for (auto& name : names) {
    const std::uint32_t len = get_u32(is);
    if (len > (1u << 16)) throw FormatError("implausible name length");
    name.resize(len);
    if (!is.read(name.data(), len)) throw FormatError("truncated name table");
  }

  std::map<std::string, std::pair<ParameterStore*, std::string>> lookup;
  std::size_t expected = 0;
  for (const auto& [prefix, store] : groups) {
    for (const auto& e : store->entries()) lookup[prefix + "/" + e.name] = {store, e.name};
    expected += store->entries().size();
  }
  if (count != expected) {
    throw FormatError("container holds " + std::to_string(count) + " tensors, expected " +
                      std::to_string(expected));
  }

  for (const auto& name : names) {
    const auto it = lookup.find(name);
    if (it == lookup.end()) throw FormatError("unexpected tensor in container: " + name);
    Tensor t = it->second.first->get(it->second.second);
    const std::uint32_t rank = get_u32(is);
    Shape shape(rank);
    for (auto& e : shape) e = get_u32(is);
    if (shape != t.shape()) {
      throw FormatError("shape mismatch for " + name + ": file " + shape_str(shape) +
                        ", model " + shape_str(t.shape()));
    }
    std::vector<float> buf(t.size());
    if (!is.read(reinterpret_cast<char*>(buf.data()),
                 static_cast<std::streamsize>(buf.size() * sizeof(float))))
      throw FormatError("truncated tensor data for " + name);
    auto dst = t.mutable_data();
    for (std::size_t i = 0; i < buf.size(); ++i) dst[i] = static_cast<double>(buf[i]);
    lookup.erase(it);
  }
}

void save_store(const ParameterStore& store, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_container(os, {{"params", &store}});
}

void load_store(ParameterStore& store, const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  read_container(is, {{"params", &store}});
}

}  // namespace mosaic
