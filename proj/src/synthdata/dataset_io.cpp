#include "mosaic/synthdata/dataset_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace mosaic::synth {
namespace {

constexpr const char* kHeader = "#format mosaic-manifest 1";

void put_f32(std::ostream& os, double v) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  const char b[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                     static_cast<char>((bits >> 16) & 0xff), static_cast<char>(bits >> 24)};
  os.write(b, 4);
}

}  // namespace

void write_manifest(std::ostream& os, std::uint64_t seed, const std::vector<ImageSample>& samples) {
  os << kHeader << '\n' << "dataset " << seed << ' ' << samples.size() << '\n';
  os << std::setprecision(17);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& spec = samples[i].spec;
    os << "sample " << i << ' ' << spec.seed << ' ' << spec.objects.size();
    for (const auto& o : spec.objects)
      os << ' ' << static_cast<int>(o.kind) << ' ' << o.cx << ' ' << o.cy << ' ' << o.size << ' '
         << o.size2 << ' ' << o.layer << ' ' << o.gray_bucket;
    os << '\n';
  }
}

std::vector<ImageSample> read_manifest(std::istream& is, std::uint64_t* seed_out) {
  std::string line;
  if (!std::getline(is, line) || line != kHeader)
    throw std::runtime_error("manifest: missing or unsupported format header");
  std::string tag;
  std::uint64_t seed = 0;
  std::size_t count = 0;
  if (!std::getline(is, line)) throw std::runtime_error("manifest: missing dataset line");
  {
    std::istringstream ls(line);
    if (!(ls >> tag >> seed >> count) || tag != "dataset")
      throw std::runtime_error("manifest: malformed dataset line");
  }
  std::vector<ImageSample> out;
  out.reserve(count);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::size_t index = 0, n = 0;
    SceneSpec spec;
    if (!(ls >> tag >> index >> spec.seed >> n) || tag != "sample" || index != out.size())
      throw std::runtime_error("manifest: malformed sample line " + std::to_string(out.size()));
    for (std::size_t j = 0; j < n; ++j) {
      SceneObject o;
      int kind = 0;
      if (!(ls >> kind >> o.cx >> o.cy >> o.size >> o.size2 >> o.layer >> o.gray_bucket) ||
          kind < 0 || kind >= static_cast<int>(kNumShapeKinds))
        throw std::runtime_error("manifest: malformed object in sample " + std::to_string(index));
      o.kind = static_cast<ShapeKind>(kind);
      spec.objects.push_back(o);
    }
    out.push_back(make_sample(spec));
  }
  if (out.size() != count) throw std::runtime_error("manifest: sample count mismatch");
  if (seed_out) *seed_out = seed;
  return out;
}

void write_dataset(const std::filesystem::path& dir, std::uint64_t seed,
                   const std::vector<ImageSample>& samples) {
  std::filesystem::create_directories(dir);
  std::ofstream man(dir / "manifest.txt");
  write_manifest(man, seed, samples);
  std::ofstream blob(dir / "samples.bin", std::ios::binary);
  for (const auto& s : samples) {
    for (double v : s.image.data()) put_f32(blob, v);
    for (const auto& c : s.conditions)
      for (double v : c.data()) put_f32(blob, v);
  }
  if (!man || !blob) throw std::runtime_error("failed writing dataset to " + dir.string());
}

std::vector<ImageSample> load_dataset(const std::filesystem::path& dir) {
  std::ifstream man(dir / "manifest.txt");
  if (!man) throw std::runtime_error("cannot open " + (dir / "manifest.txt").string());
  return read_manifest(man);
}

}  // namespace mosaic::synth
