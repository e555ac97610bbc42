#include "mosaic/evalcli/artifacts.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mosaic::evalcli {
namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::ios_base::failure("cannot write " + path.string());
  return os;
}

}  // namespace

void write_pgm(std::ostream& os, const Tensor& image) {
  if (image.rank() != 2) throw ShapeError("write_pgm: image must be 2-D");
  os << "P5\n# mosaic-image 1\n" << image.dim(1) << ' ' << image.dim(0) << "\n255\n";
  for (double v : image.data()) {
    const double c = std::clamp(v, 0.0, 1.0);
    os.put(static_cast<char>(static_cast<std::uint8_t>(std::lround(c * 255.0))));
  }
}

void write_pgm(const std::filesystem::path& path, const Tensor& image) {
  auto os = open_out(path);
  write_pgm(os, image);
  if (!os) throw std::ios_base::failure("write failed: " + path.string());
}

void write_colormap(const std::filesystem::path& path, const pam::SelectionTrace& trace,
                    std::size_t cell_px) {
  auto os = open_out(path);
  pam::write_ppm(os, pam::trace_to_colormap(trace, cell_px));
  if (!os) throw std::ios_base::failure("write failed: " + path.string());
}

std::map<std::size_t, pam::SelectionTrace> read_trace_records(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "#format mosaic-trace 1")
    throw std::runtime_error("trace file: missing \"#format mosaic-trace 1\" header");
  std::map<std::size_t, std::vector<pam::Pick>> picks;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tag;
    std::size_t step = 0;
    pam::Pick p;
    if (!(ls >> tag >> step >> p.iteration >> p.position >> p.condition >> p.score) || tag != "pick")
      throw std::runtime_error("trace file: bad record on line " + std::to_string(lineno));
    picks[step].push_back(p);
  }
  std::map<std::size_t, pam::SelectionTrace> out;
  for (auto& [step, ps] : picks) {
    pam::SelectionTrace tr;
    std::size_t m = 0, iters = 0;
    for (const auto& p : ps) {
      m = std::max(m, p.position + 1);
      iters = std::max(iters, p.iteration + 1);
    }
    tr.m = ps.size();
    tr.n_p = iters ? ps.size() / iters : 0;
    tr.assignment.assign(std::max(m, tr.m), -1);
    for (const auto& p : ps) {
      if (p.condition < 0 || p.condition >= static_cast<int>(pam::kNumConditions))
        throw std::runtime_error("trace file: bad condition id");
      tr.assignment[p.position] = p.condition;
    }
    tr.picks = std::move(ps);
    try {
      pam::validate_trace(tr);
    } catch (const std::logic_error& e) {
      throw std::runtime_error(std::string("trace file: step ") + std::to_string(step) + ": " + e.what());
    }
    out.emplace(step, std::move(tr));
  }
  return out;
}

}  // namespace mosaic::evalcli
