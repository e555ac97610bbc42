#include "mosaic/evalcli/report.hpp"

#include <algorithm>
#include <exception>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "mosaic/evalcli/ssim.hpp"

namespace mosaic::evalcli {

std::vector<ConditionKind> canonical_subset(std::vector<ConditionKind> subset) {
  std::sort(subset.begin(), subset.end());
  if (std::adjacent_find(subset.begin(), subset.end()) != subset.end())
    throw std::invalid_argument("condition subset lists a condition twice");
  return subset;
}

std::string subset_label(const std::vector<ConditionKind>& subset) {
  std::string out;
  for (auto k : canonical_subset(subset)) {
    if (!out.empty()) out += '+';
    out += synth::condition_name(k);
  }
  return out;
}

std::vector<ConditionKind> parse_subset(const std::string& text) {
  std::vector<ConditionKind> out;
  std::string cur;
  auto flush = [&] {
    if (cur.empty()) throw std::invalid_argument("empty condition name in \"" + text + "\"");
    out.push_back(synth::parse_condition(cur));
    cur.clear();
  };
  for (char c : text) {
    if (c == ',' || c == '+')
      flush();
    else
      cur += c;
  }
  flush();
  return canonical_subset(out);
}

const char* mode_name(pipeline::SampleMode m) {
  switch (m) {
    case pipeline::SampleMode::BackboneOnly: return "backbone";
    case pipeline::SampleMode::Adaptive: return "adaptive";
    case pipeline::SampleMode::Random: return "random";
  }
  return "?";
}

pipeline::SampleMode parse_mode(const std::string& s) {
  if (s == "backbone") return pipeline::SampleMode::BackboneOnly;
  if (s == "adaptive") return pipeline::SampleMode::Adaptive;
  if (s == "random") return pipeline::SampleMode::Random;
  throw std::invalid_argument("unknown selection mode: " + s);
}

std::uint64_t item_seed(std::uint64_t seed, std::size_t index) {
  return derive_seed(seed ^ 0x6576616cULL, index);
}

EvalReport eval_run(const pipeline::Model& model, const std::vector<synth::ImageSample>& items,
                    const EvalOptions& opts) {
  if (opts.subset.empty()) throw std::invalid_argument("eval: empty condition subset");
  const auto subset = canonical_subset(opts.subset);

  EvalReport r;
  r.label = subset_label(subset);
  r.mode = opts.mode;
  r.seed = opts.seed;
  r.steps = opts.steps;
  r.config = {{"model", pipeline::to_json(model.config())},
              {"stage", pipeline::stage_name(model.stage())},
              {"subset", r.label},
              {"mode", mode_name(opts.mode)},
              {"seed", opts.seed},
              {"steps", opts.steps},
              {"items", items.size()}};
  r.config["fourier"] = opts.fourier ? pipeline::to_json(*opts.fourier) : pipeline::Json(nullptr);

  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(items.size());
  std::vector<pipeline::SampleResult> results(items.size());
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const auto& it = items[static_cast<std::size_t>(i)];
      pipeline::SampleRequest req;
      req.text = it.text;
      req.conditions = pipeline::condition_inputs(it, subset);
      req.steps = opts.steps;
      req.seed = item_seed(opts.seed, static_cast<std::size_t>(i));
      req.mode = opts.mode;
      req.fourier = opts.fourier;
      results[static_cast<std::size_t>(i)] = pipeline::sample(model, req);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  pam::SelectionTally tally(opts.steps);
  std::vector<double> scores;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const double s = ssim(results[i].image, items[i].image);
    r.items.push_back({i, items[i].spec.seed, s});
    scores.push_back(s);
    for (std::size_t k = 0; k < results[i].traces.size(); ++k) tally.add(k, results[i].traces[k]);
  }
  if (!scores.empty()) {
    double sum = 0.0;
    for (double s : scores) sum += s;
    r.ssim_mean = sum / static_cast<double>(scores.size());
    std::sort(scores.begin(), scores.end());
    const std::size_t h = scores.size() / 2;
    r.ssim_median = scores.size() % 2 ? scores[h] : 0.5 * (scores[h - 1] + scores[h]);
  }
  r.fractions = tally.fractions();
  for (std::size_t k = 0; k < opts.steps; ++k) r.counts.push_back(tally.counts(k));
  return r;
}

void write_report(std::ostream& os, const EvalReport& r) {
  os << "#format mosaic-report 1\n" << std::setprecision(17);
  os << "label " << r.label << '\n'
     << "mode " << mode_name(r.mode) << '\n'
     << "seed " << r.seed << '\n'
     << "steps " << r.steps << '\n'
     << "items " << r.items.size() << '\n'
     << "config " << r.config.dump() << '\n'
     << "ssim_mean " << r.ssim_mean << '\n'
     << "ssim_median " << r.ssim_median << '\n';
  for (const auto& it : r.items) os << "item " << it.index << ' ' << it.scene_seed << ' ' << it.ssim << '\n';
  for (std::size_t k = 0; k < r.fractions.size(); ++k) {
    os << "fraction " << k;
    for (double f : r.fractions[k]) os << ' ' << f;
    os << '\n';
  }
  for (std::size_t k = 0; k < r.counts.size(); ++k) {
    os << "count " << k;
    for (auto c : r.counts[k]) os << ' ' << c;
    os << '\n';
  }
}

void write_summary(std::ostream& os, const std::vector<EvalReport>& reports) {
  std::size_t width = 10;
  for (const auto& r : reports) width = std::max(width, r.label.size());
  os << "#format mosaic-summary 1\n";
  os << std::left << std::setw(static_cast<int>(width)) << "conditions" << "  " << std::setw(9) << "mode"
     << std::right << std::setw(6) << "items" << std::setw(11) << "ssim_mean" << std::setw(13)
     << "ssim_median" << '\n';
  os << std::fixed << std::setprecision(4);
  for (const auto& r : reports)
    os << std::left << std::setw(static_cast<int>(width)) << r.label << "  " << std::setw(9)
       << mode_name(r.mode) << std::right << std::setw(6) << r.items.size() << std::setw(11)
       << r.ssim_mean << std::setw(13) << r.ssim_median << '\n';
  os.unsetf(std::ios::floatfield);
}

}  // namespace mosaic::evalcli
