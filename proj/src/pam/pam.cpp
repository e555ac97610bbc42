#include "mosaic/pam/pam.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "mosaic/numerics/tape.hpp"
#include "mosaic/numerics/top_r.hpp"
#include "mosaic/synthdata/patchify.hpp"

namespace mosaic::pam {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

using ImplPtr = std::shared_ptr<TensorImpl>;

struct Chosen {
  std::size_t position;
  std::size_t index;  // into the condition list
  double anchor;
};

// Rows of the chosen conditions gathered into an m x d update. Each row is
// scaled by 1 + s - anchor, where s = w_c[k][pos] + w_sp[pos]; with the anchor
// equal to s the factor is exactly 1.
Tensor gated_rows(const std::vector<Tensor>& c, const std::vector<Tensor>& w_c, const Tensor& w_sp,
                  const std::vector<Chosen>& chosen) {
  const std::size_t m = c.front().rows(), d = c.front().cols();
  std::vector<double> out(m * d, 0.0);
  std::vector<double> gates(chosen.size());
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    const auto& ch = chosen[i];
    const double s = w_c[ch.index].at(ch.position) + w_sp.at(ch.position);
    gates[i] = 1.0 + (s - ch.anchor);
    const auto row = c[ch.index].data().subspan(ch.position * d, d);
    for (std::size_t j = 0; j < d; ++j) out[ch.position * d + j] = row[j] * gates[i];
  }
  std::vector<Tensor> inputs(c.begin(), c.end());
  inputs.insert(inputs.end(), w_c.begin(), w_c.end());
  inputs.push_back(w_sp);
  std::vector<ImplPtr> pc, pw;
  for (const auto& t : c) pc.push_back(t.impl());
  for (const auto& t : w_c) pw.push_back(t.impl());
  ImplPtr psp = w_sp.impl();
  return make_result({m, d}, std::move(out), inputs,
                     [pc, pw, psp, chosen, gates, d](TensorImpl& o) {
                       for (std::size_t i = 0; i < chosen.size(); ++i) {
                         const auto& ch = chosen[i];
                         const double* g = o.grad.data() + ch.position * d;
                         const auto& ci = pc[ch.index];
                         double dot = 0.0;
                         for (std::size_t j = 0; j < d; ++j) dot += g[j] * ci->data[ch.position * d + j];
                         if (ci->requires_grad) {
                           ci->ensure_grad();
                           for (std::size_t j = 0; j < d; ++j)
                             ci->grad[ch.position * d + j] += g[j] * gates[i];
                         }
                         for (const auto& p : {pw[ch.index], psp}) {
                           if (!p->requires_grad) continue;
                           p->ensure_grad();
                           p->grad[ch.position] += dot;
                         }
                       }
                     });
}

}  // namespace

void PamConfig::validate() const {
  if (d == 0 || heads == 0 || d % heads != 0) throw ConfigError("pam: d must be a positive multiple of heads");
  if (patch == 0 || canvas % patch != 0) throw ConfigError("pam: canvas not divisible by patch size");
  const std::size_t np = picks_per_step();
  if (np == 0 || m() % np != 0)
    throw ConfigError("pam: m = " + std::to_string(m()) + " is not divisible by n_p = " +
                      std::to_string(np));
}

void validate_trace(const SelectionTrace& t) {
  if (t.n_p == 0 || t.m % t.n_p != 0) throw std::logic_error("trace: bad (m, n_p)");
  if (t.picks.size() != t.m || t.assignment.size() != t.m)
    throw std::logic_error("trace: incomplete");
  std::vector<int> seen(t.m, -1);
  std::vector<std::size_t> per_iter(t.m / t.n_p, 0);
  for (const auto& p : t.picks) {
    if (p.position >= t.m || p.iteration >= per_iter.size()) throw std::logic_error("trace: pick out of range");
    if (seen[p.position] >= 0) throw std::logic_error("trace: position assigned twice");
    if (p.condition < 0 || p.condition >= static_cast<int>(kNumConditions))
      throw std::logic_error("trace: bad condition id");
    seen[p.position] = p.condition;
    ++per_iter[p.iteration];
  }
  for (auto c : per_iter)
    if (c != t.n_p) throw std::logic_error("trace: iteration with wrong pick count");
  if (seen != t.assignment) throw std::logic_error("trace: assignment disagrees with picks");
}

std::vector<std::pair<std::size_t, std::size_t>> greedy_select(std::span<const double> m_prob,
                                                               std::size_t n, std::size_t m,
                                                               std::size_t n_p) {
  if (m_prob.size() != n * m) throw ShapeError("greedy_select: score map size mismatch");
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::vector<char> claimed(m, 0);
  for (std::size_t idx : rank_descending(m_prob)) {
    if (out.size() == n_p) break;
    if (m_prob[idx] == kNegInf) break;
    const std::size_t pos = idx % m;
    if (claimed[pos]) continue;
    claimed[pos] = 1;
    out.emplace_back(pos, idx / m);
  }
  if (out.size() < n_p)
    throw std::logic_error("greedy_select: only " + std::to_string(out.size()) +
                           " live positions for n_p = " + std::to_string(n_p));
  return out;
}

PatchAdapter::PatchAdapter(ParameterStore& store, const PamConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const std::size_t p2 = cfg.patch * cfg.patch;
  const IsbConfig icfg{cfg.d, cfg.heads, cfg.ff_mult, cfg.mod_init, cfg.score_init};
  for (auto k : synth::kAllConditions) {
    const auto i = static_cast<std::size_t>(k);
    encoders_[i] = nn::make_linear(store, std::string("enc.") + synth::condition_name(k), p2, cfg.d,
                                   InitSpec::normal(1.0 / std::sqrt(static_cast<double>(p2))));
  }
  pos_ = store.add("enc.pos", {cfg.m(), cfg.d}, InitSpec::normal(0.02));
  for (auto k : synth::kAllConditions)
    isb_c_[static_cast<std::size_t>(k)] =
        make_isb(store, std::string("isb.") + synth::condition_name(k), icfg);
  isb_sp_ = make_isb(store, "isb.sp", icfg);
}

Tensor PatchAdapter::encode(const Tensor& map, ConditionKind k) const {
  if (map.shape() != Shape{cfg_.canvas, cfg_.canvas})
    throw ShapeError("encode: condition map " + shape_str(map.shape()) + " does not match canvas " +
                     std::to_string(cfg_.canvas));
  return ops::add(encoders_[static_cast<std::size_t>(k)](synth::patchify(map, cfg_.patch)), pos_);
}

std::vector<Tensor> PatchAdapter::encode_all(const std::vector<ConditionInput>& conditions) const {
  if (conditions.empty()) throw ConfigError("patch_adapt: no conditions");
  std::array<bool, kNumConditions> used{};
  std::vector<Tensor> out;
  for (const auto& c : conditions) {
    auto& u = used[static_cast<std::size_t>(c.kind)];
    if (u) throw ConfigError("patch_adapt: condition listed twice");
    u = true;
    out.push_back(encode(c.map, c.kind));
  }
  return out;
}

PatchAdapter::Scores PatchAdapter::score_conditions(const std::vector<Tensor>& c,
                                                    const std::vector<ConditionKind>& kinds,
                                                    const Tensor& sp, const Tensor& y,
                                                    const Tensor& o_t,
                                                    std::span<const double> live) const {
  const std::size_t m = cfg_.m();
  if (c.size() != kinds.size() || live.size() != m || sp.shape() != Shape{m, cfg_.d})
    throw ShapeError("score_conditions: inconsistent inputs");
  Scores s;
  for (std::size_t k = 0; k < c.size(); ++k) {
    if (c[k].shape() != Shape{m, cfg_.d}) throw ShapeError("score_conditions: bad feature grid");
    s.w_c.push_back(isb_c_[static_cast<std::size_t>(kinds[k])](c[k], o_t, y));
  }
  s.w_sp = isb_sp_(ops::add(sp, pos_), o_t, y);
  s.m_prob.assign(c.size() * m, kNegInf);
  for (std::size_t k = 0; k < c.size(); ++k)
    for (std::size_t p = 0; p < m; ++p)
      if (live[p] != 0.0) s.m_prob[k * m + p] = s.w_c[k].at(p) + s.w_sp.at(p);
  return s;
}

AdaptResult PatchAdapter::adapt(const std::vector<ConditionInput>& conditions, const Tensor& y,
                                const Tensor& o_t, const AdaptOptions& options) const {
  const std::size_t m = cfg_.m(), n_p = cfg_.picks_per_step(), iters = cfg_.iterations();
  AdaptResult res;
  res.encoded = encode_all(conditions);
  std::vector<ConditionKind> kinds;
  std::array<int, kNumConditions> index_of;
  index_of.fill(-1);
  for (std::size_t k = 0; k < conditions.size(); ++k) {
    kinds.push_back(conditions[k].kind);
    index_of[static_cast<std::size_t>(conditions[k].kind)] = static_cast<int>(k);
  }
  if (options.replay) {
    validate_trace(*options.replay);
    if (options.replay->m != m || options.replay->n_p != n_p)
      throw ConfigError("replay trace does not match the configuration");
  }

  auto& trace = res.trace;
  trace.m = m;
  trace.n_p = n_p;
  trace.assignment.assign(m, -1);
  std::vector<double> live(m, 1.0);
  Tensor sp = Tensor::zeros({m, cfg_.d});

  for (std::size_t it = 0; it < iters; ++it) {
    std::vector<Tensor> c_live;
    for (const auto& ck : res.encoded) c_live.push_back(it == 0 ? ck : ops::mul_rows(ck, live));
    Scores s = score_conditions(c_live, kinds, sp, y, o_t, live);
    for (double v : s.m_prob)
      if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
        throw NonFiniteError("patch_adapt: non-finite score at iteration " + std::to_string(it));

    std::vector<Chosen> chosen;
    if (options.replay) {
      for (std::size_t j = it * n_p; j < (it + 1) * n_p; ++j) {
        const Pick& p = options.replay->picks[j];
        const int idx = index_of[static_cast<std::size_t>(p.condition)];
        if (idx < 0 || live[p.position] == 0.0) throw ConfigError("replay trace does not fit inputs");
        chosen.push_back({p.position, static_cast<std::size_t>(idx), p.score});
      }
    } else {
      for (auto [pos, k] : greedy_select(s.m_prob, kinds.size(), m, n_p))
        chosen.push_back({pos, k, s.m_prob[k * m + pos]});
    }

    sp = ops::add(sp, gated_rows(c_live, s.w_c, s.w_sp, chosen));
    for (const auto& ch : chosen) {
      live[ch.position] = 0.0;
      const int kind = static_cast<int>(kinds[ch.index]);
      trace.assignment[ch.position] = kind;
      trace.picks.push_back({it, ch.position, kind, ch.anchor});
    }
    if (options.keep_probabilities) trace.probabilities.push_back(std::move(s.m_prob));
  }
  check_finite(sp, "patch_adapt output");
  res.sp = sp;
  return res;
}

AdaptResult PatchAdapter::random_select(const std::vector<ConditionInput>& conditions,
                                        Rng& rng) const {
  const std::size_t m = cfg_.m(), n_p = cfg_.picks_per_step(), d = cfg_.d;
  NoGradGuard guard;
  AdaptResult res;
  res.encoded = encode_all(conditions);
  const std::size_t n = conditions.size();
  std::vector<double> sp(m * d);
  auto& trace = res.trace;
  trace.m = m;
  trace.n_p = n_p;
  trace.assignment.assign(m, -1);
  for (std::size_t pos = 0; pos < m; ++pos) {
    const std::size_t k = n == 1 ? 0 : static_cast<std::size_t>(rng() % n);
    const auto row = res.encoded[k].data().subspan(pos * d, d);
    std::copy(row.begin(), row.end(), sp.begin() + static_cast<std::ptrdiff_t>(pos * d));
    const int kind = static_cast<int>(conditions[k].kind);
    trace.assignment[pos] = kind;
    trace.picks.push_back({pos / n_p, pos, kind, 0.0});
  }
  res.sp = Tensor({m, d}, std::move(sp));
  return res;
}

RgbImage trace_to_colormap(const SelectionTrace& trace, std::size_t cell_px) {
  validate_trace(trace);
  const auto grid = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(trace.m))));
  if (grid * grid != trace.m) throw std::logic_error("trace_to_colormap: non-square grid");
  RgbImage img;
  img.width = img.height = grid * cell_px;
  img.pixels.resize(img.width * img.height * 3);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) {
      const std::size_t pos = (y / cell_px) * grid + x / cell_px;
      const auto c = synth::condition_color(static_cast<ConditionKind>(trace.assignment[pos]));
      std::copy(c.begin(), c.end(), img.pixels.begin() + static_cast<std::ptrdiff_t>((y * img.width + x) * 3));
    }
  return img;
}

void write_ppm(std::ostream& os, const RgbImage& img) {
  os << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.pixels.data()),
           static_cast<std::streamsize>(img.pixels.size()));
}

void SelectionTally::add(std::size_t timestep, const SelectionTrace& trace) {
  validate_trace(trace);
  auto& row = counts_.at(timestep);
  for (int a : trace.assignment) ++row[static_cast<std::size_t>(a)];
}

std::vector<std::array<double, kNumConditions>> SelectionTally::fractions() const {
  std::vector<std::array<double, kNumConditions>> out(counts_.size());
  for (std::size_t t = 0; t < counts_.size(); ++t) {
    std::uint64_t total = 0;
    for (auto c : counts_[t]) total += c;
    if (total == 0) {
      out[t].fill(0.0);
      continue;
    }
    for (std::size_t k = 0; k < kNumConditions; ++k)
      out[t][k] = static_cast<double>(counts_[t][k]) / static_cast<double>(total);
  }
  return out;
}

std::vector<std::array<double, kNumConditions>> selection_histogram(
    const std::vector<std::vector<SelectionTrace>>& traces_by_timestep) {
  SelectionTally tally(traces_by_timestep.size());
  for (std::size_t t = 0; t < traces_by_timestep.size(); ++t) {
    if (traces_by_timestep[t].empty()) throw std::logic_error("selection_histogram: empty timestep");
    for (const auto& tr : traces_by_timestep[t]) tally.add(t, tr);
  }
  return tally.fractions();
}

void write_trace_header(std::ostream& os) { os << "#format mosaic-trace 1\n"; }

void write_trace_records(std::ostream& os, std::size_t timestep, const SelectionTrace& trace) {
  const auto old = os.precision(17);
  for (const auto& p : trace.picks)
    os << "pick " << timestep << ' ' << p.iteration << ' ' << p.position << ' ' << p.condition
       << ' ' << p.score << '\n';
  os.precision(old);
}

}  // namespace mosaic::pam
