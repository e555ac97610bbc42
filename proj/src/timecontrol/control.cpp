#include "mosaic/timecontrol/control.hpp"

#include <algorithm>

namespace mosaic::timecontrol {

ControlNet::ControlNet(ParameterStore& store, const backbone::BackboneConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  time_ = backbone::make_time_embedder(store, "time", cfg.d);
  for (std::size_t i = 0; i < cfg.double_blocks; ++i) {
    const std::string name = "dsb" + std::to_string(i);
    dsb_.push_back(backbone::make_double_block(store, name, cfg.block(true)));
    for (auto& n : backbone::double_block_out_names(name)) zero_names_.push_back(n);
  }
  for (std::size_t i = 0; i < cfg.single_blocks; ++i) {
    const std::string name = "ssb" + std::to_string(i);
    ssb_.push_back(backbone::make_single_block(store, name, cfg.block(true)));
    for (auto& n : backbone::single_block_out_names(name)) zero_names_.push_back(n);
  }
}

ControlSignals ControlNet::forward(const Tensor& sp_out, const Tensor& y, const Tensor& o_t) const {
  const std::size_t m = cfg_.m(), d = cfg_.d;
  if (sp_out.shape() != Shape{m, d})
    throw ShapeError("control_forward: SP_out is " + shape_str(sp_out.shape()) + ", expected m x d");
  if (y.cols() != d || y.rows() == 0) throw ShapeError("control_forward: text tokens must be M x d");
  if (o_t.shape() != Shape{1, d}) throw ShapeError("control_forward: O_t must be 1 x d");

  ControlSignals out;
  Tensor img = sp_out, txt = y;
  for (const auto& b : dsb_) {
    auto r = b(img, txt, o_t);
    out.slots.push_back(r.img_delta);
    img = r.img;
    txt = r.txt;
  }
  const std::size_t nt = txt.rows();
  Tensor x = ops::concat_rows(txt, img);
  for (const auto& b : ssb_) {
    auto r = b(x, o_t);
    out.slots.push_back(ops::slice_rows(r.delta, nt, m));
    x = r.x;
  }
  return out;
}

std::size_t ControlNet::copy_from_backbone(const ParameterStore& backbone_store,
                                           ParameterStore& own) const {
  std::size_t copied = 0;
  for (const auto& e : own.entries()) {
    if (std::find(zero_names_.begin(), zero_names_.end(), e.name) != zero_names_.end()) continue;
    if (!backbone_store.contains(e.name)) continue;
    const Tensor src = backbone_store.get(e.name);
    if (src.shape() != e.tensor.shape()) throw ShapeError("copy_from_backbone: shape of " + e.name);
    auto dst = Tensor(e.tensor).mutable_data();
    std::copy(src.data().begin(), src.data().end(), dst.begin());
    ++copied;
  }
  return copied;
}

}  // namespace mosaic::timecontrol
