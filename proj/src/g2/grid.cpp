#include "g2/grid.hpp"

#include <algorithm>
#include <numeric>

namespace g2 {

Grid::Grid(std::vector<int> coords, std::vector<int> n, std::vector<double> length,
           std::array<double, kDim> inactive_period)
    : inactive_(inactive_period) {
  if (coords.empty() || coords.size() > 3)
    throw Error(ErrorCode::InvalidArgument, "grid needs 1 to 3 active axes");
  if (n.size() != coords.size() || length.size() != coords.size())
    throw Error(ErrorCode::InvalidArgument, "grid axis lists differ in length");
  std::vector<std::size_t> order(coords.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return coords[a] < coords[b]; });
  for (std::size_t i : order) {
    if (coords[i] < 0 || coords[i] >= kDim) throw Error(ErrorCode::InvalidArgument, "axis out of range");
    if (n[i] < 4) throw Error(ErrorCode::InvalidArgument, "grid resolution must be at least 4");
    if (!(length[i] > 0.0)) throw Error(ErrorCode::InvalidArgument, "grid period must be positive");
    if (!axes_.empty() && axes_.back().coord == coords[i])
      throw Error(ErrorCode::InvalidArgument, "duplicate axis");
    axes_.push_back({coords[i], n[i], length[i]});
  }
  for (double p : inactive_)
    if (!(p > 0.0)) throw Error(ErrorCode::InvalidArgument, "inactive period must be positive");
  for (std::size_t s = 0; s < axes_.size(); ++s) slot_[axes_[s].coord] = static_cast<int>(s);
  // Row-major: the last active axis varies fastest.
  stride_.assign(axes_.size(), 1);
  for (int s = static_cast<int>(axes_.size()) - 2; s >= 0; --s)
    stride_[s] = stride_[s + 1] * static_cast<std::size_t>(axes_[s + 1].n);
  size_ = stride_[0] * static_cast<std::size_t>(axes_[0].n);
}

double Grid::cell_measure() const {
  double m = 1.0;
  for (int c = 0; c < kDim; ++c) m *= active(c) ? axes_[slot_[c]].h() : inactive_[c];
  return m;
}

double Grid::min_spacing() const {
  double h = axes_.front().h();
  for (const auto& a : axes_) h = std::min(h, a.h());
  return h;
}

double Grid::max_spacing() const {
  double h = axes_.front().h();
  for (const auto& a : axes_) h = std::max(h, a.h());
  return h;
}

bool Grid::operator==(const Grid& o) const {
  if (axes_.size() != o.axes_.size() || inactive_ != o.inactive_) return false;
  for (std::size_t i = 0; i < axes_.size(); ++i) {
    if (axes_[i].coord != o.axes_[i].coord || axes_[i].n != o.axes_[i].n ||
        axes_[i].length != o.axes_[i].length)
      return false;
  }
  return true;
}

}  // namespace g2
