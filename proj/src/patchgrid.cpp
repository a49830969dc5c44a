#include "mop/patchgrid.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace mop {

Level level_from_number(int n) {
  if (n < 1 || n > 3)
    throw std::invalid_argument("level_from_number: level must be 1, 2, or 3, got " + std::to_string(n));
  return static_cast<Level>(n);
}

void GridConfig::validate() const {
  if (frame < 1) throw std::invalid_argument("GridConfig: frame must be >= 1");
  if (stride < 1) throw std::invalid_argument("GridConfig: stride must be >= 1");
  if (level_sides.empty() || level_sides.size() > 3)
    throw std::invalid_argument("GridConfig: between 1 and 3 level sides expected");
  for (int s : level_sides)
    if (s < 1 || s > frame)
      throw std::invalid_argument("GridConfig: side " + std::to_string(s) +
                                  " outside [1, frame=" + std::to_string(frame) + "]");
}

int grid_positions(int frame, int side, int stride) {
  return (frame - side) / stride + 1;
}

namespace {

void emit_grid(int frame, int side, int stride, Level level, std::vector<PatchSpec>& out) {
  if (side > frame)
    throw std::invalid_argument("grid: side " + std::to_string(side) + " exceeds frame " +
                                std::to_string(frame));
  for (int y = 0; y + side <= frame; y += stride)
    for (int x = 0; x + side <= frame; x += stride)
      out.push_back({level, x, y, side});
}

}  // namespace

std::vector<PatchSpec> grid(const GridConfig& cfg, int level_index) {
  cfg.validate();
  if (level_index < 0 || level_index >= static_cast<int>(cfg.level_sides.size()))
    throw std::invalid_argument("grid: level index out of range");
  std::vector<PatchSpec> out;
  emit_grid(cfg.frame, cfg.level_sides[level_index], cfg.stride,
            level_from_number(level_index + 1), out);
  return out;
}

std::vector<PatchSpec> sliding_windows(int frame, std::vector<int> sides, int stride) {
  if (frame < 1 || stride < 1)
    throw std::invalid_argument("sliding_windows: frame and stride must be >= 1");
  if (sides.empty()) throw std::invalid_argument("sliding_windows: no window sides given");
  std::sort(sides.begin(), sides.end(), std::greater<int>());
  std::vector<PatchSpec> out;
  for (int side : sides) {
    if (side < 1) throw std::invalid_argument("sliding_windows: side must be >= 1");
    emit_grid(frame, side, stride, Level::L1, out);
  }
  return out;
}

}  // namespace mop
