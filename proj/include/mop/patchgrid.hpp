#pragma once

#include <vector>

namespace mop {

// Scale level of a patch grid. L1 is the whole normalized frame.
enum class Level : int { L1 = 1, L2 = 2, L3 = 3 };

inline int level_number(Level l) { return static_cast<int>(l); }
Level level_from_number(int n);

// One square window inside the normalized frame.
struct PatchSpec {
  Level level = Level::L1;
  int x = 0;
  int y = 0;
  int side = 0;

  bool operator==(const PatchSpec&) const = default;
};

// Geometry of the multi-scale grids: one window side per level, shared
// stride, all inside a square frame.
struct GridConfig {
  int frame = 256;
  std::vector<int> level_sides = {256, 128, 64};
  int stride = 32;

  void validate() const;
  bool operator==(const GridConfig&) const = default;
};

// Stride-grid windows for one level, row-major (y outer), starting at
// offset 0 and stopping at the last fully in-bounds position.
std::vector<PatchSpec> grid(const GridConfig& cfg, int level_index);

// Union of stride grids over several window sides, ordered by side
// descending then row-major. Emitted windows carry level L1.
std::vector<PatchSpec> sliding_windows(int frame, std::vector<int> sides, int stride);

// Number of grid positions per axis for one side: floor((frame-side)/stride)+1.
int grid_positions(int frame, int side, int stride);

}  // namespace mop
