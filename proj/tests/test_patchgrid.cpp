#include <doctest.h>

#include <stdexcept>

#include "mop/patchgrid.hpp"

using mop::GridConfig;
using mop::Level;
using mop::PatchSpec;

TEST_CASE("default grid counts per level") {
  GridConfig cfg;
  CHECK(mop::grid(cfg, 0).size() == 1);    // 256 window: the global frame
  CHECK(mop::grid(cfg, 1).size() == 25);   // ((256-128)/32+1)^2
  CHECK(mop::grid(cfg, 2).size() == 49);   // ((256-64)/32+1)^2

  auto l1 = mop::grid(cfg, 0);
  CHECK(l1[0].x == 0);
  CHECK(l1[0].y == 0);
  CHECK(l1[0].side == 256);
  CHECK(l1[0].level == Level::L1);
}

TEST_CASE("grid order is row-major with y outer and positions are stride multiples") {
  GridConfig cfg;
  auto g = mop::grid(cfg, 1);
  CHECK(g[0].x == 0);
  CHECK(g[0].y == 0);
  CHECK(g[1].x == 32);
  CHECK(g[1].y == 0);
  CHECK(g[5].x == 0);
  CHECK(g[5].y == 32);
  for (const auto& p : g) {
    CHECK(p.level == Level::L2);
    CHECK(p.side == 128);
    CHECK(p.x % 32 == 0);
    CHECK(p.y % 32 == 0);
    CHECK(p.x + p.side <= cfg.frame);
    CHECK(p.y + p.side <= cfg.frame);
  }
}

TEST_CASE("grid stops at the last in-bounds position when stride does not divide") {
  GridConfig cfg;
  cfg.frame = 100;
  cfg.level_sides = {100, 33};
  cfg.stride = 32;
  auto g = mop::grid(cfg, 1);
  // floor((100-33)/32)+1 = 3 positions per axis: {0, 32, 64}; 96+33 > 100.
  CHECK(g.size() == 9);
  CHECK(g.back().x == 64);
  CHECK(g.back().y == 64);
}

TEST_CASE("grid_positions matches a brute-force count") {
  for (int frame : {64, 100, 256}) {
    for (int side : {16, 33, 64}) {
      for (int stride : {1, 7, 16, 32}) {
        if (side > frame) continue;
        int count = 0;
        for (int x = 0; x + side <= frame; x += stride) ++count;
        CHECK(mop::grid_positions(frame, side, stride) == count);
      }
    }
  }
}

TEST_CASE("grid rejects invalid configs") {
  GridConfig cfg;
  cfg.level_sides = {256, 300, 64};
  CHECK_THROWS_AS(mop::grid(cfg, 1), std::invalid_argument);
  GridConfig zero_stride;
  zero_stride.stride = 0;
  CHECK_THROWS_AS(mop::grid(zero_stride, 0), std::invalid_argument);
  GridConfig ok;
  CHECK_THROWS_AS(mop::grid(ok, 3), std::invalid_argument);  // no such level index
}

TEST_CASE("sliding window counts match the documented defaults") {
  CHECK(mop::sliding_windows(256, {224}, 16).size() == 9);
  CHECK(mop::sliding_windows(256, {256}, 16).size() == 1);
  CHECK(mop::sliding_windows(256, {224, 192, 160, 128}, 16).size() == 164);  // 9+25+49+81
}

TEST_CASE("sliding windows are ordered by side descending then row-major") {
  auto w = mop::sliding_windows(256, {128, 224}, 16);  // order given unsorted
  REQUIRE(w.size() == 90);
  CHECK(w[0].side == 224);
  CHECK(w[0].x == 0);
  CHECK(w[0].y == 0);
  CHECK(w[1].x == 16);
  CHECK(w[8].x == 32);
  CHECK(w[8].y == 32);
  CHECK(w[9].side == 128);
  for (const auto& p : w) {
    CHECK(p.x + p.side <= 256);
    CHECK(p.y + p.side <= 256);
  }
  CHECK_THROWS_AS(mop::sliding_windows(256, {300}, 16), std::invalid_argument);
  CHECK_THROWS_AS(mop::sliding_windows(256, {}, 16), std::invalid_argument);
}

TEST_CASE("level numbering round-trips and rejects out-of-range") {
  CHECK(mop::level_from_number(1) == Level::L1);
  CHECK(mop::level_from_number(2) == Level::L2);
  CHECK(mop::level_from_number(3) == Level::L3);
  CHECK(mop::level_number(Level::L3) == 3);
  CHECK_THROWS_AS(mop::level_from_number(0), std::invalid_argument);
  CHECK_THROWS_AS(mop::level_from_number(4), std::invalid_argument);
}
