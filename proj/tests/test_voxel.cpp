#include <cmath>
#include <random>

#include "doctest.h"
#include "nire/events.hpp"
#include "nire/ops.hpp"
#include "nire/scene.hpp"
#include "nire/voxel.hpp"

using namespace nire;
using namespace nire::sim;

namespace {

EventStream random_stream(std::uint64_t seed, int w, int h, std::size_t count, double t0 = 0.0, double t1 = 1.0) {
  std::mt19937_64 rng(seed);
  EventStream s;
  s.width = w;
  s.height = h;
  std::uniform_real_distribution<double> ut(t0, t1);
  std::uniform_int_distribution<int> ux(0, w - 1), uy(0, h - 1), up(0, 1);
  for (std::size_t i = 0; i < count; ++i) {
    s.events.push_back({ut(rng), static_cast<std::uint16_t>(ux(rng)), static_cast<std::uint16_t>(uy(rng)),
                        static_cast<std::int8_t>(up(rng) ? 1 : -1)});
  }
  std::stable_sort(s.events.begin(), s.events.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
  return s;
}

EventStream single(double t, int p = 1) {
  EventStream s;
  s.width = 2;
  s.height = 2;
  s.events = {{t, 1, 0, static_cast<std::int8_t>(p)}};
  return s;
}

}  // namespace

TEST_CASE("segment splitting") {
  auto s = random_stream(1, 8, 8, 500);
  auto one = split_segments(s, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].events == s.events);

  EventStream two;
  two.width = two.height = 4;
  two.events = {{0.1, 0, 0, 1}, {0.6, 1, 1, -1}};
  auto parts = split_segments(two, 2);
  REQUIRE(parts[0].size() == 1);
  REQUIRE(parts[1].size() == 1);
  CHECK(parts[0].events[0].t == 0.1);
  CHECK(parts[1].events[0].t == 0.6);

  EventStream edges;
  edges.width = edges.height = 4;
  edges.events = {{0.0, 0, 0, 1}, {0.25, 0, 0, 1}, {0.5, 0, 0, 1}, {1.0, 0, 0, 1}};
  auto q = split_segments(edges, 4);
  CHECK(q[0].size() == 2);  // t = 0 clamps into the first segment, t = 1/4 closes it
  CHECK(q[1].size() == 1);
  CHECK(q[2].size() == 0);
  CHECK(q[3].size() == 1);

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto r = random_stream(seed, 6, 5, 300);
    for (int m : {1, 3, 4, 7}) {
      std::size_t total = 0;
      for (const auto& part : split_segments(r, m)) {
        total += part.size();
        CHECK(part.is_valid());
      }
      CHECK(total == r.size());
    }
  }
}

TEST_CASE("voxel bilinear deposit") {
  // B = 3 over [0, 1]: t* = 2t.
  auto on_grid = voxelize(single(0.5), 3, 2, 2, 0.0, 1.0).to_vector();
  CHECK(on_grid[0 * 4 + 1] == 0.0);
  CHECK(on_grid[1 * 4 + 1] == 1.0);
  CHECK(on_grid[2 * 4 + 1] == 0.0);
  auto half = voxelize(single(0.25), 3, 2, 2, 0.0, 1.0).to_vector();
  CHECK(half[0 * 4 + 1] == 0.5);
  CHECK(half[1 * 4 + 1] == 0.5);
  auto last = voxelize(single(1.0, -1), 3, 2, 2, 0.0, 1.0).to_vector();
  CHECK(last[2 * 4 + 1] == -1.0);
  // Per-segment normalization: t = 0.75 in segment [0.5, 1] sits at t* = 1.
  auto seg = voxelize(single(0.75), 3, 2, 2, 0.5, 1.0).to_vector();
  CHECK(seg[1 * 4 + 1] == 1.0);
  CHECK_THROWS(voxelize(single(0.5), 1, 2, 2, 0.0, 1.0));
}

TEST_CASE("voxel sequence basics") {
  EventStream empty;
  empty.width = 5;
  empty.height = 3;
  auto seq = voxel_sequence(empty, 4, 5);
  REQUIRE(seq.grids.size() == 4);
  for (const auto& g : seq.grids) {
    CHECK(g.shape() == Shape{5, 3, 5});
    for (double v : g.to_vector()) CHECK(v == 0.0);
  }
  CHECK(seq.bounds[1] == std::pair<double, double>(0.25, 0.5));
  CHECK(seq.stacked().shape() == Shape{4, 5, 3, 5});
}

TEST_CASE("voxel polarity conservation per segment") {
  for (std::uint64_t seed = 0; seed < 16; ++seed) {
    auto s = random_stream(50 + seed, 9, 7, 800);
    auto seq = voxel_sequence(s, 4, 5);
    // Brute-force oracle: accumulate polarity per segment directly.
    std::vector<double> expected(4, 0.0);
    for (const auto& e : s.events) {
      int m = static_cast<int>(std::ceil(e.t * 4));
      m = std::clamp(m, 1, 4);
      expected[static_cast<std::size_t>(m - 1)] += e.p;
    }
    for (int m = 0; m < 4; ++m) CHECK(std::abs(sum(seq.grids[m]).item() - expected[m]) < 1e-9);
  }
  // Same on simulator output.
  auto scene_stream = simulate_events(random_scene(9, 16, 16));
  auto seq = voxel_sequence(scene_stream, 4, 5);
  double total = 0.0;
  for (const auto& g : seq.grids) total += sum(g).item();
  int signed_count = 0;
  for (const auto& e : scene_stream.events) signed_count += e.p;
  CHECK(std::abs(total - signed_count) < 1e-9);
}

TEST_CASE("voxel linearity over disjoint streams") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    auto a = random_stream(seed, 6, 6, 200, 0.0, 0.5);
    auto b = random_stream(seed + 100, 6, 6, 200, 0.5, 1.0);
    EventStream joined = a;
    joined.events.insert(joined.events.end(), b.events.begin(), b.events.end());
    auto sa = voxel_sequence(a, 3, 4);
    auto sb = voxel_sequence(b, 3, 4);
    auto sj = voxel_sequence(joined, 3, 4);
    for (int m = 0; m < 3; ++m) CHECK(max_abs_diff(sj.grids[m], add(sa.grids[m], sb.grids[m])) < 1e-9);
    // Interleaved (non-disjoint) unions are linear too.
    auto c = random_stream(seed + 200, 6, 6, 150);
    EventStream mixed = a;
    mixed.events.insert(mixed.events.end(), c.events.begin(), c.events.end());
    std::stable_sort(mixed.events.begin(), mixed.events.end(), [](const auto& x, const auto& y) { return x.t < y.t; });
    auto sm = voxel_sequence(mixed, 3, 4);
    auto sc = voxel_sequence(c, 3, 4);
    for (int m = 0; m < 3; ++m) CHECK(max_abs_diff(sm.grids[m], add(sa.grids[m], sc.grids[m])) < 1e-9);
  }
}

TEST_CASE("voxel translation covariance") {
  const int w = 12, h = 10, dx = 3, dy = 2;
  auto s = random_stream(77, w - dx, h - dy, 400);
  s.width = w;
  s.height = h;
  EventStream shifted = s;
  for (auto& e : shifted.events) {
    e.x = static_cast<std::uint16_t>(e.x + dx);
    e.y = static_cast<std::uint16_t>(e.y + dy);
  }
  const auto g = voxelize(s, 5, h, w, 0.0, 1.0).to_vector();
  const auto gs = voxelize(shifted, 5, h, w, 0.0, 1.0).to_vector();
  for (int b = 0; b < 5; ++b) {
    for (int y = 0; y + dy < h; ++y) {
      for (int x = 0; x + dx < w; ++x) {
        CHECK(gs[(b * h + y + dy) * w + x + dx] == g[(b * h + y) * w + x]);
      }
    }
  }
}
