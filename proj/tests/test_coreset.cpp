#include <filesystem>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "pni/coreset.hpp"
#include "pni/random.hpp"
#include "pni/tensorio.hpp"

using namespace pni;
namespace fs = std::filesystem;

namespace {

Matrix random_points(std::size_t n, std::size_t d, std::uint64_t seed) {
  Matrix m(n, d);
  Rng rng(seed);
  for (auto& v : m.values()) v = static_cast<float>(rng.normal());
  return m;
}

std::vector<FeatureMap> random_maps(std::size_t count, std::size_t c, std::size_t h, std::size_t w,
                                    std::uint64_t seed) {
  std::vector<FeatureMap> maps;
  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    FeatureMap m(c, h, w);
    for (auto& v : m.values()) v = static_cast<float>(rng.normal());
    maps.push_back(std::move(m));
  }
  return maps;
}

}  // namespace

TEST_CASE("memory bank holds every position with provenance") {
  const auto maps = random_maps(3, 4, 2, 5, 1);
  const MemoryBank bank = build_memory_bank(maps);
  CHECK(bank.vectors.rows() == 30);
  CHECK(bank.vectors.cols() == 4);
  const auto& p = bank.provenance[17];
  for (std::size_t c = 0; c < 4; ++c) CHECK(bank.vectors(17, c) == maps[p.image](c, p.y, p.x));
  CHECK_THROWS_AS(build_memory_bank(std::vector<FeatureMap>{}), std::invalid_argument);
  std::vector<FeatureMap> mixed = {FeatureMap(2, 1, 1), FeatureMap(3, 1, 1)};
  CHECK_THROWS_AS(build_memory_bank(mixed), std::invalid_argument);
}

TEST_CASE("k-center greedy matches the brute-force oracle") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Matrix pts = random_points(100, 2, seed);
    for (std::size_t k : {1u, 5u, 10u, 25u, 100u}) {
      CAPTURE(seed);
      CAPTURE(k);
      const auto got = kcenter_greedy(pts, k, seed);
      Rng rng(seed);
      const auto first = static_cast<std::uint32_t>(rng.below(100));
      CHECK(got == oracle::kcenter(pts, k, first));
    }
  }
  const Matrix pts = random_points(50, 8, 4);
  CHECK_THROWS_AS(kcenter_greedy(pts, 0, 0), std::invalid_argument);
  CHECK_THROWS_AS(kcenter_greedy(pts, 51, 0), std::invalid_argument);
}

TEST_CASE("k-center properties") {
  const Matrix pts = random_points(200, 3, 7);
  const auto sel = kcenter_greedy(pts, 20, 7);
  CHECK(std::set<std::uint32_t>(sel.begin(), sel.end()).size() == 20);
  // Prefix of a longer run equals the shorter run.
  const auto longer = kcenter_greedy(pts, 40, 7);
  CHECK(std::equal(sel.begin(), sel.end(), longer.begin()));
  // Coverage radius never grows with more centers.
  CHECK(coverage_radius(pts, longer) <= coverage_radius(pts, sel));
  // The next greedy pick sits exactly at the coverage radius.
  const double r = coverage_radius(pts, sel);
  double to_next = 1e300;
  for (auto s : sel) to_next = std::min(to_next, std::sqrt(oracle::dist2(pts.row(longer[20]), pts.row(s), 3)));
  CHECK(to_next == doctest::Approx(r).epsilon(1e-5));

  SUBCASE("ties go to the lowest index") {
    Matrix dup(4, 1);
    dup.values() = {0.0f, 1.0f, 1.0f, -1.0f};
    CHECK(kcenter_greedy_from(dup, 3, 0) == std::vector<std::uint32_t>{0, 1, 3});
  }
  SUBCASE("projection keeps the selection size and determinism") {
    const Matrix wide = random_points(120, 32, 8);
    const auto a = kcenter_greedy(wide, 15, 3, 8);
    CHECK(a == kcenter_greedy(wide, 15, 3, 8));
    CHECK(std::set<std::uint32_t>(a.begin(), a.end()).size() == 15);
  }
}

TEST_CASE("nearest and Voronoi match exhaustive scans") {
  const Matrix set = random_points(500, 64, 11);
  const Matrix queries = random_points(200, 64, 12);
  for (std::size_t q = 0; q < queries.rows(); ++q) {
    const Neighbor nb = nearest(queries.row_span(q), set);
    CHECK(nb.index == oracle::nearest(queries.row(q), set));
    CHECK(nb.distance == doctest::Approx(std::sqrt(oracle::dist2(queries.row(q), set.row(nb.index), 64))));
  }
  std::vector<std::uint32_t> centers = kcenter_greedy(set, 40, 5);
  const auto vor = assign_voronoi(set, centers);
  Matrix cset(centers.size(), 64);
  for (std::size_t k = 0; k < centers.size(); ++k) std::copy_n(set.row(centers[k]), 64, cset.row(k));
  for (std::size_t i = 0; i < set.rows(); ++i) CHECK(vor[i] == oracle::nearest(set.row(i), cset));
  for (std::size_t k = 0; k < centers.size(); ++k) CHECK(vor[centers[k]] == k);

  Matrix tie(3, 1);
  tie.values() = {1.0f, -1.0f, 1.0f};
  const float q[] = {0.0f};
  CHECK(nearest(q, tie).index == 0);
  CHECK_THROWS_AS(nearest(q, Matrix(0, 1)), std::invalid_argument);
  const std::uint32_t bad[] = {0, 0};
  CHECK_THROWS_AS(assign_voronoi(set, bad), std::invalid_argument);
  const std::uint32_t out_of_range[] = {500};
  CHECK_THROWS_AS(assign_voronoi(set, out_of_range), std::invalid_argument);
}

TEST_CASE("coreset sizes, containment and persistence") {
  const auto maps = random_maps(4, 6, 5, 5, 21);
  const MemoryBank bank = build_memory_bank(maps);
  CoresetOptions opt;
  opt.emb_fraction = 0.25;
  opt.dist_size = 8;
  opt.seed = 5;
  const Coresets c = build_coresets(bank, opt);
  CHECK(c.emb.rows() == 25);
  CHECK(c.dist.rows() == 8);
  for (std::size_t k = 0; k < 8; ++k) {
    for (std::size_t j = 0; j < 6; ++j) CHECK(c.dist(k, j) == c.emb(c.dist_in_emb[k], j));
  }
  std::size_t members = 0;
  for (const auto& cell : c.cells) members += cell.size();
  CHECK(members == 25);

  opt.dist_size = 1000;
  CHECK(build_coresets(bank, opt).dist.rows() == 25);
  opt.emb_fraction = 1e-6;
  CHECK(build_coresets(bank, opt).emb.rows() == 1);

  const fs::path dir = fs::temp_directory_path() / "pni_test_coresets";
  fs::remove_all(dir);
  save_coresets(dir, c);
  const Coresets back = load_coresets(dir);
  CHECK(back.emb == c.emb);
  CHECK(back.dist == c.dist);
  CHECK(back.voronoi == c.voronoi);
  CHECK(back.dist_in_emb == c.dist_in_emb);
  CHECK(back.emb_bank_index == c.emb_bank_index);
  CHECK(back.emb_provenance == c.emb_provenance);
  CHECK(back.cells == c.cells);
  fs::remove(dir / "voronoi.pnix");
  CHECK_THROWS(load_coresets(dir));
}
