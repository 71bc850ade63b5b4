#include <doctest.h>

#include <set>

#include "snnood/clustering.hpp"
#include "snnood/errors.hpp"
#include "snnood/rng.hpp"

using namespace snnood;

TEST_CASE("l1 distance") {
  VecD a(3), b(3);
  a << 1, 2, 3;
  b << 4, 0, 3;
  CHECK(l1_distance(a, b) == 5.0);
  CHECK(l1_distance(a, a) == 0.0);
}

TEST_CASE("identical vectors collapse to one cluster") {
  MatD pts = MatD::Constant(5, 30, 7.0);
  const auto res = agglomerative_cluster(pts, 10);
  CHECK(res.k == 1);
  for (int a : res.assignment) CHECK(a == 0);
}

TEST_CASE("two tight blobs are recovered exactly") {
  MatD pts(4, 40);
  SplitMix rng(3);
  for (int i = 0; i < 40; ++i) {
    const double base = i < 20 ? 0.0 : 40.0;
    for (int d = 0; d < 4; ++d) pts(d, i) = base + rng.uniform(-0.5, 0.5);
  }
  const auto res = agglomerative_cluster(pts, 10);
  REQUIRE(res.k == 2);
  const int first = res.assignment[0];
  for (int i = 0; i < 20; ++i) CHECK(res.assignment[std::size_t(i)] == first);
  for (int i = 20; i < 40; ++i)
    CHECK(res.assignment[std::size_t(i)] == 1 - first);
}

TEST_CASE("tiny inputs default to a single cluster") {
  MatD one(3, 1);
  one.col(0) << 1, 2, 3;
  auto res = agglomerative_cluster(one, 10);
  CHECK(res.k == 1);
  CHECK(res.assignment == std::vector<int>{0});

  MatD two(3, 2);
  two.col(0) << 1, 2, 3;
  two.col(1) << 9, 9, 9;
  res = agglomerative_cluster(two, 10);
  CHECK(res.k == 1);
  CHECK(res.assignment == std::vector<int>{0, 0});
}

TEST_CASE("three well separated blobs with a generous budget") {
  MatD pts(2, 30);
  SplitMix rng(5);
  for (int i = 0; i < 30; ++i) {
    const double cx = (i % 3) * 50.0;
    pts(0, i) = cx + rng.uniform(-1.0, 1.0);
    pts(1, i) = rng.uniform(-1.0, 1.0);
  }
  const auto res = agglomerative_cluster(pts, 8);
  CHECK(res.k == 3);
  std::set<int> labels_of_blob0, labels_of_blob1, labels_of_blob2;
  for (int i = 0; i < 30; ++i) {
    if (i % 3 == 0) labels_of_blob0.insert(res.assignment[std::size_t(i)]);
    if (i % 3 == 1) labels_of_blob1.insert(res.assignment[std::size_t(i)]);
    if (i % 3 == 2) labels_of_blob2.insert(res.assignment[std::size_t(i)]);
  }
  CHECK(labels_of_blob0.size() == 1);
  CHECK(labels_of_blob1.size() == 1);
  CHECK(labels_of_blob2.size() == 1);
}

TEST_CASE("max_clusters caps the split") {
  MatD pts(2, 30);
  SplitMix rng(6);
  for (int i = 0; i < 30; ++i) {
    const double cx = (i % 3) * 50.0;
    pts(0, i) = cx + rng.uniform(-1.0, 1.0);
    pts(1, i) = rng.uniform(-1.0, 1.0);
  }
  const auto res = agglomerative_cluster(pts, 2);
  CHECK(res.k <= 2);
}

TEST_CASE("clustering argument validation") {
  MatD empty(3, 0);
  CHECK_THROWS_AS(agglomerative_cluster(empty, 5), ArgumentError);
  MatD one(3, 1);
  CHECK_THROWS_AS(agglomerative_cluster(one, 0), ArgumentError);
}
