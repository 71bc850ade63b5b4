#include <doctest.h>

#include <cmath>

#include "snnood/stats.hpp"
#include "snnood/errors.hpp"
#include "snnood/rng.hpp"

using namespace snnood;

namespace {

VecD diffs_with_counts(int left, int rope_n, int right, double rope) {
  VecD d(left + rope_n + right);
  Eigen::Index i = 0;
  for (int k = 0; k < left; ++k) d[i++] = -rope - 0.5 - k * 0.01;
  for (int k = 0; k < rope_n; ++k) d[i++] = 0.0;
  for (int k = 0; k < right; ++k) d[i++] = rope + 0.5 + k * 0.01;
  return d;
}

}  // namespace

TEST_CASE("one-sided differences put the mass on one region") {
  const VecD d = diffs_with_counts(0, 0, 24, 0.01);
  const auto res = bayesian_sign_test(d, 0.01, 100000, 1);
  CHECK(res.p_right > 0.99);
  CHECK(res.p_left + res.p_rope + res.p_right ==
        doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("all-zero differences land in the rope") {
  const VecD d = VecD::Zero(24);
  const auto res = bayesian_sign_test(d, 0.01, 100000, 2);
  CHECK(res.p_rope > 0.99);
}

TEST_CASE("rope boundaries are inclusive") {
  VecD d(4);
  d << 0.01, -0.01, 0.005, -0.005;  // all inside +-rope
  const auto res = bayesian_sign_test(d, 0.01, 100000, 3);
  CHECK(res.p_rope > 0.9);
}

TEST_CASE("mixed counts agree with an independent Monte Carlo oracle") {
  const VecD d = diffs_with_counts(4, 2, 18, 0.01);
  const auto a = bayesian_sign_test(d, 0.01, 100000, 11);
  const auto b = bayesian_sign_test(d, 0.01, 100000, 2222);  // second seed
  CHECK(std::abs(a.p_right - b.p_right) <= 0.02);
  CHECK(std::abs(a.p_left - b.p_left) <= 0.02);
  CHECK(a.p_right > 0.9);  // 18 of 24 beyond the rope
}

TEST_CASE("sign test is deterministic per seed") {
  const VecD d = diffs_with_counts(5, 5, 14, 0.01);
  const auto a = bayesian_sign_test(d, 0.01, 50000, 42);
  const auto b = bayesian_sign_test(d, 0.01, 50000, 42);
  CHECK(a.p_left == b.p_left);
  CHECK(a.p_rope == b.p_rope);
  CHECK(a.p_right == b.p_right);
}

TEST_CASE("sign test argument validation") {
  CHECK_THROWS_AS(bayesian_sign_test(VecD(), 0.01, 10000, 1), ArgumentError);
  CHECK_THROWS_AS(bayesian_sign_test(VecD::Zero(3), -0.1, 10000, 1),
                  ArgumentError);
  CHECK_THROWS_AS(bayesian_sign_test(VecD::Zero(3), 0.01, 999, 1),
                  ArgumentError);
}

namespace {

ComparisonTable table_from(const MatD& auroc) {
  ComparisonTable t;
  t.auroc = auroc;
  for (Eigen::Index r = 0; r < auroc.rows(); ++r)
    t.rows.emplace_back("id" + std::to_string(r), "ood" + std::to_string(r));
  for (Eigen::Index c = 0; c < auroc.cols(); ++c)
    t.detectors.push_back("det" + std::to_string(c));
  return t;
}

}  // namespace

TEST_CASE("nemenyi critical distance for k=4, N=24 at alpha 0.05") {
  MatD auroc(24, 4);
  SplitMix rng(5);
  for (int i = 0; i < auroc.size(); ++i)
    auroc.data()[i] = rng.uniform(0.5, 1.0);
  const auto res = nemenyi_cd(table_from(auroc), 0.05);
  CHECK(res.critical_distance == doctest::Approx(0.9576).epsilon(1e-3));
  // Average ranks always sum to N * k(k+1)/2 / N = k(k+1)/2 per row.
  CHECK(res.avg_ranks.sum() == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("a dominant detector earns average rank one") {
  MatD auroc(10, 3);
  SplitMix rng(6);
  for (int r = 0; r < 10; ++r) {
    auroc(r, 0) = rng.uniform(0.9, 0.99);
    auroc(r, 1) = rng.uniform(0.5, 0.8);
    auroc(r, 2) = rng.uniform(0.2, 0.49);
  }
  const auto res = nemenyi_cd(table_from(auroc), 0.05);
  CHECK(res.avg_ranks[0] == 1.0);
  CHECK(res.avg_ranks[1] == 2.0);
  CHECK(res.avg_ranks[2] == 3.0);
}

TEST_CASE("identical columns tie-average their ranks") {
  MatD auroc(6, 3);
  SplitMix rng(7);
  for (int r = 0; r < 6; ++r) {
    const double v = rng.uniform(0.6, 0.9);
    auroc(r, 0) = v;
    auroc(r, 1) = v;
    auroc(r, 2) = 0.1;
  }
  const auto res = nemenyi_cd(table_from(auroc), 0.05);
  CHECK(res.avg_ranks[0] == 1.5);
  CHECK(res.avg_ranks[1] == 1.5);
  CHECK(res.avg_ranks[2] == 3.0);
}

TEST_CASE("nemenyi argument validation") {
  MatD ok(5, 3);
  ok.setConstant(0.5);
  CHECK_THROWS_AS(nemenyi_cd(table_from(ok), 0.01), ArgumentError);
  MatD one_row(1, 3);
  one_row.setConstant(0.5);
  CHECK_THROWS_AS(nemenyi_cd(table_from(one_row), 0.05), ArgumentError);
  MatD one_col(5, 1);
  one_col.setConstant(0.5);
  CHECK_THROWS_AS(nemenyi_cd(table_from(one_col), 0.05), ArgumentError);
}

TEST_CASE("alpha 0.10 uses the matching q row") {
  MatD auroc(24, 4);
  SplitMix rng(8);
  for (int i = 0; i < auroc.size(); ++i)
    auroc.data()[i] = rng.uniform(0.5, 1.0);
  const auto r05 = nemenyi_cd(table_from(auroc), 0.05);
  const auto r10 = nemenyi_cd(table_from(auroc), 0.10);
  CHECK(r10.critical_distance < r05.critical_distance);
  CHECK(r10.critical_distance ==
        doctest::Approx(2.291 * std::sqrt(20.0 / 144.0)).epsilon(1e-12));
}
