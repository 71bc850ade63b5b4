#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "snnood/metrics.hpp"
#include "snnood/errors.hpp"
#include "snnood/rng.hpp"

using namespace snnood;

namespace {

ScoredSet make_set(std::vector<double> id_scores,
                   std::vector<double> ood_scores) {
  ScoredSet s;
  const std::size_t n = id_scores.size() + ood_scores.size();
  s.scores.resize(static_cast<Eigen::Index>(n));
  s.is_id.resize(n);
  Eigen::Index i = 0;
  for (double v : id_scores) {
    s.scores[i] = v;
    s.is_id[std::size_t(i)] = true;
    ++i;
  }
  for (double v : ood_scores) {
    s.scores[i] = v;
    s.is_id[std::size_t(i)] = false;
    ++i;
  }
  return s;
}

// ---- independent brute-force oracles ----

double auroc_oracle(const ScoredSet& s) {
  double wins = 0.0;
  long pairs = 0;
  for (Eigen::Index i = 0; i < s.scores.size(); ++i) {
    if (!s.is_id[std::size_t(i)]) continue;
    for (Eigen::Index j = 0; j < s.scores.size(); ++j) {
      if (s.is_id[std::size_t(j)]) continue;
      ++pairs;
      if (s.scores[i] < s.scores[j])
        wins += 1.0;
      else if (s.scores[i] == s.scores[j])
        wins += 0.5;
    }
  }
  return wins / double(pairs);
}

double aupr_oracle(const ScoredSet& s) {
  std::set<double> values(s.scores.data(),
                          s.scores.data() + s.scores.size());
  long n_id = 0;
  for (bool b : s.is_id) n_id += b ? 1 : 0;
  double area = 0.0, prev_recall = 0.0;
  for (double t : values) {  // ascending thresholds; positive iff score <= t
    long tp = 0, fp = 0;
    for (Eigen::Index i = 0; i < s.scores.size(); ++i) {
      if (s.scores[i] <= t) {
        if (s.is_id[std::size_t(i)])
          ++tp;
        else
          ++fp;
      }
    }
    const double recall = double(tp) / double(n_id);
    const double precision = double(tp) / double(tp + fp);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return area;
}

double fpr_oracle(const ScoredSet& s, double target) {
  std::set<double> values(s.scores.data(),
                          s.scores.data() + s.scores.size());
  long n_id = 0, n_ood = 0;
  for (bool b : s.is_id) (b ? n_id : n_ood) += 1;
  for (double t : values) {
    long tp = 0, fp = 0;
    for (Eigen::Index i = 0; i < s.scores.size(); ++i) {
      if (s.scores[i] <= t) {
        if (s.is_id[std::size_t(i)])
          ++tp;
        else
          ++fp;
      }
    }
    if (double(tp) / double(n_id) >= target) return double(fp) / double(n_ood);
  }
  return 1.0;
}

}  // namespace

TEST_CASE("auroc separations and ties") {
  CHECK(auroc(make_set({0, 0, 0}, {1, 1})) == 1.0);
  CHECK(auroc(make_set({1, 1}, {0, 0, 0})) == 0.0);
  CHECK(auroc(make_set({5, 5}, {5, 5, 5})) == 0.5);
  CHECK(auroc(make_set({1, 3}, {2, 4})) == 0.75);
}

TEST_CASE("aupr baselines") {
  CHECK(aupr(make_set({0, 0}, {1, 1})) == 1.0);
  CHECK(aupr(make_set({2, 2}, {2, 2})) == 0.5);
  const auto four = make_set({1, 3}, {2, 4});
  CHECK(aupr(four) == doctest::Approx(aupr_oracle(four)).epsilon(1e-15));
}

TEST_CASE("fpr at tpr examples") {
  CHECK(fpr_at_tpr(make_set({0, 0}, {1, 1}), 0.95) == 0.0);
  // ID scores 1..10, OoD scores 6..15, target 0.8: threshold 8, FPR 3/10.
  std::vector<double> id, ood;
  for (int i = 1; i <= 10; ++i) id.push_back(i);
  for (int i = 6; i <= 15; ++i) ood.push_back(i);
  CHECK(fpr_at_tpr(make_set(id, ood), 0.8) == doctest::Approx(0.3));
  // Identical distributions: FPR tracks the target.
  CHECK(fpr_at_tpr(make_set(id, id), 0.8) == doctest::Approx(0.8));
}

TEST_CASE("metrics equal brute-force oracles on 200 randomized sets") {
  SplitMix rng(77);
  for (int rep = 0; rep < 200; ++rep) {
    const int n_id = 1 + int(rng.below(100));
    const int n_ood = 1 + int(rng.below(100));
    std::vector<double> id(static_cast<std::size_t>(n_id), 0.0);
    std::vector<double> ood(static_cast<std::size_t>(n_ood), 0.0);
    // Small integer supports force heavy ties and duplicates.
    const int support = 1 + int(rng.below(30));
    for (auto& v : id) v = double(rng.below(std::uint64_t(support)));
    for (auto& v : ood) v = double(rng.below(std::uint64_t(support)));
    const auto s = make_set(id, ood);

    CHECK(std::abs(auroc(s) - auroc_oracle(s)) < 1e-12);
    CHECK(std::abs(aupr(s) - aupr_oracle(s)) < 1e-12);
    const double target = 0.5 + 0.5 * rng.uniform();
    CHECK(std::abs(fpr_at_tpr(s, target) - fpr_oracle(s, target)) < 1e-12);
  }
}

TEST_CASE("metrics are invariant under strictly increasing transforms") {
  SplitMix rng(78);
  std::vector<double> id(40), ood(55);
  for (auto& v : id) v = rng.uniform(-4.0, 4.0);
  for (auto& v : ood) v = rng.uniform(-3.0, 6.0);
  const auto s = make_set(id, ood);

  auto transform = [&](double (*f)(double)) {
    ScoredSet t = s;
    for (Eigen::Index i = 0; i < t.scores.size(); ++i)
      t.scores[i] = f(t.scores[i]);
    return t;
  };
  const auto exp_s = transform([](double x) { return std::exp(x); });
  const auto affine = transform([](double x) { return 3.0 * x + 11.0; });
  for (const auto* t : {&exp_s, &affine}) {
    CHECK(auroc(*t) == doctest::Approx(auroc(s)).epsilon(1e-12));
    CHECK(aupr(*t) == doctest::Approx(aupr(s)).epsilon(1e-12));
    CHECK(fpr_at_tpr(*t, 0.9) == doctest::Approx(fpr_at_tpr(s, 0.9)));
  }
}

TEST_CASE("auroc complement symmetry") {
  SplitMix rng(79);
  std::vector<double> id(30), ood(20);
  for (auto& v : id) v = double(rng.below(12));
  for (auto& v : ood) v = double(rng.below(12));
  const auto s = make_set(id, ood);
  const double a = auroc(s);

  // Swapping the class labels complements the statistic, as does negating
  // the scores. Applying both at once returns to the original value.
  ScoredSet flipped = s;
  for (auto&& b : flipped.is_id) b = !b;
  CHECK(auroc(flipped) == doctest::Approx(1.0 - a).epsilon(1e-12));

  ScoredSet negated = s;
  negated.scores = -negated.scores;
  CHECK(auroc(negated) == doctest::Approx(1.0 - a).epsilon(1e-12));

  ScoredSet both = flipped;
  both.scores = -both.scores;
  CHECK(auroc(both) == doctest::Approx(a).epsilon(1e-12));
}

TEST_CASE("metric input validation") {
  ScoredSet s;
  s.scores.resize(3);
  s.scores << 1, 2, 3;
  s.is_id = {true, true, true};
  CHECK_THROWS_AS(auroc(s), MetricError);
  s.is_id = {false, false, false};
  CHECK_THROWS_AS(aupr(s), MetricError);
  s.is_id = {true, false};
  CHECK_THROWS_AS(auroc(s), ArgumentError);
  s.is_id = {true, false, true};
  CHECK_THROWS_AS(fpr_at_tpr(s, 0.0), ArgumentError);
  CHECK_THROWS_AS(fpr_at_tpr(s, 1.5), ArgumentError);
}
