#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "resolwe/metrics.hpp"

using namespace resolwe;

namespace {

RankedPrediction ranking(std::vector<bool> labels) {
  RankedPrediction r;
  double score = static_cast<double>(labels.size());
  for (bool l : labels) r.entries.push_back({"x", score--, l});
  return r;
}

}  // namespace

TEST_CASE("mapScore pinned values") {
  CHECK(mapScore({ranking({true})}) == doctest::Approx(1.0));
  CHECK(mapScore({ranking({true, false})}) == doctest::Approx(0.75));
  CHECK(mapScore({ranking({false, true})}) == doctest::Approx(0.25));
  // mean over subgraphs
  CHECK(mapScore({ranking({true, false}), ranking({false, true})}) == doctest::Approx(0.5));
}

TEST_CASE("auc pinned values") {
  auto tpTn = aucScores({ranking({true, false})});
  CHECK(tpTn.paper == doctest::Approx(0.5));
  CHECK(tpTn.standard == doctest::Approx(1.0));
  auto tnTp = aucScores({ranking({false, true})});
  CHECK(tnTp.paper == doctest::Approx(0.0));
  CHECK(tnTp.standard == doctest::Approx(0.0));
}

TEST_CASE("ties contribute one half to the standard auc") {
  RankedPrediction r;
  r.entries = {{"a", 1.0, true}, {"b", 1.0, false}};
  CHECK(standardAucOne(r) == doctest::Approx(0.5));
}

TEST_CASE("exclusions and warnings") {
  std::vector<std::string> warnings;
  double map = mapScore({ranking({true}), RankedPrediction{}}, &warnings);
  CHECK(map == doctest::Approx(1.0));
  CHECK(warnings.size() == 1);

  warnings.clear();
  auto auc = aucScores({ranking({true, false}), ranking({true, true})}, &warnings);
  CHECK(auc.standardUsed == 1);
  CHECK(auc.paperUsed == 1);  // all-positive ranking has no negatives
  CHECK(warnings.size() == 2);

  CHECK_THROWS_AS(mapScore({RankedPrediction{}}), Error);
}

TEST_CASE("random rankings center at one half") {
  std::mt19937_64 rng(4242);
  auto unit = [&]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  double sum = 0;
  const int kTrials = 1000;
  for (int t = 0; t < kTrials; ++t) {
    RankedPrediction r;
    for (int i = 0; i < 100; ++i) r.entries.push_back({"x", unit(), i < 50});
    r.sortByScore();
    sum += standardAucOne(r);
  }
  CHECK(std::abs(sum / kTrials - 0.5) < 0.02);
}

TEST_CASE("rank-only dependence: positive monotone score transforms") {
  std::mt19937_64 rng(99);
  auto unit = [&]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  for (int t = 0; t < 20; ++t) {
    RankedPrediction r;
    for (int i = 0; i < 30; ++i) r.entries.push_back({"x", unit(), unit() < 0.4});
    r.sortByScore();
    RankedPrediction warped = r;
    for (auto& e : warped.entries) e.score = std::exp(3 * e.score) + 1;
    warped.sortByScore();
    CHECK(averagePrecision(r) == doctest::Approx(averagePrecision(warped)).epsilon(1e-12));
    CHECK(paperAucOne(r) == doctest::Approx(paperAucOne(warped)).epsilon(1e-12));
    CHECK(standardAucOne(r) == doctest::Approx(standardAucOne(warped)).epsilon(1e-12));
  }
}

TEST_CASE("reversal flips the standard auc") {
  std::mt19937_64 rng(321);
  auto unit = [&]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  for (int t = 0; t < 20; ++t) {
    RankedPrediction r;
    for (int i = 0; i < 25; ++i) r.entries.push_back({"x", unit(), unit() < 0.5});
    bool hasPos = false, hasNeg = false;
    for (auto& e : r.entries) (e.label ? hasPos : hasNeg) = true;
    if (!hasPos || !hasNeg) continue;
    r.sortByScore();
    RankedPrediction rev = r;
    for (auto& e : rev.entries) e.score = -e.score;
    rev.sortByScore();
    CHECK(standardAucOne(rev) == doctest::Approx(1.0 - standardAucOne(r)).epsilon(1e-12));
  }
}

TEST_CASE("all values stay in [0,1]") {
  std::mt19937_64 rng(777);
  auto unit = [&]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  for (int t = 0; t < 50; ++t) {
    RankedPrediction r;
    int n = 1 + static_cast<int>(rng() % 40);
    for (int i = 0; i < n; ++i) r.entries.push_back({"x", unit(), unit() < 0.3});
    r.sortByScore();
    double ap = averagePrecision(r);
    CHECK(ap >= 0.0);
    CHECK(ap <= 1.0);
    long neg = 0, pos = 0;
    for (auto& e : r.entries) e.label ? ++pos : ++neg;
    if (neg > 0) {
      double pa = paperAucOne(r);
      CHECK(pa >= 0.0);
      CHECK(pa <= 1.0);
    }
    if (neg > 0 && pos > 0) {
      double sa = standardAucOne(r);
      CHECK(sa >= 0.0);
      CHECK(sa <= 1.0);
    }
  }
}

TEST_CASE("unsorted input is rejected") {
  RankedPrediction r;
  r.entries = {{"a", 0.1, true}, {"b", 0.9, false}};
  CHECK_THROWS_AS(averagePrecision(r), Error);
}
