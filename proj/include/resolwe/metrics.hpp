#pragma once
// Ranking metrics over scored ground atoms. Two AUC readings are reported:
// the mean-average-true-negative-rate form, which averages, over every
// rank position r, the fraction of true negatives placed strictly after r
// (a perfect ranking does not reach 1.0 under this reading), and the
// standard Mann-Whitney statistic (fraction of positive/negative pairs
// ordered positive-first, ties counting one half), which is the one used
// for thresholded checks.

#include <algorithm>
#include <string>
#include <vector>

#include "resolwe/logic.hpp"

namespace resolwe {

struct RankedEntry {
  std::string atom;
  double score = 0;
  bool label = false;
};

/// Entries sorted by descending score, stable on ties; labels known for
/// every entry.
struct RankedPrediction {
  std::vector<RankedEntry> entries;

  void sortByScore() {
    std::stable_sort(entries.begin(), entries.end(),
                     [](const RankedEntry& a, const RankedEntry& b) { return a.score > b.score; });
  }
  void checkSorted() const {
    for (size_t i = 1; i < entries.size(); ++i)
      if (entries[i].score > entries[i - 1].score)
        throw Error("ranking not sorted by descending score");
  }
};

/// Mean over positions of precision-at-r, on one ranking.
inline double averagePrecision(const RankedPrediction& r) {
  r.checkSorted();
  if (r.entries.empty()) throw Error("averagePrecision: empty ranking");
  double sum = 0;
  long tp = 0;
  for (size_t i = 0; i < r.entries.size(); ++i) {
    if (r.entries[i].label) ++tp;
    sum += static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  return sum / static_cast<double>(r.entries.size());
}

/// MAP over a set of rankings; empty rankings are excluded with a warning.
inline double mapScore(const std::vector<RankedPrediction>& rankings,
                       std::vector<std::string>* warnings = nullptr) {
  double sum = 0;
  long used = 0;
  for (size_t i = 0; i < rankings.size(); ++i) {
    if (rankings[i].entries.empty()) {
      if (warnings) warnings->push_back("ranking " + std::to_string(i) + " empty; skipped");
      continue;
    }
    sum += averagePrecision(rankings[i]);
    ++used;
  }
  if (used == 0) throw Error("mapScore: no usable rankings");
  return sum / static_cast<double>(used);
}

/// Mean average true negative rate on one ranking; needs >= 1 negative.
inline double paperAucOne(const RankedPrediction& r) {
  r.checkSorted();
  long totalNeg = 0;
  for (const auto& e : r.entries)
    if (!e.label) ++totalNeg;
  if (totalNeg == 0) throw Error("paperAucOne: ranking has no negatives");
  double sum = 0;
  long negSeen = 0;
  for (size_t i = 0; i < r.entries.size(); ++i) {
    if (!r.entries[i].label) ++negSeen;
    sum += static_cast<double>(totalNeg - negSeen) / static_cast<double>(totalNeg);
  }
  return sum / static_cast<double>(r.entries.size());
}

/// Mann-Whitney AUC on one ranking; ties contribute one half. Needs at
/// least one entry of each class.
inline double standardAucOne(const RankedPrediction& r) {
  std::vector<std::pair<double, bool>> byScore;
  long pos = 0, neg = 0;
  for (const auto& e : r.entries) {
    byScore.emplace_back(e.score, e.label);
    e.label ? ++pos : ++neg;
  }
  if (pos == 0 || neg == 0) throw Error("standardAucOne: needs both classes");
  std::sort(byScore.begin(), byScore.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  double u = 0;
  long negAfter = neg;
  for (size_t i = 0; i < byScore.size();) {
    size_t j = i;
    long posInGroup = 0, negInGroup = 0;
    while (j < byScore.size() && byScore[j].first == byScore[i].first) {
      byScore[j].second ? ++posInGroup : ++negInGroup;
      ++j;
    }
    negAfter -= negInGroup;
    u += static_cast<double>(posInGroup) *
         (static_cast<double>(negAfter) + 0.5 * static_cast<double>(negInGroup));
    i = j;
  }
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

struct AucScores {
  double paper = 0;
  double standard = 0;
  long paperUsed = 0;
  long standardUsed = 0;
};

inline AucScores aucScores(const std::vector<RankedPrediction>& rankings,
                           std::vector<std::string>* warnings = nullptr) {
  AucScores out;
  double paperSum = 0, stdSum = 0;
  for (size_t i = 0; i < rankings.size(); ++i) {
    const auto& r = rankings[i];
    long pos = 0, neg = 0;
    for (const auto& e : r.entries) e.label ? ++pos : ++neg;
    if (neg > 0) {
      paperSum += paperAucOne(r);
      ++out.paperUsed;
    } else if (warnings) {
      warnings->push_back("ranking " + std::to_string(i) + " has no negatives; paper AUC skipped");
    }
    if (pos > 0 && neg > 0) {
      stdSum += standardAucOne(r);
      ++out.standardUsed;
    } else if (warnings) {
      warnings->push_back("ranking " + std::to_string(i) +
                          " lacks a class; standard AUC skipped");
    }
  }
  if (out.paperUsed == 0 && out.standardUsed == 0) throw Error("aucScores: no usable rankings");
  out.paper = out.paperUsed ? paperSum / static_cast<double>(out.paperUsed) : 0;
  out.standard = out.standardUsed ? stdSum / static_cast<double>(out.standardUsed) : 0;
  return out;
}

}  // namespace resolwe
