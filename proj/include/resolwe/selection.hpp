#pragma once
// Streaming formula selection: per-subgraph joint/conditional statistics
// over the groundings picked out by a rule's evidence part, mergeable
// accumulators, thresholded selection and connective resolution.

#include <optional>
#include <vector>

#include "resolwe/logic.hpp"

namespace resolwe {

/// Statistics of one candidate on one subgraph. Counts are exact integers;
/// probabilities derive from them, so identical counts imply bit-identical
/// probabilities.
struct SubgraphStats {
  long selectedCount = 0;  // groundings selected by the evidence part
  long jointCount = 0;     // of those, all target literals true
  // Selected groundings in which every target literal but the k-th is
  // true; the matching numerator is always jointCount. Only tracked when
  // the candidate has >= 2 target literals.
  std::vector<long> condDenom;

  std::optional<double> jointProb() const {
    if (selectedCount == 0) return std::nullopt;
    return static_cast<double>(jointCount) / static_cast<double>(selectedCount);
  }
  std::optional<double> condProb(int k) const {
    if (condDenom.empty() || condDenom[k] == 0) return std::nullopt;
    return static_cast<double>(jointCount) / static_cast<double>(condDenom[k]);
  }
};

/// Evidence-part bindings are enumerated through the indexed join;
/// variables that appear only in target literals range over their type
/// domain. One statistics record per call, nothing retained from the
/// database afterwards.
inline SubgraphStats evaluateSubgraph(const ConjunctiveFormula& f, const SubgraphDatabase& db) {
  auto [evidence, target] = splitFormula(f);
  const int l = static_cast<int>(target.size());

  SubgraphStats stats;
  if (l >= 2) stats.condDenom.assign(l, 0);

  // Pre-resolve target literal argument constants once.
  struct PreparedTarget {
    const Literal* lit;
    std::vector<int> constIds;
    bool dead = false;  // mentions a constant unknown to this database
  };
  std::vector<PreparedTarget> prepared;
  for (const auto& t : target) {
    PreparedTarget p;
    p.lit = &t;
    for (const auto& term : t.args) {
      if (term.isVar()) {
        p.constIds.push_back(-1);
      } else {
        int id = db.constantId(term.symbol);
        if (id < 0) p.dead = true;
        p.constIds.push_back(id);
      }
    }
    prepared.push_back(std::move(p));
  }

  std::vector<int> extend = detail::extensionVars(f.vars().size(), evidence);
  std::vector<int> args;
  forEachBinding(db, f.vars(), evidence, extend, [&](const std::vector<int>& binding) {
    ++stats.selectedCount;
    int trueCount = 0;
    int falseIdx = -1;
    for (int k = 0; k < l; ++k) {
      const PreparedTarget& p = prepared[k];
      bool truth;
      if (p.dead) {
        truth = p.lit->negated;
      } else {
        args.resize(p.lit->args.size());
        for (size_t i = 0; i < args.size(); ++i) {
          const Term& term = p.lit->args[i];
          args[i] = term.isVar() ? binding[term.var] : p.constIds[i];
        }
        truth = db.holdsTuple(p.lit->predicate, args);
        if (p.lit->negated) truth = !truth;
      }
      if (truth)
        ++trueCount;
      else
        falseIdx = k;
    }
    if (trueCount == l) {
      ++stats.jointCount;
      if (l >= 2)
        for (auto& d : stats.condDenom) ++d;
    } else if (trueCount == l - 1 && l >= 2) {
      ++stats.condDenom[falseIdx];
    }
  });
  return stats;
}

/// Accumulator over the selection window. A statistic that was absent on a
/// subgraph (empty denominator) contributes nothing; averages run over
/// contributing subgraphs only. Field-wise sums, so merging is associative
/// and commutative.
struct FormulaStats {
  double jointSum = 0;
  long jointContrib = 0;
  std::vector<double> condSum;
  std::vector<long> condContrib;

  void absorb(const SubgraphStats& s) {
    if (auto p = s.jointProb()) {
      jointSum += *p;
      ++jointContrib;
    }
    if (!s.condDenom.empty()) {
      if (condSum.empty()) {
        condSum.assign(s.condDenom.size(), 0.0);
        condContrib.assign(s.condDenom.size(), 0);
      } else if (condSum.size() != s.condDenom.size()) {
        throw Error("mergeStats: statistics from a different candidate");
      }
    }
    for (size_t k = 0; k < s.condDenom.size(); ++k) {
      if (auto p = s.condProb(static_cast<int>(k))) {
        condSum[k] += *p;
        ++condContrib[k];
      }
    }
  }

  std::optional<double> jointAverage() const {
    if (jointContrib == 0) return std::nullopt;
    return jointSum / static_cast<double>(jointContrib);
  }
  std::optional<double> condAverage(int k) const {
    if (condContrib.empty() || condContrib[k] == 0) return std::nullopt;
    return condSum[k] / static_cast<double>(condContrib[k]);
  }
};

inline FormulaStats mergeStats(FormulaStats acc, const SubgraphStats& s) {
  acc.absorb(s);
  return acc;
}

struct SelectedFormula {
  ConjunctiveFormula source;  // conjunction-form candidate
  ConnectiveForm resolvedForm = ConnectiveForm::Conjunction;
  int consequent = -1;  // literal index within source when implication
  double score = 0;
};

/// Thresholded selection: the conjunction form is kept when the average
/// joint probability exceeds theta (strictly; a tie at theta is rejected),
/// and each implication form when the matching conditional average does. A
/// candidate may contribute several forms; one with no contributing
/// subgraphs for a statistic fails that statistic.
inline std::vector<SelectedFormula> finalizeSelection(
    const std::vector<ConjunctiveFormula>& candidates, const std::vector<FormulaStats>& stats,
    double theta) {
  if (candidates.size() != stats.size())
    throw Error("finalizeSelection: candidate/stats size mismatch");
  std::vector<SelectedFormula> out;
  for (size_t i = 0; i < candidates.size(); ++i) {
    const auto targets = candidates[i].targetIndices();
    if (auto avg = stats[i].jointAverage(); avg && *avg > theta)
      out.push_back({candidates[i], ConnectiveForm::Conjunction, -1, *avg});
    if (targets.size() >= 2) {
      for (size_t k = 0; k < targets.size(); ++k) {
        if (auto avg = stats[i].condAverage(static_cast<int>(k)); avg && *avg > theta)
          out.push_back({candidates[i], ConnectiveForm::Implication, targets[k], *avg});
      }
    }
  }
  return out;
}

enum class WeightSignHint { Neutral, Negative };

struct ResolvedFormula {
  ConjunctiveFormula formula;
  WeightSignHint hint = WeightSignHint::Neutral;
};

/// Rewrites a selected form into the conjunction that is actually trained.
/// Conjunctions pass through; an implication E ^ (Q_others => Q_k) becomes
/// E ^ Q_others ^ !Q_k with a negative-weight hint, which has the same
/// effect at inference time once the evidence part is observed.
inline ResolvedFormula resolveConnectives(const SelectedFormula& sf) {
  if (sf.resolvedForm == ConnectiveForm::Conjunction)
    return {canonicalize(sf.source), WeightSignHint::Neutral};
  std::vector<Literal> lits = sf.source.literals();
  lits[sf.consequent].negated = !lits[sf.consequent].negated;
  ConjunctiveFormula rewritten(sf.source.schemaPtr(), sf.source.vars(), std::move(lits));
  return {canonicalize(rewritten), WeightSignHint::Negative};
}

}  // namespace resolwe
