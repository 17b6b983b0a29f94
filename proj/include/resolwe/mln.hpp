#pragma once
// Markov-logic layer over the relational core: grounding weighted rules
// against a subgraph, exact conditional inference by enumeration, Gibbs
// sampling for larger query sets, streaming contrastive-divergence weight
// updates, and per-atom prediction.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <unordered_map>
#include <vector>

#include "resolwe/logic.hpp"
#include "resolwe/metrics.hpp"
#include "resolwe/selection.hpp"

namespace resolwe {

namespace detail {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Uniform double in [0,1) with 53 bits, identical on every platform that
// ships a conforming mt19937_64.
inline double unitDraw(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace detail

struct WeightedFormula {
  ConjunctiveFormula formula;
  double weight = 0;
  WeightSignHint hint = WeightSignHint::Neutral;
  bool isPrior = false;  // the standard single-literal bias clause
};

/// Selected formulas with real-valued weights, plus one single-literal
/// prior clause per target predicate.
struct WeightedModel {
  SchemaPtr schema;
  std::vector<WeightedFormula> formulas;

  static ConjunctiveFormula priorClause(const SchemaPtr& schema, int targetPred) {
    const PredicateSchema& ps = schema->predicate(targetPred);
    std::vector<FormulaVar> vars;
    Literal lit;
    lit.predicate = targetPred;
    for (int a = 0; a < ps.arity(); ++a) {
      vars.push_back({"v" + std::to_string(a + 1), ps.argTypes[a]});
      lit.args.push_back(Term::variable(a));
    }
    return ConjunctiveFormula(schema, std::move(vars), {std::move(lit)});
  }

  // Appends the bias clause for every target predicate that lacks one; an
  // existing identical formula is marked instead of duplicated.
  void addMissingPriorClauses() {
    for (int p : schema->targetPredicates()) {
      ConjunctiveFormula prior = priorClause(schema, p);
      std::string key = canonicalize(prior).text();
      bool found = false;
      for (auto& wf : formulas) {
        if (wf.formula.form() == ConnectiveForm::Conjunction &&
            canonicalize(wf.formula).text() == key) {
          wf.isPrior = true;
          found = true;
          break;
        }
      }
      if (!found) formulas.push_back({std::move(prior), 0.0, WeightSignHint::Neutral, true});
    }
  }

  std::vector<double> weights() const {
    std::vector<double> w;
    w.reserve(formulas.size());
    for (const auto& f : formulas) w.push_back(f.weight);
    return w;
  }
};

struct LearnConfig {
  double learningRate = 0.01;
  double gaussianPriorVariance = 100.0;
  int cdChainLength = 1;
  int passes = 1;
  uint64_t rngSeed = 0;

  void validate() const {
    if (learningRate <= 0) throw Error("learningRate must be > 0");
    if (gaussianPriorVariance <= 0) throw Error("gaussianPriorVariance must be > 0");
    if (cdChainLength < 1) throw Error("cdChainLength must be >= 1");
    if (passes < 1) throw Error("passes must be >= 1");
  }
};

/// One formula grounding reduced by the observed evidence: a conjunction
/// over query atoms (required truth value per atom), optionally negated as
/// a whole for implication-form rules, with a multiplicity for identical
/// reductions.
struct GroundFeature {
  std::vector<std::pair<int, bool>> cond;  // (query atom index, required truth)
  bool negatedConjunction = false;
  long count = 0;

  bool value(const std::vector<char>& state) const {
    bool conj = true;
    for (auto [atom, req] : cond) {
      if ((state[atom] != 0) != req) {
        conj = false;
        break;
      }
    }
    return negatedConjunction ? !conj : conj;
  }
};

struct GroundNetwork {
  std::vector<GroundAtom> queryAtoms;
  std::unordered_map<GroundAtom, int, GroundAtomHash> atomIndex;
  std::vector<std::vector<GroundFeature>> features;       // per formula
  std::vector<long> evidenceCounts;                       // per formula, fully determined true
  std::vector<std::vector<std::pair<int, int>>> incident; // per atom: (formula, feature)

  long trueCount(int formulaIdx, const std::vector<char>& state) const {
    long n = evidenceCounts[formulaIdx];
    for (const auto& f : features[formulaIdx])
      if (f.value(state)) n += f.count;
    return n;
  }

  double score(const std::vector<double>& weights, const std::vector<char>& state) const {
    double s = 0;
    for (size_t j = 0; j < features.size(); ++j)
      s += weights[j] * static_cast<double>(trueCount(static_cast<int>(j), state));
    return s;
  }

  // Score difference between state with atom true and with atom false,
  // touching only incident features.
  double flipDelta(const std::vector<double>& weights, std::vector<char>& state,
                   int atom) const {
    double delta = 0;
    char saved = state[atom];
    for (auto [j, fIdx] : incident[atom]) {
      const GroundFeature& f = features[j][fIdx];
      state[atom] = 1;
      bool vTrue = f.value(state);
      state[atom] = 0;
      bool vFalse = f.value(state);
      delta += weights[j] * static_cast<double>(f.count) *
               (static_cast<double>(vTrue) - static_cast<double>(vFalse));
    }
    state[atom] = saved;
    return delta;
  }
};

namespace detail {

enum class FoldOutcome { AlwaysFalse, AlwaysTrue, Pattern };

// Reduces a list of ground target literals against the evidence: literals
// over hidden atoms become pattern entries, the rest are decided by the
// closed-world database.
struct LiteralFolder {
  const SubgraphDatabase& db;
  const std::unordered_map<GroundAtom, int, GroundAtomHash>& hiddenIdx;

  FoldOutcome fold(const std::vector<std::pair<const Literal*, std::vector<int>>>& groundLits,
                   std::vector<std::pair<int, bool>>& pattern) const {
    pattern.clear();
    for (const auto& [lit, args] : groundLits) {
      GroundAtom atom{lit->predicate, args};
      auto it = hiddenIdx.find(atom);
      if (it == hiddenIdx.end()) {
        bool truth = db.holdsAtom(atom);
        if (lit->negated) truth = !truth;
        if (!truth) return FoldOutcome::AlwaysFalse;
        continue;
      }
      bool req = !lit->negated;
      bool dup = false;
      for (auto& [idx, r] : pattern) {
        if (idx == it->second) {
          if (r != req) return FoldOutcome::AlwaysFalse;
          dup = true;
        }
      }
      if (!dup) pattern.emplace_back(it->second, req);
    }
    return pattern.empty() ? FoldOutcome::AlwaysTrue : FoldOutcome::Pattern;
  }
};

struct PatternKey {
  bool negated;
  std::vector<std::pair<int, bool>> cond;
  bool operator==(const PatternKey& o) const {
    return negated == o.negated && cond == o.cond;
  }
};
struct PatternKeyHash {
  size_t operator()(const PatternKey& k) const {
    uint64_t h = k.negated ? 7 : 13;
    for (auto [a, r] : k.cond) {
      h ^= static_cast<uint64_t>(a * 2 + (r ? 1 : 0)) + 0x9e3779b97f4a7c15ull;
      h *= 1099511628211ull;
    }
    return static_cast<size_t>(h);
  }
};

}  // namespace detail

/// Grounds the model against one subgraph. `hidden` lists the query atoms
/// whose truth is open; any database entry for them is masked. Groundings
/// whose evidence part fails are dropped outright, groundings fully decided
/// by evidence only bump the formula's constant count.
inline GroundNetwork groundModel(const WeightedModel& m, const SubgraphDatabase& db,
                                 const std::vector<GroundAtom>& hidden) {
  GroundNetwork net;
  net.queryAtoms = hidden;
  for (size_t i = 0; i < hidden.size(); ++i) {
    const PredicateSchema& ps = db.schema().predicate(hidden[i].predicate);
    if (ps.role != PredicateRole::Target)
      throw Error("hidden atom over evidence predicate " + ps.name);
    if (!net.atomIndex.emplace(hidden[i], static_cast<int>(i)).second)
      throw Error("duplicate hidden atom " + db.atomText(hidden[i]));
  }
  net.features.resize(m.formulas.size());
  net.evidenceCounts.assign(m.formulas.size(), 0);
  net.incident.resize(hidden.size());

  detail::LiteralFolder folder{db, net.atomIndex};

  for (size_t j = 0; j < m.formulas.size(); ++j) {
    const ConjunctiveFormula& f = m.formulas[j].formula;
    auto [evidence, target] = splitFormula(f);
    const bool implication = f.form() == ConnectiveForm::Implication;
    // For implications the tracked conjunction is the "violation" pattern:
    // all non-consequent target literals as written plus the consequent
    // inverted; the feature value is its negation.
    std::vector<Literal> tracked;
    if (implication) {
      const Literal& consequentLit = f.literals()[f.consequent()];
      for (size_t i = 0; i < f.literals().size(); ++i) {
        if (!f.isTargetLiteral(static_cast<int>(i))) continue;
        if (static_cast<int>(i) == f.consequent()) continue;
        tracked.push_back(f.literals()[i]);
      }
      Literal inverted = consequentLit;
      inverted.negated = !inverted.negated;
      tracked.push_back(std::move(inverted));
    } else {
      tracked = target;
    }

    // Constants unknown to this database resolve to -1, which matches no
    // hidden or true atom, so the closed-world fold treats them correctly.
    std::vector<std::pair<const Literal*, std::vector<int>>> groundLits(tracked.size());
    std::vector<std::vector<int>> constIds(tracked.size());
    for (size_t t = 0; t < tracked.size(); ++t) {
      groundLits[t].first = &tracked[t];
      constIds[t].resize(tracked[t].args.size(), -1);
      for (size_t a = 0; a < tracked[t].args.size(); ++a) {
        if (tracked[t].args[a].isVar()) continue;
        constIds[t][a] = db.constantId(tracked[t].args[a].symbol);
      }
    }

    std::unordered_map<detail::PatternKey, long, detail::PatternKeyHash> dedup;
    std::vector<std::pair<int, bool>> pattern;
    std::vector<int> extend = detail::extensionVars(f.vars().size(), evidence);
    forEachBinding(db, f.vars(), evidence, extend, [&](const std::vector<int>& binding) {
      for (size_t t = 0; t < tracked.size(); ++t) {
        auto& args = groundLits[t].second;
        args.resize(tracked[t].args.size());
        for (size_t a = 0; a < args.size(); ++a) {
          const Term& term = tracked[t].args[a];
          args[a] = term.isVar() ? binding[term.var] : constIds[t][a];
        }
      }
      detail::FoldOutcome out = folder.fold(groundLits, pattern);
      if (implication) {
        // feature = !(violation conjunction)
        if (out == detail::FoldOutcome::AlwaysFalse)
          ++net.evidenceCounts[j];
        else if (out == detail::FoldOutcome::Pattern)
          ++dedup[detail::PatternKey{true, pattern}];
        // AlwaysTrue: the implication grounding is violated for sure; 0.
      } else {
        if (out == detail::FoldOutcome::AlwaysTrue)
          ++net.evidenceCounts[j];
        else if (out == detail::FoldOutcome::Pattern)
          ++dedup[detail::PatternKey{false, pattern}];
      }
    });

    for (auto& [key, count] : dedup) {
      GroundFeature gf;
      gf.cond = key.cond;
      gf.negatedConjunction = key.negated;
      gf.count = count;
      int fIdx = static_cast<int>(net.features[j].size());
      for (auto [atom, req] : gf.cond)
        net.incident[atom].emplace_back(static_cast<int>(j), fIdx);
      net.features[j].push_back(std::move(gf));
    }
  }
  return net;
}

/// n_i: true groundings of `f` when hidden atoms take `state` and the rest
/// of the database is closed-world.
inline long trueGroundingCount(const ConjunctiveFormula& f, const SubgraphDatabase& db,
                               const std::vector<GroundAtom>& hidden,
                               const std::vector<char>& state) {
  WeightedModel one{db.schemaPtr(), {{f, 0.0, WeightSignHint::Neutral, false}}};
  GroundNetwork net = groundModel(one, db, hidden);
  return net.trueCount(0, state);
}

inline constexpr int kExactEnumerationLimit = 20;

namespace detail {

template <class Fn>
void forEachAssignment(size_t h, Fn&& fn) {
  std::vector<char> state(h, 0);
  uint64_t total = uint64_t{1} << h;
  for (uint64_t mask = 0; mask < total; ++mask) {
    for (size_t i = 0; i < h; ++i) state[i] = static_cast<char>((mask >> i) & 1);
    fn(state);
  }
}

}  // namespace detail

/// Exact conditional marginals by summing exp(sum_i w_i n_i) over all 2^h
/// assignments. Refuses query sets past the enumeration bound.
inline std::vector<double> exactConditional(const GroundNetwork& net,
                                            const std::vector<double>& weights) {
  const size_t h = net.queryAtoms.size();
  if (h > kExactEnumerationLimit)
    throw Error("exactConditional: " + std::to_string(h) + " hidden atoms exceeds the 2^" +
                std::to_string(kExactEnumerationLimit) + " enumeration bound");
  double maxScore = -std::numeric_limits<double>::infinity();
  detail::forEachAssignment(h, [&](const std::vector<char>& state) {
    maxScore = std::max(maxScore, net.score(weights, state));
  });
  double z = 0;
  std::vector<double> marginals(h, 0);
  detail::forEachAssignment(h, [&](const std::vector<char>& state) {
    double p = std::exp(net.score(weights, state) - maxScore);
    z += p;
    for (size_t i = 0; i < h; ++i)
      if (state[i]) marginals[i] += p;
  });
  for (auto& v : marginals) v /= z;
  return marginals;
}

inline std::vector<double> exactConditional(const WeightedModel& m, const SubgraphDatabase& db,
                                            const std::vector<GroundAtom>& hidden) {
  return exactConditional(groundModel(m, db, hidden), m.weights());
}

/// E[n_i] under the exact conditional distribution; the model expectation
/// side of the likelihood gradient.
inline std::vector<double> exactExpectedCounts(const GroundNetwork& net,
                                               const std::vector<double>& weights) {
  const size_t h = net.queryAtoms.size();
  if (h > kExactEnumerationLimit) throw Error("exactExpectedCounts: enumeration bound exceeded");
  double maxScore = -std::numeric_limits<double>::infinity();
  detail::forEachAssignment(h, [&](const std::vector<char>& state) {
    maxScore = std::max(maxScore, net.score(weights, state));
  });
  double z = 0;
  std::vector<double> expected(net.features.size(), 0);
  detail::forEachAssignment(h, [&](const std::vector<char>& state) {
    double p = std::exp(net.score(weights, state) - maxScore);
    z += p;
    for (size_t j = 0; j < net.features.size(); ++j)
      expected[j] += p * static_cast<double>(net.trueCount(static_cast<int>(j), state));
  });
  for (auto& v : expected) v /= z;
  return expected;
}

/// log P(state | evidence) under the model, by exact enumeration.
inline double logConditionalLikelihood(const GroundNetwork& net,
                                       const std::vector<double>& weights,
                                       const std::vector<char>& state) {
  const size_t h = net.queryAtoms.size();
  if (h > kExactEnumerationLimit)
    throw Error("logConditionalLikelihood: enumeration bound exceeded");
  double maxScore = -std::numeric_limits<double>::infinity();
  detail::forEachAssignment(h, [&](const std::vector<char>& s) {
    maxScore = std::max(maxScore, net.score(weights, s));
  });
  double z = 0;
  detail::forEachAssignment(h, [&](const std::vector<char>& s) {
    z += std::exp(net.score(weights, s) - maxScore);
  });
  return net.score(weights, state) - (maxScore + std::log(z));
}

/// Single-site Gibbs sweeps over the query atoms. Marginals are
/// Rao-Blackwellized (the per-site conditional probability is tallied
/// rather than the sampled bit). Deterministic given the seed.
inline std::vector<double> gibbsConditional(const GroundNetwork& net,
                                            const std::vector<double>& weights, int burnIn,
                                            int samples, uint64_t seed,
                                            std::vector<char>* initialState = nullptr) {
  const size_t h = net.queryAtoms.size();
  if (h == 0) throw Error("gibbsConditional: empty query set");
  if (samples < 1) throw Error("gibbsConditional: needs at least one sample sweep");
  std::mt19937_64 rng(detail::splitmix64(seed));
  std::vector<char> state = initialState ? *initialState : std::vector<char>(h, 0);
  std::vector<double> tally(h, 0);
  for (int sweep = 0; sweep < burnIn + samples; ++sweep) {
    for (size_t a = 0; a < h; ++a) {
      double delta = net.flipDelta(weights, state, static_cast<int>(a));
      double pTrue = 1.0 / (1.0 + std::exp(-delta));
      state[a] = detail::unitDraw(rng) < pTrue ? 1 : 0;
      if (sweep >= burnIn) tally[a] += pTrue;
    }
  }
  for (auto& v : tally) v /= static_cast<double>(samples);
  if (initialState) *initialState = state;
  return tally;
}

inline std::vector<double> gibbsConditional(const WeightedModel& m, const SubgraphDatabase& db,
                                            const std::vector<GroundAtom>& hidden, int burnIn,
                                            int samples, uint64_t seed) {
  return gibbsConditional(groundModel(m, db, hidden), m.weights(), burnIn, samples, seed);
}

/// All type-consistent groundings of one target predicate over the
/// subgraph's constants, in canonical (argument-lexicographic) order.
inline std::vector<GroundAtom> targetGroundings(const SubgraphDatabase& db, int pred) {
  const PredicateSchema& ps = db.schema().predicate(pred);
  std::vector<std::vector<int>> domains;
  for (int t : ps.argTypes) {
    domains.push_back(db.constantsOfType(t));
    std::sort(domains.back().begin(), domains.back().end());
  }
  std::vector<GroundAtom> out;
  std::vector<int> idx(ps.arity(), 0);
  for (const auto& d : domains)
    if (d.empty()) return out;
  while (true) {
    GroundAtom a;
    a.predicate = pred;
    for (int i = 0; i < ps.arity(); ++i) a.args.push_back(domains[i][idx[i]]);
    out.push_back(std::move(a));
    int i = ps.arity() - 1;
    for (; i >= 0; --i) {
      if (++idx[i] < static_cast<int>(domains[i].size())) break;
      idx[i] = 0;
    }
    if (i < 0) break;
  }
  return out;
}

inline std::vector<GroundAtom> allTargetGroundings(const SubgraphDatabase& db) {
  std::vector<GroundAtom> out;
  for (int p : db.schema().targetPredicates()) {
    auto g = targetGroundings(db, p);
    out.insert(out.end(), g.begin(), g.end());
  }
  return out;
}

/// One streaming contrastive-divergence update on a fully observed
/// subgraph: the gradient is data counts minus counts after cdChainLength
/// Gibbs sweeps started from the data state, with a Gaussian penalty
/// pulling weights to zero.
inline WeightedModel cdStep(WeightedModel m, const SubgraphDatabase& db, const LearnConfig& cfg,
                            uint64_t subgraphOrdinal = 0) {
  cfg.validate();
  std::vector<GroundAtom> hidden = allTargetGroundings(db);
  if (hidden.empty()) return m;
  GroundNetwork net = groundModel(m, db, hidden);

  std::vector<char> dataState(hidden.size());
  for (size_t i = 0; i < hidden.size(); ++i)
    dataState[i] = db.holdsAtom(hidden[i]) ? 1 : 0;

  std::vector<double> weights = m.weights();
  std::vector<char> sampleState = dataState;
  std::mt19937_64 rng(detail::splitmix64(cfg.rngSeed ^ detail::splitmix64(subgraphOrdinal)));
  for (int sweep = 0; sweep < cfg.cdChainLength; ++sweep) {
    for (size_t a = 0; a < hidden.size(); ++a) {
      double delta = net.flipDelta(weights, sampleState, static_cast<int>(a));
      double pTrue = 1.0 / (1.0 + std::exp(-delta));
      sampleState[a] = detail::unitDraw(rng) < pTrue ? 1 : 0;
    }
  }

  for (size_t j = 0; j < m.formulas.size(); ++j) {
    double gradient =
        static_cast<double>(net.trueCount(static_cast<int>(j), dataState)) -
        static_cast<double>(net.trueCount(static_cast<int>(j), sampleState));
    m.formulas[j].weight +=
        cfg.learningRate * (gradient - m.formulas[j].weight / cfg.gaussianPriorVariance);
  }
  return m;
}

struct PredictOptions {
  int exactLimit = kExactEnumerationLimit;
  int burnIn = 500;
  int samples = 2000;
  uint64_t seed = 0;
};

/// Scores every hidden atom with its conditional marginal (exact when the
/// query set is small enough, Gibbs otherwise) and returns the ranking,
/// descending by score with stable ties. Labels are read from the database,
/// which holds the ground truth; the atoms' own entries are masked during
/// inference.
inline RankedPrediction predict(const WeightedModel& m, const SubgraphDatabase& db,
                                const std::vector<GroundAtom>& hidden,
                                const PredictOptions& opts = {}) {
  RankedPrediction out;
  if (hidden.empty()) return out;
  GroundNetwork net = groundModel(m, db, hidden);
  std::vector<double> weights = m.weights();
  std::vector<double> scores =
      static_cast<int>(hidden.size()) <= opts.exactLimit
          ? exactConditional(net, weights)
          : gibbsConditional(net, weights, opts.burnIn, opts.samples, opts.seed);
  out.entries.reserve(hidden.size());
  for (size_t i = 0; i < hidden.size(); ++i)
    out.entries.push_back({db.atomText(hidden[i]), scores[i], db.holdsAtom(hidden[i])});
  out.sortByScore();
  return out;
}

}  // namespace resolwe
