#pragma once
// Synthetic subgraph streams with planted rules: evidence relations are
// sampled independently at configured densities, then each target atom is
// set true with a rule's probability wherever some planted rule's evidence
// part selects it, and at a low background rate elsewhere.

#include <map>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "resolwe/grammar.hpp"
#include "resolwe/logic.hpp"
#include "resolwe/mln.hpp"
#include "resolwe/stream.hpp"

namespace resolwe {

struct SynthPredicateSpec {
  std::string name;
  std::vector<std::string> argTypes;
  double density = 0.05;  // evidence only; ignored for targets
};

struct SynthPlantedRule {
  std::string formulaText;  // parsed against the generated schema
  double probability = 0.9;
};

struct SynthConfig {
  std::vector<std::string> types;
  std::vector<SynthPredicateSpec> evidence;
  std::vector<SynthPredicateSpec> targets;
  std::map<std::string, int> constantsPerType;
  std::vector<SynthPlantedRule> planted;
  double backgroundRate = 0.02;
  int subgraphCount = 30;
  uint64_t seed = 0;
  bool hideTargets = false;  // emit ?hide directives (test streams)

  void validate() const {
    if (types.empty() || targets.empty()) throw Error("synth: needs types and a target");
    if (subgraphCount < 1) throw Error("synth: subgraphCount must be >= 1");
    if (backgroundRate < 0 || backgroundRate > 0.2)
      throw Error("synth: backgroundRate must stay in [0, 0.2] (sparse domains)");
    for (const auto& e : evidence)
      if (e.density < 0 || e.density > 0.2)
        throw Error("synth: evidence density of " + e.name + " must stay in [0, 0.2]");
    for (const auto& p : planted)
      if (p.probability < 0 || p.probability > 1)
        throw Error("synth: planted probability out of [0,1]");
    for (const auto& [t, n] : constantsPerType)
      if (n < 1) throw Error("synth: constants for type " + t + " must be >= 1");
  }
};

inline SchemaPtr synthSchema(const SynthConfig& cfg) {
  auto sc = std::make_shared<Schema>();
  for (const auto& t : cfg.types) sc->addType(t);
  for (const auto& e : cfg.evidence) sc->addPredicate(e.name, e.argTypes, PredicateRole::Evidence);
  for (const auto& t : cfg.targets) sc->addPredicate(t.name, t.argTypes, PredicateRole::Target);
  return sc;
}

struct SynthManifest {
  std::vector<std::string> plantedFormulas;  // canonical text
  std::vector<double> plantedProbabilities;
  int subgraphCount = 0;
  uint64_t seed = 0;
};

namespace detail {

struct PlantedParsed {
  ConjunctiveFormula formula;
  std::vector<Literal> evidence;
  Literal target;
  double probability;
};

inline std::vector<PlantedParsed> parsePlanted(const SynthConfig& cfg, const SchemaPtr& schema) {
  std::vector<PlantedParsed> out;
  for (const auto& p : cfg.planted) {
    ConjunctiveFormula f = parseFormulaText(schema, p.formulaText);
    auto [evidence, target] = splitFormula(f);
    if (target.size() != 1)
      throw Error("synth: planted rule '" + p.formulaText + "' must have exactly one target literal");
    if (target[0].negated)
      throw Error("synth: planted rule target must be non-negated");
    out.push_back({f, std::move(evidence), std::move(target[0]), p.probability});
  }
  return out;
}

}  // namespace detail

/// Writes `cfg.subgraphCount` blocks to `out`. Deterministic for a given
/// config: one independent generator per subgraph ordinal.
inline SynthManifest synthGenerate(const SynthConfig& cfg, std::ostream& out) {
  cfg.validate();
  SchemaPtr schema = synthSchema(cfg);
  auto planted = detail::parsePlanted(cfg, schema);

  SynthManifest manifest;
  manifest.subgraphCount = cfg.subgraphCount;
  manifest.seed = cfg.seed;
  for (const auto& p : planted) {
    manifest.plantedFormulas.push_back(canonicalize(p.formula).text());
    manifest.plantedProbabilities.push_back(p.probability);
  }

  for (int s = 0; s < cfg.subgraphCount; ++s) {
    std::mt19937_64 rng(detail::splitmix64(cfg.seed ^ detail::splitmix64(0x5eed + s)));
    auto unit = [&]() { return detail::unitDraw(rng); };

    std::map<std::string, std::vector<std::string>> consts;
    for (const auto& t : cfg.types) {
      int n = cfg.constantsPerType.count(t) ? cfg.constantsPerType.at(t) : 5;
      for (int i = 0; i < n; ++i) consts[t].push_back(t + std::to_string(i));
    }

    SubgraphDatabase db(schema);
    // Evidence atoms, independently per tuple at the configured density.
    for (const auto& e : cfg.evidence) {
      std::vector<int> idx(e.argTypes.size(), 0);
      while (true) {
        if (unit() < e.density) {
          std::vector<std::string> args;
          for (size_t a = 0; a < e.argTypes.size(); ++a)
            args.push_back(consts[e.argTypes[a]][idx[a]]);
          db.addAtom(e.name, args);
        }
        size_t a = 0;
        for (; a < idx.size(); ++a) {
          if (++idx[a] < static_cast<int>(consts[e.argTypes[a]].size())) break;
          idx[a] = 0;
        }
        if (a == idx.size()) break;
      }
    }

    // Hot target groundings: those selected by some planted rule's
    // evidence part, found by brute-force substitution over the intended
    // constants (small domains, and independent of the join code).
    std::map<std::vector<std::string>, double> hot;  // keyed by (pred name, args...)
    for (const auto& rule : planted) {
      const auto& vars = rule.formula.vars();
      std::vector<std::string> assignment(vars.size());
      auto rec = [&](auto&& self, size_t v) -> void {
        if (v == vars.size()) {
          for (const auto& lit : rule.evidence) {
            std::vector<std::string> args;
            for (const auto& t : lit.args)
              args.push_back(t.isVar() ? assignment[t.var] : t.symbol);
            bool truth = db.holdsNamed(lit.predicate, args);
            if (lit.negated) truth = !truth;
            if (!truth) return;
          }
          std::vector<std::string> key;
          key.push_back(schema->predicate(rule.target.predicate).name);
          for (const auto& t : rule.target.args)
            key.push_back(t.isVar() ? assignment[t.var] : t.symbol);
          auto [it, inserted] = hot.emplace(std::move(key), rule.probability);
          if (!inserted) it->second = std::max(it->second, rule.probability);
          return;
        }
        for (const auto& c : consts[schema->typeName(vars[v].type)]) {
          assignment[v] = c;
          self(self, v + 1);
        }
      };
      rec(rec, 0);
    }

    // Target atoms.
    for (const auto& t : cfg.targets) {
      std::vector<int> idx(t.argTypes.size(), 0);
      while (true) {
        std::vector<std::string> key;
        key.push_back(t.name);
        std::vector<std::string> args;
        for (size_t a = 0; a < t.argTypes.size(); ++a) {
          args.push_back(consts[t.argTypes[a]][idx[a]]);
          key.push_back(args.back());
        }
        auto it = hot.find(key);
        double p = it != hot.end() ? it->second : cfg.backgroundRate;
        if (unit() < p) db.addAtom(t.name, args);
        size_t a = 0;
        for (; a < idx.size(); ++a) {
          if (++idx[a] < static_cast<int>(consts[t.argTypes[a]].size())) break;
          idx[a] = 0;
        }
        if (a == idx.size()) break;
      }
    }

    std::vector<int> hiddenPreds;
    if (cfg.hideTargets)
      for (const auto& t : cfg.targets) hiddenPreds.push_back(schema->predicateId(t.name));
    writeBlock(out, db, hiddenPreds);
  }
  return manifest;
}

/// Grammar text whose expansion covers one candidate per evidence
/// predicate, shaped like the first planted rule. Requires all evidence
/// predicates to share that rule's evidence signature.
inline std::string candidateGrammarText(const SynthConfig& cfg) {
  cfg.validate();
  SchemaPtr schema = synthSchema(cfg);
  auto planted = detail::parsePlanted(cfg, schema);
  if (planted.empty()) throw Error("candidateGrammarText: no planted rules");
  if (planted[0].evidence.size() != 1)
    throw Error("candidateGrammarText: supports single-evidence-literal rules only");
  const Literal& shape = planted[0].evidence[0];
  const PredicateSchema& shapePred = schema->predicate(shape.predicate);

  std::string g;
  for (const auto& e : cfg.evidence) {
    g += "predicate " + e.name + "(";
    for (size_t i = 0; i < e.argTypes.size(); ++i) g += (i ? "," : "") + e.argTypes[i];
    g += ") evidence\n";
  }
  for (const auto& t : cfg.targets) {
    g += "predicate " + t.name + "(";
    for (size_t i = 0; i < t.argTypes.size(); ++i) g += (i ? "," : "") + t.argTypes[i];
    g += ") target\n";
  }

  const auto& vars = planted[0].formula.vars();
  g += "placeholder REL(";
  for (size_t a = 0; a < shape.args.size(); ++a) {
    if (a) g += ",";
    g += vars[shape.args[a].var].name + ":" + schema->typeName(shapePred.argTypes[a]);
  }
  g += ") := ";
  bool first = true;
  for (const auto& e : cfg.evidence) {
    if (schema->predicate(schema->predicateId(e.name)).argTypes != shapePred.argTypes)
      throw Error("candidateGrammarText: evidence " + e.name + " does not match the rule shape");
    if (!first) g += " | ";
    first = false;
    g += e.name + "(";
    for (size_t a = 0; a < shape.args.size(); ++a)
      g += (a ? "," : "") + vars[shape.args[a].var].name;
    g += ")";
  }
  g += " [plain]\n";

  g += "template REL(";
  for (size_t a = 0; a < shape.args.size(); ++a)
    g += (a ? "," : "") + vars[shape.args[a].var].name;
  g += ") => " + schema->predicate(planted[0].target.predicate).name + "(";
  for (size_t a = 0; a < planted[0].target.args.size(); ++a)
    g += (a ? "," : "") + vars[planted[0].target.args[a].var].name;
  g += ")\n";
  return g;
}

}  // namespace resolwe
