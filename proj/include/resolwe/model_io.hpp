#pragma once
// Model file format: a self-contained text file with the schema, the
// learning configuration it was trained under, and one line per formula
// with a round-trippable double-precision weight.
//
//   resolwe-model v1
//   schema <hex>
//   learning_rate <g> / prior_variance <g> / cd_chain <n> / passes <n> / seed <n>
//   predicate name(type,...) evidence|target
//   formula<TAB><weight><TAB>neutral|negative|prior<TAB><canonical text>

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "resolwe/grammar.hpp"
#include "resolwe/mln.hpp"

namespace resolwe {

inline std::string formatDouble(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void writeModel(std::ostream& out, const WeightedModel& m, const LearnConfig& cfg) {
  char hex[32];
  std::snprintf(hex, sizeof hex, "%016" PRIx64, m.schema->hash());
  out << "resolwe-model v1\n";
  out << "schema " << hex << "\n";
  out << "learning_rate " << formatDouble(cfg.learningRate) << "\n";
  out << "prior_variance " << formatDouble(cfg.gaussianPriorVariance) << "\n";
  out << "cd_chain " << cfg.cdChainLength << "\n";
  out << "passes " << cfg.passes << "\n";
  out << "seed " << cfg.rngSeed << "\n";
  for (int p = 0; p < m.schema->predicateCount(); ++p) {
    const auto& ps = m.schema->predicate(p);
    out << "predicate " << ps.name << "(";
    for (size_t i = 0; i < ps.argTypes.size(); ++i)
      out << (i ? "," : "") << m.schema->typeName(ps.argTypes[i]);
    out << (ps.role == PredicateRole::Target ? ") target\n" : ") evidence\n");
  }
  for (const auto& wf : m.formulas) {
    const char* tag = wf.isPrior ? "prior"
                      : wf.hint == WeightSignHint::Negative ? "negative"
                                                            : "neutral";
    out << "formula\t" << formatDouble(wf.weight) << "\t" << tag << "\t" << wf.formula.text()
        << "\n";
  }
}

struct LoadedModel {
  WeightedModel model;
  LearnConfig config;
};

inline LoadedModel readModel(std::istream& in) {
  std::string header;
  if (!std::getline(in, header) || header != "resolwe-model v1")
    throw Error("model file: bad header");

  LoadedModel out;
  std::string schemaHashHex;
  std::string grammarLines;
  std::vector<std::string> formulaLines;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "schema") {
      ls >> schemaHashHex;
    } else if (key == "learning_rate") {
      ls >> out.config.learningRate;
    } else if (key == "prior_variance") {
      ls >> out.config.gaussianPriorVariance;
    } else if (key == "cd_chain") {
      ls >> out.config.cdChainLength;
    } else if (key == "passes") {
      ls >> out.config.passes;
    } else if (key == "seed") {
      ls >> out.config.rngSeed;
    } else if (key == "predicate") {
      grammarLines += line + "\n";
    } else if (key == "formula") {
      formulaLines.push_back(line);
    } else {
      throw Error("model file: unknown line '" + line + "'");
    }
  }

  Grammar g = parseGrammar(grammarLines);
  out.model.schema = g.schema;

  char expected[32];
  std::snprintf(expected, sizeof expected, "%016" PRIx64, g.schema->hash());
  if (!schemaHashHex.empty() && schemaHashHex != expected)
    throw Error("model file: schema hash mismatch (file " + schemaHashHex + ", declarations " +
                expected + ")");

  for (const auto& fl : formulaLines) {
    // formula \t weight \t tag \t text
    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
      size_t tab = fl.find('\t', start);
      fields.push_back(tab == std::string::npos ? fl.substr(start)
                                                : fl.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 4) throw Error("model file: malformed formula line '" + fl + "'");
    WeightedFormula wf{parseFormulaText(g.schema, fields[3]), std::stod(fields[1]),
                       WeightSignHint::Neutral, false};
    if (fields[2] == "negative")
      wf.hint = WeightSignHint::Negative;
    else if (fields[2] == "prior")
      wf.isPrior = true;
    else if (fields[2] != "neutral")
      throw Error("model file: unknown weight tag '" + fields[2] + "'");
    out.model.formulas.push_back(std::move(wf));
  }
  return out;
}

inline void writeModelFile(const std::string& path, const WeightedModel& m,
                           const LearnConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write model file " + path);
  writeModel(out, m, cfg);
}

inline LoadedModel readModelFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model file " + path);
  return readModel(in);
}

}  // namespace resolwe
