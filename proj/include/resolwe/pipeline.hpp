#pragma once
// End-to-end pipeline: expand the grammar, select formulas on the first k2
// streamed subgraphs, add the per-target-predicate prior clause, train
// weights on the remainder, and report wall-clock time for the selection
// and training steps separately. The skipSelection baseline trains on the
// full candidate set (all connective variants) over the whole stream.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "resolwe/grammar.hpp"
#include "resolwe/metrics.hpp"
#include "resolwe/mln.hpp"
#include "resolwe/model_io.hpp"
#include "resolwe/selection.hpp"
#include "resolwe/stream.hpp"

namespace resolwe {

enum class PipelineMode { Resolwe, SkipSelection };

inline PipelineMode parsePipelineMode(const std::string& s) {
  if (s == "resolwe") return PipelineMode::Resolwe;
  if (s == "skipSelection") return PipelineMode::SkipSelection;
  throw Error("mode must be resolwe or skipSelection, got '" + s + "'");
}

struct PipelineConfig {
  std::string grammarPath;
  std::string streamPath;
  std::string outputDir;  // empty: no files written
  int k2 = 30;
  double theta = 0.4;
  PipelineMode mode = PipelineMode::Resolwe;
  LearnConfig learn;
  bool quiet = false;

  void validate() const {
    if (k2 < 1) throw Error("k2 must be >= 1");
    if (theta < 0 || theta > 1) throw Error("theta must be in [0,1]");
    learn.validate();
  }
};

struct PipelineResult {
  WeightedModel model;
  std::vector<ConjunctiveFormula> candidates;  // selection-mode candidate set
  std::vector<FormulaStats> stats;
  std::vector<SelectedFormula> selected;
  double step2Seconds = 0;  // formula selection
  double step3Seconds = 0;  // weight training
  long trainingSubgraphs = 0;
};

/// Builds the trainable model from resolved formulas, deduplicating
/// rewrites and appending prior clauses.
inline WeightedModel assembleModel(const SchemaPtr& schema,
                                   const std::vector<ResolvedFormula>& resolved) {
  WeightedModel m;
  m.schema = schema;
  std::unordered_set<std::string> seen;
  for (const auto& r : resolved) {
    if (!seen.insert(r.formula.text()).second) continue;
    m.formulas.push_back({r.formula, 0.0, r.hint, false});
  }
  m.addMissingPriorClauses();
  return m;
}

inline void writeSelectionReport(std::ostream& out,
                                 const std::vector<ConjunctiveFormula>& candidates,
                                 const std::vector<FormulaStats>& stats,
                                 const std::vector<SelectedFormula>& selected) {
  auto isSelected = [&](const ConjunctiveFormula& f, ConnectiveForm form, int consequent) {
    for (const auto& s : selected)
      if (s.source == f && s.resolvedForm == form && s.consequent == consequent) return true;
    return false;
  };
  out << "formula\tstatistic\tcontributing\taverage\tselected\n";
  for (size_t i = 0; i < candidates.size(); ++i) {
    const auto& f = candidates[i];
    const auto& st = stats[i];
    out << f.text() << "\tjoint\t" << st.jointContrib << "\t";
    if (auto a = st.jointAverage())
      out << formatDouble(*a);
    else
      out << "-";
    out << "\t" << (isSelected(f, ConnectiveForm::Conjunction, -1) ? 1 : 0) << "\n";
    auto targets = f.targetIndices();
    if (targets.size() < 2) continue;
    for (size_t k = 0; k < targets.size(); ++k) {
      out << f.text() << "\tcond:" << (k + 1) << "\t"
          << (st.condContrib.empty() ? 0 : st.condContrib[k]) << "\t";
      if (auto a = st.condAverage(static_cast<int>(k)))
        out << formatDouble(*a);
      else
        out << "-";
      out << "\t" << (isSelected(f, ConnectiveForm::Implication, targets[k]) ? 1 : 0) << "\n";
    }
  }
}

inline PipelineResult runPipeline(const PipelineConfig& cfg) {
  cfg.validate();
  using Clock = std::chrono::steady_clock;
  auto seconds = [](Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double>(b - a).count();
  };

  Grammar grammar = parseGrammarFile(cfg.grammarPath);
  PipelineResult result;
  result.model.schema = grammar.schema;

  if (cfg.mode == PipelineMode::Resolwe) {
    auto t0 = Clock::now();
    ExpansionResult expansion = expand(grammar, ExpansionMode::Selection);
    result.candidates = expansion.formulas;
    for (const auto& w : expansion.warnings)
      if (!cfg.quiet) std::cerr << "expand: " << w << "\n";

    result.stats.assign(result.candidates.size(), FormulaStats{});
    StreamReader reader(grammar.schema, cfg.streamPath);
    for (int s = 0; s < cfg.k2; ++s) {
      auto block = reader.next();
      if (!block)
        throw Error("stream exhausted after " + std::to_string(s) +
                    " subgraphs; selection needs k2=" + std::to_string(cfg.k2));
      for (size_t i = 0; i < result.candidates.size(); ++i)
        result.stats[i].absorb(evaluateSubgraph(result.candidates[i], block->db));
    }
    result.selected = finalizeSelection(result.candidates, result.stats, cfg.theta);
    std::vector<ResolvedFormula> resolved;
    for (const auto& s : result.selected) resolved.push_back(resolveConnectives(s));
    result.model = assembleModel(grammar.schema, resolved);
    result.step2Seconds = seconds(t0, Clock::now());
    if (!cfg.quiet)
      std::cerr << "selection: " << result.selected.size() << " of " << result.candidates.size()
                << " candidate forms kept\n";

    auto t1 = Clock::now();
    for (int pass = 0; pass < cfg.learn.passes; ++pass) {
      StreamReader trainReader(grammar.schema, cfg.streamPath);
      if (trainReader.skipBlocks(cfg.k2) < cfg.k2)
        throw Error("stream shrank between passes");
      uint64_t ordinal = static_cast<uint64_t>(pass) << 32;
      while (auto block = trainReader.next()) {
        result.model = cdStep(result.model, block->db, cfg.learn, ordinal++);
        if (pass == 0) ++result.trainingSubgraphs;
      }
    }
    if (result.trainingSubgraphs == 0)
      throw Error("stream has no subgraphs beyond the k2 selection window; nothing to train on");
    result.step3Seconds = seconds(t1, Clock::now());
  } else {
    auto t0 = Clock::now();
    ExpansionResult expansion = expand(grammar, ExpansionMode::AllVariants);
    for (const auto& w : expansion.warnings)
      if (!cfg.quiet) std::cerr << "expand: " << w << "\n";
    std::vector<ResolvedFormula> resolved;
    for (const auto& f : expansion.formulas) {
      SelectedFormula sf{f.withForm(ConnectiveForm::Conjunction), f.form(), f.consequent(), 0.0};
      resolved.push_back(resolveConnectives(sf));
    }
    result.model = assembleModel(grammar.schema, resolved);
    result.candidates = expansion.formulas;

    for (int pass = 0; pass < cfg.learn.passes; ++pass) {
      StreamReader trainReader(grammar.schema, cfg.streamPath);
      uint64_t ordinal = static_cast<uint64_t>(pass) << 32;
      while (auto block = trainReader.next()) {
        result.model = cdStep(result.model, block->db, cfg.learn, ordinal++);
        if (pass == 0) ++result.trainingSubgraphs;
      }
    }
    result.step3Seconds = seconds(t0, Clock::now());
  }

  if (!cfg.outputDir.empty()) {
    std::filesystem::create_directories(cfg.outputDir);
    writeModelFile(cfg.outputDir + "/model.txt", result.model, cfg.learn);
    if (cfg.mode == PipelineMode::Resolwe) {
      std::ofstream sel(cfg.outputDir + "/selection.tsv");
      writeSelectionReport(sel, result.candidates, result.stats, result.selected);
    }
    std::ofstream timings(cfg.outputDir + "/timings.tsv");
    timings << "mode\t"
            << (cfg.mode == PipelineMode::Resolwe ? "resolwe" : "skipSelection") << "\n";
    timings << "selection_seconds\t" << formatDouble(result.step2Seconds) << "\n";
    timings << "training_seconds\t" << formatDouble(result.step3Seconds) << "\n";
    timings << "total_seconds\t" << formatDouble(result.step2Seconds + result.step3Seconds)
            << "\n";
    timings << "model_formulas\t" << result.model.formulas.size() << "\n";
    timings << "training_subgraphs\t" << result.trainingSubgraphs << "\n";
  }
  return result;
}

struct EvalResult {
  std::vector<RankedPrediction> rankings;
  double map = 0;
  AucScores auc;
  std::vector<std::string> warnings;
};

/// Runs prediction over every block carrying a ?hide directive and scores
/// the rankings. The hidden predicates' listed atoms provide the labels.
inline EvalResult evaluateStream(const WeightedModel& model, const std::string& streamPath,
                                 const PredictOptions& opts = {}) {
  EvalResult out;
  StreamReader reader(model.schema, streamPath);
  long ordinal = 0;
  while (auto block = reader.next()) {
    if (!block->hiddenPredicates.empty()) {
      std::vector<GroundAtom> hidden;
      for (int p : block->hiddenPredicates) {
        auto g = targetGroundings(block->db, p);
        hidden.insert(hidden.end(), g.begin(), g.end());
      }
      PredictOptions perBlock = opts;
      perBlock.seed = detail::splitmix64(opts.seed ^ static_cast<uint64_t>(ordinal));
      out.rankings.push_back(predict(model, block->db, hidden, perBlock));
    }
    ++ordinal;
  }
  if (out.rankings.empty()) throw Error("evaluateStream: no ?hide blocks in stream");
  out.map = mapScore(out.rankings, &out.warnings);
  out.auc = aucScores(out.rankings, &out.warnings);
  return out;
}

inline void writeEvalReport(std::ostream& out, const EvalResult& r) {
  out << "subgraph\tentries\tpositives\tmap\tauc_paper\tauc_standard\n";
  for (size_t i = 0; i < r.rankings.size(); ++i) {
    const auto& rk = r.rankings[i];
    long pos = 0;
    for (const auto& e : rk.entries)
      if (e.label) ++pos;
    out << i << "\t" << rk.entries.size() << "\t" << pos << "\t";
    out << (rk.entries.empty() ? "-" : formatDouble(averagePrecision(rk))) << "\t";
    long neg = static_cast<long>(rk.entries.size()) - pos;
    out << (neg > 0 ? formatDouble(paperAucOne(rk)) : "-") << "\t";
    out << (pos > 0 && neg > 0 ? formatDouble(standardAucOne(rk)) : "-") << "\n";
  }
  out << "aggregate\t-\t-\t" << formatDouble(r.map) << "\t" << formatDouble(r.auc.paper) << "\t"
      << formatDouble(r.auc.standard) << "\n";
}

}  // namespace resolwe
