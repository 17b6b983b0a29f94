// Command-line front end: grammar expansion, streaming selection, weight
// learning, prediction, ranking evaluation, synthetic stream generation and
// the full pipeline.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"

#include "resolwe/resolwe.hpp"

namespace {

using nlohmann::json;

resolwe::SynthConfig synthConfigFromJson(const json& j) {
  resolwe::SynthConfig cfg;
  for (const auto& t : j.at("types")) cfg.types.push_back(t.get<std::string>());
  for (const auto& e : j.at("evidence")) {
    resolwe::SynthPredicateSpec spec;
    spec.name = e.at("name").get<std::string>();
    for (const auto& a : e.at("args")) spec.argTypes.push_back(a.get<std::string>());
    spec.density = e.value("density", 0.05);
    cfg.evidence.push_back(std::move(spec));
  }
  for (const auto& t : j.at("targets")) {
    resolwe::SynthPredicateSpec spec;
    spec.name = t.at("name").get<std::string>();
    for (const auto& a : t.at("args")) spec.argTypes.push_back(a.get<std::string>());
    cfg.targets.push_back(std::move(spec));
  }
  if (j.contains("constants"))
    for (auto it = j.at("constants").begin(); it != j.at("constants").end(); ++it)
      cfg.constantsPerType[it.key()] = it.value().get<int>();
  for (const auto& p : j.value("planted", json::array()))
    cfg.planted.push_back({p.at("formula").get<std::string>(), p.value("p", 0.9)});
  cfg.backgroundRate = j.value("background_rate", 0.02);
  cfg.subgraphCount = j.value("subgraphs", 30);
  cfg.seed = j.value("seed", 0ull);
  cfg.hideTargets = j.value("hide_targets", false);
  return cfg;
}

std::ostream& openOut(std::ofstream& file, const std::string& path) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw resolwe::Error("cannot write " + path);
  return file;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"streaming relational structure selection for Markov logic models"};
  app.require_subcommand(1);

  std::string grammarPath, streamPath, modelPath, outPath, modeName = "resolwe";
  std::string configPath, manifestPath, grammarOutPath, testStreamPath;
  int k2 = 30;
  double theta = 0.4;
  resolwe::LearnConfig learn;
  uint64_t seed = 0;
  int burnIn = 500, samples = 2000, exactLimit = resolwe::kExactEnumerationLimit;

  auto addLearnFlags = [&](CLI::App* cmd) {
    cmd->add_option("--learning-rate", learn.learningRate, "CD learning rate");
    cmd->add_option("--prior-variance", learn.gaussianPriorVariance,
                    "Gaussian weight penalty variance");
    cmd->add_option("--cd-chain", learn.cdChainLength, "Gibbs sweeps per CD update");
    cmd->add_option("--passes", learn.passes, "passes over the training stream");
  };
  auto addPredictFlags = [&](CLI::App* cmd) {
    cmd->add_option("--burn-in", burnIn, "Gibbs burn-in sweeps");
    cmd->add_option("--samples", samples, "Gibbs sample sweeps");
    cmd->add_option("--exact-limit", exactLimit, "max hidden atoms for exact inference");
  };

  auto* cmdExpand = app.add_subcommand("expand", "expand a grammar into candidate formulas");
  cmdExpand->add_option("--grammar", grammarPath, "grammar file")->required();
  cmdExpand->add_option("--mode", modeName, "resolwe|skipSelection");
  cmdExpand->add_option("--out", outPath, "output file (default stdout)");

  auto* cmdSelect = app.add_subcommand("select", "run streaming selection over k2 subgraphs");
  cmdSelect->add_option("--grammar", grammarPath, "grammar file")->required();
  cmdSelect->add_option("--stream", streamPath, "subgraph stream")->required();
  cmdSelect->add_option("--k2", k2, "subgraphs used for selection");
  cmdSelect->add_option("--theta", theta, "selection threshold");
  cmdSelect->add_option("--out", outPath, "output directory")->required();

  auto* cmdLearn = app.add_subcommand("learn", "train weights over a stream");
  cmdLearn->add_option("--model", modelPath, "input model file")->required();
  cmdLearn->add_option("--stream", streamPath, "training stream")->required();
  cmdLearn->add_option("--out", outPath, "output model file")->required();
  cmdLearn->add_option("--seed", seed, "rng seed");
  addLearnFlags(cmdLearn);

  auto* cmdPredict = app.add_subcommand("predict", "score hidden atoms per ?hide block");
  cmdPredict->add_option("--model", modelPath, "model file")->required();
  cmdPredict->add_option("--stream", streamPath, "stream with ?hide blocks")->required();
  cmdPredict->add_option("--out", outPath, "rankings file (default stdout)");
  cmdPredict->add_option("--seed", seed, "rng seed");
  addPredictFlags(cmdPredict);

  auto* cmdEval = app.add_subcommand("eval", "rank and score against held-out labels");
  cmdEval->add_option("--model", modelPath, "model file")->required();
  cmdEval->add_option("--stream", streamPath, "stream with ?hide blocks")->required();
  cmdEval->add_option("--out", outPath, "report file (default stdout)");
  cmdEval->add_option("--seed", seed, "rng seed");
  addPredictFlags(cmdEval);

  auto* cmdSynth = app.add_subcommand("synth", "generate a synthetic stream");
  cmdSynth->add_option("--config", configPath, "JSON generator config")->required();
  cmdSynth->add_option("--out", outPath, "stream file")->required();
  cmdSynth->add_option("--manifest", manifestPath, "ground-truth manifest (JSON)");
  cmdSynth->add_option("--grammar-out", grammarOutPath, "also emit a covering grammar");
  cmdSynth->add_option("--seed", seed, "override config seed");

  auto* cmdPipeline = app.add_subcommand("pipeline", "expand, select, train in one run");
  cmdPipeline->add_option("--grammar", grammarPath, "grammar file")->required();
  cmdPipeline->add_option("--stream", streamPath, "training stream")->required();
  cmdPipeline->add_option("--mode", modeName, "resolwe|skipSelection");
  cmdPipeline->add_option("--k2", k2, "subgraphs used for selection");
  cmdPipeline->add_option("--theta", theta, "selection threshold");
  cmdPipeline->add_option("--out", outPath, "output directory")->required();
  cmdPipeline->add_option("--seed", seed, "rng seed");
  cmdPipeline->add_option("--test-stream", testStreamPath, "evaluate on this stream afterwards");
  addLearnFlags(cmdPipeline);

  CLI11_PARSE(app, argc, argv);

  try {
    using namespace resolwe;
    learn.rngSeed = seed;

    if (cmdExpand->parsed()) {
      Grammar g = parseGrammarFile(grammarPath);
      ExpansionResult r = expand(g, modeName == "skipSelection" ? ExpansionMode::AllVariants
                                                                : ExpansionMode::Selection);
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
      std::ofstream file;
      auto& out = openOut(file, outPath);
      for (const auto& f : r.formulas) out << f.text() << "\n";
      std::cerr << r.formulas.size() << " candidate formulas\n";
    } else if (cmdSelect->parsed()) {
      Grammar g = parseGrammarFile(grammarPath);
      ExpansionResult r = expand(g, ExpansionMode::Selection);
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
      std::vector<FormulaStats> stats(r.formulas.size());
      StreamReader reader(g.schema, streamPath);
      for (int s = 0; s < k2; ++s) {
        auto block = reader.next();
        if (!block)
          throw Error("stream exhausted after " + std::to_string(s) + " subgraphs (k2=" +
                      std::to_string(k2) + ")");
        for (size_t i = 0; i < r.formulas.size(); ++i)
          stats[i].absorb(evaluateSubgraph(r.formulas[i], block->db));
      }
      auto selected = finalizeSelection(r.formulas, stats, theta);
      std::filesystem::create_directories(outPath);
      std::ofstream report(outPath + "/selection.tsv");
      writeSelectionReport(report, r.formulas, stats, selected);
      std::vector<ResolvedFormula> resolved;
      for (const auto& s : selected) resolved.push_back(resolveConnectives(s));
      WeightedModel m = assembleModel(g.schema, resolved);
      writeModelFile(outPath + "/selected.model", m, learn);
      std::cerr << selected.size() << " of " << r.formulas.size() << " candidate forms kept\n";
    } else if (cmdLearn->parsed()) {
      LoadedModel loaded = readModelFile(modelPath);
      WeightedModel m = loaded.model;
      m.addMissingPriorClauses();
      for (int pass = 0; pass < learn.passes; ++pass) {
        StreamReader reader(m.schema, streamPath);
        uint64_t ordinal = static_cast<uint64_t>(pass) << 32;
        while (auto block = reader.next()) m = cdStep(m, block->db, learn, ordinal++);
      }
      writeModelFile(outPath, m, learn);
      std::cerr << "trained " << m.formulas.size() << " formulas\n";
    } else if (cmdPredict->parsed()) {
      LoadedModel loaded = readModelFile(modelPath);
      PredictOptions opts{exactLimit, burnIn, samples, seed};
      std::ofstream file;
      auto& out = openOut(file, outPath);
      StreamReader reader(loaded.model.schema, streamPath);
      long ordinal = 0;
      out << "subgraph\tatom\tscore\tlabel\n";
      while (auto block = reader.next()) {
        if (!block->hiddenPredicates.empty()) {
          std::vector<GroundAtom> hidden;
          for (int p : block->hiddenPredicates) {
            auto gs = targetGroundings(block->db, p);
            hidden.insert(hidden.end(), gs.begin(), gs.end());
          }
          PredictOptions perBlock = opts;
          perBlock.seed = detail::splitmix64(seed ^ static_cast<uint64_t>(ordinal));
          RankedPrediction ranking = predict(loaded.model, block->db, hidden, perBlock);
          for (const auto& e : ranking.entries)
            out << ordinal << "\t" << e.atom << "\t" << formatDouble(e.score) << "\t"
                << (e.label ? 1 : 0) << "\n";
        }
        ++ordinal;
      }
    } else if (cmdEval->parsed()) {
      LoadedModel loaded = readModelFile(modelPath);
      PredictOptions opts{exactLimit, burnIn, samples, seed};
      EvalResult r = evaluateStream(loaded.model, streamPath, opts);
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
      std::ofstream file;
      auto& out = openOut(file, outPath);
      writeEvalReport(out, r);
    } else if (cmdSynth->parsed()) {
      std::ifstream cfgFile(configPath);
      if (!cfgFile) throw Error("cannot open config " + configPath);
      json j = json::parse(cfgFile);
      SynthConfig cfg = synthConfigFromJson(j);
      if (cmdSynth->count("--seed")) cfg.seed = seed;
      std::ofstream streamOut(outPath);
      if (!streamOut) throw Error("cannot write " + outPath);
      SynthManifest manifest = synthGenerate(cfg, streamOut);
      if (!manifestPath.empty()) {
        json m;
        m["subgraphs"] = manifest.subgraphCount;
        m["seed"] = manifest.seed;
        m["planted"] = json::array();
        for (size_t i = 0; i < manifest.plantedFormulas.size(); ++i)
          m["planted"].push_back({{"formula", manifest.plantedFormulas[i]},
                                  {"p", manifest.plantedProbabilities[i]}});
        std::ofstream mf(manifestPath);
        if (!mf) throw Error("cannot write " + manifestPath);
        mf << m.dump(2) << "\n";
      }
      if (!grammarOutPath.empty()) {
        std::ofstream gf(grammarOutPath);
        if (!gf) throw Error("cannot write " + grammarOutPath);
        gf << candidateGrammarText(cfg);
      }
      std::cerr << "wrote " << manifest.subgraphCount << " subgraphs\n";
    } else if (cmdPipeline->parsed()) {
      PipelineConfig cfg;
      cfg.grammarPath = grammarPath;
      cfg.streamPath = streamPath;
      cfg.outputDir = outPath;
      cfg.k2 = k2;
      cfg.theta = theta;
      cfg.mode = parsePipelineMode(modeName);
      cfg.learn = learn;
      PipelineResult r = runPipeline(cfg);
      std::cerr << "selection " << formatDouble(r.step2Seconds) << "s, training "
                << formatDouble(r.step3Seconds) << "s, model " << r.model.formulas.size()
                << " formulas\n";
      if (!testStreamPath.empty()) {
        EvalResult ev = evaluateStream(r.model, testStreamPath, PredictOptions{20, 500, 2000, seed});
        for (const auto& w : ev.warnings) std::cerr << "warning: " << w << "\n";
        std::ofstream report(outPath + "/eval.tsv");
        writeEvalReport(report, ev);
        std::cerr << "eval: map " << ev.map << ", auc " << ev.auc.standard << "\n";
      }
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
