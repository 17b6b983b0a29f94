#pragma once
// Declarative-bias grammar: parsing and expansion of templates into the
// candidate formula set.
//
// Grammar file format (UTF-8, line oriented, '#' starts a comment):
//
//   predicate name(type,...) evidence|target
//   placeholder NAME(v:type,...) := body | body ... [plain|compounder max=N|extender max=N]
//   template elem ^ elem ... (=> literal | ?=> literal | ^ literal)*
//
// A body is a '^'-joined literal list over the placeholder parameters;
// variables in a body that are not parameters are fresh locals, introduced
// per expansion instance. Compounders may additionally expand to a
// conjunction of up to max distinct bodies; by default their locals are
// standardized apart per conjunct ([compounder max=N shared-locals] makes
// same-named locals refer to one variable across the conjuncts). Extenders
// take exactly two parameters of one type and may chain up to max bodies
// through fresh intermediate variables. '?=>' marks a rule whose connective
// among target literals is left to selection.

#include <cctype>
#include <fstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "resolwe/logic.hpp"

namespace resolwe {

enum class PlaceholderMode { Plain, Compounder, Extender };

struct PlaceholderBody {
  std::vector<FormulaVar> locals;  // fresh variables beyond the parameters
  std::vector<Literal> literals;   // args index params first, then locals
};

struct PlaceholderDef {
  std::string name;
  std::vector<FormulaVar> params;
  std::vector<PlaceholderBody> bodies;
  PlaceholderMode mode = PlaceholderMode::Plain;
  int maxLen = 1;
  bool sharedLocals = false;
};

struct TemplateElement {
  bool isPlaceholder = false;
  Literal literal;              // when concrete; args are template var ids
  int placeholder = -1;         // when invocation
  std::vector<int> args;        // template var ids passed to the placeholder
};

enum class ArrowKind { None, Fixed, Free };

struct Template {
  std::vector<FormulaVar> vars;
  std::vector<TemplateElement> elements;
  int consequentElement = -1;  // element index of the arrow literal
  ArrowKind arrow = ArrowKind::None;
  int line = 0;
};

struct Grammar {
  SchemaPtr schema;
  std::vector<PlaceholderDef> placeholders;
  std::unordered_map<std::string, int> placeholderIds;
  std::vector<Template> templates;
};

namespace detail {

struct Token {
  std::string text;
  bool ident = false;
};

inline std::vector<Token> lexLine(const std::string& raw, int line) {
  std::vector<Token> out;
  std::string s = raw;
  auto hash = s.find('#');
  if (hash != std::string::npos) s.erase(hash);
  size_t i = 0;
  auto isIdent = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-';
  };
  while (i < s.size()) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (isIdent(c)) {
      size_t j = i;
      while (j < s.size() && isIdent(s[j])) ++j;
      out.push_back({s.substr(i, j - i), true});
      i = j;
      continue;
    }
    if (s.compare(i, 3, "?=>") == 0) {
      out.push_back({"?=>", false});
      i += 3;
      continue;
    }
    if (s.compare(i, 2, "=>") == 0 || s.compare(i, 2, ":=") == 0) {
      out.push_back({s.substr(i, 2), false});
      i += 2;
      continue;
    }
    if (std::string("(),:|[]^!=").find(c) != std::string::npos) {
      out.push_back({std::string(1, c), false});
      ++i;
      continue;
    }
    throw Error("line " + std::to_string(line) + ": unexpected character '" +
                std::string(1, c) + "'");
  }
  return out;
}

class TokenCursor {
 public:
  TokenCursor(std::vector<Token> tokens, int line) : tokens_(std::move(tokens)), line_(line) {}

  bool done() const { return pos_ >= tokens_.size(); }
  const std::string& peek() const {
    static const std::string empty;
    return done() ? empty : tokens_[pos_].text;
  }
  bool peekIdent() const { return !done() && tokens_[pos_].ident; }
  std::string takeIdent(const std::string& what) {
    if (!peekIdent()) fail("expected " + what);
    return tokens_[pos_++].text;
  }
  void expect(const std::string& t) {
    if (done() || tokens_[pos_].text != t) fail("expected '" + t + "'");
    ++pos_;
  }
  bool accept(const std::string& t) {
    if (!done() && tokens_[pos_].text == t) {
      ++pos_;
      return true;
    }
    return false;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw Error("line " + std::to_string(line_) + ": " + msg +
                (done() ? " at end of line" : " near '" + tokens_[pos_].text + "'"));
  }
  int line() const { return line_; }

 private:
  std::vector<Token> tokens_;
  size_t pos_ = 0;
  int line_;
};

// Parses `[!]pred(v1,...)` binding variables through `varId`, which maps a
// name to a variable slot and records/unifies its type.
template <class VarResolver>
Literal parseLiteral(TokenCursor& cur, const Schema& schema, VarResolver&& varId) {
  Literal lit;
  lit.negated = cur.accept("!");
  std::string name = cur.takeIdent("predicate name");
  int pred = schema.predicateId(name);
  if (pred < 0) cur.fail("unknown predicate '" + name + "'");
  lit.predicate = pred;
  const PredicateSchema& ps = schema.predicate(pred);
  cur.expect("(");
  for (int a = 0; a < ps.arity(); ++a) {
    if (a) cur.expect(",");
    std::string v = cur.takeIdent("variable");
    lit.args.push_back(Term::variable(varId(v, ps.argTypes[a])));
  }
  cur.expect(")");
  if (lit.negated && ps.role == PredicateRole::Target)
    cur.fail("negated target literal '" + name + "' (selection handles negative patterns)");
  return lit;
}

}  // namespace detail

/// Parses the grammar file format. All predicate, placeholder, arity and
/// type references are resolved; errors carry the offending line number.
inline Grammar parseGrammar(const std::string& text) {
  Grammar g;
  auto schema = std::make_shared<Schema>();

  std::vector<std::string> lines;
  {
    std::string cur;
    for (char c : text) {
      if (c == '\n') {
        lines.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    lines.push_back(cur);
  }

  // Pass 1: predicates; pass 2: placeholders and templates, so declaration
  // order does not matter between sections.
  std::vector<std::pair<int, std::vector<detail::Token>>> deferred;
  for (size_t n = 0; n < lines.size(); ++n) {
    int lineNo = static_cast<int>(n) + 1;
    auto tokens = detail::lexLine(lines[n], lineNo);
    if (tokens.empty()) continue;
    if (tokens[0].text == "predicate") {
      detail::TokenCursor cur(std::move(tokens), lineNo);
      cur.expect("predicate");
      std::string name = cur.takeIdent("predicate name");
      cur.expect("(");
      std::vector<std::string> argTypes;
      argTypes.push_back(cur.takeIdent("type name"));
      while (cur.accept(",")) argTypes.push_back(cur.takeIdent("type name"));
      cur.expect(")");
      std::string role = cur.takeIdent("role (evidence|target)");
      if (role != "evidence" && role != "target") cur.fail("role must be evidence or target");
      if (!cur.done()) cur.fail("trailing tokens");
      try {
        schema->addPredicate(name, argTypes,
                             role == "target" ? PredicateRole::Target : PredicateRole::Evidence);
      } catch (const Error& e) {
        throw Error("line " + std::to_string(lineNo) + ": " + e.what());
      }
    } else {
      deferred.emplace_back(lineNo, std::move(tokens));
    }
  }
  g.schema = schema;

  for (auto& [lineNo, tokens] : deferred) {
    detail::TokenCursor cur(std::move(tokens), lineNo);
    if (cur.accept("placeholder")) {
      PlaceholderDef def;
      def.name = cur.takeIdent("placeholder name");
      if (g.placeholderIds.count(def.name)) cur.fail("duplicate placeholder " + def.name);
      if (schema->predicateId(def.name) >= 0)
        cur.fail("placeholder name collides with predicate " + def.name);
      cur.expect("(");
      while (true) {
        std::string v = cur.takeIdent("parameter name");
        cur.expect(":");
        std::string t = cur.takeIdent("parameter type");
        int type = schema->typeId(t);
        if (type < 0) cur.fail("unknown type '" + t + "'");
        def.params.push_back({v, type});
        if (!cur.accept(",")) break;
      }
      cur.expect(")");
      cur.expect(":=");
      while (true) {
        PlaceholderBody body;
        std::unordered_map<std::string, int> slots;
        for (size_t i = 0; i < def.params.size(); ++i)
          slots[def.params[i].name] = static_cast<int>(i);
        auto varId = [&](const std::string& name, int type) {
          auto it = slots.find(name);
          if (it != slots.end()) {
            int id = it->second;
            const FormulaVar& fv = id < static_cast<int>(def.params.size())
                                       ? def.params[id]
                                       : body.locals[id - def.params.size()];
            if (fv.type != type)
              cur.fail("variable " + name + " used at conflicting types");
            return id;
          }
          int id = static_cast<int>(def.params.size() + body.locals.size());
          body.locals.push_back({name, type});
          slots[name] = id;
          return id;
        };
        body.literals.push_back(detail::parseLiteral(cur, *schema, varId));
        while (cur.accept("^"))
          body.literals.push_back(detail::parseLiteral(cur, *schema, varId));
        // Each body must mention every parameter, otherwise expansion drops it.
        for (size_t i = 0; i < def.params.size(); ++i) {
          bool used = false;
          for (const auto& l : body.literals)
            for (const auto& t : l.args)
              if (t.isVar() && t.var == static_cast<int>(i)) used = true;
          if (!used) cur.fail("body does not use parameter " + def.params[i].name);
        }
        def.bodies.push_back(std::move(body));
        if (!cur.accept("|")) break;
      }
      if (cur.accept("[")) {
        std::string mode = cur.takeIdent("mode");
        if (mode == "plain") {
          def.mode = PlaceholderMode::Plain;
        } else if (mode == "compounder" || mode == "extender") {
          def.mode =
              mode == "compounder" ? PlaceholderMode::Compounder : PlaceholderMode::Extender;
          cur.expect("max");
          cur.expect("=");
          std::string n = cur.takeIdent("max length");
          def.maxLen = std::atoi(n.c_str());
          if (def.maxLen < 1) cur.fail("max must be >= 1");
          if (cur.accept("shared-locals")) {
            if (def.mode != PlaceholderMode::Compounder)
              cur.fail("shared-locals applies to compounders only");
            def.sharedLocals = true;
          }
        } else {
          cur.fail("mode must be plain, compounder or extender");
        }
        cur.expect("]");
      }
      if (!cur.done()) cur.fail("trailing tokens");
      if (def.mode == PlaceholderMode::Extender) {
        if (def.params.size() != 2 || def.params[0].type != def.params[1].type)
          cur.fail("extender requires exactly two parameters of one type");
      }
      if (def.sharedLocals) {
        std::unordered_map<std::string, int> localTypes;
        for (const auto& b : def.bodies)
          for (const auto& l : b.locals) {
            auto [it, inserted] = localTypes.emplace(l.name, l.type);
            if (!inserted && it->second != l.type)
              cur.fail("shared-locals: local " + l.name + " has conflicting types");
          }
      }
      g.placeholderIds.emplace(def.name, static_cast<int>(g.placeholders.size()));
      g.placeholders.push_back(std::move(def));
    } else if (cur.accept("template")) {
      Template tpl;
      tpl.line = lineNo;
      std::unordered_map<std::string, int> slots;
      auto varId = [&](const std::string& name, int type) {
        auto it = slots.find(name);
        if (it != slots.end()) {
          if (tpl.vars[it->second].type != type)
            cur.fail("variable " + name + " used at conflicting types");
          return it->second;
        }
        int id = static_cast<int>(tpl.vars.size());
        tpl.vars.push_back({name, type});
        slots[name] = id;
        return id;
      };
      auto parseElement = [&]() {
        TemplateElement el;
        if (cur.peekIdent() && g.placeholderIds.count(cur.peek())) {
          el.isPlaceholder = true;
          el.placeholder = g.placeholderIds.at(cur.takeIdent("placeholder"));
          const PlaceholderDef& def = g.placeholders[el.placeholder];
          cur.expect("(");
          for (size_t a = 0; a < def.params.size(); ++a) {
            if (a) cur.expect(",");
            std::string v = cur.takeIdent("variable");
            el.args.push_back(varId(v, def.params[a].type));
          }
          cur.expect(")");
        } else {
          el.literal = detail::parseLiteral(cur, *schema, varId);
        }
        return el;
      };
      tpl.elements.push_back(parseElement());
      while (!cur.done()) {
        if (cur.accept("^")) {
          tpl.elements.push_back(parseElement());
        } else if (cur.peek() == "=>" || cur.peek() == "?=>") {
          if (tpl.arrow != ArrowKind::None) cur.fail("template has two arrows");
          tpl.arrow = cur.accept("=>") ? ArrowKind::Fixed : ArrowKind::Free;
          if (tpl.arrow == ArrowKind::Free) cur.expect("?=>");
          TemplateElement el;
          el.literal = detail::parseLiteral(cur, *schema, varId);
          tpl.consequentElement = static_cast<int>(tpl.elements.size());
          tpl.elements.push_back(std::move(el));
        } else {
          cur.fail("expected '^', '=>' or '?=>'");
        }
      }
      if (tpl.arrow == ArrowKind::Free) {
        // Free-connective templates must already show >= 2 target literals
        // among their concrete literals.
        int targets = 0;
        for (const auto& el : tpl.elements)
          if (!el.isPlaceholder &&
              schema->predicate(el.literal.predicate).role == PredicateRole::Target)
            ++targets;
        if (targets < 2) cur.fail("'?=>' requires at least two target literals");
      }
      g.templates.push_back(std::move(tpl));
    } else {
      cur.fail("expected 'predicate', 'placeholder' or 'template'");
    }
  }
  return g;
}

inline Grammar parseGrammarFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open grammar file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parseGrammar(buf.str());
}

enum class ExpansionMode { Selection, AllVariants };

struct ExpansionResult {
  std::vector<ConjunctiveFormula> formulas;
  std::vector<std::string> warnings;
};

namespace detail {

// One way to realize a placeholder invocation: a literal list whose args
// refer either to invocation parameters (slot < params) or to fresh
// variables allocated at assembly time.
struct Piece {
  std::vector<FormulaVar> fresh;
  std::vector<Literal> literals;  // var ids: [0,params) invocation args, then fresh
};

inline std::vector<Piece> placeholderPieces(const PlaceholderDef& def) {
  const int np = static_cast<int>(def.params.size());
  auto instantiate = [&](const PlaceholderBody& body, Piece& piece,
                         const std::vector<int>& paramSlots,
                         std::unordered_map<std::string, int>* sharedSlots) {
    std::vector<int> localSlot(body.locals.size(), -1);
    for (size_t i = 0; i < body.locals.size(); ++i) {
      if (sharedSlots) {
        auto it = sharedSlots->find(body.locals[i].name);
        if (it != sharedSlots->end()) {
          localSlot[i] = it->second;
          continue;
        }
      }
      int slot = np + static_cast<int>(piece.fresh.size());
      piece.fresh.push_back(body.locals[i]);
      localSlot[i] = slot;
      if (sharedSlots) sharedSlots->emplace(body.locals[i].name, slot);
    }
    for (Literal l : body.literals) {
      for (auto& t : l.args) {
        if (!t.isVar()) continue;
        t.var = t.var < np ? paramSlots[t.var] : localSlot[t.var - np];
      }
      piece.literals.push_back(std::move(l));
    }
  };

  std::vector<int> identity(np);
  for (int i = 0; i < np; ++i) identity[i] = i;

  std::vector<Piece> out;
  for (const auto& body : def.bodies) {
    Piece p;
    instantiate(body, p, identity, nullptr);
    out.push_back(std::move(p));
  }

  if (def.mode == PlaceholderMode::Compounder) {
    // Unordered subsets of 2..maxLen distinct bodies.
    const int nb = static_cast<int>(def.bodies.size());
    std::vector<int> subset;
    auto emit = [&]() {
      Piece p;
      std::unordered_map<std::string, int> shared;
      for (int b : subset)
        instantiate(def.bodies[b], p, identity, def.sharedLocals ? &shared : nullptr);
      out.push_back(std::move(p));
    };
    auto rec = [&](auto&& self, int start, int want) -> void {
      if (want == 0) {
        emit();
        return;
      }
      for (int b = start; b <= nb - want; ++b) {
        subset.push_back(b);
        self(self, b + 1, want - 1);
        subset.pop_back();
      }
    };
    for (int len = 2; len <= def.maxLen; ++len) rec(rec, 0, len);
  } else if (def.mode == PlaceholderMode::Extender) {
    // Ordered chains of 2..maxLen bodies (repeats allowed) linked through
    // fresh midpoint variables of the parameter type.
    const int nb = static_cast<int>(def.bodies.size());
    std::vector<int> chain;
    auto emit = [&]() {
      Piece p;
      const int len = static_cast<int>(chain.size());
      std::vector<int> mids;
      for (int m = 0; m < len - 1; ++m) {
        mids.push_back(np + static_cast<int>(p.fresh.size()));
        p.fresh.push_back({"z" + std::to_string(m + 1), def.params[0].type});
      }
      for (int m = 0; m < len; ++m) {
        std::vector<int> slots{m == 0 ? 0 : mids[m - 1], m == len - 1 ? 1 : mids[m]};
        instantiate(def.bodies[chain[m]], p, slots, nullptr);
      }
      out.push_back(std::move(p));
    };
    auto rec = [&](auto&& self, int want) -> void {
      if (want == 0) {
        emit();
        return;
      }
      for (int b = 0; b < nb; ++b) {
        chain.push_back(b);
        self(self, want - 1);
        chain.pop_back();
      }
    };
    for (int len = 2; len <= def.maxLen; ++len) rec(rec, len);
  }
  return out;
}

}  // namespace detail

/// Expands every template against the placeholder definitions. Selection
/// mode yields one conjunction-form candidate per distinct literal set;
/// AllVariants additionally emits, for every candidate with >= 2 target
/// literals, each implication form (one per possible consequent), giving
/// the baseline the full set a selection run could ever output.
inline ExpansionResult expand(const Grammar& g, ExpansionMode mode) {
  ExpansionResult result;
  std::unordered_set<std::string> seen;

  for (const auto& tpl : g.templates) {
    // Per-element alternatives.
    std::vector<std::vector<detail::Piece>> alternatives;
    for (const auto& el : tpl.elements) {
      if (el.isPlaceholder) {
        alternatives.push_back(detail::placeholderPieces(g.placeholders[el.placeholder]));
      } else {
        detail::Piece p;
        p.literals.push_back(el.literal);
        alternatives.push_back({std::move(p)});
      }
    }

    std::vector<int> choice(tpl.elements.size(), 0);
    while (true) {
      // Assemble one formula from the current piece choice.
      std::vector<FormulaVar> vars = tpl.vars;
      std::vector<Literal> lits;
      int consequentLit = -1;
      int fresh = 0;
      for (size_t e = 0; e < tpl.elements.size(); ++e) {
        const auto& el = tpl.elements[e];
        const detail::Piece& piece = alternatives[e][choice[e]];
        if (static_cast<int>(e) == tpl.consequentElement)
          consequentLit = static_cast<int>(lits.size());
        if (!el.isPlaceholder) {
          lits.push_back(piece.literals[0]);
          continue;
        }
        std::vector<int> slotToVar(el.args.size() + piece.fresh.size());
        for (size_t a = 0; a < el.args.size(); ++a) slotToVar[a] = el.args[a];
        for (size_t fIdx = 0; fIdx < piece.fresh.size(); ++fIdx) {
          slotToVar[el.args.size() + fIdx] = static_cast<int>(vars.size());
          vars.push_back(
              {piece.fresh[fIdx].name + "#" + std::to_string(++fresh), piece.fresh[fIdx].type});
        }
        for (Literal l : piece.literals) {
          for (auto& t : l.args)
            if (t.isVar()) t.var = slotToVar[t.var];
          lits.push_back(std::move(l));
        }
      }

      int targets = 0;
      for (const auto& l : lits)
        if (g.schema->predicate(l.predicate).role == PredicateRole::Target) ++targets;
      if (targets == 0) {
        result.warnings.push_back("template at line " + std::to_string(tpl.line) +
                                  ": expansion '" + g.schema->predicate(lits[0].predicate).name +
                                  " ...' has no target literal; rejected");
      } else {
        ConjunctiveFormula base = canonicalize(
            ConjunctiveFormula(g.schema, std::move(vars), std::move(lits)));
        (void)consequentLit;  // the connective is resolved by selection, not authorship
        std::string key = base.text();
        if (seen.insert(key).second) {
          if (mode == ExpansionMode::Selection) {
            result.formulas.push_back(std::move(base));
          } else {
            result.formulas.push_back(base);
            if (targets >= 2)
              for (int k : base.targetIndices())
                result.formulas.push_back(
                    canonicalize(base.withForm(ConnectiveForm::Implication, k)));
          }
        }
      }

      size_t e = 0;
      for (; e < choice.size(); ++e) {
        if (++choice[e] < static_cast<int>(alternatives[e].size())) break;
        choice[e] = 0;
      }
      if (e == choice.size()) break;
    }
  }
  return result;
}

/// Parses "lit ^ lit ^ ... [=> lit]" against an existing schema. Every
/// argument token is a variable; types are inferred from predicate
/// positions. Used for model files and planted-rule declarations.
inline ConjunctiveFormula parseFormulaText(const SchemaPtr& schema, const std::string& text) {
  auto tokens = detail::lexLine(text, 1);
  detail::TokenCursor cur(std::move(tokens), 1);
  std::vector<FormulaVar> vars;
  std::unordered_map<std::string, int> slots;
  auto varId = [&](const std::string& name, int type) {
    auto it = slots.find(name);
    if (it != slots.end()) {
      if (vars[it->second].type != type) cur.fail("variable " + name + " used at conflicting types");
      return it->second;
    }
    int id = static_cast<int>(vars.size());
    vars.push_back({name, type});
    slots[name] = id;
    return id;
  };
  // Negated target literals are legal here: rewritten rule forms carry them.
  auto parseLit = [&]() {
    Literal lit;
    lit.negated = cur.accept("!");
    std::string name = cur.takeIdent("predicate name");
    int pred = schema->predicateId(name);
    if (pred < 0) cur.fail("unknown predicate '" + name + "'");
    const PredicateSchema& ps = schema->predicate(pred);
    lit.predicate = pred;
    cur.expect("(");
    for (int a = 0; a < ps.arity(); ++a) {
      if (a) cur.expect(",");
      lit.args.push_back(Term::variable(varId(cur.takeIdent("variable"), ps.argTypes[a])));
    }
    cur.expect(")");
    return lit;
  };
  std::vector<Literal> lits;
  lits.push_back(parseLit());
  int consequent = -1;
  while (!cur.done()) {
    if (cur.accept("^")) {
      lits.push_back(parseLit());
    } else if (cur.accept("=>")) {
      consequent = static_cast<int>(lits.size());
      lits.push_back(parseLit());
      if (!cur.done()) cur.fail("trailing tokens after consequent");
      break;
    } else {
      cur.fail("expected '^' or '=>'");
    }
  }
  int targets = 0;
  for (const auto& l : lits)
    if (schema->predicate(l.predicate).role == PredicateRole::Target) ++targets;
  if (consequent >= 0 && targets >= 2)
    return ConjunctiveFormula(schema, std::move(vars), std::move(lits),
                              ConnectiveForm::Implication, consequent);
  return ConjunctiveFormula(schema, std::move(vars), std::move(lits));
}

}  // namespace resolwe
