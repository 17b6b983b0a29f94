#pragma once
// Typed first-order core: predicate schemas, conjunctive formulas, and
// closed-world subgraph databases with index-backed grounding joins.

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace resolwe {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

inline uint64_t fnv1a(std::string_view s, uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

enum class PredicateRole { Evidence, Target };

struct PredicateSchema {
  std::string name;
  std::vector<int> argTypes;
  PredicateRole role = PredicateRole::Evidence;

  int arity() const { return static_cast<int>(argTypes.size()); }
};

/// Registry of entity types and predicate declarations. Formulas and
/// databases reference predicates and types by index into a shared schema.
class Schema {
 public:
  int addType(const std::string& name) {
    auto it = typeIds_.find(name);
    if (it != typeIds_.end()) return it->second;
    int id = static_cast<int>(types_.size());
    types_.push_back(name);
    typeIds_.emplace(name, id);
    return id;
  }

  int typeId(std::string_view name) const {
    auto it = typeIds_.find(name);
    return it == typeIds_.end() ? -1 : it->second;
  }

  const std::string& typeName(int id) const { return types_.at(id); }
  int typeCount() const { return static_cast<int>(types_.size()); }

  int addPredicate(const std::string& name, const std::vector<std::string>& argTypeNames,
                   PredicateRole role) {
    if (argTypeNames.empty()) throw Error("predicate " + name + " has no arguments");
    if (predIds_.count(name)) throw Error("duplicate predicate " + name);
    PredicateSchema p;
    p.name = name;
    p.role = role;
    for (const auto& t : argTypeNames) p.argTypes.push_back(addType(t));
    int id = static_cast<int>(preds_.size());
    preds_.push_back(std::move(p));
    predIds_.emplace(name, id);
    return id;
  }

  int predicateId(std::string_view name) const {
    auto it = predIds_.find(name);
    return it == predIds_.end() ? -1 : it->second;
  }

  const PredicateSchema& predicate(int id) const { return preds_.at(id); }
  int predicateCount() const { return static_cast<int>(preds_.size()); }

  std::vector<int> targetPredicates() const {
    std::vector<int> out;
    for (int i = 0; i < predicateCount(); ++i)
      if (preds_[i].role == PredicateRole::Target) out.push_back(i);
    return out;
  }

  // Name-sorted declaration listing; stable across declaration order.
  std::string canonicalText() const {
    std::vector<std::string> lines;
    for (const auto& p : preds_) {
      std::string s = p.name + "(";
      for (size_t i = 0; i < p.argTypes.size(); ++i)
        s += (i ? "," : "") + types_[p.argTypes[i]];
      s += p.role == PredicateRole::Target ? ") target" : ") evidence";
      lines.push_back(std::move(s));
    }
    std::sort(lines.begin(), lines.end());
    std::string out;
    for (auto& l : lines) out += l + "\n";
    return out;
  }

  uint64_t hash() const { return fnv1a(canonicalText()); }

 private:
  struct NameHash {
    using is_transparent = void;
    size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
  };

  std::vector<std::string> types_;
  std::unordered_map<std::string, int, NameHash, std::equal_to<>> typeIds_;
  std::vector<PredicateSchema> preds_;
  std::unordered_map<std::string, int, NameHash, std::equal_to<>> predIds_;
};

using SchemaPtr = std::shared_ptr<const Schema>;

struct Term {
  enum class Kind { Variable, Constant };
  Kind kind = Kind::Variable;
  int var = -1;        // index into the owning formula's variable table
  std::string symbol;  // constant name when kind == Constant

  static Term variable(int v) {
    Term t;
    t.kind = Kind::Variable;
    t.var = v;
    return t;
  }
  static Term constant(std::string name) {
    Term t;
    t.kind = Kind::Constant;
    t.symbol = std::move(name);
    return t;
  }
  bool isVar() const { return kind == Kind::Variable; }
  bool operator==(const Term& o) const {
    return kind == o.kind && var == o.var && symbol == o.symbol;
  }
};

struct FormulaVar {
  std::string name;
  int type = -1;
};

struct Literal {
  int predicate = -1;
  std::vector<Term> args;
  bool negated = false;

  bool operator==(const Literal& o) const {
    return predicate == o.predicate && negated == o.negated && args == o.args;
  }
};

enum class ConnectiveForm { Conjunction, Implication };

/// An ordered conjunction of typed literals over one schema. At least one
/// literal must use a target predicate. Implication form singles out one
/// target literal as the consequent; it requires at least two target
/// literals (single-target rules stay conjunctions, the connective adds
/// nothing there).
class ConjunctiveFormula {
 public:
  ConjunctiveFormula(SchemaPtr schema, std::vector<FormulaVar> vars,
                     std::vector<Literal> literals,
                     ConnectiveForm form = ConnectiveForm::Conjunction, int consequent = -1)
      : schema_(std::move(schema)),
        vars_(std::move(vars)),
        literals_(std::move(literals)),
        form_(form),
        consequent_(consequent) {
    validate();
  }

  const Schema& schema() const { return *schema_; }
  const SchemaPtr& schemaPtr() const { return schema_; }
  const std::vector<FormulaVar>& vars() const { return vars_; }
  const std::vector<Literal>& literals() const { return literals_; }
  ConnectiveForm form() const { return form_; }
  int consequent() const { return consequent_; }

  bool isTargetLiteral(int i) const {
    return schema_->predicate(literals_[i].predicate).role == PredicateRole::Target;
  }

  std::vector<int> targetIndices() const {
    std::vector<int> out;
    for (size_t i = 0; i < literals_.size(); ++i)
      if (isTargetLiteral(static_cast<int>(i))) out.push_back(static_cast<int>(i));
    return out;
  }

  std::vector<int> evidenceIndices() const {
    std::vector<int> out;
    for (size_t i = 0; i < literals_.size(); ++i)
      if (!isTargetLiteral(static_cast<int>(i))) out.push_back(static_cast<int>(i));
    return out;
  }

  std::string literalText(int i) const {
    const Literal& l = literals_[i];
    std::string s = l.negated ? "!" : "";
    s += schema_->predicate(l.predicate).name + "(";
    for (size_t a = 0; a < l.args.size(); ++a) {
      if (a) s += ",";
      s += l.args[a].isVar() ? vars_[l.args[a].var].name : l.args[a].symbol;
    }
    return s + ")";
  }

  // "e(v1,v2) ^ q(v2)" for conjunctions; the implication consequent is
  // printed last after "=>".
  std::string text() const {
    std::string s;
    for (size_t i = 0; i < literals_.size(); ++i) {
      if (form_ == ConnectiveForm::Implication && static_cast<int>(i) == consequent_) continue;
      if (!s.empty()) s += " ^ ";
      s += literalText(static_cast<int>(i));
    }
    if (form_ == ConnectiveForm::Implication) s += " => " + literalText(consequent_);
    return s;
  }

  ConjunctiveFormula withForm(ConnectiveForm form, int consequent = -1) const {
    return ConjunctiveFormula(schema_, vars_, literals_, form, consequent);
  }

  bool operator==(const ConjunctiveFormula& o) const {
    return literals_ == o.literals_ && form_ == o.form_ && consequent_ == o.consequent_;
  }

 private:
  void validate() const {
    if (!schema_) throw Error("formula without schema");
    std::vector<char> used(vars_.size(), 0);
    int targets = 0;
    for (const auto& l : literals_) {
      if (l.predicate < 0 || l.predicate >= schema_->predicateCount())
        throw Error("formula references unknown predicate");
      const PredicateSchema& p = schema_->predicate(l.predicate);
      if (static_cast<int>(l.args.size()) != p.arity())
        throw Error("arity mismatch in literal of " + p.name);
      for (size_t a = 0; a < l.args.size(); ++a) {
        const Term& t = l.args[a];
        if (t.isVar()) {
          if (t.var < 0 || t.var >= static_cast<int>(vars_.size()))
            throw Error("literal of " + p.name + " uses undeclared variable");
          if (vars_[t.var].type != p.argTypes[a])
            throw Error("type mismatch: variable " + vars_[t.var].name + " at position " +
                        std::to_string(a + 1) + " of " + p.name);
          used[t.var] = 1;
        }
      }
      if (p.role == PredicateRole::Target) ++targets;
    }
    if (targets == 0) throw Error("formula has no target literal");
    // Variables bound by no positive literal are legal: enumeration ranges
    // them over their type domain (this also keeps implication rewrites
    // with a free-standing negated consequent constructible).
    for (size_t v = 0; v < vars_.size(); ++v)
      if (!used[v]) throw Error("unused variable " + vars_[v].name);
    if (form_ == ConnectiveForm::Implication) {
      if (targets < 2) throw Error("implication form requires at least two target literals");
      if (consequent_ < 0 || consequent_ >= static_cast<int>(literals_.size()))
        throw Error("implication consequent out of range");
      if (schema_->predicate(literals_[consequent_].predicate).role != PredicateRole::Target)
        throw Error("implication consequent must be a target literal");
    } else if (consequent_ != -1) {
      throw Error("conjunction carries a consequent index");
    }
  }

  SchemaPtr schema_;
  std::vector<FormulaVar> vars_;
  std::vector<Literal> literals_;
  ConnectiveForm form_;
  int consequent_;
};

/// Order-preserving split into evidence literals E and target literals Q.
inline std::pair<std::vector<Literal>, std::vector<Literal>> splitFormula(
    const ConjunctiveFormula& f) {
  std::vector<Literal> evidence, target;
  for (size_t i = 0; i < f.literals().size(); ++i) {
    if (f.isTargetLiteral(static_cast<int>(i)))
      target.push_back(f.literals()[i]);
    else
      evidence.push_back(f.literals()[i]);
  }
  return {std::move(evidence), std::move(target)};
}

/// Rewrites a formula into its canonical representative: exact duplicate
/// literals dropped, literals ordered, variables renamed v1,v2,... in
/// first-occurrence order. Two formulas equal up to variable renaming and
/// literal permutation canonicalize identically.
inline ConjunctiveFormula canonicalize(const ConjunctiveFormula& f) {
  const Schema& sc = f.schema();

  // Exact duplicate removal (same predicate, sign and argument terms).
  std::vector<Literal> lits;
  int consequent = f.consequent();
  {
    std::vector<Literal> seen;
    std::vector<int> remap(f.literals().size(), -1);
    for (size_t i = 0; i < f.literals().size(); ++i) {
      const Literal& l = f.literals()[i];
      auto it = std::find(seen.begin(), seen.end(), l);
      if (it == seen.end()) {
        remap[i] = static_cast<int>(lits.size());
        seen.push_back(l);
        lits.push_back(l);
      } else {
        remap[i] = static_cast<int>(it - seen.begin());
      }
    }
    if (consequent >= 0) consequent = remap[consequent];
  }

  // Renaming-invariant grouping key: predicate, sign and the literal-local
  // repetition pattern of its arguments.
  auto groupKey = [&](const Literal& l) {
    std::string k = sc.predicate(l.predicate).name + (l.negated ? "/!/" : "/+/");
    std::vector<int> local;
    for (const auto& t : l.args) {
      if (t.isVar()) {
        auto it = std::find(local.begin(), local.end(), t.var);
        if (it == local.end()) {
          local.push_back(t.var);
          k += "x" + std::to_string(local.size() - 1);
        } else {
          k += "x" + std::to_string(it - local.begin());
        }
      } else {
        k += "#" + t.symbol;
      }
      k += ",";
    }
    return k;
  };

  struct Entry {
    Literal lit;
    std::string key;
    int orig;
  };
  std::vector<Entry> entries;
  for (size_t i = 0; i < lits.size(); ++i)
    entries.push_back({lits[i], groupKey(lits[i]), static_cast<int>(i)});
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) { return a.key < b.key; });

  // Group boundaries over equal keys; literal order is resolved by trying
  // every within-group permutation and keeping the smallest encoding.
  std::vector<std::pair<int, int>> groups;
  for (size_t i = 0; i < entries.size();) {
    size_t j = i;
    while (j < entries.size() && entries[j].key == entries[i].key) ++j;
    groups.emplace_back(static_cast<int>(i), static_cast<int>(j));
    i = j;
  }
  long combos = 1;
  std::vector<std::vector<std::vector<int>>> groupPerms;
  for (auto [b, e] : groups) {
    std::vector<int> idx;
    for (int i = b; i < e; ++i) idx.push_back(i);
    std::vector<std::vector<int>> perms;
    std::sort(idx.begin(), idx.end());
    do {
      perms.push_back(idx);
    } while (std::next_permutation(idx.begin(), idx.end()));
    combos *= static_cast<long>(perms.size());
    if (combos > 40320) throw Error("formula too large to canonicalize");
    groupPerms.push_back(std::move(perms));
  }

  std::string bestEnc;
  std::vector<int> bestOrder;
  std::vector<int> choice(groups.size(), 0);
  auto tryArrangement = [&]() {
    std::vector<int> order;
    for (size_t g = 0; g < groups.size(); ++g)
      for (int e : groupPerms[g][choice[g]]) order.push_back(e);
    std::vector<int> rename(f.vars().size(), -1);
    int next = 0;
    std::string enc;
    int consPos = -1;
    for (size_t pos = 0; pos < order.size(); ++pos) {
      const Entry& en = entries[order[pos]];
      if (en.orig == consequent) consPos = static_cast<int>(pos);
      enc += en.lit.negated ? "!" : "+";
      enc += sc.predicate(en.lit.predicate).name + "(";
      for (const auto& t : en.lit.args) {
        if (t.isVar()) {
          if (rename[t.var] < 0) rename[t.var] = next++;
          enc += "v" + std::to_string(rename[t.var]);
        } else {
          enc += "#" + t.symbol;
        }
        enc += ",";
      }
      enc += ")";
    }
    enc += "|" + std::to_string(consPos);
    if (bestEnc.empty() || enc < bestEnc) {
      bestEnc = enc;
      bestOrder = order;
    }
  };
  while (true) {
    tryArrangement();
    size_t g = 0;
    for (; g < groups.size(); ++g) {
      if (++choice[g] < static_cast<int>(groupPerms[g].size())) break;
      choice[g] = 0;
    }
    if (g == groups.size()) break;
  }

  // Rebuild with the winning order and fresh v1..vn names.
  std::vector<int> rename(f.vars().size(), -1);
  std::vector<FormulaVar> newVars;
  std::vector<Literal> newLits;
  int newConsequent = -1;
  for (size_t pos = 0; pos < bestOrder.size(); ++pos) {
    const Entry& en = entries[bestOrder[pos]];
    if (en.orig == consequent) newConsequent = static_cast<int>(pos);
    Literal l = en.lit;
    for (auto& t : l.args) {
      if (!t.isVar()) continue;
      if (rename[t.var] < 0) {
        rename[t.var] = static_cast<int>(newVars.size());
        newVars.push_back({"v" + std::to_string(newVars.size() + 1), f.vars()[t.var].type});
      }
      t.var = rename[t.var];
    }
    newLits.push_back(std::move(l));
  }
  return ConjunctiveFormula(f.schemaPtr(), std::move(newVars), std::move(newLits), f.form(),
                            f.form() == ConnectiveForm::Implication ? newConsequent : -1);
}

struct GroundAtom {
  int predicate = -1;
  std::vector<int> args;

  bool operator==(const GroundAtom& o) const {
    return predicate == o.predicate && args == o.args;
  }
  bool operator<(const GroundAtom& o) const {
    if (predicate != o.predicate) return predicate < o.predicate;
    return args < o.args;
  }
};

struct GroundAtomHash {
  size_t operator()(const GroundAtom& a) const {
    uint64_t h = 1469598103934665603ull ^ static_cast<uint64_t>(a.predicate);
    for (int v : a.args) {
      h ^= static_cast<uint64_t>(v) + 0x9e3779b97f4a7c15ull;
      h *= 1099511628211ull;
    }
    return static_cast<size_t>(h);
  }
};

/// One streamed subgraph: interned constants plus the set of true ground
/// atoms, under the closed-world assumption. Atoms are indexed per
/// predicate and per (argument position, constant) for join enumeration.
/// Immutable once loaded; safe for concurrent reads.
class SubgraphDatabase {
 public:
  explicit SubgraphDatabase(SchemaPtr schema) : schema_(std::move(schema)) {
    if (!schema_) throw Error("database without schema");
    relations_.resize(schema_->predicateCount());
    for (int p = 0; p < schema_->predicateCount(); ++p)
      relations_[p].postings.resize(schema_->predicate(p).arity());
    byType_.resize(schema_->typeCount());
    byTypeSeen_.resize(schema_->typeCount());
  }

  const Schema& schema() const { return *schema_; }
  const SchemaPtr& schemaPtr() const { return schema_; }

  int constantId(std::string_view name) const {
    auto it = constIds_.find(name);
    return it == constIds_.end() ? -1 : it->second;
  }
  const std::string& constantName(int id) const { return constNames_.at(id); }
  int constantCount() const { return static_cast<int>(constNames_.size()); }

  // Type domains are the constants observed at typed argument positions of
  // this subgraph's atoms; there is no global constant registry.
  const std::vector<int>& constantsOfType(int type) const { return byType_.at(type); }

  void addAtom(const std::string& pred, const std::vector<std::string>& argNames) {
    int p = schema_->predicateId(pred);
    if (p < 0) throw Error("unknown predicate " + pred);
    std::vector<int> args;
    args.reserve(argNames.size());
    for (const auto& n : argNames) args.push_back(intern(n));
    addAtom(p, std::move(args));
  }

  // Allocation-light path for the stream reader: args as views into the
  // caller's line buffer.
  void addAtomViews(int pred, const std::vector<std::string_view>& argNames) {
    std::vector<int> args;
    args.reserve(argNames.size());
    for (auto n : argNames) args.push_back(intern(n));
    addAtom(pred, std::move(args));
  }

  void addAtom(int pred, std::vector<int> args) {
    const PredicateSchema& ps = schema_->predicate(pred);
    if (static_cast<int>(args.size()) != ps.arity())
      throw Error("arity mismatch for atom of " + ps.name);
    Relation& rel = relations_[pred];
    GroundAtom atom{pred, args};
    if (atomSet_.count(atom)) return;  // duplicates collapse
    for (size_t i = 0; i < args.size(); ++i) registerType(args[i], ps.argTypes[i]);
    int idx = static_cast<int>(rel.tuples.size());
    for (size_t i = 0; i < args.size(); ++i) rel.postings[i][args[i]].push_back(idx);
    rel.tuples.push_back(std::move(atom.args));
    atomSet_.insert(GroundAtom{pred, rel.tuples.back()});
    ++atomCount_;
  }

  bool holdsTuple(int pred, const std::vector<int>& args) const {
    return atomSet_.count(GroundAtom{pred, args}) > 0;
  }
  bool holdsAtom(const GroundAtom& a) const { return atomSet_.count(a) > 0; }

  size_t atomCount() const { return atomCount_; }
  const std::vector<std::vector<int>>& tuples(int pred) const {
    return relations_.at(pred).tuples;
  }
  size_t relationSize(int pred) const { return relations_.at(pred).tuples.size(); }

  const std::vector<int>* posting(int pred, int pos, int constant) const {
    const auto& m = relations_.at(pred).postings.at(pos);
    auto it = m.find(constant);
    return it == m.end() ? nullptr : &it->second;
  }

  std::string atomText(const GroundAtom& a) const {
    std::string s = schema_->predicate(a.predicate).name + "(";
    for (size_t i = 0; i < a.args.size(); ++i) s += (i ? "," : "") + constNames_[a.args[i]];
    return s + ")";
  }

  // Lenient lookup used by generators and oracles: unknown constants make
  // the atom false rather than raising.
  bool holdsNamed(int pred, const std::vector<std::string>& argNames) const {
    std::vector<int> args;
    args.reserve(argNames.size());
    for (const auto& n : argNames) {
      int id = constantId(n);
      if (id < 0) return false;
      args.push_back(id);
    }
    return holdsTuple(pred, args);
  }

  // Approximate resident size, used by the streaming-memory checks.
  size_t approxBytes() const {
    size_t b = 0;
    for (const auto& n : constNames_) b += n.size() + 48;
    for (const auto& r : relations_) {
      for (const auto& t : r.tuples) b += t.size() * 4 + 48;
      b += r.tuples.size() * 32;  // set + posting overhead, roughly
    }
    return b;
  }

 private:
  struct Relation {
    std::vector<std::vector<int>> tuples;
    std::vector<std::unordered_map<int, std::vector<int>>> postings;
  };

  int intern(std::string_view name) {
    auto it = constIds_.find(name);
    if (it != constIds_.end()) return it->second;
    int id = static_cast<int>(constNames_.size());
    constNames_.emplace_back(name);
    constIds_.emplace(constNames_.back(), id);
    typesSeen_.emplace_back();
    return id;
  }

  void registerType(int constId, int type) {
    auto& seen = typesSeen_[constId];
    if (std::find(seen.begin(), seen.end(), type) != seen.end()) return;
    seen.push_back(type);
    byType_[type].push_back(constId);
    byTypeSeen_[type].insert(constId);
  }

  struct StringHash {
    using is_transparent = void;
    size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
  };

  SchemaPtr schema_;
  std::vector<std::string> constNames_;
  std::unordered_map<std::string, int, StringHash, std::equal_to<>> constIds_;
  std::vector<std::vector<int>> typesSeen_;  // per constant, types already recorded
  std::vector<std::vector<int>> byType_;
  std::vector<std::unordered_set<int>> byTypeSeen_;
  std::vector<Relation> relations_;
  std::unordered_set<GroundAtom, GroundAtomHash> atomSet_;
  size_t atomCount_ = 0;
};

/// Closed-world truth of a fully ground literal. All argument constants
/// must be known to the database.
inline bool holds(const SubgraphDatabase& db, const Literal& lit) {
  if (lit.predicate < 0 || lit.predicate >= db.schema().predicateCount())
    throw Error("holds: unknown predicate");
  std::vector<int> args;
  args.reserve(lit.args.size());
  for (const auto& t : lit.args) {
    if (t.isVar()) throw Error("holds: literal is not ground");
    int id = db.constantId(t.symbol);
    if (id < 0) throw Error("holds: unknown constant " + t.symbol);
    args.push_back(id);
  }
  bool truth = db.holdsTuple(lit.predicate, args);
  return lit.negated ? !truth : truth;
}

/// A total assignment of constants to the variables of an expression;
/// entries are database constant ids, -1 where a variable is unbound.
struct Substitution {
  std::vector<int> constants;

  bool operator==(const Substitution& o) const { return constants == o.constants; }
  bool operator<(const Substitution& o) const { return constants < o.constants; }
};

namespace detail {

// Variables not bound by any positive literal; these range over their type
// domain during enumeration.
inline std::vector<int> extensionVars(size_t varCount, const std::vector<Literal>& lits) {
  std::vector<char> bound(varCount, 0);
  for (const auto& l : lits) {
    if (l.negated) continue;
    for (const auto& t : l.args)
      if (t.isVar()) bound[t.var] = 1;
  }
  std::vector<int> out;
  for (size_t v = 0; v < varCount; ++v)
    if (!bound[v]) out.push_back(static_cast<int>(v));
  return out;
}

template <class Fn>
class BindingEnumerator {
 public:
  BindingEnumerator(const SubgraphDatabase& db, const std::vector<FormulaVar>& vars,
                    const std::vector<Literal>& lits, const std::vector<int>& extendVars,
                    Fn& fn)
      : db_(db), vars_(vars), extend_(extendVars), fn_(fn) {
    for (const auto& l : lits) {
      Prepared p;
      p.lit = &l;
      p.dead = false;
      for (const auto& t : l.args) {
        if (t.isVar()) {
          p.constIds.push_back(-1);
        } else {
          int id = db.constantId(t.symbol);
          if (id < 0) p.dead = true;
          p.constIds.push_back(id);
        }
      }
      if (l.negated) {
        if (!p.dead) negatives_.push_back(std::move(p));  // dead negative: always true
      } else {
        if (p.dead) anyDeadPositive_ = true;
        positives_.push_back(std::move(p));
      }
    }
    // Assign each negative to the point where all its variables are bound:
    // level 0 right after the positive join, level i+1 after extend_[i].
    std::vector<int> varLevel(vars.size(), 0);
    for (size_t i = 0; i < extend_.size(); ++i) varLevel[extend_[i]] = static_cast<int>(i) + 1;
    negAtLevel_.resize(extend_.size() + 1);
    for (size_t n = 0; n < negatives_.size(); ++n) {
      int level = 0;
      for (const auto& t : negatives_[n].lit->args)
        if (t.isVar()) level = std::max(level, varLevel[t.var]);
      negAtLevel_[level].push_back(static_cast<int>(n));
    }
  }

  void run() {
    if (anyDeadPositive_) return;
    binding_.assign(vars_.size(), -1);
    used_.assign(positives_.size(), 0);
    joinStep(static_cast<int>(positives_.size()));
  }

 private:
  struct Prepared {
    const Literal* lit;
    std::vector<int> constIds;  // -1 at variable positions
    bool dead;
  };

  int argValue(const Prepared& p, size_t i) const {
    const Term& t = p.lit->args[i];
    return t.isVar() ? binding_[t.var] : p.constIds[i];
  }

  bool negativeHolds(const Prepared& p) const {
    std::vector<int> args(p.lit->args.size());
    for (size_t i = 0; i < args.size(); ++i) args[i] = argValue(p, i);
    return db_.holdsTuple(p.lit->predicate, args);
  }

  // Cost estimate: fully bound literals first, then the smallest posting
  // list among bound positions, then full relation size.
  long estimate(const Prepared& p) const {
    long best = -1;
    bool fullyBound = true;
    for (size_t i = 0; i < p.lit->args.size(); ++i) {
      int v = argValue(p, i);
      if (v < 0) {
        fullyBound = false;
        continue;
      }
      const std::vector<int>* post = db_.posting(p.lit->predicate, static_cast<int>(i), v);
      long sz = post ? static_cast<long>(post->size()) : 0;
      if (best < 0 || sz < best) best = sz;
    }
    if (fullyBound) return 0;
    if (best >= 0) return best;
    return static_cast<long>(db_.relationSize(p.lit->predicate));
  }

  void joinStep(int remaining) {
    if (remaining == 0) {
      for (int n : negAtLevel_[0])
        if (negativeHolds(negatives_[n])) return;
      extendStep(0);
      return;
    }
    int pick = -1;
    long bestCost = 0;
    for (size_t i = 0; i < positives_.size(); ++i) {
      if (used_[i]) continue;
      long c = estimate(positives_[i]);
      if (pick < 0 || c < bestCost) {
        pick = static_cast<int>(i);
        bestCost = c;
      }
    }
    used_[pick] = 1;
    const Prepared& p = positives_[pick];
    const Literal& lit = *p.lit;

    // Choose the candidate tuple source.
    int boundPos = -1;
    long boundSize = -1;
    bool fullyBound = true;
    for (size_t i = 0; i < lit.args.size(); ++i) {
      int v = argValue(p, i);
      if (v < 0) {
        fullyBound = false;
        continue;
      }
      const std::vector<int>* post = db_.posting(lit.predicate, static_cast<int>(i), v);
      long sz = post ? static_cast<long>(post->size()) : 0;
      if (boundSize < 0 || sz < boundSize) {
        boundSize = sz;
        boundPos = static_cast<int>(i);
      }
    }

    if (fullyBound) {
      std::vector<int> args(lit.args.size());
      for (size_t i = 0; i < args.size(); ++i) args[i] = argValue(p, i);
      if (db_.holdsTuple(lit.predicate, args)) joinStep(remaining - 1);
    } else if (boundPos >= 0) {
      const std::vector<int>* post =
          db_.posting(lit.predicate, boundPos, argValue(p, boundPos));
      if (post) {
        const auto& tuples = db_.tuples(lit.predicate);
        for (int idx : *post) matchTuple(p, tuples[idx], remaining);
      }
    } else {
      for (const auto& tuple : db_.tuples(lit.predicate)) matchTuple(p, tuple, remaining);
    }
    used_[pick] = 0;
  }

  void matchTuple(const Prepared& p, const std::vector<int>& tuple, int remaining) {
    std::vector<int> newlyBound;
    bool ok = true;
    for (size_t i = 0; i < tuple.size() && ok; ++i) {
      const Term& t = p.lit->args[i];
      if (t.isVar()) {
        int cur = binding_[t.var];
        if (cur < 0) {
          binding_[t.var] = tuple[i];
          newlyBound.push_back(t.var);
        } else if (cur != tuple[i]) {
          ok = false;
        }
      } else if (p.constIds[i] != tuple[i]) {
        ok = false;
      }
    }
    if (ok) joinStep(remaining - 1);
    for (int v : newlyBound) binding_[v] = -1;
  }

  void extendStep(size_t level) {
    if (level == extend_.size()) {
      fn_(binding_);
      return;
    }
    int var = extend_[level];
    for (int c : db_.constantsOfType(vars_[var].type)) {
      binding_[var] = c;
      bool ok = true;
      for (int n : negAtLevel_[level + 1]) {
        if (negativeHolds(negatives_[n])) {
          ok = false;
          break;
        }
      }
      if (ok) extendStep(level + 1);
    }
    binding_[var] = -1;
  }

  const SubgraphDatabase& db_;
  const std::vector<FormulaVar>& vars_;
  const std::vector<int>& extend_;
  Fn& fn_;
  std::vector<Prepared> positives_;
  std::vector<Prepared> negatives_;
  std::vector<std::vector<int>> negAtLevel_;
  std::vector<int> binding_;
  std::vector<char> used_;
  bool anyDeadPositive_ = false;
};

}  // namespace detail

/// Enumerates substitutions satisfying `lits`: positive literals are joined
/// most-selective-first over the posting indexes, `extendVars` range over
/// their full type domain, and negated literals filter as soon as all their
/// variables are bound. Calls `fn` once per satisfying binding.
template <class Fn>
void forEachBinding(const SubgraphDatabase& db, const std::vector<FormulaVar>& vars,
                    const std::vector<Literal>& lits, const std::vector<int>& extendVars,
                    Fn&& fn) {
  detail::BindingEnumerator<Fn> e(db, vars, lits, extendVars, fn);
  e.run();
}

/// All substitutions over vars(lits) under which every literal holds.
/// Negated literals must have every variable bound by a positive literal
/// in `lits` (safe negation).
inline std::vector<Substitution> satisfyingBindings(const SubgraphDatabase& db,
                                                    const std::vector<FormulaVar>& vars,
                                                    const std::vector<Literal>& lits) {
  if (lits.empty()) throw Error("satisfyingBindings: empty literal list");
  std::vector<char> positiveBound(vars.size(), 0);
  for (const auto& l : lits)
    if (!l.negated)
      for (const auto& t : l.args)
        if (t.isVar()) positiveBound[t.var] = 1;
  for (const auto& l : lits) {
    if (!l.negated) continue;
    for (const auto& t : l.args)
      if (t.isVar() && !positiveBound[t.var])
        throw Error("unsafe negation: variable " + vars[t.var].name +
                    " is not bound by a positive literal");
  }
  std::vector<Substitution> out;
  forEachBinding(db, vars, lits, {},
                 [&](const std::vector<int>& b) { out.push_back(Substitution{b}); });
  return out;
}

}  // namespace resolwe
