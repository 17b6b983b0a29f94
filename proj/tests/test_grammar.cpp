#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "resolwe/grammar.hpp"

using namespace resolwe;

namespace {

std::set<std::string> texts(const ExpansionResult& r) {
  std::set<std::string> out;
  for (const auto& f : r.formulas) out.insert(f.text());
  return out;
}

const char* kSocialGrammar =
    "# collaboration-style declarative bias\n"
    "predicate articleEdit(article,user) evidence\n"
    "predicate articleTalk(article,user) evidence\n"
    "predicate similar(article,article) evidence\n"
    "predicate category(article,cat) evidence\n"
    "predicate modifies(article,user) target\n";

}  // namespace

TEST_CASE("parseGrammar: declarations") {
  std::string g = std::string(kSocialGrammar) +
                  "placeholder EDIT(t1:article,u:user) := articleEdit(t1,u) | articleTalk(t1,u) "
                  "[compounder max=2]\n";
  Grammar grammar = parseGrammar(g);
  CHECK(grammar.schema->predicateCount() == 5);
  REQUIRE(grammar.placeholders.size() == 1);
  const PlaceholderDef& def = grammar.placeholders[0];
  CHECK(def.name == "EDIT");
  CHECK(def.bodies.size() == 2);
  CHECK(def.mode == PlaceholderMode::Compounder);
  CHECK(def.maxLen == 2);
  CHECK(def.params.size() == 2);
}

TEST_CASE("parseGrammar: free-connective template") {
  std::string g =
      "predicate friends(user,user) evidence\n"
      "predicate sameUrl(user,user) evidence\n"
      "predicate cFriends(user) target\n"
      "placeholder UREL(u1:user,u2:user) := friends(u1,u2) | sameUrl(u1,u2) [extender max=2]\n"
      "template UREL(u1,u2) ^ cFriends(u1) ?=> cFriends(u2)\n";
  Grammar grammar = parseGrammar(g);
  REQUIRE(grammar.templates.size() == 1);
  CHECK(grammar.templates[0].arrow == ArrowKind::Free);
  CHECK(grammar.templates[0].consequentElement == 2);
}

TEST_CASE("parseGrammar: empty grammar expands to nothing") {
  Grammar grammar = parseGrammar(kSocialGrammar);
  CHECK(expand(grammar, ExpansionMode::Selection).formulas.empty());
}

TEST_CASE("parseGrammar: errors carry line numbers") {
  SUBCASE("syntax error") {
    try {
      parseGrammar("predicate p(T) evidence\npredicate q(T target\n");
      FAIL("expected parse error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }
  SUBCASE("unresolved predicate") {
    CHECK_THROWS_AS(parseGrammar("predicate q(T) target\ntemplate nosuch(x) => q(x)\n"), Error);
  }
  SUBCASE("type mismatch") {
    CHECK_THROWS_AS(parseGrammar("predicate e(A,B) evidence\npredicate q(A) target\n"
                                 "template e(x,x) => q(x)\n"),
                    Error);
  }
  SUBCASE("qMarker needs two target literals") {
    CHECK_THROWS_AS(parseGrammar("predicate e(T,T) evidence\npredicate q(T) target\n"
                                 "template e(x,y) ?=> q(y)\n"),
                    Error);
  }
  SUBCASE("negated target literal rejected") {
    CHECK_THROWS_AS(parseGrammar("predicate e(T) evidence\npredicate q(T) target\n"
                                 "template e(x) ^ !q(x) => q(x)\n"),
                    Error);
  }
  SUBCASE("unknown placeholder mode") {
    CHECK_THROWS_AS(parseGrammar("predicate e(T) evidence\npredicate q(T) target\n"
                                 "placeholder P(x:T) := e(x) [sideways max=2]\n"),
                    Error);
  }
}

TEST_CASE("expand: plain placeholder product") {
  std::string g =
      "predicate a(T) evidence\npredicate b(T) evidence\npredicate c(T) evidence\n"
      "predicate q(T) target\n"
      "placeholder E1(x:T) := a(x) | b(x) | c(x)\n"
      "template E1(x) => q(x)\n";
  auto r = expand(parseGrammar(g), ExpansionMode::Selection);
  CHECK(r.formulas.size() == 3);
  CHECK(texts(r).count("a(v1) ^ q(v1)") == 1);

  // Two and three plain placeholders multiply.
  std::string g2 =
      "predicate a(T) evidence\npredicate b(T) evidence\n"
      "predicate c(T,T) evidence\npredicate d(T,T) evidence\n"
      "predicate q(T) target\n"
      "placeholder E1(x:T) := a(x) | b(x)\n"
      "placeholder R(x:T,y:T) := c(x,y) | d(x,y)\n"
      "template E1(x) ^ R(x,y) => q(y)\n";
  CHECK(expand(parseGrammar(g2), ExpansionMode::Selection).formulas.size() == 4);

  std::string g3 =
      "predicate a(T) evidence\npredicate b(T) evidence\npredicate c(T) evidence\n"
      "predicate r(T,T) evidence\npredicate s(T,T) evidence\n"
      "predicate q(T) target\n"
      "placeholder E1(x:T) := a(x) | b(x) | c(x)\n"
      "placeholder E2(x:T) := a(x) | c(x)\n"
      "placeholder R(x:T,y:T) := r(x,y) | s(x,y)\n"
      "template E1(x) ^ R(x,y) ^ E2(y) => q(y)\n";
  CHECK(expand(parseGrammar(g3), ExpansionMode::Selection).formulas.size() == 3 * 2 * 2);
}

TEST_CASE("expand: compounder adds conjunctions of distinct expansions") {
  std::string g =
      "predicate a(T) evidence\npredicate b(T) evidence\npredicate q(T) target\n"
      "placeholder E1(x:T) := a(x) | b(x) [compounder max=2]\n"
      "template E1(x) => q(x)\n";
  auto r = expand(parseGrammar(g), ExpansionMode::Selection);
  auto t = texts(r);
  CHECK(r.formulas.size() == 3);
  CHECK(t.count("a(v1) ^ q(v1)") == 1);
  CHECK(t.count("b(v1) ^ q(v1)") == 1);
  CHECK(t.count("a(v1) ^ b(v1) ^ q(v1)") == 1);
}

TEST_CASE("expand: compounder local variables standardize apart by default") {
  std::string g =
      "predicate cat(T,C) evidence\npredicate ext(T,C) evidence\npredicate q(T) target\n"
      "placeholder REL(t:T) := cat(t,c) | ext(t,c) [compounder max=2]\n"
      "template REL(t) => q(t)\n";
  auto r = expand(parseGrammar(g), ExpansionMode::Selection);
  auto t = texts(r);
  CHECK(t.count("cat(v1,v2) ^ ext(v1,v3) ^ q(v1)") == 1);

  std::string shared =
      "predicate cat(T,C) evidence\npredicate ext(T,C) evidence\npredicate q(T) target\n"
      "placeholder REL(t:T) := cat(t,c) | ext(t,c) [compounder max=2 shared-locals]\n"
      "template REL(t) => q(t)\n";
  auto r2 = expand(parseGrammar(shared), ExpansionMode::Selection);
  CHECK(texts(r2).count("cat(v1,v2) ^ ext(v1,v2) ^ q(v1)") == 1);
}

TEST_CASE("expand: extender chains through fresh midpoints") {
  std::string g =
      "predicate f(U,U) evidence\npredicate s(U,U) evidence\npredicate q(U) target\n"
      "placeholder UREL(u1:U,u2:U) := f(u1,u2) | s(u1,u2) [extender max=2]\n"
      "template UREL(u1,u2) => q(u2)\n";
  auto r = expand(parseGrammar(g), ExpansionMode::Selection);
  // 2 singles + 4 ordered chains (repeats allowed).
  CHECK(r.formulas.size() == 6);
  auto t = texts(r);
  CHECK(t.count("f(v1,v2) ^ q(v3) ^ s(v2,v3)") == 1);  // f then s chain
  CHECK(t.count("f(v1,v2) ^ q(v2) ^ s(v3,v1)") == 1);  // s then f chain
  CHECK(t.count("f(v1,v2) ^ f(v2,v3) ^ q(v3)") == 1);  // repeats allowed
  CHECK(t.count("q(v1) ^ s(v2,v1) ^ s(v3,v2)") == 1);
}

TEST_CASE("expand: canonical, deduplicated, order-independent") {
  std::string g =
      "predicate a(T) evidence\npredicate b(T) evidence\npredicate q(T) target\n"
      "placeholder E1(x:T) := a(x) | b(x) [compounder max=2]\n"
      "placeholder E2(x:T) := b(x) | a(x) [compounder max=2]\n"
      "template E1(x) => q(x)\n"
      "template E2(x) => q(x)\n";
  auto r = expand(parseGrammar(g), ExpansionMode::Selection);
  CHECK(r.formulas.size() == 3);  // both templates generate the same set
  for (const auto& f : r.formulas) {
    CHECK(canonicalize(f).text() == f.text());
    CHECK_FALSE(f.targetIndices().empty());
  }
  auto again = expand(parseGrammar(g), ExpansionMode::Selection);
  CHECK(texts(r) == texts(again));
}

TEST_CASE("expand: qMarker candidates collapse in selection mode, fan out in AllVariants") {
  std::string g =
      "predicate rel(U,U) evidence\n"
      "predicate q(U) target\n"
      "template rel(u1,u2) ^ q(u1) ?=> q(u2)\n"
      "template rel(u1,u2) ^ q(u1) ^ q(u2)\n";  // explicit conjunction variant
  auto selection = expand(parseGrammar(g), ExpansionMode::Selection);
  CHECK(selection.formulas.size() == 1);  // one candidate literal set

  auto all = expand(parseGrammar(g), ExpansionMode::AllVariants);
  REQUIRE(all.formulas.size() == 3);  // conjunction + one implication per target
  int implications = 0;
  for (const auto& f : all.formulas)
    if (f.form() == ConnectiveForm::Implication) ++implications;
  CHECK(implications == 2);
}

TEST_CASE("expand: no-target expansion is rejected with a diagnostic") {
  std::string g =
      "predicate a(T) evidence\npredicate q(T) target\n"
      "template a(x) ^ a(x)\n"
      "template a(x) => q(x)\n";
  auto r = expand(parseGrammar(g), ExpansionMode::Selection);
  CHECK(r.formulas.size() == 1);
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings[0].find("no target literal") != std::string::npos);
}

TEST_CASE("parseFormulaText round-trips canonical text") {
  std::string g =
      "predicate e(T,T) evidence\npredicate q(T) target\n";
  auto schema = parseGrammar(g).schema;
  auto f = canonicalize(parseFormulaText(schema, "e(a,b) ^ !q(a) ^ q(b)"));
  auto g2 = parseFormulaText(schema, f.text());
  CHECK(canonicalize(g2).text() == f.text());
}
